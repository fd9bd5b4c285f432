#pragma once

// Exact solver for the cutting-plane master problem
//
//   min_{z, eta} eta  s.t.  eta >= a_k + g_k^T z  (every cut k),
//                           z in {0,1}^p,  sum(z) <= s,
//
// by best-first branch-and-bound. Node bounds come from the Lagrangian dual
// that prices the cuts with simplex weights w: for fixed w the relaxation
// min_z (sum_k w_k a_k) + (sum_k w_k g_k)^T z over the cardinality polytope is
// solved exactly by taking the most negative free coefficients, so every w
// gives a valid bound and subgradient ascent only tightens it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spca/error.hpp"
#include "spca/support.hpp"

namespace spca {

struct Cut {
  BinaryVector anchor;
  double value = 0.0;    // F(anchor)
  Eigen::VectorXd grad;  // subgradient of F at anchor
  double offset = 0.0;   // value - grad^T anchor

  static Cut make(BinaryVector anchor, double value, Eigen::VectorXd grad) {
    if (static_cast<Index>(anchor.size()) != grad.size()) throw ParameterError("Cut: anchor/grad length mismatch");
    Cut c;
    c.offset = value;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
      if (anchor[i]) c.offset -= grad[static_cast<Index>(i)];
    }
    c.anchor = std::move(anchor);
    c.value = value;
    c.grad = std::move(grad);
    return c;
  }

  // offset + grad^T z, summed in index order.
  double at(std::span<const std::uint8_t> z) const {
    double v = offset;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i]) v += grad[static_cast<Index>(i)];
    }
    return v;
  }
};

struct MasterIncumbent {
  BinaryVector z;
  double eta = std::numeric_limits<double>::infinity();
};

class MasterProblem {
 public:
  MasterProblem(Index p, Index s) : p_(p), s_(s), grads_(p, 0) {
    if (p < 1) throw ParameterError("MasterProblem: p must be >= 1");
    if (s < 0) throw ParameterError("MasterProblem: s must be >= 0");
  }

  Index p() const noexcept { return p_; }
  Index s() const noexcept { return s_; }
  const std::vector<Cut>& cuts() const noexcept { return cuts_; }
  Index num_cuts() const noexcept { return static_cast<Index>(cuts_.size()); }

  // Column k holds the gradient of cut k.
  const Eigen::MatrixXd& gradient_matrix() const noexcept { return grads_; }
  const Eigen::VectorXd& offsets() const noexcept { return offsets_; }

  void add_cut(Cut cut) {
    if (cut.grad.size() != p_) throw ParameterError("MasterProblem: cut gradient has wrong length");
    const Index k = num_cuts();
    grads_.conservativeResize(p_, k + 1);
    grads_.col(k) = cut.grad;
    offsets_.conservativeResize(k + 1);
    offsets_[k] = cut.offset;
    cuts_.push_back(std::move(cut));
  }

  bool feasible(std::span<const std::uint8_t> z) const {
    return static_cast<Index>(z.size()) == p_ && cardinality(z) <= s_;
  }

  // max_k a_k + g_k^T z. The one evaluation routine shared by the
  // branch-and-bound and the enumeration oracle, so ties compare exactly.
  double evaluate(std::span<const std::uint8_t> z) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const Cut& c : cuts_) best = std::max(best, c.at(z));
    return best;
  }

  void set_incumbent(BinaryVector z) {
    if (!feasible(z)) throw ParameterError("MasterProblem: infeasible incumbent");
    incumbent_ = MasterIncumbent{std::move(z), 0.0};
  }
  const std::optional<MasterIncumbent>& incumbent() const noexcept { return incumbent_; }

 private:
  Index p_;
  Index s_;
  std::vector<Cut> cuts_;
  Eigen::MatrixXd grads_;
  Eigen::VectorXd offsets_;
  std::optional<MasterIncumbent> incumbent_;
};

struct BnbNode {
  IndexSet fixed_one;
  IndexSet fixed_zero;
  double bound = -std::numeric_limits<double>::infinity();
  Index depth = 0;
};

struct MasterOptions {
  double gap_tol = 0.0;
  int dual_iters = 50;
  std::int64_t max_nodes = 5'000'000;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  // Variables forced to zero at the root (restricted solves).
  BinaryVector root_fixed_zero;
};

struct MasterSolution {
  BinaryVector z;
  double eta = 0.0;
  std::int64_t nodes_explored = 0;
  double lower_bound = 0.0;  // certified; equals eta when solved exactly
};

// Node budget or deadline hit before the tree was closed. Carries the best
// feasible point found and a valid lower bound.
class MasterBudgetExceeded : public Error {
 public:
  explicit MasterBudgetExceeded(MasterSolution best)
      : Error("solve_master: budget exhausted (incumbent " + std::to_string(best.eta) + ", bound " +
              std::to_string(best.lower_bound) + ")"),
        best_(std::move(best)) {}

  const MasterSolution& best() const noexcept { return best_; }

 private:
  MasterSolution best_;
};

namespace detail {

// Euclidean projection onto the probability simplex.
inline void project_simplex(Eigen::VectorXd& w) {
  const Index k = w.size();
  Eigen::VectorXd sorted = w;
  std::sort(sorted.data(), sorted.data() + k, std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (Index i = 0; i < k; ++i) {
    cumulative += sorted[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - t > 0.0) shift = t;
  }
  w = (w.array() - shift).cwiseMax(0.0);
  const double total = w.sum();
  if (total > 0.0) w /= total;
}

// -1 free, 0 fixed to zero, 1 fixed to one.
using NodeState = std::vector<std::int8_t>;

inline NodeState node_state(Index p, const BnbNode& node) {
  NodeState st(static_cast<std::size_t>(p), -1);
  for (Index i : node.fixed_zero) st[static_cast<std::size_t>(i)] = 0;
  for (Index i : node.fixed_one) st[static_cast<std::size_t>(i)] = 1;
  return st;
}

struct Relaxation {
  double value = 0.0;
  BinaryVector z;  // minimizer (integral by construction)
};

// min over the node's relaxed feasible set of (aw + gw^T z).
inline Relaxation solve_relaxation(double aw, const Eigen::VectorXd& gw, const NodeState& st, Index budget,
                                   std::vector<Index>& scratch) {
  Relaxation r;
  r.z.assign(st.size(), 0);
  r.value = aw;
  scratch.clear();
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i] == 1) {
      r.value += gw[static_cast<Index>(i)];
      r.z[i] = 1;
    } else if (st[i] == -1 && gw[static_cast<Index>(i)] < 0.0) {
      scratch.push_back(static_cast<Index>(i));
    }
  }
  const auto take = std::min<std::size_t>(scratch.size(), static_cast<std::size_t>(std::max<Index>(budget, 0)));
  auto by_value = [&](Index a, Index b) { return gw[a] < gw[b] || (gw[a] == gw[b] && a < b); };
  if (take < scratch.size()) {
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take), scratch.end(), by_value);
  }
  for (std::size_t t = 0; t < take; ++t) {
    const Index i = scratch[t];
    r.value += gw[i];
    r.z[static_cast<std::size_t>(i)] = 1;
  }
  return r;
}

struct NodeBoundResult {
  double bound = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd weights;  // weights attaining the bound
  BinaryVector best_point;  // best relaxation minimizer seen (feasible binary point)
  double best_point_value = std::numeric_limits<double>::infinity();
};

inline NodeBoundResult lagrangian_bound(const MasterProblem& mp, const NodeState& st, Index budget, int dual_iters,
                                        const Eigen::VectorXd* warm_start) {
  const Index k = mp.num_cuts();
  const Eigen::MatrixXd& grads = mp.gradient_matrix();
  const Eigen::VectorXd& offsets = mp.offsets();
  std::vector<Index> scratch;
  scratch.reserve(st.size());

  NodeBoundResult out;
  Eigen::VectorXd w;
  if (warm_start != nullptr && warm_start->size() == k && warm_start->sum() > 0.0) {
    w = *warm_start;
    project_simplex(w);
  } else {
    // Start from the single cut giving the largest bound on its own.
    Index best_k = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < k; ++c) {
      const double v = solve_relaxation(offsets[c], grads.col(c), st, budget, scratch).value;
      if (v > best_v) {
        best_v = v;
        best_k = c;
      }
    }
    w = Eigen::VectorXd::Zero(k);
    w[best_k] = 1.0;
  }

  Eigen::VectorXd gw(mp.p());
  Eigen::VectorXd cut_values(k);
  for (int t = 0;; ++t) {
    gw.noalias() = grads * w;
    const double aw = offsets.dot(w);
    Relaxation r = solve_relaxation(aw, gw, st, budget, scratch);
    if (r.value > out.bound) {
      out.bound = r.value;
      out.weights = w;
    }
    // Cut values at the relaxation minimizer form the dual subgradient.
    cut_values = offsets;
    for (std::size_t i = 0; i < r.z.size(); ++i) {
      if (r.z[i]) cut_values += grads.row(static_cast<Index>(i)).transpose();
    }
    const double point_value = cut_values.maxCoeff();
    if (point_value < out.best_point_value) {
      out.best_point_value = point_value;
      out.best_point = r.z;
    }
    if (t >= dual_iters || k == 1) break;
    const double range = cut_values.maxCoeff() - cut_values.minCoeff();
    if (!(range > 0.0)) break;  // every cut agrees at the minimizer: w is optimal
    const double step = 1.0 / std::sqrt(static_cast<double>(t + 1));
    w += (step / range) * cut_values;
    project_simplex(w);
  }
  return out;
}

inline bool lex_less(const IndexSet& a, const IndexSet& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Lexicographically smallest support contained in the node: all fixed ones
// plus the smallest free indices below the largest fixed one, budget
// permitting. A proper prefix sorts first, so nothing past the last
// fixed-one is ever added.
inline IndexSet lex_min_support(const NodeState& st, Index budget) {
  Index last_one = -1;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i] == 1) last_one = static_cast<Index>(i);
  }
  IndexSet out;
  for (Index i = 0; i <= last_one; ++i) {
    const auto v = st[static_cast<std::size_t>(i)];
    if (v == 1) {
      out.push_back(i);
    } else if (v == -1 && budget > 0) {
      out.push_back(i);
      --budget;
    }
  }
  return out;
}

}  // namespace detail

// Valid lower bound on min_z max_k (a_k + g_k^T z) over the node.
inline double node_lower_bound(const MasterProblem& mp, const BnbNode& node, int dual_iters = 50) {
  if (mp.num_cuts() == 0) throw ParameterError("node_lower_bound: no cuts");
  if (static_cast<Index>(node.fixed_one.size()) > mp.s()) throw ParameterError("node_lower_bound: node infeasible");
  const auto st = detail::node_state(mp.p(), node);
  const Index budget = mp.s() - static_cast<Index>(node.fixed_one.size());
  return detail::lagrangian_bound(mp, st, budget, dual_iters, nullptr).bound;
}

// Best-first branch-and-bound. With gap_tol = 0 the returned point is an
// exact minimizer, and among minimizers the one whose sorted support is
// lexicographically smallest.
inline MasterSolution solve_master(const MasterProblem& mp, const MasterOptions& opt = {}) {
  if (mp.num_cuts() == 0) throw ParameterError("solve_master: need at least one cut");
  if (!(opt.gap_tol >= 0.0)) throw ParameterError("solve_master: gap_tol must be >= 0");
  const Index p = mp.p();
  const Index s = mp.s();
  const bool tie_break = opt.gap_tol == 0.0;

  MasterSolution inc;
  inc.eta = std::numeric_limits<double>::infinity();
  IndexSet inc_support;

  auto offer = [&](const BinaryVector& z, double value) {
    IndexSet sup = support_of(z);
    if (value < inc.eta || (value == inc.eta && detail::lex_less(sup, inc_support))) {
      inc.z = z;
      inc.eta = value;
      inc_support = std::move(sup);
    }
  };

  BnbNode root;
  if (!opt.root_fixed_zero.empty()) {
    if (static_cast<Index>(opt.root_fixed_zero.size()) != p) throw ParameterError("solve_master: mask length");
    root.fixed_zero = support_of(opt.root_fixed_zero);
  }
  {
    const BinaryVector zero(static_cast<std::size_t>(p), 0);
    offer(zero, mp.evaluate(zero));
    if (const auto& warm = mp.incumbent()) {
      bool allowed = true;
      for (Index i : root.fixed_zero) allowed = allowed && warm->z[static_cast<std::size_t>(i)] == 0;
      if (allowed) offer(warm->z, mp.evaluate(warm->z));
    }
  }

  auto scale = [](double v) { return 1.0 + std::abs(v); };
  // Can the node still hold a point that beats the incumbent?
  // Smallest bound among nodes discarded by the gap tolerance rather than
  // by dominance; the certified lower bound cannot exceed it.
  double tolerance_floor = std::numeric_limits<double>::infinity();
  auto prunable = [&](double bound, const detail::NodeState& st, Index budget) {
    if (!tie_break) {
      if (bound < inc.eta - std::max(opt.gap_tol * std::abs(inc.eta), 1e-12 * scale(inc.eta))) return false;
      if (bound < inc.eta) tolerance_floor = std::min(tolerance_floor, bound);
      return true;
    }
    if (bound > inc.eta + 1e-10 * scale(inc.eta)) return true;
    if (bound >= inc.eta - 1e-12 * scale(inc.eta)) {
      return !detail::lex_less(detail::lex_min_support(st, budget), inc_support);
    }
    return false;
  };

  struct Open {
    BnbNode node;
    Eigen::VectorXd weights;
    std::int64_t id;
  };
  auto worse = [](const Open& a, const Open& b) {
    if (a.node.bound != b.node.bound) return a.node.bound > b.node.bound;
    if (a.node.depth != b.node.depth) return a.node.depth < b.node.depth;
    return a.id > b.id;
  };
  std::priority_queue<Open, std::vector<Open>, decltype(worse)> open(worse);
  std::int64_t next_id = 0;
  std::int64_t explored = 0;

  // Bounds the node, harvests its relaxation point, and queues it unless it
  // is a leaf or can be pruned.
  auto process = [&](BnbNode node, const Eigen::VectorXd* warm) {
    ++explored;
    const auto st = detail::node_state(p, node);
    const Index budget = s - static_cast<Index>(node.fixed_one.size());
    const bool has_free = std::any_of(st.begin(), st.end(), [](std::int8_t v) { return v == -1; });
    if (budget == 0 || !has_free) {
      BinaryVector z = indicator(p, node.fixed_one);
      offer(z, mp.evaluate(z));
      return;
    }
    auto lb = detail::lagrangian_bound(mp, st, budget, opt.dual_iters, warm);
    offer(lb.best_point, mp.evaluate(lb.best_point));
    node.bound = lb.bound;
    if (prunable(node.bound, st, budget)) return;
    open.push(Open{std::move(node), std::move(lb.weights), next_id++});
  };

  process(root, nullptr);

  auto best_open_bound = [&] {
    const double floor = std::min(inc.eta, tolerance_floor);
    return open.empty() ? floor : std::min(floor, open.top().node.bound);
  };

  while (!open.empty()) {
    Open cur = open.top();
    open.pop();
    const auto st = detail::node_state(p, cur.node);
    const Index budget = s - static_cast<Index>(cur.node.fixed_one.size());
    if (prunable(cur.node.bound, st, budget)) continue;

    const bool out_of_nodes = explored >= opt.max_nodes;
    const bool out_of_time = opt.deadline && std::chrono::steady_clock::now() >= *opt.deadline;
    if (out_of_nodes || out_of_time) {
      open.push(std::move(cur));
      MasterSolution partial = inc;
      partial.nodes_explored = explored;
      partial.lower_bound = best_open_bound();
      throw MasterBudgetExceeded(std::move(partial));
    }

    // Branch on the free index carrying the most aggregated cut slope.
    const Eigen::MatrixXd& grads = mp.gradient_matrix();
    Index branch = -1;
    double best_score = -1.0;
    for (Index i = 0; i < p; ++i) {
      if (st[static_cast<std::size_t>(i)] != -1) continue;
      const double score = grads.row(i).cwiseAbs().dot(cur.weights);
      if (score > best_score) {
        best_score = score;
        branch = i;
      }
    }

    BnbNode one = cur.node;
    one.fixed_one.insert(std::upper_bound(one.fixed_one.begin(), one.fixed_one.end(), branch), branch);
    one.depth = cur.node.depth + 1;
    BnbNode zero = cur.node;
    zero.fixed_zero.insert(std::upper_bound(zero.fixed_zero.begin(), zero.fixed_zero.end(), branch), branch);
    zero.depth = cur.node.depth + 1;
    process(std::move(one), &cur.weights);
    process(std::move(zero), &cur.weights);
  }

  inc.nodes_explored = explored;
  inc.lower_bound = std::min(inc.eta, tolerance_floor);
  return inc;
}

// Exhaustive search over all z with |z| <= s in lexicographic support order;
// the first strict improvement wins, which realizes the same tie-break as
// solve_master.
inline MasterSolution milp_bruteforce(const MasterProblem& mp) {
  if (mp.p() > 20) throw SizeError("milp_bruteforce: p must be <= 20");
  if (mp.num_cuts() == 0) throw ParameterError("milp_bruteforce: need at least one cut");
  const Index p = mp.p();
  const Index s = mp.s();
  MasterSolution best;
  best.eta = std::numeric_limits<double>::infinity();
  BinaryVector z(static_cast<std::size_t>(p), 0);
  std::int64_t visited = 0;

  auto visit = [&](auto&& self, Index start, Index used) -> void {
    ++visited;
    const double v = mp.evaluate(z);
    if (v < best.eta) {
      best.eta = v;
      best.z = z;
    }
    if (used == s) return;
    for (Index i = start; i < p; ++i) {
      z[static_cast<std::size_t>(i)] = 1;
      self(self, i + 1, used + 1);
      z[static_cast<std::size_t>(i)] = 0;
    }
  };
  visit(visit, 0, 0);
  best.nodes_explored = visited;
  best.lower_bound = best.eta;
  return best;
}

}  // namespace spca
