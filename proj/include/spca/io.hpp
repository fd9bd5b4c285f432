#pragma once

// Plain-text formats: key=value model files, header-less dataset CSV, and
// per-coordinate estimate CSV. Numbers are written with the shortest
// round-trip representation and parsed with from_chars, so files are
// locale independent and reload bit-exactly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "spca/dataset.hpp"
#include "spca/error.hpp"
#include "spca/spiked_model.hpp"
#include "spca/support.hpp"

namespace spca::io {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view text) {
  while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.remove_suffix(1);
  Int v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

// p, s, theta, seed, u_star (comma separated), one key per line.
inline void write_model(std::ostream& out, const SpikedModel& m) {
  out << "p=" << m.p << "\ns=" << m.s_true << "\ntheta=" << format_double(m.theta) << "\nseed=" << m.seed
      << "\nu_star=";
  for (Index i = 0; i < m.u_star.size(); ++i) out << (i ? "," : "") << format_double(m.u_star[i]);
  out << '\n';
}

inline SpikedModel read_model(std::istream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model file: expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"p", "s", "theta", "seed", "u_star"}) {
    if (!kv.contains(key)) throw FormatError(std::string("model file: missing key ") + key);
  }
  SpikedModel m;
  m.p = parse_int<Index>(kv["p"]);
  m.s_true = parse_int<Index>(kv["s"]);
  m.theta = parse_double(kv["theta"]);
  m.seed = parse_int<std::uint64_t>(kv["seed"]);
  const auto parts = split(kv["u_star"], ',');
  if (static_cast<Index>(parts.size()) != m.p) throw FormatError("model file: u_star has the wrong length");
  m.u_star.resize(m.p);
  for (Index i = 0; i < m.p; ++i) m.u_star[i] = parse_double(parts[static_cast<std::size_t>(i)]);
  if (static_cast<Index>(m.support().size()) != m.s_true) throw FormatError("model file: s does not match u_star");
  return m;
}

// One observation per row, comma separated, no header.
inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const Eigen::MatrixXd& x = data.X();
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) out << (c ? "," : "") << format_double(x(r, c));
    out << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& in) {
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    if (cols < 0) cols = static_cast<Index>(parts.size());
    if (static_cast<Index>(parts.size()) != cols) {
      throw FormatError("dataset: row " + std::to_string(rows + 1) + " has " + std::to_string(parts.size()) +
                        " fields, expected " + std::to_string(cols));
    }
    for (auto part : parts) values.push_back(parse_double(part));
    ++rows;
  }
  if (rows == 0) throw FormatError("dataset: no rows");
  Eigen::MatrixXd x(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) x(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return Dataset(std::move(x));
}

// index,u_hat,sigma_hat_sq,in_support. An empty sigma_hat_sq vector writes NA.
inline void write_estimate_csv(std::ostream& out, const Eigen::VectorXd& u_hat, const Eigen::VectorXd& sigma_hat_sq,
                               const IndexSet& support) {
  const BinaryVector in = indicator(u_hat.size(), support);
  out << "index,u_hat,sigma_hat_sq,in_support\n";
  for (Index i = 0; i < u_hat.size(); ++i) {
    out << i << ',' << format_double(u_hat[i]) << ','
        << (sigma_hat_sq.size() == u_hat.size() ? format_double(sigma_hat_sq[i]) : std::string("NA")) << ','
        << int(in[static_cast<std::size_t>(i)]) << '\n';
  }
}

}  // namespace spca::io
