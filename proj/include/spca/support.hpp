#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spca/error.hpp"

namespace spca {

using Index = std::ptrdiff_t;

// Binary decision vector z in {0,1}^p.
using BinaryVector = std::vector<std::uint8_t>;

// Sorted list of distinct indices.
using IndexSet = std::vector<Index>;

inline IndexSet support_of(std::span<const std::uint8_t> z) {
  IndexSet s;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i]) s.push_back(static_cast<Index>(i));
  }
  return s;
}

inline BinaryVector indicator(Index p, std::span<const Index> indices) {
  BinaryVector z(static_cast<std::size_t>(p), 0);
  for (Index i : indices) {
    if (i < 0 || i >= p) throw ParameterError("index " + std::to_string(i) + " outside [0, p)");
    z[static_cast<std::size_t>(i)] = 1;
  }
  return z;
}

inline Index cardinality(std::span<const std::uint8_t> z) {
  return static_cast<Index>(std::count_if(z.begin(), z.end(), [](std::uint8_t v) { return v != 0; }));
}

// Order on supports used to break ties among equal objective values:
// sorted index lists compared lexicographically, a proper prefix first.
inline bool support_less(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const IndexSet sa = support_of(a);
  const IndexSet sb = support_of(b);
  return std::lexicographical_compare(sa.begin(), sa.end(), sb.begin(), sb.end());
}

inline std::string format_support(std::span<const std::uint8_t> z) {
  std::string out;
  for (Index i : support_of(z)) {
    if (!out.empty()) out += ',';
    out += std::to_string(i);
  }
  return out;
}

}  // namespace spca
