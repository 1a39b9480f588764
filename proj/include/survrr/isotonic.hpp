#pragma once

#include <vector>

#include "survrr/errors.hpp"

namespace survrr {

enum class Monotone { kNonincreasing, kNondecreasing };

namespace detail {

// Pool-adjacent-violators for the nondecreasing cone, unit weights.
inline std::vector<double> pava_up(const std::vector<double>& y) {
  struct Block {
    double sum;
    int count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (double v : y) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1) {
      const Block& top = blocks[blocks.size() - 1];
      const Block& prev = blocks[blocks.size() - 2];
      if (prev.sum * top.count <= top.sum * prev.count) break;
      Block merged{prev.sum + top.sum, prev.count + top.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Block& b : blocks) {
    const double mean = b.sum / b.count;
    for (int i = 0; i < b.count; ++i) out.push_back(mean);
  }
  return out;
}

}  // namespace detail

// L2 projection of y onto the monotone cone in the given direction. Equal to
// y when y is already monotone.
inline std::vector<double> pava_isotonic(const std::vector<double>& y, Monotone direction) {
  if (y.empty()) throw DomainError("pava_isotonic: input must be nonempty");
  if (direction == Monotone::kNondecreasing) return detail::pava_up(y);
  std::vector<double> neg(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
  std::vector<double> fit = detail::pava_up(neg);
  for (double& v : fit) v = -v;
  return fit;
}

}  // namespace survrr
