#pragma once

#include "mvscreen/tensor.hpp"

#include <array>
#include <vector>

namespace test {

using mvscreen::Index;

// Independent shape walker: the column written out as (kernel, stride,
// maps) triples, walked with floor((in - k) / s) + 1.
struct Step {
  Index k, s, maps;
  bool pool;
};

inline const std::vector<Step>& reference_column() {
  static const std::vector<Step> steps = {
      {3, 2, 32, false},  {3, 3, 32, true},   {3, 2, 64, false},  {3, 1, 64, false},
      {3, 1, 64, false},  {2, 2, 64, true},   {3, 1, 128, false}, {3, 1, 128, false},
      {3, 1, 128, false}, {2, 2, 128, true},  {3, 1, 128, false}, {3, 1, 128, false},
      {3, 1, 128, false}, {2, 2, 128, true},  {3, 1, 256, false}, {3, 1, 256, false},
      {3, 1, 256, false}};
  return steps;
}

struct OracleWalk {
  std::vector<std::array<Index, 2>> trace;
  std::size_t kept = 0;
  Index embedding = 0;
};

inline OracleWalk walk_column(Index h, Index w) {
  OracleWalk out;
  out.trace.push_back({h, w});
  for (const auto& s : reference_column()) {
    if (s.k > h || s.k > w) break;
    h = (h - s.k) / s.s + 1;
    w = (w - s.k) / s.s + 1;
    out.trace.push_back({h, w});
    out.embedding = s.maps;
    ++out.kept;
  }
  return out;
}

/// The full-scale trace, written out by hand.
inline const std::vector<std::array<Index, 2>>& full_scale_trace() {
  static const std::vector<std::array<Index, 2>> trace = {
      {2600, 2000}, {1299, 999}, {433, 333}, {216, 166}, {214, 164}, {212, 162}, {106, 81},
      {104, 79},    {102, 77},   {100, 75},  {50, 37},   {48, 35},   {46, 33},   {44, 31},
      {22, 15},     {20, 13},    {18, 11},   {16, 9}};
  return trace;
}

}  // namespace test
