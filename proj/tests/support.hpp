#pragma once

// Test-only helpers and brute-force oracles. Nothing here calls into the
// window enumeration or alignment code it is used to check.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tetrad/grid.hpp"

namespace tetrad::testing {

inline std::vector<ImageId> make_ids(int n, const std::string& prefix = "face") {
  std::vector<ImageId> ids;
  for (int i = 0; i < n; ++i) ids.emplace_back(prefix + std::to_string(100 + i));
  return ids;
}

inline Grid random_grid(std::mt19937_64& rng) {
  auto ids = make_ids(geometry::cells);
  std::shuffle(ids.begin(), ids.end(), rng);
  return Grid(ids);
}

inline Secret random_secret(const Grid& g, std::mt19937_64& rng) {
  std::vector<ImageId> pool(g.cells().begin(), g.cells().end());
  std::shuffle(pool.begin(), pool.end(), rng);
  return Secret(std::span(pool).first(4));
}

// Places `s` into the 4 given cells in order by swapping cell contents.
inline Grid plant(const Grid& g, const Secret& s, const std::array<Cell, 4>& where) {
  std::vector<ImageId> cells(g.cells().begin(), g.cells().end());
  auto idx = [](Cell c) { return static_cast<std::size_t>(c.row * geometry::cols + c.col); };
  for (std::size_t k = 0; k < 4; ++k) {
    const auto from = std::find(cells.begin(), cells.end(), s[k]) - cells.begin();
    std::swap(cells[static_cast<std::size_t>(from)], cells[idx(where[k])]);
  }
  return Grid(cells);
}

// Every run of 4 in-bounds cells along (0,1), (1,0), (1,1), (1,-1), read from
// the start cell outward.
inline std::vector<std::array<Cell, 4>> brute_force_lines() {
  const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  std::vector<std::array<Cell, 4>> lines;
  for (const auto& d : dirs) {
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 9; ++c) {
        std::array<Cell, 4> line;
        bool ok = true;
        for (int k = 0; k < 4; ++k) {
          const int rr = r + k * d[0];
          const int cc = c + k * d[1];
          if (rr < 0 || rr >= 5 || cc < 0 || cc >= 9) ok = false;
          line[k] = {rr, cc};
        }
        if (ok) lines.push_back(line);
      }
    }
  }
  return lines;
}

// Classifies every 4-subset of the 45 cells; returns counts of subsets that
// are consecutive collinear runs, keyed by direction name.
inline std::map<std::string, int> enumerate_collinear_subsets() {
  std::map<std::string, int> counts;
  for (int a = 0; a < 45; ++a)
    for (int b = a + 1; b < 45; ++b)
      for (int c = b + 1; c < 45; ++c)
        for (int d = c + 1; d < 45; ++d) {
          const int idx[4] = {a, b, c, d};  // sorted row-major
          const int dr = idx[1] / 9 - idx[0] / 9;
          const int dc = idx[1] % 9 - idx[0] % 9;
          bool run = true;
          for (int k = 2; k < 4; ++k) {
            if (idx[k] / 9 - idx[k - 1] / 9 != dr || idx[k] % 9 - idx[k - 1] % 9 != dc) run = false;
          }
          if (!run) continue;
          if (dr == 0 && dc == 1) ++counts["H"];
          else if (dr == 1 && dc == 0) ++counts["V"];
          else if (dr == 1 && dc == 1) ++counts["DR"];
          else if (dr == 1 && dc == -1) ++counts["DL"];
        }
  return counts;
}

inline bool oracle_aligned(const Grid& g, const Secret& s) {
  for (const auto& line : brute_force_lines()) {
    bool match = true;
    for (int k = 0; k < 4; ++k) {
      if (!(g.cells()[static_cast<std::size_t>(line[k].row * 9 + line[k].col)] == s[k])) match = false;
    }
    if (match) return true;
  }
  return false;
}

inline std::vector<Tuple4> oracle_candidates(const Grid& g) {
  std::vector<Tuple4> out;
  for (const auto& line : brute_force_lines()) {
    Tuple4 t;
    for (int k = 0; k < 4; ++k) t[k] = g.cells()[static_cast<std::size_t>(line[k].row * 9 + line[k].col)];
    out.push_back(t);
  }
  return out;
}

}  // namespace tetrad::testing
