#include "tetrad/grid.hpp"

#include <algorithm>
#include <unordered_set>

#include "tetrad/errors.hpp"
#include "tetrad/random.hpp"

namespace tetrad {

namespace {

int wrap(int value, int length) { return ((value % length) + length) % length; }

// Signed shift of minimal magnitude equivalent to `delta` mod `length`.
int shortest(int delta, int length) {
  int d = wrap(delta, length);
  return d > length / 2 ? d - length : d;
}

int axis_length(Axis axis) { return axis == Axis::row ? geometry::cols : geometry::rows; }

Cell step_of(WindowKind kind) {
  switch (kind) {
    case WindowKind::h: return {0, 1};
    case WindowKind::v: return {1, 0};
    case WindowKind::dr: return {1, 1};
    case WindowKind::dl: return {1, -1};
  }
  return {0, 1};
}

std::vector<Window> build_windows() {
  using namespace geometry;
  std::vector<Window> out;
  const int span = window_len - 1;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + span < cols; ++c) out.push_back({WindowKind::h, {r, c}});
  for (int r = 0; r + span < rows; ++r)
    for (int c = 0; c < cols; ++c) out.push_back({WindowKind::v, {r, c}});
  for (int r = 0; r + span < rows; ++r)
    for (int c = 0; c + span < cols; ++c) out.push_back({WindowKind::dr, {r, c}});
  for (int r = 0; r + span < rows; ++r)
    for (int c = span; c < cols; ++c) out.push_back({WindowKind::dl, {r, c}});
  return out;
}

}  // namespace

ImageId::ImageId(std::string token) : token_(std::move(token)) {
  if (token_.empty()) throw ValidationError("image id must be non-empty");
}

Grid::Grid(std::span<const ImageId> cells) {
  if (cells.size() != static_cast<std::size_t>(geometry::cells)) {
    throw CardinalityError("grid needs " + std::to_string(geometry::cells) + " images, got " +
                           std::to_string(cells.size()));
  }
  std::unordered_set<ImageId> seen;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].empty()) throw ValidationError("image id must be non-empty");
    if (!seen.insert(cells[i]).second) throw DuplicateError("duplicate image id " + cells[i].str());
    cells_[i] = cells[i];
  }
}

Cell Grid::find(const ImageId& id) const {
  for (int i = 0; i < geometry::cells; ++i) {
    if (cells_[i] == id) return {i / geometry::cols, i % geometry::cols};
  }
  return {-1, -1};
}

void Move::validate() const {
  const int limit = axis == Axis::row ? geometry::rows : geometry::cols;
  if (index < 0 || index >= limit) {
    throw ValidationError("move index " + std::to_string(index) + " out of range for " +
                          (axis == Axis::row ? "row" : "col"));
  }
  if (delta == 0) throw ValidationError("move delta must be nonzero");
}

std::array<Cell, geometry::window_len> Window::cells() const {
  const Cell step = step_of(kind);
  std::array<Cell, geometry::window_len> out;
  for (int i = 0; i < geometry::window_len; ++i) {
    out[i] = {start.row + i * step.row, start.col + i * step.col};
  }
  return out;
}

Secret::Secret(std::span<const ImageId> images) {
  if (images.size() != images_.size()) {
    throw SecretError("secret needs exactly " + std::to_string(images_.size()) + " images");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].empty()) throw SecretError("secret image id must be non-empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (images[i] == images[j]) throw SecretError("secret images must be distinct");
    }
    images_[i] = images[i];
  }
}

Grid shuffle_grid(std::span<const ImageId> images, std::uint64_t seed) {
  std::vector<ImageId> order(images.begin(), images.end());
  std::sort(order.begin(), order.end());
  Grid checked(order);  // cardinality and uniqueness

  Prng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }
  return Grid(order);
}

Grid apply_move(const Grid& g, const Move& m) {
  m.validate();
  const int length = axis_length(m.axis);
  const int shift = wrap(m.delta, length);
  Grid out = g;
  if (shift == 0) return out;
  for (int i = 0; i < length; ++i) {
    const int dest = (i + shift) % length;
    if (m.axis == Axis::row) {
      out.cells_[Grid::index(m.index, dest)] = g.cells_[Grid::index(m.index, i)];
    } else {
      out.cells_[Grid::index(dest, m.index)] = g.cells_[Grid::index(i, m.index)];
    }
  }
  return out;
}

Grid apply_moves(Grid g, std::span<const Move> moves) {
  for (const Move& m : moves) g = apply_move(g, m);
  return g;
}

const std::vector<Window>& enumerate_windows() {
  static const std::vector<Window> windows = build_windows();
  return windows;
}

Tuple4 read_window(const Grid& g, const Window& w) {
  Tuple4 out;
  const auto cells = w.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) out[i] = g.at(cells[i]);
  return out;
}

bool is_aligned(const Grid& g, const Secret& s) {
  std::array<Cell, geometry::window_len> pos;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos[i] = g.find(s[i]);
    if (pos[i].row < 0) throw ValidationError("secret image " + s[i].str() + " not in grid");
  }
  // Consecutive cells along one step; positions are real cells, so a
  // matching chain can never wrap an edge.
  const Cell step{pos[1].row - pos[0].row, pos[1].col - pos[0].col};
  const bool canonical_step = (step.row == 0 && step.col == 1) ||
                              (step.row == 1 && (step.col == 0 || step.col == 1 || step.col == -1));
  if (!canonical_step) return false;
  for (std::size_t i = 2; i < pos.size(); ++i) {
    if (pos[i].row != pos[i - 1].row + step.row || pos[i].col != pos[i - 1].col + step.col) {
      return false;
    }
  }
  return true;
}

CandidateSet candidates(const Grid& g) {
  CandidateSet out;
  for (const Window& w : enumerate_windows()) out.insert(read_window(g, w));
  return out;
}

std::vector<Move> solve_to_window(const Grid& g, const Secret& s, int row, int start_col) {
  if (row < 0 || row >= geometry::rows || start_col < 0 ||
      start_col + geometry::window_len > geometry::cols) {
    throw ValidationError("target window outside the grid");
  }
  for (const ImageId& id : s.images()) {
    if (!g.contains(id)) throw ValidationError("secret image " + id.str() + " not in grid");
  }

  std::vector<Move> moves;
  Grid work = g;
  auto shift = [&](Axis axis, int index, int delta) {
    delta = shortest(delta, axis_length(axis));
    const Move unit{axis, index, delta > 0 ? 1 : -1};
    for (int i = 0; i < std::abs(delta); ++i) {
      work = apply_move(work, unit);
      moves.push_back(unit);
    }
  };

  for (int k = 0; k < geometry::window_len; ++k) {
    const int target_col = start_col + k;
    Cell at = work.find(s[k]);
    if (at.row == row && at.col == target_col) continue;
    if (at.row == row) {
      // Park below the target row; column at.col holds no placed image.
      shift(Axis::col, at.col, 1);
      at = work.find(s[k]);
    }
    shift(Axis::row, at.row, target_col - at.col);
    shift(Axis::col, target_col, row - at.row);
  }
  return moves;
}

std::vector<Move> solve_alignment(const Grid& g, const Secret& s) {
  if (is_aligned(g, s)) return {};
  for (Axis axis : {Axis::row, Axis::col}) {
    const int lines = axis == Axis::row ? geometry::rows : geometry::cols;
    for (int index = 0; index < lines; ++index) {
      for (int delta : {1, -1}) {
        const Move m{axis, index, delta};
        if (is_aligned(apply_move(g, m), s)) return {m};
      }
    }
  }
  std::vector<Move> best;
  bool found = false;
  for (int r = 0; r < geometry::rows; ++r) {
    for (int c = 0; c + geometry::window_len <= geometry::cols; ++c) {
      auto moves = solve_to_window(g, s, r, c);
      if (!found || moves.size() < best.size()) {
        best = std::move(moves);
        found = true;
      }
    }
  }
  return best;
}

}  // namespace tetrad
