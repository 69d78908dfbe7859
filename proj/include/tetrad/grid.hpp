#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tetrad {

// Opaque image token. Unique within one account's image set.
class ImageId {
public:
  ImageId() = default;
  explicit ImageId(std::string token);

  const std::string& str() const noexcept { return token_; }
  bool empty() const noexcept { return token_.empty(); }

  friend auto operator<=>(const ImageId&, const ImageId&) = default;

private:
  std::string token_;
};

namespace geometry {
inline constexpr int rows = 5;
inline constexpr int cols = 9;
inline constexpr int cells = rows * cols;
inline constexpr int window_len = 4;
static_assert(window_len <= rows && window_len <= cols);
}  // namespace geometry

struct Cell {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

using Tuple4 = std::array<ImageId, geometry::window_len>;

enum class Axis { row, col };

// One cyclic shift. Positive delta moves rows right and columns down.
struct Move {
  Axis axis = Axis::row;
  int index = 0;
  int delta = 1;

  // Throws ValidationError on out-of-range index or zero delta.
  void validate() const;
  Move inverse() const { return Move{axis, index, -delta}; }
  bool primitive() const { return delta == 1 || delta == -1; }

  friend bool operator==(const Move&, const Move&) = default;
};

// 45 distinct images, row-major.
class Grid {
public:
  // Throws CardinalityError / DuplicateError / ValidationError.
  explicit Grid(std::span<const ImageId> cells);

  const ImageId& at(int row, int col) const { return cells_[index(row, col)]; }
  const ImageId& at(Cell c) const { return at(c.row, c.col); }
  const std::array<ImageId, geometry::cells>& cells() const noexcept { return cells_; }

  // Position of an image; {-1, -1} when absent.
  Cell find(const ImageId& id) const;
  bool contains(const ImageId& id) const { return find(id).row >= 0; }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  friend Grid apply_move(const Grid&, const Move&);
  Grid() = default;

  static constexpr int index(int row, int col) { return row * geometry::cols + col; }

  std::array<ImageId, geometry::cells> cells_;
};

enum class WindowKind { h, v, dr, dl };

// Four consecutive cells on a line that does not wrap, in canonical order:
// left to right (h), top to bottom (v), increasing row for both diagonals.
struct Window {
  WindowKind kind = WindowKind::h;
  Cell start;

  std::array<Cell, geometry::window_len> cells() const;
  friend bool operator==(const Window&, const Window&) = default;
};

// Ordered sequence of four distinct images.
class Secret {
public:
  // Throws SecretError when not 4 distinct non-empty ids.
  explicit Secret(std::span<const ImageId> images);

  const Tuple4& images() const noexcept { return images_; }
  const ImageId& operator[](std::size_t i) const { return images_[i]; }

  friend bool operator==(const Secret&, const Secret&) = default;

private:
  Tuple4 images_;
};

using CandidateSet = std::set<Tuple4>;

// Fisher-Yates over the ids in sorted order, driven by Prng(seed). The result
// depends only on the id set and the seed, not on the caller's ordering.
Grid shuffle_grid(std::span<const ImageId> images, std::uint64_t seed);

Grid apply_move(const Grid& g, const Move& m);
Grid apply_moves(Grid g, std::span<const Move> moves);

// All 72 windows: 30 h, 18 v, 12 dr, 12 dl, in that order.
const std::vector<Window>& enumerate_windows();

Tuple4 read_window(const Grid& g, const Window& w);

// True iff some window reads exactly s in canonical order.
// Throws ValidationError if any secret image is absent from g.
bool is_aligned(const Grid& g, const Secret& s);

CandidateSet candidates(const Grid& g);

inline constexpr int solver_move_budget = 100;

// Primitive moves that bring s into the horizontal window starting at
// (row, start_col). Earlier placements are never disturbed: only rows other
// than `row` and columns not yet holding a placed secret image are shifted.
std::vector<Move> solve_to_window(const Grid& g, const Secret& s, int row, int start_col);

// Empty when g is already aligned, a single move when one primitive shift
// suffices, otherwise the shortest solve_to_window result over all
// horizontal windows.
std::vector<Move> solve_alignment(const Grid& g, const Secret& s);

// 45 * 44 * 43 * 42
inline constexpr std::uint64_t ordered_secret_space = 3575880;

}  // namespace tetrad

template <>
struct std::hash<tetrad::ImageId> {
  std::size_t operator()(const tetrad::ImageId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
