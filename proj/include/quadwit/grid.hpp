#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace quadwit {

enum class Basis { Position, Momentum };
enum class Component { X, Y };

inline const char* to_string(Basis b) {
  return b == Basis::Position ? "position" : "momentum";
}
inline const char* to_string(Component c) { return c == Component::X ? "x" : "y"; }

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Uniform discretization of one coordinate axis, centered on zero.
/// `delta` is the pixel size Delta_X (or Delta_K) entering the witness log term.
struct GridSpec {
  int n = 0;            // pixels per axis, power of two
  double extent = 0.0;  // full width covered by the n pixels
  double delta = 0.0;   // extent / n

  GridSpec() = default;
  GridSpec(int n_, double extent_) : n(n_), extent(extent_), delta(extent_ / n_) {
    if (n < 2 || !is_power_of_two(static_cast<std::uint64_t>(n)))
      throw std::invalid_argument("GridSpec: n must be a power of two >= 2");
    if (!(extent > 0.0)) throw std::invalid_argument("GridSpec: extent must be positive");
  }

  double lower() const { return -0.5 * extent; }
  /// Lower edge of pixel i.
  double edge(int i) const { return lower() + delta * i; }
  double center(int i) const { return lower() + delta * (i + 0.5); }

  bool operator==(const GridSpec& o) const {
    return n == o.n && extent == o.extent;
  }
};

/// Axis-aligned square block in joint index space. Rows index party a,
/// columns party b. `span` is a power of two for quad-tree nodes but the
/// struct itself allows any rectangle.
struct Rect {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;

  Rect() = default;
  Rect(int row_, int col_, int rows_, int cols_)
      : row(row_), col(col_), rows(rows_), cols(cols_) {}
  static Rect square(int row, int col, int span) { return Rect(row, col, span, span); }

  int row_end() const { return row + rows; }
  int col_end() const { return col + cols; }
  long area() const { return static_cast<long>(rows) * cols; }
  bool empty() const { return rows == 0 || cols == 0; }

  bool within(int n) const {
    return row >= 0 && col >= 0 && rows >= 0 && cols >= 0 && row_end() <= n && col_end() <= n;
  }
  bool operator==(const Rect& o) const {
    return row == o.row && col == o.col && rows == o.rows && cols == o.cols;
  }
};

inline void require_in_bounds(const Rect& r, const GridSpec& g, const char* where) {
  if (!r.within(g.n))
    throw std::domain_error(std::string(where) + ": rectangle outside grid bounds");
}

}  // namespace quadwit
