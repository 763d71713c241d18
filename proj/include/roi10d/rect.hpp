#pragma once

#include <algorithm>
#include <stdexcept>

namespace roi10d {

// Axis-aligned image rectangle, pixel coordinates, right/bottom exclusive-ish
// (continuous coordinates, so no pixel convention is imposed here).
struct Rect2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  Rect2D() = default;
  Rect2D(double l, double t, double r, double b) : left(l), top(t), right(r), bottom(b) {}

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return width() * height(); }
  bool valid() const { return right > left && bottom > top; }

  Rect2D intersect(const Rect2D& o) const {
    return Rect2D(std::max(left, o.left), std::max(top, o.top),
                  std::min(right, o.right), std::min(bottom, o.bottom));
  }

  bool contains(double u, double v) const {
    return u >= left && u <= right && v >= top && v <= bottom;
  }
};

inline double intersection_area(const Rect2D& a, const Rect2D& b) {
  const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

}  // namespace roi10d
