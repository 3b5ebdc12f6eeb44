#pragma once

#include <array>

namespace pgp {

/// Axis-aligned box in pixels: top-left corner plus extent.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
  bool well_formed() const noexcept;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union, in [0, 1]. Zero when the union is empty.
double iou(const Box& a, const Box& b);

/// (dx, dy, dw, dh) regression target moving `proposal` onto `target`.
std::array<double, 4> encode_deltas(const Box& proposal, const Box& target);
/// Inverse of encode_deltas.
Box apply_deltas(const Box& proposal, const std::array<double, 4>& deltas);

}  // namespace pgp
