#include "pgp/box.hpp"

#include <algorithm>
#include <cmath>

namespace pgp {

bool Box::well_formed() const noexcept {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 && h > 0.0;
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::array<double, 4> encode_deltas(const Box& p, const Box& t) {
  const double pcx = p.x + 0.5 * p.w, pcy = p.y + 0.5 * p.h;
  const double tcx = t.x + 0.5 * t.w, tcy = t.y + 0.5 * t.h;
  return {(tcx - pcx) / p.w, (tcy - pcy) / p.h, std::log(t.w / p.w), std::log(t.h / p.h)};
}

Box apply_deltas(const Box& p, const std::array<double, 4>& d) {
  // Clamp log-scale deltas so an untrained head cannot produce inf boxes.
  constexpr double kMaxLog = 4.0;
  const double pcx = p.x + 0.5 * p.w, pcy = p.y + 0.5 * p.h;
  const double cx = pcx + d[0] * p.w, cy = pcy + d[1] * p.h;
  const double w = p.w * std::exp(std::min(d[2], kMaxLog));
  const double h = p.h * std::exp(std::min(d[3], kMaxLog));
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

}  // namespace pgp
