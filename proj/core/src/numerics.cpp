#include "mvs/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace mvs::numerics {

std::vector<double> tail_integral(std::span<const double> y, double dt) {
  std::vector<double> tail(y.size(), 0.0);
  for (std::size_t i = y.size(); i-- > 1;) {
    tail[i - 1] = tail[i] + 0.5 * dt * (y[i - 1] + y[i]);
  }
  return tail;
}

double trapezoid(std::span<const double> y, double dt) {
  if (y.size() < 2) return 0.0;
  double sum = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) sum += y[i];
  return sum * dt;
}

double cubic_interpolate(std::span<const double> values, double dt, double t) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n == 1) return values[0];
  const double x = t / dt;
  const double last = static_cast<double>(n - 1);
  if (x <= 0.0) return values.front();
  if (x >= last) return values.back();
  const auto below = static_cast<std::size_t>(std::floor(x));
  if (static_cast<double>(below) == x) return values[below];

  const std::size_t width = std::min<std::size_t>(4, n);
  // Stencil of `width` nodes centred on [below, below + 1], clamped to range.
  std::size_t start = below >= 1 ? below - 1 : 0;
  if (width < 4) start = 0;
  start = std::min(start, n - width);

  double result = 0.0;
  for (std::size_t j = 0; j < width; ++j) {
    double basis = 1.0;
    const double xj = static_cast<double>(start + j);
    for (std::size_t m = 0; m < width; ++m) {
      if (m == j) continue;
      const double xm = static_cast<double>(start + m);
      basis *= (x - xm) / (xj - xm);
    }
    result += basis * values[start + j];
  }
  return result;
}

}  // namespace mvs::numerics
