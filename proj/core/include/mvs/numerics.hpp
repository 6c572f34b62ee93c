#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace mvs::numerics {

/// tail[i] = integral of y from node i to the last node, trapezoidal rule on a
/// uniform grid with spacing dt. tail.back() == 0.
std::vector<double> tail_integral(std::span<const double> y, double dt);

/// Trapezoidal integral of y over the whole uniform grid.
double trapezoid(std::span<const double> y, double dt);

/// Local cubic (4-point Lagrange) interpolation of node values on a uniform
/// grid starting at 0 with spacing dt. Exact at nodes; falls back to lower
/// order when fewer than four nodes exist.
double cubic_interpolate(std::span<const double> values, double dt, double t);

/// One classical fourth-order Runge-Kutta step of size h. The right-hand
/// side is called as rhs(frac, y, dy) with frac in {0, 0.5, 1} giving the
/// stage position within the step, so callers can use precomputed
/// coefficients at the step start, midpoint and end.
template <std::size_t N, class Rhs>
void rk4_step(std::array<double, N>& y, double h, Rhs&& rhs) {
  using State = std::array<double, N>;
  State k1, k2, k3, k4, tmp;
  rhs(0.0, y, k1);
  for (std::size_t j = 0; j < N; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
  rhs(0.5, tmp, k2);
  for (std::size_t j = 0; j < N; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
  rhs(0.5, tmp, k3);
  for (std::size_t j = 0; j < N; ++j) tmp[j] = y[j] + h * k3[j];
  rhs(1.0, tmp, k4);
  for (std::size_t j = 0; j < N; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
}

}  // namespace mvs::numerics
