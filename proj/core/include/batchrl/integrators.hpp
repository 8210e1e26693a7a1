#pragma once

// Fixed-step integrators over one control interval with the control held
// constant. Right-hand sides write into an output span:
//
//   void rhs(std::span<const T> x, std::span<const T> u, std::span<T> dx);
//
// T is double for simulation or ad::Var when recording a differentiable
// rollout for the optimizer.

#include <cmath>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "batchrl/errors.hpp"
#include "batchrl/random.hpp"

namespace batchrl {

namespace detail {

void require_step(double dt, int substeps);

template <class T>
void check_finite(std::span<const T> values, std::span<const T> state, const char* what) {
  if constexpr (std::is_floating_point_v<T>) {
    for (const T& v : values) {
      if (!std::isfinite(v)) {
        throw IntegrationError(std::string(what) + ": non-finite value",
                               std::vector<double>(state.begin(), state.end()));
      }
    }
  }
}

}  // namespace detail

// Classical 4th-order Runge-Kutta over `substeps` equal sub-intervals of dt.
template <class T, class Rhs>
std::vector<T> rk4_step(Rhs&& rhs, std::vector<T> x, std::span<const T> u, double dt, int substeps) {
  detail::require_step(dt, substeps);
  const std::size_t n = x.size();
  const double h = dt / substeps;
  std::vector<T> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < substeps; ++s) {
    rhs(std::span<const T>(x), u, std::span<T>(k1));
    detail::check_finite<T>(k1, x, "rk4_step");
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + k1[i] * (0.5 * h);
    rhs(std::span<const T>(tmp), u, std::span<T>(k2));
    detail::check_finite<T>(k2, tmp, "rk4_step");
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + k2[i] * (0.5 * h);
    rhs(std::span<const T>(tmp), u, std::span<T>(k3));
    detail::check_finite<T>(k3, tmp, "rk4_step");
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + k3[i] * h;
    rhs(std::span<const T>(tmp), u, std::span<T>(k4));
    detail::check_finite<T>(k4, tmp, "rk4_step");
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = x[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
    }
  }
  return x;
}

// Euler-Maruyama with diagonal diffusion: x <- x + f h + g sqrt(h) z.
template <class Drift, class Diffusion>
std::vector<double> euler_maruyama_step(Drift&& drift, Diffusion&& diffusion, std::vector<double> x,
                                        std::span<const double> u, double dt, int substeps,
                                        Rng& rng) {
  detail::require_step(dt, substeps);
  const std::size_t n = x.size();
  const double h = dt / substeps;
  const double sqrt_h = std::sqrt(h);
  std::vector<double> f(n), g(n);
  for (int s = 0; s < substeps; ++s) {
    drift(std::span<const double>(x), u, std::span<double>(f));
    diffusion(std::span<const double>(x), u, std::span<double>(g));
    for (std::size_t i = 0; i < n; ++i) {
      const double z = standard_normal(rng);
      x[i] += f[i] * h + g[i] * sqrt_h * z;
    }
    detail::check_finite<double>(x, x, "euler_maruyama_step");
  }
  return x;
}

}  // namespace batchrl
