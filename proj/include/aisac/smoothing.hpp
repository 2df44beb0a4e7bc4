#pragma once

#include <span>
#include <vector>

#include "aisac/common.hpp"

namespace aisac {

enum class SmoothingBoundary {
  // Fit the order-`order` polynomial to the first/last window and evaluate it
  // at the edge points. Reproduces polynomials of degree <= order everywhere.
  Interpolate,
  // Reflect the series about its end points (x[-k] = x[k]) and convolve.
  Mirror,
};

// Central convolution coefficients of the Savitzky-Golay filter (length window).
Vector savitzky_golay_coefficients(int window, int order);

// Least-squares local polynomial smoothing. Requires window odd,
// order < window and series length >= window; throws ConfigError otherwise.
std::vector<double> savitzky_golay(std::span<const double> series, int window, int order,
                                   SmoothingBoundary boundary = SmoothingBoundary::Interpolate);

}  // namespace aisac
