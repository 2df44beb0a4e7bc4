#include "aisac/smoothing.hpp"

#include <string>

namespace aisac {

namespace {

void check_filter(int window, int order) {
  if (window < 1 || window % 2 == 0) throw ConfigError("Savitzky-Golay window must be odd and positive");
  if (order < 0 || order >= window) throw ConfigError("Savitzky-Golay order must satisfy 0 <= order < window");
}

// Vandermonde matrix on abscissae x (scaled by half-window for conditioning).
Matrix vandermonde(const Vector& x, int order) {
  Matrix v(x.size(), order + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k <= order; ++k) {
      v(i, k) = p;
      p *= x(i);
    }
  }
  return v;
}

// Row vector h with h . y = value at `eval_x` of the least-squares polynomial
// fitted to y over the window positions.
Vector fit_weights(int window, int order, double eval_offset) {
  const int half = window / 2;
  const double scale = half > 0 ? static_cast<double>(half) : 1.0;
  Vector x(window);
  for (int i = 0; i < window; ++i) x(i) = (i - half) / scale;
  const Matrix v = vandermonde(x, order);
  Vector basis(order + 1);
  double p = 1.0;
  for (int k = 0; k <= order; ++k) {
    basis(k) = p;
    p *= eval_offset / scale;
  }
  // pinv(V)^T basis via QR: solve V^T h = basis with minimum norm is what we
  // want, which equals V (V^T V)^-1 basis.
  const Eigen::HouseholderQR<Matrix> qr(v);
  const Matrix r = qr.matrixQR().topRows(order + 1).triangularView<Eigen::Upper>();
  const Vector z = r.transpose().triangularView<Eigen::Lower>().solve(basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(window, order + 1);
  return q * z;
}

}  // namespace

Vector savitzky_golay_coefficients(int window, int order) {
  check_filter(window, order);
  return fit_weights(window, order, 0.0);
}

std::vector<double> savitzky_golay(std::span<const double> series, int window, int order,
                                   SmoothingBoundary boundary) {
  check_filter(window, order);
  const int n = static_cast<int>(series.size());
  if (n < window) {
    throw ConfigError("Savitzky-Golay needs at least " + std::to_string(window) + " points, got " +
                      std::to_string(n));
  }
  const int half = window / 2;
  const Vector h = fit_weights(window, order, 0.0);
  std::vector<double> out(series.size());
  for (int i = half; i < n - half; ++i) {
    double acc = 0.0;
    for (int k = 0; k < window; ++k) acc += h(k) * series[static_cast<std::size_t>(i - half + k)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  if (boundary == SmoothingBoundary::Interpolate) {
    for (int i = 0; i < half; ++i) {
      const Vector head = fit_weights(window, order, static_cast<double>(i - half));
      const Vector tail = fit_weights(window, order, static_cast<double>(half - i));
      double front = 0.0;
      double back = 0.0;
      for (int k = 0; k < window; ++k) {
        front += head(k) * series[static_cast<std::size_t>(k)];
        back += tail(k) * series[static_cast<std::size_t>(n - window + k)];
      }
      out[static_cast<std::size_t>(i)] = front;
      out[static_cast<std::size_t>(n - 1 - i)] = back;
    }
  } else {
    auto at = [&](int j) {
      if (n == 1) return series[0];
      const int period = 2 * (n - 1);
      j %= period;
      if (j < 0) j += period;
      if (j >= n) j = period - j;
      return series[static_cast<std::size_t>(j)];
    };
    for (int i = 0; i < n; ++i) {
      if (i >= half && i < n - half) continue;
      double acc = 0.0;
      for (int k = 0; k < window; ++k) acc += h(k) * at(i - half + k);
      out[static_cast<std::size_t>(i)] = acc;
    }
  }
  return out;
}

}  // namespace aisac
