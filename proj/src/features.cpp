#include "aisac/features.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace aisac {

FeatureMap FeatureMap::identity(int input_dim) {
  if (input_dim <= 0) throw ConfigError("identity features need a positive input dimension");
  return FeatureMap(Kind::Identity, input_dim, input_dim + 1);
}

FeatureMap FeatureMap::polynomial(int input_dim, int degree) {
  if (input_dim <= 0 || degree <= 0) throw ConfigError("polynomial features need positive dimension and degree");
  FeatureMap map(Kind::Polynomial, input_dim, 1 + input_dim * degree);
  map.degree_ = degree;
  return map;
}

FeatureMap FeatureMap::radial_basis(Matrix centers, Vector widths, Vector periods) {
  const int dim = static_cast<int>(centers.cols());
  if (centers.rows() == 0 || dim == 0 || widths.size() != dim || periods.size() != dim) {
    throw ConfigError("radial basis: centers, widths and periods disagree in dimension");
  }
  if ((widths.array() <= 0.0).any()) throw ConfigError("radial basis widths must be positive");
  FeatureMap map(Kind::RadialBasis, dim, static_cast<int>(centers.rows()));
  map.centers_ = std::move(centers);
  map.inv_widths_ = widths.cwiseInverse();
  map.periods_ = std::move(periods);
  return map;
}

FeatureMap FeatureMap::radial_grid(const Vector& lows, const Vector& highs, const std::vector<int>& counts,
                                   const Vector& periods) {
  const int dim = static_cast<int>(lows.size());
  if (highs.size() != dim || periods.size() != dim || static_cast<int>(counts.size()) != dim) {
    throw ConfigError("radial grid: bounds and counts disagree in dimension");
  }
  int total = 1;
  Vector widths(dim);
  for (int j = 0; j < dim; ++j) {
    if (counts[static_cast<std::size_t>(j)] < 2 || !(highs(j) > lows(j))) {
      throw ConfigError("radial grid needs at least 2 centers per dimension and high > low");
    }
    total *= counts[static_cast<std::size_t>(j)];
    // A periodic dimension wraps, so its last center would duplicate the first.
    const int gaps = periods(j) > 0.0 ? counts[static_cast<std::size_t>(j)] : counts[static_cast<std::size_t>(j)] - 1;
    widths(j) = (highs(j) - lows(j)) / gaps;
  }
  Matrix centers(total, dim);
  for (int k = 0; k < total; ++k) {
    int rest = k;
    for (int j = dim - 1; j >= 0; --j) {
      const int c = counts[static_cast<std::size_t>(j)];
      centers(k, j) = lows(j) + widths(j) * (rest % c);
      rest /= c;
    }
  }
  return radial_basis(std::move(centers), std::move(widths), periods);
}

void FeatureMap::evaluate(const Vector& state, Eigen::Ref<Vector> out) const {
  if (state.size() != input_dim_) throw ConfigError("feature map: state dimension mismatch");
  switch (kind_) {
    case Kind::Identity:
      out(0) = 1.0;
      out.tail(input_dim_) = state;
      break;
    case Kind::Polynomial: {
      out(0) = 1.0;
      int k = 1;
      for (int i = 0; i < input_dim_; ++i) {
        double power = 1.0;
        for (int d = 0; d < degree_; ++d) {
          power *= state(i);
          out(k++) = power;
        }
      }
      break;
    }
    case Kind::RadialBasis:
      for (int k = 0; k < size_; ++k) {
        double sq = 0.0;
        for (int j = 0; j < input_dim_; ++j) {
          double diff = state(j) - centers_(k, j);
          const double period = periods_(j);
          if (period > 0.0) diff -= period * std::round(diff / period);
          const double z = diff * inv_widths_(j);
          sq += z * z;
        }
        out(k) = std::exp(-0.5 * sq);
      }
      break;
  }
}

Vector FeatureMap::operator()(const Vector& state) const {
  Vector out(size_);
  evaluate(state, out);
  return out;
}

std::string FeatureMap::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::Identity:
      out << "identity(" << input_dim_ << ")";
      break;
    case Kind::Polynomial:
      out << "polynomial(" << input_dim_ << ",degree=" << degree_ << ")";
      break;
    case Kind::RadialBasis:
      out << "radial_basis(" << input_dim_ << ",centers=" << size_ << ")";
      break;
  }
  return out.str();
}

}  // namespace aisac
