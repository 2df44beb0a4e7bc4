#pragma once

#include <string>

#include "aisac/common.hpp"

namespace aisac {

// Fixed state basis phi(s) for linear function approximation.
class FeatureMap {
 public:
  enum class Kind { Identity, Polynomial, RadialBasis };

  // [1, s_1, ..., s_n]
  static FeatureMap identity(int input_dim);
  // [1, s_i^k for each dimension i and k = 1..degree]; no cross terms.
  static FeatureMap polynomial(int input_dim, int degree);
  // exp(-0.5 * sum_j (diff_j / width_j)^2) for each center. Dimensions with a
  // positive period use the wrapped difference.
  static FeatureMap radial_basis(Matrix centers, Vector widths, Vector periods);
  // Regular grid of centers between lows and highs, width equal to the grid
  // spacing in each dimension. Periodic dimensions exclude the high end.
  static FeatureMap radial_grid(const Vector& lows, const Vector& highs, const std::vector<int>& counts,
                                const Vector& periods);

  Kind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int size() const { return size_; }

  Vector operator()(const Vector& state) const;
  void evaluate(const Vector& state, Eigen::Ref<Vector> out) const;
  std::string describe() const;

 private:
  FeatureMap(Kind kind, int input_dim, int size) : kind_(kind), input_dim_(input_dim), size_(size) {}

  Kind kind_;
  int input_dim_;
  int size_;
  int degree_ = 1;
  Matrix centers_;  // one center per row
  Vector inv_widths_;
  Vector periods_;
};

}  // namespace aisac
