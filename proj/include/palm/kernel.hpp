#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace palm {

/// Point sets are stored one point per row, row-major, so that a single
/// point is a contiguous span.
using Design =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = std::span<const double>;

inline Point row_span(const Design &X, Eigen::Index i) {
  return {X.row(i).data(), static_cast<std::size_t>(X.cols())};
}

inline Point as_point(const Eigen::VectorXd &v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Smallest nugget used for deterministic responses on unit-coded inputs.
inline constexpr double kJitter = 1e-8;

/// Per-dimension lengthscales of the separable Gaussian kernel, in squared
/// coded-input units. Every component is strictly positive and finite.
class Lengthscales {
public:
  explicit Lengthscales(Eigen::VectorXd theta);

  static Lengthscales isotropic(double theta, Eigen::Index dim);

  Eigen::Index dim() const { return theta_.size(); }
  double operator[](Eigen::Index i) const { return theta_[i]; }
  const Eigen::VectorXd &values() const { return theta_; }
  bool is_isotropic() const;

private:
  Eigen::VectorXd theta_;
};

/// Diagonal inflation of the correlation matrix, as a ratio to the
/// amplitude. `is_jitter` marks deterministic-data mode.
struct Nugget {
  double eta = kJitter;
  bool is_jitter = true;

  static Nugget jitter() { return {kJitter, true}; }
  /// Throws on negative values. Values below the jitter floor stay as given.
  static Nugget value(double eta);
  /// Like value(), but anything below the jitter floor becomes jitter.
  static Nugget floored(double eta);
};

/// exp(-sum_l (x1_l - x2_l)^2 / theta_l)
double sq_exp_corr(Point x1, Point x2, const Lengthscales &theta);

/// Correlation matrix of a design plus `eta` on the diagonal.
Eigen::MatrixXd corr_matrix(const Design &X, const Lengthscales &theta,
                            double eta);

/// Correlations between every design row and x. No nugget term.
Eigen::VectorXd cross_corr_vec(const Design &X, Point x,
                               const Lengthscales &theta);

/// rows(A) x rows(B) matrix of correlations, no nugget.
Eigen::MatrixXd cross_corr_matrix(const Design &A, const Design &B,
                                  const Lengthscales &theta);

/// True when two rows are identical; with eta = 0 the correlation matrix
/// is then singular.
bool has_duplicate_rows(const Design &X);

/// Affine map from natural input units to [0,1]^d.
class CodingMap {
public:
  CodingMap() = default;
  CodingMap(Eigen::VectorXd lo, Eigen::VectorXd hi);

  /// Bounds taken from the per-dimension range of X.
  static CodingMap from_range(const Design &X);

  Eigen::Index dim() const { return lo_.size(); }
  const Eigen::VectorXd &lo() const { return lo_; }
  const Eigen::VectorXd &hi() const { return hi_; }

  Eigen::VectorXd code(Point x) const;
  Eigen::VectorXd decode(Point u) const;
  Design code(const Design &X) const;
  Design decode(const Design &U) const;

private:
  Eigen::VectorXd lo_, hi_;
};

} // namespace palm
