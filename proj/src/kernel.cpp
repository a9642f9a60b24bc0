#include "palm/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace palm {

namespace {

void check_dims(std::size_t a, std::size_t b, Eigen::Index theta) {
  if (a != b || static_cast<Eigen::Index>(a) != theta)
    throw std::invalid_argument("kernel: dimension mismatch");
}

} // namespace

Lengthscales::Lengthscales(Eigen::VectorXd theta) : theta_(std::move(theta)) {
  if (theta_.size() == 0)
    throw std::invalid_argument("Lengthscales: empty vector");
  for (Eigen::Index i = 0; i < theta_.size(); ++i) {
    if (!(theta_[i] > 0.0) || !std::isfinite(theta_[i]))
      throw std::invalid_argument(
          "Lengthscales: components must be positive and finite");
  }
}

Lengthscales Lengthscales::isotropic(double theta, Eigen::Index dim) {
  return Lengthscales(Eigen::VectorXd::Constant(dim, theta));
}

bool Lengthscales::is_isotropic() const {
  return (theta_.array() == theta_[0]).all();
}

Nugget Nugget::value(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta))
    throw std::invalid_argument("Nugget: must be nonnegative and finite");
  return {eta, false};
}

Nugget Nugget::floored(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta))
    throw std::invalid_argument("Nugget: must be nonnegative and finite");
  if (eta <= kJitter)
    return jitter();
  return {eta, false};
}

double sq_exp_corr(Point x1, Point x2, const Lengthscales &theta) {
  check_dims(x1.size(), x2.size(), theta.dim());
  double s = 0.0;
  for (std::size_t l = 0; l < x1.size(); ++l) {
    const double diff = x1[l] - x2[l];
    s += diff * diff / theta[static_cast<Eigen::Index>(l)];
  }
  return std::exp(-s);
}

Eigen::MatrixXd corr_matrix(const Design &X, const Lengthscales &theta,
                            double eta) {
  const Eigen::Index n = X.rows();
  if (n < 1)
    throw std::invalid_argument("corr_matrix: empty design");
  if (X.cols() != theta.dim())
    throw std::invalid_argument("corr_matrix: dimension mismatch");
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0 + eta;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c = sq_exp_corr(row_span(X, i), row_span(X, j), theta);
      K(i, j) = c;
      K(j, i) = c;
    }
  }
  return K;
}

Eigen::VectorXd cross_corr_vec(const Design &X, Point x,
                               const Lengthscales &theta) {
  Eigen::VectorXd k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    k[i] = sq_exp_corr(row_span(X, i), x, theta);
  return k;
}

Eigen::MatrixXd cross_corr_matrix(const Design &A, const Design &B,
                                  const Lengthscales &theta) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      K(i, j) = sq_exp_corr(row_span(A, i), row_span(B, j), theta);
  return K;
}

bool has_duplicate_rows(const Design &X) {
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (X.row(i) == X.row(j))
        return true;
  return false;
}

CodingMap::CodingMap(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size() || lo_.size() == 0)
    throw std::invalid_argument("CodingMap: bound size mismatch");
  for (Eigen::Index i = 0; i < lo_.size(); ++i)
    if (!(hi_[i] > lo_[i]))
      throw std::invalid_argument("CodingMap: empty range");
}

CodingMap CodingMap::from_range(const Design &X) {
  if (X.rows() < 1)
    throw std::invalid_argument("CodingMap: empty design");
  Eigen::VectorXd lo = X.colwise().minCoeff().transpose();
  Eigen::VectorXd hi = X.colwise().maxCoeff().transpose();
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(hi[i] > lo[i]))
      hi[i] = lo[i] + 1.0;
  return CodingMap(std::move(lo), std::move(hi));
}

Eigen::VectorXd CodingMap::code(Point x) const {
  if (static_cast<Eigen::Index>(x.size()) != dim())
    throw std::invalid_argument("CodingMap: dimension mismatch");
  Eigen::VectorXd u(dim());
  for (Eigen::Index i = 0; i < dim(); ++i)
    u[i] = (x[static_cast<std::size_t>(i)] - lo_[i]) / (hi_[i] - lo_[i]);
  return u;
}

Eigen::VectorXd CodingMap::decode(Point u) const {
  if (static_cast<Eigen::Index>(u.size()) != dim())
    throw std::invalid_argument("CodingMap: dimension mismatch");
  Eigen::VectorXd x(dim());
  for (Eigen::Index i = 0; i < dim(); ++i)
    x[i] = lo_[i] + u[static_cast<std::size_t>(i)] * (hi_[i] - lo_[i]);
  return x;
}

Design CodingMap::code(const Design &X) const {
  if (X.cols() != dim())
    throw std::invalid_argument("CodingMap: dimension mismatch");
  Design U(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      U(i, j) = (X(i, j) - lo_[j]) / (hi_[j] - lo_[j]);
  return U;
}

Design CodingMap::decode(const Design &U) const {
  if (U.cols() != dim())
    throw std::invalid_argument("CodingMap: dimension mismatch");
  Design X(U.rows(), U.cols());
  for (Eigen::Index i = 0; i < U.rows(); ++i)
    for (Eigen::Index j = 0; j < U.cols(); ++j)
      X(i, j) = lo_[j] + U(i, j) * (hi_[j] - lo_[j]);
  return X;
}

} // namespace palm
