#include "mixclust/gaussian.hpp"

#include <cmath>
#include <string>

#include "mixclust/errors.hpp"

namespace mixclust {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

CovMatrix::CovMatrix(const Matrix& entries) {
    if (entries.rows() == 0 || entries.rows() != entries.cols())
        throw DimensionMismatch("covariance must be a non-empty square matrix");
    if (!entries.allFinite()) throw NotPositiveDefinite("covariance has non-finite entries");
    const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
    if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InputError("covariance is not symmetric");
    m_ = 0.5 * (entries + entries.transpose());
    llt_.compute(m_);
    if (llt_.info() != Eigen::Success)
        throw NotPositiveDefinite("covariance is not positive definite");
    const auto diag = llt_.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any())
        throw NotPositiveDefinite("covariance is not positive definite");
    log_det_ = 2.0 * diag.array().log().sum();
    if (!std::isfinite(log_det_)) throw NotPositiveDefinite("covariance determinant underflows");
}

CovMatrix CovMatrix::identity(int p) { return CovMatrix(Matrix::Identity(p, p)); }

GaussianComponent::GaussianComponent(Vector mu, CovMatrix sigma)
    : mean(std::move(mu)), cov(std::move(sigma)) {
    if (mean.size() != cov.dim())
        throw DimensionMismatch("mean has dimension " + std::to_string(mean.size()) +
                                " but covariance has " + std::to_string(cov.dim()));
}

double mahalanobis_sq(const Eigen::Ref<const Vector>& x, const GaussianComponent& comp) {
    if (x.size() != comp.dim()) throw DimensionMismatch("point and component dimensions differ");
    Vector d = x - comp.mean;
    comp.cov.llt().matrixL().solveInPlace(d);
    return d.squaredNorm();
}

double log_density(const Eigen::Ref<const Vector>& x, const GaussianComponent& comp) {
    const double p = comp.dim();
    return -0.5 * p * kLog2Pi - 0.5 * comp.cov.log_det() - 0.5 * mahalanobis_sq(x, comp);
}

Vector mahalanobis_sq_rows(const Observations& data, const GaussianComponent& comp) {
    if (data.cols() != comp.dim()) throw DimensionMismatch("data and component dimensions differ");
    // L^{-1} (X - mu)^T, column per observation
    Matrix centered = (data.rowwise() - comp.mean.transpose()).transpose();
    comp.cov.llt().matrixL().solveInPlace(centered);
    return centered.colwise().squaredNorm().transpose();
}

Vector log_density_rows(const Observations& data, const GaussianComponent& comp) {
    const double p = comp.dim();
    const double c = -0.5 * p * kLog2Pi - 0.5 * comp.cov.log_det();
    return (c - 0.5 * mahalanobis_sq_rows(data, comp).array()).matrix();
}

double dpd_integral(const CovMatrix& cov, double beta) {
    if (beta < 0.0) throw InputError("beta must be non-negative");
    const double p = cov.dim();
    return std::exp(-0.5 * p * beta * kLog2Pi - 0.5 * beta * cov.log_det() -
                    0.5 * p * std::log1p(beta));
}

double component_beta_objective(const Observations& data, const GaussianComponent& comp,
                                double beta) {
    if (data.rows() == 0) throw InsufficientData("objective needs at least one observation");
    if (beta < 0.0) throw InputError("beta must be non-negative");
    const Vector ld = log_density_rows(data, comp);
    const double n = static_cast<double>(data.rows());
    if (beta == 0.0) return ld.mean();
    return (beta * ld.array()).exp().sum() / (n * beta) - dpd_integral(comp.cov, beta) / (1.0 + beta);
}

}  // namespace mixclust
