#include "mixclust/mdpde.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mixclust/errors.hpp"

namespace mixclust {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMadScale = 1.4826;

double median(std::vector<double> v) {
    const auto n = v.size();
    auto mid = v.begin() + static_cast<long>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// correction term n*beta/(1+beta)^{p/2+1}
double shrink_term(double n, int p, double beta) {
    return n * beta * std::pow(1.0 + beta, -(0.5 * p + 1.0));
}

}  // namespace

void IrlsConfig::validate() const {
    if (!(epsilon > 0.0)) throw InputError("IRLS epsilon must be positive");
    if (max_iter < 1) throw InputError("IRLS max_iter must be at least 1");
    if (!(min_denominator > 0.0)) throw InputError("IRLS min_denominator must be positive");
    if (eigen_floor < 0.0) throw InputError("IRLS eigen_floor must be non-negative");
}

Matrix floor_eigenvalues(const Matrix& s, double floor) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    Vector lam = es.eigenvalues().cwiseMax(floor);
    Matrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

RobustStart robust_init(const Observations& data, const IrlsConfig& cfg) {
    const long n = data.rows();
    const long p = data.cols();
    if (n < 2) throw InsufficientData("robust initialisation needs at least two observations");

    Vector u(p);
    for (long j = 0; j < p; ++j) u(j) = median({data.col(j).begin(), data.col(j).end()});

    const Matrix c = data.rowwise() - u.transpose();
    Matrix s(p, p);
    std::vector<double> prod(static_cast<std::size_t>(n));
    for (long i = 0; i < p; ++i) {
        for (long j = i; j < p; ++j) {
            for (long l = 0; l < n; ++l) prod[l] = c(l, i) * c(l, j);
            s(i, j) = s(j, i) = kMadScale * kMadScale * median(prod);
        }
    }

    const double trace = s.trace();
    double floor = cfg.min_denominator * (trace > 0.0 ? trace : 1.0);
    floor = std::max(floor, cfg.eigen_floor);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const bool floored = es.eigenvalues().minCoeff() < floor;
    if (floored) s = floor_eigenvalues(s, floor);
    return {GaussianComponent(u, CovMatrix(s)), floored};
}

Vector irls_weights(const Observations& data, const GaussianComponent& comp, double beta) {
    if (beta < 0.0) throw InputError("beta must be non-negative");
    if (beta == 0.0) return Vector::Ones(data.rows());
    return (-0.5 * beta * mahalanobis_sq_rows(data, comp).array()).exp().matrix();
}

GaussianComponent irls_step(const Observations& data, const GaussianComponent& comp, double beta,
                            const IrlsConfig& cfg) {
    const double n = static_cast<double>(data.rows());
    const int p = comp.dim();
    const Vector w = irls_weights(data, comp, beta);
    const double sw = w.sum();
    const double denom = sw - shrink_term(n, p, beta);
    if (!(denom > cfg.min_denominator * n) || !(sw > 0.0))
        throw NonPositiveDenominator("IRLS covariance denominator " + std::to_string(denom) +
                                     " is not above the guard");

    Vector mu = (data.transpose() * w) / sw;
    const Matrix c = data.rowwise() - mu.transpose();
    Matrix s = (c.transpose() * w.asDiagonal() * c) / denom;
    s = 0.5 * (s + s.transpose());
    if (cfg.eigen_floor > 0.0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(s);
        if (es.eigenvalues().minCoeff() < cfg.eigen_floor) s = floor_eigenvalues(s, cfg.eigen_floor);
    }
    return {std::move(mu), CovMatrix(s)};
}

ComponentFit fit_component(const Observations& data, double beta, const IrlsConfig& cfg,
                           const std::optional<GaussianComponent>& start) {
    cfg.validate();
    if (data.rows() < 2) throw InsufficientData("covariance fitting needs at least two observations");
    if (beta < 0.0) throw InputError("beta must be non-negative");
    if (start && start->dim() != data.cols())
        throw DimensionMismatch("start component has wrong dimension");

    GaussianComponent cur = start ? *start : robust_init(data, cfg).component;
    ComponentFit fit{cur, 0, false, Vector()};
    for (int it = 1; it <= cfg.max_iter; ++it) {
        GaussianComponent next = irls_step(data, cur, beta, cfg);
        const double dm = (next.mean - cur.mean).norm();
        const double ds = (next.cov.matrix() - cur.cov.matrix()).norm();
        cur = std::move(next);
        fit.iterations = it;
        if (dm <= cfg.epsilon && ds <= cfg.epsilon) {
            fit.converged = true;
            break;
        }
    }
    fit.estimate = cur;
    fit.final_weights = irls_weights(data, cur, beta);
    return fit;
}

double EquationResidual::norm() const {
    return std::sqrt(mean.squaredNorm() + cov.squaredNorm());
}

namespace {

EquationResidual residual_with(const Observations& data, const GaussianComponent& comp,
                               const Vector& w, double c) {
    const double n = static_cast<double>(data.rows());
    const Matrix d = data.rowwise() - comp.mean.transpose();
    EquationResidual r;
    r.mean = (d.transpose() * w) / n;
    const Matrix& s = comp.cov.matrix();
    r.cov = (w.sum() / n) * s - (d.transpose() * w.asDiagonal() * d) / n - c * s;
    return r;
}

}  // namespace

EquationResidual estimating_equation_residual(const Observations& data,
                                              const GaussianComponent& comp, double beta) {
    if (data.rows() == 0) throw InsufficientData("residual needs observations");
    const int p = comp.dim();
    const Vector w = (beta * log_density_rows(data, comp).array()).exp().matrix();
    const double c0 = beta * std::exp(-0.5 * p * beta * kLog2Pi - 0.5 * beta * comp.cov.log_det() -
                                      0.5 * (p + 2) * std::log1p(beta));
    return residual_with(data, comp, w, c0);
}

EquationResidual weighted_equation_residual(const Observations& data,
                                            const GaussianComponent& comp, double beta) {
    if (data.rows() == 0) throw InsufficientData("residual needs observations");
    const int p = comp.dim();
    const Vector w = irls_weights(data, comp, beta);
    return residual_with(data, comp, w, beta * std::pow(1.0 + beta, -(0.5 * p + 1.0)));
}

}  // namespace mixclust
