#include "mixclust/constraints.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mixclust/errors.hpp"

namespace mixclust {

namespace {

constexpr double kSlack = 1e-10;

struct Spectrum {
    Vector values;
    Matrix vectors;
};

Spectrum decompose(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success) throw ComputationError("eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

double safe_log(double v) {
    return std::log(std::max(v, std::numeric_limits<double>::min()));
}

void check_dims(std::span<const Matrix> covs) {
    if (covs.empty()) throw InputError("constraint check needs at least one covariance");
    for (const auto& s : covs)
        if (s.rows() != covs[0].rows() || s.cols() != covs[0].rows())
            throw DimensionMismatch("covariances must share one square dimension");
}

std::vector<Matrix> raw(std::span<const CovMatrix> covs) {
    std::vector<Matrix> out;
    out.reserve(covs.size());
    for (const auto& s : covs) out.push_back(s.matrix());
    return out;
}

}  // namespace

void ConstraintConfig::validate() const {
    if (!(c >= 1.0)) throw InputError("eigenvalue-ratio bound c must be >= 1");
    if (!(c1 > 0.0)) throw InputError("eigenvalue floor c1 must be positive");
}

ConstraintCheck check_constraints(std::span<const Matrix> covs, const ConstraintConfig& cfg) {
    cfg.validate();
    check_dims(covs);
    ConstraintCheck r{true, -std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
    for (const auto& s : covs) {
        const Vector lam = decompose(s).values;
        r.max_eigen = std::max(r.max_eigen, lam.maxCoeff());
        r.min_eigen = std::min(r.min_eigen, lam.minCoeff());
    }
    // slack absorbs the rounding of rebuilding V diag(lambda) V^T
    r.satisfied = r.min_eigen >= cfg.c1 * (1.0 - kSlack) &&
                  r.max_eigen <= cfg.c * r.min_eigen * (1.0 + kSlack);
    return r;
}

ConstraintCheck check_constraints(std::span<const CovMatrix> covs, const ConstraintConfig& cfg) {
    const auto m = raw(covs);
    return check_constraints(std::span<const Matrix>(m), cfg);
}

double clip_cost(std::span<const double> eigenvalues, double t, double c) {
    double cost = 0.0;
    for (double lam : eigenvalues) {
        const double d = safe_log(lam) - safe_log(std::clamp(lam, t, c * t));
        cost += d * d;
    }
    return cost;
}

double clip_threshold(std::span<const double> eigenvalues, const ConstraintConfig& cfg) {
    cfg.validate();
    std::vector<double> cand{cfg.c1};
    for (double lam : eigenvalues) {
        cand.push_back(lam / cfg.c);
        cand.push_back(lam);
    }
    for (double& t : cand) t = std::max(t, cfg.c1);
    std::sort(cand.begin(), cand.end());
    double best_t = cand.front();
    double best = std::numeric_limits<double>::infinity();
    for (double t : cand) {
        const double cost = clip_cost(eigenvalues, t, cfg.c);
        if (cost < best) {  // strict: ties keep the smaller threshold
            best = cost;
            best_t = t;
        }
    }
    return best_t;
}

std::vector<Matrix> enforce_constraints(std::span<const Matrix> covs, const ConstraintConfig& cfg) {
    const ConstraintCheck chk = check_constraints(covs, cfg);
    if (chk.satisfied) return {covs.begin(), covs.end()};

    std::vector<Spectrum> spec;
    std::vector<double> all;
    for (const auto& s : covs) {
        spec.push_back(decompose(s));
        for (double v : spec.back().values) all.push_back(v);
    }
    const double t = clip_threshold(all, cfg);
    const double hi = cfg.c * t;

    std::vector<Matrix> out;
    out.reserve(covs.size());
    for (const auto& sp : spec) {
        Vector lam = sp.values;
        for (auto& v : lam) v = std::clamp(v, t, hi);
        Matrix s = sp.vectors * lam.asDiagonal() * sp.vectors.transpose();
        out.push_back(0.5 * (s + s.transpose()));
    }
    return out;
}

std::vector<CovMatrix> enforce_constraints(std::span<const CovMatrix> covs,
                                           const ConstraintConfig& cfg) {
    const auto m = raw(covs);
    const ConstraintCheck chk = check_constraints(std::span<const Matrix>(m), cfg);
    if (chk.satisfied) return {covs.begin(), covs.end()};
    std::vector<CovMatrix> out;
    for (const auto& s : enforce_constraints(std::span<const Matrix>(m), cfg)) out.emplace_back(s);
    return out;
}

}  // namespace mixclust
