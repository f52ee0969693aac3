#pragma once

#include <span>
#include <vector>

#include "mixclust/gaussian.hpp"

namespace mixclust {

// ER: largest/smallest eigenvalue over all components <= c.  NS: smallest >= c1.
struct ConstraintConfig {
    double c = 20.0;
    double c1 = 0.1;

    void validate() const;
};

struct ConstraintCheck {
    bool satisfied = false;
    double max_eigen = 0.0;  // M
    double min_eigen = 0.0;  // m
};

ConstraintCheck check_constraints(std::span<const Matrix> covs, const ConstraintConfig& cfg);
ConstraintCheck check_constraints(std::span<const CovMatrix> covs, const ConstraintConfig& cfg);

// Lower clipping threshold t >= c1 minimising sum (log lambda - log clip(lambda, t, c t))^2
// over the candidate set {c1} u {lambda/c} u {lambda}.
double clip_threshold(std::span<const double> eigenvalues, const ConstraintConfig& cfg);

double clip_cost(std::span<const double> eigenvalues, double t, double c);

// Rebuilds each matrix from its own eigenvectors with eigenvalues clipped into [t, c t].
// Feasible input is returned unchanged.
std::vector<Matrix> enforce_constraints(std::span<const Matrix> covs, const ConstraintConfig& cfg);
std::vector<CovMatrix> enforce_constraints(std::span<const CovMatrix> covs,
                                           const ConstraintConfig& cfg);

}  // namespace mixclust
