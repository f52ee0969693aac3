#pragma once

#include <optional>

#include "mixclust/gaussian.hpp"

namespace mixclust {

struct IrlsConfig {
    double epsilon = 1e-6;
    int max_iter = 500;
    // Denominator guard is min_denominator * n.
    double min_denominator = 1e-8;
    // When > 0, eigenvalues of every iterate are raised to at least this value
    // instead of failing on a singular update.  Clustering sets it to c1.
    double eigen_floor = 0.0;

    void validate() const;
};

struct RobustStart {
    GaussianComponent component;
    bool floored = false;  // a degenerate (zero-MAD) direction had to be lifted
};

struct ComponentFit {
    GaussianComponent estimate;
    int iterations = 0;
    bool converged = false;
    Vector final_weights;
};

// Componentwise median + scaled median-of-products scatter.
RobustStart robust_init(const Observations& data, const IrlsConfig& cfg = {});

// w_i = exp(-beta/2 * d_i^2)
Vector irls_weights(const Observations& data, const GaussianComponent& comp, double beta);

GaussianComponent irls_step(const Observations& data, const GaussianComponent& comp, double beta,
                            const IrlsConfig& cfg = {});

ComponentFit fit_component(const Observations& data, double beta, const IrlsConfig& cfg = {},
                           const std::optional<GaussianComponent>& start = std::nullopt);

struct EquationResidual {
    Vector mean;
    Matrix cov;
    double norm() const;
};

// Estimating equations in density-power form:
//   (1/n) sum phi^b (x - mu) = 0
//   (1/n) sum phi^b (Sigma - (x-mu)(x-mu)^T) - c0 Sigma = 0
EquationResidual estimating_equation_residual(const Observations& data,
                                              const GaussianComponent& comp, double beta);

// Same equations written with the exponential weights used by the fixed-point update.
// Equals estimating_equation_residual divided by (2pi)^{-p b/2} |Sigma|^{-b/2}.
EquationResidual weighted_equation_residual(const Observations& data,
                                            const GaussianComponent& comp, double beta);

// Symmetric eigenvalue floor; used by robust_init and the floored IRLS path.
Matrix floor_eigenvalues(const Matrix& s, double floor);

}  // namespace mixclust
