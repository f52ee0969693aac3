#pragma once

// Influence functions of the pseudo beta-likelihood functional for a
// two-component univariate normal mixture whose first cluster is an interval
// (a, b) and whose second cluster is its complement.
//
// Unknowns, in this order everywhere:  pi1, pi2, a, b, mu1, mu2, s1, s2
// (s = variance).

#include <Eigen/Core>
#include <Eigen/LU>
#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mixclust/constraints.hpp"

namespace mixclust {

struct NormalMixture1D {
    std::array<double, 2> weights{0.5, 0.5};
    std::array<double, 2> means{0.0, 5.0};
    std::array<double, 2> variances{1.0, 4.0};

    double pdf(double x) const;
    double cdf(double x) const;
    double pooled_mean() const;
    double pooled_sd() const;
    void validate() const;
};

struct InfluenceConfig {
    ConstraintConfig constraint{5.0, 0.1};
    double quad_tol = 1e-10;   // absolute
    double tail_sds = 12.0;    // integration range: pooled mean +- tail_sds pooled sd
    int max_newton = 100;
    double newton_tol = 1e-12;
    double max_condition = 1e12;
};

// Point mass eps at y mixed into the model: (1-eps) P + eps delta_y
struct PointMass {
    double y = 0.0;
    double eps = 0.0;
};

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using InfluenceVector = std::array<double, 8>;

inline constexpr std::array<const char*, 8> kFunctionalNames{"pi1", "pi2", "a",  "b",
                                                             "mu1", "mu2", "s1", "s2"};

struct FunctionalSolution {
    double pi1 = 0, pi2 = 0, a = 0, b = 0, mu1 = 0, mu2 = 0, s1 = 0, s2 = 0;
    Vec8 residuals = Vec8::Zero();
    int newton_iterations = 0;

    Vec8 vector() const;
    static FunctionalSolution from_vector(const Vec8& u);
    double max_residual() const { return residuals.cwiseAbs().maxCoeff(); }
};

// The eight defining equations evaluated at u.
Vec8 functional_equations(const NormalMixture1D& dist, double beta, const Vec8& u,
                          const InfluenceConfig& cfg = {},
                          const std::optional<PointMass>& mass = std::nullopt);

// Interval (a, b) on which pi1 f1 >= pi2 f2; throws GeometryNotSupported otherwise.
std::pair<double, double> interval_boundary(double pi1, double mu1, double s1, double pi2,
                                            double mu2, double s2);

FunctionalSolution solve_functional(const NormalMixture1D& dist, double beta,
                                    const InfluenceConfig& cfg = {},
                                    const std::optional<PointMass>& mass = std::nullopt,
                                    const std::optional<FunctionalSolution>& start = std::nullopt);

// Integrals entering the derivative matrix, computed once per solution.
struct IfConstants {
    double c0 = 0;              // beta / (2 (2pi)^{beta/2} (1+beta)^{3/2})
    double pa = 0, pb = 0;      // model density at a and b
    double mass_in = 0, mass_out = 0;
    double mu1_mean = 0, s1_mean = 0;  // d/dmu1, d/ds1 of the mu1 equation
    double mu2_mean = 0, s2_mean = 0;
    double mu1_var = 0, s1_var = 0;    // d/dmu1, d/ds1 of the s1 equation (integral part)
    double mu2_var = 0, s2_var = 0;

    std::array<double, 8> integrals() const {
        return {mu1_mean, s1_mean, mu2_mean, s2_mean, mu1_var, s1_var, mu2_var, s2_var};
    }
};

IfConstants if_constants(const FunctionalSolution& sol, const NormalMixture1D& dist, double beta,
                         const InfluenceConfig& cfg = {});

class InfluenceSystem {
public:
    InfluenceSystem(const FunctionalSolution& sol, const NormalMixture1D& dist, double beta,
                    const InfluenceConfig& cfg = {});

    const Mat8& matrix() const { return a_; }
    Vec8 rhs(double y) const;
    InfluenceVector at(double y) const;
    double condition() const { return cond_; }
    const IfConstants& constants() const { return k_; }
    const FunctionalSolution& solution() const { return sol_; }
    double beta() const { return beta_; }

private:
    FunctionalSolution sol_;
    double beta_;
    IfConstants k_;
    Mat8 a_;
    Eigen::FullPivLU<Mat8> lu_;
    double cond_ = 0;
};

// (A, B(y)) pair for one contamination point.
std::pair<Mat8, Vec8> assemble_if_system(const FunctionalSolution& sol, const NormalMixture1D& dist,
                                         double beta, double y, const InfluenceConfig& cfg = {});

InfluenceVector influence_at(const FunctionalSolution& sol, const NormalMixture1D& dist,
                             double beta, double y, const InfluenceConfig& cfg = {});

// Finite-difference influence from contaminated re-solves, extrapolated to eps -> 0
// by a least-squares line through the difference quotients.
InfluenceVector numeric_if_oracle(const NormalMixture1D& dist, double beta,
                                  const InfluenceConfig& cfg, double y,
                                  const std::vector<double>& eps_list,
                                  const std::optional<FunctionalSolution>& base = std::nullopt);

struct IfCurveRow {
    double y;
    InfluenceVector value;
};

std::vector<IfCurveRow> if_curve(const InfluenceSystem& sys, const std::vector<double>& grid,
                                 int threads = 1);

std::vector<double> linear_grid(double lo, double hi, int points);

void write_if_csv(std::ostream& os, const std::vector<IfCurveRow>& rows);

}  // namespace mixclust
