#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mixclust/constraints.hpp"
#include "mixclust/gaussian.hpp"
#include "mixclust/mdpde.hpp"

namespace mixclust {

struct MixtureParams {
    Vector weights;
    std::vector<GaussianComponent> components;

    int k() const { return static_cast<int>(components.size()); }
    int dim() const { return components.empty() ? 0 : components.front().dim(); }
    std::vector<CovMatrix> covariances() const;
    void validate() const;
};

enum class AssignmentRule {
    MaxDiscriminant,  // argmax_j pi_j phi(x; mu_j, Sigma_j)
    NearestMean,      // argmin_j |x - mu_j|, Euclidean
};

struct AlgoConfig {
    double beta = 0.1;
    ConstraintConfig constraint;
    double threshold = 1e-3;  // T; D_{z_i}(X_i) <= T flags an outlier
    int max_outer_iter = 100;
    int n_restarts = 10;
    std::uint64_t seed = 1;
    IrlsConfig irls;
    AssignmentRule rule = AssignmentRule::MaxDiscriminant;
    int threads = 1;

    void validate() const;
};

// Labels are 0-based internally; the CLI writes them 1-based.
struct Assignment {
    std::vector<int> labels;
    Vector discriminants;  // D_{z_i}(X_i)
};

struct OutlierReport {
    std::vector<bool> flags;
    std::vector<int> types;  // pre-flag cluster for flagged points, -1 elsewhere
};

struct ClusteringResult {
    MixtureParams params;
    std::vector<int> assignments;
    std::vector<bool> outlier_flags;
    std::vector<int> outlier_types;
    double objective = 0.0;
    int iterations = 0;
    int restart_index = 0;
    bool converged = false;
    Vector discriminants;
    std::vector<double> objective_trace;  // winning restart, one entry per outer pass
    std::vector<int> flagged_components;  // components that kept their previous covariance
    int degenerate_restarts = 0;
};

using Rng = std::mt19937_64;

Rng restart_rng(std::uint64_t seed, std::uint64_t index);

// Per-observation log D_j = log pi_j + log phi_j, n x k
Matrix log_discriminants(const Observations& data, const MixtureParams& params);

double pseudo_beta_likelihood(const Observations& data, const MixtureParams& params,
                              const std::vector<int>& assignments, double beta);

std::vector<int> sample_distinct(int n, int k, Rng& rng);

struct Initialisation {
    MixtureParams params;
    std::vector<int> assignments;
};
Initialisation initialize(const Observations& data, int k, Rng& rng);
Initialisation initialize_from(const Observations& data, const std::vector<int>& centre_rows);

Assignment assign(const Observations& data, const MixtureParams& params,
                  AssignmentRule rule = AssignmentRule::MaxDiscriminant);

// Discriminant of each point under its given label.
Vector discriminants_for(const Observations& data, const MixtureParams& params,
                         const std::vector<int>& labels);

Vector update_weights(const std::vector<int>& assignments, int n, int k);

OutlierReport detect_outliers(const Observations& data, const MixtureParams& params,
                              const std::vector<int>& assignments, double threshold);
OutlierReport detect_outliers(const Observations& data, const ClusteringResult& result,
                              double threshold);

// One restart from a given initialisation.  Throws DegenerateRestarts when a
// cluster empties twice.
ClusteringResult fit_from(const Observations& data, const Initialisation& init,
                          const AlgoConfig& cfg);

ClusteringResult fit(const Observations& data, int k, const AlgoConfig& cfg);

}  // namespace mixclust
