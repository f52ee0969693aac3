#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mixclust/mple.hpp"

namespace mixclust {

enum class Contamination { None, UniformChiSq, Annulus, OutlyingCluster };

const char* to_string(Contamination c);
Contamination contamination_from_string(const std::string& s);

struct ScenarioSpec {
    int n = 1000;
    int p = 2;
    int k = 3;
    std::vector<Vector> means;   // empty -> 0, 5*1, -5*1
    double cov_scale = 1.0;      // Sigma = cov_scale * I
    std::vector<double> weights; // empty -> 0.33/0.33/0.34 pure, 0.3 each contaminated
    Contamination contamination = Contamination::None;
    double contamination_level = 0.0;
    int replications = 20;
    std::uint64_t seed = 1;

    // Means and weights filled in, everything checked.
    ScenarioSpec resolved() const;
    void validate() const;
    int outlier_count() const;
};

struct LabeledSample {
    Observations data;
    std::vector<int> labels;  // 0-based cluster, -1 for contamination
    std::vector<bool> outlier;
    int regular_count() const;
};

double default_threshold(int p);

LabeledSample gen_pure(const ScenarioSpec& spec, Rng& rng);
LabeledSample contaminate_uniform_chisq(const LabeledSample& sample, const ScenarioSpec& spec, Rng& rng);
LabeledSample contaminate_annulus(const LabeledSample& sample, const ScenarioSpec& spec, Rng& rng);
LabeledSample contaminate_outlying_cluster(const LabeledSample& sample, const ScenarioSpec& spec,
                                           Rng& rng);
LabeledSample generate(const ScenarioSpec& spec, Rng& rng);

double chisq_quantile(int p, double prob);

// Fraction of misclassified true-regular points, minimised over label
// permutations.  A regular point flagged as an outlier is an error unless
// count_flagged is false, in which case flagged points are left out.
double regular_misclassification(const std::vector<int>& predicted,
                                 const std::vector<bool>& flagged, const LabeledSample& truth,
                                 int k, bool count_flagged = true);

std::optional<double> undetected_outlier_proportion(const std::vector<bool>& flagged,
                                                    const LabeledSample& truth);

// Permutation of estimated clusters that best matches the true means.
std::vector<int> match_means(const std::vector<Vector>& estimated, const std::vector<Vector>& truth);

struct BiasMse {
    std::vector<double> bias;  // per true cluster
    std::vector<double> mse;
    double mean_bias = 0.0;
    double mean_mse = 0.0;
};

// estimates[r][j] is replication r's estimate of true cluster j (already matched)
BiasMse bias_mse(const std::vector<std::vector<Vector>>& estimates, const std::vector<Vector>& truth);

struct MethodConfig {
    std::string name;
    AlgoConfig algo;
    bool count_flagged_as_error = true;
};

struct ReplicationRow {
    int replication = 0;
    int method = 0;
    bool ok = false;
    std::string error;
    double misclassification = 0.0;
    std::optional<double> undetected;
    int detected = 0;
    double objective = 0.0;
    std::vector<Vector> matched_means;
};

struct MethodSummary {
    std::string name;
    double beta = 0.0;
    double threshold = 0.0;
    int succeeded = 0;
    int failed = 0;
    double misclassification = 0.0;
    std::optional<double> undetected;
    double detected = 0.0;
    BiasMse bias;
};

struct SimulationReport {
    ScenarioSpec spec;
    std::vector<MethodConfig> methods;
    std::vector<ReplicationRow> rows;
    std::vector<MethodSummary> summary;
};

SimulationReport run_experiment(const ScenarioSpec& spec, const std::vector<MethodConfig>& methods,
                                int threads = 1);

// Recomputes the per-method aggregates from stored rows.
std::vector<MethodSummary> aggregate(const ScenarioSpec& spec, const std::vector<MethodConfig>& methods,
                                     const std::vector<ReplicationRow>& rows);

void write_rows_csv(std::ostream& os, const SimulationReport& report);
void print_table(std::ostream& os, const SimulationReport& report);

}  // namespace mixclust
