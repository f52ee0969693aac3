#include "mixclust/simulation.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mixclust/errors.hpp"
#include "mixclust/parallel.hpp"

namespace mixclust {

const char* to_string(Contamination c) {
    switch (c) {
        case Contamination::None: return "none";
        case Contamination::UniformChiSq: return "uniform_chisq";
        case Contamination::Annulus: return "annulus";
        case Contamination::OutlyingCluster: return "outlying_cluster";
    }
    return "none";
}

Contamination contamination_from_string(const std::string& s) {
    for (auto c : {Contamination::None, Contamination::UniformChiSq, Contamination::Annulus,
                   Contamination::OutlyingCluster})
        if (s == to_string(c)) return c;
    throw InputError("unknown contamination scheme '" + s + "'");
}

ScenarioSpec ScenarioSpec::resolved() const {
    ScenarioSpec s = *this;
    if (s.means.empty()) {
        if (s.k != 3) throw InputError("default means are defined for k = 3 only");
        s.means = {Vector::Zero(s.p), Vector::Constant(s.p, 5.0), Vector::Constant(s.p, -5.0)};
    }
    if (s.weights.empty()) {
        if (s.contamination == Contamination::None) {
            if (s.k == 3) {
                s.weights = {0.33, 0.33, 0.34};
            } else {
                s.weights.assign(static_cast<std::size_t>(s.k), 1.0 / s.k);
            }
        } else {
            s.weights.assign(static_cast<std::size_t>(s.k), (1.0 - s.contamination_level) / s.k);
        }
    }
    s.validate();
    return s;
}

void ScenarioSpec::validate() const {
    if (p < 1) throw InputError("p must be at least 1");
    if (k < 1) throw InputError("k must be at least 1");
    if (n < k) throw InputError("n must be at least k");
    if (!(cov_scale > 0.0)) throw InputError("cov_scale must be positive");
    if (replications < 1) throw InputError("replications must be at least 1");
    if (static_cast<int>(means.size()) != k) throw InputError("need exactly k means");
    for (const auto& m : means)
        if (m.size() != p) throw InputError("every mean must have p coordinates");
    if (static_cast<int>(weights.size()) != k) throw InputError("need exactly k weights");
    for (double w : weights)
        if (!(w >= 0.0)) throw InputError("weights must be non-negative");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (contamination == Contamination::None) {
        if (contamination_level != 0.0) throw InputError("pure scenarios need contamination_level 0");
        if (std::abs(total - 1.0) > 1e-9) throw InputError("weights must sum to 1 for pure data");
    } else {
        if (!(contamination_level > 0.0 && contamination_level < 1.0))
            throw InputError("contamination_level must lie in (0,1)");
        if (std::abs(total - (1.0 - contamination_level)) > 1e-9)
            throw InputError("weights must sum to 1 - contamination_level");
    }
}

int ScenarioSpec::outlier_count() const {
    return static_cast<int>(std::lround(contamination_level * n));
}

int LabeledSample::regular_count() const {
    return static_cast<int>(std::count(outlier.begin(), outlier.end(), false));
}

double default_threshold(int p) {
    static const std::map<int, double> table{{2, 1e-3}, {4, 1e-5}, {6, 1e-8}, {8, 1e-18}, {10, 1e-24}};
    const auto it = table.find(p);
    if (it == table.end())
        throw InputError("no default outlier threshold for p = " + std::to_string(p) +
                         "; pass one explicitly");
    return it->second;
}

double chisq_quantile(int p, double prob) {
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(p), prob);
}

namespace {

LabeledSample append(const LabeledSample& s, const Observations& extra) {
    LabeledSample out;
    out.data.resize(s.data.rows() + extra.rows(), s.data.cols());
    out.data << s.data, extra;
    out.labels = s.labels;
    out.outlier = s.outlier;
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(extra.rows()), -1);
    out.outlier.insert(out.outlier.end(), static_cast<std::size_t>(extra.rows()), true);
    return out;
}

Vector std_normal(int p, Rng& rng) {
    std::normal_distribution<double> z;
    Vector v(p);
    for (int i = 0; i < p; ++i) v(i) = z(rng);
    return v;
}

}  // namespace

LabeledSample gen_pure(const ScenarioSpec& spec_in, Rng& rng) {
    const ScenarioSpec spec = spec_in.resolved();
    const int n_reg = spec.n - spec.outlier_count();
    std::discrete_distribution<int> pick(spec.weights.begin(), spec.weights.end());
    const double sd = std::sqrt(spec.cov_scale);
    LabeledSample s;
    s.data.resize(n_reg, spec.p);
    s.labels.resize(static_cast<std::size_t>(n_reg));
    s.outlier.assign(static_cast<std::size_t>(n_reg), false);
    for (int i = 0; i < n_reg; ++i) {
        const int j = pick(rng);
        s.labels[i] = j;
        s.data.row(i) = (spec.means[j] + sd * std_normal(spec.p, rng)).transpose();
    }
    return s;
}

LabeledSample contaminate_uniform_chisq(const LabeledSample& sample, const ScenarioSpec& spec_in,
                                        Rng& rng) {
    const ScenarioSpec spec = spec_in.resolved();
    const int m = spec.outlier_count();
    const double cut = chisq_quantile(spec.p, 0.975);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    Observations extra(m, spec.p);
    long attempts = 0;
    int got = 0;
    Vector x(spec.p);
    while (got < m) {
        ++attempts;
        for (int i = 0; i < spec.p; ++i) x(i) = u(rng);
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& mu : spec.means) dmin = std::min(dmin, (x - mu).squaredNorm() / spec.cov_scale);
        if (dmin > cut) extra.row(got++) = x.transpose();
        if (attempts >= 100000 && static_cast<double>(got) / attempts < 1e-4)
            throw ComputationError("uniform contamination acceptance rate below 1e-4; the cuboid is "
                                   "covered by the clusters");
    }
    return append(sample, extra);
}

LabeledSample contaminate_annulus(const LabeledSample& sample, const ScenarioSpec& spec_in, Rng& rng) {
    const ScenarioSpec spec = spec_in.resolved();
    const int m = spec.outlier_count();
    const double p = spec.p;
    const double lo = std::pow(15.0, p), hi = std::pow(20.0, p);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Observations extra(m, spec.p);
    for (int i = 0; i < m; ++i) {
        Vector dir = std_normal(spec.p, rng);
        while (dir.norm() == 0.0) dir = std_normal(spec.p, rng);
        const double r = std::pow(lo + u(rng) * (hi - lo), 1.0 / p);
        extra.row(i) = (r / dir.norm() * dir).transpose();
    }
    return append(sample, extra);
}

LabeledSample contaminate_outlying_cluster(const LabeledSample& sample, const ScenarioSpec& spec_in,
                                           Rng& rng) {
    const ScenarioSpec spec = spec_in.resolved();
    const int m = spec.outlier_count();
    Observations extra(m, spec.p);
    for (int i = 0; i < m; ++i) extra.row(i) = (20.0 + std_normal(spec.p, rng).array()).matrix().transpose();
    return append(sample, extra);
}

LabeledSample generate(const ScenarioSpec& spec, Rng& rng) {
    LabeledSample s = gen_pure(spec, rng);
    switch (spec.contamination) {
        case Contamination::None: return s;
        case Contamination::UniformChiSq: return contaminate_uniform_chisq(s, spec, rng);
        case Contamination::Annulus: return contaminate_annulus(s, spec, rng);
        case Contamination::OutlyingCluster: return contaminate_outlying_cluster(s, spec, rng);
    }
    return s;
}

namespace {

std::vector<std::vector<int>> permutations(int k) {
    if (k > 8) throw InputError("label matching is exhaustive and limited to k <= 8");
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> all;
    do all.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    return all;
}

}  // namespace

double regular_misclassification(const std::vector<int>& predicted, const std::vector<bool>& flagged,
                                 const LabeledSample& truth, int k, bool count_flagged) {
    const std::size_t n = truth.labels.size();
    if (predicted.size() != n || flagged.size() != n)
        throw DimensionMismatch("prediction and truth lengths differ");
    // confusion[pred][true] over regular points that are scored
    std::vector<std::vector<long>> conf(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
    long scored = 0, flagged_regular = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (truth.outlier[i]) continue;
        if (flagged[i]) {
            if (count_flagged) {
                ++scored;
                ++flagged_regular;
            }
            continue;
        }
        if (predicted[i] < 0 || predicted[i] >= k || truth.labels[i] < 0 || truth.labels[i] >= k)
            throw InputError("label out of range in misclassification");
        ++conf[predicted[i]][truth.labels[i]];
        ++scored;
    }
    if (scored == 0) return 0.0;
    long best_correct = 0;
    for (const auto& perm : permutations(k)) {
        long correct = 0;
        for (int j = 0; j < k; ++j) correct += conf[j][perm[j]];
        best_correct = std::max(best_correct, correct);
    }
    return static_cast<double>(scored - best_correct) / static_cast<double>(scored);
}

std::optional<double> undetected_outlier_proportion(const std::vector<bool>& flagged,
                                                    const LabeledSample& truth) {
    if (flagged.size() != truth.outlier.size()) throw DimensionMismatch("flag and truth lengths differ");
    long total = 0, missed = 0;
    for (std::size_t i = 0; i < flagged.size(); ++i) {
        if (!truth.outlier[i]) continue;
        ++total;
        if (!flagged[i]) ++missed;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(missed) / static_cast<double>(total);
}

std::vector<int> match_means(const std::vector<Vector>& estimated, const std::vector<Vector>& truth) {
    const int k = static_cast<int>(truth.size());
    if (static_cast<int>(estimated.size()) != k) throw DimensionMismatch("mean counts differ");
    std::vector<int> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const auto& perm : permutations(k)) {
        double cost = 0.0;
        for (int j = 0; j < k; ++j) cost += (estimated[perm[j]] - truth[j]).squaredNorm();
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    }
    return best;
}

BiasMse bias_mse(const std::vector<std::vector<Vector>>& estimates, const std::vector<Vector>& truth) {
    const std::size_t k = truth.size();
    BiasMse r;
    r.bias.assign(k, 0.0);
    r.mse.assign(k, 0.0);
    if (estimates.empty() || k == 0) return r;
    const double reps = static_cast<double>(estimates.size());
    for (std::size_t j = 0; j < k; ++j) {
        Vector mean_err = Vector::Zero(truth[j].size());
        double sq = 0.0;
        for (const auto& rep : estimates) {
            const Vector e = rep[j] - truth[j];
            mean_err += e;
            sq += e.squaredNorm();
        }
        r.bias[j] = (mean_err / reps).norm();
        r.mse[j] = sq / reps;
    }
    r.mean_bias = std::accumulate(r.bias.begin(), r.bias.end(), 0.0) / static_cast<double>(k);
    r.mean_mse = std::accumulate(r.mse.begin(), r.mse.end(), 0.0) / static_cast<double>(k);
    return r;
}

std::vector<MethodSummary> aggregate(const ScenarioSpec& spec_in, const std::vector<MethodConfig>& methods,
                                     const std::vector<ReplicationRow>& rows) {
    const ScenarioSpec spec = spec_in.resolved();
    std::vector<MethodSummary> out;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        MethodSummary s;
        s.name = methods[m].name;
        s.beta = methods[m].algo.beta;
        s.threshold = methods[m].algo.threshold;
        double undetected = 0.0;
        int undetected_n = 0;
        std::vector<std::vector<Vector>> est;
        for (const auto& r : rows) {
            if (r.method != static_cast<int>(m)) continue;
            if (!r.ok) {
                ++s.failed;
                continue;
            }
            ++s.succeeded;
            s.misclassification += r.misclassification;
            s.detected += r.detected;
            if (r.undetected) {
                undetected += *r.undetected;
                ++undetected_n;
            }
            est.push_back(r.matched_means);
        }
        if (s.succeeded > 0) {
            s.misclassification /= s.succeeded;
            s.detected /= s.succeeded;
        }
        if (undetected_n > 0) s.undetected = undetected / undetected_n;
        s.bias = bias_mse(est, spec.means);
        out.push_back(std::move(s));
    }
    return out;
}

SimulationReport run_experiment(const ScenarioSpec& spec_in, const std::vector<MethodConfig>& methods,
                                int threads) {
    const ScenarioSpec spec = spec_in.resolved();
    if (methods.empty()) throw InputError("at least one method is required");
    for (const auto& m : methods) m.algo.validate();
    const int reps = spec.replications;
    const int nm = static_cast<int>(methods.size());

    SimulationReport report;
    report.spec = spec;
    report.methods = methods;
    report.rows.resize(static_cast<std::size_t>(reps * nm));

    parallel_for(reps, threads, [&](int r) {
        Rng rng = restart_rng(spec.seed, static_cast<std::uint64_t>(r));
        const LabeledSample sample = generate(spec, rng);
        const std::uint64_t fit_seed = rng();
        for (int m = 0; m < nm; ++m) {
            ReplicationRow& row = report.rows[static_cast<std::size_t>(r * nm + m)];
            row.replication = r;
            row.method = m;
            AlgoConfig algo = methods[m].algo;
            algo.seed = fit_seed;
            algo.threads = 1;
            try {
                const ClusteringResult res = fit(sample.data, spec.k, algo);
                row.misclassification = regular_misclassification(
                    res.assignments, res.outlier_flags, sample, spec.k, methods[m].count_flagged_as_error);
                row.undetected = undetected_outlier_proportion(res.outlier_flags, sample);
                row.detected = static_cast<int>(std::count(res.outlier_flags.begin(), res.outlier_flags.end(), true));
                row.objective = res.objective;
                std::vector<Vector> est;
                for (const auto& c : res.params.components) est.push_back(c.mean);
                if (static_cast<int>(est.size()) == spec.k) {
                    const auto perm = match_means(est, spec.means);
                    for (int j = 0; j < spec.k; ++j) row.matched_means.push_back(est[perm[j]]);
                }
                row.ok = true;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    });
    report.summary = aggregate(spec, methods, report.rows);
    return report;
}

void write_rows_csv(std::ostream& os, const SimulationReport& report) {
    const int k = report.spec.k, p = report.spec.p;
    os << "replication,method,beta,threshold,status,misclassification,undetected_proportion,"
          "detected_outliers,objective";
    for (int j = 0; j < k; ++j)
        for (int d = 0; d < p; ++d) os << ",mu" << j + 1 << '_' << d + 1;
    os << ",error\n";
    os << std::setprecision(17);
    for (const auto& r : report.rows) {
        const auto& m = report.methods[r.method];
        os << r.replication + 1 << ',' << m.name << ',' << m.algo.beta << ',' << m.algo.threshold << ','
           << (r.ok ? "ok" : "failed") << ',';
        if (r.ok) {
            os << r.misclassification << ',';
            if (r.undetected) os << *r.undetected;
            os << ',' << r.detected << ',' << r.objective;
        } else {
            os << ",,,";
        }
        for (int j = 0; j < k; ++j)
            for (int d = 0; d < p; ++d) {
                os << ',';
                if (r.ok && static_cast<int>(r.matched_means.size()) == k) os << r.matched_means[j](d);
            }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << ',' << err << '\n';
    }
}

void print_table(std::ostream& os, const SimulationReport& report) {
    const auto& s = report.spec;
    const bool pure = s.contamination == Contamination::None;
    os << "scenario: n=" << s.n << " p=" << s.p << " k=" << s.k << " Sigma=" << s.cov_scale << "I"
       << " contamination=" << to_string(s.contamination) << " replications=" << s.replications << '\n';
    os << "misclassification rate, " << (pure ? "(average detected outliers)" : "(undetected outlier proportion)")
       << '\n';
    os << std::left << std::setw(6) << "p" << std::setw(10) << "Sigma";
    for (const auto& m : report.summary) {
        std::ostringstream h;
        h << "beta=" << m.beta;
        os << std::setw(22) << h.str();
    }
    os << '\n' << std::setw(6) << s.p;
    std::ostringstream sig;
    sig << s.cov_scale << "I";
    os << std::setw(10) << sig.str();
    for (const auto& m : report.summary) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(4) << m.misclassification << " (";
        if (pure) {
            cell << std::setprecision(2) << m.detected;
        } else if (m.undetected) {
            cell << std::setprecision(3) << *m.undetected;
        } else {
            cell << "-";
        }
        cell << ')';
        if (m.failed > 0) cell << '*';
        os << std::setw(22) << cell.str();
    }
    os << std::right << '\n';
    for (const auto& m : report.summary)
        if (m.failed > 0) os << "* " << m.name << ": " << m.failed << " replication(s) failed\n";
}

}  // namespace mixclust
