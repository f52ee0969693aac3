#include "mixclust/mple.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "mixclust/errors.hpp"
#include "mixclust/parallel.hpp"

namespace mixclust {

std::vector<CovMatrix> MixtureParams::covariances() const {
    std::vector<CovMatrix> out;
    out.reserve(components.size());
    for (const auto& c : components) out.push_back(c.cov);
    return out;
}

void MixtureParams::validate() const {
    if (components.empty()) throw InputError("mixture needs at least one component");
    if (weights.size() != k()) throw DimensionMismatch("weights and components differ in count");
    if ((weights.array() < 0.0).any()) throw InputError("mixture weights must be non-negative");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw InputError("mixture weights must sum to 1");
    for (const auto& c : components)
        if (c.dim() != dim()) throw DimensionMismatch("components differ in dimension");
}

void AlgoConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("beta must lie in [0,1]");
    if (!(threshold > 0.0)) throw InputError("outlier threshold T must be positive");
    if (max_outer_iter < 1) throw InputError("max_outer_iter must be at least 1");
    if (n_restarts < 1) throw InputError("at least one restart is required");
    if (threads < 1) throw InputError("threads must be at least 1");
    constraint.validate();
    irls.validate();
}

Rng restart_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

Matrix log_discriminants(const Observations& data, const MixtureParams& params) {
    if (data.cols() != params.dim()) throw DimensionMismatch("data and mixture dimensions differ");
    Matrix out(data.rows(), params.k());
    for (int j = 0; j < params.k(); ++j)
        out.col(j) = (std::log(params.weights(j)) + log_density_rows(data, params.components[j]).array())
                         .matrix();
    return out;
}

namespace {

void check_labels(const std::vector<int>& labels, long n, int k) {
    if (static_cast<long>(labels.size()) != n)
        throw DimensionMismatch("assignment vector length differs from observation count");
    for (int z : labels)
        if (z < 0 || z >= k) throw InputError("assignment label out of range");
}

Observations rows_of(const Observations& data, const std::vector<int>& idx) {
    Observations out(static_cast<long>(idx.size()), data.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<long>(r)) = data.row(idx[r]);
    return out;
}

}  // namespace

double pseudo_beta_likelihood(const Observations& data, const MixtureParams& params,
                              const std::vector<int>& assignments, double beta) {
    const long n = data.rows();
    if (n == 0) throw InsufficientData("objective needs observations");
    check_labels(assignments, n, params.k());
    if (beta < 0.0) throw InputError("beta must be non-negative");

    std::vector<std::vector<int>> members(static_cast<std::size_t>(params.k()));
    for (long i = 0; i < n; ++i) members[assignments[i]].push_back(static_cast<int>(i));

    double total = 0.0;
    for (int j = 0; j < params.k(); ++j) {
        if (members[j].empty()) continue;
        const auto& comp = params.components[j];
        const Vector ld = log_density_rows(rows_of(data, members[j]), comp);
        const double nj = static_cast<double>(members[j].size());
        total += nj * std::log(params.weights(j));
        if (beta == 0.0) {
            total += ld.sum();
        } else {
            total += (beta * ld.array()).exp().sum() / beta -
                     nj * dpd_integral(comp.cov, beta) / (1.0 + beta);
        }
    }
    return total / static_cast<double>(n);
}

std::vector<int> sample_distinct(int n, int k, Rng& rng) {
    if (k > n) throw InsufficientData("cannot draw more centres than observations");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

Initialisation initialize_from(const Observations& data, const std::vector<int>& centre_rows) {
    const int k = static_cast<int>(centre_rows.size());
    if (k < 1) throw InputError("k must be at least 1");
    const int p = static_cast<int>(data.cols());
    MixtureParams params;
    params.weights = Vector::Constant(k, 1.0 / k);
    const CovMatrix eye = CovMatrix::identity(p);
    for (int r : centre_rows) params.components.emplace_back(data.row(r).transpose(), eye);
    Assignment a = assign(data, params);
    return {std::move(params), std::move(a.labels)};
}

Initialisation initialize(const Observations& data, int k, Rng& rng) {
    if (k < 1) throw InputError("k must be at least 1");
    if (data.rows() < k) throw InsufficientData("need at least k observations");
    return initialize_from(data, sample_distinct(static_cast<int>(data.rows()), k, rng));
}

Assignment assign(const Observations& data, const MixtureParams& params, AssignmentRule rule) {
    const long n = data.rows();
    const int k = params.k();
    const Matrix ld = log_discriminants(data, params);
    Assignment a;
    a.labels.assign(static_cast<std::size_t>(n), 0);
    a.discriminants.resize(n);
    if (rule == AssignmentRule::MaxDiscriminant) {
        for (long i = 0; i < n; ++i) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (ld(i, j) > ld(i, best)) best = j;
            a.labels[i] = best;
        }
    } else {
        Matrix dist(n, k);
        for (int j = 0; j < k; ++j)
            dist.col(j) = (data.rowwise() - params.components[j].mean.transpose()).rowwise().squaredNorm();
        for (long i = 0; i < n; ++i) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (dist(i, j) < dist(i, best)) best = j;
            a.labels[i] = best;
        }
    }
    for (long i = 0; i < n; ++i) a.discriminants(i) = std::exp(ld(i, a.labels[i]));
    return a;
}

Vector discriminants_for(const Observations& data, const MixtureParams& params,
                         const std::vector<int>& labels) {
    check_labels(labels, data.rows(), params.k());
    const Matrix ld = log_discriminants(data, params);
    Vector d(data.rows());
    for (long i = 0; i < data.rows(); ++i) d(i) = std::exp(ld(i, labels[i]));
    return d;
}

Vector update_weights(const std::vector<int>& assignments, int n, int k) {
    check_labels(assignments, n, k);
    Vector counts = Vector::Zero(k);
    for (int z : assignments) counts(z) += 1.0;
    return counts / static_cast<double>(n);
}

OutlierReport detect_outliers(const Observations& data, const MixtureParams& params,
                              const std::vector<int>& assignments, double threshold) {
    if (threshold < 0.0) throw InputError("threshold must be non-negative");
    const Vector d = discriminants_for(data, params, assignments);
    OutlierReport r;
    r.flags.assign(assignments.size(), false);
    r.types.assign(assignments.size(), -1);
    if (threshold == 0.0) return r;  // densities are strictly positive
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (d(static_cast<long>(i)) <= threshold) {
            r.flags[i] = true;
            r.types[i] = assignments[i];
        }
    }
    return r;
}

OutlierReport detect_outliers(const Observations& data, const ClusteringResult& result,
                              double threshold) {
    return detect_outliers(data, result.params, result.assignments, threshold);
}

namespace {

struct RestartState {
    const Observations& data;
    const AlgoConfig& cfg;
    IrlsConfig irls;
    MixtureParams params;
    std::vector<int> labels;
    std::vector<int> reseeds;
    std::vector<bool> flagged;

    // Moves the lowest-discriminant point (from a cluster that can spare one)
    // into each empty cluster.
    void reseed_empty() {
        const int k = params.k();
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int z : labels) ++counts[z];
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) continue;
            if (++reseeds[j] > 1)
                throw DegenerateRestarts("cluster " + std::to_string(j + 1) + " emptied twice");
            const Matrix ld = log_discriminants(data, params);
            long pick = -1;
            for (long i = 0; i < data.rows(); ++i) {
                if (counts[labels[i]] < 2) continue;
                if (pick < 0 || ld(i, labels[i]) < ld(pick, labels[pick])) pick = i;
            }
            if (pick < 0) throw DegenerateRestarts("no observation available to reseed a cluster");
            --counts[labels[pick]];
            labels[pick] = j;
            counts[j] = 1;
        }
    }

    void update(bool warm) {
        const int k = params.k();
        const long n = data.rows();
        params.weights = update_weights(labels, static_cast<int>(n), k);
        std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
        for (long i = 0; i < n; ++i) members[labels[i]].push_back(static_cast<int>(i));

        for (int j = 0; j < k; ++j) {
            const Observations sub = rows_of(data, members[j]);
            auto& comp = params.components[j];
            if (sub.rows() >= 2) {
                try {
                    const std::optional<GaussianComponent> start =
                        warm ? std::optional<GaussianComponent>(comp) : std::nullopt;
                    comp = fit_component(sub, cfg.beta, irls, start).estimate;
                    continue;
                } catch (const ComputationError&) {
                }
            }
            // too small or IRLS broke down: keep the covariance, move the centre
            if (sub.rows() >= 1) comp.mean = sub.colwise().mean().transpose();
            flagged[j] = true;
        }
        const auto covs = enforce_constraints(params.covariances(), cfg.constraint);
        for (int j = 0; j < k; ++j)
            params.components[j] = GaussianComponent(params.components[j].mean, covs[j]);
    }
};

}  // namespace

ClusteringResult fit_from(const Observations& data, const Initialisation& init,
                          const AlgoConfig& cfg) {
    cfg.validate();
    init.params.validate();
    const int k = init.params.k();
    check_labels(init.assignments, data.rows(), k);

    RestartState st{data, cfg, cfg.irls, init.params, init.assignments,
                    std::vector<int>(static_cast<std::size_t>(k), 0),
                    std::vector<bool>(static_cast<std::size_t>(k), false)};
    st.irls.eigen_floor = std::max(st.irls.eigen_floor, cfg.constraint.c1);

    ClusteringResult res;
    res.objective_trace.push_back(pseudo_beta_likelihood(data, st.params, st.labels, cfg.beta));
    bool converged = false;
    int iter = 0;
    for (iter = 1; iter <= cfg.max_outer_iter; ++iter) {
        st.reseed_empty();
        st.update(iter > 1);
        res.objective_trace.push_back(pseudo_beta_likelihood(data, st.params, st.labels, cfg.beta));
        Assignment next = assign(data, st.params, cfg.rule);
        if (next.labels == st.labels) {
            converged = true;
            break;
        }
        st.labels = std::move(next.labels);
    }
    if (!converged) {
        // final parameter pass on the last configuration
        iter = cfg.max_outer_iter;
        st.reseed_empty();
        st.update(true);
    }

    res.params = std::move(st.params);
    res.assignments = std::move(st.labels);
    res.iterations = iter;
    res.converged = converged;
    res.objective = pseudo_beta_likelihood(data, res.params, res.assignments, cfg.beta);
    res.discriminants = discriminants_for(data, res.params, res.assignments);
    OutlierReport out = detect_outliers(data, res.params, res.assignments, cfg.threshold);
    res.outlier_flags = std::move(out.flags);
    res.outlier_types = std::move(out.types);
    for (int j = 0; j < k; ++j)
        if (st.flagged[j]) res.flagged_components.push_back(j);
    return res;
}

ClusteringResult fit(const Observations& data, int k, const AlgoConfig& cfg) {
    cfg.validate();
    if (k < 1) throw InputError("k must be at least 1");
    if (data.rows() < k) throw InsufficientData("need at least k observations");
    if (!data.allFinite()) throw InputError("data contains non-finite values");

    std::vector<std::optional<ClusteringResult>> runs(static_cast<std::size_t>(cfg.n_restarts));
    parallel_for(cfg.n_restarts, cfg.threads, [&](int r) {
        Rng rng = restart_rng(cfg.seed, static_cast<std::uint64_t>(r));
        const Initialisation init = initialize(data, k, rng);
        try {
            ClusteringResult res = fit_from(data, init, cfg);
            res.restart_index = r;
            runs[r] = std::move(res);
        } catch (const DegenerateRestarts&) {
        }
    });

    std::optional<ClusteringResult> best;
    int degenerate = 0;
    for (auto& r : runs) {
        if (!r) {
            ++degenerate;
            continue;
        }
        if (!best || r->objective > best->objective) best = std::move(r);
    }
    if (!best) throw DegenerateRestarts("all " + std::to_string(cfg.n_restarts) + " restarts degenerated");
    best->degenerate_restarts = degenerate;
    return std::move(*best);
}

}  // namespace mixclust
