#include <doctest.h>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "mixclust/constraints.hpp"
#include "mixclust/errors.hpp"
#include "mixclust/mdpde.hpp"
#include "mixclust/mple.hpp"

using namespace mixclust;

namespace {

// blobs of size m around each centre, unit spherical noise
Observations blobs(const std::vector<Vector>& centres, int m, std::uint64_t seed, std::vector<int>* truth = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    const long p = centres[0].size();
    Observations x(static_cast<long>(centres.size()) * m, p);
    for (std::size_t j = 0; j < centres.size(); ++j)
        for (int i = 0; i < m; ++i) {
            const long r = static_cast<long>(j) * m + i;
            for (long d = 0; d < p; ++d) x(r, d) = centres[j](d) + z(rng);
            if (truth) truth->push_back(static_cast<int>(j));
        }
    return x;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<long>(v.size()));
    long i = 0;
    for (double d : v) out(i++) = d;
    return out;
}

MixtureParams two_1d(double w1, double m1, double v1, double m2, double v2) {
    MixtureParams p;
    p.weights = vec({w1, 1 - w1});
    p.components = {GaussianComponent(vec({m1}), CovMatrix(Matrix::Constant(1, 1, v1))),
                    GaussianComponent(vec({m2}), CovMatrix(Matrix::Constant(1, 1, v2)))};
    return p;
}

std::set<std::set<int>> partition(const std::vector<int>& labels) {
    std::map<int, std::set<int>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].insert(static_cast<int>(i));
    std::set<std::set<int>> out;
    for (auto& [k, g] : groups) out.insert(g);
    return out;
}

// textbook classification EM with Gaussian MLE updates
struct Cem {
    std::vector<int> labels;
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    Vector weights;
    std::vector<double> loglik;
};

Cem reference_cem(const Observations& x, std::vector<int> labels, int k) {
    const long n = x.rows(), p = x.cols();
    Cem out;
    for (int it = 0; it < 200; ++it) {
        out.means.assign(k, Vector::Zero(p));
        out.covs.assign(k, Matrix::Zero(p, p));
        out.weights = Vector::Zero(k);
        for (long i = 0; i < n; ++i) out.means[labels[i]] += x.row(i).transpose(), out.weights(labels[i]) += 1;
        for (int j = 0; j < k; ++j) out.means[j] /= out.weights(j);
        for (long i = 0; i < n; ++i) {
            const Vector d = x.row(i).transpose() - out.means[labels[i]];
            out.covs[labels[i]] += d * d.transpose();
        }
        for (int j = 0; j < k; ++j) out.covs[j] /= out.weights(j);
        out.weights /= static_cast<double>(n);

        std::vector<int> next(n);
        double ll = 0;
        for (long i = 0; i < n; ++i) {
            double best = -INFINITY;
            for (int j = 0; j < k; ++j) {
                const Vector d = x.row(i).transpose() - out.means[j];
                const double lp = std::log(out.weights(j)) - 0.5 * p * std::log(2 * M_PI) -
                                  0.5 * std::log(out.covs[j].determinant()) -
                                  0.5 * d.dot(out.covs[j].inverse() * d);
                if (j == labels[i]) ll += lp;
                if (lp > best) best = lp, next[i] = j;
            }
        }
        out.loglik.push_back(ll / static_cast<double>(n));
        if (next == labels) break;
        labels = next;
    }
    out.labels = labels;
    return out;
}

}  // namespace

TEST_CASE("pseudo beta-likelihood") {
    std::vector<int> truth;
    const Observations x = blobs({vec({0, 0})}, 40, 1, &truth);
    MixtureParams one;
    one.weights = vec({1.0});
    one.components = {GaussianComponent(vec({0.1, -0.2}), CovMatrix::identity(2))};
    for (double b : {0.0, 0.2, 0.7})
        CHECK(pseudo_beta_likelihood(x, one, truth, b) ==
              doctest::Approx(component_beta_objective(x, one.components[0], b)).epsilon(1e-13));

    // pushing one point further out lowers the objective
    Observations y = x;
    double prev = INFINITY;
    for (double far : {3.0, 4.0, 6.0, 9.0}) {
        y(0, 0) = far;
        const double v = pseudo_beta_likelihood(y, one, truth, 0.3);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("initialisation") {
    const Observations x = blobs({vec({0, 0}), vec({5, 5})}, 10, 2);
    Rng a = restart_rng(9, 0), b = restart_rng(9, 0);
    const auto ia = initialize(x, 3, a), ib = initialize(x, 3, b);
    CHECK(ia.assignments == ib.assignments);
    for (int j = 0; j < 3; ++j) {
        CHECK(ia.params.components[j].mean == ib.params.components[j].mean);
        CHECK(ia.params.components[j].cov.matrix().isIdentity());
        CHECK(ia.params.weights(j) == doctest::Approx(1.0 / 3));
    }

    Rng r = restart_rng(1, 1);
    const auto all = initialize(x, 20, r);
    std::set<std::vector<double>> centres;
    for (const auto& c : all.params.components) centres.insert({c.mean(0), c.mean(1)});
    CHECK(centres.size() == 20);
    for (long i = 0; i < x.rows(); ++i) CHECK((all.params.components[all.assignments[i]].mean - x.row(i).transpose()).norm() == 0.0);

    for (int t = 0; t < 10000; ++t) {
        Rng g = restart_rng(static_cast<std::uint64_t>(t), 3);
        auto idx = sample_distinct(50, 7, g);
        std::sort(idx.begin(), idx.end());
        REQUIRE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
        REQUIRE(idx.front() >= 0);
        REQUIRE(idx.back() < 50);
    }
    Rng g = restart_rng(1, 0);
    CHECK_THROWS_AS(initialize(x, 21, g), InsufficientData);
}

TEST_CASE("assignment rule") {
    const auto p = two_1d(0.5, 0, 1, 5, 1);
    Observations x(2, 1);
    x << 1.0, 2.5;
    const auto a = assign(x, p);
    CHECK(a.labels[0] == 0);
    CHECK(a.labels[1] == 0);  // exact tie goes to the first cluster
    CHECK(a.discriminants(0) == doctest::Approx(0.5 * std::exp(-0.5) / std::sqrt(2 * M_PI)).epsilon(1e-14));

    // unequal weights: boundary from the quadratic a1 x^2 + a2 x + a3 = 0
    for (auto [w, v2] : std::vector<std::pair<double, double>>{{0.9, 1.0}, {0.9, 4.0}, {0.3, 2.0}}) {
        const double v1 = 1.0, m1 = 0.0, m2 = 5.0;
        const double a1 = 0.5 / v2 - 0.5 / v1, a2 = m1 / v1 - m2 / v2;
        const double a3 = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 + std::log(w / (1 - w)) + 0.5 * std::log(v2 / v1);
        double xb;
        if (std::abs(a1) < 1e-15) xb = -a3 / a2;
        else {
            const double disc = std::sqrt(a2 * a2 - 4 * a1 * a3);
            const double r1 = (-a2 - disc) / (2 * a1), r2 = (-a2 + disc) / (2 * a1);
            xb = (r1 > m1 && r1 < m2) ? r1 : r2;  // the crossing between the means
        }
        Observations pts(2, 1);
        pts << xb - 1e-7, xb + 1e-7;
        const auto lab = assign(pts, two_1d(w, m1, v1, m2, v2)).labels;
        CHECK(lab[0] == 0);
        CHECK(lab[1] == 1);
        if (w == 0.9 && v2 == 1.0) CHECK(xb > 2.5);
    }

    // no single relabelling raises a point's discriminant
    std::vector<int> truth;
    const Observations y = blobs({vec({0, 0}), vec({3, 0}), vec({0, 3})}, 30, 3, &truth);
    MixtureParams q;
    q.weights = vec({0.2, 0.5, 0.3});
    q.components = {GaussianComponent(vec({0, 0}), CovMatrix::identity(2)),
                    GaussianComponent(vec({3, 0}), CovMatrix(2.0 * Matrix::Identity(2, 2))),
                    GaussianComponent(vec({0, 3}), CovMatrix(0.5 * Matrix::Identity(2, 2)))};
    const auto ay = assign(y, q);
    const Matrix ld = log_discriminants(y, q);
    for (long i = 0; i < y.rows(); ++i) {
        for (int j = 0; j < 3; ++j) CHECK(ld(i, ay.labels[i]) >= ld(i, j));
        CHECK(std::log(ay.discriminants(i)) == doctest::Approx(ld(i, ay.labels[i])).epsilon(1e-12));
    }

    // nearest-mean rule ignores weights and scales
    const auto near = assign(x, two_1d(0.01, 0, 1, 5, 100), AssignmentRule::NearestMean);
    CHECK(near.labels[0] == 0);
}

TEST_CASE("weight update") {
    std::vector<int> lab(100, 1);
    std::fill(lab.begin(), lab.begin() + 30, 0);
    const Vector w = update_weights(lab, 100, 2);
    CHECK(w(0) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(w(1) == doctest::Approx(0.7).epsilon(1e-15));
    const Vector one = update_weights(std::vector<int>(10, 0), 10, 3);
    CHECK(one(0) == 1.0);
    CHECK(one(1) == 0.0);

    std::mt19937_64 rng(4);
    std::gamma_distribution<double> gam(1.0);
    for (int t = 0; t < 1000; ++t) {
        const int k = 2 + t % 6, n = 1 + static_cast<int>(rng() % 500);
        std::vector<int> l(static_cast<std::size_t>(n));
        for (int& v : l) v = static_cast<int>(rng() % static_cast<unsigned>(k));
        const Vector pi = update_weights(l, n, k);
        CHECK(std::abs(pi.sum() - 1.0) <= 4 * std::numeric_limits<double>::epsilon());

        // no point of the simplex does better on sum n_j log pi_j
        if (t % 20 == 0) {
            Vector cnt = Vector::Zero(k);
            for (int v : l) cnt(v) += 1;
            auto score = [&](const Vector& q) {
                double s = 0;
                for (int j = 0; j < k; ++j)
                    if (cnt(j) > 0) s += cnt(j) * std::log(q(j));
                return s;
            };
            const double best = score(pi);
            for (int d = 0; d < 200; ++d) {
                Vector q(k);
                for (int j = 0; j < k; ++j) q(j) = gam(rng);
                q /= q.sum();
                CHECK(score(q) <= best + 1e-8);
            }
        }
    }
}

TEST_CASE("outlier detection") {
    const auto p = two_1d(0.5, 0, 1, 5, 1);
    Observations x(4, 1);
    x << 0.0, 5.0, 2.0, 40.0;
    const std::vector<int> lab{0, 1, 0, 1};
    const Vector d = discriminants_for(x, p, lab);
    const auto at = detect_outliers(x, p, lab, d(2));
    CHECK(at.flags[2]);  // D == T is flagged
    CHECK(at.types[2] == 0);
    CHECK(at.flags[3]);
    CHECK(at.types[3] == 1);
    CHECK_FALSE(at.flags[0]);
    CHECK(at.types[0] == -1);
    const auto none = detect_outliers(x, p, lab, 0.0);
    CHECK(std::none_of(none.flags.begin(), none.flags.end(), [](bool b) { return b; }));
}

TEST_CASE("fit: single cluster collapses to the component estimator") {
    const Observations x = blobs({vec({1, 2})}, 200, 5);
    AlgoConfig cfg;
    cfg.beta = 0.25;
    cfg.n_restarts = 2;
    const auto r = fit(x, 1, cfg);
    const auto f = fit_component(x, 0.25);
    CHECK(r.params.weights(0) == 1.0);
    CHECK((r.params.components[0].mean - f.estimate.mean).norm() < 1e-10);
    CHECK((r.params.components[0].cov.matrix() - f.estimate.cov.matrix()).norm() < 1e-10);
    CHECK(r.objective == doctest::Approx(component_beta_objective(x, f.estimate, 0.25)).epsilon(1e-10));
}

TEST_CASE("fit: separated blobs are recovered exactly") {
    for (double beta : {0.0, 0.3}) {
        std::vector<int> truth;
        const Observations x = blobs({vec({0}), vec({100})}, 100, 6, &truth);
        AlgoConfig cfg;
        cfg.beta = beta;
        const auto r = fit(x, 2, cfg);
        CHECK(partition(r.assignments) == partition(truth));
        CHECK(check_constraints(std::span<const CovMatrix>(r.params.covariances()), cfg.constraint).satisfied);
    }
}

TEST_CASE("fit: ascent, feasibility, determinism") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> loc(-4, 4);
    for (int run = 0; run < 50; ++run) {
        const Observations x = blobs({vec({loc(rng), loc(rng)}), vec({loc(rng), loc(rng)}), vec({loc(rng), loc(rng)})}, 40,
                                     100 + run);
        AlgoConfig cfg;
        cfg.beta = (run % 5) * 0.2;
        Rng g = restart_rng(static_cast<std::uint64_t>(run), 0);
        const auto init = initialize(x, 3, g);
        try {
            const auto r = fit_from(x, init, cfg);
            CHECK(r.objective >= pseudo_beta_likelihood(x, init.params, init.assignments, cfg.beta) - 1e-12);
            CHECK(check_constraints(std::span<const CovMatrix>(r.params.covariances()), cfg.constraint).satisfied);
        } catch (const DegenerateRestarts&) {
        }
    }

    const Observations x = blobs({vec({0, 0}), vec({4, 0}), vec({0, 4})}, 50, 8);
    AlgoConfig cfg;
    cfg.seed = 42;
    const auto a = fit(x, 3, cfg);
    cfg.threads = 4;
    const auto b = fit(x, 3, cfg);
    CHECK(a.assignments == b.assignments);
    CHECK(a.objective == b.objective);
    CHECK(a.restart_index == b.restart_index);
    for (int j = 0; j < 3; ++j) CHECK(a.params.components[j].cov.matrix() == b.params.components[j].cov.matrix());
}

TEST_CASE("fit: permuting the initial centres permutes labels only") {
    std::vector<int> truth;
    const Observations x = blobs({vec({0, 0}), vec({6, 0}), vec({0, 6})}, 50, 9, &truth);
    AlgoConfig cfg;
    cfg.beta = 0.2;
    const auto r1 = fit_from(x, initialize_from(x, {3, 60, 120}), cfg);
    const auto r2 = fit_from(x, initialize_from(x, {120, 3, 60}), cfg);
    CHECK(partition(r1.assignments) == partition(r2.assignments));
    CHECK(r1.assignments != r2.assignments);
    CHECK(r1.objective == doctest::Approx(r2.objective).epsilon(1e-12));
}

TEST_CASE("beta = 0 iteration is classification EM") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const Observations x = blobs({vec({0, 0}), vec({3, 1}), vec({1, 4})}, 60, seed);
        AlgoConfig cfg;
        cfg.beta = 0.0;
        cfg.constraint = {1e6, 1e-6};  // keep the constraints out of the way
        const auto init = initialize_from(x, {0, 70, 150});
        const auto r = fit_from(x, init, cfg);
        const Cem ref = reference_cem(x, init.assignments, 3);
        CHECK(r.assignments == ref.labels);
        for (int j = 0; j < 3; ++j) {
            CHECK((r.params.components[j].mean - ref.means[j]).norm() < 1e-8);
            CHECK((r.params.components[j].cov.matrix() - ref.covs[j]).norm() < 1e-8);
        }
        CHECK(r.objective == doctest::Approx(ref.loglik.back()).epsilon(1e-10));
        // classification log-likelihood never decreases along the trace
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
            CHECK(r.objective_trace[i] >= r.objective_trace[i - 1] - 1e-12);
    }
}

TEST_CASE("configuration validation") {
    const Observations x = blobs({vec({0, 0})}, 5, 10);
    AlgoConfig cfg;
    cfg.beta = 1.5;
    CHECK_THROWS_AS(fit(x, 2, cfg), InputError);
    cfg.beta = 0.1;
    cfg.threshold = 0.0;
    CHECK_THROWS_AS(fit(x, 2, cfg), InputError);
    cfg.threshold = 1e-3;
    CHECK_THROWS_AS(fit(x, 6, cfg), InsufficientData);
}
