#include "mixclust/influence.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "mixclust/errors.hpp"
#include "mixclust/parallel.hpp"

namespace mixclust {

namespace {

constexpr double kTwoPi = boost::math::constants::two_pi<double>();

double normal_pdf(double x, double mu, double s) {
    const double z = x - mu;
    return std::exp(-0.5 * z * z / s) / std::sqrt(kTwoPi * s);
}

double normal_cdf(double x, double mu, double s) {
    return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * s));
}

// f^beta for a normal with variance s
double fpow(double x, double mu, double s, double beta) {
    const double z = x - mu;
    return std::pow(kTwoPi * s, -0.5 * beta) * std::exp(-0.5 * beta * z * z / s);
}

double c0_of(double beta) {
    return beta / (2.0 * std::pow(kTwoPi, 0.5 * beta) * std::pow(1.0 + beta, 1.5));
}

// Integrals of g(x) p(x) over pieces of the model's effective support.
class Integrator {
public:
    Integrator(const NormalMixture1D& dist, const InfluenceConfig& cfg) : dist_(dist), cfg_(cfg) {
        lo_ = dist.pooled_mean() - cfg.tail_sds * dist.pooled_sd();
        hi_ = dist.pooled_mean() + cfg.tail_sds * dist.pooled_sd();
        for (int j = 0; j < 2; ++j)
            for (double k : {-6.0, -3.0, 0.0, 3.0, 6.0})
                marks_.push_back(dist.means[j] + k * std::sqrt(dist.variances[j]));
        std::sort(marks_.begin(), marks_.end());
    }

    template <class G>
    double over(double x0, double x1, G&& g) const {
        x0 = std::max(x0, lo_);
        x1 = std::min(x1, hi_);
        if (!(x1 > x0)) return 0.0;
        std::vector<double> cuts{x0};
        for (double m : marks_)
            if (m > x0 && m < x1) cuts.push_back(m);
        cuts.push_back(x1);
        auto integrand = [&](double x) { return g(x) * dist_.pdf(x); };
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            double err = 0.0;
            total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                integrand, cuts[i], cuts[i + 1], 12, 1e-11, &err);
            if (!(err <= cfg_.quad_tol) || !std::isfinite(total))
                throw QuadratureFailure("quadrature error estimate " + std::to_string(err) +
                                        " exceeds tolerance");
        }
        return total;
    }

    template <class G>
    double inside(double a, double b, G&& g) const {
        return over(a, b, g);
    }

    template <class G>
    double outside(double a, double b, G&& g) const {
        return over(lo_, a, g) + over(b, hi_, g);
    }

private:
    const NormalMixture1D& dist_;
    InfluenceConfig cfg_;
    double lo_ = 0, hi_ = 0;
    std::vector<double> marks_;
};

// 2 log D1 - 2 log D2 up to a shared constant
double boundary_gap(double x, double pi1, double mu1, double s1, double pi2, double mu2, double s2) {
    const double z1 = x - mu1, z2 = x - mu2;
    return 2.0 * std::log(pi1) - std::log(s1) - z1 * z1 / s1 -
           (2.0 * std::log(pi2) - std::log(s2) - z2 * z2 / s2);
}

Vec8 equations(const Integrator& in, const NormalMixture1D& dist, double beta, const Vec8& u,
               const std::optional<PointMass>& mass) {
    const double pi1 = u(0), pi2 = u(1), a = u(2), b = u(3), mu1 = u(4), mu2 = u(5), s1 = u(6),
                 s2 = u(7);
    const double eps = mass ? mass->eps : 0.0;
    const double y = mass ? mass->y : 0.0;
    const double w = 1.0 - eps;
    const bool y_in = mass && y > a && y < b;
    const bool y_out = mass && !y_in;
    const double m_in = w * (dist.cdf(b) - dist.cdf(a)) + (y_in ? eps : 0.0);
    const double m_out = 1.0 - m_in;
    const double c0 = c0_of(beta);

    auto g_mean1 = [&](double x) { return fpow(x, mu1, s1, beta) * (x - mu1); };
    auto g_mean2 = [&](double x) { return fpow(x, mu2, s2, beta) * (x - mu2); };
    auto g_var1 = [&](double x) { return fpow(x, mu1, s1, beta) * ((x - mu1) * (x - mu1) / s1 - 1.0); };
    auto g_var2 = [&](double x) { return fpow(x, mu2, s2, beta) * ((x - mu2) * (x - mu2) / s2 - 1.0); };

    Vec8 g;
    g(0) = pi1 - m_in;
    g(1) = pi1 + pi2 - 1.0;
    g(2) = boundary_gap(a, pi1, mu1, s1, pi2, mu2, s2);
    g(3) = boundary_gap(b, pi1, mu1, s1, pi2, mu2, s2);
    g(4) = w * in.inside(a, b, g_mean1) + (y_in ? eps * g_mean1(y) : 0.0);
    g(5) = w * in.outside(a, b, g_mean2) + (y_out ? eps * g_mean2(y) : 0.0);
    g(6) = w * in.inside(a, b, g_var1) + (y_in ? eps * g_var1(y) : 0.0) +
           2.0 * c0 * std::pow(s1, -0.5 * beta) * m_in;
    g(7) = w * in.outside(a, b, g_var2) + (y_out ? eps * g_var2(y) : 0.0) +
           2.0 * c0 * std::pow(s2, -0.5 * beta) * m_out;
    return g;
}

void check_beta(double beta) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw InputError("influence functions need beta in (0,1]; at beta = 0 they are unbounded");
}

}  // namespace

double NormalMixture1D::pdf(double x) const {
    return weights[0] * normal_pdf(x, means[0], variances[0]) +
           weights[1] * normal_pdf(x, means[1], variances[1]);
}

double NormalMixture1D::cdf(double x) const {
    return weights[0] * normal_cdf(x, means[0], variances[0]) +
           weights[1] * normal_cdf(x, means[1], variances[1]);
}

double NormalMixture1D::pooled_mean() const {
    return weights[0] * means[0] + weights[1] * means[1];
}

double NormalMixture1D::pooled_sd() const {
    const double m = pooled_mean();
    double v = 0.0;
    for (int j = 0; j < 2; ++j) v += weights[j] * (variances[j] + (means[j] - m) * (means[j] - m));
    return std::sqrt(v);
}

void NormalMixture1D::validate() const {
    for (int j = 0; j < 2; ++j) {
        if (!(weights[j] > 0.0)) throw InputError("mixture weights must be positive");
        if (!(variances[j] > 0.0)) throw InputError("mixture variances must be positive");
        if (!std::isfinite(means[j])) throw InputError("mixture means must be finite");
    }
    if (std::abs(weights[0] + weights[1] - 1.0) > 1e-12)
        throw InputError("mixture weights must sum to 1");
}

Vec8 FunctionalSolution::vector() const {
    Vec8 u;
    u << pi1, pi2, a, b, mu1, mu2, s1, s2;
    return u;
}

FunctionalSolution FunctionalSolution::from_vector(const Vec8& u) {
    FunctionalSolution s;
    s.pi1 = u(0);
    s.pi2 = u(1);
    s.a = u(2);
    s.b = u(3);
    s.mu1 = u(4);
    s.mu2 = u(5);
    s.s1 = u(6);
    s.s2 = u(7);
    return s;
}

Vec8 functional_equations(const NormalMixture1D& dist, double beta, const Vec8& u,
                          const InfluenceConfig& cfg, const std::optional<PointMass>& mass) {
    dist.validate();
    return equations(Integrator(dist, cfg), dist, beta, u, mass);
}

std::pair<double, double> interval_boundary(double pi1, double mu1, double s1, double pi2,
                                            double mu2, double s2) {
    // boundary_gap(x) = qa x^2 + qb x + qc
    const double qa = 1.0 / s2 - 1.0 / s1;
    const double qb = 2.0 * mu1 / s1 - 2.0 * mu2 / s2;
    const double qc = mu2 * mu2 / s2 - mu1 * mu1 / s1 + 2.0 * std::log(pi1 / pi2) + std::log(s2 / s1);
    if (!(qa < 0.0))
        throw GeometryNotSupported(
            "cluster 1 is not a bounded interval (needs a strictly smaller variance than cluster 2)");
    const double disc = qb * qb - 4.0 * qa * qc;
    if (!(disc > 0.0)) throw GeometryNotSupported("cluster 1 is empty: discriminants never cross");
    const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
    double r1 = q / qa, r2 = qc / q;
    if (r1 > r2) std::swap(r1, r2);
    return {r1, r2};
}

FunctionalSolution solve_functional(const NormalMixture1D& dist, double beta,
                                    const InfluenceConfig& cfg,
                                    const std::optional<PointMass>& mass,
                                    const std::optional<FunctionalSolution>& start) {
    dist.validate();
    check_beta(beta);
    cfg.constraint.validate();
    if (mass && !(mass->eps >= 0.0 && mass->eps < 1.0))
        throw InputError("contamination proportion must lie in [0,1)");
    const Integrator in(dist, cfg);

    using Vec6 = Eigen::Matrix<double, 6, 1>;
    using Mat6 = Eigen::Matrix<double, 6, 6>;

    Vec6 z;  // mu1, mu2, s1, s2, a, b
    if (start) {
        z << start->mu1, start->mu2, start->s1, start->s2, start->a, start->b;
    } else {
        const auto [a0, b0] = interval_boundary(dist.weights[0], dist.means[0], dist.variances[0],
                                                dist.weights[1], dist.means[1], dist.variances[1]);
        z << dist.means[0], dist.means[1], dist.variances[0], dist.variances[1], a0, b0;
    }

    const double eps = mass ? mass->eps : 0.0;
    auto full = [&](const Vec6& v) {
        const bool y_in = mass && mass->y > v(4) && mass->y < v(5);
        const double pi1 = (1.0 - eps) * (dist.cdf(v(5)) - dist.cdf(v(4))) + (y_in ? eps : 0.0);
        Vec8 u;
        u << pi1, 1.0 - pi1, v(4), v(5), v(0), v(1), v(2), v(3);
        return u;
    };
    auto admissible = [&](const Vec6& v) {
        const Vec8 u = full(v);
        return v.allFinite() && v(2) > 0.0 && v(3) > 0.0 && v(4) < v(5) && u(0) > 0.0 && u(0) < 1.0;
    };
    auto resid = [&](const Vec6& v) -> Vec6 { return equations(in, dist, beta, full(v), mass).tail<6>(); };

    if (!admissible(z)) throw NewtonFailure("starting point is not admissible");
    Vec6 f = resid(z);
    int it = 0;
    for (; it < cfg.max_newton && f.cwiseAbs().maxCoeff() > cfg.newton_tol; ++it) {
        Mat6 jac;
        for (int j = 0; j < 6; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(z(j)));
            Vec6 zp = z, zm = z;
            zp(j) += h;
            zm(j) -= h;
            jac.col(j) = (resid(zp) - resid(zm)) / (2.0 * h);
        }
        const Vec6 step = jac.fullPivLu().solve(-f);
        if (!step.allFinite()) throw NewtonFailure("singular Jacobian in functional solve");
        double lambda = 1.0;
        bool moved = false;
        for (int half = 0; half < 40; ++half, lambda *= 0.5) {
            const Vec6 cand = z + lambda * step;
            if (!admissible(cand)) continue;
            const Vec6 fc = resid(cand);
            if (fc.norm() < f.norm()) {
                z = cand;
                f = fc;
                moved = true;
                break;
            }
        }
        if (!moved) break;  // no further decrease possible at this precision
    }

    FunctionalSolution sol = FunctionalSolution::from_vector(full(z));
    sol.residuals = equations(in, dist, beta, sol.vector(), mass);
    sol.newton_iterations = it;
    if (!(sol.max_residual() <= 1e-8)) {
        std::ostringstream msg;
        msg << "functional solve did not converge after " << it << " Newton steps; residuals:";
        for (int i = 0; i < 8; ++i) msg << ' ' << kFunctionalNames[i] << '=' << sol.residuals(i);
        throw NewtonFailure(msg.str());
    }

    // the interval must be exactly where cluster 1 dominates
    const auto [ra, rb] = interval_boundary(sol.pi1, sol.mu1, sol.s1, sol.pi2, sol.mu2, sol.s2);
    if (std::abs(ra - sol.a) > 1e-6 * (1.0 + std::abs(sol.a)) ||
        std::abs(rb - sol.b) > 1e-6 * (1.0 + std::abs(sol.b)))
        throw GeometryNotSupported("solved boundaries are not the dominance interval of cluster 1");

    const double big = std::max(sol.s1, sol.s2), small = std::min(sol.s1, sol.s2);
    if (!(big < cfg.constraint.c * small) || !(small > cfg.constraint.c1))
        throw ConstraintBoundary("solution is not strictly inside the eigenvalue constraints (M/m = " +
                                 std::to_string(big / small) + ", m = " + std::to_string(small) + ")");
    return sol;
}

IfConstants if_constants(const FunctionalSolution& sol, const NormalMixture1D& dist, double beta,
                         const InfluenceConfig& cfg) {
    check_beta(beta);
    const Integrator in(dist, cfg);
    const double a = sol.a, b = sol.b, mu1 = sol.mu1, mu2 = sol.mu2, s1 = sol.s1, s2 = sol.s2;
    IfConstants k;
    k.c0 = c0_of(beta);
    k.pa = dist.pdf(a);
    k.pb = dist.pdf(b);
    k.mass_in = dist.cdf(b) - dist.cdf(a);
    k.mass_out = 1.0 - k.mass_in;

    auto r = [](double x, double mu, double s) { return (x - mu) * (x - mu) / s; };
    auto d_mean_mu = [&](double mu, double s) {
        return [=, &r](double x) { return fpow(x, mu, s, beta) * (beta * r(x, mu, s) - 1.0); };
    };
    auto d_mean_s = [&](double mu, double s) {
        return [=, &r](double x) {
            return fpow(x, mu, s, beta) * (x - mu) * (0.5 * beta / s) * (r(x, mu, s) - 1.0);
        };
    };
    auto d_var_mu = [&](double mu, double s) {
        return [=, &r](double x) {
            return fpow(x, mu, s, beta) * (x - mu) / s * (beta * (r(x, mu, s) - 1.0) - 2.0);
        };
    };
    auto d_var_s = [&](double mu, double s) {
        return [=, &r](double x) {
            const double q = r(x, mu, s);
            return fpow(x, mu, s, beta) * ((0.5 * beta / s) * (q - 1.0) * (q - 1.0) - q / s);
        };
    };

    k.mu1_mean = in.inside(a, b, d_mean_mu(mu1, s1));
    k.s1_mean = in.inside(a, b, d_mean_s(mu1, s1));
    k.mu2_mean = in.outside(a, b, d_mean_mu(mu2, s2));
    k.s2_mean = in.outside(a, b, d_mean_s(mu2, s2));
    k.mu1_var = in.inside(a, b, d_var_mu(mu1, s1));
    k.s1_var = in.inside(a, b, d_var_s(mu1, s1));
    k.mu2_var = in.outside(a, b, d_var_mu(mu2, s2));
    k.s2_var = in.outside(a, b, d_var_s(mu2, s2));
    return k;
}

InfluenceSystem::InfluenceSystem(const FunctionalSolution& sol, const NormalMixture1D& dist,
                                 double beta, const InfluenceConfig& cfg)
    : sol_(sol), beta_(beta), k_(if_constants(sol, dist, beta, cfg)) {
    const double pi1 = sol.pi1, pi2 = sol.pi2, a = sol.a, b = sol.b, mu1 = sol.mu1, mu2 = sol.mu2,
                 s1 = sol.s1, s2 = sol.s2;
    const double k1 = 2.0 * k_.c0 * std::pow(s1, -0.5 * beta);
    const double k2 = 2.0 * k_.c0 * std::pow(s2, -0.5 * beta);

    auto gap_row = [&](double x, int col) {
        Eigen::Matrix<double, 1, 8> row = Eigen::Matrix<double, 1, 8>::Zero();
        row(0) = 2.0 / pi1;
        row(1) = -2.0 / pi2;
        row(col) = -2.0 * (x - mu1) / s1 + 2.0 * (x - mu2) / s2;
        row(4) = 2.0 * (x - mu1) / s1;
        row(5) = -2.0 * (x - mu2) / s2;
        row(6) = -1.0 / s1 + (x - mu1) * (x - mu1) / (s1 * s1);
        row(7) = 1.0 / s2 - (x - mu2) * (x - mu2) / (s2 * s2);
        return row;
    };
    auto gm1 = [&](double x) { return fpow(x, mu1, s1, beta) * (x - mu1); };
    auto gm2 = [&](double x) { return fpow(x, mu2, s2, beta) * (x - mu2); };
    auto gv1 = [&](double x) { return fpow(x, mu1, s1, beta) * ((x - mu1) * (x - mu1) / s1 - 1.0) + k1; };
    auto gv2 = [&](double x) { return fpow(x, mu2, s2, beta) * ((x - mu2) * (x - mu2) / s2 - 1.0) + k2; };

    a_.setZero();
    a_.row(0) << 1, 0, k_.pa, -k_.pb, 0, 0, 0, 0;
    a_.row(1) << 1, 1, 0, 0, 0, 0, 0, 0;
    a_.row(2) = gap_row(a, 2);
    a_.row(3) = gap_row(b, 3);
    a_.row(4) << 0, 0, -gm1(a) * k_.pa, gm1(b) * k_.pb, k_.mu1_mean, 0, k_.s1_mean, 0;
    a_.row(5) << 0, 0, gm2(a) * k_.pa, -gm2(b) * k_.pb, 0, k_.mu2_mean, 0, k_.s2_mean;
    a_.row(6) << 0, 0, -gv1(a) * k_.pa, gv1(b) * k_.pb, k_.mu1_var, 0,
        k_.s1_var - 0.5 * beta * k1 / s1 * k_.mass_in, 0;
    a_.row(7) << 0, 0, gv2(a) * k_.pa, -gv2(b) * k_.pb, 0, k_.mu2_var, 0,
        k_.s2_var - 0.5 * beta * k2 / s2 * k_.mass_out;

    Eigen::JacobiSVD<Mat8> svd(a_);
    const auto sv = svd.singularValues();
    cond_ = sv(7) > 0.0 ? sv(0) / sv(7) : std::numeric_limits<double>::infinity();
    if (!(cond_ <= cfg.max_condition))
        throw IllConditioned("influence system is singular or ill-conditioned (condition " +
                             std::to_string(cond_) + ")");
    lu_.compute(a_);
}

Vec8 InfluenceSystem::rhs(double y) const {
    const double beta = beta_;
    const auto& s = sol_;
    const bool in = y > s.a && y < s.b;
    const double k1 = 2.0 * k_.c0 * std::pow(s.s1, -0.5 * beta);
    const double k2 = 2.0 * k_.c0 * std::pow(s.s2, -0.5 * beta);
    Vec8 r = Vec8::Zero();
    r(0) = (in ? 1.0 : 0.0) - k_.mass_in;
    if (in) {
        const double f = fpow(y, s.mu1, s.s1, beta);
        r(4) = -f * (y - s.mu1);
        r(6) = -(f * ((y - s.mu1) * (y - s.mu1) / s.s1 - 1.0) + k1);
    } else {
        const double f = fpow(y, s.mu2, s.s2, beta);
        r(5) = -f * (y - s.mu2);
        r(7) = -(f * ((y - s.mu2) * (y - s.mu2) / s.s2 - 1.0) + k2);
    }
    return r;
}

InfluenceVector InfluenceSystem::at(double y) const {
    const Vec8 v = lu_.solve(rhs(y));
    InfluenceVector out;
    for (int i = 0; i < 8; ++i) out[i] = v(i);
    return out;
}

std::pair<Mat8, Vec8> assemble_if_system(const FunctionalSolution& sol, const NormalMixture1D& dist,
                                         double beta, double y, const InfluenceConfig& cfg) {
    const InfluenceSystem sys(sol, dist, beta, cfg);
    return {sys.matrix(), sys.rhs(y)};
}

InfluenceVector influence_at(const FunctionalSolution& sol, const NormalMixture1D& dist,
                             double beta, double y, const InfluenceConfig& cfg) {
    return InfluenceSystem(sol, dist, beta, cfg).at(y);
}

InfluenceVector numeric_if_oracle(const NormalMixture1D& dist, double beta,
                                  const InfluenceConfig& cfg, double y,
                                  const std::vector<double>& eps_list,
                                  const std::optional<FunctionalSolution>& base) {
    if (eps_list.empty()) throw InputError("oracle needs at least one contamination size");
    const FunctionalSolution t0 = base ? *base : solve_functional(dist, beta, cfg);
    const Vec8 u0 = t0.vector();
    std::vector<Vec8> quot;
    for (double e : eps_list) {
        if (!(e > 0.0)) throw InputError("contamination sizes must be positive");
        const FunctionalSolution te = solve_functional(dist, beta, cfg, PointMass{y, e}, t0);
        quot.push_back((te.vector() - u0) / e);
    }
    InfluenceVector out;
    const std::size_t m = eps_list.size();
    if (m == 1) {
        for (int i = 0; i < 8; ++i) out[i] = quot[0](i);
        return out;
    }
    // intercept of the least-squares line D(eps) = IF + slope * eps
    double se = 0, see = 0;
    for (double e : eps_list) {
        se += e;
        see += e * e;
    }
    const double det = static_cast<double>(m) * see - se * se;
    for (int i = 0; i < 8; ++i) {
        double sd = 0, sed = 0;
        for (std::size_t j = 0; j < m; ++j) {
            sd += quot[j](i);
            sed += eps_list[j] * quot[j](i);
        }
        out[i] = (see * sd - se * sed) / det;
    }
    return out;
}

std::vector<IfCurveRow> if_curve(const InfluenceSystem& sys, const std::vector<double>& grid,
                                 int threads) {
    std::vector<IfCurveRow> rows(grid.size());
    parallel_for(static_cast<int>(grid.size()), threads, [&](int i) {
        rows[i] = {grid[i], sys.at(grid[i])};
    });
    return rows;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) throw InputError("grid needs at least two points and lo < hi");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

void write_if_csv(std::ostream& os, const std::vector<IfCurveRow>& rows) {
    os << "y,IF_pi1,IF_pi2,IF_a,IF_b,IF_mu1,IF_mu2,IF_s1,IF_s2\n";
    os << std::setprecision(12);
    for (const auto& r : rows) {
        os << r.y;
        for (double v : r.value) os << ',' << v;
        os << '\n';
    }
}

}  // namespace mixclust
