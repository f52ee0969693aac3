// mixclust: robust clustering by maximum pseudo beta-likelihood.
//
//   mixclust fit data.csv --k 3 --out run/
//   mixclust simulate data/scenarios/table1_p2_I.json --out sim/
//   mixclust influence --out if/
//   mixclust image picture.png --k 2 --beta 0.2 --threshold 0.02 --out seg.ppm
//
// Exit status: 0 ok, 2 bad input, 3 computation failure.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "mixclust/errors.hpp"
#include "mixclust/image.hpp"
#include "mixclust/influence.hpp"
#include "mixclust/mple.hpp"
#include "mixclust/parallel.hpp"
#include "mixclust/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace mixclust;

namespace {

constexpr int kInputError = 2;
constexpr int kComputeError = 3;

// ---- shared options ---------------------------------------------------------

struct Common {
    double beta = 0.1;
    int k = 2;
    double c = 20.0;
    double c1 = 0.1;
    double threshold = 1e-3;
    int restarts = 10;
    int max_iter = 100;
    std::uint64_t seed = 1;
    int threads = default_threads();
    std::string out;
    bool force = false;
    std::string config;

    std::map<std::string, CLI::Option*> opts;

    void add_algo(CLI::App* app) {
        opts["beta"] = app->add_option("--beta", beta, "DPD tuning parameter in [0,1]");
        opts["k"] = app->add_option("--k", k, "number of clusters");
        opts["c"] = app->add_option("--c", c, "eigenvalue-ratio bound (>= 1)");
        opts["c1"] = app->add_option("--c1", c1, "smallest-eigenvalue floor (> 0)");
        opts["threshold"] = app->add_option("--threshold,-T", threshold, "outlier threshold T on the discriminant");
        opts["restarts"] = app->add_option("--restarts", restarts, "random restarts");
        opts["max_iter"] = app->add_option("--max-iter", max_iter, "outer iteration cap");
        opts["seed"] = app->add_option("--seed", seed, "random seed");
        app->add_option("--config", config, "JSON file with any of the above; flags win");
        add_run(app);
    }
    void add_run(CLI::App* app) {
        opts["threads"] = app->add_option("--threads", threads, "worker threads (default: all cores)");
        app->add_option("--out", out, "output location");
        app->add_flag("--force", force, "overwrite existing outputs");
    }

    bool given(const std::string& name) const {
        auto it = opts.find(name);
        return it != opts.end() && it->second->count() > 0;
    }

    // config-file values fill anything not given on the command line
    void merge_config() {
        if (config.empty()) return;
        std::ifstream in(config);
        if (!in) throw InputError("cannot open config '" + config + "'");
        const auto j = nlohmann::json::parse(in);
        if (!j.is_object()) throw InputError("config must be a JSON object");
        for (const auto& [key, val] : j.items()) {
            if (given(key)) continue;
            if (key == "beta") beta = val.get<double>();
            else if (key == "k") k = val.get<int>();
            else if (key == "c") c = val.get<double>();
            else if (key == "c1") c1 = val.get<double>();
            else if (key == "threshold") threshold = val.get<double>();
            else if (key == "restarts") restarts = val.get<int>();
            else if (key == "max_iter") max_iter = val.get<int>();
            else if (key == "seed") seed = val.get<std::uint64_t>();
            else if (key == "threads") threads = val.get<int>();
            else throw InputError("unknown config field '" + key + "'");
        }
    }

    AlgoConfig algo() const {
        AlgoConfig a;
        a.beta = beta;
        a.constraint = {c, c1};
        a.threshold = threshold;
        a.n_restarts = restarts;
        a.max_outer_iter = max_iter;
        a.seed = seed;
        a.threads = threads;
        a.validate();
        return a;
    }
};

void claim(const fs::path& p, bool force) {
    if (fs::exists(p) && !force)
        throw InputError("output '" + p.string() + "' already exists (use --force to overwrite)");
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw InputError("failed writing '" + p.string() + "'");
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json to_json(const Vector& v) {
    ordered_json a = ordered_json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

ordered_json to_json(const Matrix& m) {
    ordered_json a = ordered_json::array();
    for (long i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
    return a;
}

ordered_json params_json(const MixtureParams& p) {
    ordered_json comps = ordered_json::array();
    for (const auto& c : p.components)
        comps.push_back({{"mean", to_json(c.mean)}, {"cov", to_json(c.cov.matrix())}});
    return {{"weights", to_json(p.weights)}, {"components", comps}};
}

// ---- CSV --------------------------------------------------------------------

bool parse_double(std::string_view s, double& v) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

Observations read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto cells = split(line);
        std::vector<double> vals(cells.size());
        bool numeric = true;
        for (std::size_t i = 0; i < cells.size(); ++i) numeric = numeric && parse_double(cells[i], vals[i]);
        if (!numeric) {
            if (rows.empty() && width == 0) {  // header
                width = cells.size();
                continue;
            }
            throw InputError(path + ":" + std::to_string(lineno) + ": non-numeric cell");
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                             " columns, found " + std::to_string(cells.size()));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw InputError("no data rows in '" + path + "'");
    Observations x(static_cast<long>(rows.size()), static_cast<long>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) x(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    return x;
}

// ---- fit --------------------------------------------------------------------

int cmd_fit(const std::string& input, Common& o) {
    o.merge_config();
    const AlgoConfig algo = o.algo();
    const fs::path dir = o.out.empty() ? fs::path(fs::path(input).stem().string() + "_fit") : fs::path(o.out);
    const fs::path json_path = dir / "result.json", csv_path = dir / "assignments.csv";
    const Observations x = read_csv(input);
    claim(json_path, o.force);
    claim(csv_path, o.force);
    spdlog::info("fit: n={} p={} k={} beta={}", x.rows(), x.cols(), o.k, o.beta);

    const ClusteringResult r = fit(x, o.k, algo);

    ordered_json j;
    j["n"] = x.rows();
    j["p"] = x.cols();
    j["k"] = o.k;
    j["config"] = {{"beta", o.beta},        {"c", o.c},         {"c1", o.c1},
                   {"threshold", o.threshold}, {"restarts", o.restarts}, {"max_iter", o.max_iter},
                   {"seed", o.seed}};
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["restart_index"] = r.restart_index;
    j["degenerate_restarts"] = r.degenerate_restarts;
    j["params"] = params_json(r.params);
    std::vector<int> sizes(static_cast<std::size_t>(o.k), 0);
    for (int z : r.assignments) ++sizes[z];
    j["cluster_sizes"] = sizes;
    j["outliers"] = std::count(r.outlier_flags.begin(), r.outlier_flags.end(), true);
    j["objective_trace"] = r.objective_trace;
    write_text(json_path, dump(j));

    std::ostringstream csv;
    csv << "row,cluster,discriminant,outlier,outlier_type\n" << std::setprecision(12);
    for (std::size_t i = 0; i < r.assignments.size(); ++i) {
        csv << i + 1 << ',' << r.assignments[i] + 1 << ',' << r.discriminants(static_cast<long>(i)) << ','
            << (r.outlier_flags[i] ? 1 : 0) << ',';
        if (r.outlier_flags[i]) csv << r.outlier_types[i] + 1;
        csv << '\n';
    }
    write_text(csv_path, csv.str());
    std::cout << "objective " << r.objective << ", " << j["outliers"] << " outlier(s); wrote " << json_path.string()
              << " and " << csv_path.string() << '\n';
    return 0;
}

// ---- simulate ---------------------------------------------------------------

template <class T>
T take(nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    T v = obj.at(key).get<T>();
    obj.erase(key);
    return v;
}

void reject_rest(const nlohmann::json& obj, const std::string& where) {
    if (!obj.empty()) throw InputError("unknown field '" + obj.begin().key() + "' in " + where);
}

struct Scenario {
    ScenarioSpec spec;
    std::vector<MethodConfig> methods;
};

Scenario parse_scenario(nlohmann::json j) {
    if (!j.is_object()) throw InputError("scenario must be a JSON object");
    Scenario s;
    auto& sp = s.spec;
    sp.n = take(j, "n", sp.n);
    sp.p = take(j, "p", sp.p);
    sp.k = take(j, "k", sp.k);
    for (const auto& m : take(j, "means", std::vector<std::vector<double>>{}))
        sp.means.push_back(Eigen::Map<const Vector>(m.data(), static_cast<long>(m.size())));
    sp.cov_scale = take(j, "cov_scale", sp.cov_scale);
    sp.weights = take(j, "weights", sp.weights);
    sp.contamination = contamination_from_string(take(j, "contamination", std::string("none")));
    sp.contamination_level = take(j, "contamination_level", sp.contamination == Contamination::None ? 0.0 : 0.1);
    sp.replications = take(j, "replications", sp.replications);
    sp.seed = take(j, "seed", sp.seed);
    const bool count_flagged = take(j, "count_flagged_as_misclassified", true);
    auto methods = take(j, "methods", nlohmann::json::array());
    reject_rest(j, "scenario");
    if (!methods.is_array() || methods.empty()) throw InputError("scenario needs a non-empty 'methods' array");
    sp = sp.resolved();

    for (auto m : methods) {
        if (!m.is_object()) throw InputError("each method must be a JSON object");
        MethodConfig mc;
        mc.algo.beta = take(m, "beta", 0.1);
        mc.name = take(m, "name", "beta=" + [&] {
            std::ostringstream os;
            os << mc.algo.beta;
            return os.str();
        }());
        mc.algo.threshold = m.contains("threshold") ? take(m, "threshold", 0.0) : default_threshold(sp.p);
        mc.algo.constraint.c = take(m, "c", 20.0);
        mc.algo.constraint.c1 = take(m, "c1", 0.1);
        mc.algo.n_restarts = take(m, "restarts", 10);
        mc.algo.max_outer_iter = take(m, "max_outer_iter", 100);
        mc.count_flagged_as_error = count_flagged;
        reject_rest(m, "method '" + mc.name + "'");
        mc.algo.validate();
        s.methods.push_back(mc);
    }
    return s;
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

int cmd_simulate(const std::string& spec_path, Common& o, std::optional<int> reps) {
    std::ifstream in(spec_path);
    if (!in) throw InputError("cannot open scenario '" + spec_path + "'");
    nlohmann::json raw;
    try {
        raw = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(spec_path + ": " + e.what());
    }
    Scenario sc = parse_scenario(raw);
    if (reps) sc.spec.replications = *reps;
    if (o.given("seed")) sc.spec.seed = o.seed;
    sc.spec.validate();

    const fs::path dir = o.out.empty() ? fs::path(fs::path(spec_path).stem().string() + "_sim") : fs::path(o.out);
    const fs::path csv_path = dir / "replications.csv", json_path = dir / "summary.json";
    claim(csv_path, o.force);
    claim(json_path, o.force);
    spdlog::info("simulate: {} replications x {} methods on {} threads", sc.spec.replications, sc.methods.size(),
                 o.threads);

    const SimulationReport rep = run_experiment(sc.spec, sc.methods, o.threads);

    std::ostringstream csv;
    write_rows_csv(csv, rep);
    write_text(csv_path, csv.str());

    ordered_json j;
    const auto& s = rep.spec;
    ordered_json means = ordered_json::array();
    for (const auto& m : s.means) means.push_back(to_json(m));
    j["scenario"] = {{"n", s.n},
                     {"p", s.p},
                     {"k", s.k},
                     {"means", means},
                     {"cov_scale", s.cov_scale},
                     {"weights", s.weights},
                     {"contamination", to_string(s.contamination)},
                     {"contamination_level", s.contamination_level},
                     {"replications", s.replications},
                     {"seed", s.seed}};
    j["methods"] = ordered_json::array();
    for (std::size_t m = 0; m < rep.summary.size(); ++m) {
        const auto& sm = rep.summary[m];
        const auto& a = rep.methods[m].algo;
        j["methods"].push_back({{"name", sm.name},
                                {"beta", a.beta},
                                {"threshold", a.threshold},
                                {"c", a.constraint.c},
                                {"c1", a.constraint.c1},
                                {"restarts", a.n_restarts},
                                {"succeeded", sm.succeeded},
                                {"failed", sm.failed},
                                {"misclassification", sm.misclassification},
                                {"undetected_outlier_proportion", opt_json(sm.undetected)},
                                {"detected_outliers", sm.detected},
                                {"bias", sm.bias.bias},
                                {"mse", sm.bias.mse},
                                {"mean_bias", sm.bias.mean_bias},
                                {"mean_mse", sm.bias.mean_mse}});
    }
    write_text(json_path, dump(j));
    print_table(std::cout, rep);
    return 0;
}

// ---- influence --------------------------------------------------------------

std::string beta_tag(double b) {
    std::ostringstream os;
    os << b;
    return os.str();
}

int cmd_influence(Common& o, const std::vector<double>& betas, const std::vector<double>& weights,
                  const std::vector<double>& means, const std::vector<double>& variances, double gmin, double gmax,
                  int gpoints) {
    for (double b : betas)
        if (b == 0.0)
            throw InputError("beta = 0 refused: the influence functions are unbounded at beta = 0 (ordinary likelihood)");
    if (weights.size() != 2 || means.size() != 2 || variances.size() != 2)
        throw InputError("--weights, --means and --variances take exactly two values");
    NormalMixture1D dist;
    for (int j = 0; j < 2; ++j) {
        dist.weights[j] = weights[j];
        dist.means[j] = means[j];
        dist.variances[j] = variances[j];
    }
    dist.validate();
    InfluenceConfig cfg;
    cfg.constraint = {o.c, o.c1};
    cfg.constraint.validate();
    const auto grid = linear_grid(gmin, gmax, gpoints);

    const fs::path dir = o.out.empty() ? fs::path("influence") : fs::path(o.out);
    const fs::path json_path = dir / "solution.json";
    claim(json_path, o.force);
    for (double b : betas) claim(dir / ("if_beta_" + beta_tag(b) + ".csv"), o.force);

    ordered_json j;
    j["model"] = {{"weights", weights}, {"means", means}, {"variances", variances}};
    j["c"] = o.c;
    j["c1"] = o.c1;
    j["grid"] = {{"min", gmin}, {"max", gmax}, {"points", gpoints}};
    j["solutions"] = ordered_json::array();
    for (double b : betas) {
        const FunctionalSolution sol = solve_functional(dist, b, cfg);
        const InfluenceSystem sys(sol, dist, b, cfg);
        const auto rows = if_curve(sys, grid, o.threads);
        std::ostringstream csv;
        write_if_csv(csv, rows);
        const fs::path csv_path = dir / ("if_beta_" + beta_tag(b) + ".csv");
        write_text(csv_path, csv.str());

        ordered_json ranges = ordered_json::object();
        for (int i = 0; i < 8; ++i) {
            double lo = rows.front().value[i], hi = lo;
            for (const auto& r : rows) {
                lo = std::min(lo, r.value[i]);
                hi = std::max(hi, r.value[i]);
            }
            ranges[kFunctionalNames[i]] = {lo, hi};
        }
        std::vector<double> res(sol.residuals.data(), sol.residuals.data() + 8);
        j["solutions"].push_back({{"beta", b},
                                  {"pi1", sol.pi1},
                                  {"pi2", sol.pi2},
                                  {"a", sol.a},
                                  {"b", sol.b},
                                  {"mu1", sol.mu1},
                                  {"mu2", sol.mu2},
                                  {"s1", sol.s1},
                                  {"s2", sol.s2},
                                  {"residuals", res},
                                  {"newton_iterations", sol.newton_iterations},
                                  {"condition", sys.condition()},
                                  {"if_csv", csv_path.filename().string()},
                                  {"if_ranges", ranges}});
        std::cout << "beta=" << b << ": a=" << sol.a << " b=" << sol.b << " mu=(" << sol.mu1 << ", " << sol.mu2
                  << ") s=(" << sol.s1 << ", " << sol.s2 << ") pi1=" << sol.pi1 << '\n';
    }
    write_text(json_path, dump(j));
    return 0;
}

// ---- image ------------------------------------------------------------------

int cmd_image(const std::string& input, Common& o, const std::string& rule) {
    o.merge_config();
    SegmentConfig cfg;
    cfg.algo = o.algo();
    if (rule == "euclidean") cfg.algo.rule = AssignmentRule::NearestMean;
    else if (rule == "likelihood") cfg.algo.rule = AssignmentRule::MaxDiscriminant;
    else throw InputError("--assignment must be 'euclidean' or 'likelihood'");

    const PixelGrid grid = load_image(input);
    const fs::path out = o.out.empty() ? fs::path(fs::path(input).stem().string() + "_seg.ppm") : fs::path(o.out);
    const fs::path sidecar = fs::path(out.string() + ".json");
    claim(out, o.force);
    claim(sidecar, o.force);
    spdlog::info("image: {}x{} pixels, k={}", grid.width, grid.height, o.k);

    const SegmentationResult seg = segment(grid, o.k, cfg);
    const PixelGrid rec = reconstruct(grid, seg);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_ppm(out.string(), rec);

    std::vector<long> cluster_counts(static_cast<std::size_t>(o.k), 0), type_counts(static_cast<std::size_t>(o.k), 0);
    for (std::size_t i = 0; i < seg.fit.assignments.size(); ++i) {
        if (seg.fit.outlier_flags[i]) ++type_counts[seg.fit.outlier_types[i]];
        else ++cluster_counts[seg.fit.assignments[i]];
    }
    ordered_json j;
    j["input"] = input;
    j["width"] = grid.width;
    j["height"] = grid.height;
    j["k"] = o.k;
    j["config"] = {{"beta", seg.beta},     {"threshold", seg.threshold}, {"c", seg.c}, {"c1", seg.c1},
                   {"assignment", rule},   {"restarts", o.restarts},     {"seed", o.seed}};
    j["objective"] = seg.fit.objective;
    j["params"] = params_json(seg.fit.params);
    j["clusters"] = ordered_json::array();
    for (int c = 0; c < o.k; ++c)
        j["clusters"].push_back({{"index", c + 1}, {"pixels", cluster_counts[c]}, {"color", seg.cluster_colors[c]}});
    j["outlier_types"] = ordered_json::array();
    for (std::size_t t = 0; t < seg.outlier_types_present.size(); ++t) {
        const int type = seg.outlier_types_present[t];
        j["outlier_types"].push_back(
            {{"type", type + 1}, {"pixels", type_counts[type]}, {"color", seg.outlier_colors[t]}});
    }
    j["palette_size"] = seg.palette_size();
    write_text(sidecar, dump(j));
    std::cout << "wrote " << out.string() << " and " << sidecar.string() << '\n';
    return 0;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("mixclust");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lv = std::getenv("MIXCLUST_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Robust clustering with the maximum pseudo beta-likelihood estimator"};
    app.require_subcommand(1);

    Common fit_o, sim_o, inf_o, img_o;

    std::string fit_in;
    auto* fit_cmd = app.add_subcommand("fit", "cluster a numeric CSV file");
    fit_cmd->add_option("input", fit_in, "CSV file (optional header line)")->required();
    fit_o.add_algo(fit_cmd);

    std::string sim_in;
    std::optional<int> sim_reps;
    auto* sim_cmd = app.add_subcommand("simulate", "run a simulation scenario");
    sim_cmd->add_option("scenario", sim_in, "scenario JSON")->required();
    sim_cmd->add_option("--replications", sim_reps, "override the scenario's replication count");
    sim_o.opts["seed"] = sim_cmd->add_option("--seed", sim_o.seed, "override the scenario seed");
    sim_o.add_run(sim_cmd);

    std::vector<double> betas{0.1, 0.2, 1.0}, weights{0.5, 0.5}, means{0.0, 5.0}, variances{1.0, 4.0};
    double gmin = -30, gmax = 30;
    int gpoints = 601;
    inf_o.c = 5.0;
    auto* inf_cmd = app.add_subcommand("influence", "influence functions for a two-component 1-D model");
    inf_cmd->add_option("--beta", betas, "beta values")->delimiter(',');
    inf_cmd->add_option("--weights", weights, "pi1,pi2")->delimiter(',');
    inf_cmd->add_option("--means", means, "mu1,mu2")->delimiter(',');
    inf_cmd->add_option("--variances", variances, "s1,s2")->delimiter(',');
    inf_cmd->add_option("--c", inf_o.c, "eigenvalue-ratio bound");
    inf_cmd->add_option("--c1", inf_o.c1, "smallest-eigenvalue floor");
    inf_cmd->add_option("--grid-min", gmin, "grid lower end");
    inf_cmd->add_option("--grid-max", gmax, "grid upper end");
    inf_cmd->add_option("--grid-points", gpoints, "grid size");
    inf_o.add_run(inf_cmd);

    std::string img_in, rule = "euclidean";
    img_o.k = 2;
    img_o.beta = 0.2;
    img_o.threshold = 0.02;
    auto* img_cmd = app.add_subcommand("image", "segment an RGB image (PNG or P6 PPM)");
    img_cmd->add_option("input", img_in, "image file")->required();
    img_cmd->add_option("--assignment", rule, "euclidean (nearest mean) or likelihood");
    img_o.add_algo(img_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kInputError;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_in, fit_o);
        if (*sim_cmd) return cmd_simulate(sim_in, sim_o, sim_reps);
        if (*inf_cmd) return cmd_influence(inf_o, betas, weights, means, variances, gmin, gmax, gpoints);
        if (*img_cmd) return cmd_image(img_in, img_o, rule);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: invalid JSON value: " << e.what() << '\n';
        return kInputError;
    } catch (const ComputationError& e) {
        std::cerr << "computation failed: " << e.what() << '\n';
        return kComputeError;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}
