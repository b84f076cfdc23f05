#include "jklab/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace jklab {

const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// strict config parsing

namespace {

using nlohmann::json;

void expect_keys(const json& doc, const std::vector<std::string>& allowed,
                 const std::string& where) {
    if (!doc.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

double get_number(const json& doc, const std::string& key, double fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc.at(key).is_number()) throw ConfigError("'" + key + "' must be a number");
    return doc.at(key).get<double>();
}

std::vector<double> get_grid(const json& doc, const std::string& key,
                             const std::vector<double>& fallback) {
    if (!doc.contains(key)) return fallback;
    if (!doc.at(key).is_array()) throw ConfigError("'" + key + "' must be an array");
    return doc.at(key).get<std::vector<double>>();
}

void validate_scale_doc(const json& doc, const std::string& where) {
    if (!doc.is_object() || !doc.contains("kind"))
        throw ConfigError(where + ": scale document needs a 'kind'");
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "piecewise_power")
        expect_keys(doc, {"kind", "breaks", "exponents"}, where);
    else if (kind == "table")
        expect_keys(doc, {"kind", "r", "v"}, where);
    else
        throw ConfigError(where + ": unknown scale kind '" + kind + "'");
}

const std::vector<std::string>& checker_param_whitelist(const std::string& name) {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"vd_rvd", {"name", "radii", "threshold"}},
        {"tail_integral", {"name", "radii", "threshold"}},
        {"exit_scaling", {"name", "radii", "threshold", "center"}},
        {"faber_krahn", {"name", "radii", "threshold", "center"}},
        {"poincare", {"name", "radii", "threshold", "center", "kappa"}},
        {"cutoff_energy", {"name", "radii", "threshold", "center"}},
        {"ujs", {"name", "radii", "threshold"}},
        {"phi_harnack", {"name", "radii", "threshold", "center"}},
        {"ujs_negative_control",
         {"name", "radii", "threshold", "period", "epsilon", "min_distance"}},
        {"phi_harnack_negative_control",
         {"name", "radii", "threshold", "center", "period", "epsilon", "min_distance",
          "margin"}},
        {"diffusive_scale_construction", {"name", "threshold"}},
        {"hk_corridor", {"name", "times", "threshold", "center", "max_distance", "dump_dir"}},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown checker '" + name + "'");
    return it->second;
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    expect_keys(doc,
                {"experiment", "space", "kernel", "scales", "envelope", "checkers", "times",
                 "radii", "seed", "output", "caps"},
                "config");
    ExperimentConfig cfg;
    if (!doc.contains("experiment")) throw ConfigError("config: missing 'experiment'");
    cfg.name = doc.at("experiment").get<std::string>();

    if (!doc.contains("space")) throw ConfigError("config: missing 'space'");
    cfg.space = doc.at("space");
    if (!cfg.space.contains("builder")) throw ConfigError("space: missing 'builder'");
    const std::string builder = cfg.space.at("builder").get<std::string>();
    if (builder == "lattice_torus")
        expect_keys(cfg.space, {"builder", "dim", "side", "spacing"}, "space");
    else if (builder == "sierpinski_graph")
        expect_keys(cfg.space, {"builder", "level"}, "space");
    else
        throw ConfigError("space: unknown builder '" + builder + "'");

    if (!doc.contains("kernel")) throw ConfigError("config: missing 'kernel'");
    cfg.kernel = doc.at("kernel");
    expect_keys(cfg.kernel, {"kind", "kappa_low", "kappa_up", "modulator"}, "kernel");
    if (cfg.kernel.at("kind").get<std::string>() != "formula")
        throw ConfigError("kernel: only the 'formula' kind is configurable");
    if (cfg.kernel.contains("modulator")) {
        expect_keys(cfg.kernel.at("modulator"), {"name", "period", "epsilon", "min_distance"},
                    "kernel.modulator");
        const std::string mod = cfg.kernel.at("modulator").at("name").get<std::string>();
        if (mod != "none" && mod != "ujs_suppression")
            throw ConfigError("kernel.modulator: unknown name '" + mod + "'");
    }

    if (!doc.contains("scales")) throw ConfigError("config: missing 'scales'");
    cfg.scales = doc.at("scales");
    expect_keys(cfg.scales, {"phi_j", "phi_c"}, "scales");
    if (!cfg.scales.contains("phi_j")) throw ConfigError("scales: missing 'phi_j'");
    validate_scale_doc(cfg.scales.at("phi_j"), "scales.phi_j");
    if (!cfg.scales.contains("phi_c")) throw ConfigError("scales: missing 'phi_c'");
    const auto& pc = cfg.scales.at("phi_c");
    if (pc.is_object() && pc.contains("constructor")) {
        expect_keys(pc, {"constructor"}, "scales.phi_c");
        if (pc.at("constructor").get<std::string>() != "induced_diffusive")
            throw ConfigError("scales.phi_c: unknown constructor");
    } else {
        validate_scale_doc(pc, "scales.phi_c");
    }

    if (doc.contains("envelope")) {
        cfg.envelope = doc.at("envelope");
        expect_keys(cfg.envelope,
                    {"lower_scale", "lower_time", "upper_scale", "upper_time", "nd_scale",
                     "nd_radius", "time_cutoff"},
                    "envelope");
    }

    if (!doc.contains("checkers")) throw ConfigError("config: missing 'checkers'");
    if (!doc.at("checkers").is_array()) throw ConfigError("'checkers' must be an array");
    for (const auto& entry : doc.at("checkers")) {
        if (!entry.is_object() || !entry.contains("name"))
            throw ConfigError("checkers: each entry needs a 'name'");
        CheckerRequest req;
        req.name = entry.at("name").get<std::string>();
        expect_keys(entry, checker_param_whitelist(req.name), "checker '" + req.name + "'");
        req.params = entry;
        for (const auto& prior : cfg.checkers)
            if (prior.name == req.name)
                throw ConfigError("checkers: '" + req.name + "' requested more than once");
        cfg.checkers.push_back(std::move(req));
    }

    cfg.times = get_grid(doc, "times", {1.0, 4.0, 16.0});
    cfg.radii = get_grid(doc, "radii", {4.0, 8.0, 16.0});
    if (doc.contains("seed")) {
        const auto& seed = doc.at("seed");
        if (!seed.is_number_integer() || (seed.is_number_integer() && seed.get<long long>() < 0))
            throw ConfigError("'seed' must be a non-negative integer");
        cfg.seed = seed.get<std::uint64_t>();
    } else {
        throw ConfigError("config: missing 'seed'");
    }
    if (doc.contains("output")) cfg.output_dir = doc.at("output").get<std::string>();
    if (doc.contains("caps")) {
        const auto& caps = doc.at("caps");
        expect_keys(caps, {"max_points", "max_paths", "max_exact_points"}, "caps");
        cfg.caps.max_points =
            static_cast<std::size_t>(get_number(caps, "max_points", 4096));
        cfg.caps.max_paths =
            static_cast<std::size_t>(get_number(caps, "max_paths", 100000));
        cfg.caps.max_exact_points =
            static_cast<std::size_t>(get_number(caps, "max_exact_points", 4096));
    }
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    json doc;
    doc["experiment"] = name;
    doc["space"] = space;
    doc["kernel"] = kernel;
    doc["scales"] = scales;
    if (!envelope.is_null()) doc["envelope"] = envelope;
    json list = json::array();
    for (const auto& c : checkers) list.push_back(c.params);
    doc["checkers"] = list;
    doc["times"] = times;
    doc["radii"] = radii;
    doc["seed"] = seed;
    doc["output"] = output_dir;
    doc["caps"] = {{"max_points", caps.max_points},
                   {"max_paths", caps.max_paths},
                   {"max_exact_points", caps.max_exact_points}};
    return doc;
}

// ---------------------------------------------------------------------------
// context

namespace {

JumpKernelSpec::Modulator make_modulator(const json& kernel_doc, double* kappa_low) {
    if (!kernel_doc.contains("modulator")) return nullptr;
    const auto& mod = kernel_doc.at("modulator");
    const std::string name = mod.at("name").get<std::string>();
    if (name == "none") return nullptr;
    const auto period = static_cast<std::size_t>(get_number(mod, "period", 64));
    const double epsilon = get_number(mod, "epsilon", 0.0);
    const double min_distance = get_number(mod, "min_distance", 8.0);
    if (period == 0) throw ConfigError("modulator: period must be positive");
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw ConfigError("modulator: epsilon must lie in [0,1]");
    *kappa_low = std::min(*kappa_low, epsilon);
    return [period, epsilon, min_distance](std::size_t x, std::size_t y, double d) {
        if (d < min_distance) return 1.0;
        return (x % period == 0 && y % period == 0) ? 1.0 : epsilon;
    };
}

struct Context {
    ExperimentConfig config;
    FiniteMetricMeasureSpace space;
    JumpKernelSpec kernel;
    JumpKernelSpec perturbed_kernel;
    ScaleTriple triple;
    EnvelopeConstants constants;
    std::unique_ptr<Generator> gen;
    std::unique_ptr<Generator> perturbed_gen;
    std::string scale_warnings;

    Context(const ExperimentConfig& cfg)
        : config(cfg), space(build_space(cfg)), kernel(JumpKernelSpec::formula(
                                                    ScaleFunction::pure_power(1.0))),
          perturbed_kernel(kernel) {
        const ScaleFunction phi_j = ScaleFunction::from_json(cfg.scales.at("phi_j"));
        ScaleFunction phi_c = [&] {
            const auto& pc = cfg.scales.at("phi_c");
            if (pc.is_object() && pc.contains("constructor")) return phi_c_from_phi_j(phi_j);
            return ScaleFunction::from_json(pc);
        }();
        triple = make_scale_triple(phi_j, phi_c, &scale_warnings);

        double kappa_low = get_number(cfg.kernel, "kappa_low", 1.0);
        const double kappa_up = get_number(cfg.kernel, "kappa_up", 1.0);
        auto modulator = make_modulator(cfg.kernel, &kappa_low);
        kernel = JumpKernelSpec::formula(phi_j, modulator, kappa_low, kappa_up);

        if (!cfg.envelope.is_null()) {
            constants.lower_scale = get_number(cfg.envelope, "lower_scale", 1.0);
            constants.lower_time = get_number(cfg.envelope, "lower_time", 1.0);
            constants.upper_scale = get_number(cfg.envelope, "upper_scale", 1.0);
            constants.upper_time = get_number(cfg.envelope, "upper_time", 1.0);
            constants.nd_scale = get_number(cfg.envelope, "nd_scale", 1.0);
            constants.nd_radius = get_number(cfg.envelope, "nd_radius", 1.0);
            constants.time_cutoff = get_number(cfg.envelope, "time_cutoff", 1.0);
        }
    }

    static FiniteMetricMeasureSpace build_space(const ExperimentConfig& cfg) {
        const std::string builder = cfg.space.at("builder").get<std::string>();
        try {
            if (builder == "lattice_torus")
                return FiniteMetricMeasureSpace::lattice_torus(
                    static_cast<int>(get_number(cfg.space, "dim", 1)),
                    static_cast<int>(get_number(cfg.space, "side", 64)),
                    get_number(cfg.space, "spacing", 1.0), cfg.caps.max_points);
            return FiniteMetricMeasureSpace::sierpinski_graph(
                static_cast<int>(get_number(cfg.space, "level", 3)));
        } catch (const std::length_error& e) {
            throw ResourceCapError(e.what());
        }
    }

    JumpKernelSpec perturb(const json& params) const {
        const auto period = static_cast<std::size_t>(get_number(params, "period", 64));
        const double epsilon = get_number(params, "epsilon", 0.0);
        const double min_distance = get_number(params, "min_distance", 8.0);
        auto mod = [period, epsilon, min_distance](std::size_t x, std::size_t y, double d) {
            if (d < min_distance) return 1.0;
            return (x % period == 0 && y % period == 0) ? 1.0 : epsilon;
        };
        return JumpKernelSpec::formula(triple.phi_j, mod, std::min(epsilon, kernel.kappa_low()),
                                       kernel.kappa_up());
    }
};

std::vector<double> checker_radii(const Context& ctx, const json& params) {
    auto radii = get_grid(params, "radii", ctx.config.radii);
    if (radii.empty()) throw ConfigError("checker: empty radii grid");
    const double guard = ctx.space.diameter() / 4.0;
    for (double r : radii)
        if (r > guard)
            throw ConfigError("checker: radius " + std::to_string(r) +
                              " violates the diameter/4 guard (" + std::to_string(guard) + ")");
    return radii;
}

ConditionVerdict run_one_checker(Context& ctx, const CheckerRequest& req) {
    const auto& p = req.params;
    const double threshold = get_number(p, "threshold", 10.0);
    const auto center = static_cast<std::size_t>(get_number(p, "center", 0));

    if (req.name == "vd_rvd") {
        auto v = check_vd_rvd_condition(ctx.space, checker_radii(ctx, p), threshold);
        const auto radii = checker_radii(ctx, p);
        std::ostringstream dom;
        dom << "all centers, radii [" << radii.front() << "," << radii.back() << "]";
        v.domain = dom.str();
        return v;
    }
    if (req.name == "tail_integral")
        return check_tail_integral(ctx.space, ctx.kernel, ctx.triple.phi_j,
                                   checker_radii(ctx, p), threshold);
    if (req.name == "exit_scaling")
        return check_exit_scaling(*ctx.gen, ctx.triple.phi, center, checker_radii(ctx, p),
                                  threshold);
    if (req.name == "faber_krahn")
        return check_faber_krahn(*ctx.gen, center, checker_radii(ctx, p), ctx.triple.phi,
                                 threshold);
    if (req.name == "poincare") {
        const double kappa = get_number(p, "kappa", 2.0);
        const auto radii = checker_radii(ctx, p);
        for (double r : radii)
            if (kappa * r > ctx.space.diameter() / 4.0 + 1e-9)
                throw ConfigError("poincare: the enlarged ball violates the diameter/4 guard");
        return check_poincare(*ctx.gen, center, radii, ctx.triple.phi, kappa, threshold);
    }
    if (req.name == "cutoff_energy")
        return check_cutoff_energy(ctx.space, ctx.kernel, center, checker_radii(ctx, p),
                                   ctx.triple.phi, threshold);
    if (req.name == "ujs")
        return check_ujs(ctx.space, ctx.kernel, get_grid(p, "radii", ctx.config.radii),
                         threshold, ctx.config.seed);
    if (req.name == "phi_harnack")
        return check_phi_harnack(*ctx.gen, ctx.triple.phi, center, checker_radii(ctx, p),
                                 HarnackCylinder{}, ctx.config.seed, threshold);

    if (req.name == "ujs_negative_control") {
        auto inner = check_ujs(ctx.space, ctx.perturbed_kernel,
                               get_grid(p, "radii", ctx.config.radii), threshold,
                               ctx.config.seed);
        ConditionVerdict v;
        v.condition = req.name;
        v.seed = ctx.config.seed;
        v.constants["max_ratio"] = inner.constants["max_ratio"];
        v.stability = inner.stability;
        v.pass = !inner.pass;  // the constructed violation must be detected
        v.notes = v.pass ? "violation detected" : "violation went undetected";
        return v;
    }
    if (req.name == "phi_harnack_negative_control") {
        const auto radii = checker_radii(ctx, p);
        auto base = check_phi_harnack(*ctx.gen, ctx.triple.phi, center, radii,
                                      HarnackCylinder{}, ctx.config.seed, threshold);
        auto bad = check_phi_harnack(*ctx.perturbed_gen, ctx.triple.phi, center, radii,
                                     HarnackCylinder{}, ctx.config.seed, 1e300);
        ConditionVerdict v;
        v.condition = req.name;
        v.seed = ctx.config.seed;
        v.per_scale = bad.per_scale;
        bool increasing = true;
        for (std::size_t i = 1; i < bad.per_scale.size(); ++i)
            increasing = increasing && bad.per_scale[i].second > bad.per_scale[i - 1].second;
        double base_band = 0.0;
        for (auto [r, ratio] : base.per_scale) base_band = std::max(base_band, ratio);
        const double margin = get_number(p, "margin", 1.0);
        v.constants["stable_band"] = base_band;
        v.constants["worst_ratio"] = bad.constants["worst_harnack_ratio"];
        v.stability = bad.stability;
        v.pass = increasing && bad.constants["worst_harnack_ratio"] > margin * base_band;
        v.notes = v.pass ? "harnack ratio grows beyond the stable band"
                         : "perturbed kernel stayed within the stable band";
        return v;
    }
    if (req.name == "diffusive_scale_construction") {
        ConditionVerdict v;
        v.condition = req.name;
        double corridor_lo = 1e300, corridor_hi = -1e300;
        double prev = 0.0;
        bool monotone = true, dominated = true;
        for (int q = -40; q <= 40; ++q) {
            const double r = std::pow(2.0, q / 4.0);
            const double value = induced_diffusive_scale(ctx.triple.phi_j, r);
            const double pj = ctx.triple.phi_j.eval(r);
            if (value > pj * (1.0 + 1e-9)) dominated = false;
            if (!(value > prev)) monotone = false;
            prev = value;
            if (r <= 1.0) {
                corridor_lo = std::min(corridor_lo, value / pj);
                corridor_hi = std::max(corridor_hi, value / pj);
            }
        }
        v.constants["small_scale_corridor"] = corridor_hi / corridor_lo;
        v.stability = corridor_hi / corridor_lo;
        v.pass = monotone && dominated && v.stability <= threshold;
        if (!monotone) v.notes = "constructed scale not strictly increasing";
        if (!dominated) v.notes += "constructed scale exceeds phi_j";
        return v;
    }
    if (req.name == "hk_corridor") {
        if (ctx.space.size() > ctx.config.caps.max_exact_points)
            throw ResourceCapError("hk_corridor: space above the exact-kernel cap");
        const auto times = get_grid(p, "times", ctx.config.times);
        std::vector<HeatKernelMatrix> exact;
        for (double t : times) {
            UniformizationOptions opt;
            opt.max_points = ctx.config.caps.max_exact_points;
            exact.push_back(exact_heat_kernel(*ctx.gen, t, opt));
        }
        if (p.contains("dump_dir")) {
            const auto dir = p.at("dump_dir").get<std::string>();
            std::filesystem::create_directories(dir);
            for (const auto& hk : exact) {
                std::ostringstream name;
                name << dir << "/p_t" << hk.time << ".hkm1";
                write_hkm1(hk.density, name.str() + ".tmp");
                std::filesystem::rename(name.str() + ".tmp", name.str());
            }
        }
        CorridorDomain domain;
        domain.center = center;
        domain.max_distance = get_number(p, "max_distance", ctx.space.diameter() / 4.0);
        auto vol = [&](double r) { return ctx.space.volume(center, r); };
        auto envelope = [&](double t, double d) {
            return hk_envelope(t, d, ctx.triple, ctx.constants, vol).upper;
        };
        CorridorOptions options;
        options.threshold = get_number(p, "threshold", 100.0);
        const auto report = fit_corridor(ctx.space, exact, envelope, domain, options);
        ConditionVerdict v;
        v.condition = req.name;
        v.constants = {{"c1", report.c1}, {"c2", report.c2}, {"c3", report.c3},
                       {"c4", report.c4}};
        v.stability = report.worst_ratio;
        v.pass = report.pass;
        v.notes = report.domain;
        return v;
    }
    throw ConfigError("unknown checker '" + req.name + "'");
}

bool checker_needs_generator(const std::string& name) {
    return name == "exit_scaling" || name == "faber_krahn" || name == "poincare" ||
           name == "phi_harnack" || name == "phi_harnack_negative_control" ||
           name == "hk_corridor";
}

} // namespace

// ---------------------------------------------------------------------------
// run + outputs

bool RunReport::all_pass() const {
    for (const auto& v : verdicts)
        if (!v.pass) return false;
    return !verdicts.empty();
}

nlohmann::json RunReport::summary_json() const {
    json doc;
    doc["experiment"] = experiment;
    doc["tool_version"] = tool_version;
    doc["config_hash"] = config_hash;
    doc["seed"] = seed;
    doc["space"] = space_info;
    json list = json::array();
    for (const auto& v : verdicts) list.push_back(v.to_json());
    doc["verdicts"] = list;
    doc["all_pass"] = all_pass();
    return doc;
}

RunReport run_experiment(const ExperimentConfig& config, int workers) {
    RunReport report;
    report.experiment = config.name;
    report.seed = config.seed;
    report.tool_version = kToolVersion;
    auto canonical = config.to_json();
    canonical.erase("output");
    report.config_hash = jklab::config_hash(canonical);

    const auto t0 = std::chrono::steady_clock::now();
    Context ctx(config);
    report.space_info = ctx.space.describe();
    // heuristic chain-condition stand-in, logged rather than asserted:
    // fraction of sampled pairs admitting an approximate midpoint
    report.space_info["midpoint_scan"] = midpoint_scan(ctx.space);
    report.space_info["midpoint_scan_note"] =
        "approximate-midpoint fraction over sampled pairs (z with max(d(x,z),d(z,y)) "
        "<= 0.75 d(x,y))";

    bool needs_gen = false, needs_perturbed = false;
    for (const auto& req : config.checkers) {
        needs_gen = needs_gen || checker_needs_generator(req.name);
        if (req.name == "ujs_negative_control" || req.name == "phi_harnack_negative_control") {
            needs_perturbed = true;
            ctx.perturbed_kernel = ctx.perturb(req.params);
        }
        if (req.name == "phi_harnack_negative_control") needs_gen = true;
    }
    if (ctx.space.size() > config.caps.max_points)
        throw ResourceCapError("space exceeds caps.max_points");
    if (needs_gen) ctx.gen = std::make_unique<Generator>(ctx.space, ctx.kernel);
    if (needs_perturbed && std::any_of(config.checkers.begin(), config.checkers.end(),
                                       [](const CheckerRequest& r) {
                                           return r.name == "phi_harnack_negative_control";
                                       }))
        ctx.perturbed_gen = std::make_unique<Generator>(ctx.space, ctx.perturbed_kernel);
    const auto t1 = std::chrono::steady_clock::now();
    report.stage_seconds.emplace_back("build", std::chrono::duration<double>(t1 - t0).count());

    const std::size_t n = config.checkers.size();
    std::vector<ConditionVerdict> verdicts(n);
    std::vector<double> seconds(n, 0.0);
    std::atomic<std::size_t> cursor{0};
    auto work = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            const auto start = std::chrono::steady_clock::now();
            try {
                verdicts[i] = run_one_checker(ctx, config.checkers[i]);
            } catch (const std::exception& e) {
                ConditionVerdict v;
                v.condition = config.checkers[i].name;
                v.pass = false;
                v.notes = std::string("error: ") + e.what();
                verdicts[i] = v;
            }
            seconds[i] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
    };
    const int pool = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    std::vector<std::thread> threads;
    for (int w = 0; w < pool; ++w) threads.emplace_back(work);
    for (auto& th : threads) th.join();

    // deterministic assembly: checker name order, independent of completion
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return config.checkers[a].name < config.checkers[b].name;
    });
    for (auto i : order) {
        report.verdicts.push_back(std::move(verdicts[i]));
        report.stage_seconds.emplace_back(config.checkers[i].name, seconds[i]);
    }
    return report;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out << contents;
        if (!out.flush()) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string config_hash(const nlohmann::json& canonical) {
    const std::string dump = canonical.dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_run_outputs(const RunReport& report, const ExperimentConfig& config,
                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    atomic_write_file(out_dir + "/summary.json", report.summary_json().dump(2) + "\n");

    nlohmann::json timings;
    for (auto [stage, sec] : report.stage_seconds) timings[stage] = sec;
    atomic_write_file(out_dir + "/timings.json", timings.dump(2) + "\n");

    for (const auto& v : report.verdicts) {
        std::ostringstream csv;
        csv << "scale,value\n";
        csv.precision(17);
        for (auto [scale, value] : v.per_scale) csv << scale << "," << value << "\n";
        atomic_write_file(out_dir + "/" + v.condition + ".csv", csv.str());
    }

    std::ostringstream all;
    all << "condition,worst_ratio,pass\n";
    all.precision(17);
    for (const auto& v : report.verdicts)
        all << v.condition << "," << v.stability << "," << (v.pass ? 1 : 0) << "\n";
    atomic_write_file(out_dir + "/verdicts.csv", all.str());
    (void)config;
}

void write_envelope_table(const ExperimentConfig& config, const std::string& csv_path) {
    Context ctx(config);
    auto vol = [&](double r) { return ctx.space.volume(0, r); };
    std::ostringstream csv;
    csv << "t,d,lower,upper,regime\n";
    csv.precision(17);
    for (double t : config.times)
        for (double d : config.radii) {
            const auto v = hk_envelope(t, d, ctx.triple, ctx.constants, vol);
            csv << t << "," << d << "," << v.lower << "," << v.upper << ","
                << regime_name(v.regime.regime) << "\n";
        }
    atomic_write_file(csv_path, csv.str());
}

// ---------------------------------------------------------------------------
// built-in experiments

namespace {

json scale_doc_power(std::vector<double> breaks, std::vector<double> exponents) {
    return {{"kind", "piecewise_power"}, {"breaks", breaks}, {"exponents", exponents}};
}

json builtin_example_1_1() {
    json doc;
    doc["experiment"] = "example_1_1";
    doc["space"] = {{"builder", "lattice_torus"}, {"dim", 1}, {"side", 512}, {"spacing", 1.0}};
    doc["kernel"] = {{"kind", "formula"}};
    doc["scales"] = {{"phi_j", scale_doc_power({1.0}, {1.0, 3.0})},
                     {"phi_c", scale_doc_power({}, {2.0})}};
    doc["checkers"] = json::array({
        json{{"name", "vd_rvd"}, {"radii", {2.0, 4.0, 8.0, 16.0, 32.0}}},
        json{{"name", "tail_integral"}, {"radii", {4.0, 8.0, 16.0, 32.0, 64.0}}},
        json{{"name", "exit_scaling"}, {"radii", {4.0, 8.0, 16.0, 32.0}}},
        json{{"name", "faber_krahn"}, {"radii", {4.0, 8.0, 16.0, 32.0}}},
        json{{"name", "poincare"}, {"radii", {4.0, 8.0, 16.0}}, {"kappa", 2.0}},
        json{{"name", "cutoff_energy"}, {"radii", {4.0, 8.0, 16.0, 32.0}}},
    });
    doc["times"] = {1.0, 4.0, 16.0};
    doc["radii"] = {4.0, 8.0, 16.0, 32.0};
    doc["seed"] = 1001;
    return doc;
}

json builtin_example_5_2() {
    json doc;
    doc["experiment"] = "example_5_2";
    doc["space"] = {{"builder", "lattice_torus"}, {"dim", 1}, {"side", 256}, {"spacing", 1.0}};
    doc["kernel"] = {{"kind", "formula"}};
    doc["scales"] = {{"phi_j", scale_doc_power({1.0}, {0.5, 2.0})},
                     {"phi_c", {{"constructor", "induced_diffusive"}}}};
    doc["checkers"] = json::array({
        json{{"name", "diffusive_scale_construction"}},
        json{{"name", "vd_rvd"}, {"radii", {2.0, 4.0, 8.0, 16.0}}},
        json{{"name", "tail_integral"}, {"radii", {4.0, 8.0, 16.0, 32.0}}},
    });
    doc["times"] = {1.0, 4.0};
    doc["radii"] = {4.0, 8.0, 16.0};
    doc["seed"] = 1001;
    return doc;
}

json builtin_example_5_3() {
    json doc;
    doc["experiment"] = "example_5_3_ujs_phi";
    doc["space"] = {{"builder", "lattice_torus"}, {"dim", 1}, {"side", 1024}, {"spacing", 1.0}};
    doc["kernel"] = {{"kind", "formula"}};
    doc["scales"] = {{"phi_j", scale_doc_power({1.0}, {1.0, 3.0})},
                     {"phi_c", scale_doc_power({}, {2.0})}};
    doc["checkers"] = json::array({
        json{{"name", "ujs"}, {"radii", {0.0, 1.0, 2.0, 4.0, 8.0}}},
        json{{"name", "phi_harnack"}, {"radii", {4.0, 8.0, 16.0}}},
        json{{"name", "ujs_negative_control"},
             {"radii", {0.0, 1.0, 2.0, 4.0, 8.0}},
             {"period", 64},
             {"epsilon", 0.0},
             {"min_distance", 8.0}},
        json{{"name", "phi_harnack_negative_control"},
             {"radii", {4.0, 8.0, 16.0}},
             {"period", 64},
             {"epsilon", 0.0},
             {"min_distance", 8.0}},
    });
    doc["times"] = {1.0, 4.0};
    doc["radii"] = {4.0, 8.0, 16.0};
    doc["seed"] = 1001;
    return doc;
}

} // namespace

std::vector<std::pair<std::string, std::string>> list_experiments() {
    return {
        {"example_1_1",
         "two-regime subordinate-type kernel on a 1-d torus (example 1.1 parameters); "
         "core condition suite"},
        {"example_5_2",
         "induced diffusive scale construction for a light-tail kernel (example 5.2 "
         "parameters)"},
        {"example_5_3_ujs_phi",
         "harnack/ujs coupling with a constructed violation (example 5.3 parameters)"},
    };
}

nlohmann::json builtin_experiment(const std::string& name) {
    if (name == "example_1_1") return builtin_example_1_1();
    if (name == "example_5_2") return builtin_example_5_2();
    if (name == "example_5_3_ujs_phi") return builtin_example_5_3();
    throw ConfigError("unknown experiment '" + name + "'");
}

} // namespace jklab
