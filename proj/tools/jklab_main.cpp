#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "jklab/experiment.hpp"

namespace {

constexpr int kExitAllPass = 0;
constexpr int kExitCheckerFail = 1;
constexpr int kExitConfigInvalid = 2;
constexpr int kExitResourceCap = 3;

nlohmann::json load_config_doc(const std::string& ref) {
    for (const auto& [name, desc] : jklab::list_experiments())
        if (name == ref) return jklab::builtin_experiment(name);
    std::ifstream in(ref);
    if (!in) throw jklab::ConfigError("unknown experiment or unreadable config: " + ref);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw jklab::ConfigError(std::string("config parse error: ") + e.what());
    }
    return doc;
}

jklab::ExperimentConfig resolve_config(const std::string& ref, std::optional<std::uint64_t> seed,
                                       const std::string& out_override) {
    auto doc = load_config_doc(ref);
    // seed precedence: flag > JKLAB_SEED > config
    if (!seed) {
        if (const char* env = std::getenv("JKLAB_SEED")) {
            try {
                seed = std::stoull(env);
            } catch (...) {
                throw jklab::ConfigError("JKLAB_SEED is not an integer");
            }
        }
    }
    if (seed) doc["seed"] = *seed;
    auto cfg = jklab::ExperimentConfig::from_json(doc);
    if (!out_override.empty()) cfg.output_dir = out_override;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"jklab: simulation and verification lab for symmetric jump processes"};
    app.require_subcommand(1);

    std::string config_ref, out_dir;
    std::optional<std::uint64_t> seed;
    int workers = 2;

    auto* run = app.add_subcommand("run", "run an experiment from a config file or by name");
    run->add_option("config", config_ref, "config path or built-in experiment name")->required();
    auto* envelope =
        app.add_subcommand("envelope", "emit the envelope table (t,d,lower,upper,regime)");
    envelope->add_option("config", config_ref, "config path or built-in experiment name")
        ->required();
    auto* list = app.add_subcommand("list", "list built-in experiments");

    for (auto* cmd : {run, envelope}) {
        cmd->add_option("--seed", seed, "seed override (beats JKLAB_SEED and the config)");
        cmd->add_option("--workers", workers, "concurrent checker workers");
        cmd->add_option("--out", out_dir, "output directory override");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& [name, desc] : jklab::list_experiments())
                std::cout << name << " - " << desc << "\n";
            return kExitAllPass;
        }
        const auto cfg = resolve_config(config_ref, seed, out_dir);
        if (envelope->parsed()) {
            const std::string path = cfg.output_dir + "/envelope.csv";
            jklab::write_envelope_table(cfg, path);
            std::cout << "wrote " << path << "\n";
            return kExitAllPass;
        }
        const auto report = jklab::run_experiment(cfg, workers);
        jklab::write_run_outputs(report, cfg, cfg.output_dir);
        for (const auto& v : report.verdicts)
            std::cout << (v.pass ? "[pass] " : "[FAIL] ") << v.condition
                      << " worst_ratio=" << v.stability
                      << (v.notes.empty() ? "" : "  " + v.notes) << "\n";
        std::cout << "summary: " << cfg.output_dir << "/summary.json\n";
        return report.all_pass() ? kExitAllPass : kExitCheckerFail;
    } catch (const jklab::ResourceCapError& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return kExitResourceCap;
    } catch (const jklab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckerFail;
    }
}
