// cfdsim command line: scenario runner for renewable cash-flow simulation
// under long-term contracts and the associated project-finance equilibrium.
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 solver failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfdsim/scenario.hpp"
#include "cfdsim/version.hpp"

namespace {

cfdsim::ScenarioConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                                   const std::string& output_root) {
    cfdsim::ScenarioConfig cfg = cfdsim::load_scenario_config(path);
    if (seed) cfg.seed = *seed;
    if (!output_root.empty()) cfg.output_dir = output_root;
    return cfg;
}

void print_files(const std::vector<std::filesystem::path>& files) {
    for (const auto& f : files) std::printf("  %s\n", f.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Renewable contract cash-flow and project-finance simulator"};
    app.set_version_flag("--version", std::string(cfdsim::kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string output_root;
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "scenario config (JSON)")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--output-root", output_root,
                        "override the output directory (also: CFDSIM_OUTPUT_ROOT)");
    };

    CLI::App* run = app.add_subcommand("run", "run the scenario and write report tables");
    add_common(run);
    CLI::App* grid = app.add_subcommand("grid", "run the (capex, opex) sensitivity grid");
    add_common(grid);
    CLI::App* synth = app.add_subcommand("synth", "export the synthetic dataset as CSV");
    add_common(synth);
    CLI::App* validate = app.add_subcommand("validate", "parse and check a scenario config");
    add_common(validate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = load_config(config_path, seed, output_root);
            const auto out = cfdsim::run_scenario(cfg);
            std::printf("scenario '%s' (config %s, seed %llu) written to %s\n", cfg.name.c_str(),
                        out.manifest.config_hash.c_str(),
                        static_cast<unsigned long long>(cfg.seed), out.dir.string().c_str());
            print_files(out.files);
        } else if (grid->parsed()) {
            const auto cfg = load_config(config_path, seed, output_root);
            const auto out = cfdsim::sensitivity_grid(cfg);
            std::printf("grid for '%s': %zu cell rows written to %s\n", cfg.name.c_str(),
                        out.cells.size(), out.dir.string().c_str());
            print_files(out.files);
        } else if (synth->parsed()) {
            const auto cfg = load_config(config_path, seed, output_root);
            const auto out = cfdsim::export_synthetic_dataset(cfg);
            std::printf("synthetic dataset for '%s' written to %s\n", cfg.name.c_str(),
                        out.dir.string().c_str());
            print_files(out.files);
        } else if (validate->parsed()) {
            const auto cfg = load_config(config_path, seed, output_root);
            if (cfg.data.source == cfdsim::DataConfig::Source::Csv) {
                for (const auto& p : cfg.data.parks) {
                    if (!std::filesystem::exists(p.csv)) {
                        throw cfdsim::ConfigError("park csv missing: " + p.csv.string());
                    }
                }
                if (!std::filesystem::exists(cfg.data.price_csv)) {
                    throw cfdsim::ConfigError("price csv missing: " + cfg.data.price_csv.string());
                }
                if (!std::filesystem::exists(cfg.data.fleet_csv)) {
                    throw cfdsim::ConfigError("fleet csv missing: " + cfg.data.fleet_csv.string());
                }
            }
            std::printf("config ok: scenario '%s', %zu contracts, hash %s\n", cfg.name.c_str(),
                        cfg.contracts.size(), cfdsim::config_hash(cfg).c_str());
        }
    } catch (const cfdsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const cfdsim::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const cfdsim::SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
