#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "decgnn/decgnn.h"

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    std::vector<std::string> overrides;
    int threads = 0;
    bool print_config = false;
};

int fail(dg_session* s, dg_status st) {
    std::cerr << "error: " << dg_last_error(s) << "\n";
    return static_cast<int>(st);
}

int run(const std::string& stage, const Options& opt) {
    dg_session* raw = nullptr;
    if (dg_session_create(&raw) != DG_OK) {
        std::cerr << "error: cannot create session\n";
        return DG_ERR_INTERNAL;
    }
    std::unique_ptr<dg_session, decltype(&dg_session_destroy)> s(raw, dg_session_destroy);
    dg_status st = DG_OK;
    if (!opt.config_path.empty() && (st = dg_load_config(raw, opt.config_path.c_str())) != DG_OK) return fail(raw, st);
    for (const auto& kv : opt.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
            return DG_ERR_CONFIG;
        }
        if ((st = dg_set_option(raw, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != DG_OK)
            return fail(raw, st);
    }
    if (!opt.output_dir.empty() && (st = dg_set_output_dir(raw, opt.output_dir.c_str())) != DG_OK)
        return fail(raw, st);
    if (opt.threads > 0 &&
        (st = dg_set_option(raw, "execution.threads", std::to_string(opt.threads).c_str())) != DG_OK)
        return fail(raw, st);
    if (opt.seed && (st = dg_set_seed(raw, *opt.seed)) != DG_OK) return fail(raw, st);
    if (opt.print_config) {
        std::cout << dg_config_json(raw) << "\n";
        return DG_OK;
    }
    st = dg_run_stage(raw, stage.c_str());
    const std::string warnings = dg_last_warnings(raw);
    if (!warnings.empty()) std::cerr << "warnings:\n" << warnings;
    if (st != DG_OK) return fail(raw, st);
    std::cerr << stage << ": done\n";
    return DG_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drug clustering and drug-disease link prediction pipeline"};
    app.set_version_flag("--version", std::string(dg_version()));
    app.require_subcommand(1);

    Options opt;
    const std::vector<std::pair<std::string, std::string>> stages{
        {"synth", "Generate the planted synthetic dataset"},
        {"preprocess", "Filter, impute and normalize the feature table"},
        {"train-ae", "Train the autoencoder over the learning-rate grid"},
        {"cluster", "Sweep k and run deep embedded clustering"},
        {"train-gnn", "Train one link predictor per cluster"},
        {"grid", "One-at-a-time hyperparameter grid on the largest cluster"},
        {"predict", "Score and rank novel drug-disease links"},
        {"run-all", "Run every stage in order"}};
    std::string chosen;
    for (const auto& [name, help] : stages) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "Override master_seed");
        sub->add_option("-o,--output-dir", opt.output_dir, "Override paths.output_dir");
        sub->add_option("--set", opt.overrides, "Override a config key, e.g. gnn.lr=0.01");
        sub->add_option("-j,--threads", opt.threads, "Override execution.threads")->check(CLI::PositiveNumber);
        sub->add_flag("--print-config", opt.print_config, "Print the effective config and exit");
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : DG_ERR_CONFIG;
    }
    return run(chosen, opt);
}
