#include <iostream>

#include "CLI11.hpp"
#include "emlab/experiments.hpp"

using namespace emlab;

namespace {

Json diagnose(const IterateTrace& tr) {
    Json j;
    const Classification c = classify_run(tr);
    j["rows"] = tr.size();
    j["verdict"] = to_string(c.verdict);
    j["verdict_ambiguous"] = c.ambiguous;
    j["verdict_reason"] = c.reason;
    const Vec sums = cauchy_sums(tr, tr.P);
    j["cauchy_total"] = sums.empty() ? 0.0 : sums.front();
    j["cauchy_tail_share"] = tail_share(sums);
    try {
        const RateFit rf = fit_rate(tr, tr.P, tr.back().x);
        j["rate_fit"] = {{"kind", to_string(rf.kind)}, {"param", json_number(rf.param)}, {"r2", json_number(rf.r2)}};
    } catch (const InsufficientDataError& e) {
        j["rate_fit"] = {{"kind", "none"}, {"note", e.what()}};
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emlab: EM as a KL-proximal method, experiment runner and diagnostics"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "list built-in experiments");

    auto* run = app.add_subcommand("run", "run an experiment and write trace.csv + summary.json");
    std::string experiment, config_path, out_dir;
    bool quiet = false;
    run->add_option("experiment", experiment, "experiment name (see `emlab list`)")->required();
    run->add_option("--config", config_path, "JSON config; defaults are used when omitted")->check(CLI::ExistingFile);
    run->add_option("--out-dir", out_dir, "output directory (default: out/<experiment>)");
    run->add_flag("--quiet", quiet, "do not print the summary");

    auto* diag = app.add_subcommand("diagnose", "classify a previously written trace.csv");
    std::string trace_path;
    diag->add_option("--trace", trace_path, "trace.csv to analyze")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list) {
            for (const auto& n : experiment_names()) std::cout << n << '\n';
            return 0;
        }
        if (*run) {
            const Json cfg = config_path.empty() ? Json::object() : load_config(config_path);
            const ExperimentResult r = run_experiment(experiment, cfg);
            const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("out") / experiment : std::filesystem::path(out_dir);
            write_outputs(r, dir);
            if (!quiet) std::cout << summary_json(r).dump(2) << '\n';
            return 0;
        }
        if (*diag) {
            std::cout << diagnose(read_trace_csv(trace_path)).dump(2) << '\n';
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
