// Command-line front end: dataset simulation, fingerprint construction,
// tracking, and the experiment/sweep/baseline reporters.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridloc/hybridloc.hpp"

namespace {

using namespace hybridloc;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::vector<std::string> overrides; // key=value pairs
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
    for (const auto& kv : opts.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == kv.size())
            throw InvalidArgument("--set expects key=value, got: " + kv);
        apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed) cfg.seed = *opts.seed;
    validate(cfg);
    return cfg;
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot open for writing: " + out_path);
    f << text;
    if (!f) throw IoError("write failure: " + out_path);
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool seed_required) {
    cmd->add_option("--config", opts.config_path, "key = value config file");
    auto* seed = cmd->add_option("--seed", opts.seed, "base RNG seed");
    if (seed_required) seed->required();
    cmd->add_option("--out", opts.out_path, "output path (default: stdout)");
    cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw InvalidArgument("empty value list");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crowdsourced WiFi fingerprint localization toolkit"};
    app.require_subcommand(1);

    CommonOpts sim_opts;
    std::string sim_phase = "training";
    auto* sim = app.add_subcommand("simulate", "generate a scan dataset as CSV");
    add_common(sim, sim_opts, false);
    sim->add_option("--phase", sim_phase, "training or test")
        ->check(CLI::IsMember({"training", "test"}));

    CommonOpts build_opts;
    auto* build = app.add_subcommand("build", "simulate training data and save a fingerprint");
    add_common(build, build_opts, false);

    CommonOpts track_opts;
    std::string track_db, track_scans;
    auto* track_cmd = app.add_subcommand("track", "locate each scan of a CSV stream");
    track_cmd->add_option("--db", track_db, "fingerprint file")->required();
    track_cmd->add_option("--scans", track_scans, "scan CSV (timestamp,ap_id,rss)")->required();
    add_common(track_cmd, track_opts, false);

    CommonOpts exp_opts;
    auto* exp = app.add_subcommand("experiment", "run one experiment, report error percentiles");
    add_common(exp, exp_opts, true);

    CommonOpts sweep_opts;
    std::string sweep_param, sweep_values;
    int sweep_replicates = 5;
    auto* sweep = app.add_subcommand("sweep", "sweep one parameter over a value list");
    add_common(sweep, sweep_opts, true);
    sweep->add_option("--param", sweep_param, "parameter to sweep")->required();
    sweep->add_option("--values", sweep_values, "comma-separated value list")->required();
    sweep->add_option("--replicates", sweep_replicates, "seeds per value (seed..seed+n-1)");

    CommonOpts cmp_opts;
    int cmp_replicates = 5;
    auto* cmp = app.add_subcommand("compare-baseline",
                                   "manual site-survey baseline vs assignment strategies");
    add_common(cmp, cmp_opts, false);
    cmp->add_option("--replicates", cmp_replicates, "seeds per variant (seed..seed+n-1)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            ExperimentConfig cfg = resolve_config(sim_opts);
            std::vector<WifiScan> scans;
            if (sim_phase == "training") {
                for (auto& ts : simulate_training(cfg)) scans.push_back(std::move(ts.wifi));
            } else {
                for (auto& ts : simulate_test(cfg)) scans.push_back(std::move(ts.wifi));
            }
            std::ostringstream os;
            write_scan_csv(scans, os);
            write_output(os.str(), sim_opts.out_path);
        } else if (build->parsed()) {
            ExperimentConfig cfg = resolve_config(build_opts);
            if (build_opts.out_path.empty())
                throw InvalidArgument("build requires --out <fingerprint path>");
            FingerprintDb db = build_fingerprint(cfg, simulate_training(cfg));
            save_db(db, build_opts.out_path);
        } else if (track_cmd->parsed()) {
            ExperimentConfig cfg = resolve_config(track_opts);
            FingerprintDb db = load_db(track_db);
            std::ifstream f(track_scans);
            if (!f) throw IoError("cannot open for reading: " + track_scans);
            auto scans = read_scan_csv(f);
            auto locations = track(scans, db, cfg.tracker);
            std::ostringstream os;
            write_track_csv(scans, locations, os);
            write_output(os.str(), track_opts.out_path);
        } else if (exp->parsed()) {
            ExperimentConfig cfg = resolve_config(exp_opts);
            ErrorReport report = run_experiment(cfg);
            write_output(render_report_csv({{to_string(cfg.strategy), report}}),
                         exp_opts.out_path);
        } else if (sweep->parsed()) {
            ExperimentConfig cfg = resolve_config(sweep_opts);
            Sweep sw = run_sweep(cfg, sweep_param, split_csv_list(sweep_values),
                                 sweep_replicates);
            write_output(render_sweep_csv(sw), sweep_opts.out_path);
        } else if (cmp->parsed()) {
            ExperimentConfig cfg = resolve_config(cmp_opts);
            write_output(render_report_csv(run_compare_baseline(cfg, cmp_replicates)),
                         cmp_opts.out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "ERROR " << e.what() << "\n";
        return 1;
    }
    return 0;
}
