#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "builder.hpp"
#include "core.hpp"
#include "estimator.hpp"
#include "io.hpp"
#include "simulator.hpp"

namespace hybridloc {

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

// Nearest-rank percentile: the ceil(p*N)-th order statistic, 1-indexed.
inline double percentile_nearest_rank(const std::vector<double>& sorted_values, double p) {
    if (sorted_values.empty()) throw InvalidArgument("percentile of an empty sample");
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("percentile p must be in (0, 1]");
    std::size_t n = sorted_values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted_values[rank - 1];
}

struct ErrorReport {
    double p25 = 0.0, p50 = 0.0, p75 = 0.0, p90 = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
    std::vector<double> errors; // sorted per-scan errors, meters
};

inline ErrorReport make_report(std::vector<double> errors) {
    if (errors.empty()) throw InvalidArgument("no evaluated scans to report on");
    std::sort(errors.begin(), errors.end());
    ErrorReport r;
    r.count = errors.size();
    r.mean = std::accumulate(errors.begin(), errors.end(), 0.0) /
             static_cast<double>(errors.size());
    r.p25 = percentile_nearest_rank(errors, 0.25);
    r.p50 = percentile_nearest_rank(errors, 0.50);
    r.p75 = percentile_nearest_rank(errors, 0.75);
    r.p90 = percentile_nearest_rank(errors, 0.90);
    r.errors = std::move(errors);
    return r;
}

// ---------------------------------------------------------------------------
// Experiment pipeline
// ---------------------------------------------------------------------------

inline FingerprintDb build_fingerprint(const ExperimentConfig& cfg,
                                       const std::vector<TaggedScan>& training) {
    BuilderConfig bc;
    bc.grid = cfg.grid();
    bc.strategy = cfg.strategy;
    bc.sigma_floor = cfg.sigma_floor;
    bc.min_cell_weight = cfg.min_cell_weight;
    bc.train_offset_correction = cfg.train_offset_correction;
    FingerprintBuilder builder(bc);
    builder.ingest(training, cfg.train_device.device_id);
    return builder.finalize();
}

// Simulate training -> build -> simulate test -> track -> per-scan Euclidean
// error. Gap outputs (no AP overlap) are excluded from the report.
inline ErrorReport run_experiment(const ExperimentConfig& cfg) {
    try {
        auto training = simulate_training(cfg);
        FingerprintDb db = build_fingerprint(cfg, training);
        auto test = simulate_test(cfg);
        Tracker tracker(db, cfg.tracker);
        std::vector<double> errors;
        errors.reserve(test.size());
        for (const auto& sample : test)
            if (auto est = tracker.step(sample.wifi))
                errors.push_back(distance(*est, sample.true_location));
        return make_report(std::move(errors));
    } catch (const EmptyFingerprint& e) {
        throw EmptyFingerprint("seed " + std::to_string(cfg.seed) + ", strategy " +
                               to_string(cfg.strategy) + ", cell_size " +
                               std::to_string(cfg.cell_size) + ": " + e.what());
    }
}

// The manual site-survey reference: the identical pipeline fed exact labels
// (zero oracle noise, zero confidence radius, enclosing-cell assignment).
inline ExperimentConfig manual_baseline_config(ExperimentConfig cfg) {
    cfg.oracle.loc_noise_sigma = 0.0;
    cfg.oracle.min_confidence = 0.0;
    cfg.strategy = AssignmentStrategy::location_only;
    return cfg;
}

// Errors pooled over replicate runs with seeds base.seed + 0 .. n - 1.
inline std::vector<double> pooled_errors(const ExperimentConfig& base, int n_replicates) {
    if (n_replicates < 1) throw InvalidArgument("need at least one replicate");
    std::vector<double> all;
    for (int i = 0; i < n_replicates; ++i) {
        ExperimentConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(i);
        ErrorReport r = run_experiment(cfg);
        all.insert(all.end(), r.errors.begin(), r.errors.end());
    }
    return all;
}

inline ErrorReport pooled_report(const ExperimentConfig& base, int n_replicates) {
    return make_report(pooled_errors(base, n_replicates));
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

struct Sweep {
    std::string parameter;
    std::vector<std::string> values;
    std::vector<ErrorReport> reports; // one per value
};

namespace detail {

inline double parse_double_arg(const std::string& v, const std::string& what) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw InvalidArgument("bad " + what + ": " + v);
    }
    if (pos != v.size()) throw InvalidArgument("bad " + what + ": " + v);
    return out;
}

inline long parse_long_arg(const std::string& v, const std::string& what) {
    std::size_t pos = 0;
    long out = 0;
    try {
        out = std::stol(v, &pos);
    } catch (const std::exception&) {
        throw InvalidArgument("bad " + what + ": " + v);
    }
    if (pos != v.size()) throw InvalidArgument("bad " + what + ": " + v);
    return out;
}

} // namespace detail

inline RepresentativeMode parse_representative_mode(const std::string& s) {
    if (s == "geometric_center") return RepresentativeMode::geometric_center;
    if (s == "mass_centroid") return RepresentativeMode::mass_centroid;
    throw InvalidArgument("unknown representative mode: " + s);
}

inline LambdaMode parse_lambda_mode(const std::string& s) {
    if (s == "per_cell") return LambdaMode::per_cell;
    if (s == "global") return LambdaMode::global;
    throw InvalidArgument("unknown lambda mode: " + s);
}

// Applies one swept value to a config copy.
inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& parameter,
                              const std::string& value) {
    if (parameter == "cell_size")
        cfg.cell_size = detail::parse_double_arg(value, "cell_size");
    else if (parameter == "n_training")
        cfg.n_training = static_cast<int>(detail::parse_long_arg(value, "n_training"));
    else if (parameter == "window_k")
        cfg.tracker.window_k = static_cast<int>(detail::parse_long_arg(value, "window_k"));
    else if (parameter == "strategy")
        cfg.strategy = parse_strategy(value);
    else if (parameter == "loc_noise_sigma")
        cfg.oracle.loc_noise_sigma = detail::parse_double_arg(value, "loc_noise_sigma");
    else if (parameter == "device_offset")
        cfg.test_device.rss_offset = detail::parse_double_arg(value, "device_offset");
    else if (parameter == "representative_mode")
        cfg.tracker.representative_mode = parse_representative_mode(value);
    else
        throw InvalidArgument("unknown sweep parameter: " + parameter);
}

// Every sweep value runs the same replicate seed schedule, so values differ
// only in the swept parameter.
inline Sweep run_sweep(const ExperimentConfig& base, const std::string& parameter,
                       const std::vector<std::string>& values, int n_replicates = 5) {
    if (values.empty()) throw InvalidArgument("sweep needs at least one value");
    Sweep sw;
    sw.parameter = parameter;
    sw.values = values;
    sw.reports.reserve(values.size());
    for (const auto& v : values) {
        ExperimentConfig cfg = base;
        apply_sweep_value(cfg, parameter, v);
        sw.reports.push_back(pooled_report(cfg, n_replicates));
    }
    return sw;
}

// Manual site-survey baseline vs the three crowdsourced assignment variants,
// all on identical seeds and scans.
inline std::vector<std::pair<std::string, ErrorReport>> run_compare_baseline(
    const ExperimentConfig& base, int n_replicates = 5) {
    std::vector<std::pair<std::string, ErrorReport>> rows;
    rows.emplace_back("manual_baseline",
                      pooled_report(manual_baseline_config(base), n_replicates));
    for (auto strategy : {AssignmentStrategy::location_only,
                          AssignmentStrategy::unweighted_confidence,
                          AssignmentStrategy::weighted_confidence}) {
        ExperimentConfig cfg = base;
        cfg.strategy = strategy;
        rows.emplace_back(to_string(strategy), pooled_report(cfg, n_replicates));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV reports
// ---------------------------------------------------------------------------

inline std::string render_report_row(const std::string& param_value, const ErrorReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%.12g,%.12g,%.12g,%zu\n",
                  param_value.c_str(), r.p25, r.p50, r.p75, r.p90, r.mean, r.count);
    return buf;
}

inline std::string render_report_csv(
    const std::vector<std::pair<std::string, ErrorReport>>& rows) {
    std::string out = "param_value,p25,p50,p75,p90,mean,count\n";
    for (const auto& [value, report] : rows) out += render_report_row(value, report);
    return out;
}

inline std::string render_sweep_csv(const Sweep& sw) {
    std::vector<std::pair<std::string, ErrorReport>> rows;
    rows.reserve(sw.values.size());
    for (std::size_t i = 0; i < sw.values.size(); ++i)
        rows.emplace_back(sw.values[i], sw.reports[i]);
    return render_report_csv(rows);
}

// ---------------------------------------------------------------------------
// Key-value config files
// ---------------------------------------------------------------------------
// Plain text, one `key = value` per line, '#' starts a comment. Keys mirror
// ExperimentConfig fields; `ap`/`beacon` keys may repeat and replace the
// default transmitter layout.

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_bool_arg(const std::string& v, const std::string& what) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw InvalidArgument("bad " + what + ": " + v);
}

inline Transmitter parse_transmitter(const std::string& v, const std::string& what) {
    std::istringstream is(v);
    Transmitter t;
    if (!(is >> t.id >> t.position.x >> t.position.y >> t.tx_power_dbm))
        throw InvalidArgument("bad " + what + " (want: <id> <x> <y> <tx_dbm>): " + v);
    std::string extra;
    if (is >> extra) throw InvalidArgument("bad " + what + " (trailing tokens): " + v);
    return t;
}

} // namespace detail

// Applies one scalar key. Area keys re-derive the default transmitter layout;
// explicit ap/beacon entries (handled by parse_config) replace it afterwards.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::parse_bool_arg;
    using detail::parse_double_arg;
    using detail::parse_long_arg;
    if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(parse_long_arg(value, key));
    else if (key == "cell_size")
        cfg.cell_size = parse_double_arg(value, key);
    else if (key == "n_training")
        cfg.n_training = static_cast<int>(parse_long_arg(value, key));
    else if (key == "n_test")
        cfg.n_test = static_cast<int>(parse_long_arg(value, key));
    else if (key == "strategy")
        cfg.strategy = parse_strategy(value);
    else if (key == "sigma_floor")
        cfg.sigma_floor = parse_double_arg(value, key);
    else if (key == "min_cell_weight")
        cfg.min_cell_weight = parse_double_arg(value, key);
    else if (key == "train_offset_correction")
        cfg.train_offset_correction = parse_bool_arg(value, key);
    else if (key == "window_k")
        cfg.tracker.window_k = static_cast<int>(parse_long_arg(value, key));
    else if (key == "offset_correction")
        cfg.tracker.offset_correction = parse_bool_arg(value, key);
    else if (key == "spatial_com")
        cfg.tracker.spatial_com = parse_bool_arg(value, key);
    else if (key == "representative_mode")
        cfg.tracker.representative_mode = parse_representative_mode(value);
    else if (key == "lambda_mode")
        cfg.tracker.lambda_mode = parse_lambda_mode(value);
    else if (key == "loc_noise_sigma")
        cfg.oracle.loc_noise_sigma = parse_double_arg(value, key);
    else if (key == "confidence_factor")
        cfg.oracle.confidence_factor = parse_double_arg(value, key);
    else if (key == "min_confidence")
        cfg.oracle.min_confidence = parse_double_arg(value, key);
    else if (key == "train_offset")
        cfg.train_device.rss_offset = parse_double_arg(value, key);
    else if (key == "test_offset")
        cfg.test_device.rss_offset = parse_double_arg(value, key);
    else if (key == "train_quantize")
        cfg.train_device.quantize = parse_bool_arg(value, key);
    else if (key == "test_quantize")
        cfg.test_device.quantize = parse_bool_arg(value, key);
    else if (key == "env_width") {
        cfg.env.area.hi.x = cfg.env.area.lo.x + parse_double_arg(value, key);
        populate_default_transmitters(cfg.env);
    } else if (key == "env_height") {
        cfg.env.area.hi.y = cfg.env.area.lo.y + parse_double_arg(value, key);
        populate_default_transmitters(cfg.env);
    } else if (key == "pl0")
        cfg.env.pathloss.pl0_db = parse_double_arg(value, key);
    else if (key == "ref_distance")
        cfg.env.pathloss.ref_distance = parse_double_arg(value, key);
    else if (key == "path_loss_exponent")
        cfg.env.pathloss.exponent = parse_double_arg(value, key);
    else if (key == "shadowing_sigma")
        cfg.env.pathloss.shadowing_sigma = parse_double_arg(value, key);
    else if (key == "sensitivity")
        cfg.env.sensitivity_dbm = parse_double_arg(value, key);
    else if (key == "train_trajectory")
        cfg.train_trajectory.kind = parse_trajectory_kind(value);
    else if (key == "test_trajectory")
        cfg.test_trajectory.kind = parse_trajectory_kind(value);
    else if (key == "speed") {
        double v = parse_double_arg(value, key);
        cfg.train_trajectory.speed_mps = v;
        cfg.test_trajectory.speed_mps = v;
    } else if (key == "sample_period") {
        double v = parse_double_arg(value, key);
        cfg.train_trajectory.sample_period_s = v;
        cfg.test_trajectory.sample_period_s = v;
    } else if (key == "sweep_spacing") {
        double v = parse_double_arg(value, key);
        cfg.train_trajectory.sweep_spacing = v;
        cfg.test_trajectory.sweep_spacing = v;
    } else if (key == "test_start_x")
        cfg.test_trajectory.start.x = parse_double_arg(value, key);
    else if (key == "test_start_y")
        cfg.test_trajectory.start.y = parse_double_arg(value, key);
    else
        throw InvalidArgument("unknown config key: " + key);
}

inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::vector<Transmitter> aps, beacons;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line " + std::to_string(lineno) +
                                  " is not key = value: " + line);
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InvalidArgument("config line " + std::to_string(lineno) +
                                  " is not key = value: " + line);
        if (key == "ap")
            aps.push_back(detail::parse_transmitter(value, "ap"));
        else if (key == "beacon")
            beacons.push_back(detail::parse_transmitter(value, "beacon"));
        else
            apply_config_entry(cfg, key, value);
    }
    if (!aps.empty()) cfg.env.aps = aps;
    if (!beacons.empty()) cfg.env.beacons = beacons;
    validate(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    return parse_config(f);
}

} // namespace hybridloc
