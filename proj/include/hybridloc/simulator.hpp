#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "builder.hpp"
#include "core.hpp"
#include "rng.hpp"

namespace hybridloc {

// ---------------------------------------------------------------------------
// World description
// ---------------------------------------------------------------------------

struct Transmitter {
    std::string id;
    Point2 position;
    double tx_power_dbm = 0.0;
};

// Log-distance path loss with Gaussian shadowing.
struct PathLossParams {
    double pl0_db = 40.0;        // loss at the reference distance
    double ref_distance = 1.0;   // meters
    double exponent = 3.0;
    double shadowing_sigma = 4.0; // dB
};

struct Environment {
    Rect area{{0.0, 0.0}, {37.0, 17.0}};
    std::vector<Transmitter> aps;
    std::vector<Transmitter> beacons; // deployment description; the ground-truth
                                      // oracle abstracts their positioning output
    PathLossParams pathloss;
    double sensitivity_dbm = -88.0;   // readings below this are not heard
};

inline void validate(const Environment& env) {
    if (!(env.area.width() > 0.0 && env.area.height() > 0.0))
        throw InvalidArgument("environment area must have positive extent");
    if (!(env.pathloss.exponent > 0.0)) throw InvalidArgument("path loss exponent must be > 0");
    if (!(env.pathloss.ref_distance > 0.0)) throw InvalidArgument("reference distance must be > 0");
    if (env.pathloss.shadowing_sigma < 0.0) throw InvalidArgument("shadowing sigma must be >= 0");
    if (env.aps.empty()) throw InvalidArgument("environment needs at least one AP");
    for (const auto& t : env.aps)
        if (!env.area.contains(t.position))
            throw InvalidArgument("AP " + t.id + " outside the area");
    for (const auto& t : env.beacons)
        if (!env.area.contains(t.position))
            throw InvalidArgument("beacon " + t.id + " outside the area");
}

struct DeviceProfile {
    std::string device_id = "default";
    double rss_offset = 0.0; // dB, constant additive hardware offset
    bool quantize = false;   // round reported RSS to whole dB
};

inline void validate(const DeviceProfile& d) {
    if (std::abs(d.rss_offset) > 30.0)
        throw InvalidArgument("device offset magnitude above 30 dB");
}

struct BleOracleParams {
    double loc_noise_sigma = 2.0;    // meters, per-axis Gaussian error
    double confidence_factor = 1.25; // confidence radius = factor * sigma
    double min_confidence = 0.5;     // meters, radius floor
};

inline void validate(const BleOracleParams& p) {
    if (p.loc_noise_sigma < 0.0) throw InvalidArgument("oracle noise sigma must be >= 0");
    if (!(p.confidence_factor > 0.0)) throw InvalidArgument("confidence factor must be > 0");
    if (p.min_confidence < 0.0) throw InvalidArgument("min confidence must be >= 0");
}

// Four strong same-floor APs plus twelve weak overheard ones, with twenty
// beacons on a uniform lattice, placed at fixed fractions of the area.
inline void populate_default_transmitters(Environment& env) {
    env.aps.clear();
    env.beacons.clear();
    double w = env.area.width(), h = env.area.height();
    for (int i = 0; i < 4; ++i) {
        double x = w * (i % 2 == 0 ? 0.25 : 0.75);
        double y = h * (i < 2 ? 0.25 : 0.75);
        env.aps.push_back({"ap_s" + std::to_string(i), {x, y}, 12.0});
    }
    int widx = 0;
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 4; ++i) {
            double x = w * (2 * i + 1) / 8.0;
            double y = h * (2 * j + 1) / 6.0;
            char id[32];
            std::snprintf(id, sizeof(id), "ap_w%02d", widx++);
            env.aps.push_back({id, {x, y}, -15.0});
        }
    int bidx = 0;
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 5; ++i) {
            double x = w * (2 * i + 1) / 10.0;
            double y = h * (2 * j + 1) / 8.0;
            char id[32];
            std::snprintf(id, sizeof(id), "beacon_%02d", bidx++);
            env.beacons.push_back({id, {x, y}, -10.0});
        }
}

inline Environment default_environment() {
    Environment env;
    env.area = {{0.0, 0.0}, {37.0, 17.0}};
    populate_default_transmitters(env);
    return env;
}

// ---------------------------------------------------------------------------
// Channel
// ---------------------------------------------------------------------------

// One RSS draw. The shadowing normal is always consumed, even when the
// reading ends up below sensitivity, so RNG streams stay aligned across
// configurations that differ only in thresholds or offsets.
inline std::optional<double> rss_at(const Transmitter& ap, Point2 point, const Environment& env,
                                    const DeviceProfile& device, std::mt19937_64& g) {
    const PathLossParams& pl = env.pathloss;
    double d = std::max(distance(ap.position, point), pl.ref_distance);
    double loss = pl.pl0_db + 10.0 * pl.exponent * std::log10(d / pl.ref_distance);
    double shadow = pl.shadowing_sigma * standard_normal(g);
    double rss = ap.tx_power_dbm - loss + shadow + device.rss_offset;
    if (device.quantize) rss = std::round(rss);
    if (rss < env.sensitivity_dbm) return std::nullopt;
    return std::clamp(rss, kRssMinDbm, kRssMaxDbm);
}

inline WifiScan sample_wifi_scan(Point2 point, double timestamp, const Environment& env,
                                 const DeviceProfile& device, std::mt19937_64& g) {
    WifiScan scan;
    scan.timestamp = timestamp;
    for (const auto& ap : env.aps)
        if (auto rss = rss_at(ap, point, env, device, g)) scan.readings.push_back({ap.id, *rss});
    return scan;
}

// BLE positioning output: unbiased Gaussian location error, clipped to the
// area, with a confidence radius proportional to the error sigma. The two
// normals are always consumed (stream alignment across sigma values).
inline GroundTruthEstimate ble_ground_truth(Point2 true_point, const Rect& area,
                                            const BleOracleParams& oracle, std::mt19937_64& g) {
    if (!area.contains(true_point)) throw OutOfArea("true point outside the area");
    double nx = standard_normal(g);
    double ny = standard_normal(g);
    GroundTruthEstimate out;
    out.location = area.clamp_inside(
        {true_point.x + oracle.loc_noise_sigma * nx, true_point.y + oracle.loc_noise_sigma * ny});
    out.confidence_radius =
        std::max(oracle.min_confidence, oracle.confidence_factor * oracle.loc_noise_sigma);
    return out;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

enum class TrajectoryKind { stationary, random_waypoint, grid_sweep };

inline std::string to_string(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::stationary: return "stationary";
        case TrajectoryKind::random_waypoint: return "random_waypoint";
        case TrajectoryKind::grid_sweep: return "grid_sweep";
    }
    throw InvalidArgument("unknown trajectory kind");
}

inline TrajectoryKind parse_trajectory_kind(const std::string& s) {
    if (s == "stationary") return TrajectoryKind::stationary;
    if (s == "random_waypoint") return TrajectoryKind::random_waypoint;
    if (s == "grid_sweep") return TrajectoryKind::grid_sweep;
    throw InvalidArgument("unknown trajectory kind: " + s);
}

struct TrajectoryParams {
    TrajectoryKind kind = TrajectoryKind::random_waypoint;
    int n_samples = 1;            // grid_sweep: 0 means one full vertex pass
    double speed_mps = 0.5;
    double sample_period_s = 1.0;
    Point2 start{std::numeric_limits<double>::quiet_NaN(),
                 std::numeric_limits<double>::quiet_NaN()}; // NaN: drawn from rng
    double sweep_spacing = 1.0;   // meters between grid_sweep vertices
};

struct TimedPoint {
    double t = 0.0;
    Point2 p;
};

namespace detail {

inline Point2 resolve_start(const Rect& area, const TrajectoryParams& params,
                            std::mt19937_64& g) {
    if (std::isnan(params.start.x) || std::isnan(params.start.y))
        return {uniform_in(g, area.lo.x, area.hi.x), uniform_in(g, area.lo.y, area.hi.y)};
    if (!area.contains(params.start)) throw InvalidArgument("trajectory start outside the area");
    return params.start;
}

} // namespace detail

inline std::vector<TimedPoint> generate_trajectory(const Rect& area,
                                                   const TrajectoryParams& params,
                                                   std::mt19937_64& g) {
    if (!(params.sample_period_s > 0.0)) throw InvalidArgument("sample period must be > 0");
    std::vector<TimedPoint> out;

    switch (params.kind) {
        case TrajectoryKind::stationary: {
            if (params.n_samples < 1) throw InvalidArgument("stationary needs n_samples >= 1");
            Point2 p = detail::resolve_start(area, params, g);
            for (int i = 0; i < params.n_samples; ++i)
                out.push_back({i * params.sample_period_s, p});
            return out;
        }
        case TrajectoryKind::random_waypoint: {
            if (params.n_samples < 1) throw InvalidArgument("random_waypoint needs n_samples >= 1");
            if (!(params.speed_mps > 0.0)) throw InvalidArgument("speed must be > 0");
            Point2 pos = detail::resolve_start(area, params, g);
            Point2 waypoint{uniform_in(g, area.lo.x, area.hi.x),
                            uniform_in(g, area.lo.y, area.hi.y)};
            out.push_back({0.0, pos});
            double step = params.speed_mps * params.sample_period_s;
            for (int i = 1; i < params.n_samples; ++i) {
                double remaining = step;
                while (remaining > 0.0) {
                    double d = distance(pos, waypoint);
                    if (d <= remaining) {
                        pos = waypoint;
                        remaining -= d;
                        waypoint = {uniform_in(g, area.lo.x, area.hi.x),
                                    uniform_in(g, area.lo.y, area.hi.y)};
                    } else {
                        pos = pos + (remaining / d) * (waypoint - pos);
                        remaining = 0.0;
                    }
                }
                out.push_back({i * params.sample_period_s, pos});
            }
            return out;
        }
        case TrajectoryKind::grid_sweep: {
            if (!(params.sweep_spacing > 0.0)) throw InvalidArgument("sweep spacing must be > 0");
            if (params.n_samples < 0) throw InvalidArgument("grid_sweep needs n_samples >= 0");
            int nx = static_cast<int>(std::floor(area.width() / params.sweep_spacing + 1e-9));
            int ny = static_cast<int>(std::floor(area.height() / params.sweep_spacing + 1e-9));
            std::vector<Point2> vertices;
            vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
            for (int j = 0; j <= ny; ++j) {
                for (int k = 0; k <= nx; ++k) {
                    int i = (j % 2 == 0) ? k : nx - k; // serpentine rows
                    vertices.push_back({area.lo.x + i * params.sweep_spacing,
                                        area.lo.y + j * params.sweep_spacing});
                }
            }
            int n = params.n_samples == 0 ? static_cast<int>(vertices.size()) : params.n_samples;
            for (int i = 0; i < n; ++i)
                out.push_back({i * params.sample_period_s, vertices[i % vertices.size()]});
            return out;
        }
    }
    throw InvalidArgument("unknown trajectory kind");
}

// ---------------------------------------------------------------------------
// Experiment configuration and dataset generation
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::uint64_t seed = 1;
    Environment env = default_environment();
    double cell_size = 2.0; // meters
    int n_training = 700;
    int n_test = 600;
    AssignmentStrategy strategy = AssignmentStrategy::weighted_confidence;
    double sigma_floor = 1.0;
    double min_cell_weight = 0.5;
    bool train_offset_correction = false;
    TrackerConfig tracker;
    BleOracleParams oracle;
    DeviceProfile train_device{"train_device", 0.0, false};
    DeviceProfile test_device{"test_device", 0.0, false};
    // Brisk survey walk for training, slow pedestrian walk for testing;
    // n_samples is overridden by n_training / n_test.
    TrajectoryParams train_trajectory{.speed_mps = 1.5};
    TrajectoryParams test_trajectory{.speed_mps = 0.25};

    GridSpec grid() const { return grid_covering(env.area, cell_size); }
};

inline void validate(const ExperimentConfig& cfg) {
    validate(cfg.env);
    validate(cfg.oracle);
    validate(cfg.train_device);
    validate(cfg.test_device);
    if (cfg.n_training < 1) throw InvalidArgument("n_training must be >= 1");
    if (cfg.n_test < 1) throw InvalidArgument("n_test must be >= 1");
    if (!(cfg.cell_size > 0.0)) throw InvalidArgument("cell_size must be > 0");
    if (cfg.tracker.window_k < 1) throw InvalidArgument("window_k must be >= 1");
    if (!(cfg.sigma_floor > 0.0)) throw InvalidArgument("sigma_floor must be > 0");
    if (cfg.min_cell_weight < 0.0) throw InvalidArgument("min_cell_weight must be >= 0");
}

// RNG stream purposes. Trajectory, channel, and oracle draws come from
// disjoint substreams so that, e.g., changing oracle noise never perturbs
// the WiFi readings of the same seed.
constexpr std::uint64_t kStreamTrajectory = 1;
constexpr std::uint64_t kStreamWifi = 2;
constexpr std::uint64_t kStreamOracle = 3;

// Substream index per dataset phase.
constexpr std::uint64_t kPhaseTraining = 0;
constexpr std::uint64_t kPhaseTest = 1;

struct TestSample {
    Point2 true_location;
    WifiScan wifi;
};

inline std::vector<TaggedScan> simulate_training(const ExperimentConfig& cfg) {
    validate(cfg);
    auto traj_rng = make_rng(cfg.seed, kStreamTrajectory, kPhaseTraining);
    auto wifi_rng = make_rng(cfg.seed, kStreamWifi, kPhaseTraining);
    auto oracle_rng = make_rng(cfg.seed, kStreamOracle, kPhaseTraining);

    TrajectoryParams tp = cfg.train_trajectory;
    tp.n_samples = cfg.n_training;
    auto path = generate_trajectory(cfg.env.area, tp, traj_rng);

    std::vector<TaggedScan> out;
    out.reserve(path.size());
    for (const auto& tpnt : path) {
        Point2 p = cfg.env.area.clamp_inside(tpnt.p);
        TaggedScan ts;
        ts.wifi = sample_wifi_scan(p, tpnt.t, cfg.env, cfg.train_device, wifi_rng);
        ts.truth = ble_ground_truth(p, cfg.env.area, cfg.oracle, oracle_rng);
        out.push_back(std::move(ts));
    }
    return out;
}

inline std::vector<TestSample> simulate_test(const ExperimentConfig& cfg) {
    validate(cfg);
    auto traj_rng = make_rng(cfg.seed, kStreamTrajectory, kPhaseTest);
    auto wifi_rng = make_rng(cfg.seed, kStreamWifi, kPhaseTest);

    TrajectoryParams tp = cfg.test_trajectory;
    tp.n_samples = cfg.n_test;
    auto path = generate_trajectory(cfg.env.area, tp, traj_rng);

    std::vector<TestSample> out;
    out.reserve(path.size());
    for (const auto& tpnt : path) {
        Point2 p = cfg.env.area.clamp_inside(tpnt.p);
        out.push_back({p, sample_wifi_scan(p, tpnt.t, cfg.env, cfg.test_device, wifi_rng)});
    }
    return out;
}

} // namespace hybridloc
