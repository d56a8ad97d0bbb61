#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "builder.hpp"
#include "core.hpp"

namespace hybridloc {

// An AP heard in the scan but absent from a cell's fingerprint is scored as
// if the cell expected near-sensitivity silence from it.
constexpr double kMissingApMeanDbm = -95.0;
constexpr double kMissingApVarianceDb2 = 25.0;

inline double log_normal_density(double x, double mean, double variance) {
    double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * variance) + d * d / variance);
}

// Gaussian density of observing rss `s` under finalized per-AP statistics.
inline double gaussian_density(double s, const ApStats& stats) {
    if (!stats.finalized()) throw NotFinalized("per-AP statistics not finalized");
    return std::exp(log_normal_density(s, stats.mean, stats.variance));
}

// Mean residual of the scan against the cell's fingerprint means over the
// APs present in both (the per-scan hardware offset estimate).
inline double common_offset(const WifiScan& scan, const CellStats& cell) {
    double sum = 0.0;
    int q = 0;
    for (const auto& r : scan.readings) {
        auto it = cell.per_ap.find(r.id);
        if (it == cell.per_ap.end()) continue;
        sum += r.rss - it->second.mean;
        ++q;
    }
    if (q == 0) throw NoOverlap("scan shares no AP with the cell");
    return sum / q;
}

namespace detail {

// Offset estimate plus the variance inflation its uncertainty induces.
// With q' < 2 shared APs the offset would zero every residual, so correction
// is reported as not applicable.
struct OffsetEstimate {
    double lambda = 0.0;
    double variance_inflation = 0.0;
    int shared = 0;
    bool applied = false;
};

inline OffsetEstimate estimate_offset(const WifiScan& scan,
                                      const std::map<std::string, ApStats>& per_ap) {
    OffsetEstimate e;
    double res_sum = 0.0;
    double var_sum = 0.0;
    for (const auto& r : scan.readings) {
        auto it = per_ap.find(r.id);
        if (it == per_ap.end()) continue;
        if (!it->second.finalized()) throw NotFinalized("per-AP statistics not finalized");
        res_sum += r.rss - it->second.mean;
        var_sum += it->second.variance;
        ++e.shared;
    }
    if (e.shared >= 2) {
        double q = static_cast<double>(e.shared);
        e.lambda = res_sum / q;
        e.variance_inflation = var_sum / (q * q);
        e.applied = true;
    }
    return e;
}

} // namespace detail

// Log-likelihood of the scan under one cell's fingerprint. With offset
// correction the residual lambda is removed from every reading and shared-AP
// variances are inflated by the lambda estimator's own variance. When
// `fixed_offset` is given it is used instead of the per-cell estimate.
inline double cell_log_likelihood(const WifiScan& scan, const CellStats& cell,
                                  bool offset_correction,
                                  const detail::OffsetEstimate* fixed_offset = nullptr) {
    if (scan.readings.empty()) throw InvalidArgument("empty scan");

    detail::OffsetEstimate off;
    if (offset_correction)
        off = fixed_offset ? *fixed_offset : detail::estimate_offset(scan, cell.per_ap);

    double ll = 0.0;
    int shared = 0;
    for (const auto& r : scan.readings) {
        double s = r.rss - (off.applied ? off.lambda : 0.0);
        auto it = cell.per_ap.find(r.id);
        if (it != cell.per_ap.end()) {
            const ApStats& st = it->second;
            if (!st.finalized()) throw NotFinalized("per-AP statistics not finalized");
            double var = st.variance + (off.applied ? off.variance_inflation : 0.0);
            ll += log_normal_density(s, st.mean, var);
            ++shared;
        } else {
            ll += log_normal_density(s, kMissingApMeanDbm, kMissingApVarianceDb2);
        }
    }
    if (shared == 0) throw NoOverlap("scan shares no AP with the cell");
    return ll;
}

// Normalized posterior over the cells that could be scored.
struct CellPosterior {
    std::vector<std::pair<int, double>> entries; // (cell index, probability), ascending index
    double log_evidence = 0.0; // log uniform-prior marginal likelihood over scored cells

    double probability_of(int cell_index) const {
        for (const auto& [idx, p] : entries)
            if (idx == cell_index) return p;
        return 0.0;
    }
};

struct DiscreteEstimate {
    int best_index = -1;
    CellId best_cell;
    CellPosterior posterior;
};

// Pooled per-AP statistics across usable cells; reference distribution for
// the fingerprint-global offset variant.
inline std::map<std::string, ApStats> pooled_ap_stats(const FingerprintDb& db) {
    std::map<std::string, ApStats> pooled;
    for (const auto& [idx, cell] : db.cells) {
        if (!cell.usable) continue;
        for (const auto& [ap, st] : cell.per_ap) pooled[ap] = merged(pooled[ap], st);
    }
    for (auto& [ap, st] : pooled)
        st.variance = st.weight_sum > 0.0 ? std::max(st.m2 / st.weight_sum, 1e-12) : 1e-12;
    return pooled;
}

// MAP estimate over usable cells: log-domain scoring, max-subtraction
// normalization, ties broken toward the lowest row-major cell index.
inline DiscreteEstimate discrete_estimate(const WifiScan& scan, const FingerprintDb& db,
                                          const TrackerConfig& cfg) {
    if (!db.finalized) throw NotFinalized("fingerprint not finalized");
    if (scan.readings.empty()) throw InvalidArgument("empty scan");
    validate(scan);

    detail::OffsetEstimate global_off;
    bool use_global = cfg.offset_correction && cfg.lambda_mode == LambdaMode::global;
    if (use_global) global_off = detail::estimate_offset(scan, pooled_ap_stats(db));

    std::vector<std::pair<int, double>> scores;
    bool saw_usable = false;
    for (const auto& [idx, cell] : db.cells) {
        if (!cell.usable) continue;
        saw_usable = true;
        try {
            double ll = cell_log_likelihood(scan, cell, cfg.offset_correction,
                                            use_global ? &global_off : nullptr);
            scores.emplace_back(idx, ll);
        } catch (const NoOverlap&) {
            // cell shares no AP with the scan; excluded from the posterior
        }
    }
    if (!saw_usable) throw EmptyFingerprint("fingerprint has no usable cell");
    if (scores.empty()) throw NoOverlap("no usable cell shares an AP with the scan");

    double max_ll = scores.front().second;
    for (const auto& [idx, ll] : scores) max_ll = std::max(max_ll, ll);

    double sum = 0.0;
    for (auto& [idx, ll] : scores) {
        ll = std::exp(ll - max_ll);
        sum += ll;
    }

    DiscreteEstimate out;
    out.posterior.entries.reserve(scores.size());
    double best_p = -1.0;
    for (const auto& [idx, p] : scores) {
        double prob = p / sum;
        out.posterior.entries.emplace_back(idx, prob);
        if (prob > best_p) {
            best_p = prob;
            out.best_index = idx;
        }
    }
    out.best_cell = db.grid.cell_at(out.best_index);
    out.posterior.log_evidence =
        max_ll + std::log(sum) - std::log(static_cast<double>(scores.size()));
    return out;
}

// Posterior-weighted center of mass of cell representative locations.
inline Point2 spatial_center_of_mass(const CellPosterior& posterior, const FingerprintDb& db,
                                     const TrackerConfig& cfg) {
    if (posterior.entries.empty()) throw InvalidArgument("empty posterior");
    Point2 acc{0.0, 0.0};
    double total = 0.0;
    for (const auto& [idx, p] : posterior.entries) {
        const CellStats& cell = db.cells.at(idx);
        acc = acc + p * representative_location(cell, db.grid, cfg.representative_mode);
        total += p;
    }
    return acc / total;
}

// ---------------------------------------------------------------------------
// Temporal smoothing
// ---------------------------------------------------------------------------

struct TimedEstimate {
    double timestamp = 0.0;
    Point2 location;
};

// Ring buffer of the last k location estimates.
class TrackState {
  public:
    explicit TrackState(int k = 1) : k_(k) {
        if (k_ < 1) throw InvalidArgument("window size must be >= 1");
    }

    void push(double timestamp, Point2 p) {
        if (static_cast<int>(history_.size()) == k_) {
            history_[next_] = {timestamp, p};
            next_ = (next_ + 1) % k_;
        } else {
            history_.push_back({timestamp, p});
        }
    }

    std::size_t size() const { return history_.size(); }
    void clear() { history_.clear(); next_ = 0; }

    Point2 mean() const {
        if (history_.empty()) throw InvalidArgument("mean of empty history");
        Point2 acc{0.0, 0.0};
        for (const auto& e : history_) acc = acc + e.location;
        return acc / static_cast<double>(history_.size());
    }

  private:
    int k_;
    std::vector<TimedEstimate> history_;
    std::size_t next_ = 0;
};

// Pushes the new estimate and returns the mean of the last min(k, t) ones.
inline Point2 temporal_smooth(TrackState& state, double timestamp, Point2 estimate) {
    state.push(timestamp, estimate);
    return state.mean();
}

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

class Tracker {
  public:
    Tracker(const FingerprintDb& db, TrackerConfig cfg)
        : db_(&db), cfg_(cfg), state_(cfg.window_k) {
        if (!db.finalized) throw NotFinalized("fingerprint not finalized");
    }

    // One smoothed location per scan; scans with no readings or no AP overlap
    // yield a gap and do not enter the history.
    std::optional<Point2> step(const WifiScan& scan) {
        if (scan.readings.empty()) return std::nullopt;
        DiscreteEstimate est;
        try {
            est = discrete_estimate(scan, *db_, cfg_);
        } catch (const NoOverlap&) {
            return std::nullopt;
        }
        Point2 point = cfg_.spatial_com
                           ? spatial_center_of_mass(est.posterior, *db_, cfg_)
                           : representative_location(db_->cells.at(est.best_index), db_->grid,
                                                     cfg_.representative_mode);
        return temporal_smooth(state_, scan.timestamp, point);
    }

    void reset() { state_.clear(); }
    const TrackState& state() const { return state_; }

  private:
    const FingerprintDb* db_;
    TrackerConfig cfg_;
    TrackState state_;
};

// Batch tracking; gaps are reported as disengaged optionals.
inline std::vector<std::optional<Point2>> track(const std::vector<WifiScan>& scans,
                                                const FingerprintDb& db,
                                                const TrackerConfig& cfg) {
    Tracker tracker(db, cfg);
    std::vector<std::optional<Point2>> out;
    out.reserve(scans.size());
    for (const auto& s : scans) out.push_back(tracker.step(s));
    return out;
}

} // namespace hybridloc
