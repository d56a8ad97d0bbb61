#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace hybridloc {

enum class AssignmentStrategy { location_only, unweighted_confidence, weighted_confidence };

inline std::string to_string(AssignmentStrategy s) {
    switch (s) {
        case AssignmentStrategy::location_only: return "location_only";
        case AssignmentStrategy::unweighted_confidence: return "unweighted_confidence";
        case AssignmentStrategy::weighted_confidence: return "weighted_confidence";
    }
    throw InvalidArgument("unknown assignment strategy");
}

inline AssignmentStrategy parse_strategy(const std::string& s) {
    if (s == "location_only") return AssignmentStrategy::location_only;
    if (s == "unweighted_confidence") return AssignmentStrategy::unweighted_confidence;
    if (s == "weighted_confidence") return AssignmentStrategy::weighted_confidence;
    throw InvalidArgument("unknown assignment strategy: " + s);
}

struct BuilderConfig {
    GridSpec grid;
    AssignmentStrategy strategy = AssignmentStrategy::weighted_confidence;
    double sigma_floor = 1.0;          // dB^2, minimum per-AP variance
    double min_cell_weight = 0.5;      // cells below this total weight are unusable
    bool train_offset_correction = false; // per-source-device offset vs running global means
};

// ---------------------------------------------------------------------------
// Weighted running moments
// ---------------------------------------------------------------------------

// Streaming weighted mean/variance update (weighted one-pass moments).
inline void accumulate(ApStats& st, double weight, double value) {
    if (!(weight > 0.0)) throw InvalidArgument("moment update needs weight > 0");
    st.weight_sum += weight;
    double delta = value - st.mean;
    st.mean += (weight / st.weight_sum) * delta;
    st.m2 += weight * delta * (value - st.mean);
}

// Combines two independently accumulated moment sets; equals accumulating
// both inputs into one stream.
inline ApStats merged(const ApStats& a, const ApStats& b) {
    if (a.weight_sum == 0.0) return b;
    if (b.weight_sum == 0.0) return a;
    ApStats out;
    out.weight_sum = a.weight_sum + b.weight_sum;
    double delta = b.mean - a.mean;
    out.mean = a.mean + delta * (b.weight_sum / out.weight_sum);
    out.m2 = a.m2 + b.m2 + delta * delta * (a.weight_sum * b.weight_sum / out.weight_sum);
    return out;
}

// ---------------------------------------------------------------------------
// Cell assignment
// ---------------------------------------------------------------------------

// Maps a ground-truth estimate to (cell, weight) contributions:
//   location_only          -> the enclosing cell, weight 1
//   unweighted_confidence  -> weight 1 to every cell the circle overlaps
//   weighted_confidence    -> w_i = A_i / (pi c^2) per overlapped cell
// radius rounding to zero (or all overlaps below the dust threshold)
// degenerates to location_only.
inline std::map<int, double> assign_scan(const GroundTruthEstimate& truth,
                                         const BuilderConfig& cfg) {
    const GridSpec& grid = cfg.grid;
    if (!grid.contains(truth.location))
        throw OutOfArea("ground-truth location outside grid");
    if (truth.confidence_radius < 0.0)
        throw InvalidArgument("confidence radius must be >= 0");

    int center_idx = grid.index_of(grid.cell_of(truth.location));
    if (cfg.strategy == AssignmentStrategy::location_only || truth.confidence_radius == 0.0)
        return {{center_idx, 1.0}};

    Circle circle{truth.location, truth.confidence_radius};
    std::map<int, double> weights = assignment_weights(circle, grid);
    if (weights.empty()) return {{center_idx, 1.0}};
    if (cfg.strategy == AssignmentStrategy::unweighted_confidence)
        for (auto& [idx, w] : weights) w = 1.0;
    return weights;
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

class FingerprintBuilder {
  public:
    explicit FingerprintBuilder(BuilderConfig cfg) : cfg_(std::move(cfg)) {
        if (!(cfg_.sigma_floor > 0.0)) throw InvalidArgument("sigma_floor must be > 0");
        if (cfg_.min_cell_weight < 0.0) throw InvalidArgument("min_cell_weight must be >= 0");
        db_.grid = cfg_.grid;
    }

    const BuilderConfig& config() const { return cfg_; }
    std::size_t out_of_area_count() const { return out_of_area_; }
    std::size_t empty_scan_count() const { return empty_scans_; }
    double assigned_weight_total() const { return assigned_weight_total_; }

    // Out-of-area truth locations are counted and skipped: crowdsensed input
    // is dirty by assumption. Scans with no readings are likewise skipped.
    void ingest(const TaggedScan& scan, const std::string& device_id = "") {
        validate(scan.wifi);
        if (scan.wifi.readings.empty()) {
            ++empty_scans_;
            return;
        }
        if (!cfg_.grid.contains(scan.truth.location)) {
            ++out_of_area_;
            return;
        }

        double offset = 0.0;
        if (cfg_.train_offset_correction && !device_id.empty())
            offset = update_device_offset(device_id, scan.wifi);

        std::map<int, double> weights = assign_scan(scan.truth, cfg_);
        for (const auto& [idx, w] : weights) {
            CellStats& cell = db_.cells[idx];
            cell.id = cfg_.grid.cell_at(idx);
            cell.total_weight += w;
            cell.mass_centroid =
                cell.mass_centroid + (w / cell.total_weight) * (scan.truth.location - cell.mass_centroid);
            for (const auto& r : scan.wifi.readings) {
                double v = std::clamp(r.rss - offset, kRssMinDbm, kRssMaxDbm);
                accumulate(cell.per_ap[r.id], w, v);
                db_.ap_universe.insert(r.id);
            }
            assigned_weight_total_ += w;
        }

        if (cfg_.train_offset_correction) update_global_stats(scan.wifi, offset);
    }

    void ingest(const std::vector<TaggedScan>& scans, const std::string& device_id = "") {
        for (const auto& s : scans) ingest(s, device_id);
    }

    // Shard-and-merge support: folds another builder's accumulators into this
    // one; the result equals single-builder ingestion of both scan streams.
    void merge_from(const FingerprintBuilder& other) {
        if (cfg_.train_offset_correction || other.cfg_.train_offset_correction)
            throw InvalidArgument("offset-correcting builders are order-dependent and cannot merge");
        if (!(cfg_.grid.origin.x == other.cfg_.grid.origin.x &&
              cfg_.grid.origin.y == other.cfg_.grid.origin.y &&
              cfg_.grid.cell_size == other.cfg_.grid.cell_size &&
              cfg_.grid.cols == other.cfg_.grid.cols && cfg_.grid.rows == other.cfg_.grid.rows))
            throw InvalidArgument("cannot merge builders over different grids");

        for (const auto& [idx, src] : other.db_.cells) {
            CellStats& dst = db_.cells[idx];
            dst.id = src.id;
            double w_total = dst.total_weight + src.total_weight;
            if (w_total > 0.0) {
                dst.mass_centroid = (dst.total_weight * dst.mass_centroid +
                                     src.total_weight * src.mass_centroid) / w_total;
            }
            dst.total_weight = w_total;
            for (const auto& [ap, st] : src.per_ap) dst.per_ap[ap] = merged(dst.per_ap[ap], st);
        }
        for (const auto& ap : other.db_.ap_universe) db_.ap_universe.insert(ap);
        out_of_area_ += other.out_of_area_;
        empty_scans_ += other.empty_scans_;
        assigned_weight_total_ += other.assigned_weight_total_;
    }

    // Produces the read-only fingerprint: variances clamped to the floor,
    // sparse cells marked unusable.
    FingerprintDb finalize() const {
        FingerprintDb out = db_;
        bool any_usable = false;
        for (auto& [idx, cell] : out.cells) {
            for (auto& [ap, st] : cell.per_ap) {
                double v = st.weight_sum > 0.0 ? st.m2 / st.weight_sum : 0.0;
                st.variance = std::max(v, cfg_.sigma_floor);
            }
            cell.usable = cell.total_weight >= cfg_.min_cell_weight && !cell.per_ap.empty();
            any_usable = any_usable || cell.usable;
        }
        if (!any_usable)
            throw EmptyFingerprint("no cell reaches total weight " +
                                   std::to_string(cfg_.min_cell_weight));
        out.finalized = true;
        out.min_usable_weight = cfg_.min_cell_weight;
        return out;
    }

  private:
    // Running per-device offset: mean residual of this device's readings
    // against the running global per-AP means, usable once >= 2 APs overlap.
    double update_device_offset(const std::string& device_id, const WifiScan& scan) {
        double sum = 0.0;
        int q = 0;
        for (const auto& r : scan.readings) {
            auto it = global_ap_.find(r.id);
            if (it == global_ap_.end() || it->second.weight_sum <= 0.0) continue;
            sum += r.rss - it->second.mean;
            ++q;
        }
        ApStats& off = device_offset_[device_id];
        if (q >= 2) accumulate(off, 1.0, sum / q);
        return off.weight_sum > 0.0 ? off.mean : 0.0;
    }

    void update_global_stats(const WifiScan& scan, double offset) {
        for (const auto& r : scan.readings)
            accumulate(global_ap_[r.id], 1.0,
                       std::clamp(r.rss - offset, kRssMinDbm, kRssMaxDbm));
    }

    BuilderConfig cfg_;
    FingerprintDb db_;
    std::size_t out_of_area_ = 0;
    std::size_t empty_scans_ = 0;
    double assigned_weight_total_ = 0.0;
    std::map<std::string, ApStats> global_ap_;
    std::map<std::string, ApStats> device_offset_;
};

// Recomputes usability (and, for freshly accumulated stats, variances)
// against a config. Loaded fingerprints carry final variances already; those
// are only re-clamped, never recomputed, so the operation is idempotent.
inline void refinalize(FingerprintDb& db, double sigma_floor, double min_cell_weight) {
    if (!(sigma_floor > 0.0)) throw InvalidArgument("sigma_floor must be > 0");
    if (min_cell_weight < 0.0) throw InvalidArgument("min_cell_weight must be >= 0");
    bool any_usable = false;
    for (auto& [idx, cell] : db.cells) {
        for (auto& [ap, st] : cell.per_ap) {
            double v = st.finalized() ? st.variance
                                      : (st.weight_sum > 0.0 ? st.m2 / st.weight_sum : 0.0);
            st.variance = std::max(v, sigma_floor);
        }
        cell.usable = cell.total_weight >= min_cell_weight && !cell.per_ap.empty();
        any_usable = any_usable || cell.usable;
    }
    if (!any_usable)
        throw EmptyFingerprint("no cell reaches total weight " + std::to_string(min_cell_weight));
    db.finalized = true;
    db.min_usable_weight = min_cell_weight;
}

// Representative location used as a cell's point estimate.
inline Point2 representative_location(const CellStats& cell, const GridSpec& grid,
                                      RepresentativeMode mode) {
    if (!cell.usable) throw UnusableCell("representative location of an unusable cell");
    if (mode == RepresentativeMode::mass_centroid && cell.total_weight > 0.0)
        return cell.mass_centroid;
    return grid.cell_geometric_center(cell.id);
}

} // namespace hybridloc
