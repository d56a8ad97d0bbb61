#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridloc {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfArea : Error { using Error::Error; };
struct InvalidCell : Error { using Error::Error; };
struct InvalidArgument : Error { using Error::Error; };
struct NoOverlap : Error { using Error::Error; };
struct EmptyFingerprint : Error { using Error::Error; };
struct NotFinalized : Error { using Error::Error; };
struct UnusableCell : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct UnsupportedVersion : Error { using Error::Error; };
struct MalformedRecord : Error { using Error::Error; };
struct RecordCountMismatch : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Basic geometry
// ---------------------------------------------------------------------------

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline Point2 operator*(Point2 p, double s) { return {s * p.x, s * p.y}; }
inline Point2 operator/(Point2 p, double s) { return {p.x / s, p.y / s}; }

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

struct Rect {
    Point2 lo;
    Point2 hi;

    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }

    bool contains(Point2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }

    // Nudges a point onto the half-open interior so grid lookups on the far
    // edges cannot fall out of the last row/column.
    Point2 clamp_inside(Point2 p, double eps = 1e-9) const {
        double x = std::min(std::max(p.x, lo.x), hi.x - eps);
        double y = std::min(std::max(p.y, lo.y), hi.y - eps);
        return {x, y};
    }
};

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

constexpr double kRssMinDbm = -110.0;
constexpr double kRssMaxDbm = 0.0;

struct Reading {
    std::string id;   // AP or beacon identifier; whitespace-free token
    double rss = 0.0; // dBm
};

struct WifiScan {
    double timestamp = 0.0; // seconds, monotonic within a stream
    std::vector<Reading> readings;
};

struct BleScan {
    double timestamp = 0.0;
    std::vector<Reading> readings;
};

inline void validate_readings(const std::vector<Reading>& readings) {
    std::set<std::string> seen;
    for (const auto& r : readings) {
        if (r.rss < kRssMinDbm || r.rss > kRssMaxDbm)
            throw InvalidArgument("rss out of range [-110, 0] dBm for " + r.id);
        if (!seen.insert(r.id).second)
            throw InvalidArgument("duplicate transmitter id in scan: " + r.id);
    }
}

inline void validate(const WifiScan& s) { validate_readings(s.readings); }
inline void validate(const BleScan& s) { validate_readings(s.readings); }

// BLE-estimated location plus the radius of its confidence circle.
struct GroundTruthEstimate {
    Point2 location;
    double confidence_radius = 0.0; // meters
};

struct TaggedScan {
    WifiScan wifi;
    GroundTruthEstimate truth;
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

struct CellId {
    int col = 0;
    int row = 0;

    friend bool operator==(CellId a, CellId b) { return a.col == b.col && a.row == b.row; }
    friend bool operator!=(CellId a, CellId b) { return !(a == b); }
};

// Square grid of half-open cells [x0, x0+s) x [y0, y0+s). Half-open cells make
// boundary points unambiguous. Cell indices are row-major.
struct GridSpec {
    Point2 origin;
    double cell_size = 1.0; // meters
    int cols = 1;
    int rows = 1;

    int n_cells() const { return cols * rows; }
    double width() const { return cols * cell_size; }
    double height() const { return rows * cell_size; }
    Rect bounds() const { return {origin, {origin.x + width(), origin.y + height()}}; }

    bool valid(CellId c) const {
        return c.col >= 0 && c.col < cols && c.row >= 0 && c.row < rows;
    }

    int index_of(CellId c) const {
        if (!valid(c)) throw InvalidCell("cell out of grid range");
        return c.row * cols + c.col;
    }

    CellId cell_at(int index) const {
        if (index < 0 || index >= n_cells()) throw InvalidCell("cell index out of range");
        return {index % cols, index / cols};
    }

    bool contains(Point2 p) const {
        return p.x >= origin.x && p.x < origin.x + width() &&
               p.y >= origin.y && p.y < origin.y + height();
    }

    CellId cell_of(Point2 p) const {
        if (!contains(p)) throw OutOfArea("point outside grid area");
        int col = static_cast<int>(std::floor((p.x - origin.x) / cell_size));
        int row = static_cast<int>(std::floor((p.y - origin.y) / cell_size));
        col = std::min(col, cols - 1);
        row = std::min(row, rows - 1);
        return {col, row};
    }

    Rect cell_rect(CellId c) const {
        if (!valid(c)) throw InvalidCell("cell out of grid range");
        Point2 lo{origin.x + c.col * cell_size, origin.y + c.row * cell_size};
        return {lo, {lo.x + cell_size, lo.y + cell_size}};
    }

    Point2 cell_geometric_center(CellId c) const {
        if (!valid(c)) throw InvalidCell("cell out of grid range");
        return {origin.x + (c.col + 0.5) * cell_size, origin.y + (c.row + 0.5) * cell_size};
    }
};

inline GridSpec make_grid(Point2 origin, double cell_size, int cols, int rows) {
    if (!(cell_size > 0.0)) throw InvalidArgument("cell_size must be > 0");
    if (cols < 1 || rows < 1) throw InvalidArgument("grid must have at least one cell");
    return {origin, cell_size, cols, rows};
}

// Smallest grid of the given spacing that covers the rectangle.
inline GridSpec grid_covering(const Rect& area, double cell_size) {
    if (!(cell_size > 0.0)) throw InvalidArgument("cell_size must be > 0");
    int cols = std::max(1, static_cast<int>(std::ceil(area.width() / cell_size - 1e-12)));
    int rows = std::max(1, static_cast<int>(std::ceil(area.height() / cell_size - 1e-12)));
    return {area.lo, cell_size, cols, rows};
}

// ---------------------------------------------------------------------------
// Fingerprint statistics
// ---------------------------------------------------------------------------

// Weighted running Gaussian statistics for one AP within one cell.
// mean/m2 are maintained with a streaming weighted-moment update; variance is
// populated at finalization (variance < 0 means not finalized yet).
struct ApStats {
    double weight_sum = 0.0;
    double mean = 0.0;     // dBm
    double m2 = 0.0;       // weighted sum of squared deviations
    double variance = -1.0; // dB^2, >= sigma_floor once finalized

    bool finalized() const { return variance >= 0.0; }
};

struct CellStats {
    CellId id;
    std::map<std::string, ApStats> per_ap;
    Point2 mass_centroid;      // weighted mean of contributing truth locations
    double total_weight = 0.0; // sum of assignment weights landed on this cell
    bool usable = false;       // set by finalization (total_weight threshold)
};

struct FingerprintDb {
    GridSpec grid;
    std::map<int, CellStats> cells; // keyed by row-major cell index
    std::set<std::string> ap_universe;
    int format_version = 1;
    bool finalized = false;
    double min_usable_weight = 0.0;

    bool has_usable_cell() const {
        for (const auto& [idx, cell] : cells)
            if (cell.usable) return true;
        return false;
    }
};

// ---------------------------------------------------------------------------
// Tracking configuration
// ---------------------------------------------------------------------------

enum class RepresentativeMode { geometric_center, mass_centroid };
enum class LambdaMode { per_cell, global };

struct TrackerConfig {
    int window_k = 10;               // history window for temporal smoothing
    bool offset_correction = false;  // device heterogeneity handling
    RepresentativeMode representative_mode = RepresentativeMode::mass_centroid;
    bool spatial_com = true;         // posterior-weighted center of mass
    LambdaMode lambda_mode = LambdaMode::per_cell;
};

} // namespace hybridloc
