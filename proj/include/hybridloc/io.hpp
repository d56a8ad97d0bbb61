#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "simulator.hpp"

namespace hybridloc {

namespace detail {

// 17 significant digits round-trip any double exactly through decimal text.
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline double parse_double(const std::string& tok, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw MalformedRecord("bad " + what + ": " + tok);
    }
    if (pos != tok.size()) throw MalformedRecord("bad " + what + ": " + tok);
    return v;
}

inline long parse_long(const std::string& tok, const std::string& what) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(tok, &pos);
    } catch (const std::exception&) {
        throw MalformedRecord("bad " + what + ": " + tok);
    }
    if (pos != tok.size()) throw MalformedRecord("bad " + what + ": " + tok);
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fingerprint persistence
// ---------------------------------------------------------------------------
// Line-oriented UTF-8 format:
//   FPDB v1 <cols> <rows> <cell_size> <origin_x> <origin_y>
//   <col> <row> <ap_id> <weight_sum> <mean> <variance>     one per (cell, AP)
//   C <col> <row> <total_weight> <centroid_x> <centroid_y> one per cell
//   END <record_count>
// Cells appear in ascending row-major order, each cell's AP lines (sorted by
// ap_id) before its C line. record_count counts AP and C lines.

inline void save_db(const FingerprintDb& db, std::ostream& out) {
    if (!db.finalized) throw NotFinalized("only finalized fingerprints can be saved");
    using detail::fmt17;
    out << "FPDB v1 " << db.grid.cols << ' ' << db.grid.rows << ' '
        << fmt17(db.grid.cell_size) << ' ' << fmt17(db.grid.origin.x) << ' '
        << fmt17(db.grid.origin.y) << '\n';
    long records = 0;
    for (const auto& [idx, cell] : db.cells) {
        for (const auto& [ap, st] : cell.per_ap) {
            out << cell.id.col << ' ' << cell.id.row << ' ' << ap << ' '
                << fmt17(st.weight_sum) << ' ' << fmt17(st.mean) << ' '
                << fmt17(st.variance) << '\n';
            ++records;
        }
        out << "C " << cell.id.col << ' ' << cell.id.row << ' ' << fmt17(cell.total_weight)
            << ' ' << fmt17(cell.mass_centroid.x) << ' ' << fmt17(cell.mass_centroid.y) << '\n';
        ++records;
    }
    out << "END " << records << '\n';
    if (!out) throw IoError("write failure while saving fingerprint");
}

inline void save_db(const FingerprintDb& db, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    save_db(db, f);
}

// Loads a saved fingerprint. All cells come back usable: the usability
// threshold is a query-time policy, reapplied via refinalize if needed.
inline FingerprintDb load_db(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MalformedRecord("empty fingerprint file");
    auto header = detail::tokenize(line);
    if (header.size() < 2 || header[0] != "FPDB")
        throw MalformedRecord("not a fingerprint file");
    if (header[1] != "v1") throw UnsupportedVersion("unsupported fingerprint version " + header[1]);
    if (header.size() != 7) throw MalformedRecord("bad fingerprint header");

    FingerprintDb db;
    db.format_version = 1;
    int cols = static_cast<int>(detail::parse_long(header[2], "header cols"));
    int rows = static_cast<int>(detail::parse_long(header[3], "header rows"));
    double cell_size = detail::parse_double(header[4], "header cell_size");
    double ox = detail::parse_double(header[5], "header origin_x");
    double oy = detail::parse_double(header[6], "header origin_y");
    if (cols < 1 || rows < 1 || !(cell_size > 0.0))
        throw MalformedRecord("bad fingerprint grid dimensions");
    db.grid = make_grid({ox, oy}, cell_size, cols, rows);

    long records = 0;
    bool saw_end = false;
    while (std::getline(in, line)) {
        auto tok = detail::tokenize(line);
        if (tok.empty()) continue;
        if (tok[0] == "END") {
            if (tok.size() != 2) throw MalformedRecord("bad END line");
            long declared = detail::parse_long(tok[1], "record count");
            if (declared != records)
                throw RecordCountMismatch("END declares " + std::to_string(declared) +
                                          " records, file has " + std::to_string(records));
            saw_end = true;
            break;
        }
        if (tok[0] == "C") {
            if (tok.size() != 6) throw MalformedRecord("bad cell line: " + line);
            CellId id{static_cast<int>(detail::parse_long(tok[1], "cell col")),
                      static_cast<int>(detail::parse_long(tok[2], "cell row"))};
            if (!db.grid.valid(id)) throw MalformedRecord("cell outside grid: " + line);
            CellStats& cell = db.cells[db.grid.index_of(id)];
            cell.id = id;
            cell.total_weight = detail::parse_double(tok[3], "total_weight");
            cell.mass_centroid = {detail::parse_double(tok[4], "centroid_x"),
                                  detail::parse_double(tok[5], "centroid_y")};
        } else {
            if (tok.size() != 6) throw MalformedRecord("bad AP line: " + line);
            CellId id{static_cast<int>(detail::parse_long(tok[0], "cell col")),
                      static_cast<int>(detail::parse_long(tok[1], "cell row"))};
            if (!db.grid.valid(id)) throw MalformedRecord("cell outside grid: " + line);
            CellStats& cell = db.cells[db.grid.index_of(id)];
            cell.id = id;
            ApStats st;
            st.weight_sum = detail::parse_double(tok[3], "weight_sum");
            st.mean = detail::parse_double(tok[4], "mean");
            st.variance = detail::parse_double(tok[5], "variance");
            st.m2 = st.variance * st.weight_sum;
            cell.per_ap[tok[2]] = st;
            db.ap_universe.insert(tok[2]);
        }
        ++records;
    }
    if (!saw_end) throw MalformedRecord("missing END line (truncated file)");

    for (auto& [idx, cell] : db.cells) cell.usable = true;
    db.finalized = true;
    db.min_usable_weight = 0.0;
    return db;
}

inline FingerprintDb load_db(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    return load_db(f);
}

// ---------------------------------------------------------------------------
// Scan stream CSV: timestamp,ap_id,rss — one row per reading, readings of a
// scan grouped under one timestamp.
// ---------------------------------------------------------------------------

inline void write_scan_csv(const std::vector<WifiScan>& scans, std::ostream& out) {
    out << "timestamp,ap_id,rss\n";
    for (const auto& s : scans)
        for (const auto& r : s.readings)
            out << detail::fmt17(s.timestamp) << ',' << r.id << ',' << detail::fmt17(r.rss)
                << '\n';
    if (!out) throw IoError("write failure while saving scans");
}

inline std::vector<WifiScan> read_scan_csv(std::istream& in) {
    std::vector<WifiScan> scans;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == "timestamp,ap_id,rss") continue;
        }
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw MalformedRecord("bad scan row: " + line);
        double t = detail::parse_double(line.substr(0, c1), "timestamp");
        std::string ap = line.substr(c1 + 1, c2 - c1 - 1);
        double rss = detail::parse_double(line.substr(c2 + 1), "rss");
        if (ap.empty()) throw MalformedRecord("bad scan row: " + line);
        if (scans.empty() || scans.back().timestamp != t) {
            scans.push_back({t, {}});
            scans.back().timestamp = t;
        }
        scans.back().readings.push_back({ap, rss});
    }
    for (const auto& s : scans) validate(s);
    return scans;
}

// Track output CSV: one row per input scan; gaps leave x,y empty.
inline void write_track_csv(const std::vector<WifiScan>& scans,
                            const std::vector<std::optional<Point2>>& locations,
                            std::ostream& out) {
    if (scans.size() != locations.size())
        throw InvalidArgument("scan/location count mismatch");
    out << "index,timestamp,x,y\n";
    for (std::size_t i = 0; i < scans.size(); ++i) {
        out << i << ',' << detail::fmt17(scans[i].timestamp) << ',';
        if (locations[i])
            out << detail::fmt17(locations[i]->x) << ',' << detail::fmt17(locations[i]->y);
        else
            out << ',';
        out << '\n';
    }
    if (!out) throw IoError("write failure while saving track");
}

} // namespace hybridloc
