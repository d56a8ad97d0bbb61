#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "hybridloc/builder.hpp"
#include "hybridloc/rng.hpp"

using namespace hybridloc;

namespace {

BuilderConfig small_config(AssignmentStrategy strategy,
                           double min_cell_weight = 0.0,
                           double sigma_floor = 1.0) {
    BuilderConfig cfg;
    cfg.grid = make_grid({0.0, 0.0}, 1.0, 4, 4);
    cfg.strategy = strategy;
    cfg.sigma_floor = sigma_floor;
    cfg.min_cell_weight = min_cell_weight;
    return cfg;
}

TaggedScan tagged(Point2 loc, double radius, std::vector<Reading> readings, double t = 0.0) {
    TaggedScan ts;
    ts.wifi = {t, std::move(readings)};
    ts.truth = {loc, radius};
    return ts;
}

// Two-pass weighted moments; the reference the streaming update must match.
struct TwoPass {
    double mean = 0.0;
    double variance = 0.0;
};

TwoPass two_pass(const std::vector<std::pair<double, double>>& wx) {
    double wsum = 0.0, xsum = 0.0;
    for (auto [w, x] : wx) {
        wsum += w;
        xsum += w * x;
    }
    TwoPass out;
    out.mean = xsum / wsum;
    double m2 = 0.0;
    for (auto [w, x] : wx) m2 += w * (x - out.mean) * (x - out.mean);
    out.variance = m2 / wsum;
    return out;
}

} // namespace

TEST_CASE("streaming weighted moments: pinned small cases") {
    SUBCASE("single sample finalizes to the variance floor") {
        FingerprintBuilder b(small_config(AssignmentStrategy::location_only));
        b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -50.0}}));
        FingerprintDb db = b.finalize();
        const ApStats& st = db.cells.at(0).per_ap.at("ap1");
        CHECK(st.weight_sum == doctest::Approx(1.0));
        CHECK(st.mean == doctest::Approx(-50.0));
        CHECK(st.variance == doctest::Approx(1.0)); // sigma_floor
    }

    SUBCASE("two equal-weight samples give the population moments") {
        FingerprintBuilder b(small_config(AssignmentStrategy::location_only));
        b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -48.0}}));
        b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -52.0}}));
        FingerprintDb db = b.finalize();
        const ApStats& st = db.cells.at(0).per_ap.at("ap1");
        CHECK(st.mean == doctest::Approx(-50.0).epsilon(1e-12));
        CHECK(st.variance == doctest::Approx(4.0).epsilon(1e-12)); // max(4, floor 1)
    }

    SUBCASE("quarter weights land in all four cells") {
        FingerprintBuilder b(small_config(AssignmentStrategy::weighted_confidence));
        b.ingest(tagged({2.0, 2.0}, 0.5, {{"ap1", -50.0}})); // corner-centered circle
        FingerprintDb db = b.finalize();
        REQUIRE(db.cells.size() == 4);
        for (const auto& [idx, cell] : db.cells) {
            const ApStats& st = cell.per_ap.at("ap1");
            CHECK(st.weight_sum == doctest::Approx(0.25).epsilon(1e-12));
            CHECK(st.mean == doctest::Approx(-50.0));
        }
    }
}

TEST_CASE("moment accumulation is permutation invariant and matches two-pass") {
    auto g = make_rng(21, 50);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::pair<double, double>> wx;
        int n = uniform_int(g, 2, 60);
        for (int i = 0; i < n; ++i)
            wx.emplace_back(uniform_in(g, 0.01, 3.0), uniform_in(g, -100.0, -30.0));

        TwoPass ref = two_pass(wx);

        for (int perm = 0; perm < 3; ++perm) {
            std::vector<std::pair<double, double>> shuffled = wx;
            for (std::size_t i = shuffled.size(); i > 1; --i)
                std::swap(shuffled[i - 1], shuffled[uniform_int(g, 0, static_cast<int>(i) - 1)]);
            ApStats st;
            for (auto [w, x] : shuffled) accumulate(st, w, x);
            CHECK(std::abs(st.mean - ref.mean) < 1e-9);
            CHECK(std::abs(st.m2 / st.weight_sum - ref.variance) < 1e-9);
        }
    }
}

TEST_CASE("merged moments equal single-stream accumulation") {
    auto g = make_rng(22, 51);
    for (int trial = 0; trial < 20; ++trial) {
        int n = uniform_int(g, 2, 80);
        int cut = uniform_int(g, 1, n - 1);
        ApStats whole, left, right;
        for (int i = 0; i < n; ++i) {
            double w = uniform_in(g, 0.05, 2.0);
            double x = uniform_in(g, -100.0, -30.0);
            accumulate(whole, w, x);
            accumulate(i < cut ? left : right, w, x);
        }
        ApStats m = merged(left, right);
        CHECK(std::abs(m.weight_sum - whole.weight_sum) < 1e-9);
        CHECK(std::abs(m.mean - whole.mean) < 1e-9);
        CHECK(std::abs(m.m2 - whole.m2) < 1e-6); // absolute accumulators, looser scale
    }
    SUBCASE("merging with an empty side is identity") {
        ApStats st;
        accumulate(st, 1.5, -42.0);
        ApStats m = merged(st, ApStats{});
        CHECK(m.weight_sum == st.weight_sum);
        CHECK(m.mean == st.mean);
    }
}

TEST_CASE("assign_scan strategies") {
    SUBCASE("location_only picks the enclosing cell with weight 1") {
        auto w = assign_scan({{0.5, 0.5}, 2.0}, small_config(AssignmentStrategy::location_only));
        REQUIRE(w.size() == 1);
        CHECK(w.begin()->first == 0);
        CHECK(w.begin()->second == 1.0);
    }

    SUBCASE("unweighted assigns 1.0 to every intersecting cell") {
        // circle straddling the boundary between cells (0,0) and (1,0)
        auto w = assign_scan({{1.0, 0.5}, 0.3},
                             small_config(AssignmentStrategy::unweighted_confidence));
        REQUIRE(w.size() == 2);
        for (const auto& [idx, wi] : w) CHECK(wi == 1.0);
    }

    SUBCASE("weighted corner circle gives four quarters") {
        auto w = assign_scan({{2.0, 2.0}, 0.5},
                             small_config(AssignmentStrategy::weighted_confidence));
        REQUIRE(w.size() == 4);
        for (const auto& [idx, wi] : w) CHECK(wi == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("zero radius degenerates to location_only for every strategy") {
        for (auto s : {AssignmentStrategy::location_only,
                       AssignmentStrategy::unweighted_confidence,
                       AssignmentStrategy::weighted_confidence}) {
            auto w = assign_scan({{1.5, 2.5}, 0.0}, small_config(s));
            REQUIRE(w.size() == 1);
            CHECK(w.begin()->second == 1.0);
        }
    }

    SUBCASE("dust-only overlap falls back to the enclosing cell") {
        auto w = assign_scan({{1.5, 1.5}, 1e-8},
                             small_config(AssignmentStrategy::weighted_confidence));
        REQUIRE(w.size() == 1);
        CHECK(w.begin()->second == 1.0);
    }

    SUBCASE("out-of-grid location throws") {
        CHECK_THROWS_AS(assign_scan({{-1.0, 0.5}, 1.0},
                                    small_config(AssignmentStrategy::location_only)),
                        OutOfArea);
    }
}

TEST_CASE("out-of-area and empty scans are counted and skipped") {
    FingerprintBuilder b(small_config(AssignmentStrategy::location_only));
    b.ingest(tagged({10.0, 10.0}, 0.0, {{"ap1", -50.0}}));
    b.ingest(tagged({0.5, 0.5}, 0.0, {}));
    CHECK(b.out_of_area_count() == 1);
    CHECK(b.empty_scan_count() == 1);
    CHECK(b.assigned_weight_total() == 0.0);
    CHECK_THROWS_AS(b.finalize(), EmptyFingerprint);
}

TEST_CASE("total cell weight equals the sum of assignment weights") {
    auto g = make_rng(23, 52);
    for (auto strategy : {AssignmentStrategy::location_only,
                          AssignmentStrategy::unweighted_confidence,
                          AssignmentStrategy::weighted_confidence}) {
        FingerprintBuilder b(small_config(strategy));
        int in_bounds = 0;
        for (int i = 0; i < 200; ++i) {
            Point2 p{uniform_in(g, -0.5, 4.5), uniform_in(g, -0.5, 4.5)};
            double r = uniform_in(g, 0.0, 1.2);
            TaggedScan ts = tagged(p, r, {{"ap1", uniform_in(g, -90.0, -40.0)}});
            b.ingest(ts);
            if (p.x >= 0 && p.x < 4 && p.y >= 0 && p.y < 4) ++in_bounds;
        }
        FingerprintDb db = b.finalize();
        double total = 0.0;
        for (const auto& [idx, cell] : db.cells) total += cell.total_weight;
        CHECK(std::abs(total - b.assigned_weight_total()) < 1e-9);
        CHECK(b.out_of_area_count() == static_cast<std::size_t>(200 - in_bounds));
        if (strategy == AssignmentStrategy::location_only)
            CHECK(total == doctest::Approx(in_bounds).epsilon(1e-12));
    }

    SUBCASE("weighted interior circles conserve one unit of weight per scan") {
        FingerprintBuilder b(small_config(AssignmentStrategy::weighted_confidence));
        auto g2 = make_rng(24, 53);
        for (int i = 0; i < 100; ++i) {
            double r = uniform_in(g2, 0.05, 1.0);
            Point2 p{uniform_in(g2, r, 4.0 - r), uniform_in(g2, r, 4.0 - r)};
            b.ingest(tagged(p, r, {{"ap1", -60.0}}));
        }
        FingerprintDb db = b.finalize();
        double total = 0.0;
        for (const auto& [idx, cell] : db.cells) total += cell.total_weight;
        CHECK(std::abs(total - 100.0) < 1e-7);
    }
}

TEST_CASE("location_only with exact labels reproduces a manual site survey") {
    auto g = make_rng(25, 54);
    FingerprintBuilder b(small_config(AssignmentStrategy::location_only));

    // manual survey: bucket samples by enclosing cell, two-pass stats per bucket
    std::map<int, std::map<std::string, std::vector<std::pair<double, double>>>> survey;
    GridSpec grid = make_grid({0.0, 0.0}, 1.0, 4, 4);
    for (int i = 0; i < 300; ++i) {
        Point2 p{uniform_in(g, 0.0, 4.0), uniform_in(g, 0.0, 4.0)};
        std::vector<Reading> readings{{"ap1", uniform_in(g, -90.0, -40.0)},
                                      {"ap2", uniform_in(g, -90.0, -40.0)}};
        b.ingest(tagged(p, 0.0, readings));
        int idx = grid.index_of(grid.cell_of(p));
        for (const auto& r : readings) survey[idx][r.id].emplace_back(1.0, r.rss);
    }
    FingerprintDb db = b.finalize();

    REQUIRE(db.cells.size() == survey.size());
    for (const auto& [idx, aps] : survey) {
        const CellStats& cell = db.cells.at(idx);
        CHECK(cell.total_weight == doctest::Approx(aps.begin()->second.size()));
        for (const auto& [ap, samples] : aps) {
            TwoPass ref = two_pass(samples);
            const ApStats& st = cell.per_ap.at(ap);
            CHECK(std::abs(st.mean - ref.mean) < 1e-9);
            CHECK(std::abs(st.variance - std::max(ref.variance, 1.0)) < 1e-9);
        }
    }
}

TEST_CASE("finalize marks sparse cells unusable and enforces the threshold") {
    BuilderConfig cfg = small_config(AssignmentStrategy::location_only, 2.0);
    FingerprintBuilder b(cfg);
    b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -50.0}}));
    b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -54.0}}));
    b.ingest(tagged({1.5, 0.5}, 0.0, {{"ap1", -60.0}})); // weight 1 < 2
    FingerprintDb db = b.finalize();
    CHECK(db.cells.at(0).usable);
    CHECK_FALSE(db.cells.at(1).usable);
    CHECK(db.min_usable_weight == 2.0);

    SUBCASE("no usable cell at all throws EmptyFingerprint") {
        FingerprintBuilder sparse(small_config(AssignmentStrategy::location_only, 5.0));
        sparse.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -50.0}}));
        CHECK_THROWS_AS(sparse.finalize(), EmptyFingerprint);
    }
}

TEST_CASE("shard-and-merge equals single-builder ingestion") {
    auto g = make_rng(26, 55);
    std::vector<TaggedScan> scans;
    for (int i = 0; i < 120; ++i) {
        Point2 p{uniform_in(g, 0.0, 4.0), uniform_in(g, 0.0, 4.0)};
        scans.push_back(tagged(p, uniform_in(g, 0.0, 0.8),
                               {{"ap1", uniform_in(g, -90.0, -40.0)},
                                {"ap2", uniform_in(g, -90.0, -40.0)}}));
    }

    BuilderConfig cfg = small_config(AssignmentStrategy::weighted_confidence);
    FingerprintBuilder whole(cfg), shard_a(cfg), shard_b(cfg);
    for (std::size_t i = 0; i < scans.size(); ++i) {
        whole.ingest(scans[i]);
        (i % 2 == 0 ? shard_a : shard_b).ingest(scans[i]);
    }
    shard_a.merge_from(shard_b);

    FingerprintDb want = whole.finalize();
    FingerprintDb got = shard_a.finalize();
    REQUIRE(got.cells.size() == want.cells.size());
    for (const auto& [idx, wcell] : want.cells) {
        const CellStats& gcell = got.cells.at(idx);
        CHECK(std::abs(gcell.total_weight - wcell.total_weight) < 1e-9);
        CHECK(std::abs(gcell.mass_centroid.x - wcell.mass_centroid.x) < 1e-9);
        CHECK(std::abs(gcell.mass_centroid.y - wcell.mass_centroid.y) < 1e-9);
        REQUIRE(gcell.per_ap.size() == wcell.per_ap.size());
        for (const auto& [ap, wst] : wcell.per_ap) {
            const ApStats& gst = gcell.per_ap.at(ap);
            CHECK(std::abs(gst.weight_sum - wst.weight_sum) < 1e-9);
            CHECK(std::abs(gst.mean - wst.mean) < 1e-9);
            CHECK(std::abs(gst.variance - wst.variance) < 1e-7);
        }
    }

    SUBCASE("mismatched grids refuse to merge") {
        FingerprintBuilder other(small_config(AssignmentStrategy::weighted_confidence));
        BuilderConfig big = small_config(AssignmentStrategy::weighted_confidence);
        big.grid = make_grid({0.0, 0.0}, 1.0, 5, 5);
        FingerprintBuilder different(big);
        CHECK_THROWS_AS(different.merge_from(other), InvalidArgument);
    }
}

TEST_CASE("representative locations") {
    FingerprintBuilder b(small_config(AssignmentStrategy::location_only));
    b.ingest(tagged({0.2, 0.2}, 0.0, {{"ap1", -50.0}}));
    b.ingest(tagged({0.8, 0.8}, 0.0, {{"ap1", -52.0}}));
    FingerprintDb db = b.finalize();
    GridSpec grid = db.grid;

    Point2 com = representative_location(db.cells.at(0), grid, RepresentativeMode::mass_centroid);
    CHECK(com.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(com.y == doctest::Approx(0.5).epsilon(1e-12));

    Point2 geo = representative_location(db.cells.at(0), grid,
                                         RepresentativeMode::geometric_center);
    CHECK(geo.x == doctest::Approx(0.5));
    CHECK(geo.y == doctest::Approx(0.5));

    SUBCASE("3:1 weighting pulls the centroid") {
        FingerprintBuilder wb(small_config(AssignmentStrategy::location_only));
        for (int i = 0; i < 3; ++i) wb.ingest(tagged({0.0, 0.0}, 0.0, {{"ap1", -50.0}}));
        wb.ingest(tagged({0.999, 0.999}, 0.0, {{"ap1", -50.0}}));
        FingerprintDb wdb = wb.finalize();
        Point2 p = representative_location(wdb.cells.at(0), wdb.grid,
                                           RepresentativeMode::mass_centroid);
        CHECK(p.x == doctest::Approx(0.999 / 4.0).epsilon(1e-9));
        CHECK(p.y == doctest::Approx(0.999 / 4.0).epsilon(1e-9));
    }

    SUBCASE("unusable cell is rejected") {
        FingerprintDb copy = db;
        copy.cells.at(0).usable = false;
        CHECK_THROWS_AS(
            representative_location(copy.cells.at(0), grid, RepresentativeMode::mass_centroid),
            UnusableCell);
    }
}

TEST_CASE("refinalize is idempotent on loaded-style stats") {
    FingerprintBuilder b(small_config(AssignmentStrategy::location_only));
    b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -48.0}}));
    b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -52.0}}));
    FingerprintDb db = b.finalize();
    double v0 = db.cells.at(0).per_ap.at("ap1").variance;
    refinalize(db, 1.0, 0.0);
    CHECK(db.cells.at(0).per_ap.at("ap1").variance == v0); // bitwise stable
    CHECK(db.cells.at(0).usable);
}

TEST_CASE("refinalize with an unreachable threshold throws") {
    FingerprintBuilder b(small_config(AssignmentStrategy::location_only));
    b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", -48.0}}));
    FingerprintDb db = b.finalize();
    CHECK_THROWS_AS(refinalize(db, 1.0, 10.0), EmptyFingerprint);
}

TEST_CASE("offline per-device offset converges onto the reference device") {
    BuilderConfig cfg = small_config(AssignmentStrategy::location_only);
    cfg.train_offset_correction = true;
    FingerprintBuilder b(cfg);

    auto g = make_rng(27, 56);
    // reference device seeds the global means, offset device reads +8 dB
    for (int i = 0; i < 40; ++i) {
        double base1 = -60.0 + uniform_in(g, -1.0, 1.0);
        double base2 = -70.0 + uniform_in(g, -1.0, 1.0);
        b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", base1}, {"ap2", base2}}), "ref");
        b.ingest(tagged({0.5, 0.5}, 0.0, {{"ap1", base1 + 8.0}, {"ap2", base2 + 8.0}}),
                 "hot");
    }
    FingerprintDb db = b.finalize();
    const CellStats& cell = db.cells.at(0);
    // without correction the pooled mean would sit ~4 dB above the reference
    CHECK(std::abs(cell.per_ap.at("ap1").mean - (-60.0)) < 1.0);
    CHECK(std::abs(cell.per_ap.at("ap2").mean - (-70.0)) < 1.0);

    SUBCASE("offset-correcting builders refuse to merge") {
        FingerprintBuilder other(cfg);
        FingerprintBuilder target(cfg);
        CHECK_THROWS_AS(target.merge_from(other), InvalidArgument);
    }
}
