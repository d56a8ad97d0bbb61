#include <doctest.h>

#include <cmath>

#include "hybridloc/geometry.hpp"
#include "hybridloc/rng.hpp"

using namespace hybridloc;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("circle fully inside a cell intersects with its own area") {
    GridSpec grid = make_grid({0, 0}, 4.0, 2, 2);
    Circle c{{2.0, 2.0}, 1.0};
    CHECK(circle_cell_area(c, grid, {0, 0}) == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("corner-centered circle splits evenly over four cells") {
    GridSpec grid = make_grid({0, 0}, 1.0, 2, 2);
    Circle c{{1.0, 1.0}, 0.5};
    double quarter = kPi * 0.25 / 4.0;
    for (int col = 0; col < 2; ++col)
        for (int row = 0; row < 2; ++row)
            CHECK(circle_cell_area(c, grid, {col, row}) ==
                  doctest::Approx(quarter).epsilon(1e-12));
}

TEST_CASE("distant circle has zero intersection") {
    GridSpec grid = make_grid({0, 0}, 1.0, 2, 2);
    Circle c{{10.0, 10.0}, 1.0};
    CHECK(circle_cell_area(c, grid, {0, 0}) == 0.0);
    CHECK_THROWS_AS(circle_cell_area(c, grid, {5, 0}), InvalidCell);
}

TEST_CASE("axis-straddling but disjoint rectangle gets zero area") {
    Circle c{{0.0, 0.0}, 1.0};
    CHECK(circle_rect_area(c, {{2.0, -0.5}, {3.0, 0.5}}) == doctest::Approx(0.0));
    CHECK(circle_rect_area(c, {{-0.5, -3.0}, {0.5, -2.0}}) == doctest::Approx(0.0));
}

TEST_CASE("half-plane cut recovers the half disk") {
    Circle c{{0.0, 0.0}, 1.0};
    CHECK(circle_rect_area(c, {{0.0, -2.0}, {2.0, 2.0}}) ==
          doctest::Approx(kPi / 2.0).epsilon(1e-12));
}

TEST_CASE("areas are monotone non-decreasing in radius") {
    GridSpec grid = make_grid({0, 0}, 1.0, 5, 5);
    auto g = make_rng(11, 90);
    for (int trial = 0; trial < 50; ++trial) {
        Point2 center{uniform_in(g, 0.0, 5.0), uniform_in(g, 0.0, 5.0)};
        CellId cell{uniform_int(g, 0, 4), uniform_int(g, 0, 4)};
        double prev = 0.0;
        for (double r = 0.1; r <= 3.0; r += 0.1) {
            double a = circle_cell_area({center, r}, grid, cell);
            CHECK(a >= prev - 1e-12);
            prev = a;
        }
    }
}

TEST_CASE("translating circle and grid together leaves areas unchanged") {
    auto g = make_rng(12, 91);
    for (int trial = 0; trial < 50; ++trial) {
        GridSpec grid = make_grid({0, 0}, 1.25, 4, 4);
        Point2 center{uniform_in(g, 0.0, 5.0), uniform_in(g, 0.0, 5.0)};
        double r = uniform_in(g, 0.2, 2.5);
        Point2 shift{uniform_in(g, -40.0, 40.0), uniform_in(g, -40.0, 40.0)};
        GridSpec moved = make_grid(grid.origin + shift, grid.cell_size, grid.cols, grid.rows);
        for (int col = 0; col < 4; ++col)
            for (int row = 0; row < 4; ++row) {
                double a = circle_cell_area({center, r}, grid, {col, row});
                double b = circle_cell_area({center + shift, r}, moved, {col, row});
                CHECK(std::abs(a - b) <= 1e-12);
            }
    }
}

TEST_CASE("monte carlo oracle agrees with the closed form") {
    GridSpec grid = make_grid({0, 0}, 1.0, 6, 6);

    SUBCASE("fully contained circle, 1% relative") {
        GridSpec big = make_grid({0, 0}, 4.0, 2, 2);
        Circle c{{2.0, 2.0}, 1.0};
        auto g = make_rng(42, 92);
        double mc = mc_circle_rect_area(c, big.cell_rect({0, 0}), 1000000, g);
        CHECK(std::abs(mc - kPi) / kPi < 0.01);
    }

    SUBCASE("disjoint case is exactly zero") {
        Circle c{{10.0, 10.0}, 0.5};
        auto g = make_rng(42, 93);
        CHECK(mc_circle_rect_area(c, grid.cell_rect({0, 0}), 10000, g) == 0.0);
    }

    SUBCASE("corner symmetry within 2%") {
        Circle c{{1.0, 1.0}, 0.5};
        double expected = kPi * 0.25 / 4.0;
        for (int col = 0; col < 2; ++col)
            for (int row = 0; row < 2; ++row) {
                auto g = make_rng(42, 94, col * 2 + row);
                double mc = mc_circle_rect_area(c, grid.cell_rect({col, row}), 1000000, g);
                CHECK(std::abs(mc - expected) / expected < 0.02);
            }
    }

    SUBCASE("zero samples is rejected") {
        auto g = make_rng(1, 95);
        CHECK_THROWS_AS(mc_circle_rect_area({{0, 0}, 1.0}, grid.cell_rect({0, 0}), 0, g),
                        InvalidArgument);
    }
}

TEST_CASE("assignment weights") {
    GridSpec grid = make_grid({0, 0}, 1.0, 4, 4);

    SUBCASE("circle fully inside one cell gets weight 1") {
        auto w = assignment_weights({{0.5, 0.5}, 0.3}, grid);
        REQUIRE(w.size() == 1);
        CHECK(w.at(grid.index_of({0, 0})) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("corner-centered circle gives four quarters") {
        auto w = assignment_weights({{2.0, 2.0}, 0.5}, grid);
        REQUIRE(w.size() == 4);
        for (const auto& [idx, wi] : w) CHECK(wi == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("half-outside circle sums to one half") {
        auto w = assignment_weights({{0.0, 2.0}, 0.8}, grid);
        double sum = 0.0;
        for (const auto& [idx, wi] : w) sum += wi;
        CHECK(sum == doctest::Approx(0.5).epsilon(1e-9));
    }

    SUBCASE("interior circles conserve total weight") {
        auto g = make_rng(7, 96);
        for (int trial = 0; trial < 100; ++trial) {
            double r = uniform_in(g, 0.05, 1.9);
            Point2 center{uniform_in(g, r, 4.0 - r), uniform_in(g, r, 4.0 - r)};
            auto w = assignment_weights({center, r}, grid);
            double sum = 0.0;
            for (const auto& [idx, wi] : w) sum += wi;
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }

    SUBCASE("zero radius is rejected here, handled upstream") {
        CHECK_THROWS_AS(assignment_weights({{1.0, 1.0}, 0.0}, grid), InvalidArgument);
    }
}
