#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

#include "core.hpp"
#include "rng.hpp"

namespace hybridloc {

struct Circle {
    Point2 center;
    double radius = 0.0;
};

namespace detail {

// Area of a circular segment cut off by the vertical chord at x in [0, r]:
// integral of sqrt(r^2 - t^2) dt from 0 to x.
inline double segment_integral(double x, double r) {
    x = std::min(x, r);
    return 0.5 * (x * std::sqrt(std::max(r * r - x * x, 0.0)) +
                  r * r * std::asin(std::min(x / r, 1.0)));
}

// Area of the intersection of the disk x^2+y^2 <= r^2 with the axis-aligned
// quadrant rectangle [0,a] x [0,b], for a, b >= 0.
inline double quarter_rect_area(double a, double b, double r) {
    a = std::min(a, r);
    b = std::min(b, r);
    if (a <= 0.0 || b <= 0.0) return 0.0;
    if (a * a + b * b <= r * r) return a * b;
    // Corner (a, b) sticks out. Up to x* the top edge y=b is inside the disk,
    // beyond it the arc bounds the region.
    double xs = std::sqrt(std::max(r * r - b * b, 0.0));
    return b * xs + (segment_integral(a, r) - segment_integral(xs, r));
}

// Signed area of disk INTERSECT [0,x] x [0,y] where x, y may be negative
// (rectangle measured from the origin with sign). Inclusion-exclusion over
// these gives the area over an arbitrary rectangle.
inline double corner_area(double x, double y, double r) {
    double s = 1.0;
    if (x < 0.0) { s = -s; x = -x; }
    if (y < 0.0) { s = -s; y = -y; }
    return s * quarter_rect_area(x, y, r);
}

} // namespace detail

// Exact area of the intersection of `circle` with the rectangle `rect`.
inline double circle_rect_area(const Circle& circle, const Rect& rect) {
    if (!(circle.radius >= 0.0)) throw InvalidArgument("circle radius must be >= 0");
    if (circle.radius == 0.0) return 0.0;
    double r = circle.radius;
    double x0 = rect.lo.x - circle.center.x;
    double x1 = rect.hi.x - circle.center.x;
    double y0 = rect.lo.y - circle.center.y;
    double y1 = rect.hi.y - circle.center.y;
    double a = detail::corner_area(x1, y1, r) - detail::corner_area(x0, y1, r) -
               detail::corner_area(x1, y0, r) + detail::corner_area(x0, y0, r);
    return std::max(a, 0.0);
}

inline double circle_cell_area(const Circle& circle, const GridSpec& grid, CellId cell) {
    return circle_rect_area(circle, grid.cell_rect(cell));
}

// Monte Carlo estimate of circle_rect_area by uniform sampling inside the
// disk. Slow; exists as an independent check of the closed form.
inline double mc_circle_rect_area(const Circle& circle, const Rect& rect,
                                  std::uint64_t n, std::mt19937_64& g) {
    if (n == 0) throw InvalidArgument("mc sample count must be > 0");
    if (!(circle.radius >= 0.0)) throw InvalidArgument("circle radius must be >= 0");
    if (circle.radius == 0.0) return 0.0;
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        double rr = circle.radius * std::sqrt(uniform_unit(g));
        double th = 2.0 * M_PI * uniform_unit(g);
        Point2 p{circle.center.x + rr * std::cos(th), circle.center.y + rr * std::sin(th)};
        if (p.x >= rect.lo.x && p.x < rect.hi.x && p.y >= rect.lo.y && p.y < rect.hi.y)
            ++hits;
    }
    double disk = M_PI * circle.radius * circle.radius;
    return disk * static_cast<double>(hits) / static_cast<double>(n);
}

constexpr double kAreaEps = 1e-9; // intersection areas below this are dust

// Fractional assignment weights of a confidence circle over the grid cells it
// overlaps: w_i = area_i / (pi r^2). Weights sum to 1 for a circle fully
// inside the grid and to the covered fraction otherwise; dust cells omitted.
inline std::map<int, double> assignment_weights(const Circle& circle, const GridSpec& grid) {
    if (!(circle.radius > 0.0))
        throw InvalidArgument("assignment weights need a positive confidence radius");

    int col0 = static_cast<int>(std::floor((circle.center.x - circle.radius - grid.origin.x) /
                                           grid.cell_size));
    int col1 = static_cast<int>(std::floor((circle.center.x + circle.radius - grid.origin.x) /
                                           grid.cell_size));
    int row0 = static_cast<int>(std::floor((circle.center.y - circle.radius - grid.origin.y) /
                                           grid.cell_size));
    int row1 = static_cast<int>(std::floor((circle.center.y + circle.radius - grid.origin.y) /
                                           grid.cell_size));
    col0 = std::max(col0, 0);
    row0 = std::max(row0, 0);
    col1 = std::min(col1, grid.cols - 1);
    row1 = std::min(row1, grid.rows - 1);

    double disk = M_PI * circle.radius * circle.radius;
    std::map<int, double> weights;
    for (int row = row0; row <= row1; ++row) {
        for (int col = col0; col <= col1; ++col) {
            CellId c{col, row};
            double a = circle_rect_area(circle, grid.cell_rect(c));
            if (a > kAreaEps) weights[grid.index_of(c)] = a / disk;
        }
    }
    return weights;
}

// Cells the circle overlaps with non-dust area, without the area weighting.
inline std::set<int> intersecting_cells(const Circle& circle, const GridSpec& grid) {
    std::set<int> out;
    for (const auto& [idx, w] : assignment_weights(circle, grid)) out.insert(idx);
    return out;
}

} // namespace hybridloc
