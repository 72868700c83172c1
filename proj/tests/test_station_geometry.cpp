#include "platguard/station_geometry.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "platguard/verification/reference.hpp"

namespace platguard {
namespace {

Zone square(double s = 1.0, ZoneKind kind = ZoneKind::Danger) {
    return {kind, {{0, 0}, {s, 0}, {s, s}, {0, s}}, "sq"};
}

TEST(EstimateHeight, Examples) {
    EXPECT_DOUBLE_EQ(estimate_height({3.0, 6.0}, 3.0, 1.5), 1.5);
    EXPECT_DOUBLE_EQ(estimate_height({3.0, 6.0}, 2.0, 2.0), 0.0);
    // 2.5 * (1 - 1/4) = 1.875
    EXPECT_DOUBLE_EQ(estimate_height({2.5, 6.0}, 4.0, 1.0), 1.875);
}

TEST(EstimateHeight, AxialExamples) {
    const CameraModel cam{2.5, 3.0};
    // 2.5 * (1 - 1.2/3) = 1.5
    EXPECT_NEAR(estimate_height_axial(cam, 1.2), 1.5, 1e-12);
    EXPECT_DOUBLE_EQ(estimate_height_axial(cam, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(estimate_height_axial(cam, 0.0), 2.5);
}

TEST(EstimateHeight, DomainErrors) {
    const CameraModel cam{3.0, 6.0};
    EXPECT_THROW(estimate_height(cam, 0.0, 0.0), DomainError);
    EXPECT_THROW(estimate_height(cam, -1.0, 0.0), DomainError);
    EXPECT_THROW(estimate_height(cam, 2.0, -0.1), DomainError);
    EXPECT_THROW(estimate_height(cam, 2.0, 2.1), DomainError);
    EXPECT_THROW(estimate_height_axial(cam, -0.1), DomainError);
    EXPECT_THROW(estimate_height_axial(cam, 6.01), DomainError);
    EXPECT_THROW(estimate_height(CameraModel{0.0, 6.0}, 2.0, 1.0), DomainError);
    EXPECT_THROW(estimate_height_axial(CameraModel{3.0, 0.0}, 0.0), DomainError);
}

TEST(EstimateHeight, QueryDispatchesOnAxialField) {
    const CameraModel cam{3.0, 6.0};
    EXPECT_DOUBLE_EQ(estimate_height(cam, HeightQuery{3.0, 1.5, std::nullopt}), 1.5);
    EXPECT_DOUBLE_EQ(estimate_height(cam, HeightQuery{0, 0, 3.0}), 1.5);
}

TEST(EstimateHeight, FormsAgreeAndStayInRange) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(0.1, 20.0), frac(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const CameraModel cam{pos(rng), pos(rng)};
        const double a = pos(rng), r = frac(rng);
        const double b = r * a;
        const double z = (b / a) * cam.optical_axis_ground_m;
        if (z > cam.optical_axis_ground_m) continue;
        const double h1 = estimate_height(cam, a, b);
        const double h2 = estimate_height_axial(cam, z);
        EXPECT_NEAR(h1, h2, 1e-12 * cam.camera_height_m);
        EXPECT_GE(h1, 0.0);
        EXPECT_LE(h1, cam.camera_height_m);
    }
}

TEST(EstimateHeight, DecreasingInHeadDistance) {
    const CameraModel cam{3.2, 7.0};
    const double a = 5.0;
    double prev = estimate_height(cam, a, 0.0);
    for (int i = 1; i <= 500; ++i) {
        const double h = estimate_height(cam, a, a * i / 500.0);
        EXPECT_LT(h, prev);
        prev = h;
    }
    EXPECT_DOUBLE_EQ(prev, 0.0);
}

TEST(GroundPoint, Examples) {
    EXPECT_EQ(ground_point({{10, 10, 30, 50}, 1, 0}), (Point{20, 50}));
    EXPECT_EQ(ground_point({{5, 5, 5, 5}, 1, 0}), (Point{5, 5}));
    EXPECT_EQ(ground_point({{0, 0, 7, 3}, 1, 0}), (Point{3.5, 3}));
}

TEST(GroundPoint, LiesOnBottomEdge) {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> v(-100, 100), s(0, 50);
    for (int i = 0; i < 2000; ++i) {
        const double x = v(rng), y = v(rng);
        const BoundingBox b{x, y, x + s(rng), y + s(rng)};
        const auto g = ground_point({b, 0.5, 0});
        EXPECT_EQ(g.y, b.y2);
        EXPECT_GE(g.x, b.x1);
        EXPECT_LE(g.x, b.x2);
    }
}

TEST(PointInZone, UnitSquareExamples) {
    const Zone z = square();
    EXPECT_TRUE(point_in_zone({0.5, 0.5}, z));
    EXPECT_FALSE(point_in_zone({2, 2}, z));
    EXPECT_TRUE(point_in_zone({1, 0.5}, z));
    EXPECT_TRUE(reference::winding_inside({1, 0.5}, z.polygon));
}

TEST(PointInZone, VerticesAndEdgesCountInside) {
    const Zone z = square(4);
    for (const Point p : {Point{0, 0}, Point{4, 4}, Point{2, 0}, Point{0, 3}, Point{4, 1}})
        EXPECT_TRUE(point_in_zone(p, z)) << p.x << "," << p.y;
    EXPECT_FALSE(point_in_zone({4.0001, 1}, z));
}

std::vector<Point> random_star(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n(3, 9);
    std::uniform_real_distribution<double> r(5, 40);
    const int k = n(rng);
    std::vector<Point> poly;
    for (int i = 0; i < k; ++i) {
        const double th = 2 * M_PI * i / k;
        const double rad = r(rng);
        poly.push_back({50 + rad * std::cos(th), 50 + rad * std::sin(th)});
    }
    return poly;
}

TEST(PointInZone, AgreesWithWindingOracle) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> p(0, 100);
    for (int trial = 0; trial < 300; ++trial) {
        const Zone z{ZoneKind::Monitor, random_star(rng), "star"};
        for (int i = 0; i < 50; ++i) {
            const Point q{p(rng), p(rng)};
            EXPECT_EQ(point_in_zone(q, z), reference::winding_inside(q, z.polygon));
        }
    }
}

TEST(PointInZone, InvariantUnderRotationAndReversal) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> p(0, 100);
    for (int trial = 0; trial < 200; ++trial) {
        Zone z{ZoneKind::Danger, random_star(rng), "star"};
        std::vector<Point> probes;
        for (int i = 0; i < 20; ++i) probes.push_back({p(rng), p(rng)});
        probes.push_back(z.polygon[0]);
        std::vector<bool> base;
        for (const auto& q : probes) base.push_back(point_in_zone(q, z));
        for (std::size_t rot = 0; rot < z.polygon.size(); ++rot) {
            Zone r = z;
            std::rotate(r.polygon.begin(), r.polygon.begin() + static_cast<std::ptrdiff_t>(rot), r.polygon.end());
            Zone rev = r;
            std::reverse(rev.polygon.begin(), rev.polygon.end());
            for (std::size_t i = 0; i < probes.size(); ++i) {
                EXPECT_EQ(point_in_zone(probes[i], r), base[i]);
                EXPECT_EQ(point_in_zone(probes[i], rev), base[i]);
            }
        }
    }
}

TEST(ZoneValidation, RejectsBadPolygons) {
    EXPECT_NO_THROW(square().validate());
    Zone two{ZoneKind::Danger, {{0, 0}, {1, 1}}, "two"};
    EXPECT_THROW(two.validate(), ConfigError);
    Zone bowtie{ZoneKind::Danger, {{0, 0}, {1, 1}, {1, 0}, {0, 1}}, "bowtie"};
    EXPECT_THROW(bowtie.validate(), ConfigError);
    Zone flat{ZoneKind::Danger, {{0, 0}, {1, 0}, {2, 0}}, "flat"};
    EXPECT_THROW(flat.validate(), ConfigError);
    Zone nan{ZoneKind::Danger, {{0, 0}, {1, 0}, {0, std::nan("")}}, "nan"};
    EXPECT_THROW(nan.validate(), ConfigError);
}

TEST(ZoneKindNames, RoundTrip) {
    for (auto k : {ZoneKind::Danger, ZoneKind::Risk, ZoneKind::Monitor})
        EXPECT_EQ(zone_kind_from_string(to_string(k)), k);
    EXPECT_FALSE(zone_kind_from_string("SAFE").has_value());
}

TEST(OverlapArea, BoxAgainstRectangleAndTriangle) {
    const Zone rect{ZoneKind::Risk, {{0, 0}, {100, 0}, {100, 50}, {0, 50}}, "r"};
    EXPECT_DOUBLE_EQ(overlap_area({0, 0, 50, 50}, rect), 2500.0);
    EXPECT_DOUBLE_EQ(overlap_area({-10, -10, 200, 200}, rect), 5000.0);
    EXPECT_DOUBLE_EQ(overlap_area({200, 0, 300, 50}, rect), 0.0);
    EXPECT_DOUBLE_EQ(overlap_area({10, 10, 10, 20}, rect), 0.0);
    // Right triangle (0,0),(10,0),(0,10) cut by [0,5]x[0,5]: full 25 square lies under x+y<=10.
    const Zone tri{ZoneKind::Risk, {{0, 0}, {10, 0}, {0, 10}}, "t"};
    EXPECT_NEAR(overlap_area({0, 0, 5, 5}, tri), 25.0, 1e-12);
    // [5,10]x[0,5] keeps the triangle x+y<=10 part: 25 - 12.5.
    EXPECT_NEAR(overlap_area({5, 0, 10, 5}, tri), 12.5, 1e-12);
}

}  // namespace
}  // namespace platguard
