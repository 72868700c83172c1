#pragma once

// Platform geometry: subject height from camera geometry, detection ground
// points, zone polygons and membership tests.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "platguard/errors.hpp"
#include "platguard/yolox_post.hpp"

namespace platguard {

/// Camera mounted camera_height_m above the platform; its optical axis meets
/// the ground optical_axis_ground_m away.
struct CameraModel {
    double camera_height_m = 0;
    double optical_axis_ground_m = 0;

    void validate() const {
        if (!(camera_height_m > 0)) throw DomainError("camera height must be positive");
        if (!(optical_axis_ground_m > 0)) throw DomainError("optical-axis ground distance must be positive");
    }
};

/// Metric inputs for one subject.
///
/// The ray from the camera through the subject's head continues until it hits
/// the ground at point X. `ground_hit_m` is the camera-to-X distance along
/// that ray, `head_dist_m` the camera-to-head distance on the same ray.
/// Projected onto the optical axis, the head sits at `axial_dist_m` while the
/// axis meets the ground at CameraModel::optical_axis_ground_m; by similar
/// triangles head_dist_m / ground_hit_m == axial_dist_m / optical_axis_ground_m.
struct HeightQuery {
    double ground_hit_m = 0;
    double head_dist_m = 0;
    std::optional<double> axial_dist_m;
};

/// h = Hc * (1 - b/a).
inline double estimate_height(const CameraModel& camera, double a, double b) {
    camera.validate();
    if (!(a > 0)) throw DomainError("ground-hit distance a must be positive");
    if (!(b >= 0) || b > a) throw DomainError("head distance b must lie in [0, a]");
    return camera.camera_height_m * (1.0 - b / a);
}

/// h = Hc * (1 - z/z0).
inline double estimate_height_axial(const CameraModel& camera, double z) {
    camera.validate();
    if (!(z >= 0) || z > camera.optical_axis_ground_m)
        throw DomainError("axial distance z must lie in [0, z0]");
    return camera.camera_height_m * (1.0 - z / camera.optical_axis_ground_m);
}

inline double estimate_height(const CameraModel& camera, const HeightQuery& q) {
    if (q.axial_dist_m) return estimate_height_axial(camera, *q.axial_dist_m);
    return estimate_height(camera, q.ground_hit_m, q.head_dist_m);
}

struct Point {
    double x = 0, y = 0;
    bool operator==(const Point&) const = default;
};

using GroundPoint = Point;

/// Bottom-center of the box: where a standing person touches the platform.
inline GroundPoint ground_point(const Detection& d) noexcept { return {0.5 * (d.box.x1 + d.box.x2), d.box.y2}; }

enum class ZoneKind { Danger, Risk, Monitor };

inline std::string_view to_string(ZoneKind k) noexcept {
    switch (k) {
        case ZoneKind::Danger: return "DANGER";
        case ZoneKind::Risk: return "RISK";
        case ZoneKind::Monitor: return "MONITOR";
    }
    return "?";
}

inline std::optional<ZoneKind> zone_kind_from_string(std::string_view s) noexcept {
    if (s == "DANGER") return ZoneKind::Danger;
    if (s == "RISK") return ZoneKind::Risk;
    if (s == "MONITOR") return ZoneKind::Monitor;
    return std::nullopt;
}

namespace geom {

inline double cross(const Point& o, const Point& a, const Point& b) noexcept {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const Point& p, const Point& a, const Point& b) noexcept {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double tol = 1e-9 * std::max(1.0, len);
    if (std::abs(cross(a, b, p)) > tol * std::max(1.0, len)) return false;
    return p.x >= std::min(a.x, b.x) - tol && p.x <= std::max(a.x, b.x) + tol &&
           p.y >= std::min(a.y, b.y) - tol && p.y <= std::max(a.y, b.y) + tol;
}

inline int orientation(const Point& a, const Point& b, const Point& c) noexcept {
    const double v = cross(a, b, c);
    return (v > 0) - (v < 0);
}

inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) noexcept {
    const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    return (o1 == 0 && on_segment(q1, p1, p2)) || (o2 == 0 && on_segment(q2, p1, p2)) ||
           (o3 == 0 && on_segment(p1, q1, q2)) || (o4 == 0 && on_segment(p2, q1, q2));
}

/// Signed shoelace area (positive for counter-clockwise in a y-up frame).
inline double signed_area(const std::vector<Point>& poly) noexcept {
    double a = 0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

inline double area(const std::vector<Point>& poly) noexcept { return std::abs(signed_area(poly)); }

inline bool is_simple(const std::vector<Point>& poly) noexcept {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
        }
    }
    return true;
}

/// Sutherland-Hodgman clip of `subject` against an axis-aligned box.
/// Correct for the area of any simple subject polygon (the clip window is convex).
inline std::vector<Point> clip_to_box(const std::vector<Point>& subject, const BoundingBox& box) {
    std::vector<Point> out = subject;
    auto clip_edge = [&](auto inside, auto intersect) {
        std::vector<Point> in = std::move(out);
        out.clear();
        for (std::size_t i = 0, n = in.size(); i < n; ++i) {
            const Point& cur = in[i];
            const Point& prev = in[(i + n - 1) % n];
            const bool ci = inside(cur), pi = inside(prev);
            if (ci) {
                if (!pi) out.push_back(intersect(prev, cur));
                out.push_back(cur);
            } else if (pi) {
                out.push_back(intersect(prev, cur));
            }
        }
    };
    auto at_x = [](const Point& a, const Point& b, double x) {
        const double t = (x - a.x) / (b.x - a.x);
        return Point{x, a.y + t * (b.y - a.y)};
    };
    auto at_y = [](const Point& a, const Point& b, double y) {
        const double t = (y - a.y) / (b.y - a.y);
        return Point{a.x + t * (b.x - a.x), y};
    };
    clip_edge([&](const Point& p) { return p.x >= box.x1; }, [&](const Point& a, const Point& b) { return at_x(a, b, box.x1); });
    clip_edge([&](const Point& p) { return p.x <= box.x2; }, [&](const Point& a, const Point& b) { return at_x(a, b, box.x2); });
    clip_edge([&](const Point& p) { return p.y >= box.y1; }, [&](const Point& a, const Point& b) { return at_y(a, b, box.y1); });
    clip_edge([&](const Point& p) { return p.y <= box.y2; }, [&](const Point& a, const Point& b) { return at_y(a, b, box.y2); });
    return out;
}

}  // namespace geom

struct Zone {
    ZoneKind kind = ZoneKind::Danger;
    std::vector<Point> polygon;
    std::string name;

    void validate() const {
        if (polygon.size() < 3) throw ConfigError("zone '" + name + "' needs at least 3 vertices");
        for (const auto& p : polygon)
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ConfigError("zone '" + name + "' has a non-finite vertex");
        if (!geom::is_simple(polygon)) throw ConfigError("zone '" + name + "' polygon self-intersects");
        if (!(geom::area(polygon) > 0)) throw ConfigError("zone '" + name + "' has zero area");
    }

    double area() const noexcept { return geom::area(polygon); }
};

/// Even-odd ray casting; points on the boundary count as inside.
inline bool point_in_zone(const GroundPoint& p, const Zone& zone) noexcept {
    const auto& poly = zone.polygon;
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i)
        if (geom::on_segment(p, poly[i], poly[(i + 1) % n])) return true;

    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

/// Area of the zone covered by `box`.
inline double overlap_area(const BoundingBox& box, const Zone& zone) {
    if (!(box.area() > 0)) return 0.0;
    return geom::area(geom::clip_to_box(zone.polygon, box));
}

}  // namespace platguard
