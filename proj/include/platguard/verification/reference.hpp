#pragma once

// Slow, independently written reference implementations. They deliberately
// share no code with the production paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "platguard/scenario_sim.hpp"
#include "platguard/station_geometry.hpp"
#include "platguard/yolox_post.hpp"

namespace platguard::reference {

/// Overlap via explicit interval intersection.
inline double box_iou(const BoundingBox& a, const BoundingBox& b) {
    auto overlap = [](double lo1, double hi1, double lo2, double hi2) {
        const double lo = lo1 > lo2 ? lo1 : lo2;
        const double hi = hi1 < hi2 ? hi1 : hi2;
        return hi > lo ? hi - lo : 0.0;
    };
    const double inter = overlap(a.x1, a.x2, b.x1, b.x2) * overlap(a.y1, a.y2, b.y1, b.y2);
    const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
    const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
    const double uni = area_a + area_b - inter;
    return uni > 0 ? inter / uni : 0.0;
}

/// Pairwise suppression: a box survives unless some earlier-ranked survivor of
/// its class overlaps it. Ranking by bubble sort on (score desc, class asc, index asc).
inline std::vector<Detection> brute_force_nms(std::span<const Detection> dets, double iou_threshold) {
    const std::size_t n = dets.size();
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = i;
    auto before = [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        if (dets[a].class_id != dets[b].class_id) return dets[a].class_id < dets[b].class_id;
        return a < b;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j + 1 < n - i; ++j)
            if (before(rank[j + 1], rank[j])) std::swap(rank[j], rank[j + 1]);

    std::vector<bool> suppressed(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (suppressed[rank[i]]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& hi = dets[rank[i]];
            const auto& lo = dets[rank[j]];
            if (hi.class_id == lo.class_id && box_iou(hi.box, lo.box) > iou_threshold) suppressed[rank[j]] = true;
        }
    }
    std::vector<Detection> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!suppressed[rank[i]]) out.push_back(dets[rank[i]]);
    return out;
}

/// Winding number plus explicit on-segment check (boundary counts as inside).
inline bool winding_inside(const Point& p, const std::vector<Point>& poly) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        const double cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        const double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
        const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
        if (std::abs(cr) <= 1e-12 * std::max(1.0, len2) && dot >= 0 && dot <= len2) return true;
    }
    int wn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if (a.y <= p.y) {
            if (b.y > p.y && side > 0) ++wn;
        } else if (b.y <= p.y && side < 0) {
            --wn;
        }
    }
    return wn != 0;
}

/// Maximum number of one-to-one (prediction, ground truth) pairs with IoU >= threshold,
/// by exhaustive search. Exponential; fixtures only.
inline std::uint64_t optimal_match_count(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt,
                                         double iou_threshold) {
    std::vector<bool> used(gt.size(), false);
    std::function<std::uint64_t(std::size_t)> go = [&](std::size_t i) -> std::uint64_t {
        if (i == pred.size()) return 0;
        std::uint64_t best = go(i + 1);
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (used[g] || box_iou(pred[i], gt[g]) < iou_threshold) continue;
            used[g] = true;
            best = std::max(best, 1 + go(i + 1));
            used[g] = false;
        }
        return best;
    };
    return go(0);
}

/// Integer frames in [first, last] at which a waypoint-scripted actor's
/// bottom edge lies within [y_lo, y_hi], solved segment by segment in closed
/// form. Assumes the zone spans the whole image width.
inline std::vector<std::uint32_t> frames_with_ground_y_in(const Actor& actor, double y_lo, double y_hi) {
    std::vector<std::uint32_t> out;
    const auto& w = actor.waypoints;
    auto ground = [](const Waypoint& p) { return p.center_y + 0.5 * p.height; };
    auto add_range = [&](double f_lo, double f_hi) {
        for (auto f = static_cast<std::int64_t>(std::ceil(f_lo - 1e-9)); f <= static_cast<std::int64_t>(std::floor(f_hi + 1e-9)); ++f)
            if (out.empty() || out.back() < static_cast<std::uint32_t>(f)) out.push_back(static_cast<std::uint32_t>(f));
    };
    if (w.size() == 1) {
        const double g = ground(w[0]);
        if (g >= y_lo && g <= y_hi) add_range(w[0].frame, w[0].frame);
        return out;
    }
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const double f0 = w[i].frame, f1 = w[i + 1].frame;
        const double g0 = ground(w[i]), g1 = ground(w[i + 1]);
        const double slope = (g1 - g0) / (f1 - f0);
        double lo = f0, hi = f1;
        if (slope == 0) {
            if (g0 < y_lo || g0 > y_hi) continue;
        } else {
            double a = f0 + (y_lo - g0) / slope, b = f0 + (y_hi - g0) / slope;
            if (a > b) std::swap(a, b);
            lo = std::max(lo, a);
            hi = std::min(hi, b);
            if (lo > hi) continue;
        }
        add_range(lo, hi);
    }
    return out;
}

}  // namespace platguard::reference
