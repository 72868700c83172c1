#pragma once

// Exit-gate checks, shared by the acceptance test binary and `platguard verify`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "platguard/platguard.hpp"
#include "platguard/verification/reference.hpp"

namespace platguard::acceptance {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool applicable = true;  // false: documented as not reproducible, no check run
    bool passed = false;
    std::string detail;
    double seconds = 0;
};

namespace detail {

template <typename F>
CriterionResult timed(int id, std::string title, F&& body) {
    CriterionResult r;
    r.id = id;
    r.title = std::move(title);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << v;
    return os.str();
}

}  // namespace detail

inline CriterionResult efficiency_reproduction() {
    return detail::timed(1, "efficiency of the two reference devices", [](CriterionResult& r) {
        const double jetson = compute_efficiency(61.661, 54.174, 9.1);
        const double hailo = compute_efficiency(70.791, 20.878, 10.737);
        r.passed = std::abs(jetson - 0.125) <= 0.001 && std::abs(hailo - 0.316) <= 0.001;
        r.detail = "jetson=" + detail::fmt(jetson, 4) + " (0.125) hailo=" + detail::fmt(hailo, 4) + " (0.316)";
    });
}

inline CriterionResult hardware_claims() {
    CriterionResult r;
    r.id = 2;
    r.title = "device accuracy/latency deltas (+12% acc, -20 ms)";
    r.applicable = false;
    r.passed = true;
    r.detail = "requires the physical accelerators; substituted by criteria 3-9";
    return r;
}

inline CriterionResult nms_oracle_equivalence(std::uint64_t seed = 7) {
    return detail::timed(3, "greedy NMS == brute-force reference, 1000 instances", [&](CriterionResult& r) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> count(0, 20), cls(0, 2), pick(0, 2);
        std::uniform_real_distribution<double> pos(0, 100), size(1, 40), score(0, 1);
        const double thresholds[] = {0.3, 0.45, 0.6};
        std::size_t mismatches = 0;
        constexpr int kInstances = 1000;
        for (int inst = 0; inst < kInstances; ++inst) {
            std::vector<Detection> dets(count(rng));
            for (auto& d : dets) {
                const double x = pos(rng), y = pos(rng);
                d.box = {x, y, x + size(rng), y + size(rng)};
                // Coarse scores so ties get exercised.
                d.score = std::round(score(rng) * 20) / 20;
                d.class_id = cls(rng);
            }
            const double thr = thresholds[pick(rng)];
            if (nms(dets, thr) != reference::brute_force_nms(dets, thr)) ++mismatches;
        }
        r.passed = mismatches == 0;
        r.detail = std::to_string(kInstances) + " instances, " + std::to_string(mismatches) + " mismatches";
    });
}

inline CriterionResult encode_decode_round_trip(std::uint64_t seed = 11) {
    return detail::timed(4, "encode/decode round trip, 100 random frames", [&](CriterionResult& r) {
        std::mt19937_64 rng(seed);
        DecodeConfig cfg;
        const std::uint32_t W = 320, H = 192, classes = 8;
        std::uniform_int_distribution<int> count(1, 8), cls(0, classes - 1);
        std::uniform_real_distribution<double> size(6, 180), level(0.35, 1.0), unit(0, 1);

        double worst_iou = 1, worst_score_err = 0;
        std::size_t spurious = 0, missed = 0, frames = 0;
        while (frames < 100) {
            GroundTruthFrame gt;
            gt.frame_index = frames;
            const int n = count(rng);
            for (int i = 0; i < n; ++i) {
                const double w = std::min(size(rng), double(W)), h = std::min(size(rng), double(H));
                const double cx = 0.5 * w + unit(rng) * (W - w), cy = 0.5 * h + unit(rng) * (H - h);
                gt.objects.push_back({cls(rng), BoundingBox::from_center(cx, cy, w, h), std::uint32_t(i), level(rng)});
            }
            RawTensorSet t;
            try {
                t = encode_objects_to_tensors(gt, cfg, classes, W, H);
            } catch (const EncodingCollisionError&) {
                continue;  // resample: only collision-free frames count
            }
            ++frames;
            const auto dets = decode_all(t, cfg);
            if (dets.size() > gt.objects.size()) spurious += dets.size() - gt.objects.size();
            for (const auto& o : gt.objects) {
                double best = 0, err = 1;
                for (const auto& d : dets)
                    if (d.class_id == o.class_id && iou(d.box, o.box) > best)
                        best = iou(d.box, o.box), err = std::abs(d.score - o.score_level);
                if (best < 0.99 || err > 1e-5) ++missed;
                worst_iou = std::min(worst_iou, best);
                worst_score_err = std::max(worst_score_err, err);
            }
        }
        r.passed = spurious == 0 && missed == 0;
        r.detail = "min IoU=" + detail::fmt(worst_iou) + " max |score err|=" + detail::fmt(worst_score_err, 9) +
                   " missed=" + std::to_string(missed) + " spurious=" + std::to_string(spurious);
    });
}

inline bool allowed_transition(TrainState a, TrainState b) {
    using S = TrainState;
    return a == b || (a == S::Off && b == S::In) || (a == S::In && b == S::On) || (a == S::In && b == S::Out) ||
           (a == S::On && b == S::Out) || (a == S::Out && b == S::Off);
}

/// Approach (moving), stop, depart, vanish.
inline std::vector<TrainObservation> canonical_trace() {
    auto obs = [](bool present, double disp, double occ) {
        TrainObservation o;
        o.present = present;
        o.displacement_px = disp;
        o.occupancy = occ;
        return o;
    };
    std::vector<TrainObservation> t;
    for (int i = 0; i < 3; ++i) t.push_back(obs(false, 0, 0));
    t.push_back(obs(true, 0, 0.2));
    for (int i = 0; i < 6; ++i) t.push_back(obs(true, 6.0, 0.4 + 0.1 * i));
    for (int i = 0; i < 8; ++i) t.push_back(obs(true, 0.0, 1.0));
    for (int i = 0; i < 4; ++i) t.push_back(obs(true, 8.0, 0.5));
    for (int i = 0; i < 8; ++i) t.push_back(obs(false, 0, 0));
    return t;
}

inline CriterionResult fsm_closure_and_cycle(std::uint64_t seed = 13) {
    return detail::timed(5, "train FSM closure (10000 traces) + OFF-IN-ON-OUT-OFF cycle", [&](CriterionResult& r) {
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution present(0.6), still(0.5);
        std::uniform_real_distribution<double> disp(0, 10);
        std::uniform_int_distribution<int> len(1, 60), confirm(1, 6);
        std::size_t bad = 0;
        std::set<std::pair<int, int>> seen;
        for (int trace = 0; trace < 10000; ++trace) {
            FsmConfig cfg{2.0, static_cast<std::uint32_t>(confirm(rng))};
            TrainState s = TrainState::Off;
            FsmCounters c;
            const int n = len(rng);
            for (int i = 0; i < n; ++i) {
                TrainObservation o;
                o.present = present(rng);
                o.displacement_px = o.present ? (still(rng) ? disp(rng) * 0.1 : disp(rng)) : 0.0;
                o.occupancy = o.present ? 0.5 : 0.0;
                auto [next, nc] = step_fsm(s, o, cfg, c);
                if (!allowed_transition(s, next)) ++bad;
                if (next != s) seen.insert({int(s), int(next)});
                s = next;
                c = nc;
            }
        }

        std::vector<TrainState> visited{TrainState::Off};
        TrainStateMachine fsm;
        for (const auto& o : canonical_trace()) {
            fsm.step(o);
            if (fsm.state() != visited.back()) visited.push_back(fsm.state());
        }
        const std::vector<TrainState> expected{TrainState::Off, TrainState::In, TrainState::On, TrainState::Out,
                                               TrainState::Off};
        std::string path;
        for (auto v : visited) path += std::string(path.empty() ? "" : "->") + std::string(to_string(v));
        r.passed = bad == 0 && visited == expected;
        r.detail = std::to_string(bad) + " illegal transitions, " + std::to_string(seen.size()) +
                   " distinct transitions seen; canonical: " + path;
    });
}

inline CriterionResult height_properties(std::uint64_t seed = 17) {
    return detail::timed(6, "height estimate: both forms agree, range, 3*(1-1.5/3)=1.5", [&](CriterionResult& r) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> hc(0.5, 10), dist(0.1, 50), frac(0, 1);
        double worst_rel = 0;
        std::size_t out_of_range = 0;
        for (int i = 0; i < 10000; ++i) {
            const CameraModel cam{hc(rng), dist(rng)};
            const double a = dist(rng);
            const double ratio = frac(rng);
            const double b = ratio * a;
            const double z = (b / a) * cam.optical_axis_ground_m;
            const double h1 = estimate_height(cam, a, b);
            const double h2 = estimate_height_axial(cam, std::min(z, cam.optical_axis_ground_m));
            const double scale = std::max(std::abs(h1), cam.camera_height_m);
            worst_rel = std::max(worst_rel, std::abs(h1 - h2) / scale);
            if (h1 < 0 || h1 > cam.camera_height_m || h2 < 0 || h2 > cam.camera_height_m) ++out_of_range;
        }
        const double exact = estimate_height({3.0, 1.0}, 3.0, 1.5);
        r.passed = worst_rel <= 1e-12 && out_of_range == 0 && exact == 1.5;
        std::ostringstream rel;
        rel << std::scientific << worst_rel;
        r.detail = "max relative disagreement=" + rel.str() + " out_of_range=" +
                   std::to_string(out_of_range) + " h(3,3,1.5)=" + detail::fmt(exact);
    });
}

/// Frames at which the scripted person (actor index `actor`) stands inside the
/// yellow strip, derived from waypoints alone.
inline std::vector<std::uint32_t> analytic_crossing_frames(const ScenarioSpec& spec, std::size_t actor,
                                                           const Zone& danger) {
    double lo = danger.polygon[0].y, hi = lo;
    for (const auto& p : danger.polygon) lo = std::min(lo, p.y), hi = std::max(hi, p.y);
    return reference::frames_with_ground_y_in(spec.actors.at(actor), lo, hi);
}

/// Simulate -> tensor stream file -> playback -> pipeline.
inline CollectingSink run_scenario_through_files(const ScenarioSpec& spec, const PipelineConfig& config,
                                                 const std::filesystem::path& dir, RunSummary* summary = nullptr) {
    std::filesystem::create_directories(dir);
    const auto truth = generate_scenario(spec);
    auto [header, frames] = render_scenario(spec, truth, config.decode);
    const auto path = dir / (spec.name + ".yxt");
    write_tensor_stream(path, header, frames);
    PlaybackBackend backend(path, 1);
    CollectingSink sink;
    const auto s = run_pipeline(backend, config, sink);
    if (summary) *summary = s;
    return sink;
}

inline CriterionResult scenario_fidelity(const std::filesystem::path& workdir) {
    return detail::timed(7, "crossing_during_approach alerts on analytic interval; empty_platform silent",
                         [&](CriterionResult& r) {
                             const auto config = builtin_pipeline_config();
                             const Zone* danger = nullptr;
                             for (const auto& z : config.zones)
                                 if (z.kind == ZoneKind::Danger) danger = &z;

                             const auto crossing = crossing_during_approach_scenario();
                             const auto expected = analytic_crossing_frames(crossing, 1, *danger);
                             const auto sink = run_scenario_through_files(crossing, config, workdir);

                             std::vector<std::uint32_t> critical;
                             std::size_t other = 0;
                             for (const auto& a : sink.alerts) {
                                 if (a.severity == Severity::Critical)
                                     critical.push_back(static_cast<std::uint32_t>(a.frame_index));
                                 else
                                     ++other;
                             }
                             bool interval_ok = !expected.empty() && !critical.empty() &&
                                                std::is_sorted(critical.begin(), critical.end()) &&
                                                std::adjacent_find(critical.begin(), critical.end()) == critical.end();
                             if (interval_ok) {
                                 const auto e_lo = expected.front(), e_hi = expected.back();
                                 const auto c_lo = critical.front(), c_hi = critical.back();
                                 interval_ok = (c_lo + 1 >= e_lo && c_lo <= e_lo + 1) &&
                                               (c_hi + 1 >= e_hi && c_hi <= e_hi + 1) &&
                                               critical.size() == std::size_t(c_hi - c_lo + 1);
                             }

                             const auto empty = run_scenario_through_files(empty_platform_scenario(), config, workdir);
                             r.passed = interval_ok && other == 0 && empty.alerts.empty();
                             auto span = [](const std::vector<std::uint32_t>& v) {
                                 return v.empty() ? std::string("[]")
                                                  : "[" + std::to_string(v.front()) + ", " +
                                                        std::to_string(v.back()) + "]";
                             };
                             r.detail = "analytic " + span(expected) + ", CRITICAL " + span(critical) + " (" +
                                        std::to_string(critical.size()) + " alerts), non-critical " +
                                        std::to_string(other) + "; empty_platform alerts " +
                                        std::to_string(empty.alerts.size());
                         });
}

/// Ten frames, one person box per frame 0-7, predictions planted for
/// 7 TP (frames 0-6), 1 FN (frame 7) and 2 FP (frames 8, 9).
inline std::pair<std::vector<FramePrediction>, std::vector<GroundTruthFrame>> planted_eval_fixture() {
    std::vector<FramePrediction> pred(10);
    std::vector<GroundTruthFrame> gt(10);
    for (std::uint32_t f = 0; f < 10; ++f) {
        pred[f].frame_index = gt[f].frame_index = f;
        const BoundingBox box{10.0 + 20 * f, 20, 26.0 + 20 * f, 60};
        if (f < 8) gt[f].objects.push_back({kPersonClass, box, 0, 1.0});
        if (f < 7 || f >= 8) pred[f].detections.push_back({box, 0.9, kPersonClass});
    }
    return {pred, gt};
}

inline CriterionResult evaluation_arithmetic() {
    return detail::timed(8, "planted 7TP/2FP/1FN fixture: acc 0.7, precision 7/9, recall 7/8", [](CriterionResult& r) {
        const auto [pred, gt] = planted_eval_fixture();
        const auto e = evaluate_run(pred, gt, 0.5, kPersonClass);
        r.passed = e.true_positives == 7 && e.false_positives == 2 && e.false_negatives == 1 && e.accuracy == 0.7 &&
                   e.precision == 7.0 / 9.0 && e.recall == 7.0 / 8.0;
        r.detail = "TP=" + std::to_string(e.true_positives) + " FP=" + std::to_string(e.false_positives) +
                   " FN=" + std::to_string(e.false_negatives) + " acc=" + detail::fmt(e.accuracy) +
                   " precision=" + detail::fmt(e.precision) + " recall=" + detail::fmt(e.recall);
    });
}

inline CriterionResult latency_harness(const std::filesystem::path& workdir) {
    return detail::timed(9, "20 ms playback delay -> p50 in [20, 40] ms; test-clock nearest-rank exact",
                         [&](CriterionResult& r) {
                             std::filesystem::create_directories(workdir);
                             auto config = builtin_pipeline_config();
                             TensorStreamHeader h;
                             h.num_classes = 8;
                             h.image_width = 320;
                             h.image_height = 192;
                             std::vector<RawTensorSet> frames;
                             for (std::uint32_t i = 0; i < 10; ++i)
                                 frames.push_back(make_uniform_frame(h, i, kBackgroundLogit));
                             const auto path = workdir / "background.yxt";
                             write_tensor_stream(path, h, frames);

                             PlaybackBackend slow(path, 1, std::chrono::milliseconds(20));
                             const auto wall = measure_latency(slow, config, 2);
                             const bool wall_ok = wall.stats.p50_ms >= 20.0 && wall.stats.p50_ms <= 40.0;

                             std::vector<RawTensorSet> many(100, frames[0]);
                             MemoryBackend constant(h, std::vector<RawTensorSet>(3, frames[0]));
                             const auto c = measure_latency(constant, config, 0, SequenceClock({10, 10, 10}));
                             const bool const_ok = c.stats.mean_ms == 10 && c.stats.p50_ms == 10;

                             std::vector<double> ramp(100);
                             for (int i = 0; i < 100; ++i) ramp[i] = i + 1;
                             std::shuffle(ramp.begin(), ramp.end(), std::mt19937_64(3));
                             MemoryBackend hundred(h, many);
                             const auto rr = measure_latency(hundred, config, 0, SequenceClock(ramp));
                             const bool ramp_ok = rr.stats.p50_ms == 50 && rr.stats.p95_ms == 95 &&
                                                  rr.stats.p99_ms == 99 && rr.stats.min_ms == 1 &&
                                                  rr.stats.max_ms == 100;

                             r.passed = wall_ok && const_ok && ramp_ok;
                             r.detail = "playback p50=" + detail::fmt(wall.stats.p50_ms, 3) +
                                        " ms; constant mean/p50=" + detail::fmt(c.stats.mean_ms, 1) + "/" +
                                        detail::fmt(c.stats.p50_ms, 1) + "; 1..100 p50/p95/p99=" +
                                        detail::fmt(rr.stats.p50_ms, 0) + "/" + detail::fmt(rr.stats.p95_ms, 0) + "/" +
                                        detail::fmt(rr.stats.p99_ms, 0);
                         });
}

inline std::vector<CriterionResult> run_all(const std::filesystem::path& workdir) {
    return {efficiency_reproduction(),  hardware_claims(),      nms_oracle_equivalence(),
            encode_decode_round_trip(), fsm_closure_and_cycle(), height_properties(),
            scenario_fidelity(workdir), evaluation_arithmetic(), latency_harness(workdir)};
}

inline std::string format_line(const CriterionResult& r) {
    const char* tag = !r.applicable ? "N/A " : (r.passed ? "PASS" : "FAIL");
    return "[" + std::string(tag) + "] " + std::to_string(r.id) + ". " + r.title + " -- " + r.detail + " (" +
           detail::fmt(r.seconds, 3) + " s)";
}

}  // namespace platguard::acceptance
