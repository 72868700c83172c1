#pragma once

// Detection accuracy against ground truth, per-frame latency statistics and
// the power-normalised efficiency figure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "platguard/errors.hpp"
#include "platguard/safety_pipeline.hpp"
#include "platguard/scenario_sim.hpp"
#include "platguard/yolox_post.hpp"

namespace platguard {

struct MatchCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    bool operator==(const MatchCounts&) const = default;
};

/// Accuracy is the Jaccard-style ratio TP / (TP + FP + FN). Every ratio is 0
/// when its denominator is 0.
struct EvalResult {
    std::uint64_t true_positives = 0;
    std::uint64_t false_positives = 0;
    std::uint64_t false_negatives = 0;
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double iou_threshold = 0.5;
};

inline double safe_ratio(std::uint64_t num, std::uint64_t den) noexcept {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline EvalResult make_eval_result(const MatchCounts& c, double iou_threshold) noexcept {
    return {c.tp,
            c.fp,
            c.fn,
            safe_ratio(c.tp, c.tp + c.fp + c.fn),
            safe_ratio(c.tp, c.tp + c.fp),
            safe_ratio(c.tp, c.tp + c.fn),
            iou_threshold};
}

/// Greedy matching for one frame and one class: predictions in descending
/// score order each take the unmatched ground-truth box with the highest
/// IoU >= threshold.
inline MatchCounts match_detections(std::span<const Detection> pred, const GroundTruthFrame& gt,
                                    double iou_threshold, int class_id) {
    std::vector<const Detection*> preds;
    for (const auto& d : pred)
        if (d.class_id == class_id) preds.push_back(&d);
    std::stable_sort(preds.begin(), preds.end(),
                     [](const Detection* a, const Detection* b) { return a->score > b->score; });

    std::vector<const BoundingBox*> truth;
    for (const auto& o : gt.objects)
        if (o.class_id == class_id) truth.push_back(&o.box);
    std::vector<bool> taken(truth.size(), false);

    MatchCounts c;
    for (const Detection* p : preds) {
        std::optional<std::size_t> best;
        double best_iou = -1;
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (taken[g]) continue;
            const double v = iou(p->box, *truth[g]);
            if (v >= iou_threshold && v > best_iou) best = g, best_iou = v;
        }
        if (best) {
            taken[*best] = true;
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    c.fn = truth.size() - c.tp;
    return c;
}

struct FramePrediction {
    std::uint64_t frame_index = 0;
    std::vector<Detection> detections;
};

/// Sums per-frame matches. An empty prediction stream means "nothing
/// detected anywhere"; otherwise both streams must list the same frames in
/// the same order.
inline EvalResult evaluate_run(std::span<const FramePrediction> pred, std::span<const GroundTruthFrame> gt,
                               double iou_threshold, int class_id) {
    if (!pred.empty()) {
        if (pred.size() != gt.size())
            throw AlignmentError("prediction stream has " + std::to_string(pred.size()) +
                                 " frames, ground truth has " + std::to_string(gt.size()));
        for (std::size_t i = 0; i < gt.size(); ++i)
            if (pred[i].frame_index != gt[i].frame_index)
                throw AlignmentError("frame mismatch at position " + std::to_string(i) + ": prediction " +
                                     std::to_string(pred[i].frame_index) + " vs ground truth " +
                                     std::to_string(gt[i].frame_index));
    }
    MatchCounts total;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const std::span<const Detection> dets =
            pred.empty() ? std::span<const Detection>{} : std::span<const Detection>{pred[i].detections};
        const auto c = match_detections(dets, gt[i], iou_threshold, class_id);
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
    }
    return make_eval_result(total, iou_threshold);
}

/// accuracy_pct / (latency_ms * power_w); higher is better.
inline double compute_efficiency(double accuracy_pct, double latency_ms, double power_w) {
    if (!(latency_ms > 0)) throw DomainError("latency_ms must be positive");
    if (!(power_w > 0)) throw DomainError("power_w must be positive");
    return accuracy_pct / (latency_ms * power_w);
}

struct LatencyStats {
    double mean_ms = 0, p50_ms = 0, p95_ms = 0, p99_ms = 0, min_ms = 0, max_ms = 0;
    std::size_t sample_count = 0;
};

/// Nearest-rank percentile of an ascending sample: the value at rank ceil(p/100 * n).
inline double nearest_rank(std::span<const double> sorted, double pct) {
    if (sorted.empty()) throw InsufficientSamplesError("percentile of an empty sample");
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

inline LatencyStats compute_latency_stats(std::span<const double> samples_ms) {
    if (samples_ms.empty()) throw InsufficientSamplesError("no latency samples");
    std::vector<double> s(samples_ms.begin(), samples_ms.end());
    std::sort(s.begin(), s.end());
    LatencyStats st;
    st.sample_count = s.size();
    st.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    st.min_ms = s.front();
    st.max_ms = s.back();
    st.p50_ms = nearest_rank(s, 50);
    st.p95_ms = nearest_rank(s, 95);
    st.p99_ms = nearest_rank(s, 99);
    return st;
}

struct BenchRecord {
    std::uint64_t frame_index = 0;
    double end_to_end_ms = 0;
    StageLatency stages;
};

struct SteadyClock {
    double now_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }
};

/// Test clock: the i-th measured interval lasts durations[i] ms. Calls
/// alternate start, end, start, end, ...
class SequenceClock {
public:
    explicit SequenceClock(std::vector<double> durations_ms) : durations_(std::move(durations_ms)) {}

    double now_ms() {
        const bool is_end = (calls_++ % 2) == 1;
        if (!is_end) return t_;
        const std::size_t i = interval_++;
        t_ += i < durations_.size() ? durations_[i] : 0.0;
        return t_;
    }

private:
    std::vector<double> durations_;
    double t_ = 0;
    std::size_t calls_ = 0;
    std::size_t interval_ = 0;
};

struct LatencyRun {
    LatencyStats stats;
    std::vector<BenchRecord> records;  // post-warmup frames only
    std::vector<FrameResult> results;  // every frame, warmup included
};

/// Single-threaded wall-clock harness. A frame's end-to-end latency spans
/// fetching it from the backend and processing it, so backend (accelerator)
/// time is included.
template <typename Clock = SteadyClock>
LatencyRun measure_latency(InferenceBackendPort& backend, const PipelineConfig& config, std::size_t warmup_frames,
                           Clock&& clock = Clock{}) {
    const auto& geom = backend.geometry();
    config.validate(geom.num_classes);
    if (geom.frame_count < warmup_frames + 1)
        throw InsufficientSamplesError("backend has " + std::to_string(geom.frame_count) + " frames, need more than " +
                                       std::to_string(warmup_frames) + " warmup frames");

    LatencyRun run;
    std::vector<double> samples;
    TrainStateMachine fsm(config.fsm);
    for (std::size_t i = 0;; ++i) {
        const double t0 = clock.now_ms();
        auto frame = backend.next_frame();
        if (!frame) break;
        FrameResult r = process_frame(*frame, config, fsm);
        const double t1 = clock.now_ms();
        if (i >= warmup_frames) {
            run.records.push_back({r.frame_index, t1 - t0, r.latency});
            samples.push_back(t1 - t0);
        }
        run.results.push_back(std::move(r));
    }
    if (samples.empty()) throw InsufficientSamplesError("no frames left after warmup");
    run.stats = compute_latency_stats(samples);
    return run;
}

inline std::vector<FramePrediction> predictions_from_results(std::span<const FrameResult> results) {
    std::vector<FramePrediction> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back({r.frame_index, r.detections});
    return out;
}

// ---------------------------------------------------------------------------
// I/O

inline void write_bench_csv(std::ostream& os, std::span<const BenchRecord> records) {
    os << "frame,end_to_end_ms,decode_ms,nms_ms,geometry_ms,fsm_ms\n";
    for (const auto& r : records)
        os << r.frame_index << ',' << fixed6(r.end_to_end_ms) << ',' << fixed6(r.stages.decode_ms) << ','
           << fixed6(r.stages.nms_ms) << ',' << fixed6(r.stages.geometry_ms) << ',' << fixed6(r.stages.fsm_ms) << '\n';
}

inline nlohmann::json to_json(const LatencyStats& s) {
    return {{"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"p99_ms", s.p99_ms},
            {"min_ms", s.min_ms},   {"max_ms", s.max_ms}, {"sample_count", s.sample_count}};
}

inline nlohmann::json to_json(const EvalResult& e) {
    return {{"true_positives", e.true_positives},
            {"false_positives", e.false_positives},
            {"false_negatives", e.false_negatives},
            {"accuracy", e.accuracy},
            {"precision", e.precision},
            {"recall", e.recall},
            {"iou_threshold", e.iou_threshold}};
}

/// Parses {"frame": n, "detections": [{"box": [...], "score": s, "class": c}, ...]}
/// lines. Extra keys (as in pipeline result records) are ignored.
inline std::vector<FramePrediction> read_predictions_jsonl(std::istream& is) {
    std::vector<FramePrediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            FramePrediction p;
            p.frame_index = j.at("frame").get<std::uint64_t>();
            for (const auto& d : j.at("detections")) {
                const auto& b = d.at("box");
                p.detections.push_back({{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                         b.at(3).get<double>()},
                                        d.at("score").get<double>(),
                                        d.at("class").get<int>()});
            }
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("predictions line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace platguard
