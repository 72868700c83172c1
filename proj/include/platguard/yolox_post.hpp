#pragma once

// YOLOX head post-processing: anchor-free grid decode, objectness x class
// score fusion, IoU and class-aware greedy NMS.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "platguard/errors.hpp"
#include "platguard/tensor_io.hpp"

namespace platguard {

/// Axis-aligned box in image pixels, origin top-left.
struct BoundingBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }
    double center_x() const noexcept { return 0.5 * (x1 + x2); }
    double center_y() const noexcept { return 0.5 * (y1 + y2); }
    bool valid() const noexcept {
        return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 <= x2 &&
               y1 <= y2;
    }

    static BoundingBox from_center(double cx, double cy, double w, double h) noexcept {
        return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    bool operator==(const BoundingBox&) const = default;
};

struct Detection {
    BoundingBox box;
    double score = 0;  // sigmoid(objectness) * sigmoid(class logit)
    int class_id = 0;

    bool operator==(const Detection&) const = default;
};

struct DecodeConfig {
    std::array<std::uint32_t, kNumLevels> strides{8, 16, 32};
    double conf_threshold = 0.30;
    double nms_iou_threshold = 0.45;
    int person_class_id = 0;
    int train_class_id = 6;  // COCO "train"

    void validate(std::uint32_t num_classes) const {
        if (!(conf_threshold >= 0 && conf_threshold <= 1)) throw ConfigError("conf_threshold must be in [0,1]");
        if (!(nms_iou_threshold >= 0 && nms_iou_threshold <= 1))
            throw ConfigError("nms_iou_threshold must be in [0,1]");
        if (person_class_id == train_class_id) throw ConfigError("person and train class ids must differ");
        const auto n = static_cast<std::int64_t>(num_classes);
        if (person_class_id < 0 || person_class_id >= n) throw ConfigError("person_class_id out of range");
        if (train_class_id < 0 || train_class_id >= n) throw ConfigError("train_class_id out of range");
    }
};

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

inline constexpr std::uint32_t kBoxChannels = 4;
inline constexpr std::uint32_t kObjChannel = 4;
inline constexpr std::uint32_t kFirstClassChannel = 5;

/// Decodes one stride level. Cell layout: (tx, ty, tw, th, obj_logit, class_logits...).
/// Every element is checked for finiteness, including cells below threshold.
inline std::vector<Detection> decode_head(const Tensor& tensor, std::uint32_t stride, double conf_threshold) {
    if (tensor.channels < kFirstClassChannel + 1)
        throw GeometryError("head tensor has " + std::to_string(tensor.channels) +
                            " channels, need 5 + num_classes with num_classes >= 1");
    if (tensor.data.size() != std::size_t{tensor.grid_h} * tensor.grid_w * tensor.channels)
        throw GeometryError("head tensor data size does not match its shape");

    const double s = stride;
    std::vector<Detection> out;
    for (std::uint32_t gy = 0; gy < tensor.grid_h; ++gy) {
        for (std::uint32_t gx = 0; gx < tensor.grid_w; ++gx) {
            const auto cell = tensor.cell(gy, gx);
            for (std::uint32_t c = 0; c < tensor.channels; ++c)
                if (!std::isfinite(cell[c])) throw DecodeError(gx, gy, c);

            std::uint32_t best = kFirstClassChannel;
            for (std::uint32_t c = kFirstClassChannel + 1; c < tensor.channels; ++c)
                if (cell[c] > cell[best]) best = c;

            const double score = sigmoid(cell[kObjChannel]) * sigmoid(cell[best]);
            if (score < conf_threshold) continue;

            const double cx = (gx + static_cast<double>(cell[0])) * s;
            const double cy = (gy + static_cast<double>(cell[1])) * s;
            const double w = std::exp(static_cast<double>(cell[2])) * s;
            const double h = std::exp(static_cast<double>(cell[3])) * s;
            out.push_back({BoundingBox::from_center(cx, cy, w, h), score,
                           static_cast<int>(best - kFirstClassChannel)});
        }
    }
    return out;
}

inline BoundingBox clip_box(const BoundingBox& b, double width, double height) noexcept {
    return {std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height), std::clamp(b.x2, 0.0, width),
            std::clamp(b.y2, 0.0, height)};
}

/// All three levels, in level order then row-major cell order, clipped to the image.
inline std::vector<Detection> decode_all(const RawTensorSet& frame, const DecodeConfig& config) {
    std::vector<Detection> out;
    for (std::size_t k = 0; k < kNumLevels; ++k) {
        const auto stride = config.strides[k];
        const Tensor& t = frame.outputs[k];
        if (stride == 0 || t.grid_h != frame.image_height / stride || t.grid_w != frame.image_width / stride)
            throw GeometryError("output " + std::to_string(k) + " grid does not match stride " +
                                    std::to_string(stride),
                                static_cast<std::int64_t>(frame.frame_index));
        for (auto& d : decode_head(t, stride, config.conf_threshold)) {
            d.box = clip_box(d.box, frame.image_width, frame.image_height);
            out.push_back(d);
        }
    }
    return out;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (!(uni > 0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

/// Class-aware greedy NMS. Candidates are visited by score descending, ties
/// broken by lower class id then lower input position.
inline std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold) {
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& da = detections[a];
        const auto& db = detections[b];
        if (da.score != db.score) return da.score > db.score;
        return da.class_id < db.class_id;
    });

    std::vector<Detection> kept;
    for (std::size_t i : order) {
        const auto& cand = detections[i];
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.class_id == cand.class_id && iou(k.box, cand.box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

inline std::vector<Detection> filter_class(std::span<const Detection> detections, int class_id) {
    std::vector<Detection> out;
    std::copy_if(detections.begin(), detections.end(), std::back_inserter(out),
                 [&](const Detection& d) { return d.class_id == class_id; });
    return out;
}

/// Fixed six-decimal rendering used by every JSON Lines writer.
inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string box_json(const BoundingBox& b) {
    return "[" + fixed6(b.x1) + "," + fixed6(b.y1) + "," + fixed6(b.x2) + "," + fixed6(b.y2) + "]";
}

inline std::string detection_json(const Detection& d) {
    return "{\"box\":" + box_json(d.box) + ",\"score\":" + fixed6(d.score) +
           ",\"class\":" + std::to_string(d.class_id) + "}";
}

inline std::string detections_json_array(std::span<const Detection> detections) {
    std::string s = "[";
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (i) s += ",";
        s += detection_json(detections[i]);
    }
    return s + "]";
}

/// One JSON Lines record: {"frame": n, "detections": [...]} (no trailing newline).
inline std::string detections_jsonl(std::uint64_t frame, std::span<const Detection> detections) {
    return "{\"frame\":" + std::to_string(frame) + ",\"detections\":" + detections_json_array(detections) + "}";
}

}  // namespace platguard
