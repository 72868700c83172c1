#pragma once

// Raw detector-head tensors, the "YXT1" stream format, and the inference
// backend seam.
//
// Stream layout (little-endian throughout):
//
//   "YXT1" | u32 version | u32 num_classes | u32 image_width | u32 image_height
//   | 3 x u32 strides | u32 frame_count
//   then per frame:
//   u32 frame_index, then for each of the 3 outputs:
//   u32 grid_h | u32 grid_w | u32 channels | grid_h*grid_w*channels f32
//
// Tensors are channels-last, row-major: element (gy, gx, c) lives at
// (gy * grid_w + gx) * channels + c.

#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "platguard/errors.hpp"

namespace platguard {

inline constexpr std::size_t kNumLevels = 3;
inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::array<char, 4> kStreamMagic{'Y', 'X', 'T', '1'};

/// One stride-level head output, shape (grid_h, grid_w, channels).
struct Tensor {
    std::uint32_t grid_h = 0;
    std::uint32_t grid_w = 0;
    std::uint32_t channels = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::uint32_t h, std::uint32_t w, std::uint32_t c, float fill = 0.0f)
        : grid_h(h), grid_w(w), channels(c), data(std::size_t{h} * w * c, fill) {}

    std::size_t offset(std::uint32_t gy, std::uint32_t gx, std::uint32_t c = 0) const noexcept {
        return (std::size_t{gy} * grid_w + gx) * channels + c;
    }
    float at(std::uint32_t gy, std::uint32_t gx, std::uint32_t c) const { return data[offset(gy, gx, c)]; }
    float& at(std::uint32_t gy, std::uint32_t gx, std::uint32_t c) { return data[offset(gy, gx, c)]; }

    /// The `channels` values of one cell.
    std::span<const float> cell(std::uint32_t gy, std::uint32_t gx) const {
        return {data.data() + offset(gy, gx), channels};
    }
};

/// Bit-level equality; NaN payloads compare by representation.
inline bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept {
    return a.grid_h == b.grid_h && a.grid_w == b.grid_w && a.channels == b.channels &&
           a.data.size() == b.data.size() &&
           (a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
}

/// The three per-stride head outputs for one frame.
struct RawTensorSet {
    std::uint64_t frame_index = 0;
    std::uint32_t image_width = 0;
    std::uint32_t image_height = 0;
    std::array<Tensor, kNumLevels> outputs;
};

inline bool bitwise_equal(const RawTensorSet& a, const RawTensorSet& b) noexcept {
    if (a.frame_index != b.frame_index || a.image_width != b.image_width || a.image_height != b.image_height)
        return false;
    for (std::size_t k = 0; k < kNumLevels; ++k)
        if (!bitwise_equal(a.outputs[k], b.outputs[k])) return false;
    return true;
}

struct TensorStreamHeader {
    std::array<char, 4> magic = kStreamMagic;
    std::uint32_t version = kStreamVersion;
    std::uint32_t num_classes = 1;
    std::uint32_t image_width = 0;
    std::uint32_t image_height = 0;
    std::array<std::uint32_t, kNumLevels> strides{8, 16, 32};
    std::uint32_t frame_count = 0;

    std::uint32_t channels() const noexcept { return 5 + num_classes; }
    std::uint32_t grid_h(std::size_t level) const noexcept { return image_height / strides[level]; }
    std::uint32_t grid_w(std::size_t level) const noexcept { return image_width / strides[level]; }

    bool operator==(const TensorStreamHeader&) const = default;
};

/// Throws GeometryError unless strides are positive and strictly increasing,
/// both image dimensions are divisible by every stride, and num_classes >= 1.
inline void validate_geometry(const TensorStreamHeader& h) {
    if (h.num_classes < 1) throw GeometryError("num_classes must be >= 1");
    if (h.image_width == 0 || h.image_height == 0) throw GeometryError("image dimensions must be positive");
    for (std::size_t k = 0; k < kNumLevels; ++k) {
        const auto s = h.strides[k];
        if (s == 0) throw GeometryError("stride must be positive");
        if (k > 0 && s <= h.strides[k - 1])
            throw GeometryError("strides must be strictly increasing");
        if (h.image_width % s != 0 || h.image_height % s != 0)
            throw GeometryError("image " + std::to_string(h.image_width) + "x" + std::to_string(h.image_height) +
                                " not divisible by stride " + std::to_string(s));
    }
}

/// Throws GeometryError (carrying the frame index) when `frame` does not match
/// the grid shapes implied by `h`.
inline void check_frame_geometry(const RawTensorSet& frame, const TensorStreamHeader& h) {
    const auto idx = static_cast<std::int64_t>(frame.frame_index);
    if (frame.image_width != h.image_width || frame.image_height != h.image_height)
        throw GeometryError("frame " + std::to_string(idx) + ": image size " + std::to_string(frame.image_width) +
                                "x" + std::to_string(frame.image_height) + " differs from header",
                            idx);
    for (std::size_t k = 0; k < kNumLevels; ++k) {
        const Tensor& t = frame.outputs[k];
        const auto eh = h.grid_h(k), ew = h.grid_w(k), ec = h.channels();
        if (t.grid_h != eh || t.grid_w != ew || t.channels != ec)
            throw GeometryError("frame " + std::to_string(idx) + " stride " + std::to_string(h.strides[k]) +
                                    ": expected " + std::to_string(eh) + "x" + std::to_string(ew) + "x" +
                                    std::to_string(ec) + ", got " + std::to_string(t.grid_h) + "x" +
                                    std::to_string(t.grid_w) + "x" + std::to_string(t.channels),
                                idx);
        if (t.data.size() != std::size_t{eh} * ew * ec)
            throw GeometryError("frame " + std::to_string(idx) + ": tensor data size mismatch", idx);
    }
}

/// A frame whose every element equals `fill`, shaped for `h`.
inline RawTensorSet make_uniform_frame(const TensorStreamHeader& h, std::uint64_t frame_index, float fill) {
    RawTensorSet f;
    f.frame_index = frame_index;
    f.image_width = h.image_width;
    f.image_height = h.image_height;
    for (std::size_t k = 0; k < kNumLevels; ++k) f.outputs[k] = Tensor(h.grid_h(k), h.grid_w(k), h.channels(), fill);
    return f;
}

namespace detail {

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) noexcept {
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
}

inline std::string describe_bytes(std::span<const char> bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string printable, hex;
    for (char c : bytes) {
        const auto u = static_cast<unsigned char>(c);
        printable += (u >= 0x20 && u < 0x7f) ? c : '.';
        hex += "\\x";
        hex += kHex[u >> 4];
        hex += kHex[u & 0xF];
    }
    return "\"" + printable + "\" (" + hex + ")";
}

}  // namespace detail

/// Writes `frames` after `header`. The stored frame_count is frames.size();
/// frame k must carry frame_index k. Everything is validated before the file
/// is opened, so a rejected call leaves no output behind.
inline std::size_t write_tensor_stream(const std::filesystem::path& path, TensorStreamHeader header,
                                       std::span<const RawTensorSet> frames) {
    if (header.magic != kStreamMagic) throw FormatError("header magic must be \"YXT1\"");
    if (header.version != kStreamVersion) throw UnsupportedVersionError(header.version);
    validate_geometry(header);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].frame_index != i)
            throw GeometryError("frame at position " + std::to_string(i) + " has frame_index " +
                                    std::to_string(frames[i].frame_index),
                                static_cast<std::int64_t>(i));
        check_frame_geometry(frames[i], header);
    }
    header.frame_count = static_cast<std::uint32_t>(frames.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");

    std::vector<char> buf;
    buf.insert(buf.end(), header.magic.begin(), header.magic.end());
    detail::put_u32(buf, header.version);
    detail::put_u32(buf, header.num_classes);
    detail::put_u32(buf, header.image_width);
    detail::put_u32(buf, header.image_height);
    for (auto s : header.strides) detail::put_u32(buf, s);
    detail::put_u32(buf, header.frame_count);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

    for (const auto& f : frames) {
        buf.clear();
        detail::put_u32(buf, static_cast<std::uint32_t>(f.frame_index));
        for (const auto& t : f.outputs) {
            detail::put_u32(buf, t.grid_h);
            detail::put_u32(buf, t.grid_w);
            detail::put_u32(buf, t.channels);
            buf.reserve(buf.size() + t.data.size() * 4);
            for (float v : t.data) detail::put_u32(buf, std::bit_cast<std::uint32_t>(v));
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
    return frames.size();
}

/// Sequential, lazily-decoding reader. The header is parsed and validated in
/// the constructor; next() yields frames in stored order and returns nullopt
/// at end of stream.
class TensorStreamReader {
public:
    explicit TensorStreamReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open '" + path.string() + "'");
        std::array<char, 4> magic{};
        if (!in_.read(magic.data(), magic.size()))
            throw FormatError("'" + path.string() + "': file too short for a tensor stream header");
        if (magic != kStreamMagic)
            throw FormatError("'" + path.string() + "': bad magic " + detail::describe_bytes(magic) +
                              ", expected \"YXT1\"");
        header_.magic = magic;
        header_.version = read_header_u32();
        if (header_.version != kStreamVersion) throw UnsupportedVersionError(header_.version);
        header_.num_classes = read_header_u32();
        header_.image_width = read_header_u32();
        header_.image_height = read_header_u32();
        for (auto& s : header_.strides) s = read_header_u32();
        header_.frame_count = read_header_u32();
        validate_geometry(header_);
    }

    const TensorStreamHeader& header() const noexcept { return header_; }
    const std::filesystem::path& path() const noexcept { return path_; }

    std::optional<RawTensorSet> next() {
        if (next_index_ >= header_.frame_count) return std::nullopt;
        const std::uint32_t idx = next_index_;
        RawTensorSet f;
        f.frame_index = idx;
        f.image_width = header_.image_width;
        f.image_height = header_.image_height;
        const auto stored = read_frame_u32(idx);
        if (stored != idx)
            throw FormatError("frame at position " + std::to_string(idx) + " stores frame_index " +
                              std::to_string(stored));
        for (std::size_t k = 0; k < kNumLevels; ++k) {
            Tensor& t = f.outputs[k];
            t.grid_h = read_frame_u32(idx);
            t.grid_w = read_frame_u32(idx);
            t.channels = read_frame_u32(idx);
            if (t.grid_h != header_.grid_h(k) || t.grid_w != header_.grid_w(k) || t.channels != header_.channels())
                throw GeometryError("frame " + std::to_string(idx) + " stride " + std::to_string(header_.strides[k]) +
                                        ": stored shape disagrees with header",
                                    idx);
            const std::size_t n = std::size_t{t.grid_h} * t.grid_w * t.channels;
            raw_.resize(n * 4);
            if (!in_.read(raw_.data(), static_cast<std::streamsize>(raw_.size()))) throw TruncatedStreamError(idx);
            t.data.resize(n);
            const auto* p = reinterpret_cast<const unsigned char*>(raw_.data());
            for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(detail::get_u32(p + 4 * i));
        }
        ++next_index_;
        return f;
    }

private:
    std::uint32_t read_header_u32() {
        unsigned char b[4];
        if (!in_.read(reinterpret_cast<char*>(b), 4))
            throw FormatError("'" + path_.string() + "': truncated header");
        return detail::get_u32(b);
    }
    std::uint32_t read_frame_u32(std::uint32_t idx) {
        unsigned char b[4];
        if (!in_.read(reinterpret_cast<char*>(b), 4)) throw TruncatedStreamError(idx);
        return detail::get_u32(b);
    }

    std::filesystem::path path_;
    std::ifstream in_;
    TensorStreamHeader header_;
    std::uint32_t next_index_ = 0;
    std::vector<char> raw_;
};

inline TensorStreamReader read_tensor_stream(const std::filesystem::path& path) { return TensorStreamReader(path); }

/// Where an inference runtime plugs in. Implementations yield frames with
/// strictly increasing frame_index starting at 0, matching geometry().
/// nullopt from next_frame() is end of stream, not an error.
class InferenceBackendPort {
public:
    virtual ~InferenceBackendPort() = default;
    virtual std::optional<RawTensorSet> next_frame() = 0;
    virtual std::string descriptor() const = 0;
    /// Geometry of every yielded frame; frame_count is the total this backend will yield.
    virtual const TensorStreamHeader& geometry() const = 0;
};

/// Replays a tensor stream file `loop_count` times, optionally sleeping
/// before each frame to emulate accelerator latency.
class PlaybackBackend final : public InferenceBackendPort {
public:
    PlaybackBackend(std::filesystem::path path, std::uint32_t loop_count,
                    std::chrono::duration<double, std::milli> simulated_delay = {})
        : path_(std::move(path)), loops_(loop_count), delay_(simulated_delay) {
        if (loop_count == 0) throw DomainError("loop_count must be positive");
        if (simulated_delay.count() < 0) throw DomainError("simulated_delay must be non-negative");
        reader_ = std::make_unique<TensorStreamReader>(path_);
        geometry_ = reader_->header();
        geometry_.frame_count = reader_->header().frame_count * loop_count;
    }

    std::optional<RawTensorSet> next_frame() override {
        if (reader_->header().frame_count == 0) return std::nullopt;
        auto frame = reader_->next();
        while (!frame) {
            if (++loop_ >= loops_) return std::nullopt;
            reader_ = std::make_unique<TensorStreamReader>(path_);
            frame = reader_->next();
        }
        if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
        frame->frame_index = emitted_++;
        return frame;
    }

    std::string descriptor() const override { return "playback:" + path_.string(); }
    const TensorStreamHeader& geometry() const override { return geometry_; }

private:
    std::filesystem::path path_;
    std::uint32_t loops_;
    std::chrono::duration<double, std::milli> delay_;
    std::unique_ptr<TensorStreamReader> reader_;
    TensorStreamHeader geometry_;
    std::uint32_t loop_ = 0;
    std::uint64_t emitted_ = 0;
};

inline std::unique_ptr<InferenceBackendPort> playback_backend(const std::filesystem::path& path,
                                                              std::uint32_t loop_count,
                                                              std::chrono::duration<double, std::milli> delay = {}) {
    return std::make_unique<PlaybackBackend>(path, loop_count, delay);
}

/// In-memory backend over pre-built frames; frame indices are renumbered 0..n-1.
class MemoryBackend final : public InferenceBackendPort {
public:
    MemoryBackend(TensorStreamHeader geometry, std::vector<RawTensorSet> frames)
        : geometry_(geometry), frames_(std::move(frames)) {
        geometry_.frame_count = static_cast<std::uint32_t>(frames_.size());
    }

    std::optional<RawTensorSet> next_frame() override {
        if (pos_ >= frames_.size()) return std::nullopt;
        RawTensorSet f = frames_[pos_];
        f.frame_index = pos_++;
        return f;
    }
    std::string descriptor() const override { return "memory"; }
    const TensorStreamHeader& geometry() const override { return geometry_; }

private:
    TensorStreamHeader geometry_;
    std::vector<RawTensorSet> frames_;
    std::size_t pos_ = 0;
};

}  // namespace platguard
