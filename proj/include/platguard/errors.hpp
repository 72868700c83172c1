#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace platguard {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed stream content (bad magic, bad header field, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public FormatError {
public:
    explicit UnsupportedVersionError(std::uint32_t version)
        : FormatError("unsupported tensor stream version " + std::to_string(version)),
          version_(version) {}
    std::uint32_t version() const noexcept { return version_; }

private:
    std::uint32_t version_;
};

/// Stream ended in the middle of a frame.
class TruncatedStreamError : public FormatError {
public:
    explicit TruncatedStreamError(std::uint64_t frame_index)
        : FormatError("tensor stream truncated inside frame " + std::to_string(frame_index)),
          frame_index_(frame_index) {}
    std::uint64_t frame_index() const noexcept { return frame_index_; }

private:
    std::uint64_t frame_index_;
};

/// Tensor shapes disagree with the declared image size, strides or class count.
class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& what, std::int64_t frame_index = -1)
        : Error(what), frame_index_(frame_index) {}
    /// Offending frame, or -1 when not tied to a frame.
    std::int64_t frame_index() const noexcept { return frame_index_; }

private:
    std::int64_t frame_index_;
};

/// Non-finite value encountered while decoding a head output.
class DecodeError : public Error {
public:
    DecodeError(std::uint32_t gx, std::uint32_t gy, std::uint32_t channel)
        : Error("non-finite tensor element at cell (" + std::to_string(gx) + ", " +
                std::to_string(gy) + ") channel " + std::to_string(channel)),
          gx_(gx), gy_(gy), channel_(channel) {}
    std::uint32_t gx() const noexcept { return gx_; }
    std::uint32_t gy() const noexcept { return gy_; }
    std::uint32_t channel() const noexcept { return channel_; }

private:
    std::uint32_t gx_, gy_, channel_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid scenario description.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Two objects would occupy the same head cell.
class EncodingCollisionError : public Error {
public:
    using Error::Error;
};

/// Invalid pipeline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Prediction and ground-truth streams cover different frames.
class AlignmentError : public Error {
public:
    using Error::Error;
};

class InsufficientSamplesError : public Error {
public:
    using Error::Error;
};

/// An output sink refused a record.
class SinkError : public Error {
public:
    using Error::Error;
};

}  // namespace platguard
