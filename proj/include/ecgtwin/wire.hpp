#pragma once

// Sample frame codec. Every sample travels as exactly seven ASCII bytes,
// "d.dddd\n", holding a voltage in [0, 3.3] V with four decimals.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecgtwin {

/// One wire sample. Stored as an integer count of 0.1 mV so the four-decimal
/// rendering is exact.
class Frame {
public:
    static constexpr std::size_t wire_size = 7;
    static constexpr std::uint16_t max_tenth_mv = 33000;

    static Frame from_tenth_mv(std::uint32_t tenth_mv) {
        if (tenth_mv > max_tenth_mv) throw std::invalid_argument("Frame: value above 3.3000 V");
        return Frame(static_cast<std::uint16_t>(tenth_mv));
    }

    /// Rounds to four decimals first; rejects anything outside [0, 3.3].
    static Frame from_volts(double v) {
        if (!std::isfinite(v)) throw std::invalid_argument("Frame: non-finite voltage");
        const double scaled = std::round(v * 1e4);
        if (scaled < 0.0 || scaled > max_tenth_mv)
            throw std::invalid_argument("Frame: voltage " + std::to_string(v) + " outside [0, 3.3] V");
        return Frame(static_cast<std::uint16_t>(scaled));
    }

    std::uint16_t tenth_mv() const noexcept { return value_; }
    double volts() const noexcept { return value_ / 1e4; }

    friend bool operator==(Frame, Frame) = default;

private:
    explicit Frame(std::uint16_t v) : value_(v) {}
    std::uint16_t value_;
};

using FrameBytes = std::array<char, Frame::wire_size>;

inline FrameBytes encode_frame(Frame f) {
    unsigned v = f.tenth_mv();
    FrameBytes out{};
    out[6] = '\n';
    for (int i = 5; i >= 2; --i) {
        out[static_cast<std::size_t>(i)] = static_cast<char>('0' + v % 10);
        v /= 10;
    }
    out[1] = '.';
    out[0] = static_cast<char>('0' + v);
    return out;
}

inline FrameBytes encode_frame(double voltage_v) { return encode_frame(Frame::from_volts(voltage_v)); }

inline void append_frame(std::string& out, Frame f) {
    const FrameBytes b = encode_frame(f);
    out.append(b.data(), b.size());
}

struct StreamStats {
    std::uint64_t frames_ok = 0;
    std::uint64_t resync_events = 0;
    std::uint64_t bytes_consumed = 0;

    StreamStats& operator+=(const StreamStats& o) {
        frames_ok += o.frames_ok;
        resync_events += o.resync_events;
        bytes_consumed += o.bytes_consumed;
        return *this;
    }
    friend bool operator==(const StreamStats&, const StreamStats&) = default;
};

inline std::string to_summary(const StreamStats& s) {
    return "frames=" + std::to_string(s.frames_ok) + " resyncs=" + std::to_string(s.resync_events) +
           " bytes=" + std::to_string(s.bytes_consumed);
}

/// Incremental frame parser. Chunks may split frames anywhere; the frame list
/// produced is independent of the chunking. A malformed line is dropped up to
/// and including its '\n' and counted as one resync event.
class StreamParser {
public:
    struct Result {
        std::vector<Frame> frames;
        StreamStats delta;
    };

    /// Appends decoded frames to `out` and returns the stats delta.
    StreamStats feed(std::string_view chunk, std::vector<Frame>& out) {
        StreamStats d;
        d.bytes_consumed = chunk.size();
        for (char c : chunk) {
            if (c == '\n') {
                if (!discarding_ && len_ == 6) {
                    if (auto f = decode(); f) {
                        out.push_back(*f);
                        ++d.frames_ok;
                    } else {
                        ++d.resync_events;
                    }
                } else {
                    ++d.resync_events;
                }
                len_ = 0;
                discarding_ = false;
                continue;
            }
            if (discarding_) continue;
            if (len_ == 6) {
                // Seventh byte is not the delimiter.
                discarding_ = true;
                continue;
            }
            buf_[len_++] = c;
        }
        stats_ += d;
        return d;
    }

    Result feed(std::string_view chunk) {
        Result r;
        r.delta = feed(chunk, r.frames);
        return r;
    }

    const StreamStats& stats() const noexcept { return stats_; }
    /// Bytes of an incomplete frame waiting for more input.
    bool has_partial() const noexcept { return len_ > 0 || discarding_; }

private:
    std::optional<Frame> decode() const {
        auto digit = [](char c) { return c >= '0' && c <= '9'; };
        if (!digit(buf_[0]) || buf_[1] != '.') return std::nullopt;
        std::uint32_t v = static_cast<std::uint32_t>(buf_[0] - '0');
        for (std::size_t i = 2; i < 6; ++i) {
            if (!digit(buf_[i])) return std::nullopt;
            v = v * 10 + static_cast<std::uint32_t>(buf_[i] - '0');
        }
        if (v > Frame::max_tenth_mv) return std::nullopt;
        return Frame::from_tenth_mv(v);
    }

    std::array<char, 6> buf_{};
    std::size_t len_ = 0;
    bool discarding_ = false;
    StreamStats stats_;
};

/// Link capacity over demand for 10-bit UART bytes; below 1 the link cannot
/// keep up.
inline double throughput_margin(double rate_hz, int frame_bytes, double baud) {
    if (!(rate_hz > 0.0) || frame_bytes <= 0 || !(baud > 0.0))
        throw std::invalid_argument("throughput_margin: arguments must be positive");
    constexpr double bits_per_byte = 10.0;  // start + 8 data + stop
    return baud / (bits_per_byte * frame_bytes * rate_hz);
}

}  // namespace ecgtwin
