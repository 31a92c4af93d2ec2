#pragma once

// Dual-path R-wave detection. Path A thresholds the normalised magnitude of
// the filtered ECG; path B thresholds the normalised squared derivative. A
// beat is reported only when both paths agree once path A is shifted by the
// derivative latency. Heart rate follows from successive fused beats.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ecgtwin {

struct DetectorConfig {
    double threshold = 0.5;
    double refractory_ms = 200.0;
    double norm_window_s = 3.0;
    double match_window_ms = 40.0;
    std::int64_t derivative_shift_samples = 13;

    void validate() const {
        if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("DetectorConfig: threshold must lie in (0, 1)");
        if (!(refractory_ms > 0.0)) throw std::invalid_argument("DetectorConfig: refractory_ms must be positive");
        if (!(match_window_ms > 0.0)) throw std::invalid_argument("DetectorConfig: match_window_ms must be positive");
        if (!(norm_window_s > 0.0)) throw std::invalid_argument("DetectorConfig: norm_window_s must be positive");
    }

    std::int64_t refractory_samples(double rate_hz) const { return std::llround(refractory_ms * rate_hz / 1000.0); }
    std::int64_t match_window_samples(double rate_hz) const { return std::llround(match_window_ms * rate_hz / 1000.0); }
};

enum class BeatSource { path_a, path_b, fused };

struct BeatEvent {
    std::int64_t sample_index;
    BeatSource source;
    double height = 0.0;

    friend bool operator==(const BeatEvent& a, const BeatEvent& b) {
        return a.sample_index == b.sample_index && a.source == b.source;
    }
};

struct BpmReading {
    double bpm;
    std::int64_t at_index;
};

/// y[n] = x[n] / m[n], m[n] = max(|x[n]|, lambda * m[n-1]),
/// lambda = exp(-1 / (tau * rate)). Outputs 0 until the first nonzero input.
class RunningMaxNormalizer {
public:
    RunningMaxNormalizer(double tau_s, double rate_hz) {
        if (!(tau_s > 0.0) || !(rate_hz > 0.0))
            throw std::invalid_argument("RunningMaxNormalizer: tau and rate must be positive");
        lambda_ = std::exp(-1.0 / (tau_s * rate_hz));
    }

    double step(double x) {
        const double a = std::abs(x);
        if (!seeded_) {
            if (a == 0.0) return 0.0;
            seeded_ = true;
            max_ = a;
            return x / max_;
        }
        max_ = std::max(a, lambda_ * max_);
        return max_ > 0.0 ? x / max_ : 0.0;
    }

    std::vector<double> apply(std::span<const double> chunk) {
        std::vector<double> y;
        y.reserve(chunk.size());
        for (double x : chunk) y.push_back(step(x));
        return y;
    }

    double decay_per_sample() const noexcept { return lambda_; }
    double current_max() const noexcept { return max_; }

private:
    double lambda_ = 1.0;
    double max_ = 0.0;
    bool seeded_ = false;
};

inline std::vector<double> normalize_running_max(std::span<const double> x, double tau_s, double rate_hz) {
    RunningMaxNormalizer n(tau_s, rate_hz);
    return n.apply(x);
}

/// Local maximum test shared by the detector and the calibration sweep: the
/// last sample of a (possibly flat) top, i.e. x[i-1] <= x[i] > x[i+1].
inline bool is_local_max(double prev, double cur, double next) { return cur >= prev && cur > next; }

/// Streaming peak picker. Emits local maxima at or above the threshold;
/// within the refractory period the larger peak wins and ties keep the
/// earlier one.
class PeakDetector {
public:
    PeakDetector(double threshold, std::int64_t refractory_samples, BeatSource source)
        : threshold_(threshold), refractory_(refractory_samples), source_(source) {}

    /// Feeds sample `index` (consecutive calls must use consecutive indices).
    void step(std::int64_t index, double x, std::vector<BeatEvent>& out) {
        if (have_two_ && is_local_max(prev2_, prev1_, x) && prev1_ >= threshold_) offer(index - 1, prev1_, out);
        if (pending_ && index - pending_->sample_index >= refractory_) {
            out.push_back(*pending_);
            pending_.reset();
        }
        have_two_ = have_one_;
        have_one_ = true;
        prev2_ = prev1_;
        prev1_ = x;
        last_index_ = index;
    }

    void finish(std::vector<BeatEvent>& out) {
        if (pending_) out.push_back(*pending_);
        pending_.reset();
    }

    /// Any event emitted later will have an index >= this value.
    std::int64_t horizon() const noexcept { return pending_ ? pending_->sample_index : last_index_; }

    /// Restarts peak tracking (used after a warm-up gap).
    void reset_history() {
        have_one_ = have_two_ = false;
    }

private:
    void offer(std::int64_t i, double h, std::vector<BeatEvent>& out) {
        if (pending_) {
            if (i - pending_->sample_index < refractory_) {
                if (h > pending_->height) pending_ = BeatEvent{i, source_, h};
                return;
            }
            out.push_back(*pending_);
        }
        pending_ = BeatEvent{i, source_, h};
    }

    double threshold_;
    std::int64_t refractory_;
    BeatSource source_;
    double prev1_ = 0.0, prev2_ = 0.0;
    bool have_one_ = false, have_two_ = false;
    std::int64_t last_index_ = -1;
    std::optional<BeatEvent> pending_;
};

/// Batch peak picking over a normalised detection function.
inline std::vector<BeatEvent> detect_path(std::span<const double> norm, const DetectorConfig& cfg, double rate_hz,
                                          BeatSource source = BeatSource::path_a) {
    cfg.validate();
    PeakDetector d(cfg.threshold, cfg.refractory_samples(rate_hz), source);
    std::vector<BeatEvent> out;
    for (std::size_t i = 0; i < norm.size(); ++i) d.step(static_cast<std::int64_t>(i), norm[i], out);
    d.finish(out);
    return out;
}

/// Incremental greedy fusion. Path A events must already carry the
/// derivative shift. Each A event takes the earliest unused B event within
/// +-window; unmatched events on either side are dropped.
class Fuser {
public:
    explicit Fuser(std::int64_t window_samples) : window_(window_samples) {}

    void push_a(const BeatEvent& e) { a_.push_back(e); }
    void push_b(const BeatEvent& e) { b_.push_back(e); }

    /// Resolves every A event whose partner set is final, given that no B
    /// event below `b_horizon` is still to come.
    void advance(std::int64_t b_horizon, std::vector<BeatEvent>& out) {
        while (!a_.empty() && a_.front().sample_index + window_ < b_horizon) resolve_front(out);
    }

    void finish(std::vector<BeatEvent>& out) {
        while (!a_.empty()) resolve_front(out);
        b_.clear();
    }

private:
    void resolve_front(std::vector<BeatEvent>& out) {
        const std::int64_t a = a_.front().sample_index;
        a_.pop_front();
        while (!b_.empty() && b_.front().sample_index < a - window_) b_.pop_front();
        if (!b_.empty() && b_.front().sample_index <= a + window_) {
            b_.pop_front();
            out.push_back(BeatEvent{a, BeatSource::fused, 0.0});
        }
    }

    std::int64_t window_;
    std::deque<BeatEvent> a_;
    std::deque<BeatEvent> b_;
};

inline std::vector<BeatEvent> fuse(std::span<const BeatEvent> shifted_a, std::span<const BeatEvent> b,
                                   std::int64_t window_samples) {
    Fuser f(window_samples);
    for (const auto& e : shifted_a) f.push_a(e);
    for (const auto& e : b) f.push_b(e);
    std::vector<BeatEvent> out;
    f.finish(out);
    return out;
}

inline std::vector<BeatEvent> fuse(std::span<const BeatEvent> shifted_a, std::span<const BeatEvent> b,
                                   const DetectorConfig& cfg, double rate_hz) {
    return fuse(shifted_a, b, cfg.match_window_samples(rate_hz));
}

/// Heart rate from consecutive beats: 60 * rate / (n_{i+1} - n_i).
class BpmTracker {
public:
    static constexpr double min_bpm = 20.0;
    static constexpr double max_bpm = 300.0;

    explicit BpmTracker(double rate_hz) : rate_hz_(rate_hz) {
        if (!(rate_hz > 0.0)) throw std::invalid_argument("BpmTracker: rate must be positive");
    }

    /// Returns the reading ending at this beat, accepted or not; the first
    /// beat yields nothing.
    std::optional<BpmReading> push(std::int64_t index) {
        std::optional<BpmReading> r;
        if (last_) {
            if (index <= *last_) throw std::invalid_argument("bpm_stream: beat indices must be strictly increasing");
            r = BpmReading{60.0 * rate_hz_ / static_cast<double>(index - *last_), index};
        }
        last_ = index;
        return r;
    }

    static bool accepted(const BpmReading& r) { return r.bpm >= min_bpm && r.bpm <= max_bpm; }

private:
    double rate_hz_;
    std::optional<std::int64_t> last_;
};

struct BpmSeries {
    std::vector<BpmReading> readings;  // inside the physiological gate
    std::vector<BpmReading> rejected;  // flagged, outside [20, 300]
};

inline BpmSeries bpm_stream(std::span<const BeatEvent> beats, double rate_hz) {
    BpmTracker t(rate_hz);
    BpmSeries s;
    for (const auto& b : beats)
        if (auto r = t.push(b.sample_index)) (BpmTracker::accepted(*r) ? s.readings : s.rejected).push_back(*r);
    return s;
}

}  // namespace ecgtwin
