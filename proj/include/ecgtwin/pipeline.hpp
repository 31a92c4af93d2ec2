#pragma once

// Host-side processing chain: notch, band-pass, and the dual-path detector
// with fusion and heart-rate readout. Works on arbitrary chunks.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ecgtwin/filter_design.hpp"
#include "ecgtwin/qrs.hpp"
#include "ecgtwin/roc.hpp"
#include "ecgtwin/streaming.hpp"

namespace ecgtwin {

struct HostConfig {
    double rate_hz = 500.0;
    FirCoeffs bandpass;
    IirCascade notch;
    DetectorConfig detector;
    /// Detection ignores this much signal after start-up.
    double warmup_s = 1.5;
    /// Bypass filtering and detection, passing samples through untouched.
    bool raw = false;

    std::int64_t warmup_samples() const { return std::llround(warmup_s * rate_hz); }
    /// Integer part of the band-pass group delay, (FL - 1) / 2.
    std::int64_t fir_latency_samples() const {
        return bandpass.taps.empty() ? 0 : static_cast<std::int64_t>((bandpass.taps.size() - 1) / 2);
    }
    /// Maps a fused beat index back onto the input sample timeline.
    std::int64_t to_input_index(std::int64_t fused_index) const {
        return fused_index - detector.derivative_shift_samples - fir_latency_samples();
    }
};

inline HostConfig default_host_config(double rate_hz = 500.0) {
    HostConfig c;
    c.rate_hz = rate_hz;
    c.bandpass = design_fir_ls(500, 1.0, 102.0, rate_hz);
    c.notch = design_butter_notch(6, 50.0, 48.0, 52.0, rate_hz);
    return c;
}

struct HostOutput {
    std::vector<double> filtered;
    std::vector<BeatEvent> beats;       // fused, pipeline index domain
    std::vector<BpmReading> bpm;        // accepted readings
    std::vector<BpmReading> rejected;   // outside the physiological gate

    void append(HostOutput&& o) {
        filtered.insert(filtered.end(), o.filtered.begin(), o.filtered.end());
        beats.insert(beats.end(), o.beats.begin(), o.beats.end());
        bpm.insert(bpm.end(), o.bpm.begin(), o.bpm.end());
        rejected.insert(rejected.end(), o.rejected.begin(), o.rejected.end());
    }
};

class HostPipeline {
public:
    explicit HostPipeline(HostConfig cfg)
        : cfg_(std::move(cfg)),
          notch_(cfg_.notch),
          fir_(cfg_.bandpass.taps.empty() ? FirCoeffs{{1.0}, cfg_.rate_hz} : cfg_.bandpass),
          deriv_(cfg_.rate_hz),
          norm_a_(cfg_.detector.norm_window_s, cfg_.rate_hz),
          norm_b_(cfg_.detector.norm_window_s, cfg_.rate_hz),
          det_a_(cfg_.detector.threshold, cfg_.detector.refractory_samples(cfg_.rate_hz), BeatSource::path_a),
          det_b_(cfg_.detector.threshold, cfg_.detector.refractory_samples(cfg_.rate_hz), BeatSource::path_b),
          fuser_(cfg_.detector.match_window_samples(cfg_.rate_hz)),
          bpm_(cfg_.rate_hz) {
        cfg_.detector.validate();
    }

    const HostConfig& config() const noexcept { return cfg_; }
    std::int64_t samples_seen() const noexcept { return next_index_; }

    HostOutput push(std::span<const double> chunk) {
        HostOutput out;
        if (cfg_.raw) {
            out.filtered.assign(chunk.begin(), chunk.end());
            next_index_ += static_cast<std::int64_t>(chunk.size());
            return out;
        }
        out.filtered = fir_.apply(notch_.apply(chunk));
        const std::int64_t warmup = cfg_.warmup_samples();
        std::vector<BeatEvent> ev_a, ev_b, fused;
        for (double f : out.filtered) {
            const std::int64_t n = next_index_++;
            const double d = deriv_.step(f);
            const double ya = norm_a_.step(std::abs(f));
            const double yb = norm_b_.step(d * d);
            if (n < warmup) continue;
            det_a_.step(n, ya, ev_a);
            det_b_.step(n, yb, ev_b);
            route(ev_a, ev_b);
            fuser_.advance(det_b_.horizon(), fused);
        }
        emit(fused, out);
        return out;
    }

    HostOutput finish() {
        HostOutput out;
        if (cfg_.raw) return out;
        std::vector<BeatEvent> ev_a, ev_b, fused;
        det_a_.finish(ev_a);
        det_b_.finish(ev_b);
        route(ev_a, ev_b);
        fuser_.finish(fused);
        emit(fused, out);
        return out;
    }

private:
    void route(std::vector<BeatEvent>& ev_a, std::vector<BeatEvent>& ev_b) {
        for (auto e : ev_a) {
            e.sample_index += cfg_.detector.derivative_shift_samples;
            fuser_.push_a(e);
        }
        for (const auto& e : ev_b) fuser_.push_b(e);
        ev_a.clear();
        ev_b.clear();
    }

    void emit(std::vector<BeatEvent>& fused, HostOutput& out) {
        for (const auto& b : fused) {
            out.beats.push_back(b);
            if (auto r = bpm_.push(b.sample_index)) (BpmTracker::accepted(*r) ? out.bpm : out.rejected).push_back(*r);
        }
        fused.clear();
    }

    HostConfig cfg_;
    IirState notch_;
    FirState fir_;
    DerivState deriv_;
    RunningMaxNormalizer norm_a_;
    RunningMaxNormalizer norm_b_;
    PeakDetector det_a_;
    PeakDetector det_b_;
    Fuser fuser_;
    BpmTracker bpm_;
    std::int64_t next_index_ = 0;
};

inline HostOutput run_host_pipeline(std::span<const double> samples, const HostConfig& cfg) {
    HostPipeline p(cfg);
    HostOutput out = p.push(samples);
    out.append(p.finish());
    return out;
}

/// Normalised detection functions of both paths over a whole recording,
/// zero during warm-up. The running max is tracked through the warm-up.
/// Path A is what the calibration sweep scores.
struct DetectionFunctions {
    std::vector<double> path_a;
    std::vector<double> path_b;
};

inline DetectionFunctions detection_functions(std::span<const double> samples, const HostConfig& cfg) {
    IirState notch(cfg.notch);
    FirState fir(cfg.bandpass);
    DerivState deriv(cfg.rate_hz);
    RunningMaxNormalizer na(cfg.detector.norm_window_s, cfg.rate_hz);
    RunningMaxNormalizer nb(cfg.detector.norm_window_s, cfg.rate_hz);
    const auto filtered = fir.apply(notch.apply(samples));
    DetectionFunctions df;
    df.path_a.assign(filtered.size(), 0.0);
    df.path_b.assign(filtered.size(), 0.0);
    const std::int64_t warmup = cfg.warmup_samples();
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const double d = deriv.step(filtered[i]);
        const double ya = na.step(std::abs(filtered[i]));
        const double yb = nb.step(d * d);
        if (static_cast<std::int64_t>(i) < warmup) continue;
        df.path_a[i] = ya;
        df.path_b[i] = yb;
    }
    return df;
}

/// Truth beats moved into the filtered-signal timeline of path A, keeping
/// those that fall after warm-up and inside the record.
inline BeatTruth truth_in_filtered_domain(const BeatTruth& truth, const HostConfig& cfg, std::size_t length) {
    BeatTruth t;
    const std::int64_t warmup = cfg.warmup_samples();
    for (auto r : truth.r_indices) {
        const auto shifted = r + cfg.fir_latency_samples();
        if (shifted >= warmup && shifted + 1 < static_cast<std::int64_t>(length)) t.r_indices.push_back(shifted);
    }
    return t;
}

/// ROC curve of one annotated recording on the path-A detection function.
inline std::vector<RocPoint> subject_roc(std::span<const double> samples, const BeatTruth& truth, const HostConfig& cfg,
                                         std::span<const double> grid, double match_ms = 50.0) {
    const auto df = detection_functions(samples, cfg);
    const auto cands = candidates(df.path_a);
    return sweep(cands, truth_in_filtered_domain(truth, cfg, samples.size()), grid, cfg.rate_hz, match_ms);
}

}  // namespace ecgtwin
