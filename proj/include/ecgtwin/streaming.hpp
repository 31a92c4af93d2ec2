#pragma once

// Chunk-wise filtering. Every stateful operator here produces the same output
// for any split of its input into chunks, bit for bit.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ecgtwin/filter_design.hpp"

namespace ecgtwin {

/// Direct convolution; sums taps in index order so the result matches the
/// streaming form exactly.
inline std::vector<double> fir_filter(const FirCoeffs& f, std::span<const double> x) {
    const std::size_t len = f.taps.size();
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < len && k <= n; ++k) acc += f.taps[k] * x[n - k];
        y[n] = acc;
    }
    return y;
}

inline std::vector<double> iir_filter(const IirCascade& c, std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    for (const Biquad& q : c.sections) {
        BiquadState st;
        for (double& v : y) v = st.step(q, v);
    }
    return y;
}

class FirState {
public:
    explicit FirState(FirCoeffs coeffs) : coeffs_(std::move(coeffs)) {
        if (coeffs_.taps.empty()) throw std::invalid_argument("FirState: empty tap set");
        history_.assign(coeffs_.taps.size() - 1, 0.0);
    }

    const FirCoeffs& coeffs() const noexcept { return coeffs_; }

    std::vector<double> apply(std::span<const double> chunk) {
        const std::size_t keep = history_.size();
        // work = [last FL-1 inputs | chunk]
        work_.assign(history_.begin(), history_.end());
        work_.insert(work_.end(), chunk.begin(), chunk.end());
        std::vector<double> y(chunk.size());
        const std::size_t len = coeffs_.taps.size();
        for (std::size_t n = 0; n < chunk.size(); ++n) {
            const std::size_t pos = keep + n;
            double acc = 0.0;
            for (std::size_t k = 0; k < len; ++k) acc += coeffs_.taps[k] * work_[pos - k];
            y[n] = acc;
        }
        history_.assign(work_.end() - static_cast<std::ptrdiff_t>(keep), work_.end());
        return y;
    }

private:
    FirCoeffs coeffs_;
    std::vector<double> history_;
    std::vector<double> work_;
};

class IirState {
public:
    explicit IirState(IirCascade cascade) : cascade_(std::move(cascade)), states_(cascade_.sections.size()) {}

    const IirCascade& cascade() const noexcept { return cascade_; }

    std::vector<double> apply(std::span<const double> chunk) {
        std::vector<double> y(chunk.begin(), chunk.end());
        for (std::size_t s = 0; s < cascade_.sections.size(); ++s)
            for (double& v : y) v = states_[s].step(cascade_.sections[s], v);
        return y;
    }

    double step(double x) {
        for (std::size_t s = 0; s < cascade_.sections.size(); ++s) x = states_[s].step(cascade_.sections[s], x);
        return x;
    }

private:
    IirCascade cascade_;
    std::vector<BiquadState> states_;
};

inline std::vector<double> apply_streaming(FirState& st, std::span<const double> chunk) { return st.apply(chunk); }
inline std::vector<double> apply_streaming(IirState& st, std::span<const double> chunk) { return st.apply(chunk); }

/// Least-squares slope over a 13-sample window, in input units per second:
///   y = rate * sum_{k=-6..6} k * x[c + k] / 182
/// Output n is the slope of the window ending at input n (centred 6 samples
/// back). The first 12 outputs are zero while the window fills.
class DerivState {
public:
    static constexpr std::size_t window = 13;
    static constexpr int half = 6;
    static constexpr double weight_norm = 182.0;  // sum of k^2 for k = -6..6

    explicit DerivState(double rate_hz) : rate_hz_(rate_hz) {
        if (!(rate_hz > 0.0)) throw std::invalid_argument("DerivState: rate must be positive");
    }

    double step(double x) {
        buf_[head_] = x;
        head_ = (head_ + 1) % window;
        if (seen_ < window) ++seen_;
        if (seen_ < window) return 0.0;
        // head_ now points at the oldest sample (k = -6).
        double acc = 0.0;
        for (std::size_t i = 0; i < window; ++i) {
            const int k = static_cast<int>(i) - half;
            acc += k * buf_[(head_ + i) % window];
        }
        return rate_hz_ * acc / weight_norm;
    }

    std::vector<double> apply(std::span<const double> chunk) {
        std::vector<double> y;
        y.reserve(chunk.size());
        for (double x : chunk) y.push_back(step(x));
        return y;
    }

    bool warmed_up() const noexcept { return seen_ >= window; }
    double rate_hz() const noexcept { return rate_hz_; }

private:
    double rate_hz_;
    std::array<double, window> buf_{};
    std::size_t head_ = 0;
    std::size_t seen_ = 0;
};

inline std::vector<double> derivative13(DerivState& st, std::span<const double> chunk) { return st.apply(chunk); }

inline std::vector<double> square(std::span<const double> chunk) {
    std::vector<double> y;
    y.reserve(chunk.size());
    for (double x : chunk) y.push_back(x * x);
    return y;
}

inline std::vector<std::int64_t> align_events(std::span<const std::int64_t> indices, std::int64_t shift_samples) {
    std::vector<std::int64_t> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(i + shift_samples);
    return out;
}

}  // namespace ecgtwin
