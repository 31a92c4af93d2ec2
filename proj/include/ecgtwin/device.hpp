#pragma once

// Behavioural model of the acquisition hardware: analog gain and filtering,
// the bias divider, swing limits, the 12-bit ADC and the timer-driven sampler
// that hands samples to the frame encoder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgtwin/biquad.hpp"
#include "ecgtwin/signal.hpp"
#include "ecgtwin/wire.hpp"

namespace ecgtwin {

inline double bias_voltage(double r21_ohm, double r22_ohm, double supply_v) {
    if (r21_ohm < 0.0 || !(r22_ohm > 0.0) || !(supply_v > 0.0))
        throw std::invalid_argument("bias_voltage: need r21 >= 0, r22 > 0, supply > 0");
    const double total = r21_ohm + r22_ohm;
    if (total == 0.0) throw std::invalid_argument("bias_voltage: r21 + r22 must be nonzero");
    return supply_v * r22_ohm / total;
}

struct AnalogChainConfig {
    double total_gain = 500.0;
    double bias_v = 0.3;
    double supply_v = 3.3;
    double swing_v = 3.0;
    std::optional<double> r21_ohm;
    std::optional<double> r22_ohm;
    bool enable_analog_filters = true;
    double internal_rate_hz = 5000.0;

    double highpass_hz = 0.1;
    double lowpass_hz = 105.0;
    double notch_hz = 50.0;
    double notch_q = 1.0;

    void validate() const {
        if (!(supply_v > 0.0)) throw std::invalid_argument("AnalogChainConfig: supply_v must be positive");
        if (!(bias_v >= 0.0 && bias_v < supply_v))
            throw std::invalid_argument("AnalogChainConfig: bias_v must lie in [0, supply_v)");
        if (!(swing_v <= supply_v)) throw std::invalid_argument("AnalogChainConfig: swing_v exceeds supply_v");
        if (!(total_gain > 0.0)) throw std::invalid_argument("AnalogChainConfig: total_gain must be positive");
        if (!(internal_rate_hz > 0.0))
            throw std::invalid_argument("AnalogChainConfig: internal_rate_hz must be positive");
        if (r21_ohm.has_value() != r22_ohm.has_value())
            throw std::invalid_argument("AnalogChainConfig: r21 and r22 must be given together");
        if (r21_ohm && std::abs(bias_voltage(*r21_ohm, *r22_ohm, supply_v) - bias_v) > 1e-9)
            throw std::invalid_argument("AnalogChainConfig: bias_v disagrees with the r21/r22 divider");
    }

    double output_floor() const { return std::max(0.0, bias_v - swing_v / 2.0); }
    double output_ceiling() const { return std::min(supply_v, bias_v + swing_v / 2.0); }
};

/// Input in mV (or V), output in V at the ADC pin.
inline TimeSeries analog_chain(const TimeSeries& ts, const AnalogChainConfig& cfg) {
    cfg.validate();
    double to_volts = 1.0;
    switch (ts.units()) {
    case Units::millivolt: to_volts = 1e-3; break;
    case Units::volt: to_volts = 1.0; break;
    case Units::dimensionless: throw std::invalid_argument("analog_chain: input must carry voltage units");
    }

    std::vector<double> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) out[i] = ts[i] * to_volts;

    if (cfg.enable_analog_filters) {
        if (std::abs(ts.rate_hz() - cfg.internal_rate_hz) > 1e-9 * cfg.internal_rate_hz)
            throw std::invalid_argument("analog_chain: input must be sampled at internal_rate_hz (" +
                                        std::to_string(cfg.internal_rate_hz) + " Hz) when filters are enabled");
        const double fs = ts.rate_hz();
        const Biquad stages[] = {analog::highpass1(cfg.highpass_hz, fs),
                                 analog::notch2(cfg.notch_hz, fs, cfg.notch_q),
                                 analog::lowpass2(cfg.lowpass_hz, fs)};
        for (const Biquad& q : stages) {
            BiquadState st;
            for (double& v : out) v = st.step(q, v);
        }
    }

    const double lo = cfg.output_floor();
    const double hi = cfg.output_ceiling();
    for (double& v : out) v = std::clamp(cfg.bias_v + cfg.total_gain * v, lo, hi);
    return TimeSeries(std::move(out), ts.rate_hz(), Units::volt);
}

struct AdcModel {
    int bits = 12;
    double vref_v = 3.3;

    void validate() const {
        if (bits < 1 || bits > 30) throw std::invalid_argument("AdcModel: bits must lie in [1, 30]");
        if (!(vref_v > 0.0)) throw std::invalid_argument("AdcModel: vref must be positive");
    }
    std::int64_t max_code() const { return (std::int64_t{1} << bits) - 1; }
    /// Smallest detectable step, vref / (2^bits - 1).
    double lsb_v() const { return vref_v / static_cast<double>(max_code()); }
};

/// Round-to-nearest, ties to even, after clamping to [0, vref].
inline std::int64_t quantize(double v, const AdcModel& adc) {
    adc.validate();
    const double c = std::clamp(v, 0.0, adc.vref_v);
    return static_cast<std::int64_t>(std::nearbyint(c * static_cast<double>(adc.max_code()) / adc.vref_v));
}

/// Exact code voltage in 0.1 mV units, as sent on the wire.
inline Frame code_to_frame(std::int64_t code, const AdcModel& adc) {
    adc.validate();
    if (code < 0 || code > adc.max_code()) throw std::invalid_argument("code_to_voltage: code out of range");
    const double tenth_mv = std::round(static_cast<double>(code) * adc.vref_v * 1e4 / static_cast<double>(adc.max_code()));
    return Frame::from_tenth_mv(static_cast<std::uint32_t>(tenth_mv));
}

/// Code converted to volts and rounded to four decimals.
inline double code_to_voltage(std::int64_t code, const AdcModel& adc) { return code_to_frame(code, adc).volts(); }

/// Decimates `ts` to the ADC clock, quantizes each retained sample and
/// renders it as wire frames.
inline std::string sample_and_frame(const TimeSeries& ts, const AdcModel& adc, double adc_rate_hz = 500.0) {
    if (ts.units() != Units::volt) throw std::invalid_argument("sample_and_frame: input must be in volts");
    if (!(adc_rate_hz > 0.0)) throw std::invalid_argument("sample_and_frame: ADC rate must be positive");
    const double ratio = ts.rate_hz() / adc_rate_hz;
    const double k = std::round(ratio);
    if (k < 1.0 || std::abs(ratio - k) > 1e-9 * ratio)
        throw std::invalid_argument("sample_and_frame: input rate " + std::to_string(ts.rate_hz()) +
                                    " Hz is not an integer multiple of " + std::to_string(adc_rate_hz) + " Hz");
    const auto step = static_cast<std::size_t>(k);
    std::string out;
    out.reserve((ts.size() + step - 1) / step * Frame::wire_size);
    for (std::size_t i = 0; i < ts.size(); i += step) append_frame(out, code_to_frame(quantize(ts[i], adc), adc));
    return out;
}

/// Linear interpolation onto a grid `factor` times denser, used to feed a
/// recording into the analog model at its internal rate.
inline TimeSeries upsample_linear(const TimeSeries& ts, std::size_t factor) {
    if (factor == 0) throw std::invalid_argument("upsample_linear: factor must be >= 1");
    if (factor == 1 || ts.empty()) return TimeSeries(ts.values(), ts.rate_hz() * static_cast<double>(factor), ts.units());
    std::vector<double> out;
    out.reserve(ts.size() * factor);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double a = ts[i];
        const double b = i + 1 < ts.size() ? ts[i + 1] : ts[i];
        for (std::size_t j = 0; j < factor; ++j)
            out.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(factor));
    }
    return TimeSeries(std::move(out), ts.rate_hz() * static_cast<double>(factor), ts.units());
}

}  // namespace ecgtwin
