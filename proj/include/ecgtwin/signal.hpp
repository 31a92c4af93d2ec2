#pragma once

// Uniformly sampled signals, the synthetic ECG generator and the additive
// noise models used to stand in for electrode recordings.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecgtwin {

enum class Units { millivolt, volt, dimensionless };

inline const char* to_string(Units u) {
    switch (u) {
    case Units::millivolt: return "mV";
    case Units::volt: return "V";
    case Units::dimensionless: return "1";
    }
    return "?";
}

inline Units units_from_string(const std::string& s) {
    if (s == "mV") return Units::millivolt;
    if (s == "V") return Units::volt;
    if (s == "1" || s == "dimensionless") return Units::dimensionless;
    throw std::invalid_argument("unknown units tag '" + s + "'");
}

/// A uniformly sampled signal. The rate is always positive and the samples
/// are always finite.
class TimeSeries {
public:
    TimeSeries(std::vector<double> values, double rate_hz, Units units)
        : values_(std::move(values)), rate_hz_(rate_hz), units_(units) {
        if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_))
            throw std::invalid_argument("TimeSeries: rate_hz must be positive");
        for (double v : values_)
            if (!std::isfinite(v))
                throw std::invalid_argument("TimeSeries: non-finite sample");
    }

    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> samples() const noexcept { return values_; }
    double rate_hz() const noexcept { return rate_hz_; }
    Units units() const noexcept { return units_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double duration_s() const noexcept { return static_cast<double>(values_.size()) / rate_hz_; }

private:
    std::vector<double> values_;
    double rate_hz_;
    Units units_;
};

/// One Gaussian deflection of the beat template. Offsets are relative to the
/// R peak, widths are standard deviations.
struct Wave {
    double amplitude_mv;
    double offset_s;
    double width_s;
};

struct EcgTemplate {
    Wave p{0.15, -0.20, 0.025};
    Wave q{-0.10, -0.03, 0.010};
    Wave r{1.00, 0.00, 0.012};
    Wave s{-0.20, 0.03, 0.012};
    Wave t{0.30, 0.25, 0.050};

    std::array<Wave, 5> waves() const { return {p, q, r, s, t}; }

    EcgTemplate scaled(double k) const {
        EcgTemplate out = *this;
        for (Wave* w : {&out.p, &out.q, &out.r, &out.s, &out.t}) w->amplitude_mv *= k;
        return out;
    }

    void validate() const {
        if (!(r.amplitude_mv > 0.0))
            throw std::invalid_argument("EcgTemplate: R amplitude must be positive");
        for (const Wave& w : waves())
            if (!(w.width_s > 0.0))
                throw std::invalid_argument("EcgTemplate: wave widths must be positive");
    }

    // Gaussians are truncated at this many standard deviations.
    static constexpr double support_sigmas = 5.0;

    /// Seconds the template extends before the R peak.
    double lead_s() const {
        double lead = 0.0;
        for (const Wave& w : waves()) lead = std::max(lead, -(w.offset_s - support_sigmas * w.width_s));
        return lead;
    }
    /// Seconds the template extends after the R peak.
    double tail_s() const {
        double tail = 0.0;
        for (const Wave& w : waves()) tail = std::max(tail, w.offset_s + support_sigmas * w.width_s);
        return tail;
    }
};

inline EcgTemplate lead_i_template() { return EcgTemplate{}; }
inline EcgTemplate lead_ii_template() { return EcgTemplate{}.scaled(5.0); }

struct NoiseSpec {
    double white_sigma_mv = 0.0;
    double mains_amp_mv = 0.0;
    double mains_phase_rad = 0.0;
    double wander_amp_mv = 0.0;
    double wander_freq_hz = 0.3;

    static constexpr double mains_hz = 50.0;
    static constexpr double wander_min_hz = 0.05;
    static constexpr double wander_max_hz = 2.0;

    void validate() const {
        if (white_sigma_mv < 0.0) throw std::invalid_argument("NoiseSpec: white_sigma must be >= 0");
        if (wander_amp_mv != 0.0 && (wander_freq_hz < wander_min_hz || wander_freq_hz > wander_max_hz))
            throw std::invalid_argument("NoiseSpec: wander_freq must lie in [0.05, 2] Hz");
    }
};

/// Sample indices of the true R peaks, strictly increasing.
struct BeatTruth {
    std::vector<std::int64_t> r_indices;

    void validate(std::size_t signal_length) const {
        for (std::size_t i = 0; i < r_indices.size(); ++i) {
            if (r_indices[i] < 0 || static_cast<std::size_t>(r_indices[i]) >= signal_length)
                throw std::invalid_argument("BeatTruth: index outside signal");
            if (i > 0 && r_indices[i] <= r_indices[i - 1])
                throw std::invalid_argument("BeatTruth: indices must be strictly increasing");
        }
    }
};

struct GeneratedEcg {
    TimeSeries signal;
    BeatTruth truth;
};

/// Periodic synthetic ECG in mV. R peaks sit on an exact sample grid spaced
/// round(60 * rate / hr) samples apart; a beat is only placed when the whole
/// template fits inside the record.
inline GeneratedEcg generate_ecg(const EcgTemplate& tmpl, double hr_bpm, double duration_s,
                                 double rate_hz) {
    tmpl.validate();
    if (!(hr_bpm >= 20.0 && hr_bpm <= 300.0))
        throw std::invalid_argument("generate_ecg: heart rate must lie in [20, 300] BPM");
    if (!(duration_s > 0.0)) throw std::invalid_argument("generate_ecg: duration must be positive");
    if (!(rate_hz > 0.0)) throw std::invalid_argument("generate_ecg: rate must be positive");

    const auto n = static_cast<std::int64_t>(std::llround(duration_s * rate_hz));
    const auto gap = static_cast<std::int64_t>(std::llround(60.0 * rate_hz / hr_bpm));
    const double lead = tmpl.lead_s();
    const double tail = tmpl.tail_s();
    // The small epsilon keeps exact products like 0.325 * 500 from rounding up.
    const auto first = static_cast<std::int64_t>(std::ceil(lead * rate_hz - 1e-9));
    const double last_t = static_cast<double>(n - 1) / rate_hz;

    std::vector<double> values(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)), 0.0);
    BeatTruth truth;
    for (std::int64_t r = first; r < n; r += gap) {
        const double tr = static_cast<double>(r) / rate_hz;
        if (tr + tail > last_t + 1e-12) break;
        truth.r_indices.push_back(r);
        for (const Wave& w : tmpl.waves()) {
            const double center = tr + w.offset_s;
            const double half = EcgTemplate::support_sigmas * w.width_s;
            const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((center - half) * rate_hz)));
            const auto hi = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor((center + half) * rate_hz)));
            for (std::int64_t i = lo; i <= hi; ++i) {
                const double z = (static_cast<double>(i) / rate_hz - center) / w.width_s;
                values[static_cast<std::size_t>(i)] += w.amplitude_mv * std::exp(-0.5 * z * z);
            }
        }
    }
    return {TimeSeries(std::move(values), rate_hz, Units::millivolt), std::move(truth)};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform in (0, 1] from the top 53 bits.
inline double unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

/// Counter-based standard normal: the value at a given (seed, index) never
/// depends on how many values were drawn before it.
inline double gaussian_at(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t key = detail::splitmix64(seed);
    const double u1 = detail::unit_open(detail::splitmix64(key ^ (2 * index)));
    const double u2 = detail::unit_open(detail::splitmix64(key ^ (2 * index + 1)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline TimeSeries add_noise(const TimeSeries& ts, const NoiseSpec& spec, std::uint64_t seed) {
    if (ts.units() != Units::millivolt) throw std::invalid_argument("add_noise: input must be in mV");
    spec.validate();
    std::vector<double> out = ts.values();
    const double rate = ts.rate_hz();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        if (spec.white_sigma_mv != 0.0) out[i] += spec.white_sigma_mv * gaussian_at(seed, i);
        if (spec.mains_amp_mv != 0.0)
            out[i] += spec.mains_amp_mv *
                      std::sin(2.0 * std::numbers::pi * NoiseSpec::mains_hz * t + spec.mains_phase_rad);
        if (spec.wander_amp_mv != 0.0)
            out[i] += spec.wander_amp_mv * std::sin(2.0 * std::numbers::pi * spec.wander_freq_hz * t);
    }
    return TimeSeries(std::move(out), rate, ts.units());
}

inline double rms(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("rms: empty series");
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc / static_cast<double>(values.size()));
}

inline double rms(const TimeSeries& ts) { return rms(ts.samples()); }

}  // namespace ecgtwin
