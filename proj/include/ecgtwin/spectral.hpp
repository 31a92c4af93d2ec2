#pragma once

// DFT, power spectral density in dB per bin, input-referred conversion and
// band-limited SNR.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgtwin/signal.hpp"

namespace ecgtwin {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

/// X[k] = sum_n x[n] exp(-j 2 pi k n / N). Radix-2 for power-of-two sizes,
/// direct summation otherwise.
inline std::vector<cplx> dft(std::span<const cplx> x) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("dft: empty input");
    if (!is_power_of_two(n)) {
        std::vector<cplx> out(n);
        for (std::size_t k = 0; k < n; ++k) {
            cplx acc = 0.0;
            for (std::size_t t = 0; t < n; ++t)
                acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n));
            out[k] = acc;
        }
        return out;
    }

    std::vector<cplx> a(x.begin(), x.end());
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    // Twiddles computed directly from the angle to avoid recurrence drift.
    std::vector<cplx> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
        tw[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * tw[j * stride];
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
    return a;
}

inline std::vector<cplx> dft(std::span<const double> x) {
    std::vector<cplx> c(x.begin(), x.end());
    return dft(std::span<const cplx>(c));
}

struct PsdEstimate {
    std::vector<double> freqs_hz;
    std::vector<double> psd_db;
    std::size_t n = 0;
    double rate_hz = 0.0;
};

/// Per-bin floor for zero power, in dB.
inline constexpr double psd_floor_db = -300.0;

/// PSD[k] = 10 log10(|X[k]|^2 / (N * SR)) for k = 0..N/2, rectangular window,
/// no one-sided doubling. Short input is zero-padded, long input truncated to
/// the first N * segments samples. With segments > 1 the |X[k]|^2 values of
/// consecutive non-overlapping blocks are averaged.
inline PsdEstimate psd(std::span<const double> x, std::size_t n = 4096, double rate_hz = 500.0,
                       std::size_t segments = 1) {
    if (!is_power_of_two(n)) throw std::invalid_argument("psd: N must be a power of two");
    if (!(rate_hz > 0.0)) throw std::invalid_argument("psd: rate must be positive");
    if (segments == 0) throw std::invalid_argument("psd: segments must be >= 1");

    std::vector<double> power(n / 2 + 1, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
        std::vector<cplx> block(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = s * n + i;
            if (src < x.size()) block[i] = x[src];
        }
        const auto spec = dft(std::span<const cplx>(block));
        for (std::size_t k = 0; k <= n / 2; ++k) power[k] += std::norm(spec[k]);
    }

    PsdEstimate out;
    out.n = n;
    out.rate_hz = rate_hz;
    const double denom = static_cast<double>(n) * rate_hz;
    for (std::size_t k = 0; k <= n / 2; ++k) {
        out.freqs_hz.push_back(static_cast<double>(k) * rate_hz / static_cast<double>(n));
        const double p = power[k] / static_cast<double>(segments) / denom;
        out.psd_db.push_back(p > 0.0 ? std::max(psd_floor_db, 10.0 * std::log10(p)) : psd_floor_db);
    }
    return out;
}

/// Removes the output bias (mean) and divides by the amplifier gain.
inline TimeSeries input_referred(const TimeSeries& output, double total_gain) {
    if (!(total_gain > 0.0)) throw std::invalid_argument("input_referred: gain must be positive");
    double mean = 0.0;
    for (double v : output.values()) mean += v;
    if (!output.empty()) mean /= static_cast<double>(output.size());
    std::vector<double> out;
    out.reserve(output.size());
    for (double v : output.values()) out.push_back((v - mean) / total_gain);
    return TimeSeries(std::move(out), output.rate_hz(), output.units());
}

/// 10 log10 of the in-band signal power over the in-band noise power, with
/// each bin converted back to linear power. Floor bins count as zero. Zero
/// noise power gives +infinity.
inline double snr_db(const PsdEstimate& signal, const PsdEstimate& noise, double band_lo_hz = 1.0,
                     double band_hi_hz = 102.0) {
    if (signal.n != noise.n || signal.rate_hz != noise.rate_hz)
        throw std::invalid_argument("snr_db: PSDs must share N and the sample rate");
    auto band_power = [&](const PsdEstimate& p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.psd_db.size(); ++k) {
            const double f = p.freqs_hz[k];
            if (f < band_lo_hz || f > band_hi_hz || p.psd_db[k] <= psd_floor_db) continue;
            acc += std::pow(10.0, p.psd_db[k] / 10.0);
        }
        return acc;
    };
    const double ps = band_power(signal);
    const double pn = band_power(noise);
    if (pn == 0.0) return std::numeric_limits<double>::infinity();
    if (ps == 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ps / pn);
}

inline void write_psd_csv(std::ostream& os, const PsdEstimate& p) {
    os << "freq_hz,psd_db\n";
    char buf[64];
    for (std::size_t k = 0; k < p.psd_db.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", p.freqs_hz[k], p.psd_db[k]);
        os << buf;
    }
}

inline std::string snr_report(double snr, double band_lo_hz, double band_hi_hz) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "snr_db=%.4f band=%g-%g", snr, band_lo_hz, band_hi_hz);
    return buf;
}

}  // namespace ecgtwin
