#pragma once

// Digital filter design for the host: a linear-phase least-squares FIR
// band-pass and a Butterworth band-stop (notch) realised as biquads, plus
// exact frequency-response evaluation and the coefficient file formats.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgtwin/biquad.hpp"

namespace ecgtwin {

struct FirCoeffs {
    std::vector<double> taps;
    double rate_hz = 500.0;

    std::size_t length() const noexcept { return taps.size(); }

    bool is_symmetric() const {
        const std::size_t n = taps.size();
        for (std::size_t i = 0; i < n / 2; ++i)
            if (taps[i] != taps[n - 1 - i]) return false;
        return true;
    }
};

struct IirCascade {
    std::vector<Biquad> sections;
    double rate_hz = 500.0;

    bool is_stable() const {
        return std::all_of(sections.begin(), sections.end(),
                           [](const Biquad& q) { return q.max_pole_radius() < 1.0; });
    }
};

struct FrequencyResponse {
    std::vector<double> freqs_hz;
    std::vector<double> magnitude_db;
    std::vector<double> phase_rad;
    std::vector<double> group_delay_samples;
};

/// Magnitudes are reported in dB and never go below this floor.
inline constexpr double db_floor = -300.0;

inline double magnitude_to_db(double mag) {
    if (!(mag > 0.0)) return db_floor;
    return std::max(db_floor, 20.0 * std::log10(mag));
}

/// Band edges for the least-squares band-pass. Frequencies between a stop
/// edge and the neighbouring pass edge are don't-care.
struct FirBandLayout {
    double stop_lo_hz;
    double pass_lo_hz;
    double pass_hi_hz;
    double stop_hi_hz;

    /// Transition bands [0.2 * lo, lo] and [hi, hi + 5].
    static FirBandLayout with_default_transitions(double pass_lo_hz, double pass_hi_hz) {
        return {0.2 * pass_lo_hz, pass_lo_hz, pass_hi_hz, pass_hi_hz + 5.0};
    }
};

namespace detail {

// Integral of cos(a w) over [w1, w2].
inline double integral_cos(double a, double w1, double w2) {
    if (a == 0.0) return w2 - w1;
    return (std::sin(a * w2) - std::sin(a * w1)) / a;
}

// In-place Cholesky solve of the symmetric positive definite system A x = b.
// Returns false if A is not numerically positive definite.
inline bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return true;
}

}  // namespace detail

/// Linear-phase FIR minimising the unweighted integrated squared error to
/// the ideal band-pass over the care bands. The normal equations use exact
/// band integrals, so there is no frequency grid to choose.
inline FirCoeffs design_fir_ls(std::size_t length, const FirBandLayout& bands, double rate_hz) {
    const double nyq = rate_hz / 2.0;
    if (!(rate_hz > 0.0)) throw std::invalid_argument("design_fir_ls: rate must be positive");
    if (length < 3) throw std::invalid_argument("design_fir_ls: length must be >= 3");
    if (!(bands.pass_lo_hz > 0.0 && bands.pass_lo_hz < bands.pass_hi_hz && bands.pass_hi_hz < nyq))
        throw std::invalid_argument("design_fir_ls: need 0 < pass_lo < pass_hi < rate/2");
    if (!(bands.stop_lo_hz >= 0.0 && bands.stop_lo_hz < bands.pass_lo_hz && bands.stop_hi_hz > bands.pass_hi_hz))
        throw std::invalid_argument("design_fir_ls: stop edges must lie outside the passband");

    struct Band {
        double w1, w2, desired;
    };
    auto w = [&](double f) { return 2.0 * std::numbers::pi * f / rate_hz; };
    std::vector<Band> care;
    if (bands.stop_lo_hz > 0.0) care.push_back({0.0, w(bands.stop_lo_hz), 0.0});
    care.push_back({w(bands.pass_lo_hz), w(bands.pass_hi_hz), 1.0});
    if (bands.stop_hi_hz < nyq) care.push_back({w(bands.stop_hi_hz), std::numbers::pi, 0.0});

    // Amplitude basis: cos(w k) for odd length, cos(w (k + 1/2)) for even.
    const bool odd = length % 2 == 1;
    const std::size_t m = odd ? (length - 1) / 2 + 1 : length / 2;
    std::vector<double> alpha(m);
    for (std::size_t k = 0; k < m; ++k) alpha[k] = odd ? static_cast<double>(k) : static_cast<double>(k) + 0.5;

    std::vector<double> q(m * m, 0.0), p(m, 0.0);
    for (const Band& b : care) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = 0.5 * (detail::integral_cos(alpha[i] - alpha[j], b.w1, b.w2) +
                                        detail::integral_cos(alpha[i] + alpha[j], b.w1, b.w2));
                q[i * m + j] += v;
                if (i != j) q[j * m + i] += v;
            }
            if (b.desired != 0.0) p[i] += b.desired * detail::integral_cos(alpha[i], b.w1, b.w2);
        }
    }
    if (!detail::cholesky_solve(q, p, m))
        throw std::invalid_argument("design_fir_ls: infeasible band layout (singular normal equations)");

    FirCoeffs out;
    out.rate_hz = rate_hz;
    out.taps.assign(length, 0.0);
    if (odd) {
        const std::size_t mid = (length - 1) / 2;
        out.taps[mid] = p[0];
        for (std::size_t k = 1; k < m; ++k) out.taps[mid - k] = out.taps[mid + k] = p[k] / 2.0;
    } else {
        const std::size_t half = length / 2;
        for (std::size_t k = 0; k < m; ++k) out.taps[half - 1 - k] = out.taps[half + k] = p[k] / 2.0;
    }
    return out;
}

inline FirCoeffs design_fir_ls(std::size_t length = 500, double pass_lo_hz = 1.0, double pass_hi_hz = 102.0,
                               double rate_hz = 500.0) {
    return design_fir_ls(length, FirBandLayout::with_default_transitions(pass_lo_hz, pass_hi_hz), rate_hz);
}

/// Butterworth band-stop of the given (even) order: a low-pass prototype of
/// order/2 mapped through the band-stop transformation and the bilinear
/// transform. The transmission zeros land exactly on `center_hz`; the stop
/// band edges set the bandwidth after prewarping.
inline IirCascade design_butter_notch(int order = 6, double center_hz = 50.0, double stop_lo_hz = 48.0,
                                      double stop_hi_hz = 52.0, double rate_hz = 500.0) {
    if (!(rate_hz > 0.0)) throw std::invalid_argument("design_butter_notch: rate must be positive");
    if (order < 2 || order % 2 != 0) throw std::invalid_argument("design_butter_notch: order must be even and >= 2");
    if (!(stop_lo_hz > 0.0 && stop_lo_hz < stop_hi_hz && stop_hi_hz < rate_hz / 2.0))
        throw std::invalid_argument("design_butter_notch: need 0 < stop_lo < stop_hi < rate/2");
    if (!(center_hz > stop_lo_hz && center_hz < stop_hi_hz))
        throw std::invalid_argument("design_butter_notch: center must lie inside the stop band");

    using cd = std::complex<double>;
    const double k = 2.0 * rate_hz;
    const double wlo = analog::prewarp(stop_lo_hz, rate_hz);
    const double whi = analog::prewarp(stop_hi_hz, rate_hz);
    const double w0 = analog::prewarp(center_hz, rate_hz);
    const double bw = whi - wlo;
    const int n = order / 2;

    // Zeros at z = exp(+-j theta0), the bilinear image of s = +-j w0.
    const double theta0 = 2.0 * std::atan(w0 / k);
    const double zc = std::cos(theta0);

    auto to_z = [k](cd s) { return (k + s) / (k - s); };
    auto make_section = [&](cd z1, cd z2) {
        Biquad q;
        q.a1 = -(z1 + z2).real();
        q.a2 = (z1 * z2).real();
        // Unity gain at DC.
        const double g = (1.0 + q.a1 + q.a2) / (2.0 - 2.0 * zc);
        q.b0 = g;
        q.b1 = -2.0 * zc * g;
        q.b2 = g;
        return q;
    };

    IirCascade out;
    out.rate_hz = rate_hz;
    for (int i = 1; i <= n; ++i) {
        const cd p = std::polar(1.0, std::numbers::pi * (2.0 * i + n - 1) / (2.0 * n));
        if (p.imag() < -1e-12) continue;  // handled with its conjugate
        // s^2 - (bw / p) s + w0^2 = 0
        const cd bcoef = -bw / p;
        const cd disc = std::sqrt(bcoef * bcoef - 4.0 * w0 * w0);
        const cd s1 = (-bcoef + disc) / 2.0;
        const cd s2 = (-bcoef - disc) / 2.0;
        if (std::abs(p.imag()) <= 1e-12) {
            out.sections.push_back(make_section(to_z(s1), to_z(s2)));
        } else {
            out.sections.push_back(make_section(to_z(s1), std::conj(to_z(s1))));
            out.sections.push_back(make_section(to_z(s2), std::conj(to_z(s2))));
        }
    }
    return out;
}

inline std::complex<double> fir_response_at(const FirCoeffs& f, double freq_hz) {
    const double omega = 2.0 * std::numbers::pi * freq_hz / f.rate_hz;
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < f.taps.size(); ++n)
        acc += f.taps[n] * std::polar(1.0, -omega * static_cast<double>(n));
    return acc;
}

inline std::complex<double> iir_response_at(const IirCascade& c, double freq_hz) {
    const double omega = 2.0 * std::numbers::pi * freq_hz / c.rate_hz;
    std::complex<double> h = 1.0;
    for (const Biquad& q : c.sections) h *= q.response(omega);
    return h;
}

namespace detail {

inline void unwrap(std::vector<double>& phase) {
    for (std::size_t i = 1; i < phase.size(); ++i) {
        double d = phase[i] - phase[i - 1];
        const double turns = std::round(d / (2.0 * std::numbers::pi));
        phase[i] -= turns * 2.0 * std::numbers::pi;
    }
}

}  // namespace detail

/// Linear-phase FIR filters are evaluated through their real amplitude
/// function, so the delay is exactly (FL - 1) / 2. Other FIRs use the direct
/// transform and the ratio form of the group delay.
inline FrequencyResponse freq_response(const FirCoeffs& f, const std::vector<double>& freqs_hz) {
    FrequencyResponse r;
    r.freqs_hz = freqs_hz;
    const std::size_t len = f.taps.size();
    const double center = (static_cast<double>(len) - 1.0) / 2.0;
    const bool symmetric = f.is_symmetric();
    for (double fr : freqs_hz) {
        const double omega = 2.0 * std::numbers::pi * fr / f.rate_hz;
        if (symmetric) {
            double amp = 0.0;
            for (std::size_t n = 0; n < len / 2; ++n)
                amp += 2.0 * f.taps[n] * std::cos(omega * (static_cast<double>(n) - center));
            if (len % 2 == 1) amp += f.taps[len / 2];
            r.magnitude_db.push_back(magnitude_to_db(std::abs(amp)));
            r.phase_rad.push_back(-omega * center + (amp < 0.0 ? std::numbers::pi : 0.0));
            r.group_delay_samples.push_back(center);
        } else {
            std::complex<double> h = 0.0, nh = 0.0;
            for (std::size_t n = 0; n < len; ++n) {
                const auto e = f.taps[n] * std::polar(1.0, -omega * static_cast<double>(n));
                h += e;
                nh += static_cast<double>(n) * e;
            }
            r.magnitude_db.push_back(magnitude_to_db(std::abs(h)));
            r.phase_rad.push_back(std::arg(h));
            r.group_delay_samples.push_back(std::norm(h) > 0.0 ? (nh / h).real() : 0.0);
        }
    }
    detail::unwrap(r.phase_rad);
    return r;
}

/// Group delay is the central difference of the phase over a 0.05 Hz step.
inline FrequencyResponse freq_response(const IirCascade& c, const std::vector<double>& freqs_hz) {
    constexpr double half_step_hz = 0.025;
    FrequencyResponse r;
    r.freqs_hz = freqs_hz;
    const double dw = 2.0 * std::numbers::pi * (2.0 * half_step_hz) / c.rate_hz;
    for (double fr : freqs_hz) {
        const auto h = iir_response_at(c, fr);
        r.magnitude_db.push_back(magnitude_to_db(std::abs(h)));
        r.phase_rad.push_back(std::arg(h));
        const auto hp = iir_response_at(c, fr + half_step_hz);
        const auto hm = iir_response_at(c, fr - half_step_hz);
        const double dphi = (std::norm(hp) > 0.0 && std::norm(hm) > 0.0) ? std::arg(hp / hm) : 0.0;
        r.group_delay_samples.push_back(-dphi / dw);
    }
    detail::unwrap(r.phase_rad);
    return r;
}

/// Uniform grid from 0 to rate/2 inclusive.
inline std::vector<double> frequency_grid(double rate_hz, double step_hz) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor(rate_hz / 2.0 / step_hz + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(static_cast<double>(i) * step_hz);
    return g;
}

inline double fir_delay_seconds(std::size_t filter_length, double rate_hz) {
    if (filter_length < 1) throw std::invalid_argument("fir_delay_seconds: length must be >= 1");
    if (!(rate_hz > 0.0)) throw std::invalid_argument("fir_delay_seconds: rate must be positive");
    return (static_cast<double>(filter_length) - 1.0) / (2.0 * rate_hz);
}

// ---- file formats ---------------------------------------------------------

namespace detail {

inline std::string fmt_g(double v, int digits = 17) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace detail

inline void write_coefficients(std::ostream& os, const FirCoeffs& f) {
    os << "# fir len=" << f.taps.size() << " rate=" << detail::fmt_g(f.rate_hz, 10) << '\n';
    for (double t : f.taps) os << detail::fmt_g(t) << '\n';
}

inline void write_coefficients(std::ostream& os, const IirCascade& c) {
    os << "# iir sections=" << c.sections.size() << " rate=" << detail::fmt_g(c.rate_hz, 10) << '\n';
    for (const Biquad& q : c.sections)
        os << detail::fmt_g(q.b0) << ' ' << detail::fmt_g(q.b1) << ' ' << detail::fmt_g(q.b2) << ' '
           << detail::fmt_g(q.a1) << ' ' << detail::fmt_g(q.a2) << '\n';
}

namespace detail {

inline std::string header_field(const std::string& header, const std::string& key) {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos) throw std::runtime_error("coefficient header lacks '" + key + "='");
    const auto start = pos + key.size() + 1;
    return header.substr(start, header.find_first_of(" \t\r", start) - start);
}

}  // namespace detail

inline FirCoeffs read_fir_coefficients(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# fir", 0) != 0)
        throw std::runtime_error("not a FIR coefficient file (expected '# fir len=.. rate=..')");
    FirCoeffs f;
    const auto len = std::stoul(detail::header_field(header, "len"));
    f.rate_hz = std::stod(detail::header_field(header, "rate"));
    double v = 0.0;
    while (is >> v) f.taps.push_back(v);
    if (f.taps.size() != len)
        throw std::runtime_error("FIR coefficient count " + std::to_string(f.taps.size()) + " != header len " +
                                 std::to_string(len));
    return f;
}

inline IirCascade read_iir_coefficients(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# iir", 0) != 0)
        throw std::runtime_error("not an IIR coefficient file (expected '# iir sections=.. rate=..')");
    IirCascade c;
    const auto n = std::stoul(detail::header_field(header, "sections"));
    c.rate_hz = std::stod(detail::header_field(header, "rate"));
    Biquad q;
    while (is >> q.b0 >> q.b1 >> q.b2 >> q.a1 >> q.a2) c.sections.push_back(q);
    if (c.sections.size() != n)
        throw std::runtime_error("IIR section count " + std::to_string(c.sections.size()) + " != header sections " +
                                 std::to_string(n));
    return c;
}

inline void write_response_csv(std::ostream& os, const FrequencyResponse& r) {
    os << "freq_hz,mag_db,phase_rad,group_delay_samples\n";
    for (std::size_t i = 0; i < r.freqs_hz.size(); ++i)
        os << detail::fmt_g(r.freqs_hz[i], 10) << ',' << detail::fmt_g(r.magnitude_db[i], 10) << ','
           << detail::fmt_g(r.phase_rad[i], 10) << ',' << detail::fmt_g(r.group_delay_samples[i], 10) << '\n';
}

}  // namespace ecgtwin
