#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace ecgtwin {

/// Second-order section with a0 normalised to 1:
/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    std::complex<double> response(double omega) const {
        const std::complex<double> z1 = std::polar(1.0, -omega);
        const std::complex<double> z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }

    /// Largest pole radius; the section is stable iff this is below 1.
    double max_pole_radius() const {
        const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2));
        const std::complex<double> p1 = (-a1 + disc) / 2.0;
        const std::complex<double> p2 = (-a1 - disc) / 2.0;
        return std::max(std::abs(p1), std::abs(p2));
    }

    friend bool operator==(const Biquad&, const Biquad&) = default;
};

/// Transposed direct form II state for one section.
struct BiquadState {
    double s1 = 0.0, s2 = 0.0;

    double step(const Biquad& q, double x) {
        const double y = q.b0 * x + s1;
        s1 = q.b1 * x - q.a1 * y + s2;
        s2 = q.b2 * x - q.a2 * y;
        return y;
    }
};

namespace analog {

// Bilinear-transform sections with frequency prewarping. These model the
// behavioural analog stages of the front end, not the digital filters.

inline double prewarp(double f_hz, double rate_hz) {
    return 2.0 * rate_hz * std::tan(std::numbers::pi * f_hz / rate_hz);
}

/// First-order high-pass s / (s + wc), unity passband gain.
inline Biquad highpass1(double fc_hz, double rate_hz) {
    const double k = 2.0 * rate_hz;
    const double wc = prewarp(fc_hz, rate_hz);
    const double d = k + wc;
    return {k / d, -k / d, 0.0, (wc - k) / d, 0.0};
}

/// Second-order low-pass, unity DC gain.
inline Biquad lowpass2(double fc_hz, double rate_hz, double q = std::numbers::sqrt2 / 2.0) {
    const double w0 = 2.0 * std::numbers::pi * fc_hz / rate_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

/// Second-order notch with unity gain away from f0.
inline Biquad notch2(double f0_hz, double rate_hz, double q) {
    const double w0 = 2.0 * std::numbers::pi * f0_hz / rate_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {1.0 / a0, -2.0 * c / a0, 1.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

}  // namespace analog

}  // namespace ecgtwin
