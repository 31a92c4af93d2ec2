#pragma once

// Threshold calibration against annotated recordings. Candidates are every
// local maximum of a normalised detection function above a small floor; a
// threshold accepts the candidates at or above it. Positives are the truth
// beats, negatives are candidates lying outside every truth window.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgtwin/qrs.hpp"
#include "ecgtwin/signal.hpp"

namespace ecgtwin {

struct Candidate {
    std::int64_t sample_index;
    double normalized_height;
};

inline std::vector<Candidate> candidates(std::span<const double> norm, double floor = 0.01) {
    std::vector<Candidate> out;
    for (std::size_t i = 1; i + 1 < norm.size(); ++i)
        if (is_local_max(norm[i - 1], norm[i], norm[i + 1]) && norm[i] >= floor)
            out.push_back({static_cast<std::int64_t>(i), norm[i]});
    return out;
}

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double tnr = 1.0;
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    /// False when there are no truth beats and tpr is undefined.
    bool tpr_defined = true;

    bool perfect() const { return tpr_defined && tp > 0 && fn == 0 && fp == 0; }
};

inline std::int64_t match_window_samples(double match_ms, double rate_hz) {
    return std::llround(match_ms * rate_hz / 1000.0);
}

/// Confusion counts at one threshold. Accepted candidates are matched one to
/// one to truth beats within +-window (greedy in index order, which is a
/// maximum matching for equal-width windows).
inline RocPoint score_threshold(std::span<const Candidate> cands, const BeatTruth& truth, double threshold,
                                double rate_hz, double match_ms = 50.0) {
    if (!(threshold >= 0.0)) throw std::invalid_argument("score_threshold: threshold must be >= 0");
    const std::int64_t w = match_window_samples(match_ms, rate_hz);
    const auto& t = truth.r_indices;

    RocPoint p;
    p.threshold = threshold;

    std::vector<std::int64_t> accepted;
    for (const auto& c : cands) {
        if (c.normalized_height >= threshold) {
            accepted.push_back(c.sample_index);
        } else {
            const auto it = std::lower_bound(t.begin(), t.end(), c.sample_index - w);
            const bool near_truth = it != t.end() && *it <= c.sample_index + w;
            if (!near_truth) ++p.tn;
        }
    }

    std::size_t j = 0;
    for (auto r : t) {
        while (j < accepted.size() && accepted[j] < r - w) ++j;
        if (j < accepted.size() && accepted[j] <= r + w) {
            ++p.tp;
            ++j;
        }
    }
    p.fn = static_cast<std::int64_t>(t.size()) - p.tp;
    p.fp = static_cast<std::int64_t>(accepted.size()) - p.tp;

    p.tpr_defined = !t.empty();
    p.tpr = p.tpr_defined ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn) : 0.0;
    p.tnr = (p.tn + p.fp) > 0 ? static_cast<double>(p.tn) / static_cast<double>(p.tn + p.fp) : 1.0;
    return p;
}

/// 0.00, 0.01, ..., 1.00
inline std::vector<double> default_threshold_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 100; ++i) g.push_back(i / 100.0);
    return g;
}

inline std::vector<RocPoint> sweep(std::span<const Candidate> cands, const BeatTruth& truth,
                                   std::span<const double> grid, double rate_hz, double match_ms = 50.0) {
    if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("sweep: threshold grid must be ascending");
    std::vector<RocPoint> curve;
    curve.reserve(grid.size());
    for (double th : grid) curve.push_back(score_threshold(cands, truth, th, rate_hz, match_ms));
    return curve;
}

/// Ends of the contiguous run of perfect thresholds, if any.
inline std::optional<std::pair<double, double>> perfect_interval(std::span<const RocPoint> curve) {
    std::optional<std::pair<double, double>> iv;
    for (const auto& p : curve) {
        if (!p.perfect()) continue;
        if (!iv) iv = std::pair{p.threshold, p.threshold};
        else iv->second = p.threshold;
    }
    return iv;
}

struct Calibration {
    double threshold = 0.0;
    std::size_t subjects_ok = 0;
    std::size_t subjects_failed = 0;
    std::vector<std::size_t> failed_subjects;
    std::vector<double> midpoints;
    std::vector<std::string> warnings;
};

/// Mean over subjects of the midpoint of each subject's perfect interval.
/// Subjects without one are excluded and reported.
inline Calibration optimal_threshold(std::span<const std::vector<RocPoint>> curves) {
    Calibration c;
    double sum = 0.0;
    for (std::size_t s = 0; s < curves.size(); ++s) {
        const auto iv = perfect_interval(curves[s]);
        if (!iv) {
            ++c.subjects_failed;
            c.failed_subjects.push_back(s);
            c.warnings.push_back("subject " + std::to_string(s) + ": no threshold reaches TPR = TNR = 1; excluded");
            continue;
        }
        const double mid = 0.5 * (iv->first + iv->second);
        c.midpoints.push_back(mid);
        sum += mid;
        ++c.subjects_ok;
    }
    if (c.subjects_ok == 0) throw std::runtime_error("optimal_threshold: no subject has a perfect threshold interval");
    c.threshold = sum / static_cast<double>(c.subjects_ok);
    return c;
}

inline void write_roc_csv(std::ostream& os, std::span<const RocPoint> curve) {
    os << "threshold,tpr,tnr,tp,fp,fn,tn\n";
    char buf[160];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f,%lld,%lld,%lld,%lld\n", p.threshold, p.tpr, p.tnr,
                      static_cast<long long>(p.tp), static_cast<long long>(p.fp), static_cast<long long>(p.fn),
                      static_cast<long long>(p.tn));
        os << buf;
    }
}

inline std::string calibration_report(const Calibration& c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "optimal_threshold=%.4f subjects_ok=%zu subjects_failed=%zu", c.threshold,
                  c.subjects_ok, c.subjects_failed);
    return buf;
}

}  // namespace ecgtwin
