#include "catch_amalgamated.hpp"

#include <sstream>

#include "ecgtwin/roc.hpp"

using namespace ecgtwin;
using Catch::Approx;

namespace {

BeatTruth ten_beats() {
    BeatTruth t;
    for (int i = 1; i <= 10; ++i) t.r_indices.push_back(1000 * i);
    return t;
}

std::vector<Candidate> ten_plus_five() {
    std::vector<Candidate> c;
    for (int i = 1; i <= 10; ++i) {
        c.push_back({1000 * i + (i % 3) * 5, 0.80 + 0.01 * (i - 1)});
        if (i <= 5) c.push_back({1000 * i + 500, 0.1 * (i + 1)});
    }
    return c;
}

}  // namespace

TEST_CASE("candidates are strict local maxima above the floor") {
    std::vector<double> ramp(20);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 20.0;
    CHECK(candidates(ramp).empty());
    const auto c = candidates(std::vector<double>{0.0, 0.4, 0.8, 0.4, 0.0});
    REQUIRE(c.size() == 1);
    CHECK(c[0].sample_index == 2);
    CHECK(c[0].normalized_height == 0.8);
    CHECK(candidates(std::vector<double>{0.0, 0.005, 0.0}).empty());
}

TEST_CASE("match window is fifty milliseconds") { CHECK(match_window_samples(50.0, 500.0) == 25); }

TEST_CASE("hand enumerated confusion counts") {
    const auto truth = ten_beats();
    const auto c = ten_plus_five();
    auto p = score_threshold(c, truth, 0.45, 500.0);
    CHECK(p.tp == 10);
    CHECK(p.fn == 0);
    CHECK(p.fp == 2);
    CHECK(p.tn == 3);
    CHECK(p.tpr == 1.0);
    CHECK(p.tnr == Approx(0.6));

    p = score_threshold(c, truth, 0.845, 500.0);
    CHECK(p.tp == 5);
    CHECK(p.fn == 5);
    CHECK(p.fp == 0);
    CHECK(p.tn == 5);
    CHECK(p.tpr == 0.5);
    CHECK(p.tnr == 1.0);

    p = score_threshold(c, truth, 0.65, 500.0);
    CHECK(p.perfect());
}

TEST_CASE("endpoint thresholds") {
    const auto truth = ten_beats();
    const auto c = ten_plus_five();
    const auto lo = score_threshold(c, truth, 0.0, 500.0);
    CHECK(lo.tpr == 1.0);
    CHECK(lo.fp == 5);
    CHECK(lo.tn == 0);
    const auto hi = score_threshold(c, truth, 1.01, 500.0);
    CHECK(hi.tpr == 0.0);
    CHECK(hi.tnr == 1.0);
    CHECK(hi.tn == 5);
    CHECK_THROWS(score_threshold(c, truth, -0.1, 500.0));
}

TEST_CASE("empty truth flags the point") {
    const auto p = score_threshold(ten_plus_five(), BeatTruth{}, 0.5, 500.0);
    CHECK_FALSE(p.tpr_defined);
    CHECK_FALSE(p.perfect());
}

TEST_CASE("sweep is monotone and conserves counts") {
    const auto truth = ten_beats();
    const auto c = ten_plus_five();
    const auto grid = default_threshold_grid();
    CHECK(grid.size() == 101);
    const auto curve = sweep(c, truth, grid, 500.0);
    REQUIRE(curve.size() == 101);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].tpr <= curve[i - 1].tpr);
        CHECK(curve[i].tnr >= curve[i - 1].tnr);
    }
    for (const auto& p : curve) {
        CHECK(p.tp + p.fn == 10);
        CHECK(p.tp + p.fp + p.tn + p.fn == 15);
    }
    const auto iv = perfect_interval(curve);
    REQUIRE(iv);
    CHECK(iv->first == Approx(0.61));
    CHECK(iv->second == Approx(0.80));
    std::vector<double> bad{0.5, 0.2};
    CHECK_THROWS(sweep(c, truth, bad, 500.0));
}

TEST_CASE("calibration averages subject midpoints") {
    const auto truth = ten_beats();
    const auto grid = default_threshold_grid();
    std::vector<std::vector<RocPoint>> curves;
    curves.push_back(sweep(ten_plus_five(), truth, grid, 500.0));
    auto c2 = ten_plus_five();
    for (auto& c : c2)
        if (c.normalized_height < 0.7) c.normalized_height *= 0.5;
    curves.push_back(sweep(c2, truth, grid, 500.0));
    std::vector<Candidate> broken{{1000, 0.2}, {1500, 0.9}};
    curves.push_back(sweep(broken, truth, grid, 500.0));

    const auto cal = optimal_threshold(curves);
    CHECK(cal.subjects_ok == 2);
    CHECK(cal.subjects_failed == 1);
    CHECK(cal.failed_subjects == std::vector<std::size_t>{2});
    REQUIRE(cal.midpoints.size() == 2);
    CHECK(cal.midpoints[0] == Approx(0.705));
    CHECK(cal.midpoints[1] == Approx(0.555));
    CHECK(cal.threshold == Approx(0.63));
    CHECK(calibration_report(cal) == "optimal_threshold=0.6300 subjects_ok=2 subjects_failed=1");

    std::vector<std::vector<RocPoint>> none{curves[2]};
    CHECK_THROWS(optimal_threshold(none));
}

TEST_CASE("roc csv") {
    std::stringstream ss;
    const auto curve = sweep(ten_plus_five(), ten_beats(), default_threshold_grid(), 500.0);
    write_roc_csv(ss, curve);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "threshold,tpr,tnr,tp,fp,fn,tn");
    std::getline(ss, line);
    CHECK(line == "0.0000,1.000000,0.000000,10,5,0,0");
}
