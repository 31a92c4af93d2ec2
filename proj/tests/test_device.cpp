#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "ecgtwin/device.hpp"
#include "ecgtwin/signal.hpp"
#include "ecgtwin/wire.hpp"

using namespace ecgtwin;
using Catch::Approx;

TEST_CASE("adc lsb and code mapping") {
    AdcModel adc;
    CHECK(adc.max_code() == 4095);
    CHECK(adc.lsb_v() * 1000.0 == Approx(0.8058608059).epsilon(1e-9));
    CHECK(code_to_voltage(2048, adc) == Approx(1.6504).margin(1e-12));
    CHECK(code_to_voltage(0, adc) == 0.0);
    CHECK(code_to_voltage(4095, adc) == Approx(3.3));
    CHECK_THROWS(code_to_frame(4096, adc));
}

TEST_CASE("quantizer clips and rounds") {
    AdcModel adc;
    CHECK(quantize(-0.5, adc) == 0);
    CHECK(quantize(5.0, adc) == 4095);
    CHECK(quantize(1.65, adc) == 2048);
    CHECK(quantize(adc.lsb_v() * 10.0, adc) == 10);
}

TEST_CASE("quantizer is monotone") {
    AdcModel adc;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.2, 3.5);
    for (int i = 0; i < 20000; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        CHECK(quantize(a, adc) <= quantize(b, adc));
    }
}

TEST_CASE("bias from the divider") {
    CHECK(bias_voltage(10e3, 10e3, 3.3) == Approx(1.65));
    CHECK(bias_voltage(20e3, 10e3, 3.0) == Approx(1.0));
    CHECK(bias_voltage(0.0, 10e3, 3.3) == Approx(3.3));
    CHECK_THROWS(bias_voltage(10e3, 0.0, 3.3));
}

TEST_CASE("analog chain without filters is gain plus bias with clipping") {
    AnalogChainConfig cfg;
    cfg.enable_analog_filters = false;
    TimeSeries in({0.0, 1.0, -1.0, 10.0, -10.0}, 500.0, Units::millivolt);
    const auto out = analog_chain(in, cfg);
    CHECK(out.units() == Units::volt);
    CHECK(out[0] == Approx(0.3));
    CHECK(out[1] == Approx(0.8));
    CHECK(out[2] == Approx(0.0).margin(1e-12));
    CHECK(out[3] == Approx(1.8));
    CHECK(out[4] == Approx(0.0).margin(1e-12));
    CHECK(cfg.output_floor() == Approx(0.0).margin(1e-12));
    CHECK(cfg.output_ceiling() == Approx(1.8));
}

TEST_CASE("analog chain rejects the wrong rate when filtering") {
    AnalogChainConfig cfg;
    TimeSeries in(std::vector<double>(100, 0.0), 500.0, Units::millivolt);
    CHECK_THROWS(analog_chain(in, cfg));
}

TEST_CASE("analog filters pass mid band and reject mains") {
    AnalogChainConfig cfg;
    cfg.bias_v = 1.0;
    const double fs = cfg.internal_rate_hz;
    auto tone_gain = [&](double f) {
        std::vector<double> v(static_cast<std::size_t>(fs * 20));
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5e-3 * 1000.0 * std::sin(2 * std::numbers::pi * f * i / fs);
        const auto out = analog_chain(TimeSeries(v, fs, Units::millivolt), cfg);
        double peak = 0.0;
        for (std::size_t i = v.size() / 2; i < v.size(); ++i) peak = std::max(peak, std::abs(out[i] - 1.0));
        return peak / (0.5e-3 * cfg.total_gain);
    };
    CHECK(tone_gain(10.0) == Approx(1.0).margin(0.05));
    CHECK(tone_gain(50.0) < 0.01);
    CHECK(tone_gain(400.0) < 0.1);
}

TEST_CASE("sample and frame decimates and encodes") {
    AdcModel adc;
    std::vector<double> v(5000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.65;
    const auto bytes = sample_and_frame(TimeSeries(v, 5000.0, Units::volt), adc, 500.0);
    CHECK(bytes.size() == 500 * 7);
    CHECK(bytes.substr(0, 7) == "1.6504\n");
    CHECK_THROWS(sample_and_frame(TimeSeries(v, 5000.0, Units::volt), adc, 700.0));
    CHECK(sample_and_frame(TimeSeries({}, 500.0, Units::volt), adc, 500.0).empty());
}

TEST_CASE("one minute at 500 Hz is 210000 bytes") {
    AdcModel adc;
    AnalogChainConfig cfg;
    cfg.enable_analog_filters = false;
    const auto g = generate_ecg(lead_ii_template(), 60.0, 60.0, 500.0);
    const auto bytes = sample_and_frame(analog_chain(g.signal, cfg), adc, 500.0);
    CHECK(bytes.size() == 210000);
}

TEST_CASE("linear upsampling keeps original samples") {
    TimeSeries in({0.0, 1.0, 3.0}, 500.0, Units::millivolt);
    const auto up = upsample_linear(in, 10);
    CHECK(up.rate_hz() == 5000.0);
    CHECK(up[0] == 0.0);
    CHECK(up[5] == Approx(0.5));
    CHECK(up[10] == 1.0);
    CHECK(up[20] == 3.0);
}
