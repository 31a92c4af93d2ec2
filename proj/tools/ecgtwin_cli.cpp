// ecgtwin: generate, simulate, stream, design, psd and roc subcommands.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ecgtwin/ecgtwin.hpp"

namespace fs = std::filesystem;
using namespace ecgtwin;

namespace {

/// Files written by the current command; removed again if it fails.
class OutputSet {
public:
    std::string add(std::string path) {
        paths_.push_back(path);
        return path;
    }
    void commit() { paths_.clear(); }
    ~OutputSet() {
        for (const auto& p : paths_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    std::vector<std::string> paths_;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    return os;
}

void check_written(std::ofstream& os, const std::string& path) {
    os.flush();
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(is), {});
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("ecgtwin");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("ECGSTREAM_LOG"); env && *env) {
        const auto lvl = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept real level names.
        if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
        else spdlog::warn("ECGSTREAM_LOG='{}' is not a log level; using warn", env);
    }
}

// ---------------------------------------------------------------- gen

struct GenOptions {
    double hr = 60.0;
    double duration = 60.0;
    double rate = 500.0;
    std::uint64_t seed = 0;
    double white = 0.0, mains = 0.0, wander = 0.0;
    std::string lead = "ii";
    std::string out;
};

void cmd_gen(const GenOptions& o) {
    const auto tmpl = o.lead == "i" ? lead_i_template() : lead_ii_template();
    auto g = generate_ecg(tmpl, o.hr, o.duration, o.rate);
    NoiseSpec ns;
    ns.white_sigma_mv = o.white;
    ns.mains_amp_mv = o.mains;
    ns.wander_amp_mv = o.wander;
    const auto signal = add_noise(g.signal, ns, o.seed);

    OutputSet outs;
    write_recording(outs.add(o.out + ".csv"), signal);
    write_annotations(outs.add(o.out + ".ann"), g.truth);
    outs.commit();
    spdlog::info("wrote {}.csv ({} samples) and {}.ann ({} beats)", o.out, signal.size(), o.out, g.truth.r_indices.size());
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string in;
    std::string out;
    std::string serve;
    double rate = 500.0;
    bool no_analog_filters = false;
};

std::string simulate_bytes(const SimulateOptions& o) {
    const auto rec = read_recording(o.in);
    AnalogChainConfig cfg;
    cfg.enable_analog_filters = !o.no_analog_filters;
    TimeSeries input = rec;
    if (cfg.enable_analog_filters && !rec.empty()) {
        const double ratio = cfg.internal_rate_hz / rec.rate_hz();
        const double k = std::round(ratio);
        if (k < 1.0 || std::abs(ratio - k) > 1e-9 * ratio)
            throw std::runtime_error(o.in + ": rate " + std::to_string(rec.rate_hz()) +
                                     " Hz does not divide the analog model rate; use --no-analog-filters");
        input = upsample_linear(rec, static_cast<std::size_t>(k));
    } else if (cfg.enable_analog_filters) {
        input = TimeSeries({}, cfg.internal_rate_hz, rec.units());
    }
    return sample_and_frame(analog_chain(input, cfg), AdcModel{}, o.rate);
}

void cmd_simulate(const SimulateOptions& o) {
    const std::string bytes = simulate_bytes(o);
    const std::size_t frames = bytes.size() / Frame::wire_size;
    spdlog::info("{} frames ({} bytes) from {}", frames, bytes.size(), o.in);

    if (!o.out.empty()) {
        OutputSet outs;
        auto os = open_out(outs.add(o.out));
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        check_written(os, o.out);
        outs.commit();
    }
    if (o.serve.empty()) {
        std::cerr << "frames=" << frames << " bytes=" << bytes.size() << '\n';
        return;
    }

    ReplayServer server(parse_endpoint(o.serve));
    spdlog::info("serving on port {} at {} frames/s", server.port(), o.rate);
    std::cerr << "listening port=" << server.port() << std::endl;
    const auto st = server.serve(chunks_from_bytes(bytes, Frame::wire_size), o.rate);
    const double span = st.send_offsets_s.size() > 1 ? st.send_offsets_s.back() - st.send_offsets_s.front() : 0.0;
    const double achieved = span > 0.0 ? static_cast<double>(st.send_offsets_s.size() - 1) / span : 0.0;
    const double avg_err = span > 0.0 ? std::abs(achieved - o.rate) / o.rate : 0.0;
    const double worst = worst_window_pacing_error(st.send_offsets_s, o.rate, static_cast<std::size_t>(std::llround(o.rate)));
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "frames_sent=%llu bytes_sent=%llu duration_s=%.3f achieved_rate_hz=%.3f pacing_error=%.5f "
                  "worst_1s_pacing_error=%.5f client_disconnected=%d",
                  static_cast<unsigned long long>(st.chunks_sent), static_cast<unsigned long long>(st.bytes_sent), span,
                  achieved, avg_err, worst, st.client_disconnected ? 1 : 0);
    std::cerr << buf << '\n';
}

// ---------------------------------------------------------------- stream

struct StreamOptions {
    std::string endpoint;
    std::string in;
    std::string out;
    double rate = 500.0;
    double threshold = DetectorConfig{}.threshold;
    bool raw = false;
    double connect_timeout_s = 10.0;
};

void cmd_stream(const StreamOptions& o) {
    if (o.endpoint.empty() == o.in.empty()) throw CLI::ValidationError("stream", "give exactly one of --endpoint or --in");

    HostConfig cfg = default_host_config(o.rate);
    cfg.detector.threshold = o.threshold;
    cfg.raw = o.raw;
    cfg.detector.validate();

    OutputSet outs;
    const std::string filtered_path = outs.add(o.out + "_filtered.csv");
    const std::string beats_path = outs.add(o.out + "_beats.csv");
    auto fout = open_out(filtered_path);
    auto bout = open_out(beats_path);
    fout << "# rate_hz=" << detail::format_double(o.rate) << "\n# units=" << to_string(Units::volt) << '\n';
    bout << "sample_index,time_s,bpm\n";

    BoundedQueue<double> queue(BoundedQueue<double>::default_capacity);
    StreamStats stats;
    std::exception_ptr reader_error;

    std::thread reader([&] {
        try {
            if (!o.in.empty()) {
                const std::string bytes = read_file(o.in);
                StreamParser parser;
                std::vector<Frame> frames;
                constexpr std::size_t block = 4096;
                for (std::size_t pos = 0; pos < bytes.size(); pos += block) {
                    frames.clear();
                    parser.feed(std::string_view(bytes).substr(pos, block), frames);
                    for (const auto& f : frames)
                        if (!queue.push(f.volts())) break;
                }
                stats = parser.stats();
            } else {
                auto client = ReplayClient::connect_retry(
                    parse_endpoint(o.endpoint),
                    std::chrono::milliseconds(static_cast<long long>(o.connect_timeout_s * 1000.0)));
                spdlog::info("connected to {}", o.endpoint);
                std::vector<Frame> frames;
                while (client.read_some(frames)) {
                    for (const auto& f : frames)
                        if (!queue.push(f.volts())) break;
                    frames.clear();
                }
                stats = client.stats();
            }
        } catch (...) {
            reader_error = std::current_exception();
        }
        queue.close();
    });

    HostPipeline pipeline(cfg);
    std::optional<std::int64_t> last_beat;
    std::size_t beat_count = 0, bpm_count = 0;
    char buf[128];
    auto emit = [&](HostOutput&& out) {
        for (double v : out.filtered) fout << detail::format_double(v) << '\n';
        for (const auto& b : out.beats) {
            const std::int64_t idx = cfg.to_input_index(b.sample_index);
            ++beat_count;
            if (last_beat) {
                const double bpm = 60.0 * o.rate / static_cast<double>(b.sample_index - *last_beat);
                std::snprintf(buf, sizeof buf, "%lld,%.3f,%.2f\n", static_cast<long long>(idx), idx / o.rate, bpm);
            } else {
                std::snprintf(buf, sizeof buf, "%lld,%.3f,\n", static_cast<long long>(idx), idx / o.rate);
            }
            bout << buf;
            last_beat = b.sample_index;
        }
        for (const auto& reading : out.bpm) {
            std::snprintf(buf, sizeof buf, "BPM %.1f\n", reading.bpm);
            std::cout << buf << std::flush;
            ++bpm_count;
        }
        for (const auto& reading : out.rejected) spdlog::warn("rejected reading {:.1f} BPM at {}", reading.bpm, reading.at_index);
    };

    for (;;) {
        auto batch = queue.pop_batch(512);
        if (batch.empty()) break;
        emit(pipeline.push(batch));
    }
    emit(pipeline.finish());
    reader.join();

    std::cerr << to_summary(stats) << " beats=" << beat_count << " bpm_readings=" << bpm_count << '\n';
    if (reader_error) std::rethrow_exception(reader_error);
    check_written(fout, filtered_path);
    check_written(bout, beats_path);
    outs.commit();
}

// ---------------------------------------------------------------- design

struct DesignOptions {
    std::string kind = "fir";
    std::string out;
    std::string response;
    double rate = 500.0;
    std::size_t length = 500;
    double lo = 1.0, hi = 102.0;
    int order = 6;
    double center = 50.0, stop_lo = 48.0, stop_hi = 52.0;
    double step = 0.05;
};

void cmd_design(const DesignOptions& o) {
    OutputSet outs;
    auto os = open_out(outs.add(o.out));
    FrequencyResponse resp;
    const auto grid = frequency_grid(o.rate, o.step);
    if (o.kind == "fir") {
        const auto f = design_fir_ls(o.length, o.lo, o.hi, o.rate);
        write_coefficients(os, f);
        if (!o.response.empty()) resp = freq_response(f, grid);
    } else {
        const auto c = design_butter_notch(o.order, o.center, o.stop_lo, o.stop_hi, o.rate);
        write_coefficients(os, c);
        if (!o.response.empty()) resp = freq_response(c, grid);
    }
    check_written(os, o.out);
    if (!o.response.empty()) {
        auto rs = open_out(outs.add(o.response));
        write_response_csv(rs, resp);
        check_written(rs, o.response);
    }
    outs.commit();
}

// ---------------------------------------------------------------- psd

struct PsdOptions {
    std::string in;
    std::string out;
    std::string noise;
    std::size_t fft_n = 4096;
    std::size_t segments = 1;
    double skip_s = 1.5;
    double gain = 0.0;
    double band_lo = 1.0, band_hi = 102.0;
};

std::vector<double> psd_input(const std::string& path, const PsdOptions& o, double& rate) {
    auto ts = read_recording(path);
    rate = ts.rate_hz();
    if (o.gain > 0.0) ts = input_referred(ts, o.gain);
    const auto skip = std::min<std::size_t>(ts.size(), static_cast<std::size_t>(std::llround(o.skip_s * rate)));
    if (ts.size() == skip) throw std::runtime_error(path + ": no samples left after the " + std::to_string(o.skip_s) + " s warm-up");
    return std::vector<double>(ts.values().begin() + static_cast<std::ptrdiff_t>(skip), ts.values().end());
}

void cmd_psd(const PsdOptions& o) {
    double rate = 0.0;
    const auto x = psd_input(o.in, o, rate);
    const auto p = psd(x, o.fft_n, rate, o.segments);
    OutputSet outs;
    auto os = open_out(outs.add(o.out));
    write_psd_csv(os, p);
    check_written(os, o.out);
    if (!o.noise.empty()) {
        double nrate = 0.0;
        const auto n = psd_input(o.noise, o, nrate);
        const auto pn = psd(n, o.fft_n, nrate, o.segments);
        std::cout << snr_report(snr_db(p, pn, o.band_lo, o.band_hi), o.band_lo, o.band_hi) << '\n';
    }
    outs.commit();
}

// ---------------------------------------------------------------- roc

/// "s1..s10" -> s1, s2, ..., s10. The upper end may repeat the prefix or be
/// a bare number; anything else is taken literally.
std::vector<std::string> expand_subjects(const std::vector<std::string>& specs) {
    static const std::regex range(R"(^(.*?)(\d+)\.\.(.*?)(\d+)$)");
    std::vector<std::string> out;
    for (const auto& s : specs) {
        std::smatch m;
        if (std::regex_match(s, m, range) && (m[3].str().empty() || m[3].str() == m[1].str())) {
            const long a = std::stol(m[2].str()), b = std::stol(m[4].str());
            if (a > b) throw std::runtime_error("subject range '" + s + "' is descending");
            for (long i = a; i <= b; ++i) out.push_back(m[1].str() + std::to_string(i));
        } else {
            out.push_back(s);
        }
    }
    return out;
}

struct RocOptions {
    std::vector<std::string> subjects;
    std::string out;
    double match_ms = 50.0;
};

void cmd_roc(const RocOptions& o) {
    const auto subjects = expand_subjects(o.subjects);
    if (subjects.empty()) throw std::runtime_error("no subjects given");
    const auto grid = default_threshold_grid();
    std::vector<std::vector<RocPoint>> curves;
    OutputSet outs;
    for (const auto& s : subjects) {
        const auto rec = read_recording(s + ".csv");
        const auto truth = read_annotations(s + ".ann");
        try {
            truth.validate(rec.size());
        } catch (const std::exception& e) {
            throw std::runtime_error(s + ".ann: " + e.what());
        }
        const auto cfg = default_host_config(rec.rate_hz());
        curves.push_back(subject_roc(rec.samples(), truth, cfg, grid, o.match_ms));
        const std::string path = o.out + "_" + fs::path(s).filename().string() + "_roc.csv";
        auto os = open_out(outs.add(path));
        write_roc_csv(os, curves.back());
        check_written(os, path);
        spdlog::info("{}: {} candidates scored", s, rec.size());
    }
    const auto cal = optimal_threshold(curves);
    for (std::size_t i = 0; i < cal.failed_subjects.size(); ++i)
        spdlog::warn("{}: no threshold reaches TPR = TNR = 1; excluded", subjects[cal.failed_subjects[i]]);
    const std::string report = calibration_report(cal);
    const std::string path = o.out + "_calibration.txt";
    auto os = open_out(outs.add(path));
    os << report << '\n';
    check_written(os, path);
    std::cout << report << '\n';
    outs.commit();
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"ECG digital twin: synthetic recordings, device simulation, streaming detection and calibration"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic recording and its beat annotations");
    g->add_option("--hr", gen.hr, "Heart rate in BPM")->check(CLI::Range(20.0, 300.0));
    g->add_option("--duration", gen.duration, "Duration in seconds")->check(CLI::PositiveNumber);
    g->add_option("--rate-hz", gen.rate, "Sample rate")->check(CLI::PositiveNumber);
    g->add_option("--seed", gen.seed, "Noise seed");
    g->add_option("--noise-white", gen.white, "White noise sigma in mV")->check(CLI::NonNegativeNumber);
    g->add_option("--noise-mains", gen.mains, "50 Hz amplitude in mV")->check(CLI::NonNegativeNumber);
    g->add_option("--noise-wander", gen.wander, "Baseline wander amplitude in mV")->check(CLI::NonNegativeNumber);
    g->add_option("--lead", gen.lead, "Template lead")->check(CLI::IsMember({"i", "ii"}));
    g->add_option("--out", gen.out, "Output prefix (writes <out>.csv and <out>.ann)")->required();

    SimulateOptions sim;
    auto* s = app.add_subcommand("simulate", "Run a recording through the analog front end and ADC");
    s->add_option("--in", sim.in, "Recording CSV in mV")->required()->check(CLI::ExistingFile);
    s->add_option("--out", sim.out, "Write frame bytes to this file");
    s->add_option("--serve", sim.serve, "Serve frames on host:port (e.g. :7660)");
    s->add_option("--rate-hz", sim.rate, "ADC sample rate and frame pacing")->check(CLI::PositiveNumber);
    s->add_flag("--no-analog-filters", sim.no_analog_filters, "Apply only gain, bias and clipping");

    StreamOptions st;
    auto* t = app.add_subcommand("stream", "Decode frames, filter, detect beats and report heart rate");
    auto* ep = t->add_option("--endpoint", st.endpoint, "Connect to host:port");
    t->add_option("--in", st.in, "Read frame bytes from a file")->check(CLI::ExistingFile)->excludes(ep);
    t->add_option("--out", st.out, "Output prefix (writes <out>_filtered.csv and <out>_beats.csv)")->required();
    t->add_option("--rate-hz", st.rate, "Frame rate")->check(CLI::PositiveNumber);
    t->add_option("--threshold", st.threshold, "Detection threshold on the normalised paths")->check(CLI::Range(0.0, 1.0));
    t->add_flag("--raw", st.raw, "Bypass filtering and detection");
    t->add_option("--connect-timeout", st.connect_timeout_s, "Seconds to keep retrying the connection")
        ->check(CLI::NonNegativeNumber);

    DesignOptions des;
    auto* d = app.add_subcommand("design", "Design the band-pass FIR or the mains notch");
    d->add_option("--kind", des.kind, "fir or notch")->check(CLI::IsMember({"fir", "notch"}));
    d->add_option("--out", des.out, "Coefficient file")->required();
    d->add_option("--response", des.response, "Also write the frequency response CSV");
    d->add_option("--rate-hz", des.rate, "Sample rate")->check(CLI::PositiveNumber);
    d->add_option("--length", des.length, "FIR length");
    d->add_option("--pass-lo", des.lo, "FIR pass band low edge in Hz");
    d->add_option("--pass-hi", des.hi, "FIR pass band high edge in Hz");
    d->add_option("--order", des.order, "Notch order");
    d->add_option("--center", des.center, "Notch centre in Hz");
    d->add_option("--stop-lo", des.stop_lo, "Notch stop band low edge in Hz");
    d->add_option("--stop-hi", des.stop_hi, "Notch stop band high edge in Hz");
    d->add_option("--step", des.step, "Response grid step in Hz")->check(CLI::PositiveNumber);

    PsdOptions ps;
    auto* p = app.add_subcommand("psd", "Power spectral density of a recording");
    p->add_option("--in", ps.in, "Recording CSV")->required()->check(CLI::ExistingFile);
    p->add_option("--out", ps.out, "PSD CSV")->required();
    p->add_option("--fft-n", ps.fft_n, "Transform size (power of two)");
    p->add_option("--segments", ps.segments, "Average this many consecutive blocks")->check(CLI::PositiveNumber);
    p->add_option("--skip", ps.skip_s, "Seconds discarded at the start")->check(CLI::NonNegativeNumber);
    p->add_option("--gain", ps.gain, "Refer to the input: remove the mean and divide by this gain");
    p->add_option("--noise", ps.noise, "Noise recording; prints the in-band SNR")->check(CLI::ExistingFile);
    p->add_option("--band-lo", ps.band_lo, "SNR band low edge in Hz");
    p->add_option("--band-hi", ps.band_hi, "SNR band high edge in Hz");

    RocOptions roc;
    auto* r = app.add_subcommand("roc", "Threshold sweep and calibration over annotated recordings");
    r->add_option("--subjects", roc.subjects, "Recording prefixes; ranges like s1..s10 expand")->required();
    r->add_option("--out", roc.out, "Output prefix")->required();
    r->add_option("--match-ms", roc.match_ms, "Beat matching window in ms")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*g) cmd_gen(gen);
        else if (*s) cmd_simulate(sim);
        else if (*t) cmd_stream(st);
        else if (*d) cmd_design(des);
        else if (*p) cmd_psd(ps);
        else if (*r) cmd_roc(roc);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
