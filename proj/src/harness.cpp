#include "dispcal/harness.hpp"

#include "dispcal/error.hpp"
#include "dispcal/image_io.hpp"
#include "dispcal/panel_pattern.hpp"
#include "dispcal/parallel.hpp"
#include "dispcal/spectral.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dispcal {
namespace {

using nlohmann::json;

std::string sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9e", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ' ' || c == ',' || c == '(' || c == ')') c = '_';
    return s;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

ErrorStats stats(const std::vector<double>& v) {
    ErrorStats s;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size()));
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
    os << text;
}

// Fills the record's errors from a calibration run on the two captures.
void calibrate_trial(TrialRecord& rec, const CapturedImage& c1, const CapturedImage& c2,
                     const ExperimentConfig& cfg) {
    CalibrationConfig cc = cfg.calibration;
    cc.panel = rec.truth.panel;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        CalibrationResult r = calibrate(Observation::from_capture(c1), Observation::from_capture(c2), cc);
        rec.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        rec.dp = std::abs(r.p - rec.truth.p);
        rec.dalpha_deg = std::abs(r.alpha_deg - rec.truth.alpha_deg());
        rec.dt = std::abs(r.t - rec.truth.t);
        rec.dsigma = std::abs(wrap_centered(r.sigma - rec.truth.sigma, rec.truth.slit_period()));
        rec.ok = true;
        rec.status = "ok";
        rec.result = std::move(r);
    } catch (const Error& e) {
        rec.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        rec.ok = false;
        rec.status = "fail:" + sanitize(e.stage().empty() ? "calibrate" : e.stage()) + ":" +
                     std::string(to_string(e.kind()));
    }
}

CapturedImage noisy_copy(const CapturedImage& clean, const NoiseLevel& level, std::uint64_t seed,
                         double& measured_db) {
    if (level.kind == NoiseLevel::Kind::None) {
        measured_db = std::numeric_limits<double>::infinity();
        return clean;
    }
    const double scale =
        level.kind == NoiseLevel::Kind::Scale ? level.value : noise_scale_for_snr(clean, level.value);
    CapturedImage out = add_poisson_noise(clean, scale, seed);
    measured_db = snr(clean, out);
    return out;
}

std::vector<ErrorReport> run_levels(const ExperimentConfig& cfg, const std::vector<NoiseLevel>& levels) {
    cfg.validate();
    const DisplayParams designed = cfg.display.designed();
    const Intrinsics k = capture_intrinsics(designed.panel, cfg);
    const PanelImage panel = make_calibration_multiplex(designed.panel.panel_w, designed.panel.panel_h);

    std::vector<ErrorReport> reports(levels.size());
    for (std::size_t li = 0; li < levels.size(); ++li) {
        reports[li].display = cfg.display.name;
        reports[li].level = levels[li].label();
        reports[li].trials.resize(static_cast<std::size_t>(cfg.trials));
    }

    parallel_for(0, static_cast<std::size_t>(cfg.trials), [&](std::size_t i) {
        const std::uint64_t seed = cfg.seed + i;
        std::mt19937_64 rng(seed);
        TrialRecord base;
        base.trial = static_cast<int>(i);
        base.seed = seed;
        base.truth = perturb_display(designed, cfg.perturbation, rng);
        const CameraPose pose1 = jittered_pose(cfg.d1, cfg, k, rng);
        const CameraPose pose2 = jittered_pose(cfg.d2, cfg, k, rng);

        SimOptions so = cfg.sim;
        so.noise_scale = 0.0;
        std::optional<std::array<CapturedImage, 2>> clean;
        std::string sim_failure;
        try {
            clean = std::array<CapturedImage, 2>{simulate_capture(panel, base.truth, pose1, so),
                                                 simulate_capture(panel, base.truth, pose2, so)};
        } catch (const Error& e) {
            sim_failure = "fail:simulate:" + std::string(to_string(e.kind()));
        }

        for (std::size_t li = 0; li < levels.size(); ++li) {
            TrialRecord rec = base;
            if (!clean) {
                rec.status = sim_failure;
            } else {
                double s1 = 0.0, s2 = 0.0;
                const CapturedImage n1 = noisy_copy((*clean)[0], levels[li], mix(seed, 2 * li + 1), s1);
                const CapturedImage n2 = noisy_copy((*clean)[1], levels[li], mix(seed, 2 * li + 2), s2);
                rec.snr_db = std::isfinite(s1) && std::isfinite(s2) ? 0.5 * (s1 + s2)
                                                                    : std::numeric_limits<double>::infinity();
                calibrate_trial(rec, n1, n2, cfg);
            }
            reports[li].trials[i] = std::move(rec);
        }
    });
    for (auto& r : reports) r.summarize();
    return reports;
}

NoiseLevel parse_level(const json& j, bool is_snr) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "clean" || s == "none") return NoiseLevel::none();
        throw Error(ErrorKind::Config, "unrecognized noise level '" + s + "'");
    }
    if (!j.is_number()) throw Error(ErrorKind::Config, "noise levels must be numbers");
    const double v = j.get<double>();
    if (is_snr) return std::isfinite(v) ? NoiseLevel::snr_db(v) : NoiseLevel::none();
    return v > 0.0 ? NoiseLevel::scale(v) : NoiseLevel::none();
}

Eigen::Vector3d random_axis(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        Eigen::Vector3d a(n(rng), n(rng), n(rng));
        if (a.norm() > 1e-9) return a.normalized();
    }
}

std::array<std::uint8_t, 3> hue_color(int k, int n) {
    const double h = 6.0 * k / n;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const auto b = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
    switch (sector) {
        case 0: return {255, b(f), 0};
        case 1: return {b(1 - f), 255, 0};
        case 2: return {0, 255, b(f)};
        case 3: return {0, b(1 - f), 255};
        case 4: return {b(f), 0, 255};
        default: return {255, 0, b(1 - f)};
    }
}

PanelImage to_rgb8(const CapturedImage& c, double scale) {
    PanelImage out(c.width(), c.height());
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t i = 0; i < out[ch].size(); ++i)
            out[ch].data()[i] = static_cast<std::uint8_t>(
                std::lround(std::clamp(c.image[ch].data()[i] * scale, 0.0, 1.0) * 255.0));
    return out;
}

}  // namespace

std::string NoiseLevel::label() const {
    switch (kind) {
        case Kind::None: return "clean";
        case Kind::Scale: return "scale_" + sanitize(fixed(value, 0));
        case Kind::Snr: {
            std::string s = fixed(value, 1);
            if (s.size() > 2 && s.substr(s.size() - 2) == ".0") s.resize(s.size() - 2);
            return "snr_" + s;
        }
    }
    return "clean";
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw Error(ErrorKind::Config, "trials must be at least 1");
    if (!(perturbation >= 0.0) || perturbation >= 0.5)
        throw Error(ErrorKind::Config, "perturbation must lie in [0, 0.5)");
    if (!(jitter_mm >= 0.0)) throw Error(ErrorKind::Config, "jitter_mm must be nonnegative");
    if (!(rotation_deg >= 0.0) || rotation_deg >= 45.0)
        throw Error(ErrorKind::Config, "rotation_deg must lie in [0, 45)");
    if (!(d1 > 0.0) || !(d2 > 0.0) || d1 == d2)
        throw Error(ErrorKind::Config, "d1 and d2 must be positive and distinct");
    if (std::min(d1, d2) - jitter_mm <= 2.0 * display.t)
        throw Error(ErrorKind::Config, "camera jitter reaches the display");
    if ((capture_w == 0) != (capture_h == 0) || capture_w < 0 || capture_h < 0)
        throw Error(ErrorKind::Config, "capture size must be both zero (automatic) or both positive");
    for (const auto& l : noise)
        if (l.kind == NoiseLevel::Kind::Scale && !(l.value > 0.0))
            throw Error(ErrorKind::Config, "noise scales must be positive");
    try {
        (void)display.designed();
        sim.validate(display.designed());
    } catch (const Error& e) {
        throw Error(ErrorKind::Config, e.what());
    }
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
    ExperimentConfig cfg;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& key = it.key();
            const json& v = it.value();
            if (key == "preset") {
                const std::string name = v.get<std::string>();
                if (name != "custom") cfg.display = find_preset(name);
            } else if (key == "custom") {
                DisplayPreset d;
                d.name = v.value("name", std::string("custom"));
                d.diagonal_in = v.at("diagonal_in").get<double>();
                d.pixels_w = v.at("pixels_w").get<int>();
                d.pixels_h = v.at("pixels_h").get<int>();
                d.p = v.at("p").get<double>();
                d.alpha_deg = v.at("alpha_deg").get<double>();
                d.t = v.at("t").get<double>();
                d.sigma = v.value("sigma", 0.0);
                d.optics = v.value("optics", std::string("barrier")) == "lenticular"
                               ? OpticsKind::Lenticular
                               : OpticsKind::Barrier;
                cfg.display = d;
            } else if (key == "trials") {
                cfg.trials = v.get<int>();
            } else if (key == "perturbation") {
                cfg.perturbation = v.get<double>();
            } else if (key == "jitter_mm") {
                cfg.jitter_mm = v.get<double>();
            } else if (key == "rotation_deg") {
                cfg.rotation_deg = v.get<double>();
            } else if (key == "d1") {
                cfg.d1 = v.get<double>();
            } else if (key == "d2") {
                cfg.d2 = v.get<double>();
            } else if (key == "noise_scale" || key == "snr_db") {
                for (const auto& x : v) cfg.noise.push_back(parse_level(x, key == "snr_db"));
            } else if (key == "seed") {
                cfg.seed = v.get<std::uint64_t>();
            } else if (key == "out_dir") {
                cfg.out_dir = v.get<std::string>();
            } else if (key == "capture") {
                if (v.is_string() && v.get<std::string>() == "auto") {
                    cfg.capture_w = cfg.capture_h = 0;
                } else {
                    cfg.capture_w = v.at(0).get<int>();
                    cfg.capture_h = v.at(1).get<int>();
                }
            } else if (key == "record_timing") {
                cfg.record_timing = v.get<bool>();
            } else if (key == "sim") {
                cfg.sim.psf_sigma = v.value("psf_sigma", cfg.sim.psf_sigma);
                cfg.sim.supersample = v.value("supersample", cfg.sim.supersample);
                cfg.sim.slit_width = v.value("slit_width", cfg.sim.slit_width);
                if (v.value("aperture", std::string("box")) == "raised_cosine")
                    cfg.sim.aperture = Aperture::RaisedCosine;
            } else {
                throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Config, "cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str());
}

DisplayParams perturb_display(const DisplayParams& preset, double fraction, std::mt19937_64& rng) {
    if (!(fraction >= 0.0)) throw Error(ErrorKind::InvalidArgument, "perturbation must be nonnegative");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DisplayParams out = preset;
    out.p = preset.p * (1.0 + fraction * u(rng));
    out.alpha = preset.alpha * (1.0 + fraction * u(rng));
    out.t = preset.t * (1.0 + fraction * u(rng));
    out.sigma = preset.sigma + fraction * preset.p * u(rng);
    const double period = out.slit_period();
    if (!(out.sigma > -0.5 * period && out.sigma <= 0.5 * period)) out.sigma = wrap_centered(out.sigma, period);
    out.validate();
    return out;
}

Intrinsics capture_intrinsics(const PanelGeometry& panel, const ExperimentConfig& cfg) {
    const double near = std::min(cfg.d1, cfg.d2) - cfg.jitter_mm;
    const double far = std::max(cfg.d1, cfg.d2) + cfg.jitter_mm;
    if (!(near > 0.0)) throw Error(ErrorKind::Config, "camera jitter exceeds the nearer distance");
    const double tilt = std::tan(deg_to_rad(cfg.rotation_deg));
    const auto fit = [&](int w, int h) {
        Intrinsics k;
        k.width = w;
        k.height = h;
        const double fx = 0.5 * w / ((0.5 * panel.width_mm() + cfg.jitter_mm) / near + tilt);
        const double fy = 0.5 * h / ((0.5 * panel.height_mm() + cfg.jitter_mm) / near + tilt);
        k.fx = k.fy = 0.95 * std::min(fx, fy);
        k.cx = 0.5 * (w - 1);
        k.cy = 0.5 * (h - 1);
        return k;
    };
    if (cfg.capture_w > 0) return fit(cfg.capture_w, cfg.capture_h);
    const double beta = cfg.calibration.first.beta;
    Intrinsics k;
    for (auto [w, h] : {std::pair{1920, 1080}, std::pair{3840, 2160}}) {
        k = fit(w, h);
        // Stripe fundamental in cycles per captured pixel at the farthest pose.
        const double cycles = far / (beta * k.fx * panel.q);
        if (cycles <= 0.6) break;
    }
    return k;
}

CameraPose jittered_pose(double d, const ExperimentConfig& cfg, const Intrinsics& k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CameraPose pose;
    pose.intrinsics = k;
    const double du = cfg.jitter_mm * u(rng);
    const double dv = cfg.jitter_mm * u(rng);
    const double dd = cfg.jitter_mm * u(rng);
    pose.position = Eigen::Vector3d(du, dv, d + dd);
    const double angle = deg_to_rad(cfg.rotation_deg) * u(rng);
    pose.rotation = Eigen::AngleAxisd(angle, random_axis(rng)).toRotationMatrix();
    return pose;
}

int ErrorReport::successes() const {
    return static_cast<int>(std::count_if(trials.begin(), trials.end(), [](const auto& t) { return t.ok; }));
}

int ErrorReport::failures() const { return static_cast<int>(trials.size()) - successes(); }

void ErrorReport::summarize() {
    std::vector<double> a, b, c, d, e, s;
    for (const auto& t : trials) {
        if (!t.ok) continue;
        a.push_back(t.dp);
        b.push_back(t.dalpha_deg);
        c.push_back(t.dt);
        d.push_back(t.dsigma);
        e.push_back(t.elapsed_ms);
        if (std::isfinite(t.snr_db)) s.push_back(t.snr_db);
    }
    dp = stats(a);
    dalpha_deg = stats(b);
    dt = stats(c);
    dsigma = stats(d);
    elapsed_ms = stats(e);
    mean_snr_db = s.empty() ? std::numeric_limits<double>::infinity() : stats(s).mean;
}

std::string ErrorReport::csv(bool with_timing) const {
    std::string out = "trial,seed,dp,dalpha_deg,dt,dsigma,elapsed_ms,status\n";
    for (const auto& t : trials) {
        out += std::to_string(t.trial) + ',' + std::to_string(t.seed) + ',';
        if (t.ok)
            out += sci(t.dp) + ',' + sci(t.dalpha_deg) + ',' + sci(t.dt) + ',' + sci(t.dsigma) + ',';
        else
            out += ",,,,";
        if (with_timing) out += fixed(t.elapsed_ms, 1);
        out += ',' + t.status + '\n';
    }
    return out;
}

std::string format_table(const std::vector<ErrorReport>& reports, bool with_timing) {
    std::ostringstream os;
    char line[256];
    const auto ms = [&](double v) {
        if (!with_timing) return std::string(11, ' ');
        std::snprintf(line, sizeof line, " %10.1f", v);
        return std::string(line);
    };
    std::snprintf(line, sizeof line, "%-10s %-8s %-5s %12s %12s %12s %12s", "Display", "Level", "Stat", "|dp| mm",
                  "|da| deg", "|dt| mm", "|ds| mm");
    os << line << (with_timing ? "         ms" : "           ") << "   ok/all\n";
    for (const auto& r : reports) {
        const std::string ok = std::to_string(r.successes()) + "/" + std::to_string(r.trials.size());
        std::snprintf(line, sizeof line, "%-10s %-8s %-5s %12.4e %12.4e %12.4e %12.4e", r.display.c_str(),
                      r.level.c_str(), "mean", r.dp.mean, r.dalpha_deg.mean, r.dt.mean, r.dsigma.mean);
        std::string row = line;
        row += ms(r.elapsed_ms.mean);
        std::snprintf(line, sizeof line, " %8s\n", ok.c_str());
        os << row << line;
        std::snprintf(line, sizeof line, "%-10s %-8s %-5s %12.4e %12.4e %12.4e %12.4e", "", "", "std",
                      r.dp.stddev, r.dalpha_deg.stddev, r.dt.stddev, r.dsigma.stddev);
        row = line;
        row += ms(r.elapsed_ms.stddev);
        os << row << '\n';
    }
    return os.str();
}

ErrorReport run_table2(const ExperimentConfig& cfg) {
    ErrorReport report = run_levels(cfg, {NoiseLevel::none()}).front();
    if (!cfg.out_dir.empty()) {
        const std::string stem = "table2_" + cfg.display.name;
        write_text(cfg.out_dir / (stem + ".csv"), report.csv(cfg.record_timing));
        write_text(cfg.out_dir / (stem + ".txt"), format_table({report}, cfg.record_timing));
    }
    return report;
}

std::vector<ErrorReport> run_noise_sweep(const ExperimentConfig& cfg) {
    if (cfg.noise.empty()) throw Error(ErrorKind::Config, "noise sweep needs at least one level");
    std::vector<ErrorReport> reports = run_levels(cfg, cfg.noise);
    if (!cfg.out_dir.empty()) {
        std::string summary =
            "level,measured_snr_db,successes,failures,mean_dp,std_dp,mean_dalpha_deg,std_dalpha_deg,"
            "mean_dt,std_dt,mean_dsigma,std_dsigma\n";
        for (const auto& r : reports) {
            write_text(cfg.out_dir / ("sweep_" + cfg.display.name + "_" + r.level + ".csv"),
                       r.csv(cfg.record_timing));
            summary += r.level + ',' + (std::isfinite(r.mean_snr_db) ? fixed(r.mean_snr_db, 3) : "inf") + ',' +
                       std::to_string(r.successes()) + ',' + std::to_string(r.failures()) + ',' +
                       sci(r.dp.mean) + ',' + sci(r.dp.stddev) + ',' + sci(r.dalpha_deg.mean) + ',' +
                       sci(r.dalpha_deg.stddev) + ',' + sci(r.dt.mean) + ',' + sci(r.dt.stddev) + ',' +
                       sci(r.dsigma.mean) + ',' + sci(r.dsigma.stddev) + '\n';
        }
        write_text(cfg.out_dir / ("sweep_" + cfg.display.name + "_summary.csv"), summary);
        write_text(cfg.out_dir / ("sweep_" + cfg.display.name + ".txt"), format_table(reports, cfg.record_timing));
    }
    return reports;
}

CameraPose frontal_pose(const PanelGeometry& panel, double u, double v, double d, int width, int height,
                        double fill) {
    CameraPose pose;
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = fill * d * std::min(width / panel.width_mm(), height / panel.height_mm());
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    pose.intrinsics = k;
    pose.position = Eigen::Vector3d(u, v, d);
    return pose;
}

DemoResult demo_distortion(const DisplayParams& actual, const DerivedParams& render, const DemoOptions& opts) {
    if (opts.views < 1) throw Error(ErrorKind::InvalidArgument, "demo needs at least one view");
    const PanelGeometry& g = actual.panel;
    DemoResult res;
    res.actual = derive(actual, opts.d);
    res.gamma = view_of_position(opts.u, opts.v, opts.d, actual);

    std::vector<PanelImage> views;
    views.reserve(static_cast<std::size_t>(opts.views));
    for (int k = 0; k < opts.views; ++k) {
        std::array<std::uint8_t, 3> color{};
        if (opts.lit_view >= 0)
            color = k == opts.lit_view ? std::array<std::uint8_t, 3>{255, 255, 255}
                                       : std::array<std::uint8_t, 3>{0, 0, 0};
        else
            color = hue_color(k, opts.views);
        PanelImage img(g.panel_w, g.panel_h);
        for (int c = 0; c < 3; ++c) std::fill(img[c].data().begin(), img[c].data().end(), color[static_cast<std::size_t>(c)]);
        views.push_back(std::move(img));
    }
    const PanelImage correct_panel = interleave_views(views, res.actual);
    const PanelImage wrong_panel = interleave_views(views, render);
    views.clear();

    const CameraPose pose = frontal_pose(g, opts.u, opts.v, opts.d, opts.capture_w, opts.capture_h, opts.fill);
    SimOptions so = opts.sim;
    so.noise_scale = 0.0;
    res.correct = simulate_capture(correct_panel, actual, pose, so);
    res.wrong = simulate_capture(wrong_panel, actual, pose, so);

    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        float peak = 0.0f;
        for (const auto* c : {&res.correct, &res.wrong})
            for (int ch = 0; ch < 3; ++ch)
                for (float v : c->image[ch].data()) peak = std::max(peak, v);
        const double scale = peak > 0.0f ? 1.0 / peak : 1.0;
        const PanelImage a = to_rgb8(res.correct, scale);
        const PanelImage b = to_rgb8(res.wrong, scale);
        const int gap = 8;
        PanelImage side(a.width() * 2 + gap, a.height());
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < a.height(); ++y)
                for (int x = 0; x < a.width(); ++x) {
                    side[ch](x, y) = a[ch](x, y);
                    side[ch](x + a.width() + gap, y) = b[ch](x, y);
                }
        const auto p_correct = opts.out_dir / "correct.png";
        const auto p_wrong = opts.out_dir / "wrong.png";
        const auto p_side = opts.out_dir / "side_by_side.png";
        const auto p_spec = opts.out_dir / "wrong_spectrum.png";
        write_png(p_correct, a);
        write_png(p_wrong, b);
        write_png(p_side, side);

        Plane<float> lum(res.wrong.width(), res.wrong.height());
        for (std::size_t i = 0; i < lum.size(); ++i)
            lum.data()[i] = res.wrong.image[0].data()[i] + res.wrong.image[1].data()[i] + res.wrong.image[2].data()[i];
        const auto [gw, gh] = analysis_grid(res.wrong.corners, 2048, 1.0);
        const Plane<float> rect = rectify(lum, res.wrong.corners, gw, gh);
        Plane<double> img(gw, gh);
        for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = rect.data()[i];
        write_spectrum_png(p_spec, spectrum(apply_gaussian_window(img)));
        res.files = {p_correct, p_wrong, p_side, p_spec};
    }
    return res;
}

}  // namespace dispcal
