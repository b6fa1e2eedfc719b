// Command-line driver: simulate captures, calibrate from captures, and run
// the synthetic benchmark, the noise sweep and the misalignment demo.

#include "dispcal/error.hpp"
#include "dispcal/harness.hpp"
#include "dispcal/image_io.hpp"
#include "dispcal/panel_pattern.hpp"

#include <CLI11.hpp>
#include <Eigen/Geometry>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace dispcal;
using nlohmann::json;

struct ExperimentFlags {
    std::string config;
    std::string preset;
    int trials = 0;
    double perturbation = -1, jitter_mm = -1, rotation_deg = -1, d1 = 0, d2 = 0;
    std::vector<double> noise_scale, snr_db;
    std::uint64_t seed = 0;
    std::string out_dir = "dispcal_out";
    std::string capture;
    bool record_timing = false;
    double psf_sigma = -1, slit_width = 0;
    int supersample = 0;
    CLI::App* app = nullptr;

    void attach(CLI::App* sub, bool noise) {
        app = sub;
        sub->add_option("--config", config, "JSON experiment config; flags override its values");
        sub->add_option("--preset", preset, "FHD55B, UHD32B or WQXGA10L");
        sub->add_option("--trials", trials, "trial count");
        sub->add_option("--perturbation", perturbation, "relative perturbation bound");
        sub->add_option("--jitter-mm", jitter_mm, "camera position jitter, mm");
        sub->add_option("--rotation-deg", rotation_deg, "camera rotation bound, degrees");
        sub->add_option("--d1", d1, "first distance, mm");
        sub->add_option("--d2", d2, "second distance, mm");
        if (noise) {
            sub->add_option("--noise-scale", noise_scale, "Poisson scales (photons at full intensity)");
            sub->add_option("--snr-db", snr_db, "target SNR levels in dB; inf for noiseless");
        }
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out-dir", out_dir, "output directory");
        sub->add_option("--capture", capture, "capture size WxH or auto");
        sub->add_flag("--record-timing", record_timing, "write elapsed_ms to CSV");
        sub->add_option("--psf-sigma", psf_sigma, "optical blur, captured pixels");
        sub->add_option("--supersample", supersample, "simulated rows per pixel");
        sub->add_option("--slit-width", slit_width, "slit width, mm");
    }

    bool given(const char* name) const {
        const CLI::Option* opt = app->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    }

    ExperimentConfig build() const {
        ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(config);
        if (given("--preset")) cfg.display = find_preset(preset);
        if (given("--trials")) cfg.trials = trials;
        if (given("--perturbation")) cfg.perturbation = perturbation;
        if (given("--jitter-mm")) cfg.jitter_mm = jitter_mm;
        if (given("--rotation-deg")) cfg.rotation_deg = rotation_deg;
        if (given("--d1")) cfg.d1 = d1;
        if (given("--d2")) cfg.d2 = d2;
        if (given("--noise-scale") || given("--snr-db")) cfg.noise.clear();
        for (double s : noise_scale) cfg.noise.push_back(s > 0 ? NoiseLevel::scale(s) : NoiseLevel::none());
        for (double s : snr_db) cfg.noise.push_back(std::isfinite(s) ? NoiseLevel::snr_db(s) : NoiseLevel::none());
        if (given("--seed")) cfg.seed = seed;
        if (given("--out-dir") || cfg.out_dir.empty()) cfg.out_dir = out_dir;
        if (given("--capture")) parse_capture(capture, cfg.capture_w, cfg.capture_h);
        if (record_timing) cfg.record_timing = true;
        if (given("--psf-sigma")) cfg.sim.psf_sigma = psf_sigma;
        if (given("--supersample")) cfg.sim.supersample = supersample;
        if (given("--slit-width")) cfg.sim.slit_width = slit_width;
        cfg.validate();
        return cfg;
    }

    static void parse_capture(const std::string& s, int& w, int& h) {
        if (s == "auto") {
            w = h = 0;
            return;
        }
        char x = 0;
        std::istringstream is(s);
        if (!(is >> w >> x >> h) || (x != 'x' && x != 'X') || w <= 0 || h <= 0)
            throw Error(ErrorKind::Config, "capture size must look like 1920x1080 or auto");
    }
};

std::string sidecar(const std::filesystem::path& image, const std::string& suffix) {
    std::filesystem::path p = image;
    p.replace_extension();
    return p.string() + suffix;
}

void write_camera(const std::filesystem::path& path, const CameraPose& pose) {
    const Intrinsics& k = pose.intrinsics;
    json j = {{"width", k.width}, {"height", k.height}, {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
              {"u", pose.u()}, {"v", pose.v()}, {"d", pose.d()}};
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
    os << j.dump(2) << '\n';
}

Intrinsics read_camera(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Io, "cannot read camera file " + path.string());
    try {
        const json j = json::parse(is);
        Intrinsics k;
        k.width = j.at("width").get<int>();
        k.height = j.at("height").get<int>();
        k.fx = j.at("fx").get<double>();
        k.fy = j.at("fy").get<double>();
        k.cx = j.at("cx").get<double>();
        k.cy = j.at("cy").get<double>();
        k.validate();
        return k;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, "bad camera file " + path.string() + ": " + e.what());
    }
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Config:
        case ErrorKind::InvalidArgument:
        case ErrorKind::Io:
            return 1;
        default:
            return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Display parameter calibration from stripe-pattern captures"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Render the calibration pattern and simulate one capture");
    std::string sim_preset = "FHD55B", sim_out = "dispcal_out", sim_name = "capture", sim_capture = "1920x1080";
    double sim_p = 0, sim_alpha = 0, sim_t = -1, sim_sigma = 0, sim_u = 0, sim_v = 0, sim_d = 700, sim_rot = 0;
    double sim_noise = 0, sim_snr = 0, sim_psf = 0.8, sim_fill = 0.8;
    int sim_ss = 2;
    std::uint64_t sim_seed = 1;
    sim->add_option("--preset", sim_preset, "display preset");
    sim->add_option("--p", sim_p, "pitch override, mm");
    sim->add_option("--alpha-deg", sim_alpha, "slant override, degrees");
    sim->add_option("--t", sim_t, "gap override, mm");
    sim->add_option("--sigma", sim_sigma, "offset override, mm");
    sim->add_option("--u", sim_u, "camera x, mm");
    sim->add_option("--v", sim_v, "camera y, mm");
    sim->add_option("--d", sim_d, "camera distance, mm");
    sim->add_option("--rotation-deg", sim_rot, "camera rotation about the vertical axis, degrees");
    sim->add_option("--capture", sim_capture, "capture size WxH");
    sim->add_option("--fill", sim_fill, "fraction of the frame spanned by the panel");
    sim->add_option("--psf-sigma", sim_psf, "optical blur, captured pixels");
    sim->add_option("--supersample", sim_ss, "simulated rows per pixel");
    sim->add_option("--noise-scale", sim_noise, "Poisson scale; 0 disables noise");
    sim->add_option("--snr-db", sim_snr, "target SNR in dB (overrides --noise-scale)");
    sim->add_option("--seed", sim_seed, "noise seed");
    sim->add_option("--name", sim_name, "output file stem");
    sim->add_option("--out-dir", sim_out, "output directory");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Recover display parameters from two captures");
    std::string cal_preset = "FHD55B", cal_out = "dispcal_out";
    std::string img1, img2, corners1, corners2, camera1, camera2;
    bool cal_flip = false;
    cal->add_option("--image1", img1, "first capture (PNG)")->required();
    cal->add_option("--image2", img2, "second capture (PNG)")->required();
    cal->add_option("--corners1", corners1, "corner sidecar of the first capture");
    cal->add_option("--corners2", corners2, "corner sidecar of the second capture");
    cal->add_option("--camera1", camera1, "camera JSON of the first capture");
    cal->add_option("--camera2", camera2, "camera JSON of the second capture");
    cal->add_option("--preset", cal_preset, "panel geometry preset");
    cal->add_flag("--flip", cal_flip, "mirror captures horizontally before analysis");
    cal->add_option("--out-dir", cal_out, "output directory");

    // table2 and sweep
    auto* t2 = app.add_subcommand("table2", "Seeded noiseless trials with error statistics");
    ExperimentFlags t2_flags;
    t2_flags.attach(t2, false);
    auto* sw = app.add_subcommand("sweep", "Repeat the trials at several noise levels");
    ExperimentFlags sw_flags;
    sw_flags.attach(sw, true);

    // demo
    auto* demo = app.add_subcommand("demo", "Render with wrong parameters and capture the distortion");
    std::string demo_preset = "FHD55B", demo_out = "dispcal_out/demo", demo_capture = "1920x1080";
    double demo_h = 0, demo_alpha = 0, demo_rho = 0, demo_d = 700, demo_u = 0, demo_v = 0;
    int demo_views = 8, demo_lit = -1;
    demo->add_option("--preset", demo_preset, "display preset");
    demo->add_option("--render-h", demo_h, "rendered lattice pitch, subpixels (default: actual)");
    demo->add_option("--render-alpha-deg", demo_alpha, "rendered slant, degrees (default: actual)");
    demo->add_option("--render-rho", demo_rho, "rendered offset, subpixels (default: actual)");
    demo->add_option("--views", demo_views, "number of views");
    demo->add_option("--lit-view", demo_lit, "show only this view in white");
    demo->add_option("--d", demo_d, "camera distance, mm");
    demo->add_option("--u", demo_u, "camera x, mm");
    demo->add_option("--v", demo_v, "camera y, mm");
    demo->add_option("--capture", demo_capture, "capture size WxH");
    demo->add_option("--out-dir", demo_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            const DisplayPreset& preset = find_preset(sim_preset);
            DisplayParams params = preset.designed();
            params = DisplayParams::from_degrees(sim->count("--p") ? sim_p : params.p,
                                                 sim->count("--alpha-deg") ? sim_alpha : params.alpha_deg(),
                                                 sim->count("--t") ? sim_t : params.t,
                                                 sim->count("--sigma") ? sim_sigma : params.sigma, params.panel);
            int w = 0, h = 0;
            ExperimentFlags::parse_capture(sim_capture, w, h);
            if (w == 0) throw Error(ErrorKind::Config, "simulate needs an explicit capture size");
            CameraPose pose = frontal_pose(params.panel, sim_u, sim_v, sim_d, w, h, sim_fill);
            pose.rotation = Eigen::AngleAxisd(deg_to_rad(sim_rot), Eigen::Vector3d::UnitY()).toRotationMatrix();
            SimOptions so;
            so.psf_sigma = sim_psf;
            so.supersample = sim_ss;
            CapturedImage cap = simulate_capture(make_calibration_multiplex(params.panel.panel_w, params.panel.panel_h),
                                                 params, pose, so);
            double measured = std::numeric_limits<double>::infinity();
            if (sim->count("--snr-db") || sim_noise > 0) {
                const double scale = sim->count("--snr-db") ? noise_scale_for_snr(cap, sim_snr) : sim_noise;
                CapturedImage noisy = add_poisson_noise(cap, scale, sim_seed);
                measured = snr(cap, noisy);
                cap = std::move(noisy);
            }
            const std::filesystem::path dir(sim_out);
            std::filesystem::create_directories(dir);
            const auto png = dir / (sim_name + ".png");
            write_png16(png, cap.image);
            write_corners(sidecar(png, ".corners.txt"), cap.corners);
            write_camera(sidecar(png, ".camera.json"), cap.pose);
            std::printf("wrote %s\ntruth p=%.9g alpha_deg=%.9g t=%.9g sigma=%.9g\nsnr_db=%g\n", png.c_str(), params.p,
                        params.alpha_deg(), params.t, params.sigma, measured);
            return 0;
        }
        if (*cal) {
            CalibrationConfig cfg;
            cfg.panel = find_preset(cal_preset).geometry();
            cfg.flip = cal_flip;
            const RgbImage<float> a = read_png_float(img1);
            const RgbImage<float> b = read_png_float(img2);
            Observation o1{&a, read_corners(corners1.empty() ? sidecar(img1, ".corners.txt") : corners1),
                           read_camera(camera1.empty() ? sidecar(img1, ".camera.json") : camera1)};
            Observation o2{&b, read_corners(corners2.empty() ? sidecar(img2, ".corners.txt") : corners2),
                           read_camera(camera2.empty() ? sidecar(img2, ".camera.json") : camera2)};
            const CalibrationResult r = calibrate(o1, o2, cfg);
            const std::filesystem::path dir(cal_out);
            std::filesystem::create_directories(dir);
            std::ofstream(dir / "calibration.txt") << r.report();
            std::ofstream(dir / "calibration.csv") << CalibrationResult::csv_header() << '\n' << r.csv_row() << '\n';
            std::cout << r.report();
            return 0;
        }
        if (*t2) {
            const ErrorReport rep = run_table2(t2_flags.build());
            std::cout << format_table({rep}, true);
            return rep.failures() > 0 ? 2 : 0;
        }
        if (*sw) {
            const auto reps = run_noise_sweep(sw_flags.build());
            std::cout << format_table(reps, true);
            for (const auto& r : reps)
                if (r.failures() > 0) return 2;
            return 0;
        }
        if (*demo) {
            const DisplayParams actual = find_preset(demo_preset).designed();
            const DerivedParams truth = derive(actual, demo_d);
            const DerivedParams render = DerivedParams::rendering(
                demo->count("--render-h") ? demo_h : truth.h,
                demo->count("--render-alpha-deg") ? deg_to_rad(demo_alpha) : truth.alpha,
                demo->count("--render-rho") ? demo_rho : truth.rho, truth.row_scale);
            DemoOptions opts;
            opts.views = demo_views;
            opts.lit_view = demo_lit;
            opts.d = demo_d;
            opts.u = demo_u;
            opts.v = demo_v;
            ExperimentFlags::parse_capture(demo_capture, opts.capture_w, opts.capture_h);
            if (opts.capture_w == 0) throw Error(ErrorKind::Config, "demo needs an explicit capture size");
            opts.out_dir = demo_out;
            const DemoResult res = demo_distortion(actual, render, opts);
            for (const auto& f : res.files) std::cout << "wrote " << f.string() << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
