#pragma once

#include "dispcal/capture_sim.hpp"
#include "dispcal/estimation.hpp"
#include "dispcal/presets.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dispcal {

/// One point of a noise sweep. A level is either noiseless, a fixed Poisson
/// scale (photons at full intensity) or a target SNR in dB, in which case the
/// scale is solved per capture.
struct NoiseLevel {
    enum class Kind { None, Scale, Snr };
    Kind kind = Kind::None;
    double value = 0.0;

    static NoiseLevel none() { return {}; }
    static NoiseLevel scale(double photons) { return {Kind::Scale, photons}; }
    static NoiseLevel snr_db(double db) { return {Kind::Snr, db}; }
    /// "clean", "scale_1000", "snr_6" ...
    std::string label() const;
};

struct ExperimentConfig {
    DisplayPreset display = builtin_presets().front();
    int trials = 10;
    double perturbation = 0.01;
    double jitter_mm = 50.0;
    double rotation_deg = 1.0;
    double d1 = 700.0;
    double d2 = 1000.0;
    std::vector<NoiseLevel> noise;   ///< sweep levels; run_table2 uses none
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;   ///< empty: nothing is written
    int capture_w = 0;               ///< 0 with capture_h = 0 selects automatically
    int capture_h = 0;
    bool record_timing = false;      ///< write elapsed_ms to CSV (breaks byte determinism)
    SimOptions sim;
    CalibrationConfig calibration;   ///< panel geometry is filled in per trial

    void validate() const;

    /// Keys mirror the field names; see README for the full list.
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);
};

/// Uniform relative perturbation of p, alpha and t within +-fraction; sigma
/// moves by +-fraction * p of the input, then is renormalized.
DisplayParams perturb_display(const DisplayParams& preset, double fraction, std::mt19937_64& rng);

/// Capture size and focal length for a display. The focal length keeps the
/// whole panel in frame for every pose the jitter allows at the nearer
/// distance. With capture_w = capture_h = 0 the smaller of 1920x1080 and
/// 3840x2160 is used at which the first stripe pattern stays well below the
/// sensor Nyquist limit at the farther distance.
Intrinsics capture_intrinsics(const PanelGeometry& panel, const ExperimentConfig& cfg);

/// Camera near (0, 0, d): each coordinate moved uniformly within +-jitter,
/// rotated by a uniform angle below rotation_deg about a uniform random axis.
CameraPose jittered_pose(double d, const ExperimentConfig& cfg, const Intrinsics& k,
                         std::mt19937_64& rng);

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string status;  ///< "ok" or "fail:<stage>:<kind>"
    double dp = 0, dalpha_deg = 0, dt = 0, dsigma = 0;  ///< absolute errors
    double elapsed_ms = 0;
    double snr_db = std::numeric_limits<double>::infinity();  ///< mean over both captures
    DisplayParams truth;
    std::optional<CalibrationResult> result;
};

struct ErrorStats {
    double mean = 0.0;
    double stddev = 0.0;  ///< population standard deviation
};

struct ErrorReport {
    std::string display;
    std::string level = "clean";
    std::vector<TrialRecord> trials;
    ErrorStats dp, dalpha_deg, dt, dsigma, elapsed_ms;
    double mean_snr_db = std::numeric_limits<double>::infinity();

    int successes() const;
    int failures() const;
    /// Recomputes the statistics over successful trials.
    void summarize();

    /// trial,seed,dp,dalpha_deg,dt,dsigma,elapsed_ms,status
    std::string csv(bool with_timing) const;
};

/// Mean and standard deviation rows in the layout of the benchmark table.
/// The wall-clock column is blank unless `with_timing` is set.
std::string format_table(const std::vector<ErrorReport>& reports, bool with_timing = false);

/// Runs all trials without noise. Writes table2_<display>.csv/.txt under out_dir.
ErrorReport run_table2(const ExperimentConfig& cfg);

/// One report per noise level, in the order given. Clean captures are shared
/// across levels, so the noiseless level matches run_table2 exactly.
std::vector<ErrorReport> run_noise_sweep(const ExperimentConfig& cfg);

struct DemoOptions {
    int views = 8;             ///< view images; each is a constant color
    int lit_view = -1;         ///< >= 0: only this view is white, the rest black
    double d = 700.0;          ///< frontal camera distance, mm
    double u = 0.0, v = 0.0;   ///< lateral camera offset, mm
    int capture_w = 1920, capture_h = 1080;
    double fill = 0.9;         ///< fraction of the frame the panel spans
    SimOptions sim;
    std::filesystem::path out_dir;  ///< empty: nothing is written
};

struct DemoResult {
    CapturedImage correct;  ///< panel rendered with the actual parameters
    CapturedImage wrong;    ///< panel rendered with the supplied parameters
    DerivedParams actual;
    View gamma;
    std::vector<std::filesystem::path> files;
};

/// Renders the multi-view pattern twice (correct and with `render`), captures
/// both from the same frontal pose and writes correct.png, wrong.png,
/// side_by_side.png and wrong_spectrum.png.
DemoResult demo_distortion(const DisplayParams& actual, const DerivedParams& render,
                           const DemoOptions& opts);

/// Frontal pose whose field of view holds the panel at the given fill.
CameraPose frontal_pose(const PanelGeometry& panel, double u, double v, double d, int width,
                        int height, double fill);

}  // namespace dispcal
