#pragma once

#include "dispcal/camera_pose.hpp"
#include "dispcal/capture_sim.hpp"
#include "dispcal/display_model.hpp"
#include "dispcal/panel_pattern.hpp"
#include "dispcal/spectral.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dispcal {

struct Candidate {
    double h = 0.0;      ///< subpixels
    double alpha = 0.0;  ///< radians
    int m = 0, n = 0;
};

struct CandidateBounds {
    double h_min = 3.0, h_max = 200.0;
    double alpha_max = deg_to_rad(45.0);
    int max_m = 8;  ///< m in [-max_m, max_m]
    int max_n = 3;  ///< n in [1, max_n]
};

/// (h, alpha) explanations of one peak, one per admissible (m, n).
/// Peaks in the lower half-plane are folded through the origin first.
/// Throws NoCandidate when nothing survives the bounds.
std::vector<Candidate> candidate_set(const PeakMeasurement& peak, double beta,
                                     const CandidateBounds& bounds = {});

struct Intersection {
    double h = 0.0, alpha = 0.0;
    double distance = 0.0;  ///< normalized squared distance of the chosen pair
    Candidate first, second;
};

/// Closest pair across the two sets under ((dh / mean h)^2 + (dalpha / alpha_scale)^2),
/// returned as its midpoint. Ties prefer smaller n, then smaller |m|.
/// Throws AmbiguousCalibration when the best distance exceeds `threshold`.
Intersection intersect_candidates(std::span<const Candidate> c1, std::span<const Candidate> c2,
                                  double threshold = 1e-3,
                                  double alpha_scale = deg_to_rad(1.0));

struct PitchGap {
    double p = 0.0, t = 0.0;
};

/// p and t from the horizontal pitch at two distances. h1, h2 in subpixels,
/// converted with q (mm per subpixel). Throws DegenerateObservation.
PitchGap solve_pitch_gap(double h1, double d1, double h2, double d2, double alpha, double q = 1.0);

/// One stripe pattern's spectrum entering the offset search.
struct OffsetChannel {
    const Spectrum* spectrum = nullptr;
    double beta = 15.0;
    double epsilon = 0.0;  ///< stripe offset in the centered frame, subpixels
};

struct OffsetGeometry {
    double h = 0.0;      ///< subpixels, at distance d
    double alpha = 0.0;  ///< radians
    double gamma = 0.0;  ///< view of the camera position
    double d = 0.0, t = 0.0;
    double q = 1.0;      ///< mm per subpixel
    double period = 0.0; ///< horizontal slit period in mm used to normalize sigma; <= 0 skips
};

struct OffsetOptions {
    int max_m = 8;
    int max_n = 3;
    int coarse_samples = 1024;
    double flatness_threshold = 1e-6;
};

struct OffsetEstimate {
    double tau = 0.0;    ///< vertical lattice shift of the first channel, subpixels
    double rho = 0.0;    ///< [0, h)
    double sigma = 0.0;  ///< mm
    double contrast = 0.0;  ///< (max - min) / max |objective|
};

/// Shift search over the lattice nodes of every channel; all channels share rho.
OffsetEstimate estimate_offset(std::span<const OffsetChannel> channels, const OffsetGeometry& geo,
                               const OffsetOptions& opts = {});
OffsetEstimate estimate_offset(const Spectrum& spec, double beta, double epsilon,
                               const OffsetGeometry& geo, const OffsetOptions& opts = {});

/// Real correlation objective at psi = rho / h + gamma (period 1).
double offset_objective(std::span<const OffsetChannel> channels, const OffsetGeometry& geo,
                        const OffsetOptions& opts, double psi);

struct CalibrationConfig {
    PanelGeometry panel;
    PatternSpec first = kPatternRed;
    PatternSpec second = kPatternGreen;
    CandidateBounds bounds;
    OffsetOptions offset;
    double match_threshold = 1e-3;
    double dc_exclusion = 3.0;      ///< bins
    double row_exclusion = 2.0;     ///< peaks with |ky| <= this are stripe harmonics
    int peak_retries = 3;
    int analysis_max = 2048;        ///< cap on the long side of the analysis grid
    double grid_oversample = 1.5;   ///< analysis samples per capture pixel along the panel edges
    double window_divisor = 8.0;    ///< window sigma = extent / window_divisor
    bool flip = false;
};

/// One capture handed to calibrate: image, corner positions and intrinsics.
struct Observation {
    const RgbImage<float>* image = nullptr;
    Corners corners{};
    Intrinsics intrinsics;

    static Observation from_capture(const CapturedImage& c) {
        return Observation{&c.image, c.corners, c.pose.intrinsics};
    }
};

struct ChannelAnalysis {
    Spectrum spectrum;
    std::vector<PeakMeasurement> peaks;  ///< refined, strongest first
};

struct ViewAnalysis {
    CameraPose pose;
    ChannelAnalysis first, second;
    Intersection match;
    int grid_w = 0, grid_h = 0;
};

struct CalibrationResult {
    double p = 0.0;
    double alpha_deg = 0.0;
    double t = 0.0;
    double sigma = 0.0;
    double h1 = 0.0, h2 = 0.0;
    double alpha1_deg = 0.0, alpha2_deg = 0.0;
    double rho = 0.0, tau = 0.0, gamma = 0.0;
    double d1 = 0.0, d2 = 0.0;
    double match_dist = 0.0;  ///< worse of the two views
    double residual1 = 0.0, residual2 = 0.0;
    double offset_contrast = 0.0;
    CameraPose pose1, pose2;
    Candidate match1_first, match1_second, match2_first, match2_second;

    std::string report() const;
    static std::string csv_header();
    std::string csv_row() const;
};

/// Pose, rectification, spectra, peaks and (h, alpha) for one capture.
ViewAnalysis analyze_view(const Observation& obs, const CalibrationConfig& config);

/// Full two-capture calibration. Errors carry the failing stage in their label.
CalibrationResult calibrate(const Observation& first, const Observation& second,
                            const CalibrationConfig& config);

/// Analysis grid size for a corner quad: FFT-friendly, long side capped.
std::pair<int, int> analysis_grid(const Corners& corners, int cap, double oversample = 1.0);
/// Next integer >= n whose only prime factors are 2, 3, 5, 7.
int fft_friendly(int n);

}  // namespace dispcal
