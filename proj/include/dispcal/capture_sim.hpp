#pragma once

#include "dispcal/camera_pose.hpp"
#include "dispcal/display_model.hpp"
#include "dispcal/image.hpp"
#include "dispcal/panel_pattern.hpp"

#include <cstdint>

namespace dispcal {

enum class Aperture {
    Box,           ///< hard slit: transmission 1 within slit_width / 2 of the slit line
    RaisedCosine,  ///< 0.5 (1 + cos(pi d / w)) for |d| < w; same mean transmission as Box
};

struct SimOptions {
    double slit_width = 0.0;  ///< mm; <= 0 selects p / 8
    double psf_sigma = 0.8;   ///< optical Gaussian blur, captured pixels
    int supersample = 4;      ///< ray rows per pixel; columns are integrated exactly
    double noise_scale = 0.0; ///< photons at full intensity; <= 0 disables noise
    bool apply_perspective = true;
    Aperture aperture = Aperture::Box;
    std::uint64_t noise_seed = 0;

    double effective_slit_width(const DisplayParams& params) const noexcept {
        return slit_width > 0.0 ? slit_width : params.p / 8.0;
    }
    void validate(const DisplayParams& params) const;
};

/// Float RGB capture with the pose it was taken from and the image positions
/// of the outer panel corners (TL, TR, BR, BL).
struct CapturedImage {
    RgbImage<float> image;
    CameraPose pose;
    Corners corners{};

    int width() const noexcept { return image.width(); }
    int height() const noexcept { return image.height(); }
};

/// Transmission of the optical element for the ray from panel point
/// (x subpixels, y rows; centered frame) to the camera center.
double visibility(double x, double y, const CameraPose& pose, const DisplayParams& params,
                  double slit_width, Aperture aperture = Aperture::Box);

/// Forward model: panel image seen through the slanted optical element by a
/// pinhole camera. The optical blur acts on the scene before the pixel box
/// integrates it, so content above the sensor Nyquist limit is attenuated
/// instead of folded. Poisson noise is optional.
CapturedImage simulate_capture(const PanelImage& panel, const DisplayParams& params,
                               const CameraPose& pose, const SimOptions& opts);

/// value <- Poisson(value * scale) / scale per pixel; deterministic for a seed.
CapturedImage add_poisson_noise(const CapturedImage& img, double noise_scale, std::uint64_t seed);

/// 10 log10(sum clean^2 / sum (noisy - clean)^2); +infinity when the two match.
double snr(const CapturedImage& clean, const CapturedImage& noisy);

/// Poisson scale that yields the requested SNR on `clean` in expectation.
double noise_scale_for_snr(const CapturedImage& clean, double snr_db);

/// Separable Gaussian blur with zero padding; sigma <= 0 returns the input.
Plane<float> gaussian_blur(const Plane<float>& src, double sigma);

/// Mirror image of a capture (pixel x -> width - 1 - x); corners follow the mirror
/// and are reordered into image order.
CapturedImage mirror_horizontally(const CapturedImage& img);

}  // namespace dispcal
