#pragma once

#include "dispcal/image.hpp"

#include <array>
#include <complex>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace dispcal {

using Complex = std::complex<double>;

/// Placement of the analysed samples in the panel frame: sample (i, j) sits at
/// (x0 + i dx, y0 + j dy), in subpixel-column units along both axes.
struct SampleAxes {
    double dx = 1.0, dy = 1.0;
    double x0 = 0.0, y0 = 0.0;
};

/// DC-centered unitary DFT of a real image. Bin (kx, ky) with
/// kx in [-W/2, (W-1)/2] corresponds to f_x = kx / (W dx) cycles per subpixel.
class Spectrum {
public:
    Spectrum() = default;
    Spectrum(Plane<double> samples, SampleAxes axes);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const SampleAxes& axes() const noexcept { return axes_; }
    /// The (windowed) samples the spectrum was computed from.
    const Plane<double>& samples() const noexcept { return *samples_; }

    int kx_min() const noexcept { return -(width_ / 2); }
    int kx_max() const noexcept { return (width_ - 1) / 2; }
    int ky_min() const noexcept { return -(height_ / 2); }
    int ky_max() const noexcept { return (height_ - 1) / 2; }

    Complex at(int kx, int ky) const noexcept {
        return coeffs_[static_cast<std::size_t>(ky - ky_min()) * static_cast<std::size_t>(width_) +
                       static_cast<std::size_t>(kx - kx_min())];
    }
    double magnitude(int kx, int ky) const noexcept { return std::abs(at(kx, ky)); }
    double max_magnitude() const noexcept { return max_magnitude_; }

    double bin_width_x() const noexcept { return 1.0 / (width_ * axes_.dx); }
    double bin_width_y() const noexcept { return 1.0 / (height_ * axes_.dy); }
    double freq_x(double kx) const noexcept { return kx * bin_width_x(); }
    double freq_y(double ky) const noexcept { return ky * bin_width_y(); }
    double bin_x(double fx) const noexcept { return fx / bin_width_x(); }
    double bin_y(double fy) const noexcept { return fy / bin_width_y(); }
    double nyquist_x() const noexcept { return 0.5 / axes_.dx; }
    double nyquist_y() const noexcept { return 0.5 / axes_.dy; }

    /// Phase factor turning an index-origin coefficient into the panel-frame one.
    Complex panel_phase(double fx, double fy) const noexcept;

private:
    int width_ = 0, height_ = 0;
    SampleAxes axes_;
    std::shared_ptr<const Plane<double>> samples_;
    std::vector<Complex> coeffs_;
    double max_magnitude_ = 0.0;
};

struct Bin {
    int kx = 0, ky = 0;
    double magnitude = 0.0;
};

struct PeakMeasurement {
    double fx = 0.0, fy = 0.0;    ///< cycles per subpixel
    double kx = 0.0, ky = 0.0;    ///< refined position in bins
    double log_magnitude = 0.0;   ///< fitted log-magnitude at the vertex
    double residual = 0.0;        ///< RMS of the fit over the 5x5 patch
};

/// Full quadratic z = a x^2 + b y^2 + c xy + d x + e y + f on a 5x5 patch
/// with x, y in {-2..2}; z[j][i] holds the value at (i - 2, j - 2).
struct ParaboloidFit {
    double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
    double vx = 0, vy = 0;   ///< vertex offset
    double peak = 0;         ///< value at the vertex
    double residual = 0;     ///< RMS residual
    bool concave = false;
};
ParaboloidFit fit_paraboloid(const std::array<std::array<double, 5>, 5>& z);

/// Multiplies by exp(-((x-cx)^2/2sx^2 + (y-cy)^2/2sy^2)), center at ((W-1)/2, (H-1)/2).
/// sx, sy <= 0 select W/6 and H/6.
Plane<double> apply_gaussian_window(const Plane<double>& img, double sx = 0.0, double sy = 0.0);

Spectrum spectrum(const Plane<double>& img, const SampleAxes& axes = {});

/// Local maxima over 8-neighbourhoods outside the DC disk (radius in bins) in the
/// half-plane kx > 0 or (kx == 0, ky > 0), strongest first. Bins on the outer two
/// rings of the grid and bins below 1e-9 of the largest magnitude are never reported.
std::vector<Bin> detect_peaks(const Spectrum& spec, double exclude_dc_radius, std::size_t max_peaks);

/// Log-magnitude paraboloid refinement around `coarse`. Throws UnreliablePeak.
PeakMeasurement refine_peak(const Spectrum& spec, const Bin& coarse);

/// Newton ascent of log|DTFT| from a refined peak, using exact off-grid
/// sums on a 3x3 stencil. Leaves `peak` unchanged if the surface is not
/// concave there or a step would leave the one-bin neighbourhood.
PeakMeasurement polish_peak(const Spectrum& spec, const PeakMeasurement& peak, int iterations = 3);

/// Direct DTFT of the stored samples at (fx, fy) cycles per subpixel, same
/// normalization and index origin as the grid coefficients.
Complex sample_spectrum_at(const Spectrum& spec, double fx, double fy);
/// Batch form for many fx sharing one fy.
std::vector<Complex> sample_spectrum_row(const Spectrum& spec, std::span<const double> fx, double fy);

/// log(|coeff| + floor) over the grid, DC centered.
Plane<float> log_magnitude(const Spectrum& spec);
/// 8-bit grayscale dump of log_magnitude, normalized to its range.
void write_spectrum_png(const std::filesystem::path& path, const Spectrum& spec);

}  // namespace dispcal
