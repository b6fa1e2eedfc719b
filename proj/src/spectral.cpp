#include "dispcal/spectral.hpp"

#include "dispcal/display_model.hpp"
#include "dispcal/error.hpp"
#include "dispcal/image_io.hpp"

#include <Eigen/Dense>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace dispcal {
namespace {

constexpr const char* kStage = "spectral";
constexpr double kFloorRatio = 1e-12;

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<Complex> unitary_dft(const Plane<double>& img) {
    const int w = img.width();
    const int h = img.height();
    const int half = w / 2 + 1;
    std::vector<double> in(img.data());
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(h) * static_cast<std::size_t>(half));
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_2d(h, w, in.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }

    const double norm = 1.0 / std::sqrt(static_cast<double>(w) * h);
    std::vector<Complex> coeffs(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    const int kx0 = -(w / 2);
    const int ky0 = -(h / 2);
    for (int j = 0; j < h; ++j) {
        const int uy = ((j + ky0) % h + h) % h;
        for (int i = 0; i < w; ++i) {
            const int ux = ((i + kx0) % w + w) % w;
            Complex v;
            if (ux < half) {
                const auto& o = out[static_cast<std::size_t>(uy) * half + static_cast<std::size_t>(ux)];
                v = Complex(o[0], o[1]);
            } else {
                const int cy = (h - uy) % h;
                const auto& o = out[static_cast<std::size_t>(cy) * half + static_cast<std::size_t>(w - ux)];
                v = Complex(o[0], -o[1]);
            }
            coeffs[static_cast<std::size_t>(j) * static_cast<std::size_t>(w) + static_cast<std::size_t>(i)] = v * norm;
        }
    }
    fftw_free(out);
    return coeffs;
}

// Design matrix of the 5x5 quadratic fit, columns x^2, y^2, xy, x, y, 1.
const Eigen::Matrix<double, 25, 6>& design_matrix() {
    static const Eigen::Matrix<double, 25, 6> a = [] {
        Eigen::Matrix<double, 25, 6> m;
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i) {
                const double x = i - 2, y = j - 2;
                m.row(5 * j + i) << x * x, y * y, x * y, x, y, 1.0;
            }
        return m;
    }();
    return a;
}

}  // namespace

Spectrum::Spectrum(Plane<double> samples, SampleAxes axes)
    : width_(samples.width()), height_(samples.height()), axes_(axes) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "empty image", kStage);
    if (!(axes.dx > 0.0) || !(axes.dy > 0.0))
        throw Error(ErrorKind::InvalidArgument, "sample spacing must be positive", kStage);
    coeffs_ = unitary_dft(samples);
    for (const auto& c : coeffs_) max_magnitude_ = std::max(max_magnitude_, std::abs(c));
    samples_ = std::make_shared<const Plane<double>>(std::move(samples));
}

Complex Spectrum::panel_phase(double fx, double fy) const noexcept {
    return std::polar(1.0, -2.0 * kPi * (fx * axes_.x0 + fy * axes_.y0));
}

Plane<double> apply_gaussian_window(const Plane<double>& img, double sx, double sy) {
    const int w = img.width();
    const int h = img.height();
    if (sx <= 0.0) sx = w / 6.0;
    if (sy <= 0.0) sy = h / 6.0;
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    std::vector<double> wx(static_cast<std::size_t>(w)), wy(static_cast<std::size_t>(h));
    for (int x = 0; x < w; ++x) wx[static_cast<std::size_t>(x)] = std::exp(-0.5 * (x - cx) * (x - cx) / (sx * sx));
    for (int y = 0; y < h; ++y) wy[static_cast<std::size_t>(y)] = std::exp(-0.5 * (y - cy) * (y - cy) / (sy * sy));
    Plane<double> out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out(x, y) = img(x, y) * wx[static_cast<std::size_t>(x)] * wy[static_cast<std::size_t>(y)];
    return out;
}

Spectrum spectrum(const Plane<double>& img, const SampleAxes& axes) { return Spectrum(img, axes); }

std::vector<Bin> detect_peaks(const Spectrum& spec, double exclude_dc_radius, std::size_t max_peaks) {
    std::vector<Bin> peaks;
    const double r2 = exclude_dc_radius * exclude_dc_radius;
    // Local maxima of transform round-off are not peaks.
    const double floor = 1e-9 * spec.max_magnitude();
    for (int ky = spec.ky_min() + 2; ky <= spec.ky_max() - 2; ++ky) {
        for (int kx = std::max(0, spec.kx_min() + 2); kx <= spec.kx_max() - 2; ++kx) {
            if (kx == 0 && ky <= 0) continue;
            if (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky <= r2) continue;
            const double m = spec.magnitude(kx, ky);
            if (m <= floor) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double n = spec.magnitude(kx + dx, ky + dy);
                    // Ties go to the bin that comes first in scan order.
                    const bool earlier = dy < 0 || (dy == 0 && dx < 0);
                    if (n > m || (earlier && n == m)) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) peaks.push_back({kx, ky, m});
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Bin& a, const Bin& b) { return a.magnitude > b.magnitude; });
    if (peaks.size() > max_peaks) peaks.resize(max_peaks);
    return peaks;
}

ParaboloidFit fit_paraboloid(const std::array<std::array<double, 5>, 5>& z) {
    Eigen::Matrix<double, 25, 1> rhs;
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) rhs(5 * j + i) = z[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    static const Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 25, 6>> qr(design_matrix());
    const Eigen::Matrix<double, 6, 1> k = qr.solve(rhs);

    ParaboloidFit fit;
    fit.a = k(0);
    fit.b = k(1);
    fit.c = k(2);
    fit.d = k(3);
    fit.e = k(4);
    fit.f = k(5);
    fit.residual = std::sqrt((design_matrix() * k - rhs).squaredNorm() / 25.0);
    const double det = 4.0 * fit.a * fit.b - fit.c * fit.c;
    // Curvature at round-off level means a flat patch, not a peak.
    const double tol = 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff());
    fit.concave = fit.a < -tol && fit.b < -tol && det > 0.0;
    if (det != 0.0) {
        fit.vx = (-2.0 * fit.b * fit.d + fit.c * fit.e) / det;
        fit.vy = (-2.0 * fit.a * fit.e + fit.c * fit.d) / det;
    }
    fit.peak = fit.a * fit.vx * fit.vx + fit.b * fit.vy * fit.vy + fit.c * fit.vx * fit.vy +
               fit.d * fit.vx + fit.e * fit.vy + fit.f;
    return fit;
}

PeakMeasurement refine_peak(const Spectrum& spec, const Bin& coarse) {
    if (coarse.kx - 2 < spec.kx_min() || coarse.kx + 2 > spec.kx_max() ||
        coarse.ky - 2 < spec.ky_min() || coarse.ky + 2 > spec.ky_max())
        throw Error(ErrorKind::UnreliablePeak, "peak too close to the grid boundary", kStage);
    const double floor = kFloorRatio * spec.max_magnitude();
    std::array<std::array<double, 5>, 5> z{};
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i)
            z[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                std::log(spec.magnitude(coarse.kx + i - 2, coarse.ky + j - 2) + floor);
    const ParaboloidFit fit = fit_paraboloid(z);
    if (!fit.concave) throw Error(ErrorKind::UnreliablePeak, "log-magnitude fit is not concave", kStage);
    if (std::abs(fit.vx) > 1.0 || std::abs(fit.vy) > 1.0)
        throw Error(ErrorKind::UnreliablePeak, "fitted vertex is more than one bin away", kStage);
    PeakMeasurement pm;
    pm.kx = coarse.kx + fit.vx;
    pm.ky = coarse.ky + fit.vy;
    pm.fx = spec.freq_x(pm.kx);
    pm.fy = spec.freq_y(pm.ky);
    pm.log_magnitude = fit.peak;
    pm.residual = fit.residual;
    return pm;
}

std::vector<Complex> sample_spectrum_row(const Spectrum& spec, std::span<const double> fx, double fy) {
    const Plane<double>& g = spec.samples();
    const int w = g.width();
    const int h = g.height();
    const double norm = 1.0 / std::sqrt(static_cast<double>(w) * h);
    // Collapse the rows at the shared vertical frequency, then probe each fx.
    std::vector<Complex> column(static_cast<std::size_t>(w), Complex(0.0, 0.0));
    const double wy = -2.0 * kPi * fy * spec.axes().dy;
    for (int y = 0; y < h; ++y) {
        const Complex ph = std::polar(1.0, wy * y);
        const auto row = g.row(y);
        for (int x = 0; x < w; ++x) column[static_cast<std::size_t>(x)] += row[static_cast<std::size_t>(x)] * ph;
    }
    std::vector<Complex> out;
    out.reserve(fx.size());
    for (double f : fx) {
        const double wx = -2.0 * kPi * f * spec.axes().dx;
        Complex acc(0.0, 0.0);
        for (int x = 0; x < w; ++x) acc += column[static_cast<std::size_t>(x)] * std::polar(1.0, wx * x);
        out.push_back(acc * norm);
    }
    return out;
}

Complex sample_spectrum_at(const Spectrum& spec, double fx, double fy) {
    const double f[1] = {fx};
    return sample_spectrum_row(spec, f, fy).front();
}

PeakMeasurement polish_peak(const Spectrum& spec, const PeakMeasurement& peak, int iterations) {
    constexpr double kStep = 0.1;
    PeakMeasurement out = peak;
    double kx = peak.kx, ky = peak.ky;
    for (int it = 0; it < iterations; ++it) {
        std::array<std::array<double, 3>, 3> z{};
        const std::array<double, 3> fx = {spec.freq_x(kx - kStep), spec.freq_x(kx), spec.freq_x(kx + kStep)};
        for (int j = 0; j < 3; ++j) {
            const auto row = sample_spectrum_row(spec, fx, spec.freq_y(ky + (j - 1) * kStep));
            for (int i = 0; i < 3; ++i)
                z[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                    std::log(std::abs(row[static_cast<std::size_t>(i)]) + 1e-300);
        }
        const double gx = (z[1][2] - z[1][0]) / (2 * kStep);
        const double gy = (z[2][1] - z[0][1]) / (2 * kStep);
        const double hxx = (z[1][2] - 2 * z[1][1] + z[1][0]) / (kStep * kStep);
        const double hyy = (z[2][1] - 2 * z[1][1] + z[0][1]) / (kStep * kStep);
        const double hxy = (z[2][2] - z[2][0] - z[0][2] + z[0][0]) / (4 * kStep * kStep);
        const double det = hxx * hyy - hxy * hxy;
        if (!(hxx < 0 && det > 0)) return out;
        const double sx = -(hyy * gx - hxy * gy) / det;
        const double sy = -(hxx * gy - hxy * gx) / det;
        if (std::abs(kx + sx - peak.kx) > 1.0 || std::abs(ky + sy - peak.ky) > 1.0) return out;
        kx += sx;
        ky += sy;
        out.kx = kx;
        out.ky = ky;
        out.fx = spec.freq_x(kx);
        out.fy = spec.freq_y(ky);
        out.log_magnitude = z[1][1] + 0.5 * (gx * sx + gy * sy);
        if (std::hypot(sx, sy) < 1e-6) break;
    }
    return out;
}

Plane<float> log_magnitude(const Spectrum& spec) {
    Plane<float> out(spec.width(), spec.height());
    const double floor = kFloorRatio * spec.max_magnitude() + 1e-300;
    for (int ky = spec.ky_min(); ky <= spec.ky_max(); ++ky)
        for (int kx = spec.kx_min(); kx <= spec.kx_max(); ++kx)
            out(kx - spec.kx_min(), ky - spec.ky_min()) =
                static_cast<float>(std::log(spec.magnitude(kx, ky) + floor));
    return out;
}

void write_spectrum_png(const std::filesystem::path& path, const Spectrum& spec) {
    const Plane<float> lm = log_magnitude(spec);
    const auto [lo, hi] = std::minmax_element(lm.data().begin(), lm.data().end());
    write_png_gray(path, lm, *lo, *hi);
}

}  // namespace dispcal
