#include "dispcal/capture_sim.hpp"

#include "dispcal/error.hpp"
#include "dispcal/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace dispcal {
namespace {

using Rgb = std::array<double, 3>;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// The slit family seen from the camera center, expressed on the panel plane.
// Along a panel row at height Y (mm), the slit coordinate is s(X) = k X + b(Y)
// with slit lines at s = n * period.
class SlitProjector {
public:
    SlitProjector(const DisplayParams& params, const Eigen::Vector3d& eye, double slit_width,
                  Aperture aperture)
        : aperture_(aperture), width_(slit_width) {
        const double d = eye.z();
        k_ = (d - params.t) / d;
        tan_a_ = std::tan(params.alpha);
        cos_a_ = std::cos(params.alpha);
        period_ = params.p / cos_a_;
        c0_ = params.t * (eye.x() - eye.y() * tan_a_) / d - params.sigma;
        half_support_ = aperture == Aperture::Box ? 0.5 * slit_width / cos_a_ : slit_width / cos_a_;
    }

    double offset(double y_mm) const noexcept { return c0_ - k_ * y_mm * tan_a_; }

    /// Transmission at slit coordinate s.
    double transmission(double s) const noexcept {
        const double ds = s - period_ * std::round(s / period_);
        if (aperture_ == Aperture::Box) return std::abs(ds) <= half_support_ ? 1.0 : 0.0;
        if (std::abs(ds) >= half_support_) return 0.0;
        return 0.5 * (1.0 + std::cos(kPi * ds * cos_a_ / width_));
    }

    /// Calls fn(l, r, n) for every slit support interval [l, r] (panel X, mm)
    /// intersecting [x_lo, x_hi] on the row with offset b.
    template <typename Fn>
    void for_each_opening(double x_lo, double x_hi, double b, Fn&& fn) const {
        const double s_lo = k_ * x_lo + b;
        const double s_hi = k_ * x_hi + b;
        const long n_lo = static_cast<long>(std::ceil((s_lo - half_support_) / period_));
        const long n_hi = static_cast<long>(std::floor((s_hi + half_support_) / period_));
        for (long n = n_lo; n <= n_hi; ++n) {
            const double center = n * period_;
            const double l = std::max(x_lo, (center - half_support_ - b) / k_);
            const double r = std::min(x_hi, (center + half_support_ - b) / k_);
            if (r > l) fn(l, r, center);
        }
    }

    /// Integral of the transmission over panel X in [l, r] for the opening at
    /// slit coordinate `center`.
    double integral(double l, double r, double b, double center) const noexcept {
        if (aperture_ == Aperture::Box) return r - l;
        const double scale = kPi * cos_a_ / width_;
        const double pl = scale * (k_ * l + b - center);
        const double pr = scale * (k_ * r + b - center);
        return 0.5 * (r - l) + 0.5 * (std::sin(pr) - std::sin(pl)) / (scale * k_);
    }

private:
    Aperture aperture_;
    double width_;
    double k_ = 1.0, tan_a_ = 0.0, cos_a_ = 1.0, period_ = 1.0, c0_ = 0.0, half_support_ = 0.0;
};

// Antiderivative of the pixel response: unit box convolved with a Gaussian of
// the PSF width, tabulated for linear interpolation.
class PixelKernel {
public:
    explicit PixelKernel(double sigma) : sigma_(sigma) {
        radius_ = sigma > 0.0 ? 0.5 + 6.0 * sigma : 0.5;
        if (sigma <= 0.0) return;
        const int n = static_cast<int>(std::ceil(2.0 * radius_ * kSteps));
        table_.resize(static_cast<std::size_t>(n) + 2);
        for (int i = 0; i <= n + 1; ++i)
            table_[static_cast<std::size_t>(i)] = exact(-radius_ + static_cast<double>(i) / kSteps);
    }

    double radius() const noexcept { return radius_; }

    /// Fraction of pixel response at offset 0 collected from (-inf, x].
    double cumulative(double x) const noexcept {
        if (x <= -radius_) return 0.0;
        if (x >= radius_) return 1.0;
        if (sigma_ <= 0.0) return x + 0.5;
        const double u = (x + radius_) * kSteps;
        const auto i = static_cast<std::size_t>(u);
        const double f = u - static_cast<double>(i);
        return table_[i] + f * (table_[i + 1] - table_[i]);
    }

private:
    static constexpr int kSteps = 2048;

    double psi(double u) const noexcept {
        const double z = u / sigma_;
        return u * 0.5 * std::erfc(-z / std::sqrt(2.0)) + sigma_ * std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
    }
    double exact(double x) const noexcept { return psi(x + 0.5) - psi(x - 0.5); }

    double sigma_;
    double radius_ = 0.5;
    std::vector<double> table_;
};

// Light collected along one ray row: the visible pieces of the panel with their
// extent in image x, accumulated into per-channel pixel responses.
class RowIntegrator {
public:
    RowIntegrator(const PanelImage& panel, const PanelGeometry& g, const SlitProjector& slits,
                  const PixelKernel& kernel, Aperture aperture, int width)
        : panel_(panel), g_(g), slits_(slits), kernel_(kernel), aperture_(aperture), width_(width) {
        for (auto& p : profile_) p.assign(static_cast<std::size_t>(width), 0.0);
    }

    void reset() {
        for (auto& p : profile_) std::fill(p.begin(), p.end(), 0.0);
        open_ = false;
    }

    /// Panel segment [x_lo, x_hi] mm on `row` (slit offset b), spanning image x [xa, xb].
    void segment(int row, double x_lo, double x_hi, double b, double xa, double xb) {
        const double half_w = 0.5 * g_.panel_w;
        const double len = x_hi - x_lo;
        const auto r0 = panel_[0].row(row);
        const auto r1 = panel_[1].row(row);
        const auto r2 = panel_[2].row(row);
        auto to_image = [&](double x) { return len > 0.0 ? xa + (x - x_lo) / len * (xb - xa) : xa; };
        slits_.for_each_opening(x_lo, x_hi, b, [&](double l, double r, double center) {
            int c_lo = std::max(static_cast<int>(std::floor(l / g_.q + half_w)), 0);
            int c_hi = std::min(static_cast<int>(std::floor(r / g_.q + half_w)), g_.panel_w - 1);
            for (int c = c_lo; c <= c_hi; ++c) {
                const auto idx = static_cast<std::size_t>(c);
                if ((r0[idx] | r1[idx] | r2[idx]) == 0) {
                    flush();
                    continue;
                }
                const double cl = std::max(l, (c - half_w) * g_.q);
                const double cr = std::min(r, (c + 1 - half_w) * g_.q);
                if (cr <= cl) continue;
                const std::array<double, 3> rgb{r0[idx] / 255.0, r1[idx] / 255.0, r2[idx] / 255.0};
                if (aperture_ == Aperture::Box) {
                    emit(to_image(cl), to_image(cr), rgb);
                } else {
                    constexpr int kPieces = 8;
                    for (int k = 0; k < kPieces; ++k) {
                        const double pl = cl + (cr - cl) * k / kPieces;
                        const double pr = cl + (cr - cl) * (k + 1) / kPieces;
                        const double tr = slits_.integral(pl, pr, b, center) / (pr - pl);
                        emit(to_image(pl), to_image(pr), {rgb[0] * tr, rgb[1] * tr, rgb[2] * tr});
                    }
                }
            }
        });
    }

    /// Ends the current run of merged pieces.
    void flush() {
        if (!open_) return;
        open_ = false;
        double xl = run_lo_, xr = run_hi_;
        if (xr < xl) std::swap(xl, xr);
        const double rad = kernel_.radius();
        const int i_lo = std::max(0, static_cast<int>(std::ceil(xl - rad)));
        const int i_hi = std::min(width_ - 1, static_cast<int>(std::floor(xr + rad)));
        for (int i = i_lo; i <= i_hi; ++i) {
            const double w = kernel_.cumulative(xr - i) - kernel_.cumulative(xl - i);
            if (w == 0.0) continue;
            for (int ch = 0; ch < 3; ++ch)
                profile_[static_cast<std::size_t>(ch)][static_cast<std::size_t>(i)] += w * run_rgb_[static_cast<std::size_t>(ch)];
        }
    }

    const std::array<std::vector<double>, 3>& profile() const noexcept { return profile_; }

private:
    void emit(double xl, double xr, const std::array<double, 3>& rgb) {
        if (open_ && rgb == run_rgb_ && std::abs(xl - run_hi_) < 1e-9) {
            run_hi_ = xr;
            return;
        }
        flush();
        open_ = true;
        run_lo_ = xl;
        run_hi_ = xr;
        run_rgb_ = rgb;
    }

    const PanelImage& panel_;
    const PanelGeometry& g_;
    const SlitProjector& slits_;
    const PixelKernel& kernel_;
    Aperture aperture_;
    int width_;
    std::array<std::vector<double>, 3> profile_;
    bool open_ = false;
    double run_lo_ = 0.0, run_hi_ = 0.0;
    std::array<double, 3> run_rgb_{};
};

}  // namespace

void SimOptions::validate(const DisplayParams& params) const {
    const double w = effective_slit_width(params);
    if (!(w > 0.0) || w > params.p)
        throw Error(ErrorKind::InvalidArgument, "slit width must lie in (0, p]");
    if (!(psf_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "psf sigma must be >= 0");
    if (supersample < 1) throw Error(ErrorKind::InvalidArgument, "supersample must be >= 1");
    if (std::isnan(noise_scale)) throw Error(ErrorKind::InvalidArgument, "noise scale is NaN");
}

double visibility(double x, double y, const CameraPose& pose, const DisplayParams& params,
                  double slit_width, Aperture aperture) {
    if (!(pose.d() > params.t))
        throw Error(ErrorKind::InvalidGeometry, "camera distance must exceed the gap");
    if (!(slit_width > 0.0)) throw Error(ErrorKind::InvalidArgument, "slit width must be positive");
    const SlitProjector slits(params, pose.position, slit_width, aperture);
    const double x_mm = x * params.panel.q;
    const double y_mm = y * params.panel.row_pitch;
    const double k = (pose.d() - params.t) / pose.d();
    return slits.transmission(k * x_mm + slits.offset(y_mm));
}

Plane<float> gaussian_blur(const Plane<float>& src, double sigma) {
    if (!(sigma > 0.0)) return src;
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : kernel) v /= sum;

    const int w = src.width();
    const int h = src.height();
    Plane<float> tmp(w, h);
    parallel_for(0, static_cast<std::size_t>(h), [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xs = x + i;
                if (xs >= 0 && xs < w) acc += kernel[static_cast<std::size_t>(i + radius)] * src(xs, y);
            }
            tmp(x, y) = static_cast<float>(acc);
        }
    });
    Plane<float> out(w, h);
    parallel_for(0, static_cast<std::size_t>(h), [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int ys = y + i;
                if (ys >= 0 && ys < h) acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(x, ys);
            }
            out(x, y) = static_cast<float>(acc);
        }
    });
    return out;
}

CapturedImage simulate_capture(const PanelImage& panel, const DisplayParams& params,
                               const CameraPose& pose, const SimOptions& opts) {
    params.validate();
    pose.validate();
    opts.validate(params);
    const PanelGeometry& g = params.panel;
    if (panel.width() != g.panel_w || panel.height() != g.panel_h)
        throw Error(ErrorKind::DimensionMismatch, "panel image does not match the display geometry");
    if (!(pose.d() > params.t))
        throw Error(ErrorKind::InvalidGeometry, "camera distance must exceed the gap");

    const int out_w = pose.intrinsics.width;
    const int out_h = pose.intrinsics.height;
    const int ss = opts.supersample;
    const double width_mm = g.width_mm();
    const double height_mm = g.height_mm();
    const SlitProjector slits(params, pose.position, opts.effective_slit_width(params), opts.aperture);
    const Eigen::Matrix3d to_panel = pose.homography().inverse().m;
    const PixelKernel kernel(opts.psf_sigma);
    const double rad = kernel.radius();

    CapturedImage out;
    out.pose = pose;
    out.image = RgbImage<float>(out_w, out_h);
    if (opts.apply_perspective) {
        const auto h = pose.homography();
        const auto pc = panel_corners_mm(width_mm, height_mm);
        for (std::size_t i = 0; i < 4; ++i) out.corners[i] = h.apply(pc[i]);
    } else {
        out.corners = {Eigen::Vector2d(-0.5, -0.5), Eigen::Vector2d(out_w - 0.5, -0.5),
                       Eigen::Vector2d(out_w - 0.5, out_h - 0.5), Eigen::Vector2d(-0.5, out_h - 0.5)};
    }

    auto to_panel_mm = [&](double x_img, double y_img) {
        if (opts.apply_perspective) {
            const Eigen::Vector3d p = to_panel * Eigen::Vector3d(x_img, y_img, 1.0);
            return Eigen::Vector2d(p.x() / p.z(), p.y() / p.z());
        }
        return Eigen::Vector2d((x_img + 0.5) / out_w * width_mm - 0.5 * width_mm,
                               (y_img + 0.5) / out_h * height_mm - 0.5 * height_mm);
    };

    // Ray columns extend past the frame by the kernel radius so that light just
    // outside the border still spreads into edge pixels.
    const int margin = static_cast<int>(std::ceil(rad * ss)) + 1;
    const int k_lo = -margin;
    const int k_hi = out_w * ss + margin;
    const double half_sub = 0.5 / ss;
    constexpr int kBand = 32;
    const int n_bands = (out_h + kBand - 1) / kBand;

    parallel_for(0, static_cast<std::size_t>(n_bands), [&](std::size_t band) {
        const int j0 = static_cast<int>(band) * kBand;
        const int j1 = std::min(out_h, j0 + kBand);
        std::vector<std::array<std::vector<double>, 3>> acc(static_cast<std::size_t>(j1 - j0));
        for (auto& a : acc)
            for (auto& c : a) c.assign(static_cast<std::size_t>(out_w), 0.0);
        RowIntegrator integ(panel, g, slits, kernel, opts.aperture, out_w);
        std::vector<Eigen::Vector2d> bounds(static_cast<std::size_t>(k_hi - k_lo + 1));

        const int s_lo = static_cast<int>(std::floor((j0 - rad) * ss)) - 1;
        const int s_hi = static_cast<int>(std::ceil((j1 - 1 + rad + 1.0) * ss)) + 1;
        for (int s = s_lo; s <= s_hi; ++s) {
            const double y_img = -0.5 + (s + 0.5) / ss;
            // Vertical weights of this ray row for the rows of the band.
            std::array<double, kBand> wy{};
            bool any = false;
            for (int j = j0; j < j1; ++j) {
                const double w = kernel.cumulative(y_img + half_sub - j) - kernel.cumulative(y_img - half_sub - j);
                wy[static_cast<std::size_t>(j - j0)] = w;
                any = any || w > 0.0;
            }
            if (!any) continue;

            for (int k = k_lo; k <= k_hi; ++k)
                bounds[static_cast<std::size_t>(k - k_lo)] = to_panel_mm(-0.5 + static_cast<double>(k) / ss, y_img);
            integ.reset();
            bool touched = false;
            for (int k = k_lo; k < k_hi; ++k) {
                const Eigen::Vector2d& a = bounds[static_cast<std::size_t>(k - k_lo)];
                const Eigen::Vector2d& b = bounds[static_cast<std::size_t>(k - k_lo + 1)];
                const double y_mm = 0.5 * (a.y() + b.y());
                const int row = static_cast<int>(std::floor(y_mm / g.row_pitch + 0.5 * g.panel_h));
                double x_lo = a.x(), x_hi = b.x();
                double xa = -0.5 + static_cast<double>(k) / ss, xb = xa + 1.0 / ss;
                if (x_hi < x_lo) {
                    std::swap(x_lo, x_hi);
                    std::swap(xa, xb);
                }
                if (row < 0 || row >= g.panel_h || x_hi < -0.5 * width_mm || x_lo > 0.5 * width_mm) {
                    integ.flush();
                    continue;
                }
                touched = true;
                integ.segment(row, x_lo, x_hi, slits.offset(y_mm), xa, xb);
            }
            integ.flush();
            if (!touched) continue;
            const auto& prof = integ.profile();
            for (int j = j0; j < j1; ++j) {
                const double w = wy[static_cast<std::size_t>(j - j0)];
                if (w == 0.0) continue;
                auto& dst = acc[static_cast<std::size_t>(j - j0)];
                for (int c = 0; c < 3; ++c)
                    for (int i = 0; i < out_w; ++i)
                        dst[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] +=
                            w * prof[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            }
        }
        for (int j = j0; j < j1; ++j)
            for (int c = 0; c < 3; ++c) {
                auto row = out.image[c].row(j);
                const auto& src = acc[static_cast<std::size_t>(j - j0)][static_cast<std::size_t>(c)];
                for (int i = 0; i < out_w; ++i)
                    row[static_cast<std::size_t>(i)] = static_cast<float>(std::max(0.0, src[static_cast<std::size_t>(i)]));
            }
    });

    if (opts.noise_scale > 0.0) return add_poisson_noise(out, opts.noise_scale, opts.noise_seed);
    return out;
}

CapturedImage add_poisson_noise(const CapturedImage& img, double noise_scale, std::uint64_t seed) {
    if (!(noise_scale > 0.0) || !std::isfinite(noise_scale))
        throw Error(ErrorKind::InvalidArgument, "noise scale must be positive and finite");
    CapturedImage out = img;
    for (int c = 0; c < 3; ++c) {
        auto& plane = out.image[c];
        parallel_for(0, static_cast<std::size_t>(plane.height()), [&](std::size_t yy) {
            const int y = static_cast<int>(yy);
            std::mt19937_64 rng(splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(c) << 32) |
                                                             static_cast<std::uint64_t>(y))));
            auto row = plane.row(y);
            for (auto& v : row) {
                const double mean = std::max(0.0, static_cast<double>(v)) * noise_scale;
                if (mean <= 0.0) {
                    v = 0.0f;
                    continue;
                }
                std::poisson_distribution<long long> dist(mean);
                v = static_cast<float>(static_cast<double>(dist(rng)) / noise_scale);
            }
        });
    }
    return out;
}

double snr(const CapturedImage& clean, const CapturedImage& noisy) {
    if (clean.width() != noisy.width() || clean.height() != noisy.height())
        throw Error(ErrorKind::DimensionMismatch, "images differ in size");
    double signal = 0.0, noise = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto& a = clean.image[c].data();
        const auto& b = noisy.image[c].data();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double s = a[i];
            const double e = static_cast<double>(b[i]) - s;
            signal += s * s;
            noise += e * e;
        }
    }
    if (noise == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / noise);
}

double noise_scale_for_snr(const CapturedImage& clean, double snr_db) {
    double sum = 0.0, sum_sq = 0.0;
    for (int c = 0; c < 3; ++c)
        for (float v : clean.image[c].data()) {
            sum += v;
            sum_sq += static_cast<double>(v) * v;
        }
    if (!(sum_sq > 0.0)) throw Error(ErrorKind::InvalidArgument, "capture carries no signal");
    // Poisson variance is value / scale, so noise power = sum / scale.
    return std::pow(10.0, snr_db / 10.0) * sum / sum_sq;
}

CapturedImage mirror_horizontally(const CapturedImage& img) {
    CapturedImage out = img;
    const int w = img.width();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < w; ++x) out.image[c](x, y) = img.image[c](w - 1 - x, y);
    auto mirror = [w](const Eigen::Vector2d& p) { return Eigen::Vector2d(w - 1 - p.x(), p.y()); };
    out.corners = {mirror(img.corners[1]), mirror(img.corners[0]), mirror(img.corners[3]),
                   mirror(img.corners[2])};
    return out;
}

}  // namespace dispcal
