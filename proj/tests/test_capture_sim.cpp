#include "dispcal/capture_sim.hpp"
#include "dispcal/error.hpp"
#include "dispcal/harness.hpp"
#include "dispcal/image_io.hpp"
#include "dispcal/panel_pattern.hpp"

#include "support.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dispcal;
using namespace dispcal::test_support;

namespace {

DisplayParams small_params(double sigma = 0.2) {
    const DisplayPreset pre = small_preset();
    return DisplayParams::from_degrees(pre.p, pre.alpha_deg, pre.t, sigma, pre.geometry());
}

CameraPose small_pose(const DisplayParams& params, double u, double v, double d, int w = 960, int h = 540,
                      double fill = 0.9) {
    return frontal_pose(params.panel, u, v, d, w, h, fill);
}

// Perpendicular distance (mm) from the barrier crossing of the ray panel -> eye
// to the nearest slit line, computed from scratch.
double slit_distance_oracle(double x_sub, double y_row, const Eigen::Vector3d& eye, const DisplayParams& p) {
    const double X = x_sub * p.panel.q, Y = y_row * p.panel.row_pitch;
    const double d = eye.z();
    const double lambda = p.t / d;
    const double bx = X + lambda * (eye.x() - X);
    const double by = Y + lambda * (eye.y() - Y);
    const double period = p.p / std::cos(p.alpha);
    const double s = bx - p.sigma - by * std::tan(p.alpha);
    const double r = s - period * std::round(s / period);
    return std::abs(r) * std::cos(p.alpha);
}

PanelImage single_view_panel(const PanelGeometry& g, const DerivedParams& render, int views, int lit) {
    std::vector<PanelImage> imgs;
    for (int k = 0; k < views; ++k) {
        PanelImage img(g.panel_w, g.panel_h);
        if (k == lit)
            for (int c = 0; c < 3; ++c) std::fill(img[c].data().begin(), img[c].data().end(), 255);
        imgs.push_back(std::move(img));
    }
    return interleave_views(imgs, render);
}

double max_abs_diff(const RgbImage<float>& a, const RgbImage<float>& b) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < a[c].size(); ++i)
            m = std::max(m, static_cast<double>(std::abs(a[c].data()[i] - b[c].data()[i])));
    return m;
}

}  // namespace

TEST(Visibility, FullyOpenSlitTransmitsEverywhere) {
    const DisplayParams params = small_params();
    const CameraPose pose = small_pose(params, 30.0, -20.0, 700.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> x(-960.0, 960.0), y(-180.0, 180.0);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(visibility(x(rng), y(rng), pose, params, params.p), 1.0);
}

TEST(Visibility, PointOnSlitLineIsVisible) {
    const DisplayParams params = small_params(0.3);
    for (const Eigen::Vector3d& eye : {Eigen::Vector3d(0, 0, 700), Eigen::Vector3d(40, -25, 900)}) {
        CameraPose pose;
        pose.position = eye;
        // Row y = 0: solve x_b - sigma - y_b tan(a) = 0 for the panel point.
        const double lam = params.t / eye.z();
        const double X = (params.sigma + eye.y() * lam * std::tan(params.alpha) - eye.x() * lam) / (1.0 - lam);
        EXPECT_EQ(visibility(X / params.panel.q, 0.0, pose, params, params.p / 100.0), 1.0);
        EXPECT_EQ(visibility(X / params.panel.q + 0.3 * derive(params, eye.z()).h, 0.0, pose, params,
                             params.p / 100.0),
                  0.0);
    }
}

TEST(Visibility, MatchesLineDistanceOracle) {
    const DisplayParams params = small_params(0.0);
    ASSERT_NEAR(params.alpha_deg(), 18.0, 1e-12);
    const double width = params.p / 8.0;
    for (const Eigen::Vector3d& eye : {Eigen::Vector3d(0, 0, 700), Eigen::Vector3d(-35, 20, 1000)}) {
        CameraPose pose;
        pose.position = eye;
        const DerivedParams dp = derive(params, eye.z());
        const double gamma = view_of_position(eye.x(), eye.y(), eye.z(), params).gamma;
        int visible = 0, total = 0;
        for (double y = -180.0; y <= 180.0; y += 3.7)
            for (double x = -960.0; x <= 960.0; x += 0.37) {
                const double dist = slit_distance_oracle(x, y, eye, params);
                if (std::abs(dist - 0.5 * width) < 1e-9) continue;  // on the aperture edge
                const double vis = visibility(x, y, pose, params, width);
                ASSERT_EQ(vis, dist <= 0.5 * width ? 1.0 : 0.0) << x << ' ' << y;
                ++total;
                if (vis > 0.0) {
                    ++visible;
                    // Visible points carry the camera's view up to the dilated slit half width.
                    const double dg = wrap_centered(view_of_pixel(x, y, dp).gamma - gamma, 1.0);
                    const double half = 0.5 * width / std::cos(params.alpha) * eye.z() / (eye.z() - params.t) /
                                        params.panel.q / dp.h;
                    EXPECT_LE(std::abs(dg), half + 1e-9);
                }
            }
        EXPECT_NEAR(static_cast<double>(visible) / total, 1.0 / 8.0, 0.01);
    }
}

TEST(SimulateCapture, BlackPanelGivesBlackCapture) {
    const DisplayParams params = small_params();
    const PanelImage black(params.panel.panel_w, params.panel.panel_h);
    const CapturedImage cap = simulate_capture(black, params, small_pose(params, 10, 5, 800, 480, 270), SimOptions{});
    for (int c = 0; c < 3; ++c)
        for (float v : cap.image[c].data()) EXPECT_EQ(v, 0.0f);
}

TEST(SimulateCapture, CorrectRenderingLooksUniformlyBright) {
    const DisplayParams params = small_params();
    const double d = 700.0;
    const DerivedParams dp = derive(params, d);
    // Place the camera so that its view sits in the middle of bin 0 of two.
    const double gamma = 0.25;
    const double u = -gamma * params.p * d / (params.t * std::cos(params.alpha));
    ASSERT_NEAR(view_of_position(u, 0.0, d, params).gamma, gamma, 1e-12);
    const PanelImage panel = single_view_panel(params.panel, dp, 2, 0);
    // The visible lines repeat every ~1.5 px at this size; a blur wider than
    // that period shows the lit fraction rather than the individual lines.
    const CameraPose pose = small_pose(params, u, 0.0, d, 480, 270);
    SimOptions so;
    so.psf_sigma = 2.0;
    const CapturedImage cap = simulate_capture(panel, params, pose, so);
    const Plane<float> lum = luminance(cap.image);
    const Eigen::Vector2d tl = cap.corners[0], br = cap.corners[2];
    double sum = 0.0, peak = 0.0;
    int n = 0;
    for (int y = static_cast<int>(tl.y() + 0.1 * (br.y() - tl.y())); y < br.y() - 0.1 * (br.y() - tl.y()); ++y)
        for (int x = static_cast<int>(tl.x() + 0.1 * (br.x() - tl.x())); x < br.x() - 0.1 * (br.x() - tl.x()); ++x) {
            sum += lum(x, y);
            peak = std::max(peak, static_cast<double>(lum(x, y)));
            ++n;
        }
    ASSERT_GT(peak, 0.0);
    EXPECT_GT(sum / n / peak, 0.9);

    // The opposite bin is dark from this position.
    const CapturedImage dark = simulate_capture(single_view_panel(params.panel, dp, 2, 1), params, pose, so);
    EXPECT_LT(max_value(luminance(dark.image)), 0.05 * peak);
}

TEST(SimulateCapture, MismatchedRenderingShowsPredictedLattice) {
    const DisplayParams params = small_params();
    const double d = 700.0;
    const DerivedParams actual = derive(params, d);
    // Column centers sit at phases k + 0.5, so bin 3 of 10 spans columns
    // centered on 10.5 .. 11.5 .. 12.5: its center is gamma' = 0.35 exactly.
    const DerivedParams render = DerivedParams::rendering(30.0, 0.0, 0.0, params.panel.row_scale());
    const PanelImage panel = single_view_panel(params.panel, render, 10, 3);
    const CameraPose pose = small_pose(params, 0.0, 0.0, d);
    SimOptions so;
    const CapturedImage cap = simulate_capture(panel, params, pose, so);
    const Plane<float> lum = luminance(cap.image);
    const auto blobs = find_blobs(lum, 0.5 * max_value(lum));
    const View gamma = view_of_position(0.0, 0.0, d, params);
    const auto lattice = predict_lattice(
        actual, render, gamma, View{0.35},
        Region{-0.5 * params.panel.panel_w - 50, -0.5 * params.panel.panel_h * params.panel.row_scale() - 50,
               0.5 * params.panel.panel_w + 50, 0.5 * params.panel.panel_h * params.panel.row_scale() + 50});
    const auto dists = blob_lattice_distances(blobs, lattice, pose, params.panel, 5.0);
    ASSERT_GT(dists.size(), 100u);
    for (double dd : dists) EXPECT_LE(dd, so.psf_sigma + 1.0);
}

TEST(SimulateCapture, IsLinearInPanelContent) {
    const DisplayParams params = small_params();
    const int w = params.panel.panel_w, h = params.panel.panel_h;
    PanelImage a = make_stripes(PatternSpec{15, 0, 0, 1}, w, h);
    PanelImage b = make_stripes(PatternSpec{15, 7, 0, 1}, w, h);
    PanelImage ab = a;
    for (std::size_t i = 0; i < ab[0].size(); ++i) ab[0].data()[i] = static_cast<std::uint8_t>(a[0].data()[i] | b[0].data()[i]);
    PanelImage half(w, h);
    for (std::size_t i = 0; i < half[0].size(); ++i) half[0].data()[i] = static_cast<std::uint8_t>((i * 37) % 128);
    PanelImage half2(w, h);
    for (std::size_t i = 0; i < half2[0].size(); ++i) half2[0].data()[i] = static_cast<std::uint8_t>((i * 11) % 127);
    PanelImage sum(w, h);
    for (std::size_t i = 0; i < sum[0].size(); ++i)
        sum[0].data()[i] = static_cast<std::uint8_t>(half[0].data()[i] + half2[0].data()[i]);

    const CameraPose pose = small_pose(params, 12.0, -7.0, 760.0, 480, 270);
    const SimOptions so;
    using Triple = std::tuple<const PanelImage*, const PanelImage*, const PanelImage*>;
    for (auto [x, y, xy] : {Triple{&a, &b, &ab}, Triple{&half, &half2, &sum}}) {
        const CapturedImage cx = simulate_capture(*x, params, pose, so);
        const CapturedImage cy = simulate_capture(*y, params, pose, so);
        const CapturedImage cxy = simulate_capture(*xy, params, pose, so);
        double err = 0.0;
        for (std::size_t i = 0; i < cxy.image[0].size(); ++i)
            err = std::max(err, static_cast<double>(std::abs(cxy.image[0].data()[i] - cx.image[0].data()[i] -
                                                             cy.image[0].data()[i])));
        EXPECT_LT(err, 1e-5);
    }
}

TEST(SimulateCapture, ChannelsAreIndependent) {
    const DisplayParams params = small_params();
    const int w = params.panel.panel_w, h = params.panel.panel_h;
    const CameraPose pose = small_pose(params, -20.0, 15.0, 900.0, 480, 270);
    const SimOptions so;
    const CapturedImage mux = simulate_capture(make_calibration_multiplex(w, h), params, pose, so);
    const CapturedImage red = simulate_capture(make_stripes(kPatternRed, w, h), params, pose, so);
    const CapturedImage green = simulate_capture(make_stripes(kPatternGreen, w, h), params, pose, so);
    EXPECT_EQ(mux.image[0].data(), red.image[0].data());
    EXPECT_EQ(mux.image[1].data(), green.image[1].data());
    for (float v : mux.image[2].data()) EXPECT_EQ(v, 0.0f);
}

TEST(SimulateCapture, EqualViewsCoincideAfterRectification) {
    const DisplayParams params = small_params();
    const double d = 750.0, a = params.alpha;
    const int w = params.panel.panel_w, h = params.panel.panel_h;
    const PanelImage panel = make_calibration_multiplex(w, h);
    CameraPose p1 = small_pose(params, 10.0, -20.0, d, 960, 540, 0.7);
    CameraPose p2 = small_pose(params, 10.0 + 40.0 * std::sin(a), -20.0 + 40.0 * std::cos(a), d, 960, 540, 0.7);
    p2.rotation = Eigen::AngleAxisd(deg_to_rad(0.7), Eigen::Vector3d(0.3, 1.0, 0.2).normalized()).toRotationMatrix();
    ASSERT_NEAR(view_of_position(p1.u(), p1.v(), d, params).gamma, view_of_position(p2.u(), p2.v(), d, params).gamma,
                1e-12);
    const SimOptions so;
    const CapturedImage c1 = simulate_capture(panel, params, p1, so);
    const CapturedImage c2 = simulate_capture(panel, params, p2, so);
    for (int ch : {0, 1}) {
        const Plane<float> r1 = rectify(c1.image[ch], c1.corners, 672, 378);
        const Plane<float> r2 = rectify(c2.image[ch], c2.corners, 672, 378);
        EXPECT_GT(correlation(r1, r2), 0.95) << "channel " << ch;
    }
}

TEST(SimulateCapture, RectifiedPerspectiveMatchesDirectPanelSampling) {
    const DisplayParams params = small_params();
    const int w = params.panel.panel_w, h = params.panel.panel_h;
    const PanelImage panel = make_calibration_multiplex(w, h);
    CameraPose pose = small_pose(params, 15.0, 10.0, 800.0, 960, 540, 0.8);
    pose.rotation = Eigen::AngleAxisd(deg_to_rad(0.8), Eigen::Vector3d(1.0, 0.5, 0.0).normalized()).toRotationMatrix();
    SimOptions persp;
    SimOptions flat;
    flat.apply_perspective = false;
    const CapturedImage a = simulate_capture(panel, params, pose, persp);
    CameraPose flat_pose = pose;
    flat_pose.intrinsics.width = 768;
    flat_pose.intrinsics.height = 432;
    const CapturedImage b = simulate_capture(panel, params, flat_pose, flat);
    for (int ch : {0, 1}) {
        const Plane<float> r = rectify(a.image[ch], a.corners, 768, 432);
        EXPECT_GT(correlation(r, b.image[ch]), 0.99) << "channel " << ch;
    }
}

TEST(SimulateCapture, MirroredCaptureRectifiesBackWithFlip) {
    const DisplayParams params = small_params();
    const PanelImage panel = make_calibration_multiplex(params.panel.panel_w, params.panel.panel_h);
    const CapturedImage cap = simulate_capture(panel, params, small_pose(params, 5.0, 0.0, 700.0), SimOptions{});
    const CapturedImage mir = mirror_horizontally(cap);
    const Plane<float> ref = rectify(cap.image[0], cap.corners, 864, 486);
    const Plane<float> back = rectify(mir.image[0], mir.corners, 864, 486, true);
    const Plane<float> wrong = rectify(mir.image[0], mir.corners, 864, 486, false);
    EXPECT_GT(correlation(ref, back), 0.999);
    EXPECT_LT(correlation(ref, wrong), 0.5);
}

TEST(SimulateCapture, IsDeterministicAndValidatesInput) {
    const DisplayParams params = small_params();
    const PanelImage panel = make_calibration_multiplex(params.panel.panel_w, params.panel.panel_h);
    const CameraPose pose = small_pose(params, 5.0, 0.0, 700.0, 320, 180);
    const CapturedImage a = simulate_capture(panel, params, pose, SimOptions{});
    const CapturedImage b = simulate_capture(panel, params, pose, SimOptions{});
    EXPECT_EQ(a.image[0].data(), b.image[0].data());

    try {
        simulate_capture(PanelImage(30, 10), params, pose, SimOptions{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
    SimOptions wide;
    wide.slit_width = 2.0 * params.p;
    EXPECT_THROW(simulate_capture(panel, params, pose, wide), Error);
    SimOptions no_rays;
    no_rays.supersample = 0;
    EXPECT_THROW(simulate_capture(panel, params, pose, no_rays), Error);
    CameraPose inside = pose;
    inside.position.z() = 2.0;
    EXPECT_THROW(simulate_capture(panel, params, inside, SimOptions{}), Error);
}

TEST(SimulateCapture, RaisedCosineApertureKeepsMeanTransmission) {
    const DisplayParams params = small_params();
    const PanelImage panel = make_stripes(PatternSpec{3, 0, 0, 1}, params.panel.panel_w, params.panel.panel_h);
    const CameraPose pose = small_pose(params, 0.0, 0.0, 700.0, 320, 180);
    SimOptions box, cosine;
    cosine.aperture = Aperture::RaisedCosine;
    const CapturedImage a = simulate_capture(panel, params, pose, box);
    const CapturedImage b = simulate_capture(panel, params, pose, cosine);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.image[0].size(); ++i) {
        sa += a.image[0].data()[i];
        sb += b.image[0].data()[i];
    }
    EXPECT_NEAR(sb / sa, 1.0, 0.02);
}

class NoiseTest : public ::testing::Test {
protected:
    void SetUp() override {
        const DisplayParams params = small_params();
        const PanelImage panel = make_calibration_multiplex(params.panel.panel_w, params.panel.panel_h);
        clean = simulate_capture(panel, params, small_pose(params, 0.0, 0.0, 700.0, 480, 270), SimOptions{});
    }
    CapturedImage clean;
};

TEST_F(NoiseTest, LargeScaleApproachesInput) {
    const CapturedImage noisy = add_poisson_noise(clean, 1e6, 3);
    EXPECT_LT(max_abs_diff(noisy.image, clean.image), 0.01);
}

TEST_F(NoiseTest, ZeroStaysZero) {
    const CapturedImage noisy = add_poisson_noise(clean, 50.0, 4);
    int zeros = 0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < clean.image[c].size(); ++i)
            if (clean.image[c].data()[i] == 0.0f) {
                ++zeros;
                EXPECT_EQ(noisy.image[c].data()[i], 0.0f);
            }
    EXPECT_GT(zeros, 0);
}

TEST_F(NoiseTest, SnrFallsWithScale) {
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {1e5, 1e4, 1e3, 1e2, 1e1}) {
        const double s = snr(clean, add_poisson_noise(clean, scale, 9));
        EXPECT_LT(s, prev) << scale;
        prev = s;
    }
}

TEST_F(NoiseTest, SeededAndNonnegative) {
    const CapturedImage a = add_poisson_noise(clean, 20.0, 42);
    const CapturedImage b = add_poisson_noise(clean, 20.0, 42);
    const CapturedImage c = add_poisson_noise(clean, 20.0, 43);
    EXPECT_EQ(a.image[0].data(), b.image[0].data());
    EXPECT_NE(a.image[0].data(), c.image[0].data());
    for (int ch = 0; ch < 3; ++ch)
        for (float v : a.image[ch].data()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_TRUE(std::isfinite(v));
        }
}

TEST_F(NoiseTest, ScaleForSnrHitsTarget) {
    for (double target : {6.0, 12.0, 24.0}) {
        const double scale = noise_scale_for_snr(clean, target);
        EXPECT_NEAR(snr(clean, add_poisson_noise(clean, scale, 5)), target, 0.2);
    }
}

TEST_F(NoiseTest, SnrDefinition) {
    EXPECT_TRUE(std::isinf(snr(clean, clean)));
    CapturedImage doubled = clean;
    for (int c = 0; c < 3; ++c)
        for (auto& v : doubled.image[c].data()) v *= 2.0f;
    EXPECT_NEAR(snr(clean, doubled), 0.0, 1e-9);

    // Noise of one quarter of the signal RMS: +-e with e^2 = mean(clean^2) / 16.
    double power = 0.0;
    std::size_t n = 0;
    for (int c = 0; c < 3; ++c)
        for (float v : clean.image[c].data()) {
            power += static_cast<double>(v) * v;
            ++n;
        }
    const double e = 0.25 * std::sqrt(power / static_cast<double>(n));
    CapturedImage noisy = clean;
    std::size_t k = 0;
    for (int c = 0; c < 3; ++c)
        for (auto& v : noisy.image[c].data()) v = static_cast<float>(v + ((k++ % 2) ? e : -e));
    EXPECT_NEAR(snr(clean, noisy), 20.0 * std::log10(4.0), 1e-3);
}

TEST_F(NoiseTest, SixteenBitPngRoundTrip) {
    const auto dir = fresh_dir("cap16");
    write_png16(dir / "c.png", clean.image);
    const RgbImage<float> back = read_png_float(dir / "c.png");
    ASSERT_EQ(back.width(), clean.width());
    double peak = 0.0;
    for (int c = 0; c < 3; ++c)
        for (float v : clean.image[c].data()) peak = std::max(peak, static_cast<double>(v));
    ASSERT_LE(peak, 1.0);
    EXPECT_LE(max_abs_diff(back, clean.image), 0.5 / 65535.0 + 1e-7);
    std::filesystem::remove_all(dir);
}

TEST(GaussianBlur, PreservesMassAwayFromBorders) {
    Plane<float> p(41, 41);
    p(20, 20) = 1.0f;
    const Plane<float> b = gaussian_blur(p, 1.5);
    double s = 0.0;
    for (float v : b.data()) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
    EXPECT_NEAR(b(21, 20) / b(20, 20), std::exp(-0.5 / (1.5 * 1.5)), 1e-5);
    EXPECT_EQ(gaussian_blur(p, 0.0).data(), p.data());
}
