#include "dispcal/error.hpp"
#include "dispcal/estimation.hpp"
#include "dispcal/harness.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace dispcal;
using test_support::simulate_and_calibrate;

namespace {

// Peak position produced by lattice node (m, n) of slanted lines with
// horizontal period h seen against a stripe comb of spacing beta.
PeakMeasurement forward_peak(double h, double alpha, double beta, int m, int n) {
    PeakMeasurement pm;
    pm.fx = m / beta - n / h;
    pm.fy = n * std::tan(alpha) / h;
    return pm;
}

bool contains(const std::vector<Candidate>& set, double h, double alpha, double rel) {
    for (const Candidate& c : set)
        if (std::abs(c.h - h) <= rel * h && std::abs(c.alpha - alpha) <= rel * std::max(1.0, alpha)) return true;
    return false;
}

// Exact fraction, for the pitch/gap oracle.
struct Fraction {
    long long num, den;
    Fraction(long long n, long long d) : num(n), den(d) { reduce(); }
    void reduce() {
        const long long g = std::gcd(num, den);
        num /= g;
        den /= g;
        if (den < 0) {
            num = -num;
            den = -den;
        }
    }
    Fraction operator*(const Fraction& o) const { return {num * o.num, den * o.den}; }
    Fraction operator/(const Fraction& o) const { return {num * o.den, den * o.num}; }
    Fraction operator-(const Fraction& o) const { return {num * o.den - o.num * den, den * o.den}; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

double pitch_at(double p, double alpha, double t, double d) { return d / (d - t) * p / std::cos(alpha); }

DisplayParams fhd_params(double sigma) {
    const DisplayPreset& preset = find_preset("FHD55B");
    return DisplayParams::from_degrees(preset.p, preset.alpha_deg, preset.t, sigma, preset.geometry());
}

}  // namespace

TEST(CandidateSet, ContainsTheGeneratingPair) {
    const double alpha = deg_to_rad(18.0);
    const auto set = candidate_set(forward_peak(10.0, alpha, 15.0, 1, 1), 15.0);
    EXPECT_TRUE(contains(set, 10.0, alpha, 1e-9));
    for (const Candidate& c : set) {
        EXPECT_TRUE(std::isfinite(c.h));
        EXPECT_TRUE(std::isfinite(c.alpha));
        EXPECT_GE(c.h, 3.0);
        EXPECT_LE(c.h, 200.0);
        EXPECT_GE(c.n, 1);
    }
    const auto it = std::find_if(set.begin(), set.end(), [](const Candidate& c) { return c.m == 1 && c.n == 1; });
    ASSERT_NE(it, set.end());
    EXPECT_NEAR(it->h, 10.0, 1e-9);
    EXPECT_NEAR(it->alpha, alpha, 1e-12);
}

TEST(CandidateSet, SkipsVanishingDenominator) {
    PeakMeasurement pm;
    pm.fx = 2.0 / 15.0;
    pm.fy = 0.03;
    const auto set = candidate_set(pm, 15.0);
    for (const Candidate& c : set) {
        EXPECT_NE(c.m, 2);
        EXPECT_TRUE(std::isfinite(c.h));
        EXPECT_TRUE(std::isfinite(c.alpha));
    }
}

TEST(CandidateSet, LowerHalfPlaneFoldsThroughOrigin) {
    const double alpha = deg_to_rad(12.0);
    PeakMeasurement pm = forward_peak(20.0, alpha, 24.0, -1, 2);
    PeakMeasurement mirrored = pm;
    mirrored.fx = -pm.fx;
    mirrored.fy = -pm.fy;
    EXPECT_TRUE(contains(candidate_set(mirrored, 24.0), 20.0, alpha, 1e-9));
}

TEST(CandidateSet, NothingInBoundsThrows) {
    PeakMeasurement pm;
    pm.fx = 0.4;
    pm.fy = 0.45;  // m / 15 - 0.4 is negative or tiny, so every slant exceeds 45 degrees
    try {
        candidate_set(pm, 15.0);
        FAIL() << "expected NoCandidate";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoCandidate);
    }
}

TEST(CandidateSet, RoundTripOverRandomDraws) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uh(3.5, 150.0), ua(0.5, 44.0);
    std::uniform_int_distribution<int> ub(1, 14), um(-8, 8), un(1, 3);
    int tested = 0;
    for (int i = 0; i < 1000; ++i) {
        const double h = uh(rng), alpha = deg_to_rad(ua(rng));
        const double beta = 3.0 * ub(rng);
        const int m = um(rng), n = un(rng);
        if (std::abs(m / beta - forward_peak(h, alpha, beta, m, n).fx) < 1e-12) continue;
        ++tested;
        EXPECT_TRUE(contains(candidate_set(forward_peak(h, alpha, beta, m, n), beta), h, alpha, 1e-9))
            << "h " << h << " alpha " << alpha << " beta " << beta << " m " << m << " n " << n;
    }
    EXPECT_EQ(tested, 1000);
}

TEST(Intersect, ExactTruthInBothSets) {
    const double alpha = deg_to_rad(18.0);
    const auto c1 = candidate_set(forward_peak(7.37, alpha, 15.0, 1, 1), 15.0);
    const auto c2 = candidate_set(forward_peak(7.37, alpha, 24.0, 2, 1), 24.0);
    const Intersection x = intersect_candidates(c1, c2);
    EXPECT_NEAR(x.h, 7.37, 1e-9);
    EXPECT_NEAR(x.alpha, alpha, 1e-12);
    EXPECT_NEAR(x.distance, 0.0, 1e-18);
    EXPECT_EQ(x.first.m, 1);
    EXPECT_EQ(x.second.m, 2);
}

TEST(Intersect, SymmetricOffsetsGiveTheMidpoint) {
    const double h = 12.5, a = deg_to_rad(14.0), dh = 1e-3, da = deg_to_rad(2e-3);
    const std::vector<Candidate> c1{{h + dh, a + da, 1, 1}, {30.0, a, 2, 1}};
    const std::vector<Candidate> c2{{h - dh, a - da, 0, 1}, {5.0, deg_to_rad(30.0), 1, 2}};
    const Intersection x = intersect_candidates(c1, c2);
    EXPECT_NEAR(x.h, h, 1e-12);
    EXPECT_NEAR(x.alpha, a, 1e-15);
    const double expected = std::pow(2 * dh / h, 2) + std::pow(2 * da / deg_to_rad(1.0), 2);
    EXPECT_NEAR(x.distance, expected, 1e-12);
}

TEST(Intersect, FarApartSetsAreAmbiguous) {
    const std::vector<Candidate> c1{{10.0, deg_to_rad(10.0), 1, 1}};
    const std::vector<Candidate> c2{{11.0, deg_to_rad(10.0), 1, 1}};
    try {
        intersect_candidates(c1, c2);
        FAIL() << "expected AmbiguousCalibration";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::AmbiguousCalibration);
    }
    EXPECT_NO_THROW(intersect_candidates(c1, c2, 0.02));
    EXPECT_THROW(intersect_candidates(std::vector<Candidate>{}, c2), Error);
}

TEST(Intersect, TiesPreferLowerOrder) {
    const double a = deg_to_rad(10.0);
    const std::vector<Candidate> c1{{10.0, a, 3, 2}, {10.0, a, 1, 1}};
    const std::vector<Candidate> c2{{10.0, a, 2, 1}, {10.0, a, 5, 3}};
    const Intersection x = intersect_candidates(c1, c2);
    EXPECT_EQ(x.first.n, 1);
    EXPECT_EQ(x.second.n, 1);
}

TEST(SolvePitchGap, EqualPitchesMeanZeroGap) {
    const double alpha = deg_to_rad(18.0);
    const PitchGap pg = solve_pitch_gap(7.0, 700.0, 7.0, 1000.0, alpha);
    EXPECT_NEAR(pg.t, 0.0, 1e-12);
    EXPECT_NEAR(pg.p, 7.0 * std::cos(alpha), 1e-12);
}

TEST(SolvePitchGap, ForwardCaseMatchesRationalOracle) {
    const double alpha = deg_to_rad(18.0);
    const double h1 = pitch_at(1.0, alpha, 4.0, 700.0);
    const double h2 = pitch_at(1.0, alpha, 4.0, 1000.0);
    EXPECT_NEAR(h1, 1.0575051, 1e-7);
    EXPECT_NEAR(h2, 1.0556849, 1e-7);
    // In units of the slit period P: h1 = 175/174, h2 = 250/249, and P cancels from t.
    const Fraction r1(700, 696), r2(1000, 996), d1(700, 1), d2(1000, 1);
    const Fraction t_exact = d1 * d2 * (r1 - r2) / (d2 * r1 - d1 * r2);
    EXPECT_EQ(t_exact.num, 4);
    EXPECT_EQ(t_exact.den, 1);
    const PitchGap pg = solve_pitch_gap(h1, 700.0, h2, 1000.0, alpha);
    EXPECT_NEAR(pg.p, 1.0, 1e-9);
    EXPECT_NEAR(pg.t, t_exact.value(), 1e-9);
}

TEST(SolvePitchGap, SwapSymmetric) {
    const double alpha = deg_to_rad(10.0);
    const double h1 = pitch_at(0.5, alpha, 2.0, 650.0), h2 = pitch_at(0.5, alpha, 2.0, 1200.0);
    const PitchGap a = solve_pitch_gap(h1, 650.0, h2, 1200.0, alpha, 0.1);
    const PitchGap b = solve_pitch_gap(h2, 1200.0, h1, 650.0, alpha, 0.1);
    EXPECT_NEAR(a.p, b.p, 1e-14);
    EXPECT_NEAR(a.t, b.t, 1e-12);
}

TEST(SolvePitchGap, InvertsForwardMapOverRandomDraws) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> up(0.1, 1.0), ua(10.0, 18.0), ut(1.0, 4.0), ud(500.0, 2000.0),
        uq(0.05, 0.3);
    for (int i = 0; i < 1000; ++i) {
        const double p = up(rng), alpha = deg_to_rad(ua(rng)), t = ut(rng), q = uq(rng);
        double d1 = ud(rng), d2 = ud(rng);
        while (std::abs(d1 - d2) < 50.0) d2 = ud(rng);
        const PitchGap pg =
            solve_pitch_gap(pitch_at(p, alpha, t, d1) / q, d1, pitch_at(p, alpha, t, d2) / q, d2, alpha, q);
        EXPECT_NEAR(pg.p / p, 1.0, 1e-9);
        EXPECT_NEAR(pg.t / t, 1.0, 1e-9);
    }
}

TEST(SolvePitchGap, DegenerateObservation) {
    const double alpha = deg_to_rad(18.0);
    for (auto [h1, d1, h2, d2] : {std::array<double, 4>{7.0, 700.0, 7.0, 700.0}, std::array<double, 4>{7.0, 700.0, 10.0, 1000.0}}) {
        try {
            solve_pitch_gap(h1, d1, h2, d2, alpha);
            FAIL() << "expected DegenerateObservation";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DegenerateObservation);
        }
    }
}

TEST(AnalysisGrid, FftFriendlySizes) {
    EXPECT_EQ(fft_friendly(1), 1);
    EXPECT_EQ(fft_friendly(11), 12);
    EXPECT_EQ(fft_friendly(97), 98);
    EXPECT_EQ(fft_friendly(1021), 1024);
    for (int n = 1; n < 3000; n += 37) {
        int r = fft_friendly(n);
        EXPECT_GE(r, n);
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        EXPECT_EQ(r, 1);
    }
    const Corners c = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1000, 0), Eigen::Vector2d(1000, 500), Eigen::Vector2d(0, 500)};
    EXPECT_EQ(analysis_grid(c, 2048, 1.0), (std::pair<int, int>{1000, 500}));
    EXPECT_EQ(analysis_grid(c, 800, 1.0), (std::pair<int, int>{800, 400}));
    EXPECT_EQ(analysis_grid(c, 4096, 1.5), (std::pair<int, int>{1500, 750}));
    const Corners tiny = {Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), Eigen::Vector2d(10, 5), Eigen::Vector2d(0, 5)};
    EXPECT_THROW(analysis_grid(tiny, 2048), Error);
}

TEST(Calibrate, NoiselessFhdWithinBenchmarkBounds) {
    std::mt19937_64 rng(5);
    const DisplayParams truth = perturb_display(find_preset("FHD55B").designed(), 0.01, rng);
    const auto run = simulate_and_calibrate(truth, 700.0, 1000.0, 20.0, -15.0);
    const CalibrationResult& r = run.result;
    EXPECT_LE(std::abs(r.p - truth.p), 0.005);
    EXPECT_LE(std::abs(r.alpha_deg - truth.alpha_deg()), 1e-4);
    EXPECT_LE(std::abs(r.t - truth.t), 0.06);
    EXPECT_LE(std::abs(wrap_centered(r.sigma - truth.sigma, truth.slit_period())), 0.05);
    EXPECT_GT(r.sigma, -0.5 * truth.slit_period());
    EXPECT_LE(r.sigma, 0.5 * truth.slit_period());
}

TEST(Calibrate, PerViewPitchAndSlant) {
    const DisplayParams truth = fhd_params(0.5);
    const PanelGeometry& g = truth.panel;
    const CapturedImage cap = simulate_capture(make_calibration_multiplex(g.panel_w, g.panel_h), truth,
                                               frontal_pose(g, 12.0, 7.0, 700.0, 1920, 1080, 0.85), SimOptions{});
    CalibrationConfig cfg;
    cfg.panel = g;
    const ViewAnalysis va = analyze_view(Observation::from_capture(cap), cfg);
    const DerivedParams dp = derive(truth, 700.0);
    EXPECT_NEAR(va.match.h, dp.h, 0.01);
    EXPECT_NEAR(rad_to_deg(va.match.alpha), truth.alpha_deg(), 5e-4);
    EXPECT_NEAR(va.pose.d(), 700.0, 1e-3);
}

TEST(Calibrate, RecoversKnownOffset) {
    const DisplayParams truth = fhd_params(0.5);
    const auto run = simulate_and_calibrate(truth, 700.0, 1000.0, 0.0, 0.0);
    EXPECT_NEAR(wrap_centered(run.result.sigma - 0.5, truth.slit_period()), 0.0, 0.03);
}

TEST(Calibrate, ZeroOffsetFromTheAxis) {
    const DisplayParams truth = fhd_params(0.0);
    const auto run = simulate_and_calibrate(truth, 700.0, 1000.0, 0.0, 0.0);
    EXPECT_NEAR(run.result.gamma, 0.0, 1e-9);
    EXPECT_NEAR(wrap_centered(run.result.sigma, truth.slit_period()), 0.0, 0.03);
    const double h = run.result.h1;
    EXPECT_NEAR(std::min(run.result.rho, h - run.result.rho), 0.0, 0.03 / truth.panel.q);
}

TEST(EstimateOffset, ShiftingTheSamplesShiftsRho) {
    const DisplayParams truth = fhd_params(0.2);
    const PanelGeometry& g = truth.panel;
    const CapturedImage cap = simulate_capture(make_calibration_multiplex(g.panel_w, g.panel_h), truth,
                                               frontal_pose(g, 0.0, 0.0, 700.0, 1920, 1080, 0.85), SimOptions{});
    CalibrationConfig cfg;
    cfg.panel = g;
    const ViewAnalysis va = analyze_view(Observation::from_capture(cap), cfg);
    const DerivedParams dp = derive(truth, 700.0);
    OffsetGeometry geo;
    geo.h = dp.h;
    geo.alpha = truth.alpha;
    geo.gamma = view_of_position(0.0, 0.0, 700.0, truth).gamma;
    geo.d = 700.0;
    geo.t = truth.t;
    geo.q = g.q;
    const double eps = stripe_offset_centered(kPatternRed, g.panel_w);
    const OffsetEstimate base = estimate_offset(va.first.spectrum, kPatternRed.beta, eps, geo);
    EXPECT_NEAR(wrap_centered(base.rho - dp.rho, dp.h), 0.0, 0.15);
    for (double shift : {1.0, 2.5, -4.0, 7.0}) {
        SampleAxes axes = va.first.spectrum.axes();
        axes.x0 += shift;
        const Spectrum moved(va.first.spectrum.samples(), axes);
        const OffsetEstimate est = estimate_offset(moved, kPatternRed.beta, eps + shift, geo);
        EXPECT_NEAR(wrap_centered(est.rho - base.rho - shift, dp.h), 0.0, 1e-6) << shift;
    }
}

TEST(EstimateOffset, FlatSpectrumIsUndetectable) {
    const Spectrum flat = spectrum(Plane<double>(128, 96, 0.0));
    OffsetGeometry geo;
    geo.h = 7.0;
    geo.alpha = deg_to_rad(18.0);
    geo.d = 700.0;
    geo.t = 4.0;
    try {
        estimate_offset(flat, 15.0, 0.5, geo);
        FAIL() << "expected OffsetUndetectable";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OffsetUndetectable);
    }
}

TEST(Calibrate, IdenticalCapturesAreDegenerate) {
    const DisplayParams truth = fhd_params(0.3);
    const PanelGeometry& g = truth.panel;
    const CapturedImage cap = simulate_capture(make_calibration_multiplex(g.panel_w, g.panel_h), truth,
                                               frontal_pose(g, 5.0, 5.0, 800.0, 1920, 1080, 0.85), SimOptions{});
    CalibrationConfig cfg;
    cfg.panel = g;
    try {
        calibrate(Observation::from_capture(cap), Observation::from_capture(cap), cfg);
        FAIL() << "expected DegenerateObservation";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateObservation);
    }
}

TEST(Calibrate, StageLabelOnFailure) {
    const DisplayParams truth = fhd_params(0.3);
    const PanelGeometry& g = truth.panel;
    CapturedImage cap = simulate_capture(make_calibration_multiplex(g.panel_w, g.panel_h), truth,
                                         frontal_pose(g, 5.0, 5.0, 800.0, 1920, 1080, 0.85), SimOptions{});
    cap.corners[2] = Eigen::Vector2d(5000.0, 5000.0);
    CalibrationConfig cfg;
    cfg.panel = g;
    try {
        analyze_view(Observation::from_capture(cap), cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_FALSE(e.stage().empty());
    }
}

TEST(Calibrate, TwoDistancesSeparateTheAmbiguousPair) {
    const DisplayParams a = test_support::ambiguity_case(0.9975, 25.0);
    const DisplayParams b = test_support::ambiguity_case(0.9950, 50.0);
    const auto ra = simulate_and_calibrate(a, 700.0, 1000.0, 10.0, -5.0);
    const auto rb = simulate_and_calibrate(b, 700.0, 1000.0, 10.0, -5.0);
    EXPECT_NEAR(ra.result.t, 25.0, 1.0);
    EXPECT_NEAR(rb.result.t, 50.0, 1.0);
}

TEST(CalibrationResult, ReportAndCsv) {
    CalibrationResult r;
    r.p = 1.0;
    r.alpha_deg = 18.0;
    r.t = 4.0;
    r.sigma = 0.25;
    r.h1 = 5.0;
    r.h2 = 4.9;
    r.rho = 1.5;
    std::string header = CalibrationResult::csv_header();
    const std::string row = r.csv_row();
    for (const char* col : {"p", "alpha_deg", "t", "sigma", "h1", "h2", "rho", "match_dist", "residual1", "residual2"})
        EXPECT_NE(header.find(col), std::string::npos) << col;
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
    EXPECT_EQ(row.substr(0, 2), "1,");
    const std::string rep = r.report();
    EXPECT_NE(rep.find("p_mm=1\n"), std::string::npos);
    EXPECT_NE(rep.find("t_mm=4\n"), std::string::npos);
    EXPECT_NE(rep.find("sigma_mm=0.25\n"), std::string::npos);
}
