#include "dispcal/estimation.hpp"

#include "dispcal/error.hpp"
#include "dispcal/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dispcal {
namespace {

template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), e.what(), stage);
    }
}

bool better_tie(const Intersection& a, const Intersection& b) {
    const int na = a.first.n + a.second.n, nb = b.first.n + b.second.n;
    if (na != nb) return na < nb;
    const int ma = std::abs(a.first.m) + std::abs(a.second.m);
    const int mb = std::abs(b.first.m) + std::abs(b.second.m);
    return ma < mb;
}

// Weighted mean removal, window, transform.
Spectrum analyse_plane(const Plane<float>& rectified, const SampleAxes& axes, double divisor) {
    const int w = rectified.width();
    const int h = rectified.height();
    Plane<double> img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = rectified.data()[i];
    const Plane<double> weights = apply_gaussian_window(Plane<double>(w, h, 1.0), w / divisor, h / divisor);
    double sw = 0.0, swi = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        sw += weights.data()[i];
        swi += weights.data()[i] * img.data()[i];
    }
    const double mean = swi / sw;
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data()[i] = (img.data()[i] - mean) * weights.data()[i];
    return Spectrum(std::move(img), axes);
}

std::vector<PeakMeasurement> strongest_peaks(const Spectrum& spec, const CalibrationConfig& cfg) {
    const auto coarse = detect_peaks(spec, cfg.dc_exclusion, 64);
    std::vector<PeakMeasurement> out;
    for (const Bin& b : coarse) {
        if (std::abs(b.ky) <= cfg.row_exclusion) continue;
        try {
            out.push_back(refine_peak(spec, b));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnreliablePeak) throw;
            continue;
        }
        if (static_cast<int>(out.size()) >= cfg.peak_retries) break;
    }
    if (out.empty()) throw Error(ErrorKind::NoPeaks, "no usable off-axis spectral peak");
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

std::vector<Candidate> candidate_set(const PeakMeasurement& peak, double beta,
                                     const CandidateBounds& bounds) {
    if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive", "candidates");
    double fx = peak.fx, fy = peak.fy;
    if (fy < 0.0) {
        fx = -fx;
        fy = -fy;
    }
    std::vector<Candidate> out;
    for (int n = 1; n <= bounds.max_n; ++n) {
        for (int m = -bounds.max_m; m <= bounds.max_m; ++m) {
            const double den = m / beta - fx;
            if (std::abs(den) < 1e-12) continue;
            const double h = n / den;
            const double alpha = std::atan(fy / den);
            if (!(h >= bounds.h_min && h <= bounds.h_max)) continue;
            if (!(alpha > 0.0 && alpha <= bounds.alpha_max)) continue;
            out.push_back({h, alpha, m, n});
        }
    }
    if (out.empty()) throw Error(ErrorKind::NoCandidate, "no (h, alpha) candidate within bounds", "candidates");
    return out;
}

Intersection intersect_candidates(std::span<const Candidate> c1, std::span<const Candidate> c2,
                                  double threshold, double alpha_scale) {
    if (c1.empty() || c2.empty())
        throw Error(ErrorKind::NoCandidate, "empty candidate set", "intersection");
    Intersection best;
    best.distance = std::numeric_limits<double>::infinity();
    for (const Candidate& a : c1) {
        for (const Candidate& b : c2) {
            const double hm = 0.5 * (a.h + b.h);
            const double dh = (a.h - b.h) / hm;
            const double da = (a.alpha - b.alpha) / alpha_scale;
            Intersection cur{0.5 * (a.h + b.h), 0.5 * (a.alpha + b.alpha), dh * dh + da * da, a, b};
            const double tol = std::isfinite(best.distance) ? 1e-12 * std::max(1.0, best.distance) : 0.0;
            if (cur.distance < best.distance - tol ||
                (std::abs(cur.distance - best.distance) <= tol && better_tie(cur, best)))
                best = cur;
        }
    }
    if (!(best.distance <= threshold))
        throw Error(ErrorKind::AmbiguousCalibration,
                    "closest candidate pair is " + fmt(best.distance) + " apart", "intersection");
    return best;
}

PitchGap solve_pitch_gap(double h1, double d1, double h2, double d2, double alpha, double q) {
    const double a = h1 * q, b = h2 * q;
    const double den = d2 * a - d1 * b;
    if (!(std::abs(den) > 1e-12 * (std::abs(d2 * a) + std::abs(d1 * b))) || d1 == d2)
        throw Error(ErrorKind::DegenerateObservation,
                    "the two observations carry no depth information", "pitch-gap");
    return {a * b * (d2 - d1) * std::cos(alpha) / den, d1 * d2 * (a - b) / den};
}

namespace {

// Complex weights B_n (n = 1..N) of the real objective F(psi) = Re sum_n B_n e^{-2 pi i n psi}.
std::vector<Complex> offset_weights(std::span<const OffsetChannel> channels,
                                    const OffsetGeometry& geo, const OffsetOptions& opts) {
    std::vector<Complex> b(static_cast<std::size_t>(opts.max_n), Complex(0.0, 0.0));
    const double tan_a = std::tan(geo.alpha);
    for (const OffsetChannel& ch : channels) {
        const Spectrum& spec = *ch.spectrum;
        for (int n = 1; n <= opts.max_n; ++n) {
            const double fy = n * tan_a / geo.h;
            if (std::abs(fy) > spec.nyquist_y()) continue;
            std::vector<double> fxs;
            std::vector<int> ms;
            for (int m = -opts.max_m; m <= opts.max_m; ++m) {
                const double fx = m / ch.beta - n / geo.h;
                if (std::abs(fx) > spec.nyquist_x()) continue;
                fxs.push_back(fx);
                ms.push_back(m);
            }
            const auto vals = sample_spectrum_row(spec, fxs, fy);
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const Complex panel = vals[i] * spec.panel_phase(fxs[i], fy);
                b[static_cast<std::size_t>(n - 1)] +=
                    panel * std::polar(1.0, 2.0 * kPi * ms[i] * ch.epsilon / ch.beta);
            }
        }
    }
    return b;
}

double evaluate(const std::vector<Complex>& b, double psi) {
    double f = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
        f += (b[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>(i + 1) * psi)).real();
    return f;
}

}  // namespace

double offset_objective(std::span<const OffsetChannel> channels, const OffsetGeometry& geo,
                        const OffsetOptions& opts, double psi) {
    return evaluate(offset_weights(channels, geo, opts), psi);
}

OffsetEstimate estimate_offset(std::span<const OffsetChannel> channels, const OffsetGeometry& geo,
                               const OffsetOptions& opts) {
    if (channels.empty()) throw Error(ErrorKind::InvalidArgument, "no channel", "offset");
    if (!(geo.h > 0.0) || !(geo.alpha > 0.0) || !(geo.d > geo.t))
        throw Error(ErrorKind::InvalidGeometry, "invalid pitch, slant or distance", "offset");
    if (opts.coarse_samples < 3 || opts.max_n < 1)
        throw Error(ErrorKind::InvalidArgument, "offset search needs samples and harmonics", "offset");
    const auto b = offset_weights(channels, geo, opts);

    const int n_coarse = opts.coarse_samples;
    double f_max = -std::numeric_limits<double>::infinity();
    double f_min = std::numeric_limits<double>::infinity();
    double abs_max = 0.0;
    int arg = 0;
    for (int i = 0; i < n_coarse; ++i) {
        const double f = evaluate(b, static_cast<double>(i) / n_coarse);
        if (f > f_max) {
            f_max = f;
            arg = i;
        }
        f_min = std::min(f_min, f);
        abs_max = std::max(abs_max, std::abs(f));
    }
    const double contrast = abs_max > 0.0 ? (f_max - f_min) / abs_max : 0.0;
    if (!(contrast > opts.flatness_threshold))
        throw Error(ErrorKind::OffsetUndetectable, "correlation objective is flat", "offset");

    // Golden-section refinement inside the bracketing coarse cells.
    const double step = 1.0 / n_coarse;
    double lo = (arg - 1) * step, hi = (arg + 1) * step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = evaluate(b, x1), f2 = evaluate(b, x2);
    for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = evaluate(b, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = evaluate(b, x1);
        }
    }
    const double psi = wrap_positive(0.5 * (lo + hi), 1.0);

    OffsetEstimate est;
    est.contrast = contrast;
    est.rho = wrap_positive((psi - geo.gamma) * geo.h, geo.h);
    est.tau = (channels.front().epsilon - est.rho - geo.gamma * geo.h) / std::tan(geo.alpha);
    est.sigma = (geo.d - geo.t) / geo.d * est.rho * geo.q;
    if (geo.period > 0.0) est.sigma = wrap_centered(est.sigma, geo.period);
    return est;
}

OffsetEstimate estimate_offset(const Spectrum& spec, double beta, double epsilon,
                               const OffsetGeometry& geo, const OffsetOptions& opts) {
    const OffsetChannel ch{&spec, beta, epsilon};
    return estimate_offset(std::span<const OffsetChannel>(&ch, 1), geo, opts);
}

int fft_friendly(int n) {
    n = std::max(n, 1);
    for (int k = n;; ++k) {
        int r = k;
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return k;
    }
}

std::pair<int, int> analysis_grid(const Corners& c, int cap, double oversample) {
    const double span_x = std::max((c[1] - c[0]).norm(), (c[2] - c[3]).norm());
    const double span_y = std::max((c[3] - c[0]).norm(), (c[2] - c[1]).norm());
    double sx = span_x * oversample, sy = span_y * oversample;
    const double longest = std::max(sx, sy);
    if (cap > 0 && longest > cap) {
        sx *= cap / longest;
        sy *= cap / longest;
    }
    int w = fft_friendly(static_cast<int>(std::lround(sx)));
    int h = fft_friendly(static_cast<int>(std::lround(sy)));
    if (w < 16 || h < 16) throw Error(ErrorKind::InvalidGeometry, "panel covers too few pixels", "rectify");
    return {w, h};
}

ViewAnalysis analyze_view(const Observation& obs, const CalibrationConfig& cfg) {
    if (!obs.image) throw Error(ErrorKind::InvalidArgument, "observation without image");
    const PanelGeometry& g = cfg.panel;
    g.validate();
    ViewAnalysis va;
    va.pose = staged("pose", [&] {
        const Homography h =
            homography_from_corners(panel_corners_mm(g.width_mm(), g.height_mm()), obs.corners);
        return decompose(h, obs.intrinsics);
    });
    std::tie(va.grid_w, va.grid_h) = analysis_grid(obs.corners, cfg.analysis_max, cfg.grid_oversample);

    SampleAxes axes;
    axes.dx = static_cast<double>(g.panel_w) / va.grid_w;
    axes.dy = g.panel_h * g.row_scale() / va.grid_h;
    axes.x0 = 0.5 * axes.dx - 0.5 * g.panel_w;
    axes.y0 = 0.5 * axes.dy - 0.5 * g.panel_h * g.row_scale();

    std::array<ChannelAnalysis*, 2> targets{&va.first, &va.second};
    const std::array<const PatternSpec*, 2> patterns{&cfg.first, &cfg.second};
    parallel_for(0, 2, [&](std::size_t i) {
        const PatternSpec& pat = *patterns[i];
        const std::string stage = i == 0 ? "spectral (first pattern)" : "spectral (second pattern)";
        staged(stage, [&] {
            const Plane<float> rect =
                rectify((*obs.image)[pat.channel], obs.corners, va.grid_w, va.grid_h, cfg.flip);
            targets[i]->spectrum = analyse_plane(rect, axes, cfg.window_divisor);
            targets[i]->peaks = strongest_peaks(targets[i]->spectrum, cfg);
            return 0;
        });
    });

    // Try peak pairs in order of combined rank.
    std::vector<std::pair<int, int>> order;
    for (int i = 0; i < static_cast<int>(va.first.peaks.size()); ++i)
        for (int j = 0; j < static_cast<int>(va.second.peaks.size()); ++j) order.emplace_back(i, j);
    std::stable_sort(order.begin(), order.end(), [](auto a, auto b) {
        return a.first + a.second < b.first + b.second;
    });
    std::optional<Error> last;
    for (auto [i, j] : order) {
        try {
            PeakMeasurement& p1 = va.first.peaks[static_cast<std::size_t>(i)];
            PeakMeasurement& p2 = va.second.peaks[static_cast<std::size_t>(j)];
            intersect_candidates(candidate_set(p1, cfg.first.beta, cfg.bounds),
                                 candidate_set(p2, cfg.second.beta, cfg.bounds), cfg.match_threshold);
            // The pair is consistent; sharpen both peaks on the exact transform.
            parallel_for(0, 2, [&](std::size_t k) {
                if (k == 0) p1 = polish_peak(va.first.spectrum, p1);
                else p2 = polish_peak(va.second.spectrum, p2);
            });
            va.match = intersect_candidates(candidate_set(p1, cfg.first.beta, cfg.bounds),
                                            candidate_set(p2, cfg.second.beta, cfg.bounds),
                                            cfg.match_threshold);
            return va;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoCandidate && e.kind() != ErrorKind::AmbiguousCalibration) throw;
            last = e;
        }
    }
    throw Error(last->kind(), last->what(), "lattice");
}

CalibrationResult calibrate(const Observation& first, const Observation& second,
                            const CalibrationConfig& cfg) {
    std::array<ViewAnalysis, 2> views;
    const std::array<const Observation*, 2> obs{&first, &second};
    parallel_for(0, 2, [&](std::size_t k) {
        views[k] = staged(k == 0 ? "view 1" : "view 2", [&] { return analyze_view(*obs[k], cfg); });
    });

    CalibrationResult r;
    r.pose1 = views[0].pose;
    r.pose2 = views[1].pose;
    r.d1 = r.pose1.d();
    r.d2 = r.pose2.d();
    r.h1 = views[0].match.h;
    r.h2 = views[1].match.h;
    r.alpha1_deg = rad_to_deg(views[0].match.alpha);
    r.alpha2_deg = rad_to_deg(views[1].match.alpha);
    r.match_dist = std::max(views[0].match.distance, views[1].match.distance);
    r.residual1 = std::max(views[0].first.peaks.front().residual, views[0].second.peaks.front().residual);
    r.residual2 = std::max(views[1].first.peaks.front().residual, views[1].second.peaks.front().residual);
    r.match1_first = views[0].match.first;
    r.match1_second = views[0].match.second;
    r.match2_first = views[1].match.first;
    r.match2_second = views[1].match.second;

    const double alpha = 0.5 * (views[0].match.alpha + views[1].match.alpha);
    r.alpha_deg = rad_to_deg(alpha);
    const PitchGap pg = solve_pitch_gap(r.h1, r.d1, r.h2, r.d2, alpha, cfg.panel.q);
    r.p = pg.p;
    r.t = pg.t;
    if (!(r.p > 0.0) || !(r.t < r.d1) || !(r.t < r.d2))
        throw Error(ErrorKind::DegenerateObservation, "pitch/gap solution is not physical", "pitch-gap");

    r.gamma = staged("offset", [&] {
        return wrap_positive(r.t / (r.p * r.d1) *
                                 (r.pose1.v() * std::sin(alpha) - r.pose1.u() * std::cos(alpha)),
                             1.0);
    });
    OffsetGeometry geo;
    geo.h = r.h1;
    geo.alpha = alpha;
    geo.gamma = r.gamma;
    geo.d = r.d1;
    geo.t = r.t;
    geo.q = cfg.panel.q;
    geo.period = r.p / std::cos(alpha);
    const std::array<OffsetChannel, 2> channels{
        OffsetChannel{&views[0].first.spectrum, static_cast<double>(cfg.first.beta),
                      stripe_offset_centered(cfg.first, cfg.panel.panel_w)},
        OffsetChannel{&views[0].second.spectrum, static_cast<double>(cfg.second.beta),
                      stripe_offset_centered(cfg.second, cfg.panel.panel_w)}};
    const OffsetEstimate off = staged("offset", [&] { return estimate_offset(channels, geo, cfg.offset); });
    r.rho = off.rho;
    r.tau = off.tau;
    r.sigma = off.sigma;
    r.offset_contrast = off.contrast;
    return r;
}

std::string CalibrationResult::report() const {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "p_mm=" << p << '\n'
       << "alpha_deg=" << alpha_deg << '\n'
       << "t_mm=" << t << '\n'
       << "sigma_mm=" << sigma << '\n'
       << "h1=" << h1 << '\n'
       << "h2=" << h2 << '\n'
       << "alpha1_deg=" << alpha1_deg << '\n'
       << "alpha2_deg=" << alpha2_deg << '\n'
       << "rho=" << rho << '\n'
       << "tau=" << tau << '\n'
       << "gamma=" << gamma << '\n'
       << "d1_mm=" << d1 << '\n'
       << "d2_mm=" << d2 << '\n'
       << "pose1_uvd=" << pose1.u() << ',' << pose1.v() << ',' << pose1.d() << '\n'
       << "pose2_uvd=" << pose2.u() << ',' << pose2.v() << ',' << pose2.d() << '\n'
       << "match_dist=" << match_dist << '\n'
       << "match1_mn=" << match1_first.m << ',' << match1_first.n << ';' << match1_second.m << ','
       << match1_second.n << '\n'
       << "match2_mn=" << match2_first.m << ',' << match2_first.n << ';' << match2_second.m << ','
       << match2_second.n << '\n'
       << "residual1=" << residual1 << '\n'
       << "residual2=" << residual2 << '\n'
       << "offset_contrast=" << offset_contrast << '\n'
       << "offset_source=capture1\n";
    return os.str();
}

std::string CalibrationResult::csv_header() {
    return "p,alpha_deg,t,sigma,h1,h2,rho,match_dist,residual1,residual2";
}

std::string CalibrationResult::csv_row() const {
    std::ostringstream os;
    os << std::setprecision(12) << p << ',' << alpha_deg << ',' << t << ',' << sigma << ',' << h1
       << ',' << h2 << ',' << rho << ',' << match_dist << ',' << residual1 << ',' << residual2;
    return os.str();
}

}  // namespace dispcal
