#include "dispcal/display_model.hpp"

#include "dispcal/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace dispcal {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::InvalidGeometry: return "invalid-geometry";
        case ErrorKind::DegenerateLattice: return "degenerate-lattice";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::SingularSystem: return "singular-system";
        case ErrorKind::IllConditioned: return "ill-conditioned";
        case ErrorKind::OutOfFrame: return "out-of-frame";
        case ErrorKind::UnreliablePeak: return "unreliable-peak";
        case ErrorKind::NoCandidate: return "no-candidate";
        case ErrorKind::AmbiguousCalibration: return "ambiguous-calibration";
        case ErrorKind::DegenerateObservation: return "degenerate-observation";
        case ErrorKind::OffsetUndetectable: return "offset-undetectable";
        case ErrorKind::NoPeaks: return "no-peaks";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

double wrap_positive(double value, double period) noexcept {
    double r = std::fmod(value, period);
    if (r < 0.0) r += period;
    if (r >= period) r = 0.0;  // fmod + period may round up to period
    return r;
}

double wrap_centered(double value, double period) noexcept {
    double r = wrap_positive(value, period);
    if (r > 0.5 * period) r -= period;
    return r;
}

void PanelGeometry::validate() const {
    if (panel_w <= 0 || panel_h <= 0)
        throw Error(ErrorKind::InvalidArgument, "panel resolution must be positive");
    if (panel_w % 3 != 0)
        throw Error(ErrorKind::InvalidArgument,
                    "panel width in subpixels must be divisible by 3");
    if (!(q > 0.0) || !(row_pitch > 0.0) || !std::isfinite(q) || !std::isfinite(row_pitch))
        throw Error(ErrorKind::InvalidArgument, "subpixel and row pitch must be positive");
}

DisplayParams DisplayParams::from_degrees(double p, double alpha_deg, double t, double sigma,
                                          const PanelGeometry& panel) {
    DisplayParams out;
    out.p = p;
    out.alpha = deg_to_rad(alpha_deg);
    out.t = t;
    out.panel = panel;
    if (!(p > 0.0) || !std::isfinite(p))
        throw Error(ErrorKind::InvalidArgument, "pitch must be positive");
    if (!std::isfinite(sigma)) throw Error(ErrorKind::InvalidArgument, "offset must be finite");
    if (!(out.alpha > 0.0) || !(out.alpha < 0.5 * kPi))
        throw Error(ErrorKind::InvalidArgument, "slant angle must lie in (0, 90) degrees");
    out.sigma = wrap_centered(sigma, out.slit_period());
    out.validate();
    return out;
}

void DisplayParams::validate() const {
    panel.validate();
    if (!(p > 0.0) || !std::isfinite(p))
        throw Error(ErrorKind::InvalidArgument, "pitch must be positive");
    if (!(t >= 0.0) || !std::isfinite(t))
        throw Error(ErrorKind::InvalidArgument, "gap must be non-negative");
    // alpha == 0 makes the lattice degenerate; it is rejected outright.
    if (!(alpha > 0.0) || !(alpha < 0.5 * kPi))
        throw Error(ErrorKind::InvalidArgument, "slant angle must lie in (0, 90) degrees");
    if (!(std::abs(sigma) < slit_period()))
        throw Error(ErrorKind::InvalidArgument, "offset must be smaller than the horizontal slit period");
}

DerivedParams DerivedParams::rendering(double h, double alpha, double rho, double row_scale) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw Error(ErrorKind::InvalidArgument, "rendering pitch must be positive");
    DerivedParams out;
    out.h = h;
    out.alpha = alpha;
    out.rho = wrap_positive(rho, h);
    out.d = 0.0;
    out.row_scale = row_scale;
    return out;
}

View View::normalized(double raw) noexcept { return View{wrap_positive(raw, 1.0)}; }

DerivedParams derive(const DisplayParams& params, double d) {
    if (!(d > params.t) || !std::isfinite(d))
        throw Error(ErrorKind::InvalidGeometry, "observation distance must exceed the gap");
    const double scale = d / (d - params.t);
    DerivedParams out;
    out.h = scale * (params.p / std::cos(params.alpha)) / params.panel.q;
    out.alpha = params.alpha;
    out.rho = wrap_positive(scale * params.sigma / params.panel.q, out.h);
    out.d = d;
    out.row_scale = params.panel.row_scale();
    return out;
}

View view_of_position(double u, double v, double d, const DisplayParams& params) {
    if (!(d > params.t))
        throw Error(ErrorKind::InvalidGeometry, "observation distance must exceed the gap");
    const double raw = params.t / (params.p * d) *
                       (v * std::sin(params.alpha) - u * std::cos(params.alpha));
    return View::normalized(raw);
}

View view_of_pixel(double x, double y, const DerivedParams& derived) noexcept {
    const double y_units = y * derived.row_scale;
    const double phase = wrap_positive(x - derived.rho - y_units * std::tan(derived.alpha), derived.h);
    return View::normalized(phase / derived.h);
}

Eigen::Vector2d LatticeModel::anchor() const {
    const double ta = std::tan(alpha);
    const double tr = std::tan(alpha_r);
    const double den = ta - tr;
    const double a_r = rho_r + gamma_prime * h_r;
    const double a = rho + gamma * h;
    return {(a_r * ta - a * tr) / den, (a_r - a) / den};
}

Eigen::Vector2d LatticeModel::generator_m() const {
    const double ta = std::tan(alpha);
    const double tr = std::tan(alpha_r);
    const double den = ta - tr;
    return {h_r * ta / den, h_r / den};
}

Eigen::Vector2d LatticeModel::generator_n() const {
    const double ta = std::tan(alpha);
    const double tr = std::tan(alpha_r);
    const double den = ta - tr;
    return {-h * tr / den, -h / den};
}

Eigen::Vector2d LatticeModel::point(long m, long n) const {
    return anchor() + static_cast<double>(m) * generator_m() +
           static_cast<double>(n) * generator_n();
}

LatticeModel make_lattice(const DerivedParams& actual, const DerivedParams& render,
                          View gamma, View gamma_prime) {
    const double den = std::tan(actual.alpha) - std::tan(render.alpha);
    if (std::abs(den) < 1e-12)
        throw Error(ErrorKind::DegenerateLattice,
                    "rendering and actual slants coincide; intersection is not a point lattice");
    LatticeModel out;
    out.h = actual.h;
    out.h_r = render.h;
    out.alpha = actual.alpha;
    out.alpha_r = render.alpha;
    out.rho = actual.rho;
    out.rho_r = render.rho;
    out.gamma = gamma.gamma;
    out.gamma_prime = gamma_prime.gamma;
    return out;
}

std::vector<Eigen::Vector2d> predict_lattice(const LatticeModel& lattice, const Region& region) {
    Eigen::Matrix2d basis;
    basis.col(0) = lattice.generator_m();
    basis.col(1) = lattice.generator_n();
    const Eigen::Matrix2d inv = basis.inverse();
    const Eigen::Vector2d origin = lattice.anchor();

    double m_lo = 1e300, m_hi = -1e300, n_lo = 1e300, n_hi = -1e300;
    for (const Eigen::Vector2d& corner :
         {Eigen::Vector2d(region.x0, region.y0), Eigen::Vector2d(region.x1, region.y0),
          Eigen::Vector2d(region.x1, region.y1), Eigen::Vector2d(region.x0, region.y1)}) {
        const Eigen::Vector2d mn = inv * (corner - origin);
        m_lo = std::min(m_lo, mn.x());
        m_hi = std::max(m_hi, mn.x());
        n_lo = std::min(n_lo, mn.y());
        n_hi = std::max(n_hi, mn.y());
    }

    std::vector<Eigen::Vector2d> points;
    for (long m = static_cast<long>(std::floor(m_lo)) - 1; m <= static_cast<long>(std::ceil(m_hi)) + 1; ++m) {
        for (long n = static_cast<long>(std::floor(n_lo)) - 1; n <= static_cast<long>(std::ceil(n_hi)) + 1; ++n) {
            const Eigen::Vector2d pt = lattice.point(m, n);
            if (region.contains(pt)) points.push_back(pt);
        }
    }
    std::sort(points.begin(), points.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    return points;
}

std::vector<Eigen::Vector2d> predict_lattice(const DerivedParams& actual,
                                             const DerivedParams& render, View gamma,
                                             View gamma_prime, const Region& region) {
    return predict_lattice(make_lattice(actual, render, gamma, gamma_prime), region);
}

bool check_rendering_correct(const DerivedParams& actual, const DerivedParams& render,
                             double tol) noexcept {
    if (std::abs(actual.h - render.h) > tol) return false;
    if (std::abs(actual.alpha - render.alpha) > tol) return false;
    return std::abs(wrap_centered(actual.rho - render.rho, actual.h)) <= tol;
}

}  // namespace dispcal
