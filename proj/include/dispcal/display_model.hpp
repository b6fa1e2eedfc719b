#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace dispcal {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) noexcept { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / kPi; }

/// Reduces value into [0, period).
double wrap_positive(double value, double period) noexcept;
/// Reduces value into (-period/2, period/2].
double wrap_centered(double value, double period) noexcept;

/// Panel raster geometry. x runs over subpixel columns, y over rows; the
/// panel-plane frame used throughout has its origin at the panel center,
/// x to the right and y downwards.
struct PanelGeometry {
    int panel_w = 0;         ///< subpixel columns (3 per RGB pixel)
    int panel_h = 0;         ///< rows
    double q = 0.0;          ///< mm per subpixel column
    double row_pitch = 0.0;  ///< mm per row

    void validate() const;

    double width_mm() const noexcept { return panel_w * q; }
    double height_mm() const noexcept { return panel_h * row_pitch; }
    /// Rows expressed in subpixel-column units.
    double row_scale() const noexcept { return row_pitch / q; }

    /// Center of column `col` in the centered frame, subpixel units.
    double column_center(int col) const noexcept { return col + 0.5 - 0.5 * panel_w; }
    /// Center of row `row` in the centered frame, rows.
    double row_center(int row) const noexcept { return row + 0.5 - 0.5 * panel_h; }
};

/// Physical display parameters: pitch, slant, gap and offset of the optical
/// element plus the panel geometry. Angles are radians internally.
struct DisplayParams {
    double p = 0.0;      ///< pitch, mm
    double alpha = 0.0;  ///< slant, radians, in (0, pi/2)
    double t = 0.0;      ///< gap panel-to-element, mm
    double sigma = 0.0;  ///< horizontal slit offset from panel center, mm
                         ///< normalized into (-P/2, P/2] with P = p / cos(alpha)
    PanelGeometry panel;

    /// Validates and normalizes sigma modulo the horizontal slit period.
    /// Throws Error(InvalidArgument).
    static DisplayParams from_degrees(double p, double alpha_deg, double t, double sigma,
                                      const PanelGeometry& panel);

    double alpha_deg() const noexcept { return rad_to_deg(alpha); }
    /// Horizontal distance between adjacent slit lines, mm.
    double slit_period() const noexcept { return p / std::cos(alpha); }
    void validate() const;
};

/// Observation-distance dependent parameters on the panel plane.
/// h and rho are in subpixel units; rho is normalized into [0, h).
struct DerivedParams {
    double h = 0.0;
    double alpha = 0.0;
    double rho = 0.0;
    double d = 0.0;
    double row_scale = 1.0;  ///< subpixel units per row

    /// Builds rendering parameters directly (no physical display behind them).
    static DerivedParams rendering(double h, double alpha, double rho, double row_scale = 1.0);
};

struct View {
    double gamma = 0.0;  ///< in [0, 1)

    static View normalized(double raw) noexcept;
};

/// Point lattice formed by intersecting the rendered view set of `render`
/// with the visible set of `actual`. All coordinates are subpixel units in
/// both axes (rows already multiplied by row_scale).
struct LatticeModel {
    double h = 0.0, h_r = 0.0;
    double alpha = 0.0, alpha_r = 0.0;
    double rho = 0.0, rho_r = 0.0;
    double gamma = 0.0, gamma_prime = 0.0;

    Eigen::Vector2d anchor() const;       ///< point (m, n) = (0, 0)
    Eigen::Vector2d generator_m() const;  ///< step for m -> m + 1
    Eigen::Vector2d generator_n() const;  ///< step for n -> n + 1
    Eigen::Vector2d point(long m, long n) const;
};

/// Axis-aligned rectangle [x0, x1] x [y0, y1] in subpixel units.
struct Region {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    bool contains(const Eigen::Vector2d& pt) const noexcept {
        return pt.x() >= x0 && pt.x() <= x1 && pt.y() >= y0 && pt.y() <= y1;
    }
};

/// h and rho at observation distance d. Throws InvalidGeometry unless d > t.
DerivedParams derive(const DisplayParams& params, double d);

/// View seen from eye/camera position (u, v) mm at distance d mm.
View view_of_position(double u, double v, double d, const DisplayParams& params);

/// View assigned to panel point (x subpixels, y rows), both in the centered frame.
View view_of_pixel(double x, double y, const DerivedParams& derived) noexcept;

/// Throws DegenerateLattice when the two slopes coincide.
LatticeModel make_lattice(const DerivedParams& actual, const DerivedParams& render,
                          View gamma, View gamma_prime);

/// All lattice points inside `region`, sorted lexicographically by (x, y).
std::vector<Eigen::Vector2d> predict_lattice(const DerivedParams& actual,
                                             const DerivedParams& render, View gamma,
                                             View gamma_prime, const Region& region);
std::vector<Eigen::Vector2d> predict_lattice(const LatticeModel& lattice, const Region& region);

/// True when rendering with `render` assigns every visible pixel its correct view,
/// i.e. h and alpha agree and rho agrees modulo h.
bool check_rendering_correct(const DerivedParams& actual, const DerivedParams& render,
                             double tol = 1e-9) noexcept;

}  // namespace dispcal
