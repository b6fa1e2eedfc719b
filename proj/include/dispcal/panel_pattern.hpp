#pragma once

#include "dispcal/display_model.hpp"
#include "dispcal/image.hpp"

#include <cstdint>
#include <span>

namespace dispcal {

/// Panel content on the subpixel raster: width = subpixel columns, three 8-bit planes.
using PanelImage = RgbImage<std::uint8_t>;

/// One vertical stripe pattern: columns x with (x - epsilon) mod beta == 0 are lit.
struct PatternSpec {
    int beta = 15;      ///< stripe spacing in subpixels, multiple of 3
    int epsilon = 0;    ///< stripe offset in subpixels, [0, beta)
    int channel = 0;    ///< 0 = R, 1 = G, 2 = B
    int stripe_width = 1;  ///< lit columns per period; 1 is the ideal comb

    void validate() const;
};

/// The two multiplexed calibration patterns (R: beta 15, eps 0; G: beta 24, eps 1).
inline constexpr PatternSpec kPatternRed{15, 0, 0, 1};
inline constexpr PatternSpec kPatternGreen{24, 1, 1, 1};

PanelImage make_stripes(const PatternSpec& spec, int width, int height);

/// Both calibration patterns on one panel, blue left dark.
PanelImage make_calibration_multiplex(int width, int height);

/// Rendering parameters (h_r = beta, alpha_r = 0, rho_r = epsilon) expressed in the
/// centered panel frame for a panel `width` subpixels wide.
DerivedParams stripe_rendering(const PatternSpec& spec, int width, double row_scale = 1.0);

/// Stripe offset of `spec` in the centered frame (subpixel units, [0, beta)).
double stripe_offset_centered(const PatternSpec& spec, int width) noexcept;

/// View bin of every subpixel under `render`, with `views` equal bins over [0, 1).
int view_bin(double gamma, int views) noexcept;

/// Multiplexes view images: each subpixel copies the view image whose bin
/// contains its view under `render`. Throws on empty input or mismatched sizes.
PanelImage interleave_views(std::span<const PanelImage> views, const DerivedParams& render);

}  // namespace dispcal
