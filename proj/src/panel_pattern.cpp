#include "dispcal/panel_pattern.hpp"

#include "dispcal/error.hpp"

#include <cmath>
#include <string>

namespace dispcal {
namespace {

void check_panel_size(int width, int height) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::DimensionMismatch, "panel size must be positive");
    if (width % 3 != 0)
        throw Error(ErrorKind::DimensionMismatch, "panel width must be a multiple of 3 subpixels");
}

void paint_stripes(PanelImage& img, const PatternSpec& spec) {
    auto& plane = img[spec.channel];
    for (int y = 0; y < img.height(); ++y) {
        auto row = plane.row(y);
        for (int x = 0; x < img.width(); ++x) {
            const int phase = ((x - spec.epsilon) % spec.beta + spec.beta) % spec.beta;
            if (phase < spec.stripe_width) row[static_cast<std::size_t>(x)] = 255;
        }
    }
}

}  // namespace

void PatternSpec::validate() const {
    if (beta < 3 || beta % 3 != 0)
        throw Error(ErrorKind::InvalidArgument, "stripe spacing must be a positive multiple of 3");
    if (epsilon < 0 || epsilon >= beta)
        throw Error(ErrorKind::InvalidArgument, "stripe offset must lie in [0, beta)");
    if (channel < 0 || channel > 2)
        throw Error(ErrorKind::InvalidArgument, "channel must be 0, 1 or 2");
    if (stripe_width < 1 || stripe_width >= beta)
        throw Error(ErrorKind::InvalidArgument, "stripe width must lie in [1, beta)");
}

PanelImage make_stripes(const PatternSpec& spec, int width, int height) {
    spec.validate();
    check_panel_size(width, height);
    PanelImage img(width, height);
    paint_stripes(img, spec);
    return img;
}

PanelImage make_calibration_multiplex(int width, int height) {
    check_panel_size(width, height);
    PanelImage img(width, height);
    paint_stripes(img, kPatternRed);
    paint_stripes(img, kPatternGreen);
    return img;
}

double stripe_offset_centered(const PatternSpec& spec, int width) noexcept {
    // Column x has its center at x + 0.5 - width / 2 in the centered frame.
    return wrap_positive(spec.epsilon + 0.5 - 0.5 * width, spec.beta);
}

DerivedParams stripe_rendering(const PatternSpec& spec, int width, double row_scale) {
    spec.validate();
    return DerivedParams::rendering(spec.beta, 0.0, stripe_offset_centered(spec, width), row_scale);
}

int view_bin(double gamma, int views) noexcept {
    // Values a hair below a bin edge are treated as lying on it.
    int bin = static_cast<int>(std::floor(gamma * views + 1e-9));
    return ((bin % views) + views) % views;
}

PanelImage interleave_views(std::span<const PanelImage> views, const DerivedParams& render) {
    if (views.empty()) throw Error(ErrorKind::InvalidArgument, "no view images to interleave");
    const int width = views.front().width();
    const int height = views.front().height();
    check_panel_size(width, height);
    for (const auto& v : views)
        if (v.width() != width || v.height() != height)
            throw Error(ErrorKind::DimensionMismatch, "view images differ in size");

    const int n = static_cast<int>(views.size());
    const double tan_a = std::tan(render.alpha);
    PanelImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const double yc = (y + 0.5 - 0.5 * height) * render.row_scale;
        for (int x = 0; x < width; ++x) {
            const double xc = x + 0.5 - 0.5 * width;
            const double phase = wrap_positive(xc - render.rho - yc * tan_a, render.h);
            const int k = view_bin(phase / render.h, n);
            const auto& src = views[static_cast<std::size_t>(k)];
            for (int c = 0; c < 3; ++c) out[c](x, y) = src[c](x, y);
        }
    }
    return out;
}

}  // namespace dispcal
