#pragma once

#include "dispcal/display_model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dispcal {

enum class OpticsKind { Barrier, Lenticular };

/// A designed display: physical size, resolution and nominal parameters.
struct DisplayPreset {
    std::string name;
    double diagonal_in = 0.0;
    int pixels_w = 0;
    int pixels_h = 0;
    OpticsKind optics = OpticsKind::Barrier;
    double p = 0.0;          ///< mm
    double alpha_deg = 0.0;  ///< degrees
    double t = 0.0;          ///< mm
    double sigma = 0.0;      ///< mm

    /// Square pixels, three vertical RGB subpixel columns per pixel.
    PanelGeometry geometry() const;
    DisplayParams designed() const;
};

/// The three virtual displays used by the synthetic benchmark.
const std::vector<DisplayPreset>& builtin_presets();

/// Case-insensitive lookup; throws Error(Config) for unknown names.
const DisplayPreset& find_preset(std::string_view name);

}  // namespace dispcal
