#include "dispcal/presets.hpp"

#include "dispcal/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dispcal {

PanelGeometry DisplayPreset::geometry() const {
    const double pixel_pitch =
        diagonal_in * 25.4 / std::hypot(static_cast<double>(pixels_w), static_cast<double>(pixels_h));
    PanelGeometry g;
    g.panel_w = pixels_w * 3;
    g.panel_h = pixels_h;
    g.q = pixel_pitch / 3.0;
    g.row_pitch = pixel_pitch;
    return g;
}

DisplayParams DisplayPreset::designed() const {
    return DisplayParams::from_degrees(p, alpha_deg, t, sigma, geometry());
}

const std::vector<DisplayPreset>& builtin_presets() {
    static const std::vector<DisplayPreset> presets = {
        {"FHD55B", 55.0, 1920, 1080, OpticsKind::Barrier, 1.0, 18.0, 4.0, 0.5},
        {"UHD32B", 32.0, 3840, 2160, OpticsKind::Barrier, 0.5, 10.0, 2.0, 0.2},
        {"WQXGA10L", 10.0, 2560, 1600, OpticsKind::Lenticular, 0.1, 12.0, 1.0, 0.05},
    };
    return presets;
}

const DisplayPreset& find_preset(std::string_view name) {
    auto upper = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        return out;
    };
    const std::string key = upper(name);
    for (const auto& preset : builtin_presets())
        if (upper(preset.name) == key) return preset;
    throw Error(ErrorKind::Config, "unknown display preset '" + std::string(name) + "'");
}

}  // namespace dispcal
