#pragma once

#include "dispcal/camera_pose.hpp"
#include "dispcal/image.hpp"
#include "dispcal/panel_pattern.hpp"

#include <filesystem>

namespace dispcal {

/// 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const PanelImage& img);
PanelImage read_png_rgb8(const std::filesystem::path& path);

/// 16-bit RGB PNG, intensity scaled by 65535 and clamped to [0, 1].
void write_png16(const std::filesystem::path& path, const RgbImage<float>& img);
/// Reads 8- or 16-bit PNGs (gray or RGB) into [0, 1] floats.
RgbImage<float> read_png_float(const std::filesystem::path& path);

/// 8-bit grayscale PNG of `plane` linearly mapped from [lo, hi] to [0, 255].
void write_png_gray(const std::filesystem::path& path, const Plane<float>& plane, double lo,
                    double hi);

/// Corner sidecar: four lines "x y", TL TR BR BL.
void write_corners(const std::filesystem::path& path, const Corners& corners);
Corners read_corners(const std::filesystem::path& path);

}  // namespace dispcal
