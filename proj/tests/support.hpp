#pragma once

#include "dispcal/camera_pose.hpp"
#include "dispcal/capture_sim.hpp"
#include "dispcal/display_model.hpp"
#include "dispcal/estimation.hpp"
#include "dispcal/harness.hpp"
#include "dispcal/panel_pattern.hpp"
#include "dispcal/presets.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

namespace dispcal::test_support {

/// A 13.3" 640x360 barrier display: small enough for sub-second simulations.
inline DisplayPreset small_preset() {
    return DisplayPreset{"SMALL", 13.3, 640, 360, OpticsKind::Barrier, 1.0, 18.0, 3.0, 0.2};
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("dispcal_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Image position of a centered panel point (subpixel column, row).
inline Eigen::Vector2d panel_to_image(const CameraPose& pose, const PanelGeometry& g, double x,
                                      double y_rows) {
    return pose.project(Eigen::Vector2d(x * g.q, y_rows * g.row_pitch));
}

struct Blob {
    Eigen::Vector2d centroid;
    double mass = 0.0;
    int pixels = 0;
};

/// Intensity-weighted centroids of 8-connected components above `threshold`.
inline std::vector<Blob> find_blobs(const Plane<float>& img, double threshold) {
    const int w = img.width();
    const int h = img.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<Blob> blobs;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto idx = static_cast<std::size_t>(y) * w + x;
            if (label[idx] >= 0 || img(x, y) <= threshold) continue;
            Blob b;
            Eigen::Vector2d acc(0, 0);
            label[idx] = static_cast<int>(blobs.size());
            stack.assign(1, {x, y});
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                const double v = img(cx, cy);
                acc += v * Eigen::Vector2d(cx, cy);
                b.mass += v;
                ++b.pixels;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const auto n = static_cast<std::size_t>(ny) * w + nx;
                        if (label[n] >= 0 || img(nx, ny) <= threshold) continue;
                        label[n] = label[idx];
                        stack.emplace_back(nx, ny);
                    }
            }
            b.centroid = acc / b.mass;
            blobs.push_back(b);
        }
    return blobs;
}

inline Plane<float> luminance(const RgbImage<float>& img) {
    Plane<float> out(img.width(), img.height());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = img[0].data()[i] + img[1].data()[i] + img[2].data()[i];
    return out;
}

inline float max_value(const Plane<float>& p) {
    return *std::max_element(p.data().begin(), p.data().end());
}

/// Pearson correlation of two equally sized planes.
inline double correlation(const Plane<float>& a, const Plane<float>& b) {
    double ma = 0, mb = 0;
    const auto n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a.data()[i];
        mb += b.data()[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a.data()[i] - ma, db = b.data()[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    return sab / std::sqrt(saa * sbb);
}

/// Distances (capture pixels) from each interior blob to the nearest predicted
/// lattice point. Blobs closer than `margin_px` to the panel outline are skipped.
inline std::vector<double> blob_lattice_distances(const std::vector<Blob>& blobs,
                                                  const std::vector<Eigen::Vector2d>& lattice,
                                                  const CameraPose& pose, const PanelGeometry& g,
                                                  double margin_px) {
    std::vector<Eigen::Vector2d> predicted;
    predicted.reserve(lattice.size());
    for (const auto& pt : lattice)
        predicted.push_back(panel_to_image(pose, g, pt.x(), pt.y() / g.row_scale()));
    const Eigen::Vector2d tl = panel_to_image(pose, g, -0.5 * g.panel_w, -0.5 * g.panel_h);
    const Eigen::Vector2d br = panel_to_image(pose, g, 0.5 * g.panel_w, 0.5 * g.panel_h);
    std::vector<double> out;
    for (const auto& b : blobs) {
        const auto& c = b.centroid;
        if (c.x() < tl.x() + margin_px || c.x() > br.x() - margin_px || c.y() < tl.y() + margin_px ||
            c.y() > br.y() - margin_px)
            continue;
        double best = 1e300;
        for (const auto& p : predicted) best = std::min(best, (p - c).norm());
        out.push_back(best);
    }
    return out;
}

/// Two noiseless multiplex captures of `params` from near-frontal poses at
/// distances d1 and d2, then calibrate.
struct PairRun {
    CapturedImage first, second;
    CalibrationResult result;
};

inline PairRun simulate_and_calibrate(const DisplayParams& params, double d1, double d2, double u, double v,
                                      int width = 1920, int height = 1080, const SimOptions& sim = {}) {
    const PanelGeometry& g = params.panel;
    const PanelImage panel = make_calibration_multiplex(g.panel_w, g.panel_h);
    PairRun run;
    run.first = simulate_capture(panel, params, frontal_pose(g, u, v, d1, width, height, 0.85), sim);
    run.second = simulate_capture(panel, params, frontal_pose(g, -v, u, d2, width, height, 0.85), sim);
    CalibrationConfig cfg;
    cfg.panel = g;
    run.result = calibrate(Observation::from_capture(run.first), Observation::from_capture(run.second), cfg);
    return run;
}

/// The single-distance ambiguity pair: p = k sqrt(10) mm, alpha = atan(1/3)
/// on a panel with 1 mm subpixels, so that both give h = 10/3 at 10 m.
inline PanelGeometry unit_subpixel_panel() {
    PanelGeometry g;
    g.panel_w = 1440;
    g.panel_h = 270;
    g.q = 1.0;
    g.row_pitch = 3.0;
    return g;
}

inline DisplayParams ambiguity_case(double k, double t) {
    return DisplayParams::from_degrees(k * std::sqrt(10.0), rad_to_deg(std::atan(1.0 / 3.0)), t, 0.0,
                                       unit_subpixel_panel());
}

}  // namespace dispcal::test_support
