#pragma once

#include "dispcal/image.hpp"

#include <Eigen/Core>

#include <array>

namespace dispcal {

using Corners = std::array<Eigen::Vector2d, 4>;  ///< TL, TR, BR, BL

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
struct Intrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;             ///< image size in pixels
    std::array<double, 2> radial{0.0, 0.0};  ///< must stay zero; distortion is not modelled

    Eigen::Matrix3d matrix() const;
    void validate() const;
};

/// Plane-to-image projective map, normalized so that h33 = 1 when nonzero.
struct Homography {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

    static Homography normalized(const Eigen::Matrix3d& raw);
    Eigen::Vector2d apply(const Eigen::Vector2d& pt) const;
    Homography inverse() const;
};

/// Camera rotation (world to camera) and position. The world frame is the
/// panel frame in mm: origin at the panel center, X right, Y down, Z into the
/// panel. The camera center is at (u, v, -d).
struct CameraPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d position = Eigen::Vector3d(0.0, 0.0, 1000.0);  ///< (u, v, d) mm
    Intrinsics intrinsics;

    double u() const noexcept { return position.x(); }
    double v() const noexcept { return position.y(); }
    double d() const noexcept { return position.z(); }

    Eigen::Vector3d center_world() const { return {position.x(), position.y(), -position.z()}; }
    Eigen::Vector3d translation() const { return -rotation * center_world(); }

    /// Panel plane (mm) to image (px).
    Homography homography() const;
    Eigen::Vector2d project(const Eigen::Vector2d& panel_mm) const;
    void validate() const;
};

/// Outer panel corners in the panel frame (mm), TL, TR, BR, BL.
Corners panel_corners_mm(double width_mm, double height_mm);

/// Exact four-point direct linear transform. Throws SingularSystem when three
/// points of either set are collinear.
Homography homography_from_corners(const Corners& world, const Corners& image);

/// Recovers rotation and camera position from a plane homography and known
/// intrinsics. Picks the solution with the camera in front of the panel.
CameraPose decompose(const Homography& h, const Intrinsics& k);

/// Rotation angle of R in degrees.
double rotation_angle_deg(const Eigen::Matrix3d& r);

/// Inverse-warps the quadrilateral `corners` (image order TL, TR, BR, BL) onto an
/// out_w x out_h grid with bilinear sampling. `flip` mirrors the output
/// horizontally. Throws OutOfFrame when a corner lies outside the image.
RgbImage<float> rectify(const RgbImage<float>& capture, const Corners& corners, int out_w,
                        int out_h, bool flip = false);
Plane<float> rectify(const Plane<float>& capture, const Corners& corners, int out_w, int out_h,
                     bool flip = false);

}  // namespace dispcal
