#include "dispcal/camera_pose.hpp"

#include "dispcal/error.hpp"
#include "dispcal/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace dispcal {
namespace {

bool has_collinear_triple(const Corners& pts) {
    double scale = 0.0;
    for (const auto& a : pts)
        for (const auto& b : pts) scale = std::max(scale, (a - b).norm());
    if (scale == 0.0) return true;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k) {
                const Eigen::Vector2d ab = pts[j] - pts[i];
                const Eigen::Vector2d ac = pts[k] - pts[i];
                const double cross = ab.x() * ac.y() - ab.y() * ac.x();
                if (std::abs(cross) < 1e-9 * scale * scale) return true;
            }
    return false;
}

// Similarity taking the points to zero mean and mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const Corners& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= 4.0;
    double dist = 0.0;
    for (const auto& p : pts) dist += (p - mean).norm();
    dist /= 4.0;
    const double s = std::sqrt(2.0) / dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return t;
}

double bilinear(const Plane<float>& img, double x, double y) {
    const int w = img.width();
    const int h = img.height();
    if (x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5) return 0.0;
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = std::min(static_cast<int>(x), w - 2 < 0 ? 0 : w - 2);
    const int y0 = std::min(static_cast<int>(y), h - 2 < 0 ? 0 : h - 2);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img(x0, y0) * (1.0 - fx) + img(x1, y0) * fx;
    const double bot = img(x0, y1) * (1.0 - fx) + img(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

Plane<float> box_downsample(const Plane<float>& src, int k) {
    const int w = src.width() / k;
    const int h = src.height() / k;
    Plane<float> out(w, h);
    const float norm = 1.0f / static_cast<float>(k * k);
    parallel_for(0, static_cast<std::size_t>(h), [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int j = 0; j < k; ++j)
                for (int i = 0; i < k; ++i) acc += src(x * k + i, y * k + j);
            out(x, y) = acc * norm;
        }
    });
    return out;
}

void check_corners_in_frame(const Corners& corners, int width, int height) {
    for (const auto& c : corners) {
        if (!std::isfinite(c.x()) || !std::isfinite(c.y()) || c.x() < -0.5 || c.y() < -0.5 ||
            c.x() > width - 0.5 || c.y() > height - 0.5)
            throw Error(ErrorKind::OutOfFrame, "panel corner lies outside the captured frame");
    }
}

}  // namespace

Eigen::Matrix3d Intrinsics::matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
}

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::InvalidArgument, "image size must be positive");
    if (radial[0] != 0.0 || radial[1] != 0.0)
        throw Error(ErrorKind::InvalidArgument, "radial distortion is not supported");
}

Homography Homography::normalized(const Eigen::Matrix3d& raw) {
    Homography h;
    h.m = raw;
    if (std::abs(raw(2, 2)) > 1e-15) h.m /= raw(2, 2);
    return h;
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d& pt) const {
    const Eigen::Vector3d r = m * Eigen::Vector3d(pt.x(), pt.y(), 1.0);
    return r.hnormalized();
}

Homography Homography::inverse() const { return normalized(m.inverse()); }

Homography CameraPose::homography() const {
    Eigen::Matrix3d rt;
    rt.col(0) = rotation.col(0);
    rt.col(1) = rotation.col(1);
    rt.col(2) = translation();
    return Homography::normalized(intrinsics.matrix() * rt);
}

Eigen::Vector2d CameraPose::project(const Eigen::Vector2d& panel_mm) const {
    const Eigen::Vector3d cam = rotation * (Eigen::Vector3d(panel_mm.x(), panel_mm.y(), 0.0) - center_world());
    const Eigen::Vector3d img = intrinsics.matrix() * cam;
    return img.hnormalized();
}

void CameraPose::validate() const {
    intrinsics.validate();
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw Error(ErrorKind::InvalidArgument, "rotation is not a proper orthonormal matrix");
    if (!(d() > 0.0)) throw Error(ErrorKind::InvalidGeometry, "camera must be in front of the panel");
}

Corners panel_corners_mm(double width_mm, double height_mm) {
    const double hw = 0.5 * width_mm;
    const double hh = 0.5 * height_mm;
    return {Eigen::Vector2d(-hw, -hh), Eigen::Vector2d(hw, -hh), Eigen::Vector2d(hw, hh),
            Eigen::Vector2d(-hw, hh)};
}

Homography homography_from_corners(const Corners& world, const Corners& image) {
    if (has_collinear_triple(world) || has_collinear_triple(image))
        throw Error(ErrorKind::SingularSystem, "three of the four correspondences are collinear");

    const Eigen::Matrix3d tw = normalizing_transform(world);
    const Eigen::Matrix3d ti = normalizing_transform(image);
    Eigen::Matrix<double, 8, 9> a;
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector2d w = (tw * world[i].homogeneous()).hnormalized();
        const Eigen::Vector2d p = (ti * image[i].homogeneous()).hnormalized();
        a.row(2 * i) << w.x(), w.y(), 1, 0, 0, 0, -p.x() * w.x(), -p.x() * w.y(), -p.x();
        a.row(2 * i + 1) << 0, 0, 0, w.x(), w.y(), 1, -p.y() * w.x(), -p.y() * w.y(), -p.y();
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(7) < 1e-12 * sv(0))
        throw Error(ErrorKind::SingularSystem, "homography system is rank deficient");
    const Eigen::Matrix<double, 9, 1> v = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
    return Homography::normalized(ti.inverse() * hn * tw);
}

CameraPose decompose(const Homography& h, const Intrinsics& k) {
    k.validate();
    const Eigen::Matrix3d m = k.matrix().inverse() * h.m;
    const double n1 = m.col(0).norm();
    const double n2 = m.col(1).norm();
    if (!(n1 > 1e-15) || !(n2 > 1e-15) || n1 / n2 > 2.0 || n2 / n1 > 2.0 ||
        !m.allFinite())
        throw Error(ErrorKind::IllConditioned, "homography is inconsistent with the intrinsics");

    double lambda = 1.0 / n1;
    if (m(2, 2) * lambda < 0.0) lambda = -lambda;  // panel must sit in front of the camera

    Eigen::Matrix3d r;
    r.col(0) = lambda * m.col(0);
    r.col(1) = lambda * m.col(1);
    r.col(2) = r.col(0).cross(r.col(1));
    const Eigen::Vector3d t = lambda * m.col(2);

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d rot = svd.matrixU() * svd.matrixV().transpose();
    if (rot.determinant() < 0.0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) = -u.col(2);
        rot = u * svd.matrixV().transpose();
    }

    CameraPose pose;
    pose.rotation = rot;
    pose.intrinsics = k;
    const Eigen::Vector3d c = -rot.transpose() * t;
    pose.position = Eigen::Vector3d(c.x(), c.y(), -c.z());
    if (!(pose.d() > 0.0))
        throw Error(ErrorKind::IllConditioned, "decomposition places the camera behind the panel");
    return pose;
}

double rotation_angle_deg(const Eigen::Matrix3d& r) {
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    // acos loses precision near zero; use the skew part there.
    const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double s = 0.5 * w.norm();
    return std::atan2(s, c) * 180.0 / 3.14159265358979323846;
}

Plane<float> rectify(const Plane<float>& capture, const Corners& corners, int out_w, int out_h,
                     bool flip) {
    if (out_w <= 0 || out_h <= 0)
        throw Error(ErrorKind::InvalidArgument, "rectified size must be positive");
    check_corners_in_frame(corners, capture.width(), capture.height());

    // Decimating by 2x or more aliases under plain bilinear sampling; box-filter first.
    const double span_x = std::max((corners[1] - corners[0]).norm(), (corners[2] - corners[3]).norm());
    const double span_y = std::max((corners[3] - corners[0]).norm(), (corners[2] - corners[1]).norm());
    const int factor = static_cast<int>(std::floor(std::min(span_x / out_w, span_y / out_h)));
    const Plane<float>* src = &capture;
    Plane<float> reduced;
    Corners src_corners = corners;
    if (factor >= 2) {
        reduced = box_downsample(capture, factor);
        src = &reduced;
        const double shift = 0.5 * (factor - 1);
        for (auto& c : src_corners) c = (c.array() - shift) / factor;
    }

    const Corners grid = {Eigen::Vector2d(0, 0), Eigen::Vector2d(out_w, 0),
                          Eigen::Vector2d(out_w, out_h), Eigen::Vector2d(0, out_h)};
    const Homography g = homography_from_corners(grid, src_corners);

    Plane<float> out(out_w, out_h);
    parallel_for(0, static_cast<std::size_t>(out_h), [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < out_w; ++x) {
            const Eigen::Vector2d p = g.apply(Eigen::Vector2d(x + 0.5, y + 0.5));
            const int dst_x = flip ? out_w - 1 - x : x;
            out(dst_x, y) = static_cast<float>(bilinear(*src, p.x(), p.y()));
        }
    });
    return out;
}

RgbImage<float> rectify(const RgbImage<float>& capture, const Corners& corners, int out_w,
                        int out_h, bool flip) {
    RgbImage<float> out;
    for (int c = 0; c < 3; ++c) out[c] = rectify(capture[c], corners, out_w, out_h, flip);
    return out;
}

}  // namespace dispcal
