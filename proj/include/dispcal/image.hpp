#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dispcal {

/// Single-channel raster, row-major, top-left origin.
template <typename T>
class Plane {
public:
    Plane() = default;
    Plane(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

    std::span<T> row(int y) noexcept {
        return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
    }
    std::span<const T> row(int y) const noexcept {
        return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool same_shape(const Plane& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Three co-registered planes (R, G, B).
template <typename T>
struct RgbImage {
    std::array<Plane<T>, 3> planes;

    RgbImage() = default;
    RgbImage(int width, int height, T fill = T{})
        : planes{Plane<T>(width, height, fill), Plane<T>(width, height, fill),
                 Plane<T>(width, height, fill)} {}

    int width() const noexcept { return planes[0].width(); }
    int height() const noexcept { return planes[0].height(); }
    Plane<T>& operator[](int c) noexcept { return planes[static_cast<std::size_t>(c)]; }
    const Plane<T>& operator[](int c) const noexcept {
        return planes[static_cast<std::size_t>(c)];
    }
};

}  // namespace dispcal
