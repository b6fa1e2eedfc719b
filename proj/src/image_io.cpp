#include "dispcal/image_io.hpp"

#include "dispcal/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <vector>

namespace dispcal {
namespace {

constexpr const char* kStage = "image-io";

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string(), kStage);
    return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    png_longjmp(png, 1);
}

// Writes rows of `bytes_per_row` bytes produced by fill(y, buffer).
template <typename Fill>
void write_rows(const std::filesystem::path& path, int width, int height, int depth, int color,
                std::size_t bytes_per_row, Fill&& fill) {
    auto file = open_file(path, "wb");
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    if (!png) throw Error(ErrorKind::Io, "png_create_write_struct failed", kStage);
    png_infop info = png_create_info_struct(png);
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(height),
                                            std::vector<png_byte>(bytes_per_row));
    for (int y = 0; y < height; ++y) fill(y, rows[static_cast<std::size_t>(y)].data());
    std::vector<png_bytep> ptrs;
    for (auto& r : rows) ptrs.push_back(r.data());
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "writing " + path.string() + ": " + message, kStage);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
                 color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct Decoded {
    int width = 0, height = 0, channels = 0, depth = 0;
    std::vector<std::vector<png_byte>> rows;
};

Decoded decode(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    if (!png) throw Error(ErrorKind::Io, "png_create_read_struct failed", kStage);
    png_infop info = png_create_info_struct(png);
    Decoded out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "reading " + path.string() + ": " + message, kStage);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // little-endian host order
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.rows.assign(static_cast<std::size_t>(out.height), std::vector<png_byte>(stride));
    std::vector<png_bytep> ptrs;
    for (auto& r : out.rows) ptrs.push_back(r.data());
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

void write_png(const std::filesystem::path& path, const PanelImage& img) {
    const int w = img.width();
    write_rows(path, w, img.height(), 8, PNG_COLOR_TYPE_RGB, static_cast<std::size_t>(w) * 3,
               [&](int y, png_byte* row) {
                   for (int x = 0; x < w; ++x)
                       for (int c = 0; c < 3; ++c) row[3 * x + c] = img[c](x, y);
               });
}

void write_png16(const std::filesystem::path& path, const RgbImage<float>& img) {
    const int w = img.width();
    write_rows(path, w, img.height(), 16, PNG_COLOR_TYPE_RGB, static_cast<std::size_t>(w) * 6,
               [&](int y, png_byte* row) {
                   for (int x = 0; x < w; ++x)
                       for (int c = 0; c < 3; ++c) {
                           const double v = std::clamp(static_cast<double>(img[c](x, y)), 0.0, 1.0);
                           const auto s = static_cast<unsigned>(std::lround(v * 65535.0));
                           row[6 * x + 2 * c] = static_cast<png_byte>(s >> 8);
                           row[6 * x + 2 * c + 1] = static_cast<png_byte>(s & 0xff);
                       }
               });
}

void write_png_gray(const std::filesystem::path& path, const Plane<float>& plane, double lo,
                    double hi) {
    const int w = plane.width();
    const double span = hi > lo ? hi - lo : 1.0;
    write_rows(path, w, plane.height(), 8, PNG_COLOR_TYPE_GRAY, static_cast<std::size_t>(w),
               [&](int y, png_byte* row) {
                   for (int x = 0; x < w; ++x) {
                       const double v = std::clamp((plane(x, y) - lo) / span, 0.0, 1.0);
                       row[x] = static_cast<png_byte>(std::lround(v * 255.0));
                   }
               });
}

PanelImage read_png_rgb8(const std::filesystem::path& path) {
    const Decoded dec = decode(path);
    if (dec.depth != 8 || dec.channels != 3)
        throw Error(ErrorKind::Io, path.string() + " is not an 8-bit RGB PNG", kStage);
    PanelImage img(dec.width, dec.height);
    for (int y = 0; y < dec.height; ++y) {
        const auto& row = dec.rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < dec.width; ++x)
            for (int c = 0; c < 3; ++c) img[c](x, y) = row[static_cast<std::size_t>(3 * x + c)];
    }
    return img;
}

RgbImage<float> read_png_float(const std::filesystem::path& path) {
    const Decoded dec = decode(path);
    RgbImage<float> img(dec.width, dec.height);
    const double scale = dec.depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    for (int y = 0; y < dec.height; ++y) {
        const auto& row = dec.rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < dec.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const int src = dec.channels >= 3 ? c : 0;
                const std::size_t i = static_cast<std::size_t>(x * dec.channels + src);
                double v;
                if (dec.depth == 16) {
                    std::uint16_t s;
                    std::memcpy(&s, row.data() + 2 * i, 2);
                    v = s;
                } else {
                    v = row[i];
                }
                img[c](x, y) = static_cast<float>(v * scale);
            }
    }
    return img;
}

void write_corners(const std::filesystem::path& path, const Corners& corners) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string(), kStage);
    out << std::setprecision(17);
    for (const auto& c : corners) out << c.x() << ' ' << c.y() << '\n';
}

Corners read_corners(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string(), kStage);
    Corners corners;
    for (auto& c : corners) {
        double x, y;
        if (!(in >> x >> y)) throw Error(ErrorKind::Io, path.string() + ": expected four 'x y' lines", kStage);
        c = Eigen::Vector2d(x, y);
    }
    return corners;
}

}  // namespace dispcal
