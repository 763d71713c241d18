#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <png.h>

#include "roi10d/camera.hpp"
#include "roi10d/mesh.hpp"
#include "roi10d/tsdf.hpp"

namespace roi10d {

// Interleaved 8-bit RGB raster, row-major from the top-left pixel.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;

  ImageU8() = default;
  ImageU8(int w, int h, Color3u fill = Color3u(0, 0, 0)) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw std::domain_error("image: dimensions must be positive");
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) set(x, y, fill);
  }

  bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  std::size_t offset(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * width + x);
  }

  Color3u at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return Color3u(pixels[o], pixels[o + 1], pixels[o + 2]);
  }

  void set(int x, int y, Color3u c) {
    const std::size_t o = offset(x, y);
    pixels[o] = c[0];
    pixels[o + 1] = c[1];
    pixels[o + 2] = c[2];
  }
};

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h, float fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw std::domain_error("depth map: dimensions must be positive");
    values.assign(static_cast<std::size_t>(w) * h, fill);
  }

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, float v) { values[static_cast<std::size_t>(y) * width + x] = v; }
};

// A calibrated camera frame: color, optional metric depth per pixel.
struct SceneImage {
  ImageU8 rgb;
  std::optional<DepthMap> depth;
  CameraIntrinsics calibration;

  void validate() const {
    if (depth && (depth->width != rgb.width || depth->height != rgb.height))
      throw std::domain_error("scene image: depth dimensions do not match rgb");
  }
};

// True when (u, v) has full bilinear support inside the image.
inline bool in_image(const ImageU8& image, double u, double v) {
  return u >= 0.0 && v >= 0.0 && u <= image.width - 1.0 && v <= image.height - 1.0;
}

inline Eigen::Vector3d bilinear_sample(const ImageU8& image, double u, double v) {
  const int x0 = std::clamp(static_cast<int>(std::floor(u)), 0, image.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(v)), 0, image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = std::clamp(u - x0, 0.0, 1.0);
  const double fy = std::clamp(v - y0, 0.0, 1.0);
  const auto c = [&](int x, int y) -> Eigen::Vector3d { return image.at(x, y).cast<double>(); };
  return (1.0 - fy) * ((1.0 - fx) * c(x0, y0) + fx * c(x1, y0)) +
         fy * ((1.0 - fx) * c(x0, y1) + fx * c(x1, y1));
}

inline void write_png(const ImageU8& image, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + image.offset(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline ImageU8 read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png color layout unsupported: " + path);
  }
  ImageU8 image(width, height);
  for (int y = 0; y < height; ++y)
    png_read_row(png, image.pixels.data() + image.offset(0, y), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return image;
}

namespace detail {
inline constexpr uint32_t kDepthMagic = 0x48545044u;  // "DPTH"
}

inline void write_depth_raster(const DepthMap& depth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  detail::write_raw(out, detail::kDepthMagic);
  detail::write_raw(out, static_cast<int32_t>(depth.width));
  detail::write_raw(out, static_cast<int32_t>(depth.height));
  out.write(reinterpret_cast<const char*>(depth.values.data()),
            static_cast<std::streamsize>(depth.values.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write: " + path);
}

inline DepthMap read_depth_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  if (detail::read_raw<uint32_t>(in) != detail::kDepthMagic)
    throw std::runtime_error("not a depth raster: " + path);
  const int w = detail::read_raw<int32_t>(in);
  const int h = detail::read_raw<int32_t>(in);
  if (w <= 0 || h <= 0) throw std::runtime_error("bad depth raster dims: " + path);
  DepthMap depth(w, h, 0.0f);
  in.read(reinterpret_cast<char*>(depth.values.data()),
          static_cast<std::streamsize>(depth.values.size() * sizeof(float)));
  if (!in) throw std::runtime_error("depth raster truncated: " + path);
  return depth;
}

}  // namespace roi10d
