#include "tryw/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "tryw/error.hpp"

namespace tryw {

namespace {

void check_same(const MaskPlane& a, const MaskPlane& b, const char* op) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError(std::string(op) + ": mask dimensions differ");
  }
}

}  // namespace

MaskPlane mask_and(const MaskPlane& a, const MaskPlane& b) {
  check_same(a, b, "mask_and");
  MaskPlane out(a.width, a.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] & b.data[i];
  return out;
}

MaskPlane mask_or(const MaskPlane& a, const MaskPlane& b) {
  check_same(a, b, "mask_or");
  MaskPlane out(a.width, a.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] | b.data[i];
  return out;
}

MaskPlane mask_not(const MaskPlane& a) {
  MaskPlane out(a.width, a.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] ? 0 : 1;
  return out;
}

MaskPlane dilate(const MaskPlane& m, int radius) {
  if (radius <= 0) return m;
  // Separable: horizontal pass then vertical pass.
  MaskPlane tmp(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      const int x0 = std::max(0, x - radius), x1 = std::min(m.width - 1, x + radius);
      for (int xx = x0; xx <= x1; ++xx) tmp.at(xx, y) = 1;
    }
  }
  MaskPlane out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!tmp.at(x, y)) continue;
      const int y0 = std::max(0, y - radius), y1 = std::min(m.height - 1, y + radius);
      for (int yy = y0; yy <= y1; ++yy) out.at(x, yy) = 1;
    }
  }
  return out;
}

ImagePlane resize_bilinear(const ImagePlane& img, int width, int height) {
  if (width <= 0 || height <= 0) throw DimensionError("resize_bilinear: empty target");
  if (img.width == width && img.height == height) return img;
  ImagePlane out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bot = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.at(x, y, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

ImagePlane quantize8(const ImagePlane& img) {
  ImagePlane out = img;
  for (auto& v : out.data) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
  return out;
}

ImagePlane to_rgb(const ImagePlane& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw DimensionError("to_rgb: expected 1 or 3 channels");
  ImagePlane out(img.width, img.height, 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = img.data[i];
  }
  return out;
}

}  // namespace tryw
