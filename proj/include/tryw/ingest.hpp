#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tryw {

// Dense raster with 1 or 3 interleaved channels, values in [0,1], row-major.
struct ImagePlane {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImagePlane() = default;
  ImagePlane(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_dims(int w, int h) const { return width == w && height == h; }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;
};

// Binary occupancy raster, values exactly 0 or 1.
struct MaskPlane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  MaskPlane() = default;
  MaskPlane(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool same_dims(int w, int h) const { return width == w && height == h; }

  friend bool operator==(const MaskPlane&, const MaskPlane&) = default;
};

// Per-pixel part label map.
struct ParsingPlane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  ParsingPlane() = default;
  ParsingPlane(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Dense body-surface coordinates: part index (0 = background) and (u,v) in [0,1].
struct IUVPlane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> part_index;
  std::vector<float> u;
  std::vector<float> v;

  IUVPlane() = default;
  IUVPlane(int w, int h)
      : width(w), height(h),
        part_index(static_cast<std::size_t>(w) * h, 0),
        u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}
};

// Channel-major C x H x W real tensor in denoiser latent space.
struct LatentTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  LatentTensor() = default;
  LatentTensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const LatentTensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const LatentTensor&, const LatentTensor&) = default;
};

// The 18-joint OpenPose/COCO body layout.
enum class Joint : int {
  Nose = 0,
  Neck = 1,
  RShoulder = 2,
  RElbow = 3,
  RWrist = 4,
  LShoulder = 5,
  LElbow = 6,
  LWrist = 7,
  RHip = 8,
  RKnee = 9,
  RAnkle = 10,
  LHip = 11,
  LKnee = 12,
  LAnkle = 13,
  REye = 14,
  LEye = 15,
  REar = 16,
  LEar = 17,
};

inline constexpr int kJointCount = 18;

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  bool present() const { return confidence > 0.0; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct KeypointSet {
  std::array<Keypoint, kJointCount> joints{};

  const Keypoint& operator[](Joint j) const { return joints[static_cast<int>(j)]; }
  Keypoint& operator[](Joint j) { return joints[static_cast<int>(j)]; }

  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;
};

// PNG I/O. Samples map to s/255; saving rounds to the nearest 8-bit level.
ImagePlane load_image(const std::filesystem::path& path);
void save_image(const ImagePlane& img, const std::filesystem::path& path);

// Pixel is set iff value/255 >= threshold.
MaskPlane load_mask(const std::filesystem::path& path, double threshold = 0.5);
void save_mask(const MaskPlane& mask, const std::filesystem::path& path);

// Raw 8-bit labels. When `vocabulary_size` > 0 every label must be below it.
ParsingPlane load_parsing(const std::filesystem::path& path, int vocabulary_size = 0);
void save_parsing(const ParsingPlane& parsing, const std::filesystem::path& path);

// Three aligned 8-bit PNGs: part index (raw), u and v (scaled by 1/255).
IUVPlane load_iuv(const std::filesystem::path& part_path, const std::filesystem::path& u_path,
                  const std::filesystem::path& v_path);
void save_iuv(const IUVPlane& iuv, const std::filesystem::path& part_path,
              const std::filesystem::path& u_path, const std::filesystem::path& v_path);

// OpenPose JSON: first entry of "people", "pose_keypoints_2d" = [x,y,c] x 18.
KeypointSet parse_keypoints(const std::string& json_text);
KeypointSet load_keypoints(const std::filesystem::path& path);
std::string dump_keypoints(const KeypointSet& kp);
void save_keypoints(const KeypointSet& kp, const std::filesystem::path& path);

// Binary tensor file: "TRYW0001", u32 rank (=3), u32 dims C,H,W, then f32 payload.
// Everything little-endian.
inline constexpr char kTensorMagic[8] = {'T', 'R', 'Y', 'W', '0', '0', '0', '1'};
LatentTensor load_tensor(const std::filesystem::path& path);
void save_tensor(const LatentTensor& t, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_tensor(const LatentTensor& t);
LatentTensor decode_tensor(const std::vector<std::uint8_t>& bytes);

// Little-endian float32 payload helpers shared with the bridge transport.
void append_f32_le(std::vector<std::uint8_t>& out, const std::vector<float>& values);
std::vector<float> read_f32_le(const std::uint8_t* bytes, std::size_t count);

}  // namespace tryw
