#include "tryw/ingest.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "tryw/error.hpp"

namespace tryw {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::uint8_t* bytes, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(n));
  if (!out) throw FormatError("short write: " + path.string());
}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> samples;
};

// Only 8-bit grayscale (color type 0) and 8-bit RGB (color type 2) are accepted.
// The IHDR is inspected directly because the simplified libpng reader would
// silently convert palette, alpha and 16-bit files.
RawPng read_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 33 || std::memcmp(bytes.data(), kSig, 8) != 0 ||
      std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw FormatError("not a PNG file: " + path.string());
  }
  const int bit_depth = bytes[24];
  const int color_type = bytes[25];
  if (bit_depth != 8) {
    throw FormatError("unsupported PNG bit depth " + std::to_string(bit_depth) + ": " +
                      path.string());
  }
  if (color_type != 0 && color_type != 2) {
    throw FormatError("unsupported PNG color type " + std::to_string(color_type) +
                      " (need 8-bit gray or RGB): " + path.string());
  }

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError("PNG decode failed (" + std::string(image.message) + "): " + path.string());
  }
  image.format = color_type == 0 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  RawPng out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color_type == 0 ? 1 : 3;
  out.samples.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.samples.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("PNG decode failed (" + std::string(image.message) + "): " + path.string());
  }
  return out;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& samples) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, samples.data(), 0, nullptr)) {
    throw FormatError("PNG encode failed (" + std::string(image.message) + "): " + path.string());
  }
  std::vector<std::uint8_t> buffer(size);
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, samples.data(), 0, nullptr)) {
    throw FormatError("PNG encode failed (" + std::string(image.message) + "): " + path.string());
  }
  write_file(path, buffer.data(), size);
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

RawPng read_gray(const std::filesystem::path& path) {
  auto raw = read_png(path);
  if (raw.channels != 1) throw FormatError("expected a grayscale PNG: " + path.string());
  return raw;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::size_t MaskPlane::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

ImagePlane load_image(const std::filesystem::path& path) {
  const auto raw = read_png(path);
  ImagePlane img(raw.width, raw.height, raw.channels);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    img.data[i] = static_cast<float>(raw.samples[i]) / 255.0f;
  }
  return img;
}

void save_image(const ImagePlane& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw DimensionError("save_image: channels must be 1 or 3");
  }
  std::vector<std::uint8_t> samples(img.data.size());
  std::transform(img.data.begin(), img.data.end(), samples.begin(), to_byte);
  write_png(path, img.width, img.height, img.channels, samples);
}

MaskPlane load_mask(const std::filesystem::path& path, double threshold) {
  const auto raw = read_gray(path);
  MaskPlane m(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    m.data[i] = static_cast<double>(raw.samples[i]) / 255.0 >= threshold ? 1 : 0;
  }
  return m;
}

void save_mask(const MaskPlane& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> samples(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), samples.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  write_png(path, mask.width, mask.height, 1, samples);
}

ParsingPlane load_parsing(const std::filesystem::path& path, int vocabulary_size) {
  auto raw = read_gray(path);
  ParsingPlane p;
  p.width = raw.width;
  p.height = raw.height;
  p.labels = std::move(raw.samples);
  if (vocabulary_size > 0) {
    for (auto l : p.labels) {
      if (l >= vocabulary_size) {
        throw FormatError("parsing label " + std::to_string(l) + " outside vocabulary: " +
                          path.string());
      }
    }
  }
  return p;
}

void save_parsing(const ParsingPlane& parsing, const std::filesystem::path& path) {
  write_png(path, parsing.width, parsing.height, 1, parsing.labels);
}

IUVPlane load_iuv(const std::filesystem::path& part_path, const std::filesystem::path& u_path,
                  const std::filesystem::path& v_path) {
  auto part = read_gray(part_path);
  const auto u = read_gray(u_path);
  const auto v = read_gray(v_path);
  if (u.width != part.width || u.height != part.height || v.width != part.width ||
      v.height != part.height) {
    throw DimensionError("IUV planes are not aligned: " + part_path.string());
  }
  IUVPlane iuv(part.width, part.height);
  iuv.part_index = std::move(part.samples);
  for (std::size_t i = 0; i < iuv.part_index.size(); ++i) {
    if (iuv.part_index[i] == 0) continue;
    iuv.u[i] = static_cast<float>(u.samples[i]) / 255.0f;
    iuv.v[i] = static_cast<float>(v.samples[i]) / 255.0f;
  }
  return iuv;
}

void save_iuv(const IUVPlane& iuv, const std::filesystem::path& part_path,
              const std::filesystem::path& u_path, const std::filesystem::path& v_path) {
  std::vector<std::uint8_t> u(iuv.u.size()), v(iuv.v.size());
  std::transform(iuv.u.begin(), iuv.u.end(), u.begin(), to_byte);
  std::transform(iuv.v.begin(), iuv.v.end(), v.begin(), to_byte);
  write_png(part_path, iuv.width, iuv.height, 1, iuv.part_index);
  write_png(u_path, iuv.width, iuv.height, 1, u);
  write_png(v_path, iuv.width, iuv.height, 1, v);
}

KeypointSet parse_keypoints(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed keypoint JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("people") || !doc["people"].is_array()) {
    throw FormatError("keypoint JSON has no \"people\" array");
  }
  KeypointSet kp;
  if (doc["people"].empty()) return kp;
  const auto& person = doc["people"][0];
  if (!person.contains("pose_keypoints_2d") || !person["pose_keypoints_2d"].is_array()) {
    throw FormatError("keypoint JSON person has no \"pose_keypoints_2d\" list");
  }
  const auto& flat = person["pose_keypoints_2d"];
  if (flat.size() != 3 * kJointCount) {
    throw FormatError("pose_keypoints_2d must hold " + std::to_string(3 * kJointCount) +
                      " numbers, got " + std::to_string(flat.size()));
  }
  for (int j = 0; j < kJointCount; ++j) {
    for (int k = 0; k < 3; ++k) {
      if (!flat[3 * j + k].is_number()) throw FormatError("non-numeric keypoint entry");
    }
    Keypoint& p = kp.joints[j];
    p.x = flat[3 * j].get<double>();
    p.y = flat[3 * j + 1].get<double>();
    p.confidence = flat[3 * j + 2].get<double>();
    if (p.confidence <= 0.0) p = Keypoint{};
  }
  return kp;
}

KeypointSet load_keypoints(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_keypoints(std::string(bytes.begin(), bytes.end()));
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + ": " + path.string());
  }
}

std::string dump_keypoints(const KeypointSet& kp) {
  nlohmann::json flat = nlohmann::json::array();
  for (const auto& p : kp.joints) {
    flat.push_back(p.x);
    flat.push_back(p.y);
    flat.push_back(p.confidence);
  }
  nlohmann::json doc;
  doc["version"] = 1.3;
  doc["people"] = nlohmann::json::array({{{"pose_keypoints_2d", flat}}});
  return doc.dump();
}

void save_keypoints(const KeypointSet& kp, const std::filesystem::path& path) {
  const auto text = dump_keypoints(kp);
  write_file(path, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

void append_f32_le(std::vector<std::uint8_t>& out, const std::vector<float>& values) {
  out.reserve(out.size() + 4 * values.size());
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> read_f32_le(const std::uint8_t* bytes, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(get_u32(bytes + 4 * i));
  return out;
}

std::vector<std::uint8_t> encode_tensor(const LatentTensor& t) {
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 8);
  put_u32(out, 3);
  put_u32(out, static_cast<std::uint32_t>(t.channels));
  put_u32(out, static_cast<std::uint32_t>(t.height));
  put_u32(out, static_cast<std::uint32_t>(t.width));
  append_f32_le(out, t.data);
  return out;
}

LatentTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kTensorMagic, 8) != 0) {
    throw FormatError("bad tensor magic");
  }
  const std::uint32_t rank = get_u32(bytes.data() + 8);
  if (rank != 3) throw FormatError("tensor rank must be 3, got " + std::to_string(rank));
  if (bytes.size() < 24) throw FormatError("truncated tensor header");
  const std::uint64_t c = get_u32(bytes.data() + 12);
  const std::uint64_t h = get_u32(bytes.data() + 16);
  const std::uint64_t w = get_u32(bytes.data() + 20);
  const std::uint64_t n = c * h * w;
  if (bytes.size() != 24 + 4 * n) {
    throw FormatError("tensor payload size mismatch: expected " + std::to_string(24 + 4 * n) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  LatentTensor t;
  t.channels = static_cast<int>(c);
  t.height = static_cast<int>(h);
  t.width = static_cast<int>(w);
  t.data = read_f32_le(bytes.data() + 24, n);
  if (!std::all_of(t.data.begin(), t.data.end(), [](float f) { return std::isfinite(f); })) {
    throw FormatError("tensor holds non-finite values");
  }
  return t;
}

LatentTensor load_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + ": " + path.string());
  }
}

void save_tensor(const LatentTensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  write_file(path, bytes.data(), bytes.size());
}

}  // namespace tryw
