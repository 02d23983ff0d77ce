#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tryw/geometry.hpp"
#include "tryw/image_ops.hpp"
#include "tryw/ingest.hpp"
#include "tryw/labels.hpp"

namespace tryw {

struct InpaintResult {
  ImagePlane image;
  int sweeps = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Harmonic fill: hole pixels start at the mean of the hole's boundary ring
// and are relaxed by Gauss-Seidel 4-neighbor averaging until the largest
// per-sweep change drops below `tolerance` or `max_sweeps` is reached.
InpaintResult inpaint_background(const ImagePlane& img, const MaskPlane& hole,
                                 int max_sweeps = 500, double tolerance = 1e-4);

struct ColorEstimate {
  Rgb color{};
  std::size_t pixel_count = 0;
  bool fallback = false;
};

inline constexpr Rgb kFallbackSkin = {0.78, 0.65, 0.57};
inline constexpr Rgb kFallbackGarment = {0.5, 0.5, 0.5};

// Mean over exposed skin: parsing label is a skin label and garment == 0.
ColorEstimate estimate_skin_color(const ImagePlane& img, const ParsingPlane& parsing,
                                  const MaskPlane& garment, const LabelTable& labels);
ColorEstimate estimate_garment_color(const ImagePlane& garment_img,
                                     const MaskPlane& garment_mask);

// M_b = M_d AND M_s
MaskPlane body_mask(const MaskPlane& dense_body, const MaskPlane& source_garment);
// M_t = (M_p AND M_o') OR M_w
MaskPlane target_mask(const MaskPlane& agnostic, const MaskPlane& projected_garment,
                      const MaskPlane& warped_garment);
// M_other = NOT (M_s OR M_b OR M_t)
MaskPlane preserved_mask(const MaskPlane& source_garment, const MaskPlane& body,
                         const MaskPlane& target);

// Agnostic region for inputs that ship without one: dilation of the source
// garment mask and the part boxes by 5% of the image height.
MaskPlane derive_agnostic_mask(const MaskPlane& source_garment, const PartBoxes& person_boxes);

struct ProxyRecipe {
  MaskPlane source_garment;     // M_s
  MaskPlane dense_body;         // M_d
  MaskPlane agnostic;           // M_p
  MaskPlane projected_garment;  // M_o'
  MaskPlane warped_garment;     // M_w
  Rgb skin_color{};             // c_h
  Rgb garment_color{};          // c_t
};

enum class Provenance : std::uint8_t { Background = 0, Body = 1, GarmentCue = 2, Preserved = 3 };

struct ProxyImage {
  ImagePlane image;
  std::vector<Provenance> provenance;  // one label per pixel
  std::vector<std::string> warnings;
};

// Ordered composition: inpaint over M_s, skin color over M_b, garment color
// over M_t, person pixels over M_other. Each step overwrites the previous.
ProxyImage build_proxy(const ImagePlane& person, const ProxyRecipe& recipe,
                       int inpaint_sweeps = 500);

// Provenance as a grayscale plane (label * 85) for inspection.
ImagePlane provenance_image(const ProxyImage& proxy);

}  // namespace tryw
