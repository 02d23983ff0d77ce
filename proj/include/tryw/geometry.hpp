#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tryw/ingest.hpp"
#include "tryw/labels.hpp"

namespace tryw {

using Point2 = Eigen::Vector2d;
using Quad = std::array<Point2, 4>;

// Oriented support box for one body part. `corners` is only meaningful when
// `present` is true; corner order is fixed per part so boxes built from two
// different skeletons correspond corner-for-corner.
struct PartBox {
  Part part = Part::Torso;
  bool present = false;
  Quad corners{};
  std::vector<Joint> joints;
};

struct PartBoxes {
  std::vector<PartBox> boxes;

  const PartBox* find(Part part) const;
};

// Limb parts span their two axis joints and are widened perpendicular to the
// axis by margin * axis length. Torso-like parts span the shoulder and hip
// pairs, widened along those segments by margin/2 of their length per side.
PartBoxes group_keypoints_to_parts(const KeypointSet& kp, const GarmentCategory& cat,
                                   double margin = 0.3);

// Inclusive point-in-polygon test (boundary points count as inside).
bool point_in_quad(const Quad& q, const Point2& p);

// Rasterized quadrilateral: pixel (x,y) is sampled at integer coordinates.
MaskPlane quad_mask(const Quad& q, int width, int height);

// Region indicator: parsing label in labels(part), garment set, inside the box.
MaskPlane part_support_mask(const ParsingPlane& parsing, const MaskPlane& garment,
                            const Quad& box, Part part, const LabelTable& labels);

struct Homography {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  static Homography identity() { return {}; }
  static Homography translation(double dx, double dy);

  // Returns nullopt when the point maps to the line at infinity.
  std::optional<Point2> apply(const Point2& p) const;
  std::optional<Homography> inverse() const;
  // Rescales so that m(2,2) == 1.
  Homography normalized() const;
};

struct HomographyFit {
  Homography h;
  int iterations = 0;
  bool converged = false;
  double rms_transfer_error = 0.0;
};

// Levenberg-Marquardt over the 8 free entries (m(2,2) fixed to 1), started
// from the normalized DLT solution. Stops when the step norm drops below 1e-10
// or after 100 iterations; the best iterate is returned either way.
// Throws DegenerateError for fewer than 4 pairs or 3 collinear points.
HomographyFit estimate_homography(std::span<const Point2> src, std::span<const Point2> dst);

// Normalized DLT alone (the LM starting point).
Homography dlt_homography(std::span<const Point2> src, std::span<const Point2> dst);

// Single-part warp: output(x) = src(H^-1 x), bilinear, zero outside the source.
ImagePlane warp_image(const ImagePlane& src, const Homography& h, int out_width,
                      int out_height);

struct PartWarp {
  Part part = Part::Torso;
  MaskPlane support;  // in source coordinates
  Homography h;       // source -> target
};

struct PartLayer {
  Part part = Part::Torso;
  ImagePlane image;    // zero outside coverage
  MaskPlane coverage;  // target pixels this part can supply
};

struct MorphResult {
  ImagePlane warped;       // I_w, zero outside warped_mask
  MaskPlane warped_mask;   // M_w
  std::vector<PartLayer> layers;
  std::vector<MaskPlane> contributions;  // pixels owned by each layer in `warped`
  std::vector<std::string> warnings;
};

// Inverse-mapping piecewise perspective warp. A part samples the source only
// where the nearest source pixel lies in its support; bilinear weights are
// restricted to support pixels. Parts composite in the given order.
MorphResult warp_piecewise(const ImagePlane& src, std::span<const PartWarp> parts,
                           int out_width, int out_height);

// Drops each part's pixels where the person parsing disagrees with the part's
// labels, then recomposites.
MorphResult occlusion_gate(const MorphResult& morph, const ParsingPlane& person_parsing,
                           const LabelTable& labels);

// Rebuilds warped / warped_mask / contributions from the layers.
void composite_layers(MorphResult& morph);

// Destination pixel is set iff its nearest same-part source pixel in (u,v)
// lies within tau_uv and inside src_mask. Ties go to the lowest raster index.
MaskPlane transfer_mask_via_iuv(const IUVPlane& src_iuv, const MaskPlane& src_mask,
                                const IUVPlane& dst_iuv, double tau_uv = 0.02);

}  // namespace tryw
