#include "tryw/proxy.hpp"

#include <algorithm>
#include <cmath>

#include "tryw/error.hpp"

namespace tryw {

namespace {

void require_dims(const MaskPlane& m, int w, int h, const char* name) {
  if (!m.same_dims(w, h)) {
    throw DimensionError(std::string("build_proxy: mask ") + name +
                         " does not match the person image");
  }
}

void fill(ImagePlane& img, std::size_t pixel, const Rgb& c) {
  for (int ch = 0; ch < img.channels; ++ch) {
    img.data[pixel * img.channels + ch] = static_cast<float>(c[static_cast<std::size_t>(ch)]);
  }
}

}  // namespace

InpaintResult inpaint_background(const ImagePlane& img, const MaskPlane& hole, int max_sweeps,
                                 double tolerance) {
  if (!hole.same_dims(img.width, img.height)) {
    throw DimensionError("inpaint_background: hole mask does not match the image");
  }
  InpaintResult res;
  res.image = img;
  const int w = img.width, h = img.height, ch = img.channels;
  const std::size_t holes = hole.count();
  if (holes == 0) {
    res.converged = true;
    return res;
  }
  if (holes == img.pixel_count()) {
    std::vector<double> mean(static_cast<std::size_t>(ch), 0.0);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      for (int c = 0; c < ch; ++c) mean[c] += img.data[i * ch + c];
    }
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      for (int c = 0; c < ch; ++c) {
        res.image.data[i * ch + c] = static_cast<float>(mean[c] / img.pixel_count());
      }
    }
    res.warnings.push_back("inpaint hole covers the whole image; filled with the global mean");
    res.converged = true;
    return res;
  }

  std::vector<int> pixels;
  std::vector<double> ring(static_cast<std::size_t>(ch), 0.0);
  std::size_t ring_count = 0;
  constexpr int kDx[4] = {0, -1, 1, 0};
  constexpr int kDy[4] = {-1, 0, 0, 1};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (hole.at(x, y)) {
        pixels.push_back(y * w + x);
        continue;
      }
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k], ny = y + kDy[k];
        if (nx >= 0 && ny >= 0 && nx < w && ny < h && hole.at(nx, ny)) {
          for (int c = 0; c < ch; ++c) ring[c] += img.at(x, y, c);
          ++ring_count;
          break;
        }
      }
    }
  }

  // Working copy in double precision; hole pixels seeded at the ring mean.
  std::vector<double> work(img.data.begin(), img.data.end());
  for (int p : pixels) {
    for (int c = 0; c < ch; ++c) work[static_cast<std::size_t>(p) * ch + c] = ring[c] / ring_count;
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int p : pixels) {
      const int x = p % w, y = p / w;
      double sum[3] = {0, 0, 0};
      int n = 0;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k], ny = y + kDy[k];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        for (int c = 0; c < ch; ++c) sum[c] += work[q * ch + c];
        ++n;
      }
      for (int c = 0; c < ch; ++c) {
        double& v = work[static_cast<std::size_t>(p) * ch + c];
        const double nv = sum[c] / n;
        max_change = std::max(max_change, std::abs(nv - v));
        v = nv;
      }
    }
    res.sweeps = sweep + 1;
    if (max_change < tolerance) {
      res.converged = true;
      break;
    }
  }
  for (int p : pixels) {
    for (int c = 0; c < ch; ++c) {
      const std::size_t i = static_cast<std::size_t>(p) * ch + c;
      res.image.data[i] = static_cast<float>(std::clamp(work[i], 0.0, 1.0));
    }
  }
  return res;
}

ColorEstimate estimate_skin_color(const ImagePlane& img, const ParsingPlane& parsing,
                                  const MaskPlane& garment, const LabelTable& labels) {
  if (parsing.width != img.width || parsing.height != img.height ||
      !garment.same_dims(img.width, img.height)) {
    throw DimensionError("estimate_skin_color: planes are not aligned");
  }
  ColorEstimate est;
  Rgb sum{};
  const ImagePlane rgb = to_rgb(img);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    if (garment.data[i] || !labels.is_skin(parsing.labels[i])) continue;
    for (int c = 0; c < 3; ++c) sum[c] += rgb.data[i * 3 + c];
    ++est.pixel_count;
  }
  if (est.pixel_count == 0) {
    est.color = kFallbackSkin;
    est.fallback = true;
    return est;
  }
  for (int c = 0; c < 3; ++c) est.color[c] = sum[c] / static_cast<double>(est.pixel_count);
  return est;
}

ColorEstimate estimate_garment_color(const ImagePlane& garment_img,
                                     const MaskPlane& garment_mask) {
  if (!garment_mask.same_dims(garment_img.width, garment_img.height)) {
    throw DimensionError("estimate_garment_color: mask does not match the image");
  }
  ColorEstimate est;
  Rgb sum{};
  const ImagePlane rgb = to_rgb(garment_img);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    if (!garment_mask.data[i]) continue;
    for (int c = 0; c < 3; ++c) sum[c] += rgb.data[i * 3 + c];
    ++est.pixel_count;
  }
  if (est.pixel_count == 0) {
    est.color = kFallbackGarment;
    est.fallback = true;
    return est;
  }
  for (int c = 0; c < 3; ++c) est.color[c] = sum[c] / static_cast<double>(est.pixel_count);
  return est;
}

MaskPlane body_mask(const MaskPlane& dense_body, const MaskPlane& source_garment) {
  return mask_and(dense_body, source_garment);
}

MaskPlane target_mask(const MaskPlane& agnostic, const MaskPlane& projected_garment,
                      const MaskPlane& warped_garment) {
  return mask_or(mask_and(agnostic, projected_garment), warped_garment);
}

MaskPlane preserved_mask(const MaskPlane& source_garment, const MaskPlane& body,
                         const MaskPlane& target) {
  return mask_not(mask_or(mask_or(source_garment, body), target));
}

MaskPlane derive_agnostic_mask(const MaskPlane& source_garment, const PartBoxes& person_boxes) {
  MaskPlane m = source_garment;
  for (const auto& box : person_boxes.boxes) {
    if (!box.present) continue;
    m = mask_or(m, quad_mask(box.corners, m.width, m.height));
  }
  const int radius = static_cast<int>(std::lround(0.05 * m.height));
  return dilate(m, radius);
}

ProxyImage build_proxy(const ImagePlane& person, const ProxyRecipe& recipe, int inpaint_sweeps) {
  const int w = person.width, h = person.height;
  require_dims(recipe.source_garment, w, h, "M_s");
  require_dims(recipe.dense_body, w, h, "M_d");
  require_dims(recipe.agnostic, w, h, "M_p");
  require_dims(recipe.projected_garment, w, h, "M_o'");
  require_dims(recipe.warped_garment, w, h, "M_w");

  const ImagePlane rgb = to_rgb(person);
  ProxyImage proxy;
  proxy.provenance.assign(rgb.pixel_count(), Provenance::Preserved);

  // (i) background recovery over M_s
  auto inpainted = inpaint_background(rgb, recipe.source_garment, inpaint_sweeps);
  proxy.image = std::move(inpainted.image);
  proxy.warnings = std::move(inpainted.warnings);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    if (recipe.source_garment.data[i]) proxy.provenance[i] = Provenance::Background;
  }

  // (ii) body completion over M_b
  const MaskPlane mb = body_mask(recipe.dense_body, recipe.source_garment);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    if (!mb.data[i]) continue;
    fill(proxy.image, i, recipe.skin_color);
    proxy.provenance[i] = Provenance::Body;
  }

  // (iii) target-garment cue over M_t
  const MaskPlane mt =
      target_mask(recipe.agnostic, recipe.projected_garment, recipe.warped_garment);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    if (!mt.data[i]) continue;
    fill(proxy.image, i, recipe.garment_color);
    proxy.provenance[i] = Provenance::GarmentCue;
  }

  // (iv) preserved region
  const MaskPlane other = preserved_mask(recipe.source_garment, mb, mt);
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    if (!other.data[i]) continue;
    for (int c = 0; c < 3; ++c) proxy.image.data[i * 3 + c] = rgb.data[i * 3 + c];
    proxy.provenance[i] = Provenance::Preserved;
  }
  return proxy;
}

ImagePlane provenance_image(const ProxyImage& proxy) {
  ImagePlane out(proxy.image.width, proxy.image.height, 1);
  for (std::size_t i = 0; i < proxy.provenance.size(); ++i) {
    out.data[i] = static_cast<float>(static_cast<int>(proxy.provenance[i]) * 85) / 255.0f;
  }
  return out;
}

}  // namespace tryw
