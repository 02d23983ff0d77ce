#include "tryw/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "tryw/error.hpp"

namespace tryw {

namespace {

constexpr double kOnEdgeEps = 1e-9;

// Fraction of the hip-to-neck distance the hip-above box reaches upward and
// downward from the hip line.
constexpr double kHipAboveUp = 0.3;
constexpr double kHipAboveDown = 0.1;

Point2 at(const KeypointSet& kp, Joint j) { return {kp[j].x, kp[j].y}; }

bool all_present(const KeypointSet& kp, const std::vector<Joint>& joints) {
  return std::all_of(joints.begin(), joints.end(), [&](Joint j) { return kp[j].present(); });
}

std::optional<Quad> limb_box(const Point2& a, const Point2& b, double margin) {
  const Point2 axis = b - a;
  const double len = axis.norm();
  if (len == 0.0) return std::nullopt;
  const Point2 normal = Point2(-axis.y(), axis.x()) / len;
  const Point2 off = margin * len * normal;
  return Quad{a + off, b + off, b - off, a - off};
}

// Quad spanning segment (r0,l0) on top and (r1,l1) at the bottom, each
// extended along itself by margin/2 of its length at both ends.
std::optional<Quad> span_box(const Point2& r0, const Point2& l0, const Point2& l1,
                             const Point2& r1, double margin) {
  const Point2 e0 = 0.5 * margin * (l0 - r0);
  const Point2 e1 = 0.5 * margin * (l1 - r1);
  const Quad q{r0 - e0, l0 + e0, l1 + e1, r1 - e1};
  // Zero-area quads carry no support.
  const Point2 d1 = q[2] - q[0], d2 = q[3] - q[1];
  if (std::abs(d1.x() * d2.y() - d1.y() * d2.x()) == 0.0) return std::nullopt;
  return q;
}

std::optional<Quad> build_box(Part part, const KeypointSet& kp, double margin) {
  using J = Joint;
  switch (part) {
    case Part::Torso:
    case Part::DressUpper:
      return span_box(at(kp, J::RShoulder), at(kp, J::LShoulder), at(kp, J::LHip),
                      at(kp, J::RHip), margin);
    case Part::LeftUpperArm: return limb_box(at(kp, J::LShoulder), at(kp, J::LElbow), margin);
    case Part::RightUpperArm: return limb_box(at(kp, J::RShoulder), at(kp, J::RElbow), margin);
    case Part::LeftLowerArm: return limb_box(at(kp, J::LElbow), at(kp, J::LWrist), margin);
    case Part::RightLowerArm: return limb_box(at(kp, J::RElbow), at(kp, J::RWrist), margin);
    case Part::LeftUpperLeg: return limb_box(at(kp, J::LHip), at(kp, J::LKnee), margin);
    case Part::RightUpperLeg: return limb_box(at(kp, J::RHip), at(kp, J::RKnee), margin);
    case Part::LeftLowerLeg: return limb_box(at(kp, J::LKnee), at(kp, J::LAnkle), margin);
    case Part::RightLowerLeg: return limb_box(at(kp, J::RKnee), at(kp, J::RAnkle), margin);
    case Part::HipAbove: {
      const Point2 rh = at(kp, J::RHip), lh = at(kp, J::LHip);
      const Point2 up = at(kp, J::Neck) - 0.5 * (rh + lh);
      return span_box(rh + kHipAboveUp * up, lh + kHipAboveUp * up, lh - kHipAboveDown * up,
                      rh - kHipAboveDown * up, margin);
    }
    case Part::DressLower: {
      const Point2 rh = at(kp, J::RHip), lh = at(kp, J::LHip);
      const Point2 down = 0.5 * (at(kp, J::RAnkle) + at(kp, J::LAnkle)) - 0.5 * (rh + lh);
      // The hem is widened by an extra margin so flared skirts stay inside.
      const Point2 flare = 0.5 * margin * (lh - rh);
      return span_box(rh, lh, lh + down + flare, rh + down - flare, margin);
    }
  }
  return std::nullopt;
}

std::vector<Joint> joints_for(Part part) {
  using J = Joint;
  switch (part) {
    case Part::Torso:
    case Part::DressUpper: return {J::RShoulder, J::LShoulder, J::LHip, J::RHip};
    case Part::LeftUpperArm: return {J::LShoulder, J::LElbow};
    case Part::RightUpperArm: return {J::RShoulder, J::RElbow};
    case Part::LeftLowerArm: return {J::LElbow, J::LWrist};
    case Part::RightLowerArm: return {J::RElbow, J::RWrist};
    case Part::HipAbove: return {J::RHip, J::LHip, J::Neck};
    case Part::LeftUpperLeg: return {J::LHip, J::LKnee};
    case Part::RightUpperLeg: return {J::RHip, J::RKnee};
    case Part::LeftLowerLeg: return {J::LKnee, J::LAnkle};
    case Part::RightLowerLeg: return {J::RKnee, J::RAnkle};
    case Part::DressLower: return {J::RHip, J::LHip, J::RAnkle, J::LAnkle};
  }
  return {};
}

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  const Point2 ab = b - a, ap = p - a;
  const double scale = std::max({1.0, ab.squaredNorm()});
  if (std::abs(cross(ab, ap)) > kOnEdgeEps * scale) return false;
  const double t = ab.dot(ap);
  return t >= -kOnEdgeEps * scale && t <= ab.squaredNorm() + kOnEdgeEps * scale;
}

// Hartley normalization: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d normalizer(std::span<const Point2> pts) {
  Point2 c = Point2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

void check_non_degenerate(std::span<const Point2> pts, const char* which) {
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, (p - pts[0]).squaredNorm());
  const double tol = 1e-9 * std::max(scale, 1e-300);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        if (std::abs(cross(pts[j] - pts[i], pts[k] - pts[i])) <= tol) {
          throw DegenerateError(std::string("estimate_homography: collinear ") + which +
                                " points");
        }
      }
    }
  }
}

using Params = Eigen::Matrix<double, 8, 1>;

Eigen::Matrix3d from_params(const Params& h) {
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return m;
}

double transfer_cost(const Params& h, std::span<const Point2> src, std::span<const Point2> dst,
                     Eigen::VectorXd* residual, Eigen::MatrixXd* jacobian) {
  const auto n = static_cast<Eigen::Index>(src.size());
  if (residual) residual->resize(2 * n);
  if (jacobian) jacobian->setZero(2 * n, 8);
  double cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = src[i].x(), y = src[i].y();
    const double w = h(6) * x + h(7) * y + 1.0;
    const double u = h(0) * x + h(1) * y + h(2);
    const double v = h(3) * x + h(4) * y + h(5);
    if (w == 0.0) return std::numeric_limits<double>::infinity();
    const double px = u / w, py = v / w;
    const double rx = px - dst[i].x(), ry = py - dst[i].y();
    cost += rx * rx + ry * ry;
    if (residual) {
      (*residual)(2 * i) = rx;
      (*residual)(2 * i + 1) = ry;
    }
    if (jacobian) {
      auto& jac = *jacobian;
      jac(2 * i, 0) = x / w;
      jac(2 * i, 1) = y / w;
      jac(2 * i, 2) = 1.0 / w;
      jac(2 * i, 6) = -px * x / w;
      jac(2 * i, 7) = -px * y / w;
      jac(2 * i + 1, 3) = x / w;
      jac(2 * i + 1, 4) = y / w;
      jac(2 * i + 1, 5) = 1.0 / w;
      jac(2 * i + 1, 6) = -py * x / w;
      jac(2 * i + 1, 7) = -py * y / w;
    }
  }
  return cost;
}

// Source-plane bilinear sample restricted to support pixels.
bool sample_in_support(const ImagePlane& src, const MaskPlane& support, double sx, double sy,
                       float* out) {
  const long nx = std::lround(sx), ny = std::lround(sy);
  if (nx < 0 || ny < 0 || nx >= src.width || ny >= src.height) return false;
  if (!support.at(static_cast<int>(nx), static_cast<int>(ny))) return false;
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  double acc[3] = {0, 0, 0};
  double wsum = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int xx = x0 + dx, yy = y0 + dy;
      if (xx < 0 || yy < 0 || xx >= src.width || yy >= src.height) continue;
      if (!support.at(xx, yy)) continue;
      const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      if (w == 0.0) continue;
      wsum += w;
      for (int c = 0; c < src.channels; ++c) acc[c] += w * src.at(xx, yy, c);
    }
  }
  if (wsum == 0.0) return false;
  for (int c = 0; c < src.channels; ++c) out[c] = static_cast<float>(acc[c] / wsum);
  return true;
}

}  // namespace

const PartBox* PartBoxes::find(Part part) const {
  for (const auto& b : boxes) {
    if (b.part == part) return &b;
  }
  return nullptr;
}

PartBoxes group_keypoints_to_parts(const KeypointSet& kp, const GarmentCategory& cat,
                                   double margin) {
  PartBoxes out;
  for (Part part : cat.parts) {
    PartBox box;
    box.part = part;
    box.joints = joints_for(part);
    if (all_present(kp, box.joints)) {
      if (auto q = build_box(part, kp, margin)) {
        box.present = true;
        box.corners = *q;
      }
    }
    out.boxes.push_back(std::move(box));
  }
  return out;
}

bool point_in_quad(const Quad& q, const Point2& p) {
  for (int i = 0; i < 4; ++i) {
    if (on_segment(q[i], q[(i + 1) % 4], p)) return true;
  }
  bool inside = false;
  for (int i = 0, j = 3; i < 4; j = i++) {
    const Point2& a = q[i];
    const Point2& b = q[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

MaskPlane quad_mask(const Quad& q, int width, int height) {
  MaskPlane m(width, height);
  double xmin = q[0].x(), xmax = q[0].x(), ymin = q[0].y(), ymax = q[0].y();
  for (const auto& c : q) {
    xmin = std::min(xmin, c.x());
    xmax = std::max(xmax, c.x());
    ymin = std::min(ymin, c.y());
    ymax = std::max(ymax, c.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(xmin)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(xmax)));
  const int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (point_in_quad(q, Point2(x, y))) m.at(x, y) = 1;
    }
  }
  return m;
}

MaskPlane part_support_mask(const ParsingPlane& parsing, const MaskPlane& garment,
                            const Quad& box, Part part, const LabelTable& labels) {
  if (parsing.width != garment.width || parsing.height != garment.height) {
    throw DimensionError("part_support_mask: parsing and garment mask dimensions differ");
  }
  MaskPlane m = quad_mask(box, garment.width, garment.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = m.data[i] && garment.data[i] && labels.part_has(part, parsing.labels[i]);
  }
  return m;
}

Homography Homography::translation(double dx, double dy) {
  Homography h;
  h.m(0, 2) = dx;
  h.m(1, 2) = dy;
  return h;
}

std::optional<Point2> Homography::apply(const Point2& p) const {
  const Eigen::Vector3d q = m * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (q.z() == 0.0 || !std::isfinite(q.z())) return std::nullopt;
  return Point2(q.x() / q.z(), q.y() / q.z());
}

std::optional<Homography> Homography::inverse() const {
  Eigen::Matrix3d inv;
  bool invertible = false;
  double det = 0.0;
  m.computeInverseAndDetWithCheck(inv, det, invertible, 1e-14 * m.cwiseAbs().maxCoeff());
  if (!invertible || !inv.allFinite()) return std::nullopt;
  return Homography{inv}.normalized();
}

Homography Homography::normalized() const {
  if (m(2, 2) == 0.0) return *this;
  return Homography{m / m(2, 2)};
}

Homography dlt_homography(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size() || src.size() < 4) {
    throw DegenerateError("estimate_homography: need at least 4 correspondence pairs");
  }
  const Eigen::Matrix3d ts = normalizer(src), td = normalizer(dst);
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x(), src[i].y(), 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x(), dst[i].y(), 1.0);
    const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  // The null vector of A is the eigenvector of A^T A with the smallest eigenvalue;
  // a full SVD handles the 8x9 square-deficient case uniformly.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  const Eigen::Matrix3d h = td.inverse() * hn * ts;
  return Homography{h}.normalized();
}

HomographyFit estimate_homography(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size() || src.size() < 4) {
    throw DegenerateError("estimate_homography: need at least 4 correspondence pairs");
  }
  check_non_degenerate(src, "source");
  check_non_degenerate(dst, "destination");

  const Homography init = dlt_homography(src, dst);
  if (!init.m.allFinite()) throw DegenerateError("estimate_homography: DLT produced no solution");

  Params h;
  h << init.m(0, 0), init.m(0, 1), init.m(0, 2), init.m(1, 0), init.m(1, 1), init.m(1, 2),
      init.m(2, 0), init.m(2, 1);

  constexpr int kMaxIterations = 100;
  constexpr double kStepTol = 1e-10;
  double lambda = 1e-3;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double cost = transfer_cost(h, src, dst, &r, &jac);

  HomographyFit fit;
  for (int it = 0; it < kMaxIterations; ++it) {
    fit.iterations = it + 1;
    const Eigen::Matrix<double, 8, 8> jtj = jac.transpose() * jac;
    const Params g = jac.transpose() * r;
    Eigen::Matrix<double, 8, 8> damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
    const Params step = damped.ldlt().solve(-g);
    if (!step.allFinite()) break;
    if (step.norm() < kStepTol) {
      fit.converged = true;
      break;
    }
    const Params trial = h + step;
    Eigen::VectorXd r_trial;
    Eigen::MatrixXd jac_trial;
    const double trial_cost = transfer_cost(trial, src, dst, &r_trial, &jac_trial);
    if (trial_cost < cost) {
      h = trial;
      cost = trial_cost;
      r = std::move(r_trial);
      jac = std::move(jac_trial);
      lambda = std::max(lambda / 10.0, 1e-12);
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        // No descent direction left at any damping: a stationary point.
        fit.converged = true;
        break;
      }
    }
  }
  fit.h = Homography{from_params(h)};
  fit.rms_transfer_error = std::sqrt(cost / static_cast<double>(src.size()));
  return fit;
}

ImagePlane warp_image(const ImagePlane& src, const Homography& h, int out_width,
                      int out_height) {
  ImagePlane out(out_width, out_height, src.channels);
  const auto inv = h.inverse();
  if (!inv) return out;
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto s = inv->apply(Point2(x, y));
      if (!s) continue;
      const double sx = s->x(), sy = s->y();
      if (sx < 0 || sy < 0 || sx > src.width - 1 || sy > src.height - 1) continue;
      const int x0 = std::min(static_cast<int>(std::floor(sx)), src.width - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), src.height - 1);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
        const double bot = (1 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
        out.at(x, y, c) = static_cast<float>((1 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

void composite_layers(MorphResult& morph) {
  if (morph.layers.empty()) return;
  const int w = morph.layers.front().coverage.width;
  const int h = morph.layers.front().coverage.height;
  const int ch = morph.layers.front().image.channels;
  morph.warped = ImagePlane(w, h, ch);
  morph.warped_mask = MaskPlane(w, h);
  std::vector<int> owner(static_cast<std::size_t>(w) * h, -1);
  for (std::size_t li = 0; li < morph.layers.size(); ++li) {
    const auto& layer = morph.layers[li];
    for (std::size_t i = 0; i < owner.size(); ++i) {
      if (layer.coverage.data[i]) owner[i] = static_cast<int>(li);
    }
  }
  morph.contributions.assign(morph.layers.size(), MaskPlane(w, h));
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] < 0) continue;
    const auto& layer = morph.layers[static_cast<std::size_t>(owner[i])];
    morph.warped_mask.data[i] = 1;
    morph.contributions[static_cast<std::size_t>(owner[i])].data[i] = 1;
    for (int c = 0; c < ch; ++c) morph.warped.data[i * ch + c] = layer.image.data[i * ch + c];
  }
}

MorphResult warp_piecewise(const ImagePlane& src, std::span<const PartWarp> parts,
                           int out_width, int out_height) {
  MorphResult result;
  result.warped = ImagePlane(out_width, out_height, src.channels);
  result.warped_mask = MaskPlane(out_width, out_height);
  for (const auto& pw : parts) {
    if (!pw.support.same_dims(src.width, src.height)) {
      throw DimensionError("warp_piecewise: support mask for " + to_string(pw.part) +
                           " does not match the source image");
    }
    const auto inv = pw.h.inverse();
    if (!inv) {
      result.warnings.push_back("non-invertible homography for part " + to_string(pw.part) +
                                "; part skipped");
      continue;
    }
    PartLayer layer{pw.part, ImagePlane(out_width, out_height, src.channels),
                    MaskPlane(out_width, out_height)};
    float px[3];
    for (int y = 0; y < out_height; ++y) {
      for (int x = 0; x < out_width; ++x) {
        const Eigen::Vector3d s = inv->m * Eigen::Vector3d(x, y, 1.0);
        if (s.z() <= 0.0) continue;
        if (!sample_in_support(src, pw.support, s.x() / s.z(), s.y() / s.z(), px)) continue;
        layer.coverage.at(x, y) = 1;
        for (int c = 0; c < src.channels; ++c) layer.image.at(x, y, c) = px[c];
      }
    }
    result.layers.push_back(std::move(layer));
  }
  composite_layers(result);
  return result;
}

MorphResult occlusion_gate(const MorphResult& morph, const ParsingPlane& person_parsing,
                           const LabelTable& labels) {
  MorphResult out = morph;
  for (auto& layer : out.layers) {
    if (person_parsing.width != layer.coverage.width ||
        person_parsing.height != layer.coverage.height) {
      throw DimensionError("occlusion_gate: parsing is not aligned with the morph output");
    }
    const int ch = layer.image.channels;
    for (std::size_t i = 0; i < layer.coverage.data.size(); ++i) {
      if (layer.coverage.data[i] && !labels.part_has(layer.part, person_parsing.labels[i])) {
        layer.coverage.data[i] = 0;
        for (int c = 0; c < ch; ++c) layer.image.data[i * ch + c] = 0.0f;
      }
    }
  }
  composite_layers(out);
  return out;
}

MaskPlane transfer_mask_via_iuv(const IUVPlane& src_iuv, const MaskPlane& src_mask,
                                const IUVPlane& dst_iuv, double tau_uv) {
  if (!src_mask.same_dims(src_iuv.width, src_iuv.height)) {
    throw DimensionError("transfer_mask_via_iuv: source mask not aligned with source IUV");
  }
  // Uniform (u,v) grid per part; with cell size >= tau the tau-disk around a
  // query touches at most the 3x3 neighborhood of its cell.
  const double cell = std::max(tau_uv, 1.0 / 256.0);
  const int cells = static_cast<int>(std::ceil(1.0 / cell)) + 1;
  auto cell_of = [&](double c) { return std::clamp(static_cast<int>(c / cell), 0, cells - 1); };

  struct Bucketed {
    std::vector<std::vector<std::uint32_t>> grid;
  };
  std::vector<Bucketed> parts(256);
  for (std::size_t i = 0; i < src_iuv.part_index.size(); ++i) {
    const int p = src_iuv.part_index[i];
    if (p == 0) continue;
    auto& g = parts[p].grid;
    if (g.empty()) g.resize(static_cast<std::size_t>(cells) * cells);
    g[static_cast<std::size_t>(cell_of(src_iuv.v[i])) * cells + cell_of(src_iuv.u[i])]
        .push_back(static_cast<std::uint32_t>(i));
  }

  MaskPlane out(dst_iuv.width, dst_iuv.height);
  for (std::size_t i = 0; i < dst_iuv.part_index.size(); ++i) {
    const int p = dst_iuv.part_index[i];
    if (p == 0 || parts[p].grid.empty()) continue;
    const double u = dst_iuv.u[i], v = dst_iuv.v[i];
    const int cu = cell_of(u), cv = cell_of(v);
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_idx = std::numeric_limits<std::uint32_t>::max();
    for (int gv = std::max(0, cv - 1); gv <= std::min(cells - 1, cv + 1); ++gv) {
      for (int gu = std::max(0, cu - 1); gu <= std::min(cells - 1, cu + 1); ++gu) {
        for (std::uint32_t j : parts[p].grid[static_cast<std::size_t>(gv) * cells + gu]) {
          const double du = src_iuv.u[j] - u, dv = src_iuv.v[j] - v;
          const double d = std::sqrt(du * du + dv * dv);
          if (d < best || (d == best && j < best_idx)) {
            best = d;
            best_idx = j;
          }
        }
      }
    }
    if (best <= tau_uv && src_mask.data[best_idx]) out.data[i] = 1;
  }
  return out;
}

}  // namespace tryw
