#pragma once

// Randomized scenarios shared by the unit tests and the acceptance runner.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/LU>

#include "oracles.hpp"
#include "tryw/geometry.hpp"
#include "tryw/ppg.hpp"
#include "tryw/proxy.hpp"

namespace scenario {

using namespace tryw;

inline oracle::H3 to_h3(const Eigen::Matrix3d& m) {
  oracle::H3 o{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) o[i][j] = m(i, j);
  return oracle::normalize33(o);
}

inline double max_entry_diff(const Homography& h, const oracle::H3& o) {
  double d = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(h.m(i, j) - o[i][j]));
  return d;
}

inline std::vector<oracle::P2> to_p2(const std::vector<Point2>& pts) {
  std::vector<oracle::P2> out;
  for (const auto& p : pts) out.push_back({p.x(), p.y()});
  return out;
}

// A mild random projective map and n well-spread points on [0,100]^2
// (pairwise distance >= 20, every triangle has area >= 100).
struct HomographyProblem {
  oracle::H3 h0;
  std::vector<Point2> src, dst;
};

inline HomographyProblem random_homography_problem(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> lin(-0.3, 0.3), tr(-20, 20), persp(-1e-3, 1e-3),
      coord(0, 100);
  HomographyProblem p;
  p.h0 = {{{1 + lin(rng), lin(rng), tr(rng)},
           {lin(rng), 1 + lin(rng), tr(rng)},
           {persp(rng), persp(rng), 1}}};
  while (static_cast<int>(p.src.size()) < n) {
    const Point2 c(coord(rng), coord(rng));
    bool ok = true;
    for (std::size_t i = 0; i < p.src.size() && ok; ++i) {
      if ((c - p.src[i]).norm() < 20) ok = false;
      for (std::size_t j = i + 1; j < p.src.size() && ok; ++j) {
        const Point2 a = p.src[j] - p.src[i], b = c - p.src[i];
        if (std::abs(a.x() * b.y() - a.y() * b.x()) < 200) ok = false;
      }
    }
    if (ok) p.src.push_back(c);
  }
  for (const auto& s : p.src) {
    const auto q = oracle::apply(p.h0, {s.x(), s.y()});
    p.dst.emplace_back(q[0], q[1]);
  }
  return p;
}

// Forward-then-inverse warp of a coordinate-encoded 64x64 image. Reports the
// worst coordinate error over interior pixels whose forward image stays
// inside the frame.
struct RoundTrip {
  double max_error = 0.0;
  int interior = 0;
};

inline RoundTrip warp_round_trip() {
  const int n = 64;
  ImagePlane coords(n, n, 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      coords.at(x, y, 0) = static_cast<float>(x) / (n - 1);
      coords.at(x, y, 1) = static_cast<float>(y) / (n - 1);
    }
  Homography h;
  const double a = 0.08;
  h.m << 0.92 * std::cos(a), -0.92 * std::sin(a), 6, 0.92 * std::sin(a), 0.92 * std::cos(a), 1,
      2e-4, -1e-4, 1;
  const ImagePlane there = warp_image(coords, h, n, n);
  const ImagePlane back = warp_image(there, *h.inverse(), n, n);
  RoundTrip rt;
  for (int y = 2; y < n - 2; ++y)
    for (int x = 2; x < n - 2; ++x) {
      const auto fwd = h.apply({double(x), double(y)});
      if (!fwd || fwd->x() < 1 || fwd->y() < 1 || fwd->x() > n - 2 || fwd->y() > n - 2) continue;
      ++rt.interior;
      rt.max_error = std::max({rt.max_error, std::abs(double(back.at(x, y, 0)) * (n - 1) - x),
                               std::abs(double(back.at(x, y, 1)) * (n - 1) - y)});
    }
  return rt;
}

// Two overlapping parts on a 16x16 fixture compared against per-pixel
// evaluation of the piecewise map: coverage and ownership must match and each
// value must lie within the range of the support pixels around its source.
struct TwoPartAgreement {
  int agree = 0;
  int total = 0;
  int overlap = 0;
};

inline TwoPartAgreement two_part_warp() {
  const int n = 16;
  ImagePlane src(n, n, 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      src.at(x, y, 0) = 0.05f * x;
      src.at(x, y, 1) = 0.05f * y;
      src.at(x, y, 2) = 0.5f + 0.02f * (x - y);
    }
  MaskPlane left(n, n), right(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (x < 9) left.at(x, y) = 1;
      if (x >= 7) right.at(x, y) = 1;
    }
  Homography ha, hb;
  ha.m << 1.0, 0.1, 1.5, -0.05, 0.95, 0.5, 0.002, 0.0, 1.0;
  hb.m << 0.9, 0.0, -1.2, 0.08, 1.05, 0.7, 0.0, -0.003, 1.0;
  const PartWarp parts[] = {{Part::Torso, left, ha}, {Part::LeftUpperArm, right, hb}};
  const MorphResult r = warp_piecewise(src, parts, n, n);

  const oracle::H3 inv[2] = {to_h3(ha.m.inverse()), to_h3(hb.m.inverse())};
  const MaskPlane* supports[2] = {&left, &right};
  TwoPartAgreement out;
  out.total = n * n;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      int owner = -1, covering = 0;
      double lo[3] = {}, hi[3] = {};
      for (int p = 0; p < 2; ++p) {
        const auto s = oracle::apply(inv[p], {double(x), double(y)});
        const long nx = std::lround(s[0]), ny = std::lround(s[1]);
        if (nx < 0 || ny < 0 || nx >= n || ny >= n || !supports[p]->at(nx, ny)) continue;
        owner = p;
        ++covering;
        const int x0 = static_cast<int>(std::floor(s[0])), y0 = static_cast<int>(std::floor(s[1]));
        for (int c = 0; c < 3; ++c) {
          lo[c] = hi[c] = src.at(nx, ny, c);
          for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
              const int xx = x0 + dx, yy = y0 + dy;
              if (xx < 0 || yy < 0 || xx >= n || yy >= n || !supports[p]->at(xx, yy)) continue;
              lo[c] = std::min<double>(lo[c], src.at(xx, yy, c));
              hi[c] = std::max<double>(hi[c], src.at(xx, yy, c));
            }
        }
      }
      if (covering == 2) ++out.overlap;
      bool ok = r.warped_mask.at(x, y) == (owner >= 0 ? 1 : 0);
      if (ok && owner >= 0) {
        ok = r.contributions[static_cast<std::size_t>(owner)].at(x, y) == 1;
        for (int c = 0; c < 3; ++c)
          ok = ok && r.warped.at(x, y, c) >= lo[c] - 1e-6 && r.warped.at(x, y, c) <= hi[c] + 1e-6;
      }
      if (ok && owner < 0) {
        for (int c = 0; c < 3; ++c) ok = ok && r.warped.at(x, y, c) == 0.0f;
      }
      out.agree += ok;
    }
  }
  return out;
}

inline ProxyRecipe random_recipe(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1), p(0.1, 0.6);
  ProxyRecipe r;
  r.source_garment = oracle::random_mask(w, h, rng, p(rng));
  r.dense_body = oracle::random_mask(w, h, rng, p(rng));
  r.agnostic = oracle::random_mask(w, h, rng, p(rng));
  r.projected_garment = oracle::random_mask(w, h, rng, p(rng));
  r.warped_garment = oracle::random_mask(w, h, rng, 0.5 * p(rng));
  r.skin_color = {u(rng), u(rng), u(rng)};
  r.garment_color = {u(rng), u(rng), u(rng)};
  return r;
}

// Replays the four composition steps pixel by pixel.
struct Simulated {
  std::vector<float> image;
  std::vector<Provenance> provenance;
};

inline Simulated simulate_proxy(const ImagePlane& person, const ImagePlane& inpainted,
                                const ProxyRecipe& r) {
  Simulated s{inpainted.data, std::vector<Provenance>(person.pixel_count())};
  for (std::size_t i = 0; i < person.pixel_count(); ++i) {
    const bool ms = r.source_garment.data[i];
    const bool mb = r.dense_body.data[i] && ms;
    const bool mt = (r.agnostic.data[i] && r.projected_garment.data[i]) || r.warped_garment.data[i];
    const bool other = !(ms || mb || mt);
    Provenance prov = Provenance::Preserved;
    if (ms) prov = Provenance::Background;
    if (mb) {
      for (int c = 0; c < 3; ++c) s.image[i * 3 + c] = static_cast<float>(r.skin_color[c]);
      prov = Provenance::Body;
    }
    if (mt) {
      for (int c = 0; c < 3; ++c) s.image[i * 3 + c] = static_cast<float>(r.garment_color[c]);
      prov = Provenance::GarmentCue;
    }
    if (other) {
      for (int c = 0; c < 3; ++c) s.image[i * 3 + c] = person.data[i * 3 + c];
      prov = Provenance::Preserved;
    }
    s.provenance[i] = prov;
  }
  return s;
}

inline double l2(const LatentTensor& a, const LatentTensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Two equally weighted, tight modes with the proxy placed on mode A. Counts
// the seeds in [0, seeds) whose sample ends closer to A than to B.
class TwoModeMixture {
 public:
  TwoModeMixture() {
    std::mt19937_64 rng(21);
    a_ = oracle::random_latent(4, 8, 8, rng, 0.6);
    b_ = oracle::random_latent(4, 8, 8, rng, 0.6);
  }

  int hits_on_proxy_mode(const GuidanceMode& mode, int seeds, int steps = 50) const {
    ToyDenoiser den({a_, b_}, {1, 1}, 0.02);
    const NoiseSchedule s = NoiseSchedule::linear_ddim(steps, 1.0);
    int hits = 0;
    for (int seed = 0; seed < seeds; ++seed) {
      const auto u = static_cast<std::uint64_t>(seed);
      const SampleResult r =
          sample(initial_noise(den.geometry(), u), den, Conditioning{}, s, a_, mode, {64, u});
      hits += l2(r.z0, a_) < l2(r.z0, b_);
    }
    return hits;
  }

 private:
  LatentTensor a_, b_;
};

}  // namespace scenario
