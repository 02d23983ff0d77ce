#pragma once

// Reference implementations used as test oracles. They are written for
// clarity, share no code with the library, and avoid Eigen's solvers so an
// error in either side shows up as a disagreement.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tryw/attention.hpp"
#include "tryw/ingest.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns eigenvalues
// in descending order; vecs[:, i] is the eigenvector of vals[i], signed so its
// largest-magnitude coordinate is positive.
struct Eigen {
  std::vector<double> vals;
  Mat vecs;
};

inline Eigen jacobi_eigen(Mat a) {
  const std::size_t n = a.size();
  Mat v = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  Eigen out{std::vector<double>(n), zeros(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.vals[i] = a[order[i]][order[i]];
    std::size_t arg = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(v[k][order[i]]) > std::abs(v[arg][order[i]])) arg = k;
    }
    const double sign = v[arg][order[i]] < 0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.vecs[k][i] = sign * v[k][order[i]];
  }
  return out;
}

// Normalized DLT: null vector of A^T A via Jacobi, with Hartley conditioning.
using P2 = std::array<double, 2>;
using H3 = std::array<std::array<double, 3>, 3>;

inline H3 normalize33(const H3& h) {
  H3 o = h;
  for (auto& row : o)
    for (double& x : row) x /= h[2][2];
  return o;
}

inline H3 mul(const H3& a, const H3& b) {
  H3 o{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) o[i][j] += a[i][k] * b[k][j];
  return o;
}

inline H3 similarity_conditioner(const std::vector<P2>& pts, bool inverse) {
  double cx = 0, cy = 0;
  for (const auto& p : pts) {
    cx += p[0];
    cy += p[1];
  }
  cx /= pts.size();
  cy /= pts.size();
  double d = 0;
  for (const auto& p : pts) d += std::hypot(p[0] - cx, p[1] - cy);
  d /= pts.size();
  const double s = std::sqrt(2.0) / d;
  if (!inverse) return H3{{{s, 0, -s * cx}, {0, s, -s * cy}, {0, 0, 1}}};
  return H3{{{1 / s, 0, cx}, {0, 1 / s, cy}, {0, 0, 1}}};
}

inline P2 apply(const H3& h, const P2& p) {
  const double w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
  return {(h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
          (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w};
}

inline H3 dlt(const std::vector<P2>& src, const std::vector<P2>& dst) {
  const H3 ts = similarity_conditioner(src, false);
  const H3 td_inv = similarity_conditioner(dst, true);
  const H3 td = similarity_conditioner(dst, false);
  Mat ata = zeros(9, 9);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const P2 s = apply(ts, src[i]);
    const P2 d = apply(td, dst[i]);
    const double r1[9] = {s[0], s[1], 1, 0, 0, 0, -d[0] * s[0], -d[0] * s[1], -d[0]};
    const double r2[9] = {0, 0, 0, s[0], s[1], 1, -d[1] * s[0], -d[1] * s[1], -d[1]};
    for (int a = 0; a < 9; ++a)
      for (int b = 0; b < 9; ++b) ata[a][b] += r1[a] * r1[b] + r2[a] * r2[b];
  }
  const Eigen e = jacobi_eigen(ata);
  H3 hn{};
  for (int k = 0; k < 9; ++k) hn[k / 3][k % 3] = e.vecs[k][8];
  return normalize33(mul(td_inv, mul(hn, ts)));
}

// Convex-quad inclusion by edge cross-product signs; exact for integer corners.
inline bool in_convex_quad(const std::array<P2, 4>& q, double x, double y) {
  bool pos = false, neg = false;
  for (int i = 0; i < 4; ++i) {
    const P2& a = q[i];
    const P2& b = q[(i + 1) % 4];
    const double c = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    if (c > 0) pos = true;
    if (c < 0) neg = true;
  }
  return !(pos && neg);
}

// Scaled dot-product attention over explicit loops.
inline tryw::TokenMatrix attention(const tryw::TokenMatrix& q, const tryw::TokenMatrix& k,
                                   const tryw::TokenMatrix& v,
                                   tryw::TokenMatrix* weights = nullptr) {
  const auto n = q.rows(), m = k.rows(), d = q.cols();
  tryw::TokenMatrix w(n, m), out = tryw::TokenMatrix::Zero(n, v.cols());
  for (long i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> s(static_cast<std::size_t>(m));
    for (long j = 0; j < m; ++j) {
      double acc = 0;
      for (long c = 0; c < d; ++c) acc += q(i, c) * k(j, c);
      s[j] = acc / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (long j = 0; j < m; ++j) z += std::exp(s[j] - mx);
    for (long j = 0; j < m; ++j) w(i, j) = std::exp(s[j] - mx) / z;
    for (long j = 0; j < m; ++j)
      for (long c = 0; c < v.cols(); ++c) out(i, c) += w(i, j) * v(j, c);
  }
  if (weights) *weights = w;
  return out;
}

inline tryw::TokenMatrix vstack(const tryw::TokenMatrix& a, const tryw::TokenMatrix& b) {
  tryw::TokenMatrix o(a.rows() + b.rows(), a.cols());
  for (long i = 0; i < a.rows(); ++i) o.row(i) = a.row(i);
  for (long i = 0; i < b.rows(); ++i) o.row(a.rows() + i) = b.row(i);
  return o;
}

// RoPE by explicit angle evaluation.
inline tryw::TokenMatrix rope(const tryw::TokenMatrix& x, const std::vector<int>& idx,
                              double base = 10000.0) {
  tryw::TokenMatrix o(x.rows(), x.cols());
  const long d = x.cols();
  for (long r = 0; r < x.rows(); ++r) {
    for (long j = 0; j < d / 2; ++j) {
      const double ang = idx[r] / std::pow(base, 2.0 * j / d);
      o(r, 2 * j) = x(r, 2 * j) * std::cos(ang) - x(r, 2 * j + 1) * std::sin(ang);
      o(r, 2 * j + 1) = x(r, 2 * j) * std::sin(ang) + x(r, 2 * j + 1) * std::cos(ang);
    }
  }
  return o;
}

inline tryw::MaskPlane random_mask(int w, int h, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  tryw::MaskPlane m(w, h);
  for (auto& x : m.data) x = b(rng) ? 1 : 0;
  return m;
}

inline tryw::ImagePlane random_image(int w, int h, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  tryw::ImagePlane img(w, h, c);
  for (auto& x : img.data) x = u(rng);
  return img;
}

inline tryw::LatentTensor random_latent(int c, int h, int w, std::mt19937_64& rng,
                                        double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  tryw::LatentTensor t(c, h, w);
  for (auto& x : t.data) x = static_cast<float>(n(rng));
  return t;
}

inline tryw::TokenMatrix random_tokens(long n, long d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  tryw::TokenMatrix m(n, d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

// Mean plus top-m principal components, channel vectors as samples.
inline std::vector<double> principal_reconstruction(const tryw::LatentTensor& z, int m) {
  const std::size_t c = z.channels, hw = static_cast<std::size_t>(z.height) * z.width;
  std::vector<double> mean(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) mean[ch] += z.data[ch * hw + i];
  for (double& x : mean) x /= hw;
  Mat cov = zeros(c, c);
  for (std::size_t i = 0; i < hw; ++i)
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b)
        cov[a][b] += (z.data[a * hw + i] - mean[a]) * (z.data[b * hw + i] - mean[b]) / hw;
  const Eigen e = jacobi_eigen(cov);
  std::vector<double> out(c * hw);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t a = 0; a < c; ++a) out[a * hw + i] = mean[a];
    for (int k = 0; k < m; ++k) {
      double coeff = 0;
      for (std::size_t a = 0; a < c; ++a) coeff += e.vecs[a][k] * (z.data[a * hw + i] - mean[a]);
      for (std::size_t a = 0; a < c; ++a) out[a * hw + i] += coeff * e.vecs[a][k];
    }
  }
  return out;
}

}  // namespace oracle
