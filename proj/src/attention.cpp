#include "tryw/attention.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "tryw/error.hpp"

namespace tryw {

namespace {

TokenMatrix stack(const TokenMatrix& top, const TokenMatrix& bottom) {
  TokenMatrix out(top.rows() + bottom.rows(), std::max(top.cols(), bottom.cols()));
  if (top.rows() > 0) out.topRows(top.rows()) = top;
  if (bottom.rows() > 0) out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void require_same_dim(const AttentionStream& a, const AttentionStream& b, const char* op) {
  a.validate();
  b.validate();
  if (b.tokens() > 0 && a.dim() != b.dim()) {
    throw DimensionError(std::string(op) + ": feature dimensions differ");
  }
}

AttentionOutput attend(const TokenMatrix& q, const TokenMatrix& keys, const TokenMatrix& values) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  AttentionOutput out;
  out.weights = softmax_rows((q * keys.transpose()) * scale);
  out.features = out.weights * values;
  return out;
}

}  // namespace

void AttentionStream::validate() const {
  if (k.rows() != q.rows() || v.rows() != q.rows() || k.cols() != q.cols() ||
      v.cols() != q.cols()) {
    throw DimensionError("attention stream: Q, K, V shapes differ");
  }
}

TokenMatrix softmax_rows(const TokenMatrix& scores) {
  TokenMatrix out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double mx = scores.row(r).maxCoeff();
    out.row(r) = (scores.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

std::vector<double> downsample_mask(const MaskPlane& m, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw DimensionError("downsample_mask: empty token grid");
  std::vector<double> out(static_cast<std::size_t>(rows) * cols, 0.0);
  const double sy = static_cast<double>(m.height) / rows;
  const double sx = static_cast<double>(m.width) / cols;
  for (int r = 0; r < rows; ++r) {
    const double y0 = r * sy, y1 = (r + 1) * sy;
    for (int c = 0; c < cols; ++c) {
      const double x0 = c * sx, x1 = (c + 1) * sx;
      double covered = 0.0;
      for (int y = static_cast<int>(std::floor(y0)); y < static_cast<int>(std::ceil(y1)); ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        for (int x = static_cast<int>(std::floor(x0)); x < static_cast<int>(std::ceil(x1));
             ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (m.at(x, y)) covered += wx * wy;
        }
      }
      out[static_cast<std::size_t>(r) * cols + c] = covered / (sx * sy) >= 0.5 ? 1.0 : 0.0;
    }
  }
  return out;
}

AttentionOutput cbs_person_attention(const AttentionStream& person,
                                     const AttentionStream& garment,
                                     const std::vector<double>& garment_token_mask) {
  require_same_dim(person, garment, "cbs_person_attention");
  if (garment_token_mask.size() != static_cast<std::size_t>(garment.tokens())) {
    throw DimensionError("cbs_person_attention: one mask weight per garment token required");
  }
  TokenMatrix masked_v = garment.v;
  for (Eigen::Index i = 0; i < masked_v.rows(); ++i) {
    masked_v.row(i) *= garment_token_mask[static_cast<std::size_t>(i)];
  }
  return attend(person.q, stack(person.k, garment.k), stack(person.v, masked_v));
}

AttentionOutput cbs_garment_attention(const AttentionStream& garment,
                                      const AttentionStream& person) {
  require_same_dim(garment, person, "cbs_garment_attention");
  const double scale = 1.0 / std::sqrt(static_cast<double>(garment.dim()));
  AttentionOutput out;
  out.weights = softmax_rows((garment.q * stack(garment.k, person.k).transpose()) * scale);
  out.features = out.weights.leftCols(garment.tokens()) * garment.v;
  return out;
}

int IndexLayout::span() const {
  int mx = -1;
  for (const auto* seg : {&text, &person, &garment}) {
    for (int i : *seg) mx = std::max(mx, i);
  }
  return mx + 1;
}

std::vector<int> IndexLayout::person_stream() const {
  std::vector<int> out = text;
  out.insert(out.end(), person.begin(), person.end());
  return out;
}

std::vector<int> IndexLayout::garment_stream() const {
  std::vector<int> out = text;
  out.insert(out.end(), garment.begin(), garment.end());
  return out;
}

IndexLayout pir_assign(int text_tokens, int person_tokens, int garment_tokens) {
  if (text_tokens < 0 || person_tokens < 0 || garment_tokens < 0) {
    throw DimensionError("pir_assign: negative token count");
  }
  IndexLayout l{text_tokens, person_tokens, garment_tokens, {}, {}, {}};
  for (int i = 0; i < text_tokens; ++i) l.text.push_back(i);
  for (int i = 0; i < person_tokens; ++i) l.person.push_back(text_tokens + i);
  for (int i = 0; i < garment_tokens; ++i) l.garment.push_back(text_tokens + person_tokens + i);
  return l;
}

IndexLayout shared_index_layout(int text_tokens, int person_tokens, int garment_tokens) {
  IndexLayout l = pir_assign(text_tokens, person_tokens, 0);
  l.garment_tokens = garment_tokens;
  for (int i = 0; i < garment_tokens; ++i) l.garment.push_back(text_tokens + i);
  return l;
}

int count_index_collisions(const IndexLayout& layout) {
  const std::vector<int>* segs[3] = {&layout.text, &layout.person, &layout.garment};
  int collisions = 0;
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const std::multiset<int> other(segs[b]->begin(), segs[b]->end());
      for (int i : *segs[a]) collisions += static_cast<int>(other.count(i));
    }
  }
  return collisions;
}

RotaryBasis RotaryBasis::make(int length, int dim, double base) {
  if (dim % 2 != 0) throw DimensionError("rotary basis: feature dimension must be even");
  RotaryBasis b;
  b.base = base;
  b.cos.resize(length, dim);
  b.sin.resize(length, dim);
  for (int p = 0; p < length; ++p) {
    for (int j = 0; j < dim / 2; ++j) {
      const double theta = std::pow(base, -2.0 * j / dim);
      const double angle = p * theta;
      b.cos(p, 2 * j) = b.cos(p, 2 * j + 1) = std::cos(angle);
      b.sin(p, 2 * j) = b.sin(p, 2 * j + 1) = std::sin(angle);
    }
  }
  return b;
}

TokenMatrix rope_rotate(const TokenMatrix& x, const std::vector<int>& indices,
                        const RotaryBasis& basis) {
  if (x.cols() % 2 != 0) throw DimensionError("rope_rotate: feature dimension must be even");
  if (indices.size() != static_cast<std::size_t>(x.rows())) {
    throw DimensionError("rope_rotate: one index per token row required");
  }
  if (basis.cos.cols() != x.cols()) {
    throw DimensionError("rope_rotate: basis dimension does not match the features");
  }
  TokenMatrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int p = indices[static_cast<std::size_t>(r)];
    if (p < 0 || p >= basis.cos.rows()) {
      throw DimensionError("rope_rotate: index " + std::to_string(p) + " outside the basis");
    }
    for (Eigen::Index j = 0; j < x.cols(); j += 2) {
      const double c = basis.cos(p, j), s = basis.sin(p, j);
      const double a = x(r, j), b = x(r, j + 1);
      out(r, j) = a * c - b * s;
      out(r, j + 1) = a * s + b * c;
    }
  }
  return out;
}

DitAttentionOutput cbs_dit_attention(const AttentionStream& person,
                                     const AttentionStream& garment,
                                     const IndexLayout& layout, const RotaryBasis& basis) {
  require_same_dim(person, garment, "cbs_dit_attention");
  const int lt = layout.text_tokens;
  if (person.tokens() != lt + layout.person_tokens ||
      garment.tokens() != lt + layout.garment_tokens) {
    throw DimensionError("cbs_dit_attention: stream lengths do not match the index layout");
  }
  const auto p_idx = layout.person_stream();
  const auto g_idx = layout.garment_stream();
  const TokenMatrix qp = rope_rotate(person.q, p_idx, basis);
  const TokenMatrix kp = rope_rotate(person.k, p_idx, basis);
  const TokenMatrix qg = rope_rotate(garment.q, g_idx, basis);
  const TokenMatrix kg = rope_rotate(garment.k, g_idx, basis);

  const TokenMatrix kg_img = kg.middleRows(lt, layout.garment_tokens);
  const TokenMatrix vg_img = garment.v.middleRows(lt, layout.garment_tokens);
  const TokenMatrix kp_img = kp.middleRows(lt, layout.person_tokens);
  const TokenMatrix vp_img = person.v.middleRows(lt, layout.person_tokens);

  DitAttentionOutput out;
  out.person = attend(qp, stack(kp, kg_img), stack(person.v, vg_img));
  out.garment = attend(qg, stack(kg, kp_img), stack(garment.v, vp_img));
  return out;
}

}  // namespace tryw
