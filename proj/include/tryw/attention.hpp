#pragma once

#include <Eigen/Core>
#include <vector>

#include "tryw/ingest.hpp"

namespace tryw {

using TokenMatrix = Eigen::MatrixXd;  // n_tokens x d

enum class StreamOrigin { Person, Garment, Text };

// Single-head query/key/value features of one stream.
struct AttentionStream {
  TokenMatrix q;
  TokenMatrix k;
  TokenMatrix v;
  StreamOrigin origin = StreamOrigin::Person;

  Eigen::Index tokens() const { return q.rows(); }
  Eigen::Index dim() const { return q.cols(); }
  // Throws DimensionError unless Q, K and V agree in shape.
  void validate() const;
};

struct AttentionOutput {
  TokenMatrix features;
  TokenMatrix weights;  // softmax rows over the concatenated keys
};

// Row-wise softmax with max subtraction.
TokenMatrix softmax_rows(const TokenMatrix& scores);

// Area-average pooling of a mask onto a rows x cols token grid, then
// re-binarized at 0.5. Returns one 0/1 weight per token, row-major.
std::vector<double> downsample_mask(const MaskPlane& m, int rows, int cols);

// Person stream: softmax(Q_p [K_p ; K_c]^T / sqrt(d)) [V_p ; V_c * mask].
AttentionOutput cbs_person_attention(const AttentionStream& person,
                                     const AttentionStream& garment,
                                     const std::vector<double>& garment_token_mask);

// Garment stream: A_c = softmax(Q_c [K_c ; K_p]^T / sqrt(d)); output uses only
// the K_c block of A_c against V_c. `weights` holds the full joint A_c.
AttentionOutput cbs_garment_attention(const AttentionStream& garment,
                                      const AttentionStream& person);

// Positional index assignment for a joint text/person/garment sequence.
struct IndexLayout {
  int text_tokens = 0;
  int person_tokens = 0;
  int garment_tokens = 0;
  std::vector<int> text;
  std::vector<int> person;
  std::vector<int> garment;

  int total() const { return text_tokens + person_tokens + garment_tokens; }
  // Largest assigned index + 1.
  int span() const;
  // Indices of a stream's rows: its text tokens followed by its image tokens.
  std::vector<int> person_stream() const;
  std::vector<int> garment_stream() const;
};

// Disjoint contiguous ranges: text [0,l_txt), person [l_txt, l_txt+l_p),
// garment [l_txt+l_p, l).
IndexLayout pir_assign(int text_tokens, int person_tokens, int garment_tokens);

// Baseline where both image inputs restart right after the text segment.
IndexLayout shared_index_layout(int text_tokens, int person_tokens, int garment_tokens);

// Number of (token, token) pairs from different origins sharing an index.
int count_index_collisions(const IndexLayout& layout);

// cos/sin tables: row p, columns 2j and 2j+1 hold angle p * base^(-2j/d).
struct RotaryBasis {
  TokenMatrix cos;
  TokenMatrix sin;
  double base = 10000.0;

  static RotaryBasis make(int length, int dim, double base = 10000.0);
};

// Rotates each row's (x_2j, x_2j+1) pairs by the angles of its index.
TokenMatrix rope_rotate(const TokenMatrix& x, const std::vector<int>& indices,
                        const RotaryBasis& basis);

struct DitAttentionOutput {
  AttentionOutput person;
  AttentionOutput garment;
};

// Both streams carry `layout.text_tokens` text rows followed by their image
// rows. Q and K are rotated at their layout indices; each stream then attends
// over its own keys plus the other stream's image-token keys, aggregating the
// matching values without masking.
DitAttentionOutput cbs_dit_attention(const AttentionStream& person,
                                     const AttentionStream& garment,
                                     const IndexLayout& layout, const RotaryBasis& basis);

}  // namespace tryw
