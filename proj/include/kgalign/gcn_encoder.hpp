#pragma once

#include "kgalign/common.hpp"
#include "kgalign/feature_builder.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kgalign {

enum class Ablation { none, no_relation, no_attribute, no_highway };

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);

// Highway channel for one aspect (relation or attribute). Biases are 1 x h.
struct ChannelParams {
  Matrix w_in;    // k x h
  Matrix b_in;
  Matrix w_gate;  // h x h
  Matrix b_gate;
  Matrix w_out;   // h x h
  Matrix b_out;
};

struct EncoderDims {
  std::size_t d = 200;  // topology width
  std::size_t h = 200;  // aspect channel width
  std::size_t k_relation = 0;
  std::size_t k_attribute = 0;
  std::size_t n_source = 0;
  std::size_t n_target = 0;
  auto operator<=>(const EncoderDims&) const = default;
};

// Every trainable tensor of the structural encoder. The GCN and channel
// weights are shared by both graphs; each graph owns its initial features.
struct EncoderParams {
  EncoderDims dims;
  Matrix w_gcn1;  // d x d
  Matrix w_gcn2;  // d x d
  ChannelParams relation;
  ChannelParams attribute;
  Matrix h0_source;  // n_source x d
  Matrix h0_target;  // n_target x d

  struct NamedTensor {
    std::string_view name;
    Matrix* tensor;
  };
  struct ConstNamedTensor {
    std::string_view name;
    const Matrix* tensor;
  };
  // Fixed declaration order; checkpoints and optimizers rely on it.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;

  EncoderParams zeros_like() const;
};

struct EncoderInit {
  std::uint64_t rng_seed = 1;
  double gate_bias = -1.0;
};

// Glorot-uniform weights, zero biases except the gate bias, truncated-normal
// initial features.
EncoderParams init_encoder(const EncoderDims& dims, const EncoderInit& init = {});

// out = activation(adj * in * weight); ReLU when `relu`, identity otherwise.
Matrix gcn_layer(const SparseNormalizedAdjacency& adj, const Matrix& in, const Matrix& weight,
                 bool relu);

struct ChannelTrace {
  Matrix pre_in;    // X W_in + b_in
  Matrix carry;     // S = relu(pre_in)
  Matrix gate;      // T = sigmoid(S W_gate + b_gate)
  Matrix pre_out;   // S W_out + b_out
  Matrix transform; // relu(pre_out)
  Matrix output;    // G
};

// G = relu(S W_out + b_out) * T + S * (1 - T); with highway disabled G is the
// plain transform and `gate` is left empty.
ChannelTrace highway_channel(const Matrix& x, const ChannelParams& p, bool highway = true);

struct EncoderOutput {
  Matrix topology;   // n x d
  Matrix relation;   // n x h, empty when ablated
  Matrix attribute;  // n x h, empty when ablated
  Matrix hybrid;     // row-normalized concatenation
};

// Intermediates kept for the backward pass.
struct EncoderTrace {
  Matrix agg1;    // A H0
  Matrix pre1;    // A H0 W1
  Matrix hidden;  // relu(pre1)
  Matrix agg2;    // A hidden
  ChannelTrace relation;
  ChannelTrace attribute;
  Matrix concat;  // before normalization
  EncoderOutput output;
};

std::size_t hybrid_width(const EncoderDims& dims, Ablation ablation);

EncoderTrace encode_graph_traced(const GraphFeatures& features, const Matrix& h0,
                                 const EncoderParams& params, Ablation ablation);

struct EncodedPair {
  EncoderOutput source;
  EncoderOutput target;
};

EncodedPair encode(const PairFeatures& features, const EncoderParams& params,
                   Ablation ablation = Ablation::none);

}  // namespace kgalign
