#include "kgalign/gcn_encoder.hpp"

#include <cmath>
#include <random>

namespace kgalign {

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_relation: return "no-rel";
    case Ablation::no_attribute: return "no-attr";
    case Ablation::no_highway: return "no-highway";
  }
  return "none";
}

Ablation parse_ablation(std::string_view s) {
  if (s == "none") return Ablation::none;
  if (s == "no-rel") return Ablation::no_relation;
  if (s == "no-attr") return Ablation::no_attribute;
  if (s == "no-highway") return Ablation::no_highway;
  throw ConfigError("unknown ablation '" + std::string(s) + "' (expected none, no-rel, no-attr, no-highway)");
}

std::vector<EncoderParams::NamedTensor> EncoderParams::tensors() {
  return {{"w_gcn1", &w_gcn1},
          {"w_gcn2", &w_gcn2},
          {"rel.w_in", &relation.w_in},
          {"rel.b_in", &relation.b_in},
          {"rel.w_gate", &relation.w_gate},
          {"rel.b_gate", &relation.b_gate},
          {"rel.w_out", &relation.w_out},
          {"rel.b_out", &relation.b_out},
          {"attr.w_in", &attribute.w_in},
          {"attr.b_in", &attribute.b_in},
          {"attr.w_gate", &attribute.w_gate},
          {"attr.b_gate", &attribute.b_gate},
          {"attr.w_out", &attribute.w_out},
          {"attr.b_out", &attribute.b_out},
          {"h0_source", &h0_source},
          {"h0_target", &h0_target}};
}

std::vector<EncoderParams::ConstNamedTensor> EncoderParams::tensors() const {
  std::vector<ConstNamedTensor> out;
  for (const auto& t : const_cast<EncoderParams*>(this)->tensors()) out.push_back({t.name, t.tensor});
  return out;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  for (auto& t : z.tensors()) t.tensor->setZero();
  return z;
}

namespace {

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(rows + cols, 1)));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng);
  return m;
}

ChannelParams init_channel(Eigen::Index k, Eigen::Index h, double gate_bias, std::mt19937_64& rng) {
  ChannelParams c;
  c.w_in = glorot(k, h, rng);
  c.b_in = Matrix::Zero(1, h);
  c.w_gate = glorot(h, h, rng);
  c.b_gate = Matrix::Constant(1, h, gate_bias);
  c.w_out = glorot(h, h, rng);
  c.b_out = Matrix::Zero(1, h);
  return c;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  require(x.cols() == w.rows(), "affine: input width does not match weight rows");
  require(b.rows() == 1 && b.cols() == w.cols(), "affine: bias shape mismatch");
  Matrix out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

}  // namespace

EncoderParams init_encoder(const EncoderDims& dims, const EncoderInit& init) {
  require(dims.d >= 1 && dims.h >= 1, "init_encoder: d and h must be >= 1");
  const auto d = static_cast<Eigen::Index>(dims.d);
  const auto h = static_cast<Eigen::Index>(dims.h);
  std::mt19937_64 rng(derive_seed(init.rng_seed, 0));
  EncoderParams p;
  p.dims = dims;
  p.w_gcn1 = glorot(d, d, rng);
  p.w_gcn2 = glorot(d, d, rng);
  p.relation = init_channel(static_cast<Eigen::Index>(dims.k_relation), h, init.gate_bias, rng);
  p.attribute = init_channel(static_cast<Eigen::Index>(dims.k_attribute), h, init.gate_bias, rng);
  p.h0_source = init_features(dims.n_source, dims.d, derive_seed(init.rng_seed, 1));
  p.h0_target = init_features(dims.n_target, dims.d, derive_seed(init.rng_seed, 2));
  return p;
}

Matrix gcn_layer(const SparseNormalizedAdjacency& adj, const Matrix& in, const Matrix& weight,
                 bool relu_activation) {
  require(in.rows() == adj.n, "gcn_layer: feature rows must equal node count");
  require(in.cols() == weight.rows(), "gcn_layer: feature width must equal weight rows");
  Matrix out = adj.multiply(in) * weight;
  if (relu_activation) out = relu(out);
  return out;
}

ChannelTrace highway_channel(const Matrix& x, const ChannelParams& p, bool highway) {
  ChannelTrace t;
  t.pre_in = affine(x, p.w_in, p.b_in);
  t.carry = relu(t.pre_in);
  t.pre_out = affine(t.carry, p.w_out, p.b_out);
  t.transform = relu(t.pre_out);
  if (!highway) {
    t.output = t.transform;
    return t;
  }
  t.gate = affine(t.carry, p.w_gate, p.b_gate).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  t.output = t.transform.cwiseProduct(t.gate) + t.carry.cwiseProduct((1.0 - t.gate.array()).matrix());
  return t;
}

std::size_t hybrid_width(const EncoderDims& dims, Ablation ablation) {
  std::size_t channels = 2;
  if (ablation == Ablation::no_relation || ablation == Ablation::no_attribute) channels = 1;
  return dims.d + channels * dims.h;
}

EncoderTrace encode_graph_traced(const GraphFeatures& features, const Matrix& h0,
                                 const EncoderParams& params, Ablation ablation) {
  const auto& adj = features.adjacency;
  require(h0.rows() == adj.n && features.relation.rows() == adj.n && features.attribute.rows() == adj.n,
          "encode: feature rows must equal node count");
  require(h0.cols() == params.w_gcn1.rows(), "encode: initial feature width must equal d");

  EncoderTrace t;
  t.agg1 = adj.multiply(h0);
  t.pre1 = t.agg1 * params.w_gcn1;
  t.hidden = relu(t.pre1);
  t.agg2 = adj.multiply(t.hidden);
  t.output.topology = t.agg2 * params.w_gcn2;

  const bool highway = ablation != Ablation::no_highway;
  const bool use_rel = ablation != Ablation::no_relation;
  const bool use_attr = ablation != Ablation::no_attribute;
  if (use_rel) {
    t.relation = highway_channel(features.relation, params.relation, highway);
    t.output.relation = t.relation.output;
  }
  if (use_attr) {
    t.attribute = highway_channel(features.attribute, params.attribute, highway);
    t.output.attribute = t.attribute.output;
  }

  const auto n = static_cast<Eigen::Index>(adj.n);
  const auto d = t.output.topology.cols();
  const auto wr = t.output.relation.cols();
  const auto wa = t.output.attribute.cols();
  t.concat.resize(n, d + wr + wa);
  t.concat.leftCols(d) = t.output.topology;
  if (use_rel) t.concat.middleCols(d, wr) = t.output.relation;
  if (use_attr) t.concat.rightCols(wa) = t.output.attribute;
  t.output.hybrid = row_normalized(t.concat);
  return t;
}

EncodedPair encode(const PairFeatures& features, const EncoderParams& params, Ablation ablation) {
  return {encode_graph_traced(features.source, params.h0_source, params, ablation).output,
          encode_graph_traced(features.target, params.h0_target, params, ablation).output};
}

}  // namespace kgalign
