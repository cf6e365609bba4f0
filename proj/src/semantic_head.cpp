#include "kgalign/semantic_head.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_map>

namespace kgalign {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::unknown: return "unknown";
    case Provenance::real_encoder: return "real-encoder";
    case Provenance::hash_fixture: return "hash-fixture";
  }
  return "unknown";
}

namespace {

Provenance parse_provenance(std::string_view s) {
  if (s == "real-encoder") return Provenance::real_encoder;
  if (s == "hash-fixture") return Provenance::hash_fixture;
  return Provenance::unknown;
}

struct Header {
  std::size_t dim = 0;
  Provenance provenance = Provenance::unknown;
};

// Consumes `#key=value` lines; returns false on the first non-header line.
bool parse_header_line(const std::string& line, Header& header, const std::string& file, std::size_t lineno) {
  if (line.empty() || line[0] != '#') return false;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ParseError(file, lineno, "header line without '='");
  const std::string_view key(line.data() + 1, eq - 1);
  const std::string_view value(line.data() + eq + 1, line.size() - eq - 1);
  if (key == "dim") {
    const auto d = parse_double(value);
    if (!d || *d < 1 || *d != std::floor(*d)) throw ParseError(file, lineno, "invalid #dim value");
    header.dim = static_cast<std::size_t>(*d);
  } else if (key == "provenance") {
    header.provenance = parse_provenance(value);
  }
  return true;
}

// Fills `table` rows from label-keyed vectors; throws listing missing labels.
TextEmbeddingTable assemble(const std::unordered_map<std::string, Eigen::RowVectorXd>& by_label,
                            const Header& header, const Graph& graph, const std::string& file) {
  TextEmbeddingTable table;
  table.provenance = header.provenance;
  table.rows.resize(static_cast<Eigen::Index>(graph.entity_count()), static_cast<Eigen::Index>(header.dim));
  std::vector<std::string> missing;
  std::size_t missing_count = 0;
  for (std::size_t i = 0; i < graph.entity_count(); ++i) {
    const auto& label = graph.entities.label(static_cast<std::int32_t>(i));
    auto it = by_label.find(label);
    if (it == by_label.end()) {
      if (missing.size() < 20) missing.push_back(label);
      ++missing_count;
      continue;
    }
    table.rows.row(static_cast<Eigen::Index>(i)) = it->second;
  }
  if (missing_count > 0) {
    std::string msg = file + ": " + std::to_string(missing_count) + " entities have no text embedding:";
    for (const auto& m : missing) msg += " " + m;
    if (missing_count > missing.size()) msg += " ...";
    throw LoadError(msg);
  }
  return table;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

// Adds scale * d cos(a, b) / da and / db.
void accumulate_cosine_grad(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                            const Eigen::Ref<const Eigen::RowVectorXd>& b, double scale,
                            Eigen::Ref<Eigen::RowVectorXd> ga, Eigen::Ref<Eigen::RowVectorXd> gb) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return;
  const double c = a.dot(b) / (na * nb);
  ga += scale * (b / (na * nb) - c * a / (na * na));
  gb += scale * (a / (na * nb) - c * b / (nb * nb));
}

void mlp_backward(const Matrix& input, const MlpTrace& trace, const MlpParams& params, const Matrix& grad_normalized,
                  MlpParams& grad) {
  const Matrix grad_out = normalize_rows_backward(trace.output, trace.normalized, grad_normalized);
  grad.w2.noalias() += trace.hidden.transpose() * grad_out;
  grad.b2 += grad_out.colwise().sum();
  const Matrix grad_hidden = (grad_out * params.w2.transpose())
                                 .binaryExpr(trace.pre_hidden, [](double g, double p) { return p > 0.0 ? g : 0.0; });
  grad.w1.noalias() += input.transpose() * grad_hidden;
  grad.b1 += grad_hidden.colwise().sum();
}

}  // namespace

TextEmbeddingTable load_text_embeddings(const std::filesystem::path& path, const Graph& graph) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  const std::string file = path.string();
  Header header;
  std::unordered_map<std::string, Eigen::RowVectorXd> by_label;
  std::string line;
  std::size_t lineno = 0;
  bool in_header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_header && parse_header_line(line, header, file, lineno)) continue;
    if (in_header && header.dim == 0) throw FormatError(file + ": missing #dim=<d> header");
    in_header = false;
    if (line.empty()) continue;

    const auto fields = split_tabs(line);
    if (fields.size() != header.dim + 1) {
      throw FormatError(file + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.dim) +
                        " values, got " + std::to_string(fields.size() - 1));
    }
    if (fields[0].empty()) throw ParseError(file, lineno, "empty entity label");
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(header.dim));
    for (std::size_t k = 0; k < header.dim; ++k) {
      const auto v = parse_double(fields[k + 1]);
      if (!v || !std::isfinite(*v)) throw ParseError(file, lineno, "invalid value in column " + std::to_string(k + 2));
      row[static_cast<Eigen::Index>(k)] = *v;
    }
    if (!by_label.emplace(std::string(fields[0]), std::move(row)).second) {
      throw FormatError(file + ":" + std::to_string(lineno) + ": duplicate label '" + std::string(fields[0]) + "'");
    }
  }
  if (header.dim == 0) throw FormatError(file + ": missing #dim=<d> header");
  return assemble(by_label, header, graph, file);
}

TextEmbeddingTable load_text_embeddings_binary(const std::filesystem::path& data_path,
                                               const std::filesystem::path& index_path, const Graph& graph) {
  std::ifstream index(index_path);
  if (!index) throw LoadError("cannot open " + index_path.string());
  const std::string file = index_path.string();
  Header header;
  std::vector<std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(index, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (labels.empty() && parse_header_line(line, header, file, lineno)) continue;
    if (line.empty()) continue;
    labels.push_back(line);
  }
  if (header.dim == 0) throw FormatError(file + ": missing #dim=<d> header");

  std::ifstream data(data_path, std::ios::binary);
  if (!data) throw LoadError("cannot open " + data_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());
  const std::size_t expected = labels.size() * header.dim * 4;
  if (bytes.size() != expected) {
    throw FormatError(data_path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(bytes.size()));
  }
  std::unordered_map<std::string, Eigen::RowVectorXd> by_label;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(header.dim));
    for (std::size_t k = 0; k < header.dim; ++k) {
      const unsigned char* p = bytes.data() + (r * header.dim + k) * 4;
      const std::uint32_t word = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      const float v = std::bit_cast<float>(word);
      if (!std::isfinite(v)) throw FormatError(data_path.string() + ": non-finite value in row " + std::to_string(r));
      row[static_cast<Eigen::Index>(k)] = v;
    }
    if (!by_label.emplace(labels[r], std::move(row)).second) {
      throw FormatError(file + ": duplicate label '" + labels[r] + "'");
    }
  }
  return assemble(by_label, header, graph, file);
}

void write_text_embeddings(const std::filesystem::path& path, std::span<const std::string> labels,
                           const Matrix& rows, Provenance provenance) {
  require(static_cast<Eigen::Index>(labels.size()) == rows.rows(), "write_text_embeddings: label/row count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "#dim=" << rows.cols() << '\n';
  out << "#provenance=" << to_string(provenance) << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << labels[i];
    for (Eigen::Index k = 0; k < rows.cols(); ++k) out << '\t' << format_double(rows(static_cast<Eigen::Index>(i), k));
    out << '\n';
  }
}

Eigen::RowVectorXd fixture_embedding(std::string_view text, std::size_t width, std::uint64_t seed) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(width));
  if (text.empty()) return v;
  std::mt19937_64 rng(derive_seed(fnv1a(text), seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = normal(rng);
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

Matrix fixture_embeddings(std::span<const std::string> texts, std::size_t width, std::uint64_t seed) {
  Matrix m(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < texts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = fixture_embedding(texts[i], width, seed);
  return m;
}

std::vector<MlpParams::NamedTensor> MlpParams::tensors() {
  return {{"mlp.w1", &w1}, {"mlp.b1", &b1}, {"mlp.w2", &w2}, {"mlp.b2", &b2}};
}

MlpParams MlpParams::zeros_like() const {
  return {Matrix::Zero(w1.rows(), w1.cols()), Matrix::Zero(b1.rows(), b1.cols()), Matrix::Zero(w2.rows(), w2.cols()),
          Matrix::Zero(b2.rows(), b2.cols())};
}

MlpParams init_mlp(std::size_t d_text, std::size_t hidden, std::size_t d_sem, std::uint64_t rng_seed) {
  require(d_text >= 1 && hidden >= 1 && d_sem >= 1, "init_mlp: widths must be >= 1");
  std::mt19937_64 rng(rng_seed);
  auto glorot = [&](std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng);
    return m;
  };
  MlpParams p;
  p.w1 = glorot(d_text, hidden);
  p.b1 = Matrix::Zero(1, static_cast<Eigen::Index>(hidden));
  p.w2 = glorot(hidden, d_sem);
  p.b2 = Matrix::Zero(1, static_cast<Eigen::Index>(d_sem));
  return p;
}

MlpTrace mlp_forward(const Matrix& input, const MlpParams& params) {
  require(input.cols() == params.w1.rows(), "mlp_forward: input width does not match the first layer");
  require(params.w1.cols() == params.w2.rows(), "mlp_forward: hidden widths disagree");
  MlpTrace t;
  t.pre_hidden = input * params.w1;
  t.pre_hidden.rowwise() += params.b1.row(0);
  t.hidden = t.pre_hidden.cwiseMax(0.0);
  t.output = t.hidden * params.w2;
  t.output.rowwise() += params.b2.row(0);
  t.normalized = row_normalized(t.output);
  return t;
}

Matrix mlp_project(const TextEmbeddingTable& table, const MlpParams& params) {
  return mlp_forward(table.rows, params).normalized;
}

std::vector<Triplet> sample_triplets(std::span<const SeedPair> seeds, std::size_t n_target,
                                     std::size_t per_positive, std::uint64_t rng_seed, std::uint64_t epoch) {
  if (n_target < 2) throw ConfigError("triplet sampling needs at least 2 target entities");
  std::mt19937_64 rng(derive_seed(rng_seed, 5000 + epoch));
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(n_target) - 1);
  std::vector<Triplet> out;
  out.reserve(seeds.size() * per_positive);
  for (const auto& s : seeds) {
    for (std::size_t k = 0; k < per_positive; ++k) {
      EntityId neg;
      do neg = EntityId(pick(rng));
      while (neg == s.target);
      out.push_back({s.source, s.target, neg});
    }
  }
  return out;
}

SemanticLoss semantic_loss(const Matrix& source, const Matrix& target, std::span<const Triplet> triplets,
                           double margin) {
  if (triplets.empty()) throw ConfigError("semantic loss needs a non-empty triplet set");
  require(source.cols() == target.cols(), "semantic_loss: embedding widths differ");
  SemanticLoss out;
  out.grad_source = Matrix::Zero(source.rows(), source.cols());
  out.grad_target = Matrix::Zero(target.rows(), target.cols());
  for (const auto& t : triplets) {
    const auto q = source.row(t.query.value);
    const auto pos = target.row(t.positive.value);
    const auto neg = target.row(t.negative.value);
    const double term = cosine(q, neg) - cosine(q, pos) + margin;
    if (std::isnan(term)) {
      out.value = term;
      continue;
    }
    if (term <= 0.0) continue;
    out.value += term;
    ++out.active;
    accumulate_cosine_grad(q, neg, 1.0, out.grad_source.row(t.query.value), out.grad_target.row(t.negative.value));
    accumulate_cosine_grad(q, pos, -1.0, out.grad_source.row(t.query.value), out.grad_target.row(t.positive.value));
  }
  return out;
}

SemanticObjective semantic_objective(const MlpParams& params, const TextEmbeddingTable& source,
                                     const TextEmbeddingTable& target, std::span<const Triplet> triplets,
                                     double margin) {
  const auto s = mlp_forward(source.rows, params);
  const auto t = mlp_forward(target.rows, params);
  const auto loss = semantic_loss(s.normalized, t.normalized, triplets, margin);
  SemanticObjective out;
  out.loss = loss.value;
  out.grad = params.zeros_like();
  mlp_backward(source.rows, s, params, loss.grad_source, out.grad);
  mlp_backward(target.rows, t, params, loss.grad_target, out.grad);
  return out;
}

std::size_t semantic_width(const Hyperparams& hyper) {
  return hyper.sem_dim != 0 ? hyper.sem_dim : hyper.d + 2 * hyper.h;
}

SemanticTrainResult train_semantic(const TextEmbeddingTable& source, const TextEmbeddingTable& target,
                                   std::span<const SeedPair> train, const Hyperparams& hyper,
                                   const EpochCallback& on_epoch) {
  hyper.validate();
  if (train.empty()) throw ConfigError("semantic training needs a non-empty seed set");
  if (source.width() != target.width()) throw ConfigError("text embedding widths differ between graphs");

  SemanticTrainResult result;
  result.params = init_mlp(source.width(), hyper.mlp_hidden, semantic_width(hyper), derive_seed(hyper.rng_seed, 50));
  Adam adam({.lr = hyper.sem_lr});
  for (std::size_t epoch = 0; epoch < hyper.sem_epochs; ++epoch) {
    const auto triplets = sample_triplets(train, static_cast<std::size_t>(target.rows.rows()), hyper.sem_negatives,
                                          hyper.rng_seed, epoch);
    auto objective = semantic_objective(result.params, source, target, triplets, hyper.margin);
    if (!std::isfinite(objective.loss)) {
      std::string culprit = "projected embeddings";
      for (const auto& t : result.params.tensors()) {
        if (!t.tensor->allFinite()) {
          culprit = std::string(t.name);
          break;
        }
      }
      throw NumericalError("non-finite semantic loss at epoch " + std::to_string(epoch) +
                           "; first non-finite tensor: " + culprit);
    }
    result.loss_curve.push_back(objective.loss);
    if (on_epoch) on_epoch(epoch, objective.loss);

    std::vector<Matrix*> params;
    std::vector<const Matrix*> grads;
    for (const auto& t : result.params.tensors()) params.push_back(t.tensor);
    for (const auto& t : objective.grad.tensors()) grads.push_back(t.tensor);
    adam.step(params, grads);
  }
  result.source = mlp_project(source, result.params);
  result.target = mlp_project(target, result.params);
  return result;
}

}  // namespace kgalign
