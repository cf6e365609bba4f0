#include "kgalign/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace kgalign {

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'G', 'A', 'L', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void tensor(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) u32(std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  void flush(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw LoadError("failed writing checkpoint " + path.string());
  }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("missing checkpoint " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  Matrix tensor() {
    const auto rows = u32();
    const auto cols = u32();
    need(static_cast<std::size_t>(rows) * cols * 4);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(u32());
    return m;
  }
  void magic() {
    need(kMagic.size());
    if (std::memcmp(bytes_.data(), kMagic.data(), kMagic.size()) != 0) fail("bad magic");
    pos_ += kMagic.size();
  }
  void finish() const {
    if (pos_ != bytes_.size()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError("checkpoint " + path_ + ": " + what); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated");
  }
  std::string path_;
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

// Shared header; returns the dims list.
std::vector<std::uint64_t> read_header(Reader& r, CheckpointKind expected, std::uint32_t& metric,
                                       std::uint32_t& ablation, std::uint64_t& rng_seed) {
  r.magic();
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  const auto kind = r.u32();
  if (kind != static_cast<std::uint32_t>(expected)) r.fail("wrong checkpoint kind " + std::to_string(kind));
  metric = r.u32();
  ablation = r.u32();
  rng_seed = r.u64();
  std::vector<std::uint64_t> dims(r.u32());
  for (auto& d : dims) d = r.u64();
  return dims;
}

void write_header(Writer& w, CheckpointKind kind, std::uint32_t metric, std::uint32_t ablation,
                  std::uint64_t rng_seed, const std::vector<std::uint64_t>& dims) {
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u32(metric);
  w.u32(ablation);
  w.u64(rng_seed);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (const auto d : dims) w.u64(d);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const StructuralCheckpoint& ckpt) {
  const auto& dims = ckpt.params.dims;
  Writer w;
  write_header(w, CheckpointKind::structural, static_cast<std::uint32_t>(ckpt.metric),
               static_cast<std::uint32_t>(ckpt.ablation), ckpt.rng_seed,
               {dims.d, dims.h, dims.k_relation, dims.k_attribute, dims.n_source, dims.n_target});
  const auto tensors = ckpt.params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) w.tensor(*t.tensor);
  w.flush(path);
}

void save_checkpoint(const std::filesystem::path& path, const SemanticCheckpoint& ckpt) {
  auto params = ckpt.params;
  Writer w;
  write_header(w, CheckpointKind::semantic, 0, 0, ckpt.rng_seed,
               {static_cast<std::uint64_t>(params.w1.rows()), static_cast<std::uint64_t>(params.w1.cols()),
                static_cast<std::uint64_t>(params.w2.cols())});
  const auto tensors = params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) w.tensor(*t.tensor);
  w.flush(path);
}

StructuralCheckpoint load_structural_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  std::uint32_t metric = 0;
  std::uint32_t ablation = 0;
  StructuralCheckpoint ckpt;
  const auto dims = read_header(r, CheckpointKind::structural, metric, ablation, ckpt.rng_seed);
  if (dims.size() != 6) r.fail("expected 6 dims");
  if (metric > static_cast<std::uint32_t>(Metric::cosine)) r.fail("unknown metric tag");
  if (ablation > static_cast<std::uint32_t>(Ablation::no_highway)) r.fail("unknown ablation tag");
  ckpt.metric = static_cast<Metric>(metric);
  ckpt.ablation = static_cast<Ablation>(ablation);

  auto& p = ckpt.params;
  p.dims = {dims[0], dims[1], dims[2], dims[3], dims[4], dims[5]};
  const auto d = static_cast<Eigen::Index>(p.dims.d);
  const auto h = static_cast<Eigen::Index>(p.dims.h);
  const auto kr = static_cast<Eigen::Index>(p.dims.k_relation);
  const auto ka = static_cast<Eigen::Index>(p.dims.k_attribute);
  const std::array<std::pair<Eigen::Index, Eigen::Index>, 16> shapes = {{{d, d},
                                                                        {d, d},
                                                                        {kr, h},
                                                                        {1, h},
                                                                        {h, h},
                                                                        {1, h},
                                                                        {h, h},
                                                                        {1, h},
                                                                        {ka, h},
                                                                        {1, h},
                                                                        {h, h},
                                                                        {1, h},
                                                                        {h, h},
                                                                        {1, h},
                                                                        {static_cast<Eigen::Index>(p.dims.n_source), d},
                                                                        {static_cast<Eigen::Index>(p.dims.n_target), d}}};
  auto tensors = p.tensors();
  if (r.u32() != tensors.size()) r.fail("unexpected tensor count");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    *tensors[i].tensor = r.tensor();
    if (tensors[i].tensor->rows() != shapes[i].first || tensors[i].tensor->cols() != shapes[i].second) {
      r.fail("tensor " + std::string(tensors[i].name) + " has the wrong shape");
    }
  }
  r.finish();
  return ckpt;
}

SemanticCheckpoint load_semantic_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  std::uint32_t metric = 0;
  std::uint32_t ablation = 0;
  SemanticCheckpoint ckpt;
  const auto dims = read_header(r, CheckpointKind::semantic, metric, ablation, ckpt.rng_seed);
  if (dims.size() != 3) r.fail("expected 3 dims");
  const auto d_text = static_cast<Eigen::Index>(dims[0]);
  const auto hidden = static_cast<Eigen::Index>(dims[1]);
  const auto d_sem = static_cast<Eigen::Index>(dims[2]);
  const std::array<std::pair<Eigen::Index, Eigen::Index>, 4> shapes = {
      {{d_text, hidden}, {1, hidden}, {hidden, d_sem}, {1, d_sem}}};
  auto tensors = ckpt.params.tensors();
  if (r.u32() != tensors.size()) r.fail("unexpected tensor count");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    *tensors[i].tensor = r.tensor();
    if (tensors[i].tensor->rows() != shapes[i].first || tensors[i].tensor->cols() != shapes[i].second) {
      r.fail("tensor " + std::string(tensors[i].name) + " has the wrong shape");
    }
  }
  r.finish();
  return ckpt;
}

}  // namespace kgalign
