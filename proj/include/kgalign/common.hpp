#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <compare>
#include <optional>
#include <string_view>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace kgalign {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense per-graph index; the tag keeps entity, relation and attribute-key
// indices from being mixed up.
template <typename Tag>
struct Id {
  std::int32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::int32_t v) : value(v) {}
  constexpr auto operator<=>(const Id&) const = default;
};

using EntityId = Id<struct EntityTag>;
using RelationId = Id<struct RelationTag>;
using AttrKeyId = Id<struct AttrKeyTag>;

struct SeedPair {
  EntityId source;  // entity of the first graph
  EntityId target;  // entity of the second graph
  constexpr auto operator<=>(const SeedPair&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; `line` is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Shape or precondition violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

// Derives an independent stream seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Scales every nonzero row to unit L2 norm; all-zero rows stay zero.
inline void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm > 0.0) m.row(i) /= norm;
  }
}

inline Matrix row_normalized(Matrix m) {
  normalize_rows(m);
  return m;
}

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Gradient through row normalization y = x / ||x||, given d loss / d y.
inline Matrix normalize_rows_backward(const Matrix& input, const Matrix& normalized, const Matrix& grad) {
  Matrix out = Matrix::Zero(input.rows(), input.cols());
  for (Eigen::Index i = 0; i < input.rows(); ++i) {
    const double norm = input.row(i).norm();
    if (norm == 0.0) continue;
    const double proj = normalized.row(i).dot(grad.row(i));
    out.row(i) = (grad.row(i) - proj * normalized.row(i)) / norm;
  }
  return out;
}

}  // namespace kgalign

template <typename Tag>
struct std::hash<kgalign::Id<Tag>> {
  std::size_t operator()(const kgalign::Id<Tag>& id) const noexcept {
    return std::hash<std::int32_t>{}(id.value);
  }
};
