#include "kgalign/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace kgalign {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(expected));
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const auto d = parse_double(v);
  if (!d) bad_value(key, v, "a number");
  return *d;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& xs, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

struct Field {
  std::string_view key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view, const std::filesystem::path&)> set;
};

Field path_field(std::string_view key, std::filesystem::path RunConfig::*group_member) {
  return {key, [group_member](const RunConfig& c) { return (c.*group_member).generic_string(); },
          [group_member](RunConfig& c, std::string_view v, const std::filesystem::path& base) {
            std::filesystem::path p{std::string(v)};
            if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
            c.*group_member = p.lexically_normal();
          }};
}

Field data_field(std::string_view key, std::filesystem::path DatasetPaths::*member) {
  return {key, [member](const RunConfig& c) { return (c.data.*member).generic_string(); },
          [member](RunConfig& c, std::string_view v, const std::filesystem::path& base) {
            std::filesystem::path p{std::string(v)};
            if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
            c.data.*member = p.empty() ? p : p.lexically_normal();
          }};
}

template <typename T>
Field size_field(std::string_view key, T Hyperparams::*member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.hyper.*member); },
          [member, key](RunConfig& c, std::string_view v, const std::filesystem::path&) {
            c.hyper.*member = to_size(key, v);
          }};
}

Field double_field(std::string_view key, double Hyperparams::*member) {
  return {key, [member](const RunConfig& c) { return format_double(c.hyper.*member); },
          [member, key](RunConfig& c, std::string_view v, const std::filesystem::path&) {
            c.hyper.*member = to_double(key, v);
          }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(data_field("rel_triples_1", &DatasetPaths::rel_triples_1));
    f.push_back(data_field("rel_triples_2", &DatasetPaths::rel_triples_2));
    f.push_back(data_field("attr_triples_1", &DatasetPaths::attr_triples_1));
    f.push_back(data_field("attr_triples_2", &DatasetPaths::attr_triples_2));
    f.push_back(data_field("ent_labels_1", &DatasetPaths::ent_labels_1));
    f.push_back(data_field("ent_labels_2", &DatasetPaths::ent_labels_2));
    f.push_back(data_field("text_emb_1", &DatasetPaths::text_emb_1));
    f.push_back(data_field("text_emb_2", &DatasetPaths::text_emb_2));
    f.push_back(data_field("text_emb_index_1", &DatasetPaths::text_emb_index_1));
    f.push_back(data_field("text_emb_index_2", &DatasetPaths::text_emb_index_2));
    f.push_back(data_field("seeds", &DatasetPaths::seeds));
    f.push_back(path_field("out", &RunConfig::out));
    f.push_back({"train_ratio", [](const RunConfig& c) { return format_double(c.train_ratio); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.train_ratio = to_double("train_ratio", v);
                 }});
    f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.hyper.rng_seed); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.hyper.rng_seed = to_u64("seed", v);
                 }});
    f.push_back(size_field("d", &Hyperparams::d));
    f.push_back(size_field("h", &Hyperparams::h));
    f.push_back(double_field("beta", &Hyperparams::beta));
    f.push_back(double_field("margin", &Hyperparams::margin));
    f.push_back(double_field("tau", &Hyperparams::tau));
    f.push_back(size_field("pool_size", &Hyperparams::pool_size));
    f.push_back(size_field("k_neg", &Hyperparams::k_neg));
    f.push_back(size_field("epochs", &Hyperparams::epochs));
    f.push_back(double_field("lr", &Hyperparams::lr));
    f.push_back({"metric", [](const RunConfig& c) { return std::string(to_string(c.hyper.metric)); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.hyper.metric = parse_metric(v);
                 }});
    f.push_back({"train_h0", [](const RunConfig& c) { return std::string(c.hyper.train_h0 ? "true" : "false"); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.hyper.train_h0 = to_bool("train_h0", v);
                 }});
    f.push_back(double_field("gate_bias", &Hyperparams::gate_bias));
    f.push_back(size_field("sem_epochs", &Hyperparams::sem_epochs));
    f.push_back(double_field("sem_lr", &Hyperparams::sem_lr));
    f.push_back(size_field("mlp_hidden", &Hyperparams::mlp_hidden));
    f.push_back(size_field("sem_dim", &Hyperparams::sem_dim));
    f.push_back(size_field("sem_negatives", &Hyperparams::sem_negatives));
    f.push_back({"ablation", [](const RunConfig& c) { return std::string(to_string(c.ablation)); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) { c.ablation = parse_ablation(v); }});
    f.push_back({"fusion", [](const RunConfig& c) { return std::string(to_string(c.fusion)); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) { c.fusion = parse_fusion(v); }});
    f.push_back({"tau_sweep", [](const RunConfig& c) { return join(c.tau_sweep, [](double x) { return format_double(x); }); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.tau_sweep.clear();
                   for (const auto item : split_list(v)) c.tau_sweep.push_back(to_double("tau_sweep", item));
                 }});
    f.push_back({"relation_cap", [](const RunConfig& c) { return std::to_string(c.caps.relation); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.caps.relation = to_size("relation_cap", v);
                 }});
    f.push_back({"attribute_cap", [](const RunConfig& c) { return std::to_string(c.caps.attribute); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.caps.attribute = to_size("attribute_cap", v);
                 }});
    f.push_back({"hits_ks", [](const RunConfig& c) { return join(c.hits_ks, [](int k) { return std::to_string(k); }); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.hits_ks.clear();
                   for (const auto item : split_list(v)) {
                     int k = 0;
                     const auto res = std::from_chars(item.data(), item.data() + item.size(), k);
                     if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
                       bad_value("hits_ks", item, "an integer");
                     }
                     c.hits_ks.push_back(k);
                   }
                 }});
    f.push_back({"deterministic", [](const RunConfig& c) { return std::string(c.deterministic ? "true" : "false"); },
                 [](RunConfig& c, std::string_view v, const std::filesystem::path&) {
                   c.deterministic = to_bool("deterministic", v);
                 }});
    return f;
  }();
  return fields;
}

}  // namespace

void RunConfig::validate() const {
  hyper.validate();
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train_ratio must lie in (0, 1)");
  for (const double t : tau_sweep) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("tau_sweep values must lie in [0, 1]");
  }
  if (hits_ks.empty()) throw ConfigError("hits_ks must list at least one k");
  for (const int k : hits_ks) {
    if (k <= 0) throw ConfigError("Hits@k needs k >= 1, got " + std::to_string(k));
  }
  if (caps.relation < 2) throw ConfigError("relation_cap must be >= 2");
  if (caps.attribute < 1) throw ConfigError("attribute_cap must be >= 1");
  if (data.rel_triples_1.empty() || data.rel_triples_2.empty()) {
    throw ConfigError("config must name rel_triples_1 and rel_triples_2");
  }
  if (data.seeds.empty()) throw ConfigError("config must name a seeds file");
  if (data.text_emb_index_1.empty() != data.text_emb_index_2.empty()) {
    throw ConfigError("text_emb_index_1 and text_emb_index_2 must be given together");
  }
  if (out.empty()) throw ConfigError("no output directory");
}

bool RunConfig::operator==(const RunConfig& o) const {
  return data == o.data && out == o.out && train_ratio == o.train_ratio && hyper == o.hyper &&
         ablation == o.ablation && fusion == o.fusion && tau_sweep == o.tau_sweep && caps == o.caps &&
         hits_ks == o.hits_ks && deterministic == o.deterministic;
}

KeyValues to_kv(const RunConfig& config) {
  KeyValues kv;
  for (const auto& f : schema()) kv.emplace_back(f.key, f.get(config));
  return kv;
}

RunConfig from_kv(const KeyValues& kv, const std::filesystem::path& base_dir) {
  RunConfig config;
  apply_kv(config, kv, base_dir);
  return config;
}

void apply_kv(RunConfig& config, const KeyValues& kv, const std::filesystem::path& base_dir) {
  std::set<std::string> seen;
  for (const auto& [key, value] : kv) {
    const auto& fields = schema();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
    if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    it->set(config, value, base_dir);
  }
}

KeyValues parse_kv(std::string_view text, const std::string& source_name) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source_name, line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source_name, line_no, "empty key");
    kv.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir, const std::string& source_name) {
  auto kv = parse_kv(text, source_name);
  // The default output directory sits next to the config file.
  if (std::none_of(kv.begin(), kv.end(), [](const auto& e) { return e.first == "out"; })) {
    kv.emplace_back("out", RunConfig{}.out.string());
  }
  return from_kv(kv, base_dir);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path(), path.string());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : to_kv(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace kgalign
