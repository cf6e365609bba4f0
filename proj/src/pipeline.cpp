#include "kgalign/pipeline.hpp"

#include "json.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

namespace kgalign {

using Json = nlohmann::ordered_json;

OutputDirs::OutputDirs(const std::filesystem::path& out)
    : root(out), checkpoints(out / "checkpoints"), reports(out / "reports"), logs(out / "logs") {}

void OutputDirs::create() const {
  for (const auto& d : {checkpoints, reports, logs}) std::filesystem::create_directories(d);
}

namespace {

// Writes each line to the console and to logs/<command>.log.
class CommandLog {
 public:
  CommandLog(const OutputDirs& dirs, const std::string& command, std::ostream& console)
      : file_(dirs.logs / (command + ".log"), std::ios::binary | std::ios::trunc), console_(console) {
    if (!file_) throw LoadError("cannot write " + (dirs.logs / (command + ".log")).string());
  }
  void line(const std::string& text, bool echo = true) {
    file_ << text << '\n';
    if (echo) console_ << text << '\n';
  }

 private:
  std::ofstream file_;
  std::ostream& console_;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::optional<Json> read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void record_runtime(const OutputDirs& dirs, const std::string& command, double seconds) {
  const auto path = dirs.reports / "runtime.json";
  auto j = read_json(path).value_or(Json::object());
  j[command] = seconds;
  write_json(path, j);
}

Json config_echo(const RunConfig& config) {
  Json j = Json::object();
  for (const auto& [k, v] : to_kv(config)) j[k] = v;
  return j;
}

Json hits_json(const std::vector<HitsAtK>& hits) {
  Json j = Json::object();
  for (const auto& h : hits) j[std::to_string(h.k)] = h.value;
  return j;
}

unsigned threads_for(const RunConfig& config) { return config.deterministic ? 1u : kernel_threads(); }

PairFeatures features_for(const RunConfig& config, const Dataset& dataset) {
  return build_pair_features(dataset.source, dataset.target, config.caps);
}

StructuralCheckpoint require_structural(const RunConfig& config, const OutputDirs& dirs, const PairFeatures& features) {
  const auto path = dirs.structural_checkpoint();
  if (!std::filesystem::exists(path)) {
    throw LoadError("missing checkpoint " + path.string() + " (run train-struct first)");
  }
  auto ckpt = load_structural_checkpoint(path);
  const auto& dims = ckpt.params.dims;
  if (dims.n_source != static_cast<std::size_t>(features.source.adjacency.n) ||
      dims.n_target != static_cast<std::size_t>(features.target.adjacency.n) ||
      dims.k_relation != static_cast<std::size_t>(features.source.relation.cols()) ||
      dims.k_attribute != static_cast<std::size_t>(features.source.attribute.cols())) {
    throw ConfigError("checkpoint " + path.string() + " does not match the dataset shapes");
  }
  if (ckpt.ablation != config.ablation) {
    throw ConfigError("checkpoint " + path.string() + " was trained with ablation " +
                      std::string(to_string(ckpt.ablation)) + " but the run requests " +
                      std::string(to_string(config.ablation)));
  }
  return ckpt;
}

SemanticCheckpoint require_semantic(const OutputDirs& dirs, const TextTables& text) {
  const auto path = dirs.semantic_checkpoint();
  if (!std::filesystem::exists(path)) {
    throw LoadError("missing checkpoint " + path.string() + " (run train-sem first)");
  }
  auto ckpt = load_semantic_checkpoint(path);
  if (ckpt.params.w1.rows() != static_cast<Eigen::Index>(text.source.width())) {
    throw ConfigError("semantic checkpoint expects text width " + std::to_string(ckpt.params.w1.rows()) +
                      ", embeddings have " + std::to_string(text.source.width()));
  }
  return ckpt;
}

std::vector<double> requested_taus(const RunConfig& config) {
  std::vector<double> taus = {config.hyper.tau};
  for (const double t : config.tau_sweep) {
    if (std::find(taus.begin(), taus.end(), t) == taus.end()) taus.push_back(t);
  }
  return taus;
}

struct Scored {
  Dataset dataset;
  std::vector<TauResult> results;
};

Scored score_run(const RunConfig& config, const OutputDirs& dirs, std::span<const double> taus) {
  Scored s{load_dataset(config), {}};
  const auto features = features_for(config, s.dataset);
  const auto structural = require_structural(config, dirs, features);
  const bool needs_semantic = std::any_of(taus.begin(), taus.end(), [](double t) { return t < 1.0; });
  std::optional<TextTables> text;
  std::optional<SemanticCheckpoint> semantic;
  if (needs_semantic) {
    text = load_text_tables(config, s.dataset);
    semantic = require_semantic(dirs, *text);
  }
  s.results = evaluate(config, s.dataset, features, structural.params, semantic ? &semantic->params : nullptr,
                       text ? &*text : nullptr, taus);
  return s;
}

}  // namespace

Dataset load_dataset(const RunConfig& config) {
  config.validate();
  const auto& p = config.data;
  auto opt = [](const std::filesystem::path& x) {
    return x.empty() ? std::optional<std::filesystem::path>() : std::optional<std::filesystem::path>(x);
  };
  Dataset d;
  d.source = load_graph(p.rel_triples_1, opt(p.attr_triples_1), opt(p.ent_labels_1));
  d.target = load_graph(p.rel_triples_2, opt(p.attr_triples_2), opt(p.ent_labels_2));
  d.seeds = load_seeds(p.seeds, d.source, d.target);
  d.split = split_seeds(d.seeds, config.train_ratio, config.hyper.rng_seed);
  return d;
}

TextTables load_text_tables(const RunConfig& config, const Dataset& dataset) {
  const auto& p = config.data;
  if (p.text_emb_1.empty() || p.text_emb_2.empty()) {
    throw ConfigError("the semantic head needs text_emb_1 and text_emb_2 in the config");
  }
  TextTables t;
  if (!p.text_emb_index_1.empty()) {
    t.source = load_text_embeddings_binary(p.text_emb_1, p.text_emb_index_1, dataset.source);
    t.target = load_text_embeddings_binary(p.text_emb_2, p.text_emb_index_2, dataset.target);
  } else {
    t.source = load_text_embeddings(p.text_emb_1, dataset.source);
    t.target = load_text_embeddings(p.text_emb_2, dataset.target);
  }
  if (t.source.width() != t.target.width()) {
    throw FormatError("text embedding widths differ between graphs (" + std::to_string(t.source.width()) + " vs " +
                      std::to_string(t.target.width()) + ")");
  }
  return t;
}

std::size_t effective_sem_dim(const RunConfig& config) {
  if (config.hyper.sem_dim != 0) return config.hyper.sem_dim;
  EncoderDims dims;
  dims.d = config.hyper.d;
  dims.h = config.hyper.h;
  return hybrid_width(dims, config.ablation);
}

std::vector<TauResult> evaluate(const RunConfig& config, const Dataset& dataset, const PairFeatures& features,
                                const EncoderParams& structural, const MlpParams* semantic,
                                const TextTables* text, std::span<const double> taus) {
  const auto threads = threads_for(config);
  const auto encoded = encode(features, structural, config.ablation);
  const auto& tg_source = encoded.source.hybrid;
  const auto& tg_target = encoded.target.hybrid;

  std::vector<EntityId> sources;
  sources.reserve(dataset.split.test.size());
  for (const auto& s : dataset.split.test) sources.push_back(s.source);
  const auto pools = candidate_pool(tg_source, tg_target, sources, config.hyper.pool_size, threads);

  std::optional<Matrix> tb_source;
  std::optional<Matrix> tb_target;
  std::vector<TauResult> out;
  for (const double tau : taus) {
    TauResult r;
    r.tau = tau;
    if (tau == 1.0) {
      r.lists = rank_candidates(tg_source, tg_target, sources, pools, threads);
    } else {
      require(semantic != nullptr && text != nullptr, "evaluate: tau < 1 needs the semantic head");
      if (!tb_source) {
        tb_source = mlp_project(text->source, *semantic);
        tb_target = mlp_project(text->target, *semantic);
      }
      const auto fused = fuse(tg_source, tg_target, *tb_source, *tb_target, tau, config.fusion);
      r.lists = rank_candidates(fused.source, fused.target, sources, pools, threads);
    }
    r.hits = hits_at_k(r.lists, dataset.split.test, config.hits_ks);
    out.push_back(std::move(r));
  }
  return out;
}

void run_ingest(const RunConfig& config, std::ostream& console) {
  const Stopwatch clock;
  const OutputDirs dirs(config.out);
  dirs.create();
  CommandLog log(dirs, "ingest", console);
  const auto dataset = load_dataset(config);

  auto graph_json = [](const Graph& g) {
    Json j;
    j["entities"] = g.entity_count();
    j["relation_types"] = g.relations.size();
    j["attribute_keys"] = g.attribute_keys.size();
    j["relation_triples"] = g.triples.size();
    j["attribute_triples"] = g.attributes.size();
    j["relation_rows"] = g.report.relation_rows;
    j["relation_duplicates"] = g.report.relation_duplicates;
    j["attribute_rows"] = g.report.attribute_rows;
    j["attribute_duplicates"] = g.report.attribute_duplicates;
    return j;
  };
  Json report;
  report["config"] = config_echo(config);
  report["source"] = graph_json(dataset.source);
  report["target"] = graph_json(dataset.target);
  report["seeds"] = dataset.seeds.size();
  report["train_seeds"] = dataset.split.train.size();
  report["test_seeds"] = dataset.split.test.size();
  if (!config.data.text_emb_1.empty() && !config.data.text_emb_2.empty()) {
    const auto text = load_text_tables(config, dataset);
    report["text_width"] = text.source.width();
    report["text_provenance"] = {std::string(to_string(text.source.provenance)),
                                 std::string(to_string(text.target.provenance))};
  }
  write_json(dirs.reports / "ingest.json", report);

  for (const auto* side : {"source", "target"}) {
    const auto& g = report[side];
    log.line(std::string(side) + ": " + std::to_string(g["entities"].get<std::size_t>()) + " entities, " +
             std::to_string(g["relation_triples"].get<std::size_t>()) + " relation triples (" +
             std::to_string(g["relation_duplicates"].get<std::size_t>()) + " duplicates dropped), " +
             std::to_string(g["attribute_triples"].get<std::size_t>()) + " attribute triples");
  }
  log.line("seeds: " + std::to_string(dataset.seeds.size()) + " (" + std::to_string(dataset.split.train.size()) +
           " train / " + std::to_string(dataset.split.test.size()) + " test)");
  record_runtime(dirs, "ingest", clock.seconds());
}

void run_train_struct(const RunConfig& config, std::ostream& console) {
  const Stopwatch clock;
  const OutputDirs dirs(config.out);
  dirs.create();
  CommandLog log(dirs, "train-struct", console);
  const auto dataset = load_dataset(config);
  const auto features = features_for(config, dataset);
  log.line("train-struct: " + std::to_string(dataset.split.train.size()) + " train seeds, " +
           std::to_string(config.hyper.epochs) + " epochs, ablation " + std::string(to_string(config.ablation)));

  const auto result = train_structural(features, dataset.split.train, config.hyper, config.ablation,
                                       [&](std::size_t epoch, double loss) {
                                         const bool echo = epoch % 50 == 0 || epoch + 1 == config.hyper.epochs;
                                         log.line("epoch " + std::to_string(epoch) + " loss " + format_double(loss), echo);
                                       });
  save_checkpoint(dirs.structural_checkpoint(),
                  StructuralCheckpoint{result.params, config.hyper.metric, config.ablation, config.hyper.rng_seed});

  Json report;
  report["config"] = config_echo(config);
  report["loss_curve"] = result.loss_curve;
  write_json(dirs.reports / "train_struct.json", report);
  log.line("wrote " + dirs.structural_checkpoint().string());
  record_runtime(dirs, "train-struct", clock.seconds());
}

void run_train_sem(const RunConfig& config, std::ostream& console) {
  const Stopwatch clock;
  const OutputDirs dirs(config.out);
  dirs.create();
  CommandLog log(dirs, "train-sem", console);
  const auto dataset = load_dataset(config);
  const auto text = load_text_tables(config, dataset);
  if (text.source.provenance == Provenance::hash_fixture) {
    log.line("note: text embeddings are hash fixtures, not encoder output");
  }
  auto hyper = config.hyper;
  hyper.sem_dim = effective_sem_dim(config);
  log.line("train-sem: text width " + std::to_string(text.source.width()) + " -> " + std::to_string(hyper.sem_dim) +
           ", " + std::to_string(hyper.sem_epochs) + " epochs");

  const auto result = train_semantic(text.source, text.target, dataset.split.train, hyper,
                                     [&](std::size_t epoch, double loss) {
                                       const bool echo = epoch % 25 == 0 || epoch + 1 == hyper.sem_epochs;
                                       log.line("epoch " + std::to_string(epoch) + " loss " + format_double(loss), echo);
                                     });
  save_checkpoint(dirs.semantic_checkpoint(), SemanticCheckpoint{result.params, config.hyper.rng_seed});

  Json report;
  report["config"] = config_echo(config);
  report["loss_curve"] = result.loss_curve;
  write_json(dirs.reports / "train_sem.json", report);
  log.line("wrote " + dirs.semantic_checkpoint().string());
  record_runtime(dirs, "train-sem", clock.seconds());
}

void run_align(const RunConfig& config, std::ostream& console) {
  const Stopwatch clock;
  const OutputDirs dirs(config.out);
  dirs.create();
  CommandLog log(dirs, "align", console);
  const double tau[] = {config.hyper.tau};
  const auto scored = score_run(config, dirs, tau);
  const auto& result = scored.results.front();

  const auto path = dirs.reports / "candidates.tsv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "source\trank\ttarget\tscore\n";
  for (const auto& list : result.lists) {
    const auto& src = scored.dataset.source.entities.label(list.source.value);
    for (std::size_t r = 0; r < list.candidates.size(); ++r) {
      const auto& c = list.candidates[r];
      out << src << '\t' << r + 1 << '\t' << scored.dataset.target.entities.label(c.target.value) << '\t'
          << format_double(c.score) << '\n';
    }
  }
  Json report;
  report["config"] = config_echo(config);
  report["tau"] = result.tau;
  report["test_sources"] = result.lists.size();
  report["hits"] = hits_json(result.hits);
  write_json(dirs.reports / "alignment.json", report);
  for (const auto& h : result.hits) log.line("Hits@" + std::to_string(h.k) + " = " + format_double(h.value));
  log.line("wrote " + path.string());
  record_runtime(dirs, "align", clock.seconds());
}

void run_eval(const RunConfig& config, std::ostream& console) {
  const Stopwatch clock;
  const OutputDirs dirs(config.out);
  dirs.create();
  CommandLog log(dirs, "eval", console);
  const auto taus = requested_taus(config);
  const auto scored = score_run(config, dirs, taus);

  Json report;
  report["config"] = config_echo(config);
  report["test_sources"] = scored.dataset.split.test.size();
  report["hits"] = hits_json(scored.results.front().hits);
  Json sweep = Json::array();
  for (const auto& r : scored.results) sweep.push_back({{"tau", r.tau}, {"hits", hits_json(r.hits)}});
  report["tau_sweep"] = sweep;
  for (const auto& [name, file] : {std::pair{"structural_loss", "train_struct.json"},
                                   std::pair{"semantic_loss", "train_sem.json"}}) {
    if (auto j = read_json(dirs.reports / file); j && j->contains("loss_curve")) report[name] = (*j)["loss_curve"];
  }
  write_json(dirs.reports / "metrics.json", report);
  for (const auto& r : scored.results) {
    std::string line = "tau " + format_double(r.tau) + ":";
    for (const auto& h : r.hits) line += " Hits@" + std::to_string(h.k) + " = " + format_double(h.value);
    log.line(line);
  }
  log.line("wrote " + (dirs.reports / "metrics.json").string());
  record_runtime(dirs, "eval", clock.seconds());
}

void run_gen_synth(const SynthSpec& spec, const std::filesystem::path& dir, std::ostream& console) {
  const auto data = generate_synth(spec);
  write_synth(data, spec, dir);
  console << "gen-synth: n = " << spec.n << ", " << data.source.relations.size() << " / "
          << data.target.relations.size() << " relation triples, " << data.dropped_edges
          << " edges rewired, dataset in " << dir.string() << '\n';
}

GradCheckSummary run_grad_check(std::size_t nodes, std::uint64_t rng_seed, Metric metric, Ablation ablation,
                                std::ostream& console) {
  const auto instance = make_grad_check_instance(nodes, rng_seed, metric, ablation);
  GradCheckSummary s;
  s.clean = grad_check(instance);
  GradCheckOptions corrupt;
  corrupt.corrupt_tensor = "w_gcn1";
  s.corrupted = grad_check(instance, corrupt);
  s.passed = s.clean.max_relative_error < kGradCheckTolerance && s.corrupted.max_relative_error > kGradCheckDetection;
  console << "grad-check: " << s.clean.samples << " samples, max relative error "
          << format_double(s.clean.max_relative_error) << " (" << s.clean.worst_tensor << ")\n";
  console << "grad-check: corrupted w_gcn1 gradient gives " << format_double(s.corrupted.max_relative_error)
          << (s.corrupted.max_relative_error > kGradCheckDetection ? " (detected)" : " (NOT detected)") << '\n';
  return s;
}

}  // namespace kgalign
