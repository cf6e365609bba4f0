#include "kgalign/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

using namespace kgalign;

namespace {

struct GlobalFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::string> ablation;
  std::optional<double> tau;
  std::optional<std::string> fusion;
  std::optional<std::string> metric;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const GlobalFlags& flags) {
  if (flags.config.empty()) throw ConfigError("--config is required for this command");
  auto config = load_config(flags.config);
  KeyValues kv;
  for (const auto& item : flags.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
    kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  if (!flags.out.empty()) kv.emplace_back("out", flags.out);
  if (flags.seed) kv.emplace_back("seed", std::to_string(*flags.seed));
  if (flags.ablation) kv.emplace_back("ablation", *flags.ablation);
  if (flags.tau) kv.emplace_back("tau", format_double(*flags.tau));
  if (flags.fusion) kv.emplace_back("fusion", *flags.fusion);
  if (flags.metric) kv.emplace_back("metric", *flags.metric);
  if (flags.deterministic) kv.emplace_back("deterministic", "true");
  // Later entries win; apply_kv rejects repeats within one batch.
  for (const auto& entry : kv) apply_kv(config, {entry});
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity alignment across two knowledge graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config, "Run configuration file");
  app.add_option("--out", flags.out, "Output directory (dataset directory for gen-synth)");
  app.add_option("--seed", flags.seed, "RNG seed");
  app.add_flag("--deterministic", flags.deterministic, "Force serial kernels");
  app.add_option("--ablation", flags.ablation, "Encoder ablation")
      ->check(CLI::IsMember({"none", "no-rel", "no-attr", "no-highway"}));
  app.add_option("--tau", flags.tau, "Fusion weight of the structural embedding")->check(CLI::Range(0.0, 1.0));
  app.add_option("--fusion", flags.fusion, "Fusion mode")->check(CLI::IsMember({"sum", "concat"}));
  app.add_option("--metric", flags.metric, "Structural distance")->check(CLI::IsMember({"l1", "l2", "cos"}));
  app.add_option("--set", flags.overrides, "Override a config key (key=value), repeatable");

  auto* ingest = app.add_subcommand("ingest", "Load and validate the dataset, write a load report");
  auto* train_struct = app.add_subcommand("train-struct", "Train the structural encoder");
  auto* train_sem = app.add_subcommand("train-sem", "Train the semantic projection head");
  auto* align = app.add_subcommand("align", "Rank candidates for test sources, dump candidates.tsv");
  auto* eval = app.add_subcommand("eval", "Evaluate Hits@k and write reports/metrics.json");

  SynthSpec spec;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic twin-graph dataset");
  gen->add_option("--n", spec.n, "Entities per graph")->capture_default_str();
  gen->add_option("--degree", spec.avg_degree, "Average degree")->capture_default_str();
  gen->add_option("--noise", spec.noise, "Fraction of rewired edges in the copy")->capture_default_str();
  gen->add_option("--relation-types", spec.relation_types)->capture_default_str();
  gen->add_option("--attribute-keys", spec.attribute_keys)->capture_default_str();
  gen->add_option("--max-attributes", spec.max_attributes)->capture_default_str();
  gen->add_option("--ratio", spec.seed_ratio, "Train seed ratio written to run.conf")->capture_default_str();
  gen->add_option("--text-dim", spec.text_dim, "Width of the fixture text embeddings")->capture_default_str();

  std::size_t nodes = 8;
  auto* grad = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  grad->add_option("--nodes", nodes, "Entities per random graph")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (flags.out.empty()) throw ConfigError("gen-synth needs --out DIR");
      if (flags.seed) spec.rng_seed = *flags.seed;
      run_gen_synth(spec, flags.out, std::cout);
      return 0;
    }
    if (*grad) {
      const auto summary = run_grad_check(nodes, flags.seed.value_or(1),
                                          flags.metric ? parse_metric(*flags.metric) : Metric::l1,
                                          flags.ablation ? parse_ablation(*flags.ablation) : Ablation::none, std::cout);
      if (!summary.passed) {
        std::cerr << "grad-check: FAILED\n";
        return 1;
      }
      return 0;
    }
    const auto config = resolve_config(flags);
    if (*ingest) run_ingest(config, std::cout);
    if (*train_struct) run_train_struct(config, std::cout);
    if (*train_sem) run_train_sem(config, std::cout);
    if (*align) run_align(config, std::cout);
    if (*eval) run_eval(config, std::cout);
  } catch (const std::exception& e) {
    const auto* sub = app.get_subcommands().front();
    std::cerr << "kgalign " << sub->get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
