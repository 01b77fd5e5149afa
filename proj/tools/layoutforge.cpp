// layoutforge command-line entry point.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "layoutforge/layoutforge.hpp"
#include "layoutforge/png.hpp"

namespace lf = layoutforge;

namespace {

void write_file(const std::string& path, const std::string& bytes, const char* field) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw lf::DataError("cannot open '" + path + "' for writing", field);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw lf::DataError("failed writing '" + path + "'", field);
}

std::string read_file(const std::string& path, const char* field) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw lf::DataError("cannot open '" + path + "'", field);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Output destination: a file, or stdout when empty.
void emit(const std::string& path, const std::string& text, const char* field) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file(path, text, field);
  }
}

struct CorpusFlags {
  std::optional<std::size_t> synth_n;
  std::optional<std::uint64_t> synth_seed;
  std::string corpus;

  void add(CLI::App& app) {
    app.add_option("--synth-n", synth_n, "Generate a synthetic corpus with N items");
    app.add_option("--synth-seed", synth_seed, "Seed for the synthetic corpus");
    app.add_option("--corpus", corpus, "JSON-lines corpus file");
  }

  /// Flags first, then the config's corpus path.
  [[nodiscard]] lf::Corpus load(const lf::AppConfig& cfg) const {
    lf::Corpus loaded;
    if (synth_n) {
      loaded = lf::synth_corpus(*synth_n, synth_seed.value_or(cfg.data.synth_seed));
    } else if (!corpus.empty() || !cfg.paths.corpus.empty()) {
      loaded = lf::load_corpus(!corpus.empty() ? corpus : cfg.paths.corpus);
    } else {
      throw lf::DataError("no corpus: pass --corpus, --synth-n, or set paths.corpus", "paths.corpus");
    }
    return lf::split(std::move(loaded), cfg.data.split_ratio, cfg.data.split_seed);
  }
};

struct Options {
  std::string config;
  CorpusFlags corpus;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string weights;
  std::string prompt;
  std::string sketch_file;
  std::string ppm;
  std::string png;
  bool no_projection = false;
  std::string layout_file;
  std::vector<std::size_t> pins;
  std::optional<int> t_start;
  std::string stub;
  std::string table;
  std::string csv;
  std::optional<std::size_t> max_items;
  std::size_t n = 2000;
  std::optional<std::string> host;
  std::optional<int> port;
  std::string static_dir;
  std::string dir;
  std::string label_map;
  int screen_w = 1440;
  int screen_h = 2560;
};

lf::AppConfig load_config(const Options& o) {
  return lf::resolve_config(o.config.empty() ? std::nullopt : std::optional<std::string>(o.config));
}

std::string weights_path(const Options& o, const lf::AppConfig& cfg) {
  const std::string path = !o.weights.empty() ? o.weights : cfg.paths.weights;
  if (path.empty()) throw lf::ConfigError("no weights: pass --weights or set paths.weights", "paths.weights");
  return path;
}

std::optional<lf::Sketch> load_sketch(const Options& o) {
  if (o.sketch_file.empty()) return std::nullopt;
  try {
    return lf::sketch_from_json(nlohmann::json::parse(read_file(o.sketch_file, "sketch")), "sketch");
  } catch (const nlohmann::json::exception& e) {
    throw lf::DataError(o.sketch_file + ": " + e.what(), "sketch");
  } catch (const lf::Error& e) {
    throw lf::DataError(o.sketch_file + ": " + e.what(), "sketch");
  }
}

void write_rasters(const Options& o, const lf::Layout& layout) {
  if (!o.ppm.empty()) lf::write_ppm(lf::rasterize(layout), o.ppm);
  if (!o.png.empty()) lf::write_png(lf::rasterize(layout), o.png);
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int cmd_train(const Options& o) {
  lf::AppConfig cfg = load_config(o);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.seed) cfg.train.seed = *o.seed;
  cfg.validate();
  const lf::Corpus corpus = o.corpus.load(cfg);
  std::vector<lf::TrainingExample> data;
  for (auto i : corpus.train) data.push_back(lf::make_example(corpus.items[i].layout, corpus.items[i].condition));
  std::vector<double> losses;
  const auto params = lf::train(data, cfg.train, cfg.schedule.build(), cfg.model, [&](int epoch, double loss) {
    std::printf("epoch %d loss %.6f\n", epoch, loss);
    std::fflush(stdout);
    losses.push_back(loss);
  });
  lf::save_weights(params, o.out);
  const nlohmann::json sidecar = {{"model_version", lf::model_version(params)},
                                  {"vocab_version", lf::kVocabVersion},
                                  {"vocabulary", lf::kVocabulary},
                                  {"config", lf::to_json(cfg)},
                                  {"corpus", corpus.provenance},
                                  {"train_items", corpus.train.size()},
                                  {"epoch_losses", losses}};
  write_file(o.out + ".json", dump(sidecar), "out");
  return 0;
}

int cmd_sample(const Options& o) {
  const lf::AppConfig cfg = load_config(o);
  const auto params = lf::load_weights(weights_path(o, cfg));
  lf::SamplerConfig sc;
  sc.seed = o.seed.value_or(cfg.sampling.seed);
  sc.rules = cfg.rules;
  sc.projection_every = o.no_projection ? 0 : cfg.sampling.projection_every;
  sc.condition = lf::encode_condition(o.prompt, load_sketch(o));
  const lf::Layout out = lf::sample(sc, params, cfg.schedule.build());
  emit(o.out, dump(lf::to_json(out)), "out");
  write_rasters(o, out);
  return 0;
}

int cmd_refine(const Options& o) {
  const lf::AppConfig cfg = load_config(o);
  const auto params = lf::load_weights(weights_path(o, cfg));
  const auto sched = cfg.schedule.build();
  lf::Layout layout;
  try {
    layout = lf::layout_from_json(nlohmann::json::parse(read_file(o.layout_file, "layout")), "layout");
  } catch (const nlohmann::json::exception& e) {
    throw lf::DataError(o.layout_file + ": " + e.what(), "layout");
  }
  lf::SamplerConfig sc;
  sc.seed = o.seed.value_or(cfg.sampling.seed);
  sc.rules = cfg.rules;
  sc.projection_every = o.no_projection ? 0 : cfg.sampling.projection_every;
  sc.condition = lf::encode_condition(o.prompt, load_sketch(o));
  int t_start = o.t_start.value_or(cfg.sampling.refine_t_start);
  if (t_start == 0) t_start = std::max(1, sched.steps() / 2);
  const std::set<std::size_t> pinned(o.pins.begin(), o.pins.end());
  const lf::Layout out = lf::refine(layout, pinned, sc, t_start, params, sched);
  emit(o.out, dump(lf::to_json(out)), "out");
  write_rasters(o, out);
  return 0;
}

void write_reports(const Options& o, const std::vector<lf::EvalReport>& reports, const char* first_column) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(lf::to_json(r));
  const std::string table = lf::format_table(reports, first_column);
  if (!o.out.empty()) write_file(o.out, dump(reports.size() == 1 ? j[0] : j), "out");
  if (!o.table.empty()) write_file(o.table, table, "table");
  if (!o.csv.empty() && reports.size() == 1) write_file(o.csv, lf::rows_to_csv(reports[0]), "csv");
  std::cout << table;
}

int cmd_eval(const Options& o) {
  const lf::AppConfig cfg = load_config(o);
  const lf::Corpus corpus = o.corpus.load(cfg);
  lf::EvalOptions opts;
  opts.seed = o.seed.value_or(cfg.eval.seed);
  opts.max_items = o.max_items.value_or(cfg.eval.max_items);
  opts.rules = cfg.rules;
  const auto sched = cfg.schedule.build();
  lf::DenoiserParams params;
  lf::Generator gen;
  std::string label;
  if (o.stub == "identity") {
    gen = lf::identity_generator();
    label = "identity";
  } else if (o.stub == "random") {
    gen = lf::random_generator();
    label = "random";
  } else if (o.stub.empty()) {
    params = lf::load_weights(weights_path(o, cfg));
    lf::ModelSetup setup;
    setup.params = &params;
    setup.schedule = &sched;
    setup.projection_every = o.no_projection ? 0 : cfg.sampling.projection_every;
    setup.feedback = true;
    setup.refine_t_start = cfg.sampling.refine_t_start;
    setup.rules = cfg.rules;
    gen = lf::model_generator(setup);
    label = lf::model_version(params);
  } else {
    throw lf::ConfigError("unknown stub '" + o.stub + "' (expected identity or random)", "stub");
  }
  opts.config = {{"config", lf::to_json(cfg)}, {"model", label}, {"no_projection", o.no_projection}};
  write_reports(o, {lf::evaluate(gen, corpus, opts, label)}, "Model");
  return 0;
}

int cmd_ablate(const Options& o) {
  lf::AppConfig cfg = load_config(o);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.seed) cfg.train.seed = *o.seed;
  cfg.validate();
  const lf::Corpus corpus = o.corpus.load(cfg);
  lf::AblationConfig base;
  base.train = cfg.train;
  base.dims = cfg.model;
  base.projection_every = cfg.sampling.projection_every;
  base.refine_t_start = cfg.sampling.refine_t_start;
  base.rules = cfg.rules;
  base.eval.seed = cfg.eval.seed;
  base.eval.max_items = o.max_items.value_or(cfg.eval.max_items);
  const auto reports = lf::ablation_suite(corpus, cfg.schedule.build(), base, [](const std::string& v, int e, double l) {
    std::fprintf(stderr, "[%s] epoch %d loss %.6f\n", v.c_str(), e, l);
  });
  write_reports(o, reports, "Model Variant");
  return 0;
}

int cmd_synth(const Options& o) {
  const lf::AppConfig cfg = load_config(o);
  const lf::Corpus corpus = lf::synth_corpus(o.n, o.seed.value_or(cfg.data.synth_seed));
  emit(o.out, lf::corpus_to_jsonl(corpus), "out");
  return 0;
}

int cmd_ingest(const Options& o) {
  const lf::AppConfig cfg = load_config(o);
  const std::string map_path = !o.label_map.empty() ? o.label_map : cfg.paths.label_map;
  const auto table = map_path.empty() ? lf::default_label_map() : lf::load_label_map(map_path);
  std::vector<std::string> warnings;
  lf::Corpus corpus = lf::load_rico_dir(o.dir, o.screen_w, o.screen_h, table, &warnings);
  if (!map_path.empty()) corpus.provenance["label_map"] = map_path;
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  emit(o.out, lf::corpus_to_jsonl(corpus), "out");
  return 0;
}

int cmd_serve(const Options& o) {
  lf::AppConfig cfg = load_config(o);
  if (o.host) cfg.server.host = *o.host;
  if (o.port) cfg.server.port = *o.port;
  const std::string static_dir = !o.static_dir.empty() ? o.static_dir : cfg.paths.static_dir;
  const lf::Service service(lf::load_weights(weights_path(o, cfg)), cfg);
  httplib::Server server;
  lf::register_routes(server, service, static_dir);
  int port = cfg.server.port;
  if (port == 0) {
    port = server.bind_to_any_port(cfg.server.host);
  } else if (!server.bind_to_port(cfg.server.host, port)) {
    port = -1;
  }
  if (port < 0) throw lf::ConfigError("cannot bind " + cfg.server.host + ":" + std::to_string(cfg.server.port), "server.port");
  std::printf("listening on http://%s:%d (model %s)\n", cfg.server.host.c_str(), port, service.version().c_str());
  std::fflush(stdout);
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional diffusion model for UI layouts"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file (else $LAYOUTFORGE_CONFIG)");
  };
  const auto sampling = [&](CLI::App* sub) {
    sub->add_option("--weights", o.weights, "Weights file");
    sub->add_option("--prompt", o.prompt, "Keyword prompt");
    sub->add_option("--sketch", o.sketch_file, "JSON file with 64 occupancy values in [0,1]");
    sub->add_option("--seed", o.seed, "Sampling seed");
    sub->add_option("--out", o.out, "Output layout JSON (default stdout)");
    sub->add_option("--ppm", o.ppm, "Also write a PPM raster");
    sub->add_option("--png", o.png, "Also write a PNG raster");
    sub->add_flag("--no-projection", o.no_projection, "Disable design-rule projection");
  };

  auto* train = app.add_subcommand("train", "Train the denoiser");
  common(train);
  o.corpus.add(*train);
  train->add_option("--epochs", o.epochs, "Override train.epochs");
  train->add_option("--seed", o.seed, "Override train.seed");
  train->add_option("--out", o.out, "Weights output path")->required();

  auto* sample = app.add_subcommand("sample", "Generate one layout");
  common(sample);
  sampling(sample);

  auto* refine = app.add_subcommand("refine", "Regenerate a layout keeping pinned components");
  common(refine);
  sampling(refine);
  refine->add_option("--layout", o.layout_file, "Layout JSON to refine")->required();
  refine->add_option("--pin", o.pins, "Index of a component to keep (repeatable)");
  refine->add_option("--t-start", o.t_start, "Noise level to restart from");

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the validation split");
  common(eval);
  o.corpus.add(*eval);
  eval->add_option("--weights", o.weights, "Weights file");
  eval->add_option("--stub", o.stub, "Use a stub model instead of weights: identity or random");
  eval->add_option("--seed", o.seed, "Evaluation seed");
  eval->add_option("--max-items", o.max_items, "Evaluate at most this many validation items");
  eval->add_flag("--no-projection", o.no_projection, "Disable design-rule projection");
  eval->add_option("--out", o.out, "Report JSON");
  eval->add_option("--table", o.table, "Text table");
  eval->add_option("--csv", o.csv, "Per-item CSV");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the four ablation variants");
  common(ablate);
  o.corpus.add(*ablate);
  ablate->add_option("--epochs", o.epochs, "Override train.epochs");
  ablate->add_option("--seed", o.seed, "Override train.seed");
  ablate->add_option("--max-items", o.max_items, "Evaluate at most this many validation items");
  ablate->add_option("--out", o.out, "Report JSON");
  ablate->add_option("--table", o.table, "Text table");

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  common(synth);
  synth->add_option("--n", o.n, "Number of layouts")->check(CLI::PositiveNumber);
  synth->add_option("--seed", o.seed, "Corpus seed");
  synth->add_option("--out", o.out, "Output JSON-lines file (default stdout)");

  auto* ingest = app.add_subcommand("ingest", "Convert a directory of RICO view hierarchies to a corpus file");
  ingest->add_option("--config", o.config, "JSON config file (else $LAYOUTFORGE_CONFIG)");
  ingest->add_option("--dir", o.dir, "Directory of *.json hierarchies")->required();
  ingest->add_option("--label-map", o.label_map, "Label to component type table (else paths.label_map, else built in)");
  ingest->add_option("--screen-w", o.screen_w, "Screen width in pixels")->check(CLI::PositiveNumber);
  ingest->add_option("--screen-h", o.screen_h, "Screen height in pixels")->check(CLI::PositiveNumber);
  ingest->add_option("--out", o.out, "Output JSON-lines file (default stdout)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  common(serve);
  serve->add_option("--weights", o.weights, "Weights file");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port (0 = any free port)");
  serve->add_option("--static-dir", o.static_dir, "Directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (sample->parsed()) return cmd_sample(o);
    if (refine->parsed()) return cmd_refine(o);
    if (eval->parsed()) return cmd_eval(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (synth->parsed()) return cmd_synth(o);
    if (ingest->parsed()) return cmd_ingest(o);
    if (serve->parsed()) return cmd_serve(o);
  } catch (const lf::ConfigError& e) {
    std::cerr << "config error";
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << ": " << e.what() << '\n';
    return 1;
  } catch (const lf::Error& e) {
    std::cerr << "error";
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
