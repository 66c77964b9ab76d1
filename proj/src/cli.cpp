#include "gfm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfm/adapt.hpp"
#include "gfm/descriptors.hpp"
#include "gfm/hash.hpp"
#include "gfm/matrix_io.hpp"
#include "gfm/metrics.hpp"
#include "gfm/model.hpp"
#include "gfm/pretrain.hpp"
#include "gfm/prompt.hpp"
#include "gfm/random.hpp"
#include "gfm/text.hpp"

namespace fs = std::filesystem;

namespace gfm::cli {

namespace {

// ---------------------------------------------------------------------------
// Manifest

std::string iso_time(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// SOURCE_DATE_EPOCH pins timestamps so that reruns produce identical manifests.
std::string timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    return iso_time(static_cast<std::time_t>(parse_number<long long>("SOURCE_DATE_EPOCH", epoch)));
  }
  return iso_time(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed), started_(timestamp()) {}

  void config(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) config_[k] = v;
  }
  void config(const std::string& key, const std::string& value) { config_[key] = value; }
  void input(const std::string& name, const std::string& path) { inputs_.emplace_back(name, hash_file(path)); }
  void input(const std::string& name, std::uint64_t hash) { inputs_.emplace_back(name, hash); }

  void write(const std::string& out_dir) const {
    nlohmann::ordered_json j;
    j["tool"] = "gfm";
    j["version"] = kVersion;
    j["command"] = command_;
    j["seed"] = seed_;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_) cfg[k] = v;
    j["config"] = std::move(cfg);
    nlohmann::ordered_json in = nlohmann::ordered_json::array();
    for (const auto& [name, h] : inputs_) in.push_back({{"name", name}, {"hash", to_hex(h)}});
    j["inputs"] = std::move(in);
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
      if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
        files.push_back(fs::relative(entry.path(), out_dir).generic_string());
      }
    }
    std::sort(files.begin(), files.end());
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const auto& f : files) outs.push_back({{"name", f}, {"hash", to_hex(hash_file((fs::path(out_dir) / f).string()))}});
    j["outputs"] = std::move(outs);
    j["started"] = started_;
    j["finished"] = timestamp();
    std::ofstream out((fs::path(out_dir) / "manifest.json").string(), std::ios::binary);
    if (!out) throw DataError("cannot write manifest in " + out_dir);
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::string started_;
  std::map<std::string, std::string> config_;
  std::vector<std::pair<std::string, std::uint64_t>> inputs_;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::optional<std::string> first_existing(const std::string& dir, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    const auto p = fs::path(dir) / n;
    if (fs::is_regular_file(p)) return p.string();
  }
  return std::nullopt;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// Config handling

struct Settings {
  PretrainConfig pretrain;
  AdaptConfig adapt;
};

[[noreturn]] void unknown_key(const std::string& key, bool with_adapt) {
  std::string valid;
  for (const auto& k : pretrain_config_keys()) valid += (valid.empty() ? "" : ", ") + k;
  if (with_adapt) {
    for (const auto& k : adapt_config_keys()) valid += ", " + k;
  }
  throw ConfigError("unknown config key '" + key + "' (valid keys: " + valid + ")");
}

void apply_option(Settings& s, const std::string& key, const std::string& value, bool with_adapt) {
  if (with_adapt && set_adapt_option(s.adapt, key, value)) return;
  const auto keys = pretrain_config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) unknown_key(key, with_adapt);
  set_pretrain_option(s.pretrain, key, value);
}

void apply_line(Settings& s, const std::string& raw, bool with_adapt, const std::string& origin) {
  std::string line = raw;
  if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(origin + ": expected key=value, got '" + line + "'");
  apply_option(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), with_adapt);
}

struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 42;
  bool seed_given = false;
};

Settings load_settings(const ConfigFlags& flags, bool with_adapt, Manifest* manifest) {
  Settings s;
  if (!flags.config_path.empty()) {
    for (const auto& line : read_lines(flags.config_path)) apply_line(s, line, with_adapt, flags.config_path);
    if (manifest) manifest->input("config", flags.config_path);
  }
  for (const auto& o : flags.overrides) apply_line(s, o, with_adapt, "--set");
  if (flags.seed_given || s.pretrain.seed == PretrainConfig{}.seed) s.pretrain.seed = flags.seed;
  s.adapt.seed = s.pretrain.seed;
  return s;
}

void add_config_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", f.overrides, "Override one configuration key (key=value); repeatable");
}

// ---------------------------------------------------------------------------
// Graph input

struct GraphFiles {
  Graph graph;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;
  std::optional<std::string> context_path;
  BuildCounts counts;
};

GraphFiles load_graph_files(const std::string& path, const std::string& id) {
  GraphFiles out;
  std::string dir = path;
  std::string edges = path;
  if (fs::is_directory(path)) {
    edges = join_path(path, "edges.txt");
  } else {
    dir = fs::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
  }
  if (!fs::is_regular_file(edges)) throw DataError("cannot open " + edges);
  const bool is_dir = fs::is_directory(path);
  auto features = is_dir ? first_existing(dir, {"features.bin", "features.txt"}) : std::nullopt;
  auto labels = is_dir ? first_existing(dir, {"labels.bin", "labels.txt"}) : std::nullopt;
  LoadedGraph loaded = load_edge_list(edges, features, labels);
  out.counts = loaded.counts;
  out.graph = std::move(loaded.graph);
  const std::string prefix = id.empty() ? std::string() : id + "/";
  out.inputs.emplace_back(prefix + fs::path(edges).filename().string(), hash_file(edges));
  if (features) out.inputs.emplace_back(prefix + fs::path(*features).filename().string(), hash_file(*features));
  if (labels) out.inputs.emplace_back(prefix + fs::path(*labels).filename().string(), hash_file(*labels));
  if (is_dir) {
    if (auto split = first_existing(dir, {"split.txt"})) {
      out.graph = out.graph.with_split(load_split(*split, out.graph.node_count()));
      out.inputs.emplace_back(prefix + "split.txt", hash_file(*split));
    }
    out.context_path = first_existing(dir, {"context.bin", "context.txt"});
    if (out.context_path) {
      out.inputs.emplace_back(prefix + fs::path(*out.context_path).filename().string(), hash_file(*out.context_path));
    }
  }
  if (out.counts.self_loops_dropped || out.counts.duplicates_dropped) {
    std::cerr << "note: " << edges << ": dropped " << out.counts.self_loops_dropped << " self-loop(s) and "
              << out.counts.duplicates_dropped << " duplicate edge(s)\n";
  }
  return out;
}

std::string default_id(const std::string& path) {
  fs::path p = fs::weakly_canonical(fs::path(path));
  if (!fs::is_directory(p)) p = p.parent_path();
  std::string name = p.filename().string();
  return name.empty() ? "graph" : name;
}

// ---------------------------------------------------------------------------
// Commands

struct GenerateOpts {
  std::string kind = "sbm";
  std::string blocks = "100,100";
  double p_in = 0.3, p_out = 0.02;
  std::size_t nodes = 100;
  double p = 0.05;
  std::string split = "0.8,0.1,0.1";
  std::string out;
  std::uint64_t seed = 42;
};

int cmd_generate(const GenerateOpts& o) {
  Manifest manifest("generate", o.seed);
  Graph g;
  if (o.kind == "sbm") {
    const auto blocks = parse_list<std::size_t>("--blocks", o.blocks);
    g = generate_sbm(blocks, o.p_in, o.p_out, o.seed);
    manifest.config({{"kind", "sbm"}, {"blocks", o.blocks}, {"p_in", format_double(o.p_in)},
                     {"p_out", format_double(o.p_out)}});
  } else if (o.kind == "gnp") {
    g = generate_gnp(o.nodes, o.p, o.seed);
    manifest.config({{"kind", "gnp"}, {"nodes", std::to_string(o.nodes)}, {"p", format_double(o.p)}});
  } else {
    throw ConfigError("unknown graph kind '" + o.kind + "' (expected sbm or gnp)");
  }
  std::size_t removed = 0;
  g = drop_isolated(g, &removed);
  if (removed) std::cerr << "note: removed " << removed << " isolated node(s); edge lists cannot represent them\n";
  if (g.node_count() == 0 || g.edge_count() == 0) throw DataError("the generated graph has no edges");
  const auto fractions = parse_list<double>("--split", o.split);
  if (fractions.size() != 3) throw ConfigError("--split expects three fractions (train,valid,test)");
  SplitSpec spec;
  spec.train = fractions[0];
  spec.valid = fractions[1];
  spec.test = fractions[2];
  spec.seed = derive_seed(o.seed, 3);
  g = make_split(g, spec);
  manifest.config("split", o.split);
  manifest.config("isolated_removed", std::to_string(removed));

  ensure_dir(o.out);
  save_edge_list(g, join_path(o.out, "edges.txt"));
  if (g.labels()) write_matrix_text(to_matrix(*g.labels()), join_path(o.out, "labels.txt"));
  save_split(*g.split(), join_path(o.out, "split.txt"));
  manifest.write(o.out);
  std::cerr << "generated " << g.node_count() << " nodes, " << g.edge_count() << " edges -> " << o.out << '\n';
  return kOk;
}

struct DescriptorOpts {
  std::string graph, out, spectral = "adjacency";
  std::uint64_t seed = 42;
};

SpectralGapMode parse_gap_mode(const std::string& s) {
  if (s == "adjacency") return SpectralGapMode::adjacency;
  if (s == "normalized") return SpectralGapMode::normalized_laplacian;
  throw ConfigError("unknown spectral mode '" + s + "' (expected adjacency or normalized)");
}

int cmd_descriptors(const DescriptorOpts& o) {
  Manifest manifest("descriptors", o.seed);
  GraphFiles files = load_graph_files(o.graph, "");
  for (const auto& [name, h] : files.inputs) manifest.input(name, h);
  DescriptorOptions opts;
  opts.seed = o.seed;
  opts.gap_mode = parse_gap_mode(o.spectral);
  manifest.config("spectral", o.spectral);
  const ProfileTable table = compute_profiles(files.graph, opts);
  ensure_dir(o.out);
  write_profile_table(table.nodes, join_path(o.out, "profiles.tsv"));
  write_graph_stats(table.stats, join_path(o.out, "graph_stats.txt"));
  manifest.write(o.out);
  return kOk;
}

struct PromptOpts {
  std::string descriptors, profiles, stats, out;
};

int cmd_prompt(const PromptOpts& o) {
  Manifest manifest("prompt", 0);
  std::string profiles = o.profiles, stats = o.stats;
  if (!o.descriptors.empty()) {
    if (profiles.empty()) profiles = join_path(o.descriptors, "profiles.tsv");
    if (stats.empty()) stats = join_path(o.descriptors, "graph_stats.txt");
  }
  if (profiles.empty() || stats.empty()) throw ConfigError("give --descriptors DIR or both --profiles and --stats");
  ProfileTable table{read_profile_table(profiles), read_graph_stats(stats)};
  manifest.input("profiles.tsv", profiles);
  manifest.input("graph_stats.txt", stats);
  std::string text;
  for (const auto& p : render_prompts(table)) text += p + '\n';
  ensure_dir(o.out);
  write_text(join_path(o.out, "prompts.txt"), text);
  manifest.write(o.out);
  return kOk;
}

struct EncodeOpts {
  std::string prompts, precomputed, out;
  std::size_t nodes = 0;
  std::uint64_t seed = 42;
};

int cmd_encode(const EncodeOpts& o) {
  Manifest manifest("encode", o.seed);
  Matrix context;
  if (!o.precomputed.empty()) {
    if (o.nodes == 0) throw ConfigError("--precomputed needs --nodes");
    auto pre = load_precomputed(o.precomputed, o.nodes);
    manifest.input("precomputed", o.precomputed);
    manifest.config("zero_rows", std::to_string(pre.zero_rows));
    context = std::move(pre.embeddings);
  } else if (!o.prompts.empty()) {
    const auto lines = read_lines(o.prompts);
    manifest.input("prompts.txt", o.prompts);
    manifest.config("encoder", "hashed");
    context = HashedEncoder(o.seed).encode_all(lines);
  } else {
    throw ConfigError("give --prompts FILE or --precomputed FILE");
  }
  ensure_dir(o.out);
  write_matrix_binary(context, join_path(o.out, "context.bin"));
  manifest.write(o.out);
  return kOk;
}

struct PretrainOpts {
  std::string graphs, out, resume, cache;
  ConfigFlags cfg;
};

int cmd_pretrain(const PretrainOpts& o) {
  Manifest manifest("pretrain", o.cfg.seed);
  const Settings s = load_settings(o.cfg, true, &manifest);
  const PretrainConfig& config = s.pretrain;
  manifest.config(to_key_values(config));
  const auto dirs = list_graph_dirs(o.graphs);
  if (dirs.empty()) throw DataError("no graph directories with an edges.txt under " + o.graphs);

  std::vector<PretrainGraph> graphs;
  std::vector<PprIndex> ppr;
  for (const auto& d : dirs) {
    GraphDir gd = load_graph_dir(d, config.seed);
    for (const auto& [name, h] : gd.inputs) manifest.input(name, h);
    std::cerr << "graph " << gd.id << ": " << gd.graph.node_count() << " nodes, " << gd.graph.edge_count() << " edges"
              << (gd.context_computed ? ", hashed prompt context" : "") << '\n';
    ppr.push_back(cached_ppr_index(gd.graph, config, o.cache));
    graphs.push_back({gd.id, std::move(gd.graph), std::move(gd.context)});
  }
  std::optional<ModelState> resume;
  if (!o.resume.empty()) {
    resume = load_checkpoint(o.resume);
    manifest.input("resume", o.resume);
  }

  double epoch_sum = 0.0;
  std::uint64_t in_epoch = 0, epoch = 0;
  ProgressFn progress = [&](const LossRecord& r) {
    epoch_sum += r.loss.total;
    if (++in_epoch == config.steps_per_epoch) {
      std::cerr << "epoch " << ++epoch << "/" << config.epochs << " mean loss " << epoch_sum / in_epoch << '\n';
      epoch_sum = 0.0;
      in_epoch = 0;
    }
  };
  PretrainResult result = pretrain(graphs, config, std::move(resume), ppr, progress);

  ensure_dir(o.out);
  MetaMap meta;
  if (!result.history.empty()) {
    meta["best_loss"] = result.best_loss;
    meta["best_step"] = static_cast<double>(result.best_step);
  }
  save_checkpoint(result.best, join_path(o.out, "checkpoint.bin"), meta);
  save_checkpoint(result.last, join_path(o.out, "last.bin"));
  write_loss_history(result.history, join_path(o.out, "loss_history.tsv"));
  manifest.write(o.out);
  return kOk;
}

struct AdaptOpts {
  std::string checkpoint, graph, out, id, cache;
  std::optional<std::uint64_t> steps;
  ConfigFlags cfg;
};

int cmd_adapt(const AdaptOpts& o) {
  Manifest manifest("adapt", o.cfg.seed);
  Settings s = load_settings(o.cfg, true, &manifest);
  if (o.steps) s.adapt.tune_steps = *o.steps;
  manifest.config(to_key_values(s.pretrain));
  manifest.config(to_key_values(s.adapt));
  ModelState model = load_checkpoint(o.checkpoint);
  manifest.input("checkpoint", o.checkpoint);
  const std::string id = o.id.empty() ? default_id(o.graph) : o.id;
  GraphDir gd = load_graph_dir(o.graph, s.pretrain.seed, id);
  for (const auto& [name, h] : gd.inputs) manifest.input(name, h);

  model.adapters.erase(id);
  Adapter adapter = init_adapter_from_mean(model, id, gd.graph.feature_dim(),
                                           derive_seed(s.pretrain.seed, Fnv1a().update(id).digest()));
  PretrainGraph data{id, gd.graph, gd.context};
  const PprIndex ppr = cached_ppr_index(gd.graph, s.pretrain, o.cache);
  const TuneResult tune = tune_adapter_unlabeled(model, adapter, data, ppr, s.pretrain, s.adapt.tune_steps,
                                                 s.adapt.tune_lr, s.pretrain.seed);
  std::cerr << "adapter " << id << ": contrastive loss " << tune.initial.total << " -> " << tune.final.total << '\n';
  model.adapters.emplace(id, std::move(adapter));

  ensure_dir(o.out);
  save_checkpoint(model, join_path(o.out, "checkpoint.bin"),
                  {{"tune_initial_loss", tune.initial.total}, {"tune_final_loss", tune.final.total}});
  write_loss_history(tune.history, join_path(o.out, "tune_history.tsv"));
  write_matrix_binary(embed(model, model.adapters.at(id), gd.graph, gd.context), join_path(o.out, "embeddings.bin"));
  manifest.write(o.out);
  return kOk;
}

struct EvaluateOpts {
  std::string checkpoint, graph, out, id, mode = "zero-shot", k_grid;
  ConfigFlags cfg;
};

int cmd_evaluate(const EvaluateOpts& o) {
  Manifest manifest("evaluate", o.cfg.seed);
  Settings s = load_settings(o.cfg, true, &manifest);
  if (!o.k_grid.empty()) set_adapt_option(s.adapt, "k_grid", o.k_grid);
  manifest.config(to_key_values(s.adapt));
  manifest.config("mode", o.mode);
  ModelState model = load_checkpoint(o.checkpoint);
  manifest.input("checkpoint", o.checkpoint);
  const std::string id = o.id.empty() ? default_id(o.graph) : o.id;
  GraphDir gd = load_graph_dir(o.graph, s.pretrain.seed, id);
  for (const auto& [name, h] : gd.inputs) manifest.input(name, h);
  if (!gd.graph.labels()) throw DataError("evaluation needs labels (labels.txt or labels.bin) in " + o.graph);
  if (!gd.graph.split()) {
    SplitSpec spec;
    spec.seed = derive_seed(s.pretrain.seed, 3);
    gd.graph = make_split(gd.graph, spec);
    manifest.config("split", "random 0.8,0.1,0.1");
  }
  auto it = model.adapters.find(id);
  if (it == model.adapters.end()) {
    throw DataError("checkpoint has no adapter for graph '" + id + "'; run 'gfm adapt' on it first");
  }

  auto embeddings = [&]() {
    try {
      return embed(model, it->second, gd.graph, gd.context);
    } catch (const DimensionError& e) {
      throw DimensionError(std::string(e.what()) + "; re-run 'gfm adapt' for this graph");
    }
  };

  ensure_dir(o.out);
  EvalReport report;
  if (o.mode == "zero-shot") {
    const Matrix emb = embeddings();
    report = zero_shot_probe(emb, *gd.graph.labels(), *gd.graph.split(), s.adapt).report;
    write_matrix_binary(emb, join_path(o.out, "embeddings.bin"));
  } else if (o.mode == "few-shot") {
    const Matrix emb = embeddings();
    report.mode = "few-shot";
    report.seed = s.adapt.seed;
    report.config = to_key_values(s.adapt);
    report.few_shot = few_shot_curve(emb, *gd.graph.labels(), *gd.graph.split(), s.adapt);
    write_matrix_binary(emb, join_path(o.out, "embeddings.bin"));
  } else if (o.mode == "finetune") {
    embeddings();
    FinetuneResult ft = finetune_two_stage(model, it->second, id, gd.graph, gd.context, s.adapt);
    report = std::move(ft.report);
    save_checkpoint(ft.model, join_path(o.out, "checkpoint.bin"));
    write_matrix_binary(ft.head.weight.value, join_path(o.out, "head_weight.bin"));
    write_matrix_binary(ft.head.bias.value, join_path(o.out, "head_bias.bin"));
  } else {
    throw ConfigError("unknown mode '" + o.mode + "' (expected zero-shot, finetune or few-shot)");
  }
  write_report(report, o.out);
  if (report.mean_auc) std::cerr << "mean ROC-AUC " << *report.mean_auc << '\n';
  for (const auto& row : report.few_shot) {
    std::cerr << "K=" << row.k << " mean ROC-AUC " << (row.mean ? format_double(*row.mean) : "n/a") << " sd "
              << row.sd << " (" << row.n_valid_labels << " labels)\n";
  }
  manifest.write(o.out);
  return kOk;
}

struct AnalyzeOpts {
  std::string embeddings, labels, out, anchors, strata, per_label;
  std::size_t k = 15, co_k = 25;
  std::string k_grid = "1,5,10,15,25,50";
  bool ratio = false;
};

int cmd_analyze(const AnalyzeOpts& o) {
  Manifest manifest("analyze", 0);
  const Matrix emb = read_matrix(o.embeddings);
  const LabelMatrix labels = read_labels(o.labels);
  manifest.input("embeddings", o.embeddings);
  manifest.input("labels", o.labels);
  manifest.config({{"k", std::to_string(o.k)}, {"coenrichment_k", std::to_string(o.co_k)}, {"k_grid", o.k_grid}});
  if (labels.rows() != emb.rows()) {
    throw DimensionError("labels have " + std::to_string(labels.rows()) + " rows, embeddings " +
                         std::to_string(emb.rows()));
  }
  ensure_dir(o.out);
  nlohmann::ordered_json summary;

  std::vector<double> counts(static_cast<std::size_t>(labels.rows()));
  for (Eigen::Index i = 0; i < labels.rows(); ++i) counts[i] = labels.row(i).cast<double>().sum();
  if (static_cast<std::size_t>(emb.rows()) > o.k) {
    const auto density = local_density(emb, o.k);
    const Spearman rho = spearman(counts, density);
    std::string t = "node\tlabel_count\tdensity\n";
    for (std::size_t i = 0; i < density.size(); ++i) {
      t += std::to_string(i) + '\t' + format_double(counts[i]) + '\t' + format_double(density[i]) + '\n';
    }
    write_text(join_path(o.out, "density.tsv"), t);
    summary["density_spearman"] = rho.rho;
    summary["density_spearman_degenerate"] = rho.degenerate;
  }

  const auto grid = parse_list<std::size_t>("--k-grid", o.k_grid);
  std::string t = "label\tk\tfraction\tprevalence\n";
  for (Eigen::Index c = 0; c < labels.cols(); ++c) {
    std::vector<std::uint8_t> y(static_cast<std::size_t>(labels.rows()));
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < labels.rows(); ++i) pos += (y[i] = labels(i, c)) ? 1 : 0;
    if (pos < 2) continue;
    const auto frac = same_label_enrichment(emb, y, grid);
    const double prevalence = static_cast<double>(pos - 1) / static_cast<double>(labels.rows() - 1);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      t += std::to_string(c) + '\t' + std::to_string(grid[g]) + '\t' + format_double(frac[g]) + '\t' +
           format_double(prevalence) + '\n';
    }
  }
  write_text(join_path(o.out, "enrichment.tsv"), t);

  std::vector<std::size_t> anchors;
  if (!o.anchors.empty()) {
    anchors = parse_list<std::size_t>("--anchors", o.anchors);
  } else {
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
      if (labels.col(c).cast<int>().sum() > 0) anchors.push_back(static_cast<std::size_t>(c));
    }
  }
  if (!anchors.empty()) {
    for (bool ratio : {false, true}) {
      const CoEnrichment ce = co_enrichment(emb, labels, anchors, o.co_k, ratio);
      const Matrix m = ce.ordered();
      std::string out = "label";
      for (std::size_t j : ce.order) out += '\t' + std::to_string(ce.anchors[j]);
      out += '\n';
      for (std::size_t i = 0; i < ce.order.size(); ++i) {
        out += std::to_string(ce.anchors[ce.order[i]]);
        for (Eigen::Index j = 0; j < m.cols(); ++j) out += '\t' + format_double(m(static_cast<Eigen::Index>(i), j));
        out += '\n';
      }
      write_text(join_path(o.out, ratio ? "coenrichment_ratio.tsv" : "coenrichment_fraction.tsv"), out);
    }
  }

  if (!o.strata.empty()) {
    if (o.per_label.empty()) throw ConfigError("--strata needs --per-label (a per_label.tsv from evaluate)");
    manifest.input("strata", o.strata);
    manifest.input("per_label", o.per_label);
    std::map<std::size_t, std::string> stratum_of;
    for (const auto& line : read_lines(o.strata)) {
      const auto l = trim(line);
      if (l.empty() || l[0] == '#') continue;
      const auto tab = l.find_first_of("\t ");
      if (tab == std::string::npos) throw DataError(o.strata + ": expected 'label<TAB>stratum', got '" + l + "'");
      stratum_of[parse_number<std::size_t>("label", l.substr(0, tab))] = trim(l.substr(tab + 1));
    }
    std::vector<std::optional<double>> aucs;
    std::vector<std::string> strata;
    const auto rows = read_lines(o.per_label);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (trim(rows[i]).empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(rows[i]);
      std::string cell;
      while (std::getline(ss, cell, '\t')) cells.push_back(cell);
      if (cells.size() < 3) throw DataError(o.per_label + ": malformed row " + std::to_string(i + 1));
      const auto label = parse_number<std::size_t>("label", cells[0]);
      auto st = stratum_of.find(label);
      if (st == stratum_of.end()) throw DataError("label " + std::to_string(label) + " has no stratum in " + o.strata);
      aucs.push_back(cells[2].empty() ? std::nullopt : std::optional<double>(parse_number<double>("roc_auc", cells[2])));
      strata.push_back(st->second);
    }
    std::string out = "stratum\tlabels\tmean_roc_auc\n";
    for (const auto& m : stratified_auc(aucs, strata)) {
      out += m.stratum + '\t' + std::to_string(m.count) + '\t' + (m.mean ? format_double(*m.mean) : "") + '\n';
    }
    write_text(join_path(o.out, "stratified_auc.tsv"), out);
  }

  write_text(join_path(o.out, "summary.json"), summary.dump(2) + "\n");
  manifest.write(o.out);
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public helpers

Graph drop_isolated(const Graph& graph, std::size_t* removed) {
  std::vector<NodeId> keep;
  std::vector<NodeId> remap(graph.node_count(), 0);
  for (NodeId u = 0; u < graph.node_count(); ++u) {
    if (graph.degree(u) > 0) {
      remap[u] = static_cast<NodeId>(keep.size());
      keep.push_back(u);
    }
  }
  if (removed) *removed = graph.node_count() - keep.size();
  if (keep.size() == graph.node_count()) return graph;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (auto [u, v] : graph.edges()) edges.emplace_back(remap[u], remap[v]);
  Graph out = Graph::from_edges(keep.size(), edges);
  std::vector<std::int64_t> ids;
  const auto orig = graph.original_ids();
  for (NodeId u : keep) ids.push_back(orig.empty() ? static_cast<std::int64_t>(u) : orig[u]);
  out = out.with_original_ids(std::move(ids));
  if (graph.features()) {
    Matrix x(static_cast<Eigen::Index>(keep.size()), graph.features()->cols());
    for (std::size_t i = 0; i < keep.size(); ++i) x.row(i) = graph.features()->row(keep[i]);
    out = out.with_features(std::move(x));
  }
  if (graph.labels()) {
    LabelMatrix y(static_cast<Eigen::Index>(keep.size()), graph.labels()->cols());
    for (std::size_t i = 0; i < keep.size(); ++i) y.row(i) = graph.labels()->row(keep[i]);
    out = out.with_labels(std::move(y));
  }
  if (graph.split()) {
    std::vector<SplitTag> s;
    for (NodeId u : keep) s.push_back((*graph.split())[u]);
    out = out.with_split(std::move(s));
  }
  return out;
}

std::vector<std::string> list_graph_dirs(const std::string& parent) {
  if (!fs::is_directory(parent)) throw DataError("not a directory: " + parent);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(parent)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "edges.txt")) out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

GraphDir load_graph_dir(const std::string& dir, std::uint64_t seed, const std::string& id) {
  GraphDir out;
  out.id = id.empty() ? default_id(dir) : id;
  GraphFiles files = load_graph_files(dir, out.id);
  out.graph = std::move(files.graph);
  out.inputs = std::move(files.inputs);
  if (files.context_path) {
    out.context = load_precomputed(*files.context_path, out.graph.node_count()).embeddings;
  } else {
    DescriptorOptions opts;
    opts.seed = seed;
    const ProfileTable table = compute_profiles(out.graph, opts);
    out.context = HashedEncoder(seed).encode_all(render_prompts(table));
    out.context_computed = true;
  }
  return out;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Graph foundation model pipeline: descriptors, prompts, pretraining and evaluation"};
  app.name(args.empty() ? "gfm" : fs::path(args[0]).filename().string());
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto seed_option = [](CLI::App* sub, std::uint64_t& seed) {
    return sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic graph directory");
  g->add_option("--kind", gen.kind, "sbm or gnp")->capture_default_str();
  g->add_option("--blocks", gen.blocks, "Block sizes (sbm)")->capture_default_str();
  g->add_option("--p-in", gen.p_in, "Within-block edge probability")->capture_default_str();
  g->add_option("--p-out", gen.p_out, "Between-block edge probability")->capture_default_str();
  g->add_option("--nodes", gen.nodes, "Node count (gnp)")->capture_default_str();
  g->add_option("--p", gen.p, "Edge probability (gnp)")->capture_default_str();
  g->add_option("--split", gen.split, "train,valid,test fractions")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  seed_option(g, gen.seed);

  DescriptorOpts desc;
  auto* d = app.add_subcommand("descriptors", "Compute structural descriptors");
  d->add_option("--graph", desc.graph, "Edge list or graph directory")->required();
  d->add_option("--out", desc.out, "Output directory")->required();
  d->add_option("--spectral", desc.spectral, "adjacency or normalized")->capture_default_str();
  seed_option(d, desc.seed);

  PromptOpts prm;
  auto* p = app.add_subcommand("prompt", "Render structural prompts");
  p->add_option("--descriptors", prm.descriptors, "Output directory of 'descriptors'");
  p->add_option("--profiles", prm.profiles, "profiles.tsv");
  p->add_option("--stats", prm.stats, "graph_stats.txt");
  p->add_option("--out", prm.out, "Output directory")->required();

  EncodeOpts enc;
  auto* e = app.add_subcommand("encode", "Encode prompts into 384-d context embeddings");
  e->add_option("--prompts", enc.prompts, "prompts.txt (one prompt per line)");
  e->add_option("--precomputed", enc.precomputed, "Precomputed N x 384 embedding matrix");
  e->add_option("--nodes", enc.nodes, "Expected node count for --precomputed");
  e->add_option("--out", enc.out, "Output directory")->required();
  seed_option(e, enc.seed);

  PretrainOpts pre;
  auto* pt = app.add_subcommand("pretrain", "Contrastive multi-graph pretraining");
  pt->add_option("--graphs", pre.graphs, "Directory of graph directories")->required();
  pt->add_option("--out", pre.out, "Output directory")->required();
  pt->add_option("--resume", pre.resume, "Checkpoint to continue from");
  pt->add_option("--cache", pre.cache, "Directory for cached PPR indices");
  add_config_flags(pt, pre.cfg);
  auto* pre_seed = seed_option(pt, pre.cfg.seed);

  AdaptOpts ada;
  auto* ad = app.add_subcommand("adapt", "Initialise and tune an adapter for a new graph");
  ad->add_option("--checkpoint", ada.checkpoint, "Pretrained checkpoint")->required();
  ad->add_option("--graph", ada.graph, "Graph directory")->required();
  ad->add_option("--out", ada.out, "Output directory")->required();
  ad->add_option("--id", ada.id, "Graph id (default: directory name)");
  ad->add_option("--steps", ada.steps, "Tuning steps (default 2000)");
  ad->add_option("--cache", ada.cache, "Directory for cached PPR indices");
  add_config_flags(ad, ada.cfg);
  auto* ada_seed = seed_option(ad, ada.cfg.seed);

  EvaluateOpts ev;
  auto* evc = app.add_subcommand("evaluate", "Zero-shot probe, fine-tuning or few-shot curve");
  evc->add_option("--checkpoint", ev.checkpoint, "Checkpoint with an adapter for the graph")->required();
  evc->add_option("--graph", ev.graph, "Graph directory with labels")->required();
  evc->add_option("--out", ev.out, "Output directory")->required();
  evc->add_option("--mode", ev.mode, "zero-shot, finetune or few-shot")->capture_default_str();
  evc->add_option("--id", ev.id, "Graph id (default: directory name)");
  evc->add_option("--k-grid", ev.k_grid, "Few-shot K values, e.g. 1,5,10,20");
  add_config_flags(evc, ev.cfg);
  auto* ev_seed = seed_option(evc, ev.cfg.seed);

  AnalyzeOpts an;
  auto* anc = app.add_subcommand("analyze", "Embedding-space analyses");
  anc->add_option("--embeddings", an.embeddings, "N x D embedding matrix")->required();
  anc->add_option("--labels", an.labels, "N x L binary label matrix")->required();
  anc->add_option("--out", an.out, "Output directory")->required();
  anc->add_option("--k", an.k, "Neighbours for local density")->capture_default_str();
  anc->add_option("--k-grid", an.k_grid, "Neighbour counts for same-label enrichment")->capture_default_str();
  anc->add_option("--coenrichment-k", an.co_k, "Neighbours for co-enrichment")->capture_default_str();
  anc->add_option("--anchors", an.anchors, "Label columns for co-enrichment (default: all with positives)");
  anc->add_option("--strata", an.strata, "label<TAB>stratum file for stratified AUC");
  anc->add_option("--per-label", an.per_label, "per_label.tsv from 'evaluate'");

  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*d) return cmd_descriptors(desc);
    if (*p) return cmd_prompt(prm);
    if (*e) return cmd_encode(enc);
    if (*pt) {
      pre.cfg.seed_given = pre_seed->count() > 0;
      return cmd_pretrain(pre);
    }
    if (*ad) {
      ada.cfg.seed_given = ada_seed->count() > 0;
      return cmd_adapt(ada);
    }
    if (*evc) {
      ev.cfg.seed_given = ev_seed->count() > 0;
      return cmd_evaluate(ev);
    }
    if (*anc) return cmd_analyze(an);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsageError;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << '\n';
    return kNumericError;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataError;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsageError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace gfm::cli
