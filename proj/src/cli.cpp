#include "cegcl/cli.hpp"

#include "cegcl/graph_io.hpp"
#include "cegcl/rng.hpp"
#include "cegcl/synthetic.hpp"
#include "cegcl/theory_check.hpp"
#include "cegcl/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <unordered_map>

namespace cegcl {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split(text, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError("invalid seed '" + s + "'");
    }
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct RunOutcome {
  fs::path dir;
  TrainResult result;
  nlohmann::json metrics;
};

struct TrainJob {
  std::string command;
  TrainConfig config;
  fs::path data;
  fs::path out_root;
  bool quiet = false;
  nlohmann::json extra;  // recorded in the manifest
};

RunOutcome run_training(const TrainJob& job, const GraphBundle& bundle, std::ostream& log) {
  const nlohmann::json cfg = to_json(job.config);
  const std::string hash = input_hash(cfg, job.data);
  RunOutcome outcome;
  outcome.dir = make_run_dir(job.out_root, job.command, hash);

  TrainOptions options;
  if (!job.quiet) {
    options.on_epoch = [&](const EpochLosses& l, bool pre) {
      const int total = pre ? job.config.pretrain_epochs : job.config.epochs;
      if ((l.epoch + 1) % 50 == 0 || l.epoch + 1 == total) {
        log << (pre ? "pretrain " : "train ") << (l.epoch + 1) << '/' << total << " loss " << l.total << '\n';
      }
    };
  }
  const auto start = std::chrono::steady_clock::now();
  outcome.result = train(job.config, bundle, options);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto& r = outcome.result;
  const double q = bundle.edges.empty() ? 0.0 : modularity(bundle.edges, r.assignments);
  outcome.metrics = metrics_json(r.metrics, q, job.config.seed, job.config.epochs, wall);

  write_assignments(outcome.dir / "assignments.tsv", bundle.node_ids, r.assignments);
  write_json(outcome.dir / "metrics.json", outcome.metrics);
  write_loss_csv(outcome.dir / "loss.csv", r.state.history);
  write_loss_csv(outcome.dir / "pretrain_loss.csv", r.state.pretrain_history);
  write_embeddings(outcome.dir / "embeddings.tsv", bundle.node_ids, r.embeddings);
  r.state.medoids.write_tsv(outcome.dir / "medoids.tsv", bundle.node_ids);
  if (r.metrics) write_community_counts(outcome.dir / "community_counts.tsv", *r.metrics, bundle.class_names);
  save_params(outcome.dir / "params.bin", r.state);

  nlohmann::json manifest = {
      {"command", job.command},
      {"config", cfg},
      {"data", fs::absolute(job.data).string()},
      {"seeds", {job.config.seed}},
      {"output_dir", outcome.dir.string()},
      {"input_hash", hash},
      {"medoid_rounds", r.state.schedule.rounds},
      {"sampling_exhausted_at", r.state.exhausted_at},
  };
  if (!job.extra.is_null()) manifest["extra"] = job.extra;
  write_json(outcome.dir / "manifest.json", manifest);
  return outcome;
}

const char* kMetricColumns[] = {"acc", "nmi", "ari", "micro_f1", "macro_f1", "modularity"};

void write_metric_header(std::ostream& out, const std::string& first) {
  out << first << "\tseed";
  for (const char* c : kMetricColumns) out << '\t' << c;
  out << "\trun_dir\n";
}

void write_metric_row(std::ostream& out, const std::string& first, const RunOutcome& o) {
  out << first << '\t' << o.metrics["seed"].get<std::uint64_t>();
  for (const char* c : kMetricColumns) {
    out << '\t';
    if (o.metrics[c].is_null()) {
      out << "NA";
    } else {
      out << o.metrics[c].get<double>();
    }
  }
  out << '\t' << o.dir.string() << '\n';
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

void write_assignments(const fs::path& path, const std::vector<std::string>& node_ids, const Labels& labels) {
  if (node_ids.size() != labels.size()) throw std::invalid_argument("assignment count does not match node count");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "node_id\tcommunity\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << node_ids[i] << '\t' << labels[i] << '\n';
}

Labels read_assignments(const fs::path& path, const std::vector<std::string>& node_ids) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index.emplace(node_ids[i], i);
  Labels out(node_ids.size(), -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("node_id", 0) == 0)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected node_id<TAB>community");
    const std::string id = line.substr(0, tab);
    const auto it = index.find(id);
    if (it == index.end()) throw ParseError(path.string(), line_no, "unknown node id '" + id + "'");
    int c = -1;
    try {
      std::size_t used = 0;
      c = std::stoi(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) c = -1;
    } catch (const std::exception&) {
      c = -1;
    }
    if (c < 0) throw ParseError(path.string(), line_no, "community must be a non-negative integer");
    if (out[it->second] >= 0) throw ParseError(path.string(), line_no, "node id '" + id + "' repeated");
    out[it->second] = c;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0) throw std::runtime_error(path.string() + ": no community for node '" + node_ids[i] + "'");
  }
  return out;
}

void write_embeddings(const fs::path& path, const std::vector<std::string>& node_ids, const Matrix& h) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(9);
  for (Index i = 0; i < h.rows(); ++i) {
    out << node_ids.at(static_cast<std::size_t>(i));
    for (Index j = 0; j < h.cols(); ++j) out << '\t' << h(i, j);
    out << '\n';
  }
}

nlohmann::json metrics_json(const std::optional<MetricsReport>& report, double modularity_value, std::uint64_t seed,
                            int epochs, double wall_seconds) {
  nlohmann::json j;
  if (report) {
    j["acc"] = report->acc;
    j["nmi"] = report->nmi;
    j["ari"] = report->ari;
    j["micro_f1"] = report->micro_f1;
    j["macro_f1"] = report->macro_f1;
  } else {
    for (const char* k : {"acc", "nmi", "ari", "micro_f1", "macro_f1"}) j[k] = nullptr;
  }
  j["modularity"] = modularity_value;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["wall_seconds"] = wall_seconds;
  return j;
}

std::string input_hash(const nlohmann::json& config, const fs::path& data) {
  std::uint64_t h = fnv1a(config.dump());
  std::vector<fs::path> files;
  if (fs::is_directory(data)) {
    for (const auto& entry : fs::recursive_directory_iterator(data)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
  } else if (fs::is_regular_file(data)) {
    files.push_back(data);
  }
  std::sort(files.begin(), files.end());
  std::vector<char> buffer(1 << 16);
  for (const auto& f : files) {
    h = fnv1a(fs::relative(f, fs::is_directory(data) ? data : data.parent_path()).generic_string(), h);
    std::ifstream in(f, std::ios::binary);
    while (in) {
      in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      h = fnv1a(std::string_view(buffer.data(), static_cast<std::size_t>(in.gcount())), h);
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

fs::path make_run_dir(const fs::path& root, const std::string& command, const std::string& hash) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream name;
  name << command << '-' << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << '-' << hash.substr(0, 12);
  fs::create_directories(root);
  fs::path dir = root / name.str();
  for (int n = 2; !fs::create_directory(dir); ++n) dir = root / (name.str() + "-" + std::to_string(n));
  return dir;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Community detection with contrastive graph learning, medoid self-training and aligned clustering",
               "cegcl"};
  app.require_subcommand(1);

  // Shared training options.
  std::string config_path, data_path, out_root = "runs", seeds_text;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto add_train_options = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data_path, "dataset directory (LINQS, PubMed or canonical)")->required();
    sub->add_option("--set", overrides, "override a config key: key=value")->take_all();
    sub->add_option("--out", out_root, "root directory for run outputs")->capture_default_str();
    sub->add_flag("--quiet", quiet, "no progress output");
  };

  auto* train_cmd = app.add_subcommand("train", "train and write assignments, metrics, losses and embeddings");
  add_train_options(train_cmd);
  std::optional<std::uint64_t> seed;
  train_cmd->add_option("--seed", seed, "random seed (overrides the config)");

  auto* eval_cmd = app.add_subcommand("eval", "score an assignments file against the dataset labels");
  std::string assignments_path, eval_out, nmi_norm = "arithmetic";
  eval_cmd->add_option("--data", data_path, "dataset directory")->required();
  eval_cmd->add_option("--assignments", assignments_path, "node_id<TAB>community file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "also write the metrics JSON here");
  eval_cmd->add_option("--nmi", nmi_norm, "NMI normalization")->check(CLI::IsMember({"arithmetic", "geometric"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "train with loss terms removed, one run per combination");
  add_train_options(ablate_cmd);
  std::string drop_text;
  bool include_full = false;
  ablate_cmd->add_option("--drop", drop_text, "comma list of terms from st,al,clus")->required();
  ablate_cmd->add_option("--seeds", seeds_text, "comma list of seeds (default: config seed)");
  ablate_cmd->add_flag("--include-full", include_full, "also run the unablated model");

  auto* sweep_cmd = app.add_subcommand("sweep", "train once per value of one config key");
  add_train_options(sweep_cmd);
  std::string sweep_param, sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "config key to vary")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma list of values")->required();
  sweep_cmd->add_option("--seeds", seeds_text, "comma list of seeds (default: config seed)");

  auto* theory_cmd = app.add_subcommand("theory-check", "propagation convergence of repeated normalized averaging");
  double tol = 1e-6, edge_p = 0.2;
  int max_t = 500, columns = 8;
  Index random_nodes = 0;
  std::uint64_t theory_seed = 0;
  std::string theory_out;
  theory_cmd->add_option("--data", data_path, "dataset directory");
  theory_cmd->add_option("--random-nodes", random_nodes, "use a connected random graph with this many nodes instead");
  theory_cmd->add_option("--edge-prob", edge_p, "edge probability of the random graph")->capture_default_str();
  theory_cmd->add_option("--tol", tol, "dispersion tolerance")->capture_default_str();
  theory_cmd->add_option("--max-t", max_t, "maximum propagation steps")->capture_default_str();
  theory_cmd->add_option("--columns", columns, "width of the random initial state")->capture_default_str();
  theory_cmd->add_option("--seed", theory_seed, "random seed")->capture_default_str();
  theory_cmd->add_option("--out", theory_out, "write the t,dispersion trace CSV here");

  auto* export_cmd = app.add_subcommand("export-embeddings", "re-encode a dataset with trained parameters");
  std::string run_dir, params_path, export_out;
  export_cmd->add_option("--run", run_dir, "run directory written by train");
  export_cmd->add_option("--data", data_path, "dataset directory (default: the run's dataset)");
  export_cmd->add_option("--params", params_path, "parameter file (default: <run>/params.bin)");
  export_cmd->add_option("--out", export_out, "output TSV (default: <run>/embeddings_export.tsv)");

  auto* sbm_cmd = app.add_subcommand("generate-sbm", "write a planted-partition graph as a canonical dataset");
  SbmSpec spec;
  std::uint64_t sbm_seed = 0;
  std::string sbm_out;
  sbm_cmd->add_option("--out", sbm_out, "output directory")->required();
  sbm_cmd->add_option("--nodes", spec.nodes)->capture_default_str();
  sbm_cmd->add_option("--blocks", spec.blocks)->capture_default_str();
  sbm_cmd->add_option("--p-in", spec.p_in)->capture_default_str();
  sbm_cmd->add_option("--p-out", spec.p_out)->capture_default_str();
  sbm_cmd->add_option("--feature-dim", spec.feature_dim)->capture_default_str();
  sbm_cmd->add_option("--noise", spec.feature_noise)->capture_default_str();
  sbm_cmd->add_option("--seed", sbm_seed)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (train_cmd->parsed()) {
      TrainJob job{"train", parse_config(config_path, overrides), data_path, out_root, quiet, {}};
      if (seed) job.config.seed = *seed;
      const auto bundle = load_any(data_path);
      const auto o = run_training(job, bundle, err);
      out << o.dir.string() << '\n';
      out << o.metrics.dump() << '\n';
      return exit_ok;
    }

    if (eval_cmd->parsed()) {
      const auto bundle = load_any(data_path);
      if (!bundle.labels) throw std::runtime_error("dataset " + data_path + " has no labels");
      const Labels pred = read_assignments(assignments_path, bundle.node_ids);
      const auto norm = nmi_norm == "geometric" ? NmiNormalization::geometric : NmiNormalization::arithmetic;
      const auto report = evaluate(pred, *bundle.labels, bundle.edges, norm);
      nlohmann::json j = {{"acc", report.acc},           {"nmi", report.nmi},
                          {"ari", report.ari},           {"micro_f1", report.micro_f1},
                          {"macro_f1", report.macro_f1}, {"modularity", report.modularity}};
      if (!eval_out.empty()) write_json(eval_out, j);
      out << j.dump() << '\n';
      return exit_ok;
    }

    if (ablate_cmd->parsed()) {
      const TrainConfig base = parse_config(config_path, overrides);
      const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{base.seed} : parse_seeds(seeds_text);
      std::vector<std::string> terms = split(drop_text, ',');
      for (const auto& t : terms) {
        if (t != "st" && t != "al" && t != "clus") throw UsageError("--drop accepts st, al and clus, not '" + t + "'");
      }
      std::sort(terms.begin(), terms.end());
      terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
      // Every non-empty subset, singletons first, in the order given.
      std::vector<std::vector<std::string>> variants;
      if (include_full) variants.push_back({});
      const unsigned subsets = 1u << terms.size();
      for (std::size_t size = 1; size <= terms.size(); ++size) {
        for (unsigned mask = 1; mask < subsets; ++mask) {
          if (static_cast<std::size_t>(__builtin_popcount(mask)) != size) continue;
          std::vector<std::string> v;
          for (std::size_t b = 0; b < terms.size(); ++b) {
            if (mask & (1u << b)) v.push_back(terms[b]);
          }
          variants.push_back(v);
        }
      }
      const auto bundle = load_any(data_path);
      const fs::path root = make_run_dir(out_root, "ablate", input_hash(to_json(base), data_path));
      std::ofstream summary(root / "ablation.tsv");
      write_metric_header(summary, "variant");
      for (const auto& v : variants) {
        std::string name = "full";
        TrainConfig c = base;
        if (!v.empty()) name = "w/o";
        for (std::size_t i = 0; i < v.size(); ++i) {
          name += (i ? "+" : "-") + v[i];
          if (v[i] == "st") c.gamma_st = 0.0;
          if (v[i] == "al") c.gamma_al = 0.0;
          if (v[i] == "clus") c.gamma_clus = 0.0;
        }
        for (auto s : seeds) {
          c.seed = s;
          TrainJob job{"train", c, data_path, root, quiet, {{"variant", name}}};
          const auto o = run_training(job, bundle, err);
          write_metric_row(summary, name, o);
          write_metric_row(out, name, o);
        }
      }
      out << (root / "ablation.tsv").string() << '\n';
      return exit_ok;
    }

    if (sweep_cmd->parsed()) {
      const auto values = split(sweep_values, ',');
      if (values.empty()) throw UsageError("--values is empty");
      nlohmann::json probe = to_json(parse_config(config_path, overrides));
      const TrainConfig base = config_from_json(probe);
      const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{base.seed} : parse_seeds(seeds_text);
      // Validate every value before running anything.
      std::vector<TrainConfig> configs;
      for (const auto& v : values) {
        nlohmann::json j = probe;
        apply_override(j, sweep_param + "=" + v);
        configs.push_back(config_from_json(j));
      }
      const auto bundle = load_any(data_path);
      const fs::path root = make_run_dir(out_root, "sweep", input_hash(probe, data_path));
      std::ofstream runs(root / "runs.tsv");
      write_metric_header(runs, sweep_param);
      std::ofstream table(root / "sweep.tsv");
      table << sweep_param;
      for (const char* c : kMetricColumns) table << '\t' << c;
      table << "\tseeds\n";
      for (std::size_t i = 0; i < values.size(); ++i) {
        std::vector<std::vector<double>> cols(std::size(kMetricColumns));
        for (auto s : seeds) {
          TrainConfig c = configs[i];
          c.seed = s;
          TrainJob job{"train", c, data_path, root, quiet, {{"sweep", {{sweep_param, values[i]}}}}};
          const auto o = run_training(job, bundle, err);
          write_metric_row(runs, values[i], o);
          for (std::size_t m = 0; m < cols.size(); ++m) {
            const auto& field = o.metrics[kMetricColumns[m]];
            if (!field.is_null()) cols[m].push_back(field.get<double>());
          }
        }
        table << values[i];
        out << values[i];
        for (const auto& col : cols) {
          table << '\t';
          out << '\t';
          if (col.empty()) {
            table << "NA";
            out << "NA";
          } else {
            table << median(col);
            out << median(col);
          }
        }
        table << '\t' << seeds.size() << '\n';
        out << '\n';
      }
      out << (root / "sweep.tsv").string() << '\n';
      return exit_ok;
    }

    if (theory_cmd->parsed()) {
      EdgeList edges;
      Index n = 0;
      if (random_nodes > 0) {
        n = random_nodes;
        edges = random_connected_graph(n, edge_p, theory_seed);
      } else if (!data_path.empty()) {
        const auto bundle = load_any(data_path);
        edges = bundle.edges;
        n = bundle.num_nodes();
      } else {
        throw UsageError("theory-check needs --data or --random-nodes");
      }
      if (columns <= 0) throw UsageError("--columns must be positive");
      auto gen = substream(theory_seed, "theory-state");
      Matrix h0(n, columns);
      for (Index i = 0; i < h0.size(); ++i) h0.data()[i] = standard_normal(gen);
      const auto trace = propagation_convergence(edges, n, h0, tol, max_t);
      if (!theory_out.empty()) write_trace_csv(theory_out, trace);
      nlohmann::json j = {{"nodes", n},
                          {"components", trace.components.count},
                          {"converged", trace.converged()},
                          {"steps", trace.converged() ? trace.converged_at : max_t},
                          {"final_dispersion", trace.dispersion.back()},
                          {"log_slope", trace.dispersion.size() >= 2 ? log_dispersion_slope(trace.dispersion) : 0.0}};
      out << j.dump() << '\n';
      return exit_ok;
    }

    if (export_cmd->parsed()) {
      if (run_dir.empty() && (params_path.empty() || data_path.empty())) {
        throw UsageError("export-embeddings needs --run, or both --params and --data");
      }
      if (!run_dir.empty()) {
        if (params_path.empty()) params_path = (fs::path(run_dir) / "params.bin").string();
        if (data_path.empty()) {
          std::ifstream in(fs::path(run_dir) / "manifest.json");
          if (!in) throw std::runtime_error("cannot open manifest in " + run_dir);
          data_path = nlohmann::json::parse(in).at("data").get<std::string>();
        }
        if (export_out.empty()) export_out = (fs::path(run_dir) / "embeddings_export.tsv").string();
      }
      if (export_out.empty()) throw UsageError("export-embeddings needs --out when --run is not given");
      const auto bundle = load_any(data_path);
      const auto state = load_params(params_path);
      write_embeddings(export_out, bundle.node_ids, encode(state.gcn, bundle));
      out << export_out << '\n';
      return exit_ok;
    }

    if (sbm_cmd->parsed()) {
      save_bundle_dir(make_sbm(spec, sbm_seed), sbm_out);
      out << sbm_out << '\n';
      return exit_ok;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_usage;
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace cegcl
