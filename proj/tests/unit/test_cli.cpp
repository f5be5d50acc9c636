#include "cegcl/cli.hpp"
#include "cegcl/config.hpp"
#include "cegcl/graph_io.hpp"
#include "cegcl/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cegcl;
namespace fs = std::filesystem;

namespace {

const fs::path configs{CEGCL_CONFIGS};
const fs::path fixtures{CEGCL_FIXTURES};

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cegcl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path tiny_config(const fs::path& dir) {
  auto path = dir / "tiny.json";
  std::ofstream(path) << R"({"epochs": 12, "lr": 0.001, "hidden_gcn": 16, "layers": 1, "tau": 0.5, "N_neg": 5,
    "t": 5, "d": 8, "gamma_st": 0.01, "gamma_al": 0.001, "pretrain_epochs": 10, "seed": 4})";
  return path;
}

fs::path tiny_data(const fs::path& dir) {
  SbmSpec spec;
  spec.nodes = 60;
  spec.blocks = 3;
  spec.feature_dim = 9;
  save_bundle_dir(make_sbm(spec, 8), dir / "data");
  return dir / "data";
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("shipped configs carry the published hyperparameters") {
  const auto cora = parse_config(configs / "cora.json");
  CHECK(cora.epochs == 1000);
  CHECK(cora.learning_rate == 5e-5);
  CHECK(cora.hidden_gcn == 512);
  CHECK(cora.gcn_layers == 1);
  CHECK(cora.tau == 0.5);
  CHECK(cora.n_neg == 10);
  CHECK(cora.sample_period == 50);
  CHECK(cora.mlp_hidden == 256);
  CHECK(cora.gamma_st == 0.01);
  CHECK(cora.gamma_al == 0.001);
  const auto citeseer = parse_config(configs / "citeseer.json");
  CHECK(citeseer.n_neg == 50);
  CHECK(citeseer.sample_period == 150);
  CHECK(citeseer.gamma_st == 0.0005);
  CHECK(citeseer.gamma_al == 0.0001);
  const auto pubmed = parse_config(configs / "pubmed.json");
  CHECK(pubmed.epochs == 300);
  CHECK(pubmed.hidden_gcn == 220);
  CHECK(pubmed.tau == 0.2);
  CHECK(pubmed.sample_period == 30);
  CHECK(pubmed.gamma_st == 10);
  CHECK_NOTHROW(parse_config(configs / "sbm.json"));
}

TEST_CASE("config overrides and validation") {
  const auto over = parse_config(configs / "cora.json", {"N_neg=50"});
  CHECK(over.n_neg == 50);
  CHECK(over.sample_period == 50);
  CHECK(parse_config(configs / "cora.json", {"symmetric_contrast=true"}).symmetric_contrast);
  auto message = [](auto&& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message([] { parse_config(configs / "cora.json", {"foo=1"}); }).find("foo") != std::string::npos);
  CHECK(message([] { parse_config(configs / "cora.json", {"N_neg=abc"}); }).find("N_neg") != std::string::npos);
  CHECK(message([] { parse_config(configs / "cora.json", {"tau=-1"}); }).find("tau") != std::string::npos);
  CHECK(message([] { parse_config(configs / "cora.json", {"noequals"}); }).find("key=value") != std::string::npos);
  nlohmann::json j = to_json(parse_config(configs / "cora.json"));
  j.erase("tau");
  CHECK(message([&] { config_from_json(j); }).find("tau") != std::string::npos);
  j["tau"] = "hot";
  CHECK(message([&] { config_from_json(j); }).find("tau") != std::string::npos);
  j["tau"] = 0.5;
  j["bogus"] = 1;
  CHECK(message([&] { config_from_json(j); }).find("bogus") != std::string::npos);
  j.erase("bogus");
  CHECK(config_from_json(j).tau == 0.5);
  CHECK(config_from_json(to_json(config_from_json(j))).seed == config_from_json(j).seed);
}

TEST_CASE("eval on the hand-written fixture") {
  const auto r = cli({"eval", "--data", (fixtures / "eval_min").string(), "--assignments",
                      (fixtures / "eval_min/assignments.tsv").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["acc"].get<double>() == doctest::Approx(0.75));
  CHECK(j["modularity"].get<double>() == doctest::Approx(0.5));
  CHECK(j["ari"].get<double>() <= 1.0);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"train", "--data", "x"}).code == 1);
  CHECK(cli({"eval", "--data", "/nonexistent/dir", "--assignments", (fixtures / "eval_min/assignments.tsv").string()})
            .code == 2);
  const auto dir = scratch("codes");
  const auto bad = cli({"train", "--config", (configs / "cora.json").string(), "--data", "/nonexistent",
                        "--set", "foo=1", "--out", dir.string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("foo") != std::string::npos);
  CHECK(cli({"theory-check"}).code == 1);
  CHECK(cli({"ablate", "--config", (configs / "cora.json").string(), "--data", "x", "--drop", "zz"}).code == 1);
}

TEST_CASE("train writes its outputs and is reproducible") {
  const auto dir = scratch("train");
  const auto config = tiny_config(dir);
  const auto data = tiny_data(dir);
  std::vector<std::string> args{"train", "--config", config.string(), "--data", data.string(),
                                "--seed", "1", "--out", (dir / "runs").string(), "--quiet"};
  const auto a = cli(args);
  REQUIRE(a.code == 0);
  const auto b = cli(args);
  REQUIRE(b.code == 0);
  const fs::path run_a = lines(a.out).at(0), run_b = lines(b.out).at(0);
  CHECK(run_a != run_b);
  for (const char* f : {"assignments.tsv", "metrics.json", "loss.csv", "pretrain_loss.csv", "embeddings.tsv",
                        "medoids.tsv", "community_counts.tsv", "params.bin", "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(run_a / f));
  }
  CHECK(slurp(run_a / "assignments.tsv") == slurp(run_b / "assignments.tsv"));
  CHECK(slurp(run_a / "loss.csv") == slurp(run_b / "loss.csv"));
  CHECK(slurp(run_a / "embeddings.tsv") == slurp(run_b / "embeddings.tsv"));
  auto ma = nlohmann::json::parse(slurp(run_a / "metrics.json"));
  auto mb = nlohmann::json::parse(slurp(run_b / "metrics.json"));
  for (const char* k : {"acc", "nmi", "ari", "micro_f1", "macro_f1", "modularity", "seed", "epochs", "wall_seconds"}) {
    CAPTURE(k);
    CHECK(ma.contains(k));
  }
  CHECK(ma.size() == 9);
  ma.erase("wall_seconds");
  mb.erase("wall_seconds");
  CHECK(ma == mb);
  CHECK(ma["seed"] == 1);
  CHECK(ma["epochs"] == 12);

  CHECK(lines(slurp(run_a / "assignments.tsv")).at(0) == "node_id\tcommunity");
  CHECK(lines(slurp(run_a / "loss.csv")).at(0) == "epoch,l_cl,l_st,l_clus,l_al,total");
  CHECK(lines(slurp(run_a / "loss.csv")).size() == 13);
  CHECK(lines(slurp(run_a / "medoids.tsv")).at(0) == "node_id\tround\tlabel");
  const auto manifest = nlohmann::json::parse(slurp(run_a / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["seed"] == 1);
  CHECK(manifest["input_hash"] == nlohmann::json::parse(slurp(run_b / "manifest.json"))["input_hash"]);

  // Evaluating the written assignments reproduces the run's metrics.
  const auto ev = cli({"eval", "--data", data.string(), "--assignments", (run_a / "assignments.tsv").string()});
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::json::parse(ev.out)["acc"].get<double>() == doctest::Approx(ma["acc"].get<double>()));

  // Re-encoding from the run directory gives the same embeddings.
  const auto ex = cli({"export-embeddings", "--run", run_a.string()});
  REQUIRE(ex.code == 0);
  CHECK(slurp(run_a / "embeddings_export.tsv") == slurp(run_a / "embeddings.tsv"));
}

TEST_CASE("ablate and sweep produce one row per run") {
  const auto dir = scratch("ablate");
  const auto config = tiny_config(dir);
  const auto data = tiny_data(dir);
  const auto ab = cli({"ablate", "--config", config.string(), "--data", data.string(), "--drop", "st,al", "--out",
                       (dir / "runs").string(), "--quiet"});
  REQUIRE(ab.code == 0);
  const auto out = lines(ab.out);
  REQUIRE(out.size() == 4);
  CHECK(out[0].rfind("w/o-al\t", 0) == 0);
  CHECK(out[1].rfind("w/o-st\t", 0) == 0);
  CHECK(out[2].rfind("w/o-al+st\t", 0) == 0);
  CHECK(lines(slurp(out[3])).size() == 4);

  const auto sw = cli({"sweep", "--config", config.string(), "--data", data.string(), "--param", "N_neg", "--values",
                       "2,6,10", "--out", (dir / "runs").string(), "--quiet"});
  REQUIRE(sw.code == 0);
  const auto rows = lines(sw.out);
  REQUIRE(rows.size() == 4);
  CHECK(lines(slurp(rows[3])).size() == 4);  // header + one row per value
  CHECK(cli({"sweep", "--config", config.string(), "--data", data.string(), "--param", "N_neg", "--values", "x",
             "--quiet"})
            .code == 1);
}

TEST_CASE("theory-check and generate-sbm") {
  const auto dir = scratch("theory");
  const auto r = cli({"theory-check", "--random-nodes", "20", "--out", (dir / "trace.csv").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["converged"] == true);
  CHECK(j["components"] == 1);
  CHECK(j["log_slope"].get<double>() < 0.0);
  CHECK(lines(slurp(dir / "trace.csv")).at(0) == "t,dispersion");

  const auto g = cli({"generate-sbm", "--out", (dir / "sbm").string(), "--nodes", "40", "--blocks", "2"});
  REQUIRE(g.code == 0);
  const auto bundle = load_any(dir / "sbm");
  CHECK(bundle.num_nodes() == 40);
  CHECK(bundle.num_communities == 2);
  const auto t = cli({"theory-check", "--data", (dir / "sbm").string(), "--max-t", "5"});
  CHECK(t.code == 0);
}
