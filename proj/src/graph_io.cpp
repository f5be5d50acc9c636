#include "cegcl/graph_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cegcl {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

bool parse_real(std::string_view text, double& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

int intern(std::unordered_map<std::string, int>& table, std::vector<std::string>& names,
           std::string_view name) {
  auto [it, inserted] = table.emplace(std::string(name), static_cast<int>(names.size()));
  if (inserted) names.emplace_back(name);
  return it->second;
}

void finish_report(GraphBundle& bundle) {
  std::vector<char> touched(bundle.node_ids.size(), 0);
  for (const auto& e : bundle.edges) touched[e.u] = touched[e.v] = 1;
  bundle.report.isolated_nodes =
      static_cast<std::size_t>(std::count(touched.begin(), touched.end(), 0));
}

}  // namespace

void GraphBundle::validate() const {
  const Index n = num_nodes();
  if (features.rows() != n) {
    throw std::invalid_argument("feature matrix has " + std::to_string(features.rows()) +
                                " rows but there are " + std::to_string(n) + " nodes");
  }
  if (num_communities <= 0) throw std::invalid_argument("num_communities must be positive");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
      throw std::invalid_argument("edge " + std::to_string(i) + " has an endpoint out of range");
    }
    if (e.u == e.v) throw std::invalid_argument("edge " + std::to_string(i) + " is a self-loop");
    if (e.u > e.v) throw std::invalid_argument("edge " + std::to_string(i) + " is not canonical");
    if (i > 0 && !(edges[i - 1] < e)) {
      throw std::invalid_argument("edge list is not sorted/deduplicated at " + std::to_string(i));
    }
  }
  if (labels) {
    if (static_cast<Index>(labels->size()) != n) {
      throw std::invalid_argument("label count does not match node count");
    }
    for (int y : *labels) {
      if (y < 0 || y >= num_communities) {
        throw std::invalid_argument("label " + std::to_string(y) + " outside [0, K)");
      }
    }
  }
}

EdgeList canonicalize_edges(EdgeList edges, LoadReport* report) {
  EdgeList out;
  out.reserve(edges.size());
  for (auto e : edges) {
    if (e.u == e.v) {
      if (report) ++report->dropped_self_loops;
      continue;
    }
    if (e.u > e.v) std::swap(e.u, e.v);
    out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  const auto last = std::unique(out.begin(), out.end());
  if (report) report->duplicate_edges += static_cast<std::size_t>(out.end() - last);
  out.erase(last, out.end());
  return out;
}

GraphBundle load_linqs_bundle(const fs::path& content_path, const fs::path& cites_path) {
  GraphBundle bundle;
  std::unordered_map<std::string, Index> id_index;
  std::unordered_map<std::string, int> class_index;
  std::vector<std::vector<double>> rows;
  Labels labels;

  {
    auto in = open_or_throw(content_path);
    std::string raw;
    std::size_t line_no = 0;
    std::size_t expected_fields = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      if (expected_fields == 0) {
        if (fields.size() < 2) {
          throw ParseError(content_path.string(), line_no, "expected id, features and class");
        }
        expected_fields = fields.size();
      }
      if (fields.size() != expected_fields) {
        throw ParseError(content_path.string(), line_no,
                         "expected " + std::to_string(expected_fields) + " fields, found " +
                             std::to_string(fields.size()));
      }
      const std::string id(fields.front());
      if (!id_index.emplace(id, static_cast<Index>(bundle.node_ids.size())).second) {
        throw ParseError(content_path.string(), line_no, "duplicate node id '" + id + "'");
      }
      bundle.node_ids.push_back(id);
      std::vector<double> row(expected_fields - 2);
      for (std::size_t j = 1; j + 1 < fields.size(); ++j) {
        if (!parse_real(fields[j], row[j - 1])) {
          throw ParseError(content_path.string(), line_no,
                           "feature " + std::to_string(j) + " is not a number");
        }
      }
      rows.push_back(std::move(row));
      labels.push_back(intern(class_index, bundle.class_names, fields.back()));
    }
    if (rows.empty()) throw std::runtime_error("content file " + content_path.string() + " is empty");
  }

  const Index n = static_cast<Index>(rows.size());
  const Index k = static_cast<Index>(rows.front().size());
  bundle.features.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) bundle.features(i, j) = rows[i][j];
  }
  rows.clear();

  EdgeList raw_edges;
  {
    auto in = open_or_throw(cites_path);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      if (fields.size() != 2) {
        throw ParseError(cites_path.string(), line_no,
                         "expected 2 fields, found " + std::to_string(fields.size()));
      }
      ++bundle.report.citation_lines;
      const auto a = id_index.find(std::string(fields[0]));
      const auto b = id_index.find(std::string(fields[1]));
      if (a == id_index.end() || b == id_index.end()) {
        ++bundle.report.dropped_unknown;
        continue;
      }
      raw_edges.push_back({a->second, b->second});
    }
  }
  bundle.edges = canonicalize_edges(std::move(raw_edges), &bundle.report);
  bundle.labels = std::move(labels);
  bundle.num_communities = static_cast<int>(bundle.class_names.size());
  finish_report(bundle);
  bundle.validate();
  return bundle;
}

GraphBundle load_pubmed_bundle(const fs::path& node_tab_path, const fs::path& edge_tab_path) {
  GraphBundle bundle;
  std::unordered_map<std::string, Index> id_index;
  std::unordered_map<std::string, int> token_index;
  std::unordered_map<std::string, int> class_index;
  std::vector<std::vector<std::pair<int, double>>> sparse_rows;
  Labels labels;
  bool any_label = false;
  bool missing_label = false;

  {
    auto in = open_or_throw(node_tab_path);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      const bool header = fields.front().empty() || fields.front() == "NODE" ||
                          std::any_of(fields.begin(), fields.end(), [](std::string_view f) {
                            return f.starts_with("numeric:") || f.starts_with("cat=");
                          });
      if (header) {
        // Header: "numeric:<token>:<default>" declares a feature column.
        for (auto f : fields) {
          if (f.starts_with("numeric:")) {
            f.remove_prefix(8);
            const auto colon = f.rfind(':');
            intern(token_index, bundle.feature_names, f.substr(0, colon));
          }
        }
        continue;
      }
      const std::string id(fields.front());
      if (!id_index.emplace(id, static_cast<Index>(bundle.node_ids.size())).second) {
        throw ParseError(node_tab_path.string(), line_no, "duplicate node id '" + id + "'");
      }
      bundle.node_ids.push_back(id);
      std::vector<std::pair<int, double>> row;
      int label = -1;
      for (std::size_t j = 1; j < fields.size(); ++j) {
        const auto f = fields[j];
        if (f.empty()) continue;
        const auto eq = f.find('=');
        if (eq == std::string_view::npos) {
          throw ParseError(node_tab_path.string(), line_no, "field without '=': " + std::string(f));
        }
        const auto key = f.substr(0, eq);
        const auto value = f.substr(eq + 1);
        if (key == "summary") continue;
        if (key == "label") {
          label = intern(class_index, bundle.class_names, value);
          continue;
        }
        double v = 0.0;
        if (!parse_real(value, v)) {
          throw ParseError(node_tab_path.string(), line_no,
                           "value of '" + std::string(key) + "' is not a number");
        }
        row.emplace_back(intern(token_index, bundle.feature_names, key), v);
      }
      if (label < 0) {
        missing_label = true;
        label = 0;
      } else {
        any_label = true;
      }
      labels.push_back(label);
      sparse_rows.push_back(std::move(row));
    }
  }
  if (sparse_rows.empty()) throw std::runtime_error("node file " + node_tab_path.string() + " is empty");
  if (any_label && missing_label) {
    throw std::runtime_error("node file " + node_tab_path.string() + " labels only some nodes");
  }

  const Index n = static_cast<Index>(sparse_rows.size());
  bundle.features = Matrix::Zero(n, static_cast<Index>(bundle.feature_names.size()));
  for (Index i = 0; i < n; ++i) {
    for (const auto& [col, v] : sparse_rows[i]) bundle.features(i, col) = v;
  }

  EdgeList raw_edges;
  {
    auto in = open_or_throw(edge_tab_path);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      std::vector<std::string_view> ends;
      for (auto f : fields) {
        if (f.starts_with("paper:")) ends.push_back(f.substr(6));
      }
      if (ends.empty() && line_no <= 2) continue;  // "DIRECTED cites" / "NO_FEATURES"
      if (ends.size() != 2) {
        throw ParseError(edge_tab_path.string(), line_no, "expected two 'paper:' endpoints");
      }
      ++bundle.report.citation_lines;
      const auto a = id_index.find(std::string(ends[0]));
      const auto b = id_index.find(std::string(ends[1]));
      if (a == id_index.end() || b == id_index.end()) {
        ++bundle.report.dropped_unknown;
        continue;
      }
      raw_edges.push_back({a->second, b->second});
    }
  }
  bundle.edges = canonicalize_edges(std::move(raw_edges), &bundle.report);
  if (any_label) {
    bundle.labels = std::move(labels);
    bundle.num_communities = static_cast<int>(bundle.class_names.size());
  } else {
    bundle.num_communities = 1;
  }
  finish_report(bundle);
  bundle.validate();
  return bundle;
}

void save_bundle_dir(const GraphBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "features.tsv");
    out << std::setprecision(17);
    for (Index i = 0; i < bundle.num_nodes(); ++i) {
      out << bundle.node_ids[i];
      for (Index j = 0; j < bundle.num_features(); ++j) out << '\t' << bundle.features(i, j);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (const auto& e : bundle.edges) {
      out << bundle.node_ids[e.u] << '\t' << bundle.node_ids[e.v] << '\n';
    }
  }
  if (bundle.labels) {
    std::ofstream out(dir / "labels.tsv");
    for (Index i = 0; i < bundle.num_nodes(); ++i) {
      out << bundle.node_ids[i] << '\t' << (*bundle.labels)[i] << '\n';
    }
  } else {
    fs::remove(dir / "labels.tsv");
  }
  nlohmann::json meta = {{"n", bundle.num_nodes()},
                         {"k", bundle.num_features()},
                         {"K", bundle.num_communities}};
  if (!bundle.class_names.empty()) meta["class_names"] = bundle.class_names;
  if (!bundle.feature_names.empty()) meta["feature_names"] = bundle.feature_names;
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

GraphBundle load_bundle_dir(const fs::path& dir) {
  nlohmann::json meta;
  {
    auto in = open_or_throw(dir / "meta.json");
    in >> meta;
  }
  GraphBundle bundle;
  const Index n = meta.at("n").get<Index>();
  const Index k = meta.at("k").get<Index>();
  bundle.num_communities = meta.at("K").get<int>();
  if (meta.contains("class_names")) bundle.class_names = meta["class_names"].get<std::vector<std::string>>();
  if (meta.contains("feature_names")) {
    bundle.feature_names = meta["feature_names"].get<std::vector<std::string>>();
  }

  std::unordered_map<std::string, Index> id_index;
  bundle.features.resize(n, k);
  {
    const auto path = dir / "features.tsv";
    auto in = open_or_throw(path);
    std::string raw;
    std::size_t line_no = 0;
    Index row = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      if (static_cast<Index>(fields.size()) != k + 1) {
        throw ParseError(path.string(), line_no, "expected " + std::to_string(k + 1) + " fields");
      }
      if (row >= n) throw ParseError(path.string(), line_no, "more rows than meta.json n");
      const std::string id(fields.front());
      if (!id_index.emplace(id, row).second) {
        throw ParseError(path.string(), line_no, "duplicate node id '" + id + "'");
      }
      bundle.node_ids.push_back(id);
      for (Index j = 0; j < k; ++j) {
        if (!parse_real(fields[j + 1], bundle.features(row, j))) {
          throw ParseError(path.string(), line_no, "feature " + std::to_string(j) + " is not a number");
        }
      }
      ++row;
    }
    if (row != n) throw std::runtime_error(path.string() + ": fewer rows than meta.json n");
  }

  auto lookup = [&](const fs::path& path, std::size_t line_no, std::string_view id) {
    const auto it = id_index.find(std::string(id));
    if (it == id_index.end()) throw ParseError(path.string(), line_no, "unknown node id '" + std::string(id) + "'");
    return it->second;
  };

  EdgeList raw_edges;
  {
    const auto path = dir / "edges.tsv";
    auto in = open_or_throw(path);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected 2 fields");
      raw_edges.push_back({lookup(path, line_no, fields[0]), lookup(path, line_no, fields[1])});
    }
  }
  bundle.report.citation_lines = raw_edges.size();
  bundle.edges = canonicalize_edges(std::move(raw_edges), &bundle.report);

  if (fs::exists(dir / "labels.tsv")) {
    const auto path = dir / "labels.tsv";
    auto in = open_or_throw(path);
    Labels labels(static_cast<std::size_t>(n), -1);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected 2 fields");
      int y = 0;
      const auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), y);
      if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) {
        throw ParseError(path.string(), line_no, "label is not an integer");
      }
      labels[lookup(path, line_no, fields[0])] = y;
    }
    if (std::find(labels.begin(), labels.end(), -1) != labels.end()) {
      throw std::runtime_error(path.string() + ": some nodes have no label");
    }
    bundle.labels = std::move(labels);
  }
  finish_report(bundle);
  bundle.validate();
  return bundle;
}

GraphBundle load_any(const fs::path& path) {
  if (!fs::is_directory(path)) throw std::runtime_error(path.string() + " is not a directory");
  if (fs::exists(path / "meta.json")) return load_bundle_dir(path);

  fs::path content, cites, node_tab, edge_tab;
  for (const auto& entry : fs::directory_iterator(path)) {
    const auto name = entry.path().filename().string();
    if (name.ends_with(".content")) content = entry.path();
    else if (name.ends_with(".NODE.paper.tab")) node_tab = entry.path();
    else if (name.ends_with(".cites.tab")) edge_tab = entry.path();
    else if (name.ends_with(".cites")) cites = entry.path();
  }
  if (!content.empty() && !cites.empty()) return load_linqs_bundle(content, cites);
  if (!node_tab.empty() && !edge_tab.empty()) return load_pubmed_bundle(node_tab, edge_tab);
  throw std::runtime_error("no recognized dataset files in " + path.string());
}

GraphBundle induced_subgraph(const GraphBundle& bundle, const std::vector<Index>& keep) {
  GraphBundle out;
  std::vector<Index> new_index(static_cast<std::size_t>(bundle.num_nodes()), -1);
  out.features.resize(static_cast<Index>(keep.size()), bundle.num_features());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    new_index[keep[i]] = static_cast<Index>(i);
    out.node_ids.push_back(bundle.node_ids[keep[i]]);
    out.features.row(static_cast<Index>(i)) = bundle.features.row(keep[i]);
  }
  EdgeList edges;
  for (const auto& e : bundle.edges) {
    if (new_index[e.u] >= 0 && new_index[e.v] >= 0) edges.push_back({new_index[e.u], new_index[e.v]});
  }
  out.edges = canonicalize_edges(std::move(edges));
  if (bundle.labels) {
    Labels labels;
    for (Index i : keep) labels.push_back((*bundle.labels)[i]);
    out.labels = std::move(labels);
  }
  out.num_communities = bundle.num_communities;
  out.class_names = bundle.class_names;
  out.feature_names = bundle.feature_names;
  out.report.citation_lines = out.edges.size();
  finish_report(out);
  out.validate();
  return out;
}

}  // namespace cegcl
