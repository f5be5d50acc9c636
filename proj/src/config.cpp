#include "cegcl/config.hpp"

#include <charconv>
#include <fstream>

namespace cegcl {

namespace {

enum class Kind { integer, unsigned_integer, real, boolean, text };

struct Field {
  const char* key;
  Kind kind;
  bool required;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      {"epochs", Kind::integer, true},
      {"lr", Kind::real, true},
      {"hidden_gcn", Kind::integer, true},
      {"layers", Kind::integer, true},
      {"tau", Kind::real, true},
      {"N_neg", Kind::integer, true},
      {"t", Kind::integer, true},
      {"d", Kind::integer, true},
      {"gamma_st", Kind::real, true},
      {"gamma_al", Kind::real, true},
      {"gamma_clus", Kind::real, false},
      {"mask_rate", Kind::real, false},
      {"seed", Kind::unsigned_integer, false},
      {"pretrain_epochs", Kind::integer, false},
      {"target_refresh", Kind::integer, false},
      {"normalize_similarity", Kind::boolean, false},
      {"symmetric_contrast", Kind::boolean, false},
      {"align_updates_centers", Kind::boolean, false},
      {"nmi_normalization", Kind::text, false},
  };
  return all;
}

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

bool type_matches(Kind kind, const nlohmann::json& v) {
  switch (kind) {
    case Kind::integer: return v.is_number_integer();
    case Kind::unsigned_integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::real: return v.is_number();
    case Kind::boolean: return v.is_boolean();
    case Kind::text: return v.is_string();
  }
  return false;
}

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::integer: return "an integer";
    case Kind::unsigned_integer: return "a non-negative integer";
    case Kind::real: return "a number";
    case Kind::boolean: return "true or false";
    case Kind::text: return "a string";
  }
  return "?";
}

template <typename T>
T get(const nlohmann::json& json, const char* key, T fallback) {
  auto it = json.find(key);
  return it == json.end() ? fallback : it->get<T>();
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string("config key '") + key + "' " + what);
  };
  require(epochs >= 0, "epochs", "must be non-negative");
  require(learning_rate > 0.0, "lr", "must be positive");
  require(hidden_gcn > 0, "hidden_gcn", "must be positive");
  require(gcn_layers > 0, "layers", "must be positive");
  require(tau > 0.0, "tau", "must be positive");
  require(n_neg >= 0, "N_neg", "must be non-negative");
  require(sample_period > 0, "t", "must be positive");
  require(mlp_hidden > 0, "d", "must be positive");
  require(gamma_st >= 0.0, "gamma_st", "must be non-negative");
  require(gamma_al >= 0.0, "gamma_al", "must be non-negative");
  require(gamma_clus >= 0.0, "gamma_clus", "must be non-negative");
  require(mask_rate >= 0.0 && mask_rate < 1.0, "mask_rate", "must lie in [0, 1)");
  require(pretrain_epochs >= 0, "pretrain_epochs", "must be non-negative");
  require(target_refresh > 0, "target_refresh", "must be positive");
  require(nmi_normalization == "arithmetic" || nmi_normalization == "geometric", "nmi_normalization",
          "must be \"arithmetic\" or \"geometric\"");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"epochs", c.epochs},
      {"lr", c.learning_rate},
      {"hidden_gcn", c.hidden_gcn},
      {"layers", c.gcn_layers},
      {"tau", c.tau},
      {"N_neg", c.n_neg},
      {"t", c.sample_period},
      {"d", c.mlp_hidden},
      {"gamma_st", c.gamma_st},
      {"gamma_al", c.gamma_al},
      {"gamma_clus", c.gamma_clus},
      {"mask_rate", c.mask_rate},
      {"seed", c.seed},
      {"pretrain_epochs", c.pretrain_epochs},
      {"target_refresh", c.target_refresh},
      {"normalize_similarity", c.normalize_similarity},
      {"symmetric_contrast", c.symmetric_contrast},
      {"align_updates_centers", c.align_updates_centers},
      {"nmi_normalization", c.nmi_normalization},
  };
}

TrainConfig config_from_json(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : json.items()) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown config key '" + key + "'");
    if (!type_matches(f->kind, value)) {
      throw ConfigError("config key '" + key + "' must be " + kind_name(f->kind));
    }
  }
  for (const auto& f : fields()) {
    if (f.required && !json.contains(f.key)) throw ConfigError(std::string("missing required config key '") + f.key + "'");
  }
  TrainConfig c;
  c.epochs = json.at("epochs").get<int>();
  c.learning_rate = json.at("lr").get<double>();
  c.hidden_gcn = json.at("hidden_gcn").get<int>();
  c.gcn_layers = json.at("layers").get<int>();
  c.tau = json.at("tau").get<double>();
  c.n_neg = json.at("N_neg").get<int>();
  c.sample_period = json.at("t").get<int>();
  c.mlp_hidden = json.at("d").get<int>();
  c.gamma_st = json.at("gamma_st").get<double>();
  c.gamma_al = json.at("gamma_al").get<double>();
  c.gamma_clus = get(json, "gamma_clus", c.gamma_clus);
  c.mask_rate = get(json, "mask_rate", c.mask_rate);
  c.seed = get(json, "seed", c.seed);
  c.pretrain_epochs = get(json, "pretrain_epochs", c.pretrain_epochs);
  c.target_refresh = get(json, "target_refresh", c.target_refresh);
  c.normalize_similarity = get(json, "normalize_similarity", c.normalize_similarity);
  c.symmetric_contrast = get(json, "symmetric_contrast", c.symmetric_contrast);
  c.align_updates_centers = get(json, "align_updates_centers", c.align_updates_centers);
  c.nmi_normalization = get(json, "nmi_normalization", c.nmi_normalization);
  c.validate();
  return c;
}

void apply_override(nlohmann::json& json, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string_view text = assignment.substr(eq + 1);
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  auto bad = [&] { return ConfigError("config key '" + key + "' must be " + kind_name(f->kind) + ", got '" + std::string(text) + "'"); };
  switch (f->kind) {
    case Kind::integer: {
      std::int64_t v;
      if (!parse_number(text, v)) throw bad();
      json[key] = v;
      break;
    }
    case Kind::unsigned_integer: {
      std::uint64_t v;
      if (!parse_number(text, v)) throw bad();
      json[key] = v;
      break;
    }
    case Kind::real: {
      double v;
      if (!parse_number(text, v)) throw bad();
      json[key] = v;
      break;
    }
    case Kind::boolean:
      if (text == "true" || text == "1") {
        json[key] = true;
      } else if (text == "false" || text == "0") {
        json[key] = false;
      } else {
        throw bad();
      }
      break;
    case Kind::text:
      json[key] = std::string(text);
      break;
  }
}

TrainConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(json, o);
  return config_from_json(json);
}

}  // namespace cegcl
