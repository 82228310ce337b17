#include "run_config.hpp"

#include <fstream>
#include <set>

#include "impugan/error.hpp"
#include "impugan/rng.hpp"
#include "impugan/version.hpp"

namespace impugan::cli {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

DatasetConfig dataset_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("'dataset' must be an object");
  DatasetConfig d;
  for (const auto& [key, v] : j.items()) {
    if (key == "path") d.path = resolve(base, v.get<std::string>());
    else if (key == "name") d.name = v.get<std::string>();
    else if (key == "schema") d.schema = resolve(base, v.get<std::string>());
    else if (key == "label") d.label = v.get<std::string>();
    else if (key == "missing_tokens") d.missing_tokens = v.get<std::vector<std::string>>();
    else if (key == "drop_incomplete") d.drop_incomplete = v.get<bool>();
    else if (key == "subsample") d.subsample = v.get<std::size_t>();
    else if (key == "kinds") {
      for (const auto& [col, kind] : v.items()) d.kinds[col] = data::parse_column_kind(kind.get<std::string>());
    } else {
      throw ConfigError("dataset: unknown field '" + key + "'");
    }
  }
  return d;
}

}  // namespace

std::string RunConfig::dataset_name() const {
  if (!dataset.name.empty()) return dataset.name;
  return dataset.path.empty() ? std::string("dataset") : dataset.path.stem().string();
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") c.dataset = dataset_from_json(v, base);
      else if (key == "missingness") {
        const nlohmann::json list = v.is_array() ? v : nlohmann::json::array({v});
        for (const auto& s : list) {
          c.missingness.push_back(missing::spec_from_json(s));
          c.missingness_seeded.push_back(s.contains("seed"));
        }
      } else if (key == "methods") c.methods = v.get<std::vector<std::string>>();
      else if (key == "train") c.train = gan::train_config_from_json(v);
      else if (key == "evaluation") c.evaluation = eval::eval_config_from_json(v);
      else if (key == "output") c.output = resolve(base, v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "checkpoint") c.checkpoint = resolve(base, v.get<std::string>());
      else if (key == "input") c.input = resolve(base, v.get<std::string>());
      else if (key == "truth") c.truth = resolve(base, v.get<std::string>());
      else if (key == "imputed") c.imputed = resolve(base, v.get<std::string>());
      else if (key == "mask") c.mask = resolve(base, v.get<std::string>());
      else if (key == "test") c.test = resolve(base, v.get<std::string>());
      else if (key == "samples") c.samples = v.get<std::size_t>();
      else if (key == "fv_constant") c.fv_constant = v.get<double>();
      else if (key == "train_fraction") c.train_fraction = v.get<double>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "force") c.force = v.get<bool>();
      else throw ConfigError("unknown config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  static const std::set<std::string> known{"impugan", "gm", "fv"};
  if (c.methods.empty()) throw ConfigError("method list is empty");
  for (const auto& m : c.methods) {
    if (!known.count(m)) throw ConfigError("unknown method '" + m + "' (expected impugan, gm or fv)");
  }
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& [k, v] : c.dataset.kinds) kinds[k] = std::string(data::to_string(v));
  nlohmann::json specs = nlohmann::json::array();
  for (std::size_t i = 0; i < c.missingness.size(); ++i) {
    auto s = missing::to_json(c.missingness[i]);
    if (i >= c.missingness_seeded.size() || !c.missingness_seeded[i]) s.erase("seed");
    specs.push_back(std::move(s));
  }
  return {{"dataset",
           {{"path", c.dataset.path.string()},
            {"name", c.dataset_name()},
            {"schema", c.dataset.schema.string()},
            {"kinds", kinds},
            {"missing_tokens", c.dataset.missing_tokens},
            {"label", c.dataset.label},
            {"drop_incomplete", c.dataset.drop_incomplete},
            {"subsample", c.dataset.subsample}}},
          {"missingness", specs},
          {"methods", c.methods},
          {"train", gan::to_json(c.train)},
          {"evaluation", eval::to_json(c.evaluation)},
          {"output", c.output.string()},
          {"seed", c.seed},
          {"samples", c.samples},
          {"fv_constant", c.fv_constant},
          {"train_fraction", c.train_fraction}};
}

std::vector<missing::MissingnessSpec> default_sweep() {
  std::vector<missing::MissingnessSpec> out;
  for (auto m : {missing::Mechanism::kMcar, missing::Mechanism::kMar, missing::Mechanism::kMnar}) {
    for (double r : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      missing::MissingnessSpec s;
      s.mechanism = m;
      s.rate = r;
      out.push_back(s);
    }
  }
  return out;
}

std::string spec_label(const missing::MissingnessSpec& spec) {
  return std::string(missing::to_string(spec.mechanism)) + "-" + data::format_number(spec.rate);
}

std::uint64_t spec_seed(const RunConfig& c, std::size_t index) {
  if (index < c.missingness_seeded.size() && c.missingness_seeded[index]) return c.missingness[index].seed;
  return derive_seed(c.seed, fnv1a(spec_label(c.missingness[index])));
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::string config_hash(const RunConfig& c) {
  // Where results are written does not change them.
  nlohmann::json j = to_json(c);
  j.erase("output");
  return hex64(fnv1a(j.dump()));
}

nlohmann::json provenance(const RunConfig& c, const std::string& command) {
  return {{"command", command},
          {"config_hash", config_hash(c)},
          {"seed", c.seed},
          {"versions",
           {{"impugan", kVersion},
            {"model_format", kModelFormat},
            {"transformer_format", kTransformerFormat},
            {"schema_format", kSchemaFormat},
            {"report_format", kReportFormat}}}};
}

}  // namespace impugan::cli
