#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "wvi/error.hpp"

namespace wvi::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"data",
       {"source", "synthetic", "n_train", "n_validation", "seed", "train_images", "validation_images", "downsample",
        "limit_train", "limit_validation"}},
      {"model", {"latent_dim", "decoder_hidden", "encoder_hidden", "obs_sigma", "latent_sigma"}},
      {"cost", {"weights", "observable_metric", "residual_metric", "f_kind"}},
      {"train",
       {"epsilon", "sinkhorn_t", "batch_n", "learning_rate", "beta1", "beta2", "adam_epsilon", "epochs",
        "steps_per_epoch", "seed", "debias", "normalize_cost"}},
      {"eval", {"n_latent", "n_gen"}},
      {"perturb", {"runs", "vary_seed", "draw_weights"}},
      {"output", {"dir", "wall_clock", "checkpoint_every"}},
  };
  return keys;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class Reader {
 public:
  Reader(pt::ptree tree, std::vector<std::string>& defaulted) : tree_(std::move(tree)), defaulted_(defaulted) {}

  std::optional<std::string> raw(const std::string& key) {
    auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v) {
      defaulted_.push_back(key);
      return std::nullopt;
    }
    return trim(*v);
  }

  std::string str(const std::string& key, const std::string& fallback) { return raw(key).value_or(fallback); }

  double real(const std::string& key, double fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used == v->size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: " + key + " = '" + *v + "' is not a number");
  }

  std::uint64_t natural(const std::string& key, std::uint64_t fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    return parse_natural(key, *v);
  }

  bool flag(const std::string& key, bool fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    const std::string s = upper(*v);
    if (s == "TRUE" || s == "ON" || s == "1" || s == "YES") return true;
    if (s == "FALSE" || s == "OFF" || s == "0" || s == "NO") return false;
    throw ConfigError("config: " + key + " = '" + *v + "' is not a boolean (true/false/on/off)");
  }

  std::vector<std::size_t> sizes(const std::string& key, const std::vector<std::size_t>& fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(static_cast<std::size_t>(parse_natural(key, item)));
    }
    return out;
  }

 private:
  static std::uint64_t parse_natural(const std::string& key, const std::string& v) {
    if (!v.empty() && std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
      try {
        return std::stoull(v);
      } catch (const std::exception&) {
      }
    }
    throw ConfigError("config: " + key + " = '" + v + "' is not a non-negative integer");
  }

  pt::ptree tree_;
  std::vector<std::string>& defaulted_;
};

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir, const EnvLookup& env) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  pt::ptree flat;
  for (const auto& [section, body] : tree) {
    auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' appears outside any section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
      }
      flat.put(pt::ptree::path_type(section + "." + key, '/'), value.data());
    }
  }
  for (const auto& [section, keys] : schema()) {
    for (const auto& key : keys) {
      if (auto v = env("WVI_" + upper(section) + "_" + upper(key))) {
        flat.put(pt::ptree::path_type(section + "." + key, '/'), *v);
      }
    }
  }

  RunConfig c;
  Reader r(std::move(flat), c.defaulted);

  c.data.source = r.str("data.source", c.data.source);
  if (c.data.source != "synthetic" && c.data.source != "idx") {
    throw ConfigError("config: data.source = '" + c.data.source + "' must be synthetic or idx");
  }
  c.data.synthetic = r.str("data.synthetic", c.data.synthetic);
  c.data.n_train = r.natural("data.n_train", c.data.n_train);
  c.data.n_validation = r.natural("data.n_validation", c.data.n_validation);
  c.data.seed = r.natural("data.seed", c.data.seed);
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  c.data.train_images = resolve(r.str("data.train_images", ""));
  c.data.validation_images = resolve(r.str("data.validation_images", ""));
  c.data.downsample = r.natural("data.downsample", c.data.downsample);
  c.data.limit_train = r.natural("data.limit_train", 0);
  c.data.limit_validation = r.natural("data.limit_validation", 0);

  c.model.latent_dim = r.natural("model.latent_dim", c.model.latent_dim);
  c.model.decoder_hidden = r.sizes("model.decoder_hidden", c.model.decoder_hidden);
  c.model.encoder_hidden = r.sizes("model.encoder_hidden", c.model.encoder_hidden);
  c.model.obs_sigma = r.real("model.obs_sigma", c.model.obs_sigma);
  c.model.latent_sigma = r.real("model.latent_sigma", c.model.latent_sigma);

  if (auto w = r.raw("cost.weights")) c.train.cost.weights = WeightVector::parse(*w);
  if (auto m = r.raw("cost.observable_metric")) c.train.cost.observable_metric = parse_metric(*m);
  if (auto m = r.raw("cost.residual_metric")) c.train.cost.residual_metric = parse_metric(*m);
  if (auto f = r.raw("cost.f_kind")) c.train.cost.f_kind = parse_f_kind(*f);

  c.train.epsilon = r.real("train.epsilon", c.train.epsilon);
  c.train.sinkhorn_t = static_cast<int>(r.natural("train.sinkhorn_t", static_cast<std::uint64_t>(c.train.sinkhorn_t)));
  c.train.batch_n = r.natural("train.batch_n", c.train.batch_n);
  c.train.adam.learning_rate = r.real("train.learning_rate", c.train.adam.learning_rate);
  c.train.adam.beta1 = r.real("train.beta1", c.train.adam.beta1);
  c.train.adam.beta2 = r.real("train.beta2", c.train.adam.beta2);
  c.train.adam.epsilon = r.real("train.adam_epsilon", c.train.adam.epsilon);
  c.train.epochs = r.natural("train.epochs", c.train.epochs);
  c.train.steps_per_epoch = r.natural("train.steps_per_epoch", c.train.steps_per_epoch);
  c.train.seed = r.natural("train.seed", c.train.seed);
  c.train.debias = r.flag("train.debias", c.train.debias);
  c.train.normalize_cost = r.flag("train.normalize_cost", c.train.normalize_cost);

  c.eval.n_latent = r.natural("eval.n_latent", c.eval.n_latent);
  c.eval.n_gen = r.natural("eval.n_gen", c.eval.n_gen);

  c.perturb.runs = r.natural("perturb.runs", c.perturb.runs);
  c.perturb.vary_seed = r.flag("perturb.vary_seed", c.perturb.vary_seed);
  c.perturb.draw_weights = r.flag("perturb.draw_weights", c.perturb.draw_weights);

  c.output.dir = r.str("output.dir", c.output.dir.string());
  c.output.wall_clock = r.flag("output.wall_clock", c.output.wall_clock);
  c.output.checkpoint_every = r.natural("output.checkpoint_every", c.output.checkpoint_every);

  c.model.validate();
  c.train.validate();
  if (c.data.downsample == 0) throw ConfigError("config: data.downsample must be positive");
  if (c.eval.n_latent == 0 || c.eval.n_gen == 0) throw ConfigError("config: eval sample counts must be positive");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), path.parent_path(), env);
}

namespace {

Tensor head_rows(const Tensor& t, std::size_t limit) {
  if (limit == 0 || limit >= t.rows()) return t;
  return slice_rows(t, 0, limit);
}

Tensor load_images(const std::filesystem::path& path, const char* which, std::size_t factor,
                   std::size_t& rows, std::size_t& cols) {
  if (path.empty()) throw ConfigError(std::string("config: data.") + which + " is required when data.source = idx");
  if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path.string());
  const IdxImages images = downsample(read_idx_images(path), factor);
  rows = images.rows;
  cols = images.cols;
  return to_unit_tensor(images);
}

}  // namespace

Dataset load_dataset(const DataConfig& config) {
  Dataset d;
  if (config.source == "synthetic") {
    const SynthKind kind = parse_synth_kind(config.synthetic);
    if (config.n_train == 0 || config.n_validation == 0) {
      throw ConfigError("config: synthetic datasets need positive n_train and n_validation");
    }
    d.train = synth_dataset(kind, config.n_train, config.seed);
    d.validation = synth_dataset(kind, config.n_validation, splitmix64(config.seed));
    return d;
  }
  std::size_t vr = 0, vc = 0;
  d.train = head_rows(load_images(config.train_images, "train_images", config.downsample, d.image_rows, d.image_cols),
                      config.limit_train);
  d.validation =
      head_rows(load_images(config.validation_images, "validation_images", config.downsample, vr, vc),
                config.limit_validation);
  if (vr != d.image_rows || vc != d.image_cols) {
    throw IoError("dataset: train images are " + std::to_string(d.image_rows) + "x" + std::to_string(d.image_cols) +
                  " but validation images are " + std::to_string(vr) + "x" + std::to_string(vc));
  }
  return d;
}

}  // namespace wvi::cli
