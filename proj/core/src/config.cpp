#include "discont/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "discont/error.hpp"

namespace discont {

namespace {

struct KeyHandler {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  // Returns an error description, empty on success.
  std::function<std::string(RunConfig&, std::string_view)> set;
};

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return false;
  out = v;
  return true;
}

bool parse_double(std::string_view s, double& out) {
  double v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return false;
  out = v;
  return true;
}

std::string format_list(const std::vector<TransformId>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ',';
    s += transform_name(ids[i]);
  }
  return s;
}

std::string parse_list(std::string_view s, std::vector<TransformId>& out) {
  std::vector<TransformId> ids;
  while (true) {
    auto comma = s.find(',');
    auto item = trim(s.substr(0, comma));
    auto id = parse_transform(item);
    if (!id) return "unknown transform '" + std::string(item) + "'";
    ids.push_back(*id);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  out = std::move(ids);
  return {};
}

using Getter = std::function<std::string(const RunConfig&)>;
using Setter = std::function<std::string(RunConfig&, std::string_view)>;

template <typename Field>
KeyHandler size_key(std::string_view name, std::string_view description, Field field) {
  return {{name, "int", description},
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, std::string_view v) -> std::string {
            std::size_t parsed;
            if (!parse_int(v, parsed)) return "expected a non-negative integer";
            field(c) = parsed;
            return {};
          }};
}

template <typename Field>
KeyHandler u64_key(std::string_view name, std::string_view description, Field field) {
  return {{name, "int", description},
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, std::string_view v) -> std::string {
            std::uint64_t parsed;
            if (!parse_int(v, parsed)) return "expected a non-negative integer";
            field(c) = parsed;
            return {};
          }};
}

template <typename Field>
KeyHandler float_key(std::string_view name, std::string_view description, Field field) {
  return {{name, "float", description},
          [field](const RunConfig& c) { return format_double(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, std::string_view v) -> std::string {
            double parsed;
            if (!parse_double(v, parsed)) return "expected a number";
            field(c) = parsed;
            return {};
          }};
}

template <typename Field>
KeyHandler bool_key(std::string_view name, std::string_view description, Field field) {
  return {{name, "bool", description},
          [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [field](RunConfig& c, std::string_view v) -> std::string {
            if (v == "true") {
              field(c) = true;
            } else if (v == "false") {
              field(c) = false;
            } else {
              return "expected true or false";
            }
            return {};
          }};
}

template <typename Field>
KeyHandler path_key(std::string_view name, std::string_view description, Field field) {
  return {{name, "path", description},
          [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)).string(); },
          [field](RunConfig& c, std::string_view v) -> std::string {
            if (v.empty()) return "expected a path";
            field(c) = std::filesystem::path(std::string(v));
            return {};
          }};
}

template <typename Field>
KeyHandler list_key(std::string_view name, std::string_view description, Field field) {
  return {{name, "list", description},
          [field](const RunConfig& c) { return format_list(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, std::string_view v) -> std::string { return parse_list(v, field(c)); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = {
      size_key("batch_size", "images per training step (B)", [](RunConfig& c) -> auto& { return c.train.batch_size; }),
      size_key("image_size", "square input side in pixels",
               [](RunConfig& c) -> auto& { return c.train.model.image_size; }),
      size_key("latent_dim", "width d of every latent chunk",
               [](RunConfig& c) -> auto& { return c.train.model.latent_dim; }),
      size_key("num_attributes", "number k of attribute chunks",
               [](RunConfig& c) -> auto& { return c.train.model.attributes; }),
      size_key("context_dim", "context vector width c",
               [](RunConfig& c) -> auto& { return c.train.model.context_dim; }),
      float_key("lambda_kl", "weight of the KL term", [](RunConfig& c) -> auto& { return c.train.weights.kl; }),
      float_key("lambda_cen", "weight of the center loss", [](RunConfig& c) -> auto& { return c.train.weights.cen; }),
      float_key("lambda_a", "weight of the augmentation consistency loss",
                [](RunConfig& c) -> auto& { return c.train.weights.aug; }),
      float_key("learning_rate", "Adam step size", [](RunConfig& c) -> auto& { return c.train.adam.learning_rate; }),
      float_key("adam_beta1", "Adam first-moment decay", [](RunConfig& c) -> auto& { return c.train.adam.beta1; }),
      float_key("adam_beta2", "Adam second-moment decay", [](RunConfig& c) -> auto& { return c.train.adam.beta2; }),
      float_key("adam_eps", "Adam denominator epsilon", [](RunConfig& c) -> auto& { return c.train.adam.eps; }),
      size_key("epochs", "training epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }),
      u64_key("seed", "master seed", [](RunConfig& c) -> auto& { return c.train.seed; }),
      list_key("aug_negatives", "negative transform per attribute, comma separated",
               [](RunConfig& c) -> auto& { return c.train.augmentation.negatives; }),
      list_key("aug_positives", "positive transforms, comma separated",
               [](RunConfig& c) -> auto& { return c.train.augmentation.positives; }),
      float_key("aug_p", "probability of applying each transform",
                [](RunConfig& c) -> auto& { return c.train.augmentation.bernoulli_p; }),
      path_key("dataset_dir", "dataset directory", [](RunConfig& c) -> auto& { return c.train.dataset_dir; }),
      path_key("output_dir", "run output directory", [](RunConfig& c) -> auto& { return c.train.output_dir; }),
      bool_key("keep_all_checkpoints", "also keep epoch_NNNN.dsck for every epoch",
               [](RunConfig& c) -> auto& { return c.train.keep_all_checkpoints; }),
      bool_key("prefetch", "augment the next batch on a worker thread",
               [](RunConfig& c) -> auto& { return c.train.prefetch; }),
      size_key("pca_dims", "PCA dimensions for the image baseline",
               [](RunConfig& c) -> auto& { return c.eval.pca_dims; }),
      size_key("k_neighbors", "neighbors in the KSG estimator",
               [](RunConfig& c) -> auto& { return c.eval.k_neighbors; }),
      size_key("eval_samples", "images used by eval", [](RunConfig& c) -> auto& { return c.eval.eval_samples; }),
      size_key("viz_samples", "images projected by viz", [](RunConfig& c) -> auto& { return c.eval.viz_samples; }),
      size_key("swap_pairs", "columns in the swap grid", [](RunConfig& c) -> auto& { return c.eval.swap_pairs; }),
  };
  return table;
}

const KeyHandler* find_handler(std::string_view name) {
  for (const auto& h : handlers())
    if (h.key.name == name) return &h;
  return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& h : handlers()) out.push_back(h.key);
    return out;
  }();
  return keys;
}

std::string config_value(const RunConfig& config, std::string_view key) {
  const auto* h = find_handler(key);
  if (!h) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return h->get(config);
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    const auto* h = find_handler(key);
    if (!h) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    if (auto err = h->set(config, value); !err.empty()) {
      throw ConfigError(where + std::string(key) + ": " + err + ", got '" + std::string(value) + "'");
    }
  }
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& h : handlers()) {
    out += h.key.name;
    out += " = ";
    out += h.get(config);
    out += '\n';
  }
  return out;
}

void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto path = dir / "resolved_config.txt";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_config(config);
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace discont
