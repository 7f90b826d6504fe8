#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "discont/config.hpp"
#include "discont/data.hpp"
#include "discont/error.hpp"
#include "discont/evaluation.hpp"
#include "discont/trainer.hpp"

namespace discont::cli {

namespace {

struct Options {
  std::string config;
  std::string ckpt;
  std::string resume;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t attr = 0;
  ColorPositionSpec data;
  std::size_t oversample = 1;
};

std::uint64_t parse_seed(std::string_view text, std::string_view source) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(source) + " must be a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

// flag > DISCONT_SEED > config file > default.
RunConfig load_config(const Options& o) {
  RunConfig cfg = parse_config(o.config);
  if (const char* env = std::getenv(kSeedEnv); env && *env) cfg.train.seed = parse_seed(env, kSeedEnv);
  if (o.seed) cfg.train.seed = *o.seed;
  return cfg;
}

Checkpoint load_model(const Options& o) { return checkpoint_load(o.ckpt); }

FactorDataset load_matching_dataset(const RunConfig& cfg, const ModelDims& dims) {
  auto ds = load_dataset(cfg.train.dataset_dir);
  if (ds.image_size() != dims.image_size) {
    throw ConfigError("dataset " + cfg.train.dataset_dir.string() + " holds " + std::to_string(ds.image_size()) +
                      " px images but the model expects " + std::to_string(dims.image_size));
  }
  return ds;
}

std::filesystem::path output_path(const Options& o, const RunConfig& cfg, std::string_view name) {
  return o.out.empty() ? cfg.train.output_dir / name : std::filesystem::path(o.out);
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  ColorPositionSpec spec = o.data;
  std::filesystem::path dir = o.out.empty() ? std::filesystem::path("data") : std::filesystem::path(o.out);
  if (!o.config.empty()) {
    const auto cfg = load_config(o);
    if (o.out.empty()) dir = cfg.train.dataset_dir;
    spec.image_size = cfg.train.model.image_size;
    spec.seed = cfg.train.seed;
  }
  if (o.seed) spec.seed = *o.seed;
  auto ds = generate_color_position(spec);
  if (o.oversample > 1) ds = oversample_with_jitter(ds, o.oversample, spec.seed);
  save_dataset(ds, dir);
  out << "wrote " << ds.size() << " images to " << dir.string() << '\n';
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig cfg = load_config(o);
  cfg.train.validate();
  const auto ds = load_dataset(cfg.train.dataset_dir);
  write_resolved_config(cfg, cfg.train.output_dir);

  FitOptions fit_options;
  if (!o.resume.empty()) fit_options.resume = checkpoint_load(o.resume);
  const std::size_t steps = ds.size() / std::max<std::size_t>(cfg.train.batch_size, 1);
  double epoch_total = 0.0;
  fit_options.on_step = [&](const LossRow& row) {
    epoch_total += row.report.total;
    if (row.step == steps) {
      out << "epoch " << row.epoch << '/' << cfg.train.epochs << " mean_total=" << epoch_total / steps << '\n';
      epoch_total = 0.0;
    }
  };
  const auto result = fit(ds, cfg.train, fit_options);
  out << "wrote " << (cfg.train.output_dir / "last.dsck").string() << " after epoch " << result.checkpoint.epoch
      << '\n';
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  auto ck = load_model(o);
  const auto ds = load_matching_dataset(cfg, ck.model.dims);
  InformativenessOptions options{std::min(cfg.eval.eval_samples, ds.size()), cfg.eval.pca_dims, cfg.eval.k_neighbors,
                                 cfg.train.seed};
  const auto report = informativeness_report(ck.model, ds, options);
  const auto path = output_path(o, cfg, "informativeness.csv");
  write_informativeness_csv(report, path);
  for (const auto& r : report) {
    out << r.chunk << " mi=" << r.mi.value << " nats" << (r.mi.jittered ? " (ties jittered)" : "") << '\n';
  }
  out << "wrote " << path.string() << '\n';
  return kOk;
}

int cmd_viz(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  auto ck = load_model(o);
  const auto ds = load_matching_dataset(cfg, ck.model.dims);
  const auto report = project_latents_2d(ck.model, ds, std::min(cfg.eval.viz_samples, ds.size()));
  const auto path = output_path(o, cfg, "projection.csv");
  write_projection_csv(report, path);
  out << "wrote " << report.points.size() << " points to " << path.string() << '\n';
  return kOk;
}

int cmd_swap(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o);
  auto ck = load_model(o);
  const auto ds = load_matching_dataset(cfg, ck.model.dims);
  if (o.attr < 1 || o.attr > ck.model.dims.attributes) {
    throw ConfigError("--attr must lie in [1, " + std::to_string(ck.model.dims.attributes) + "]");
  }
  const std::size_t n = cfg.eval.swap_pairs;
  if (n == 0 || 2 * n > ds.size()) {
    throw ConfigError("swap_pairs = " + std::to_string(n) + " needs 2n <= " + std::to_string(ds.size()) + " images");
  }
  Rng rng(mix_seed(cfg.train.seed, 3));
  const auto order = shuffled_indices(ds.size(), rng);
  const std::span<const std::size_t> all(order);
  const auto a = gather(ds, all.subspan(0, n));
  const auto b = gather(ds, all.subspan(n, n));
  const auto path = output_path(o, cfg, "swap_attr" + std::to_string(o.attr) + ".ppm");
  swap_grid(ck.model, a.images, b.images, o.attr - 1, path);
  out << "wrote " << path.string() << '\n';
  return kOk;
}

}  // namespace

std::string help_footer() {
  std::ostringstream os;
  const RunConfig defaults;
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.name.size() + config_value(defaults, k.name).size());
  os << "Config file: `key = value` lines, `#` starts a comment. Keys and defaults:\n";
  for (const auto& k : config_keys()) {
    const auto value = config_value(defaults, k.name);
    os << "  " << k.name << " = " << value << std::string(width + 2 - k.name.size() - value.size(), ' ') << '('
       << k.type << ") " << k.description << '\n';
  }
  os << "\nSeed precedence: --seed > " << kSeedEnv << " > config seed > default.\n"
     << "\nExit codes:\n"
     << "  0  success\n"
     << "  1  internal error\n"
     << "  2  usage error\n"
     << "  3  configuration error\n"
     << "  4  I/O error\n"
     << "  5  file format error\n"
     << "  6  numeric error (non-finite loss or parameters)\n";
  return os.str();
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DisCont: self-supervised attribute disentanglement", "discont"};
  app.require_subcommand(1);
  app.footer(help_footer());
  Options o;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic color/position dataset");
  gen->add_option("--out", o.out, "output directory (default: dataset_dir from --config, else data)");
  gen->add_option("--config", o.config, "run config supplying dataset_dir, image_size and seed");
  gen->add_option("--colors", o.data.n_colors, "number of colors")->capture_default_str();
  gen->add_option("--nx", o.data.n_x, "horizontal grid cells")->capture_default_str();
  gen->add_option("--ny", o.data.n_y, "vertical grid cells")->capture_default_str();
  gen->add_option("--image-size", o.data.image_size, "image side in pixels")->capture_default_str();
  gen->add_option("--oversample", o.oversample, "jittered copies of every image")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a model and write checkpoints plus loss_log.csv");
  train->add_option("--config", o.config, "run config")->required();
  train->add_option("--resume", o.resume, "checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "write the per-chunk informativeness CSV");
  auto* viz = app.add_subcommand("viz", "write the 2-D latent projection CSV");
  auto* swap = app.add_subcommand("swap", "write a 3-row attribute swap grid as PPM");
  for (auto* sub : {eval, viz, swap}) {
    sub->add_option("--config", o.config, "run config")->required();
    sub->add_option("--ckpt", o.ckpt, "checkpoint file")->required();
    sub->add_option("--out", o.out, "output file (default: under output_dir)");
  }
  swap->add_option("--attr", o.attr, "attribute to swap, 1-based")->required();

  for (auto* sub : {gen, train, eval, viz, swap}) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { o.seed = s; }, "overrides config and environment seed");
    sub->footer(help_footer());
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "discont: usage error: " << e.what() << " (see --help)\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (viz->parsed()) return cmd_viz(o, out);
    return cmd_swap(o, out);
  } catch (const ConfigError& e) {
    err << "discont: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    err << "discont: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    err << "discont: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const FormatError& e) {
    err << "discont: format error: " << e.what() << '\n';
    return kFormat;
  } catch (const NumericError& e) {
    err << "discont: numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "discont: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace discont::cli
