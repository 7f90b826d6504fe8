#include "discont/trainer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include "discont/error.hpp"

namespace discont {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void require_finite(const LossReport& r) {
  if (std::isfinite(r.l_r) && std::isfinite(r.l_kl) && std::isfinite(r.l_cen) && std::isfinite(r.l_a) &&
      std::isfinite(r.total))
    return;
  std::ostringstream os;
  os << "non-finite loss: l_r=" << r.l_r << " l_kl=" << r.l_kl << " l_cen=" << r.l_cen << " l_a=" << r.l_a
     << " total=" << r.total;
  throw NumericError(os.str());
}

void require_finite_state(const ModelParams& model, const OptimizerState& opt) {
  for (const auto& [name, t] : model.params)
    if (!all_finite(t.values())) throw NumericError("parameter " + name + " became non-finite");
  for (const auto* moments : {&opt.first_moment, &opt.second_moment})
    for (const auto& [name, t] : *moments)
      if (!all_finite(t.values())) throw NumericError("Adam moment of " + name + " became non-finite");
}

std::filesystem::path epoch_checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu.dsck", epoch);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  model.validate();
  weights.validate();
  augmentation.validate();
  if (augmentation.attributes() != model.attributes) {
    throw ConfigError("num_attributes = " + std::to_string(model.attributes) + " but aug_negatives lists " +
                      std::to_string(augmentation.attributes()) + " transforms");
  }
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in [0,1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in [0,1)");
  if (!(adam.eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

void adam_step(ParamStore& params, OptimizerState& state, const AdamOptions& options) {
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw ContractError("adam_step: parameter '" + name + "' has no gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (auto& [name, p] : params) {
    auto m_it = state.first_moment.find(name);
    if (m_it == state.first_moment.end()) m_it = state.first_moment.emplace(name, Tensor::zeros(p.shape())).first;
    auto v_it = state.second_moment.find(name);
    if (v_it == state.second_moment.end()) v_it = state.second_moment.emplace(name, Tensor::zeros(p.shape())).first;
    auto m = m_it->second.values();
    auto v = v_it->second.values();
    auto g = p.grad();
    auto w = p.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = options.beta1 * m[i] + (1.0 - options.beta1) * gi;
      const double vi = options.beta2 * v[i] + (1.0 - options.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = options.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + options.eps);
      w[i] = static_cast<float>(w[i] - update);
    }
    p.clear_grad();
  }
}

LossReport train_step(const Tensor& batch, const AugmentationOutcome& augmented, ModelParams& model,
                      OptimizerState& opt, const TrainConfig& config, Rng& rng) {
  if (batch.ndim() != 4 || batch.dim(0) != config.batch_size) {
    throw DimensionError("train_step: batch " + shape_to_string(batch.shape()) + " does not hold " +
                         std::to_string(config.batch_size) + " images");
  }
  auto code = encode(batch, model, Mode::Train, &rng);
  auto aug = encode(augmented.x_aug, model, Mode::Train, &rng);
  auto x_hat = decode(code.z_f, code.z_u, model, Mode::Train);
  auto centers = context_of_batch(code.z_f, model);
  auto projections = context_projections(code.z_f, model);

  LossTerms terms{recon_loss(x_hat, batch), kl_loss(code.mu_u, code.logvar_u), center_loss(projections, centers),
                  aug_consistency_loss(code.z_f, aug.z_f, code.mu_u, aug.mu_u, augmented.mask)};
  auto total = total_loss(terms, config.weights);
  require_finite(total.report);
  total.total.backward();
  adam_step(model.params, opt, config.adam);
  require_finite_state(model, opt);
  return total.report;
}

LossReport train_step(const Tensor& batch, ModelParams& model, OptimizerState& opt, const TrainConfig& config,
                      Rng& rng) {
  Rng aug_rng = rng.split();
  auto augmented = compose_augmentations(batch, config.augmentation, aug_rng);
  return train_step(batch, augmented, model, opt, config, rng);
}

std::string format_loss_row(const LossRow& row) {
  std::string s = std::to_string(row.epoch) + ',' + std::to_string(row.step);
  for (double v : {row.report.l_r, row.report.l_kl, row.report.l_cen, row.report.l_a, row.report.total}) {
    s += ',';
    s += fmt_double(v);
  }
  return s;
}

FitResult fit(const FactorDataset& dataset, const TrainConfig& config, const FitOptions& options) {
  config.validate();
  dataset.validate();
  if (dataset.size() < config.batch_size) {
    throw ConfigError("dataset of " + std::to_string(dataset.size()) + " images is smaller than one batch of " +
                      std::to_string(config.batch_size));
  }
  if (dataset.image_size() != config.model.image_size) {
    throw ConfigError("dataset images are " + std::to_string(dataset.image_size()) +
                      " px but image_size = " + std::to_string(config.model.image_size));
  }

  FitResult result;
  Checkpoint& ck = result.checkpoint;
  Rng rng(mix_seed(config.seed, 2));
  if (options.resume) {
    ck = *options.resume;
    if (!(ck.model.dims == config.model)) throw ConfigError("resume checkpoint has different model dimensions");
    rng = Rng::restore(ck.rng_state);
  } else {
    ck.model = ModelParams::initialize(config.model, mix_seed(config.seed, 1));
    ck.epoch = 0;
  }
  ck.config = config;
  ck.rng_state = rng.snapshot();

  std::ofstream log;
  if (options.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
    const auto log_path = config.output_dir / "loss_log.csv";
    const bool append = options.resume && std::filesystem::exists(log_path);
    log.open(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open " + log_path.string());
    if (!append) log << kLossLogHeader << '\n';
  }

  auto save = [&](std::size_t epoch) {
    if (!options.write_files) return;
    checkpoint_save(ck, config.output_dir / "last.dsck");
    if (config.keep_all_checkpoints) checkpoint_save(ck, config.output_dir / epoch_checkpoint_name(epoch));
  };
  if (ck.epoch >= config.epochs) save(ck.epoch);

  struct Prepared {
    Batch batch;
    AugmentationOutcome augmented;
  };

  for (std::size_t epoch = ck.epoch + 1; epoch <= config.epochs; ++epoch) {
    BatchSequence batches(dataset, config.batch_size, shuffled_indices(dataset.size(), rng));
    std::vector<Rng> step_rngs, aug_rngs;
    for (std::size_t i = 0; i < batches.size(); ++i) {
      step_rngs.push_back(rng.split());
      aug_rngs.push_back(step_rngs.back().split());
    }
    auto prepare = [&](std::size_t i) {
      Prepared p{batches[i], {}};
      p.augmented = compose_augmentations(p.batch.images, config.augmentation, aug_rngs[i]);
      return p;
    };

    std::future<Prepared> pending;
    if (config.prefetch && batches.size() > 0) pending = std::async(std::launch::async, prepare, 0);
    for (std::size_t i = 0; i < batches.size(); ++i) {
      Prepared current = config.prefetch ? pending.get() : prepare(i);
      if (config.prefetch && i + 1 < batches.size()) pending = std::async(std::launch::async, prepare, i + 1);
      LossRow row{epoch, i + 1,
                  train_step(current.batch.images, current.augmented, ck.model, ck.optimizer, config, step_rngs[i])};
      if (log.is_open()) log << format_loss_row(row) << '\n';
      if (options.on_step) options.on_step(row);
      result.log.push_back(row);
    }
    ck.epoch = static_cast<std::uint32_t>(epoch);
    ck.rng_state = rng.snapshot();
    if (log.is_open()) log.flush();
    save(epoch);
  }
  return result;
}

}  // namespace discont
