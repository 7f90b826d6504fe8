#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discont/augment.hpp"
#include "discont/data.hpp"
#include "discont/model.hpp"
#include "discont/objective.hpp"
#include "discont/rng.hpp"

namespace discont {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  ModelDims model;
  LossWeights weights;
  AdamOptions adam;
  std::size_t epochs = 250;
  std::uint64_t seed = 0;
  AugmentationSpec augmentation;
  std::filesystem::path dataset_dir = "data";
  std::filesystem::path output_dir = "runs";
  bool keep_all_checkpoints = false;
  // Augment the next batch on a worker thread while the current step runs.
  bool prefetch = true;

  void validate() const;
};

struct OptimizerState {
  std::map<std::string, Tensor, std::less<>> first_moment;
  std::map<std::string, Tensor, std::less<>> second_moment;
  std::uint64_t step = 0;
};

// Bias-corrected Adam over every parameter in `params`, then clears the
// gradient slots. A parameter without a gradient is a ContractError and
// nothing is updated.
void adam_step(ParamStore& params, OptimizerState& state, const AdamOptions& options);

// One optimization step: augment, encode x and x_aug, decode x, build
// contexts and projections, weight the four losses, backpropagate once and
// step Adam on encoder, decoder and context network together.
LossReport train_step(const Tensor& batch, ModelParams& model, OptimizerState& opt, const TrainConfig& config,
                      Rng& rng);

// Same step with the augmentation already drawn; `rng` then only feeds the
// reparameterization noise.
LossReport train_step(const Tensor& batch, const AugmentationOutcome& augmented, ModelParams& model,
                      OptimizerState& opt, const TrainConfig& config, Rng& rng);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams model;
  OptimizerState optimizer;
  TrainConfig config;
  std::uint32_t epoch = 0;  // completed epochs
  std::string rng_state;    // Rng::snapshot() of the trainer stream
  std::uint32_t version = kCheckpointVersion;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void checkpoint_save(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

struct LossRow {
  std::size_t epoch;  // 1-based
  std::size_t step;   // 1-based within the epoch
  LossReport report;
};

inline constexpr std::string_view kLossLogHeader = "epoch,step,l_r,l_kl,l_cen,l_a,total";
std::string format_loss_row(const LossRow& row);

struct FitOptions {
  // Continue from a checkpoint written by an earlier fit with the same seed.
  std::optional<Checkpoint> resume;
  // When false nothing is written under config.output_dir.
  bool write_files = true;
  std::function<void(const LossRow&)> on_step;
};

struct FitResult {
  Checkpoint checkpoint;
  std::vector<LossRow> log;
};

// epochs x floor(N / B) train steps. Writes last.dsck after every epoch
// (plus epoch_NNNN.dsck when keep_all_checkpoints) and loss_log.csv.
FitResult fit(const FactorDataset& dataset, const TrainConfig& config, const FitOptions& options = {});

}  // namespace discont
