#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ge2ae/checkpoint.hpp"
#include "ge2ae/dataset.hpp"
#include "ge2ae/losses.hpp"
#include "ge2ae/model.hpp"
#include "ge2ae/optimizer.hpp"

namespace ge2ae::train {

struct TrainRunConfig {
  model::ModelConfig model;
  losses::LossConfig loss;
  int epochs = 800;
  int batch_size = 4096;
  double base_lr = 1.5e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int warmup_epochs = 40;
  std::uint64_t seed = 0;
  std::string dataset_path;
  std::string dataset_format = "cifar10-bin";
  std::string out_dir = "runs/pretrain";
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only

  void validate() const;
};

struct EpochLog {
  int epoch = 0;  // 1-based in the CSV
  losses::LossBreakdown mean;
  double lr = 0.0;
};

struct TrainResult {
  std::string checkpoint_path;
  std::vector<EpochLog> log;
};

// One image's contribution to a batch: forward both enabled decoders, the
// total loss, and a reverse sweep.
struct ImageGrad {
  GradMap grads;
  losses::LossBreakdown values;
};
ImageGrad image_forward_backward(const model::ModelConfig& mcfg, const losses::LossConfig& lcfg,
                                 const model::Params& params, const Tensor& image,
                                 const model::MaskPlan& plan);

// Full pretraining run. Deterministic under (config, seed) for any fixed
// GE2AE_THREADS; stream-keyed RNG makes the result independent of the worker
// count as well. Writes train_log.csv and checkpoints under out_dir.
TrainResult pretrain(const TrainRunConfig& cfg, const std::string& config_snapshot);

// Checkpoint packing: model parameters plus optimizer moments under
// "adam.m."/"adam.v.", the base seed under "rng.state".
Checkpoint make_checkpoint(const std::string& config_snapshot, const model::Params& params,
                           const AdamWState& state, std::uint64_t seed, std::uint64_t step);
model::Params params_from_checkpoint(const Checkpoint& cp);

}  // namespace ge2ae::train
