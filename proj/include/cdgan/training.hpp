#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cdgan/data.hpp"
#include "cdgan/nets.hpp"

namespace cdgan {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 1;
  float learning_rate = 2e-4f;
  float adam_beta1 = 0.5f;
  float adam_beta2 = 0.999f;
  float adam_eps = 1e-8f;
  float lambda_l1 = 100.0f;
  std::uint64_t seed = 0;
  bool deterministic = false;
  int crop_size = 256;   // training patch edge; exact-size records pass through
  bool augment = true;   // random flips/quarter-turns on training patches

  void validate() const;  // throws ConfigError
};

// Per-parameter first/second moment buffers plus the shared step counter.
struct AdamState {
  struct Slot {
    Tensor m, v;
  };
  std::vector<std::pair<std::string, Slot>> slots;
  std::int64_t t = 0;

  static AdamState for_params(const ParamMap& params);
};

// m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2; bias-corrected step
// p <- p - lr * m_hat / (sqrt(v_hat) + eps). A parameter with no gradient
// buffer contributes g = 0. NaN/Inf in any gradient aborts with NumericError.
void adam_step(ParamMap& params, AdamState& state, const TrainConfig& cfg);

// 0.5 * [bce(logits_real, 1) + bce(logits_fake, 0)]; minimizing this
// maximizes the discriminator's side of the minimax objective. The 0.5
// factor slows the discriminator relative to the generator.
Tensor d_loss(const Tensor& logits_real, const Tensor& logits_fake);

struct GLoss {
  Tensor total, adv, l1;
};

// adv = bce(logits_fake, 1) (non-saturating form), l1 = mean |map - gt|,
// total = adv + lambda_l1 * l1. gt_map lives in {-1, +1}.
GLoss g_loss(const Tensor& logits_fake, const Tensor& gen_map, const Tensor& gt_map,
             float lambda_l1);

struct StepReport {
  float d_loss = 0.0f;
  float g_adv_loss = 0.0f;
  float g_l1_loss = 0.0f;
  float d_real_accuracy = 0.0f;  // fraction of real patch logits above 0
  float d_fake_accuracy = 0.0f;  // fraction of fake patch logits below 0
};

struct Batch {
  Tensor a;   // N x 3 x H x W, normalized
  Tensor b;   // N x 3 x H x W, normalized
  Tensor gt;  // N x 1 x H x W in {-1, +1}
};

Batch make_batch(const std::vector<SampleRecord>& records);

// One discriminator update on the real and fake triplets (the fake map is a
// constant for the discriminator's gradient), then one generator update
// through the frozen, freshly updated discriminator.
StepReport train_step(GeneratorParams& gen, DiscriminatorParams& disc, AdamState& gen_state,
                      AdamState& disc_state, const Batch& batch, const TrainConfig& cfg, Rng& rng);

struct EpochRow {
  int epoch = 0;  // 1-based
  float d_loss = 0.0f;
  float g_adv = 0.0f;
  float g_l1 = 0.0f;
  float val_iou = 0.0f;
  float val_precision = 0.0f;
  float val_recall = 0.0f;
};

std::string format_history_row(const EpochRow& row);  // tab-separated, no newline
std::string history_header();

struct TrainerState {
  GeneratorParams gen;
  DiscriminatorParams disc;
  AdamState gen_state, disc_state;
  int epoch = 0;  // completed epochs
  float best_val_iou = -1.0f;
};

TrainerState make_trainer_state(std::uint64_t seed);

using ProgressSink = std::function<void(const EpochRow&)>;
// is_best: this epoch reached a new best validation mean IoU.
using CheckpointSink = std::function<void(const TrainerState&, const EpochRow&, bool is_best)>;

// Runs cfg.epochs - state.epoch additional epochs of shuffled train_step
// batches, evaluating the validation set after each epoch. Per-epoch RNG
// streams derive from (seed, epoch), so a run resumed from a checkpoint
// replays exactly the steps the uninterrupted run would have taken.
TrainerState train_loop(const TrainConfig& cfg, const std::vector<SampleRecord>& train_set,
                        const std::vector<SampleRecord>& val_set, TrainerState state,
                        const CheckpointSink& checkpoint_sink, const ProgressSink& progress_sink,
                        std::vector<EpochRow>* history = nullptr);

}  // namespace cdgan
