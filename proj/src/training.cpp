#include "cdgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cdgan/autodiff.hpp"
#include "cdgan/errors.hpp"
#include "cdgan/infer.hpp"
#include "cdgan/metrics.hpp"

namespace cdgan {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0f)) throw ConfigError("learning_rate must be >= 0");
  if (adam_beta1 < 0.0f || adam_beta1 >= 1.0f || adam_beta2 < 0.0f || adam_beta2 >= 1.0f)
    throw ConfigError("adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0f)) throw ConfigError("adam_eps must be > 0");
  if (lambda_l1 < 0.0f) throw ConfigError("lambda_l1 must be >= 0");
  if (crop_size < 8 || crop_size % 4 != 0)
    throw ConfigError("crop_size must be a multiple of 4 and at least 8");
}

AdamState AdamState::for_params(const ParamMap& params) {
  AdamState st;
  for (const auto& [name, t] : params)
    st.slots.emplace_back(name, Slot{Tensor::zeros(t.shape()), Tensor::zeros(t.shape())});
  return st;
}

void adam_step(ParamMap& params, AdamState& state, const TrainConfig& cfg) {
  if (state.slots.size() != params.size())
    throw ShapeError("adam state does not match parameter set");
  state.t += 1;
  const float b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(static_cast<double>(b1), static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(static_cast<double>(b2), static_cast<double>(state.t));
  size_t i = 0;
  for (auto& [name, param] : params) {
    auto& [slot_name, slot] = state.slots[i++];
    if (slot_name != name) throw ShapeError("adam state order mismatch at " + name);
    const std::int64_t n = param.numel();
    float* p = param.data();
    float* m = slot.m.data();
    float* v = slot.v.data();
    const float* g = param.has_grad() ? param.grad() : nullptr;
    for (std::int64_t k = 0; k < n; ++k) {
      const float gk = g != nullptr ? g[k] : 0.0f;
      if (!std::isfinite(gk))
        throw NumericError("adam_step: non-finite gradient in '" + name + "' at element " +
                           std::to_string(k));
      m[k] = b1 * m[k] + (1.0f - b1) * gk;
      v[k] = b2 * v[k] + (1.0f - b2) * gk * gk;
      const float mhat = static_cast<float>(m[k] / bc1);
      const float vhat = static_cast<float>(v[k] / bc2);
      p[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

Tensor d_loss(const Tensor& logits_real, const Tensor& logits_fake) {
  Tensor real_term = bce_with_logits(logits_real, Tensor::full(logits_real.shape(), 1.0f));
  Tensor fake_term = bce_with_logits(logits_fake, Tensor::zeros(logits_fake.shape()));
  return scale(add(real_term, fake_term), 0.5f);
}

GLoss g_loss(const Tensor& logits_fake, const Tensor& gen_map, const Tensor& gt_map,
             float lambda_l1) {
  GLoss out;
  out.adv = bce_with_logits(logits_fake, Tensor::full(logits_fake.shape(), 1.0f));
  out.l1 = l1_loss(gen_map, gt_map);
  out.total = add(out.adv, scale(out.l1, lambda_l1));
  return out;
}

Batch make_batch(const std::vector<SampleRecord>& records) {
  if (records.empty()) throw ShapeError("make_batch: empty batch");
  const int H = records[0].image_a.h, W = records[0].image_a.w;
  const int N = static_cast<int>(records.size());
  Batch batch;
  batch.a = Tensor::zeros({N, 3, H, W});
  batch.b = Tensor::zeros({N, 3, H, W});
  batch.gt = Tensor::zeros({N, 1, H, W});
  const long img = 3L * H * W, map = static_cast<long>(H) * W;
  for (int n = 0; n < N; ++n) {
    const SampleRecord& rec = records[static_cast<size_t>(n)];
    if (rec.image_a.h != H || rec.image_a.w != W)
      throw ShapeError("make_batch: patches differ in size");
    Tensor an = normalize(rec.image_a);
    Tensor bn = normalize(rec.image_b);
    Tensor gn = mask_to_pm1(rec.mask);
    std::copy(an.data(), an.data() + img, batch.a.data() + static_cast<long>(n) * img);
    std::copy(bn.data(), bn.data() + img, batch.b.data() + static_cast<long>(n) * img);
    std::copy(gn.data(), gn.data() + map, batch.gt.data() + static_cast<long>(n) * map);
  }
  return batch;
}

namespace {

float fraction_above(const Tensor& logits, bool above_zero) {
  std::int64_t hit = 0;
  for (std::int64_t i = 0; i < logits.numel(); ++i)
    hit += above_zero ? (logits.at(i) > 0.0f) : (logits.at(i) < 0.0f);
  return static_cast<float>(hit) / static_cast<float>(logits.numel());
}

void require_finite(const Tensor& scalar, const char* what) {
  if (!std::isfinite(scalar.item()))
    throw NumericError(std::string("train_step: non-finite ") + what);
}

}  // namespace

StepReport train_step(GeneratorParams& gen, DiscriminatorParams& disc, AdamState& gen_state,
                      AdamState& disc_state, const Batch& batch, const TrainConfig& cfg, Rng& rng) {
  StepReport report;

  gen.params.set_requires_grad(true);
  disc.params.set_requires_grad(true);

  Tape gen_tape;
  Tensor fake = generator_forward(gen, batch.a, batch.b, true, &rng);

  {
    // Discriminator half-step: the fake map is detached, so its gradient
    // stops at the discriminator inputs.
    Tape disc_tape;
    Tensor logits_real = discriminator_forward(disc, batch.a, batch.b, batch.gt);
    Tensor logits_fake = discriminator_forward(disc, batch.a, batch.b, fake.detach());
    Tensor loss = d_loss(logits_real, logits_fake);
    require_finite(loss, "discriminator loss");
    report.d_loss = loss.item();
    report.d_real_accuracy = fraction_above(logits_real, true);
    report.d_fake_accuracy = fraction_above(logits_fake, false);
    disc_tape.backward(loss);
    adam_step(disc.params, disc_state, cfg);
    disc.params.zero_grad();
  }

  // Generator half-step through the frozen, just-updated discriminator.
  disc.params.set_requires_grad(false);
  Tensor logits_fake = discriminator_forward(disc, batch.a, batch.b, fake);
  GLoss gl = g_loss(logits_fake, fake, batch.gt, cfg.lambda_l1);
  require_finite(gl.total, "generator loss");
  report.g_adv_loss = gl.adv.item();
  report.g_l1_loss = gl.l1.item();
  gen_tape.backward(gl.total);
  disc.params.set_requires_grad(true);
  adam_step(gen.params, gen_state, cfg);
  gen.params.zero_grad();

  return report;
}

std::string history_header() {
  return "epoch\td_loss\tg_adv\tg_l1\tval_iou\tval_precision\tval_recall";
}

std::string format_history_row(const EpochRow& row) {
  std::ostringstream os;
  os << row.epoch << "\t" << row.d_loss << "\t" << row.g_adv << "\t" << row.g_l1 << "\t"
     << row.val_iou << "\t" << row.val_precision << "\t" << row.val_recall;
  return os.str();
}

TrainerState make_trainer_state(std::uint64_t seed) {
  TrainerState st;
  st.gen = build_generator(seed);
  st.disc = build_discriminator(seed);
  st.gen_state = AdamState::for_params(st.gen.params);
  st.disc_state = AdamState::for_params(st.disc.params);
  return st;
}

TrainerState train_loop(const TrainConfig& cfg, const std::vector<SampleRecord>& train_set,
                        const std::vector<SampleRecord>& val_set, TrainerState state,
                        const CheckpointSink& checkpoint_sink, const ProgressSink& progress_sink,
                        std::vector<EpochRow>* history) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw DataError("train_loop: train and validation sets must be non-empty");

  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(epoch));

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double d_sum = 0.0, adv_sum = 0.0, l1_sum = 0.0;
    int steps = 0;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
      std::vector<SampleRecord> records;
      const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
      for (size_t k = pos; k < end; ++k) {
        SampleRecord rec = train_set[order[k]];
        if (rec.image_a.h > cfg.crop_size || rec.image_a.w > cfg.crop_size)
          rec = random_crop(rec, cfg.crop_size, rng);
        if (cfg.augment) rec = augment(rec, rng, true, rec.image_a.h == rec.image_a.w);
        records.push_back(std::move(rec));
      }
      const StepReport rep = train_step(state.gen, state.disc, state.gen_state, state.disc_state,
                                        make_batch(records), cfg, rng);
      d_sum += rep.d_loss;
      adv_sum += rep.g_adv_loss;
      l1_sum += rep.g_l1_loss;
      ++steps;
    }

    // validation on a parameter snapshot (training is paused here anyway)
    const TileConfig tiles;
    const GeneratorParams& gen = state.gen;
    EvalReport eval = evaluate_records(
        [&](const SampleRecord& rec) { return infer_mask(gen, rec.image_a, rec.image_b, tiles); },
        val_set);

    EpochRow row;
    row.epoch = epoch;
    row.d_loss = static_cast<float>(d_sum / std::max(1, steps));
    row.g_adv = static_cast<float>(adv_sum / std::max(1, steps));
    row.g_l1 = static_cast<float>(l1_sum / std::max(1, steps));
    row.val_iou = static_cast<float>(eval.mean_iou);
    row.val_precision = static_cast<float>(eval.pixel_precision);
    row.val_recall = static_cast<float>(eval.pixel_recall);

    state.epoch = epoch;
    const bool is_best = row.val_iou > state.best_val_iou;
    if (is_best) state.best_val_iou = row.val_iou;

    if (history != nullptr) history->push_back(row);
    if (progress_sink) progress_sink(row);
    if (checkpoint_sink) checkpoint_sink(state, row, is_best);
  }
  return state;
}

}  // namespace cdgan
