#include "ge2ae/pretrain.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ge2ae/parallel.hpp"

namespace ge2ae::train {

namespace fs = std::filesystem;

void TrainRunConfig::validate() const {
  model.validate();
  loss.validate();
  if (batch_size < 1) throw std::invalid_argument("training: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("training: epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw std::invalid_argument("training: warmup_epochs must lie in [0, epochs)");
}

ImageGrad image_forward_backward(const model::ModelConfig& mcfg, const losses::LossConfig& lcfg,
                                 const model::Params& params, const Tensor& image,
                                 const model::MaskPlan& plan) {
  Graph g;
  g.reserve(1024);
  model::Forward fwd(g, mcfg, params, /*trainable=*/true);
  model::EncodeResult enc = fwd.encode(image, plan);
  std::optional<model::DecodeResult> pix;
  std::optional<Value> freq;
  if (lcfg.needs_pixel_decoder()) pix = fwd.pixel_decode(enc.tokens, plan);
  if (lcfg.needs_frequency_decoder()) freq = fwd.frequency_decode(enc.tokens, plan);
  losses::TotalLoss tl = losses::total_loss(fwd, pix, freq, image, plan, lcfg);
  ImageGrad out;
  out.values = tl.values;
  out.grads = g.backward(tl.total);
  return out;
}

namespace {

void accumulate(GradMap& acc, const GradMap& g) {
  for (const auto& [name, t] : g) {
    auto [it, inserted] = acc.try_emplace(name, t);
    if (!inserted)
      for (std::size_t i = 0; i < t.numel(); ++i) it->second.data[i] += t.data[i];
  }
}

void accumulate(losses::LossBreakdown& acc, const losses::LossBreakdown& v) {
  acc.pix_re += v.pix_re;
  acc.freq_con += v.freq_con;
  acc.freq_re += v.freq_re;
  acc.pix_con += v.pix_con;
  acc.total += v.total;
  acc.empty_mask = acc.empty_mask || v.empty_mask;
}

constexpr int kChunk = 8;  // fixed accumulation granularity keeps sums
                           // independent of the worker count

}  // namespace

Checkpoint make_checkpoint(const std::string& config_snapshot, const model::Params& params,
                           const AdamWState& state, std::uint64_t seed, std::uint64_t step) {
  Checkpoint cp;
  cp.config_text = config_snapshot;
  cp.step = step;
  for (const auto& [name, t] : params) {
    Tensor copy = t;
    copy.requires_grad = false;
    cp.tensors[name] = std::move(copy);
  }
  for (const auto& [name, t] : state.m) cp.tensors["adam.m." + name] = t;
  for (const auto& [name, t] : state.v) cp.tensors["adam.v." + name] = t;
  cp.tensors["rng.state"] =
      Tensor({2}, {static_cast<double>(seed & 0xFFFFFFFFULL), static_cast<double>(seed >> 32)});
  return cp;
}

model::Params params_from_checkpoint(const Checkpoint& cp) {
  model::Params params;
  for (const auto& [name, t] : cp.tensors) {
    if (name.rfind("adam.", 0) == 0 || name.rfind("rng.", 0) == 0) continue;
    Tensor copy = t;
    copy.requires_grad = true;
    params[name] = std::move(copy);
  }
  if (params.empty()) throw std::runtime_error("checkpoint: no model parameters found");
  return params;
}

TrainResult pretrain(const TrainRunConfig& cfg, const std::string& config_snapshot) {
  cfg.validate();
  const auto records =
      data::ingest_dataset(cfg.dataset_path, data::parse_format(cfg.dataset_format));
  if (records.empty()) throw std::runtime_error("pretrain: dataset is empty");

  const int count = static_cast<int>(records.size());
  const int spe = (count + cfg.batch_size - 1) / cfg.batch_size;  // steps per epoch
  const long long total_steps = static_cast<long long>(spe) * cfg.epochs;
  const long long warmup_steps = static_cast<long long>(spe) * cfg.warmup_epochs;
  // Linear lr scaling rule: effective base = base_lr * batch / 256.
  const double scaled_lr = cfg.base_lr * cfg.batch_size / 256.0;

  model::Params params = model::init_params(cfg.model, cfg.seed);
  AdamWState opt;
  const int n_tokens = cfg.model.tokens();

  fs::create_directories(cfg.out_dir);
  std::ofstream log_csv(cfg.out_dir + "/train_log.csv");
  if (!log_csv) throw std::runtime_error("pretrain: cannot write log under " + cfg.out_dir);
  log_csv << "epoch,pix_re,freq_con,freq_re,pix_con,total,lr\n";

  TrainResult result;
  long long global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuffle_rng = stream_rng(cfg.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order.data(), order.size());

    losses::LossBreakdown epoch_sum;
    double last_lr = 0.0;

    for (int step = 0; step < spe; ++step) {
      const int lo = step * cfg.batch_size;
      const int hi = std::min(count, lo + cfg.batch_size);
      const int batch_n = hi - lo;
      const int chunks = (batch_n + kChunk - 1) / kChunk;

      std::vector<GradMap> chunk_grads(static_cast<std::size_t>(chunks));
      std::vector<losses::LossBreakdown> chunk_vals(static_cast<std::size_t>(chunks));

      // One graph per chunk: the chunk's images share parameter leaves and a
      // single reverse sweep over their summed losses, which accumulates the
      // same per-leaf gradients with far less bookkeeping.
      parallel_for(chunks, [&](int ci) {
        const int clo = lo + ci * kChunk;
        const int chi = std::min(hi, clo + kChunk);
        Graph g;
        g.reserve(static_cast<std::size_t>(chi - clo) * 768);
        model::Forward fwd(g, cfg.model, params, /*trainable=*/true);
        std::optional<Value> chunk_loss;
        for (int pos = clo; pos < chi; ++pos) {
          const auto& rec = records[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])];
          Rng aug_rng = stream_rng(cfg.seed, Stream::kAugment, static_cast<std::uint64_t>(epoch),
                                   static_cast<std::uint64_t>(pos));
          Tensor img = data::augment(rec.image, cfg.model.image_size, aug_rng);
          Rng mask_rng = stream_rng(cfg.seed, Stream::kMask, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(pos));
          model::MaskPlan plan = model::random_masking_rng(n_tokens, cfg.model.mask_ratio, mask_rng);
          model::EncodeResult enc = fwd.encode(img, plan);
          std::optional<model::DecodeResult> pix;
          std::optional<Value> freq;
          if (cfg.loss.needs_pixel_decoder()) pix = fwd.pixel_decode(enc.tokens, plan);
          if (cfg.loss.needs_frequency_decoder()) freq = fwd.frequency_decode(enc.tokens, plan);
          losses::TotalLoss tl = losses::total_loss(fwd, pix, freq, img, plan, cfg.loss);
          accumulate(chunk_vals[static_cast<std::size_t>(ci)], tl.values);
          chunk_loss = chunk_loss ? *chunk_loss + tl.total : tl.total;
        }
        chunk_grads[static_cast<std::size_t>(ci)] = g.backward(*chunk_loss);
      });

      GradMap grads;
      losses::LossBreakdown batch_vals;
      for (int ci = 0; ci < chunks; ++ci) {
        accumulate(grads, chunk_grads[static_cast<std::size_t>(ci)]);
        accumulate(batch_vals, chunk_vals[static_cast<std::size_t>(ci)]);
      }
      const double inv_b = 1.0 / batch_n;
      for (auto& [name, g] : grads)
        for (auto& x : g.data) x *= inv_b;

      if (!std::isfinite(batch_vals.total)) {
        save_checkpoint(make_checkpoint(config_snapshot, params, opt, cfg.seed,
                                        static_cast<std::uint64_t>(global_step)),
                        cfg.out_dir + "/checkpoint_abort.ge2a");
        throw std::runtime_error("pretrain: non-finite loss at step " +
                                 std::to_string(global_step) + "; dumped checkpoint_abort.ge2a");
      }

      last_lr = lr_at_step(global_step, total_steps, warmup_steps, scaled_lr);
      adamw_step(params, grads, opt, last_lr, cfg.weight_decay, cfg.beta1, cfg.beta2);
      accumulate(epoch_sum, batch_vals);
      ++global_step;
    }

    EpochLog el;
    el.epoch = epoch + 1;
    const double inv = 1.0 / count;
    el.mean.pix_re = epoch_sum.pix_re * inv;
    el.mean.freq_con = epoch_sum.freq_con * inv;
    el.mean.freq_re = epoch_sum.freq_re * inv;
    el.mean.pix_con = epoch_sum.pix_con * inv;
    el.mean.total = epoch_sum.total * inv;
    el.mean.empty_mask = epoch_sum.empty_mask;
    el.lr = last_lr;
    result.log.push_back(el);
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", el.epoch,
                  el.mean.pix_re, el.mean.freq_con, el.mean.freq_re, el.mean.pix_con,
                  el.mean.total, el.lr);
    log_csv << line;
    log_csv.flush();

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.epochs) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint_epoch%04d.ge2a", epoch + 1);
      save_checkpoint(make_checkpoint(config_snapshot, params, opt, cfg.seed,
                                      static_cast<std::uint64_t>(global_step)),
                      cfg.out_dir + name);
    }
  }

  result.checkpoint_path = cfg.out_dir + "/checkpoint_final.ge2a";
  save_checkpoint(make_checkpoint(config_snapshot, params, opt, cfg.seed,
                                  static_cast<std::uint64_t>(global_step)),
                  result.checkpoint_path);
  return result;
}

}  // namespace ge2ae::train
