#include "ge2ae/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ge2ae::losses {

using namespace ge2ae::ops;

namespace {
constexpr double kOmegaEps = 1e-12;  // guards the weight at exact coincidence
}

void LossConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("loss: lambda must be >= 0");
  if (beta < 0.0) throw std::invalid_argument("loss: beta must be >= 0");
  if (!pix_re && !freq_con && !freq_re && !pix_con)
    throw std::invalid_argument("loss: at least one term must be enabled");
}

double frequency_distance_gamma(double f_re, double f_im, double fh_re, double fh_im) {
  return std::hypot(f_re - fh_re, f_im - fh_im);
}

double pixel_reconstruction_loss(const Tensor& pred_image, const Tensor& target_image,
                                 const model::MaskPlan& plan, int patch_size, bool* empty_mask) {
  if (!pred_image.same_shape(target_image))
    throw std::invalid_argument("pixel loss: shape mismatch " + shape_str(pred_image.shape) +
                                " vs " + shape_str(target_image.shape));
  const auto masked = plan.masked();
  if (empty_mask) *empty_mask = masked.empty();
  if (masked.empty()) return 0.0;
  const Tensor pred_rows = model::patchify(pred_image, patch_size);
  const Tensor tgt_rows = model::patchify(target_image, patch_size);
  const int D = pred_rows.shape[1];
  double acc = 0.0;
  for (int row : masked) {
    const double* p = &pred_rows.data[static_cast<std::size_t>(row) * D];
    const double* t = &tgt_rows.data[static_cast<std::size_t>(row) * D];
    for (int j = 0; j < D; ++j) {
      const double d = p[j] - t[j];
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(masked.size()) * D);
}

double focal_frequency_loss(const fourier::Spectrum2D& pred, const fourier::Spectrum2D& target,
                            double beta) {
  if (pred.values.shape != target.values.shape)
    throw std::invalid_argument("focal loss: shape mismatch " + shape_str(pred.values.shape) +
                                " vs " + shape_str(target.values.shape));
  const std::size_t n = pred.values.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = pred.values.re[i] - target.values.re[i];
    const double di = pred.values.im[i] - target.values.im[i];
    const double g2 = dr * dr + di * di;
    acc += std::pow(g2 + kOmegaEps, beta / 2.0) * g2;
  }
  return acc / static_cast<double>(n);
}

Value pixel_reconstruction_loss_value(model::Forward& fwd, Value pixel_rows,
                                      const Tensor& target_image, const model::MaskPlan& plan,
                                      bool* empty_mask) {
  Graph& g = fwd.graph();
  const auto masked = plan.masked();
  if (empty_mask) *empty_mask = masked.empty();
  if (masked.empty()) return g.constant(Tensor::scalar(0.0));

  Tensor target_rows = model::patchify(target_image, fwd.config().patch_size);
  if (fwd.config().norm_pix_target) {
    // MAE-style per-patch normalized target, applied to the pixel loss only.
    const int D = target_rows.shape[1];
    for (int r = 0; r < target_rows.shape[0]; ++r) {
      double* row = &target_rows.data[static_cast<std::size_t>(r) * D];
      double mu = 0.0;
      for (int j = 0; j < D; ++j) mu += row[j];
      mu /= D;
      double var = 0.0;
      for (int j = 0; j < D; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= D;
      const double inv = 1.0 / std::sqrt(var + 1e-6);
      for (int j = 0; j < D; ++j) row[j] = (row[j] - mu) * inv;
    }
  }
  Tensor tgt_masked({static_cast<int>(masked.size()), target_rows.shape[1]});
  for (std::size_t r = 0; r < masked.size(); ++r)
    for (int j = 0; j < target_rows.shape[1]; ++j)
      tgt_masked.at2(static_cast<int>(r), j) = target_rows.at2(masked[r], j);

  Value pred_masked = gather_rows(pixel_rows, masked);
  Value diff = pred_masked - g.constant(std::move(tgt_masked));
  return mean(power(diff, 2.0));
}

Value focal_frequency_loss_value(Value pred_pair, const Tensor& target_pair, double beta,
                                 const Tensor* frozen_weights) {
  Graph& g = *pred_pair.g;
  const Tensor& pt = pred_pair.tensor();
  if (pt.shape != target_pair.shape)
    throw std::invalid_argument("focal loss: shape mismatch " + shape_str(pt.shape) + " vs " +
                                shape_str(target_pair.shape));
  const int H = pt.shape[1], W = pt.shape[2], C = pt.shape[3];
  Value diff = pred_pair - g.constant(target_pair);
  Value dre = slice(diff, 0, 0, 1);
  Value dim = slice(diff, 0, 1, 1);
  Value gamma2 = power(dre, 2.0) + power(dim, 2.0);  // [1,H,W,C]

  // omega = (gamma^2 + eps)^(beta/2), detached from the graph.
  Tensor w;
  if (frozen_weights) {
    w = *frozen_weights;
    if (w.shape != gamma2.tensor().shape)
      throw std::invalid_argument("focal loss: frozen weight shape mismatch");
  } else {
    const Tensor& g2 = gamma2.tensor();
    w = Tensor(g2.shape);
    for (std::size_t i = 0; i < g2.numel(); ++i)
      w.data[i] = std::pow(g2.data[i] + kOmegaEps, beta / 2.0);
  }
  Value weighted = gamma2 * g.constant(std::move(w));
  return scalar_mul(sum(weighted), 1.0 / (static_cast<double>(H) * W * C));
}

TotalLoss total_loss(model::Forward& fwd, const std::optional<model::DecodeResult>& pix,
                     const std::optional<Value>& freq_pair, const Tensor& target_image,
                     const model::MaskPlan& plan, const LossConfig& cfg) {
  cfg.validate();
  Graph& g = fwd.graph();
  if (cfg.needs_pixel_decoder() && !pix.has_value())
    throw std::invalid_argument("total_loss: enabled pixel-branch terms need the pixel decode");
  if (cfg.needs_frequency_decoder() && !freq_pair.has_value())
    throw std::invalid_argument("total_loss: enabled frequency-branch terms need the frequency decode");

  TotalLoss out;
  std::optional<Tensor> gt_spec_pair;  // dft2d of the target image, shared by both focal terms
  auto target_spectrum = [&]() -> const Tensor& {
    if (!gt_spec_pair) gt_spec_pair = fourier::pack_pair(fourier::dft2d(target_image).values);
    return *gt_spec_pair;
  };

  // total = pix_re + freq_con + lambda * (freq_re + pix_con), grouped exactly
  // so the breakdown identity holds bit-for-bit.
  std::optional<Value> pixel_group, freq_group;
  auto join = [](std::optional<Value>& acc, Value term) {
    acc = acc ? *acc + term : term;
  };

  if (cfg.pix_re) {
    Value term =
        pixel_reconstruction_loss_value(fwd, pix->rows, target_image, plan, &out.values.empty_mask);
    out.values.pix_re = term.tensor().scalar_value();
    join(pixel_group, term);
  }
  if (cfg.freq_con) {
    Value composed = fwd.compose_full_image(pix->rows, target_image, plan);
    Value p_tilde = ops::dft2d(composed);
    Value term = focal_frequency_loss_value(p_tilde, target_spectrum(), cfg.beta);
    out.values.freq_con = term.tensor().scalar_value();
    join(pixel_group, term);
  }
  if (cfg.freq_re) {
    Value term = focal_frequency_loss_value(*freq_pair, target_spectrum(), cfg.beta);
    out.values.freq_re = term.tensor().scalar_value();
    join(freq_group, term);
  }
  if (cfg.pix_con) {
    Value q = ops::idft2d_real(*freq_pair);
    Value diff = q - g.constant(target_image);
    Value term = mean(power(diff, 2.0));
    out.values.pix_con = term.tensor().scalar_value();
    join(freq_group, term);
  }

  if (freq_group) freq_group = scalar_mul(*freq_group, cfg.lambda);
  if (pixel_group && freq_group)
    out.total = *pixel_group + *freq_group;
  else
    out.total = pixel_group ? *pixel_group : *freq_group;
  out.values.total = out.total.tensor().scalar_value();
  return out;
}

}  // namespace ge2ae::losses
