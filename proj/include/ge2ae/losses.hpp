#pragma once

#include <optional>

#include "ge2ae/fourier.hpp"
#include "ge2ae/graph.hpp"
#include "ge2ae/model.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::losses {

struct LossConfig {
  double lambda = 0.5;  // frequency-branch weight
  double beta = 1.0;    // focal scaling factor
  bool pix_re = true;
  bool freq_con = true;
  bool freq_re = true;
  bool pix_con = true;

  bool needs_pixel_decoder() const { return pix_re || freq_con; }
  bool needs_frequency_decoder() const { return freq_re || pix_con; }
  void validate() const;
};

struct LossBreakdown {
  double pix_re = 0.0;
  double freq_con = 0.0;
  double freq_re = 0.0;
  double pix_con = 0.0;
  double total = 0.0;
  bool empty_mask = false;  // flagged when the masked set was empty
};

// Euclidean distance between two spectrum components in the complex plane.
double frequency_distance_gamma(double f_re, double f_im, double fh_re, double fh_im);

// Eager single-image losses (shape-checked; used by analysis and tests).
double pixel_reconstruction_loss(const Tensor& pred_image, const Tensor& target_image,
                                 const model::MaskPlan& plan, int patch_size,
                                 bool* empty_mask = nullptr);
double focal_frequency_loss(const fourier::Spectrum2D& pred, const fourier::Spectrum2D& target,
                            double beta);

// Differentiable counterparts over graph values. pred/target pairs use the
// [2,H,W,C] plane layout. The focal weight is evaluated from current values
// and enters the graph as a constant (stop-gradient). frozen_weights pins the
// weight matrix instead, which finite-difference harnesses need to probe the
// stop-gradient objective as a fixed function.
Value pixel_reconstruction_loss_value(model::Forward& fwd, Value pixel_rows,
                                      const Tensor& target_image, const model::MaskPlan& plan,
                                      bool* empty_mask);
Value focal_frequency_loss_value(Value pred_pair, const Tensor& target_pair, double beta,
                                 const Tensor* frozen_weights = nullptr);

struct TotalLoss {
  Value total;
  LossBreakdown values;
};

// Assembles the four-term objective for one image. `pix` must be present when
// pix_re or freq_con is enabled, `freq_pair` when freq_re or pix_con is.
// Disabled terms are neither computed nor differentiated.
TotalLoss total_loss(model::Forward& fwd, const std::optional<model::DecodeResult>& pix,
                     const std::optional<Value>& freq_pair, const Tensor& target_image,
                     const model::MaskPlan& plan, const LossConfig& cfg);

}  // namespace ge2ae::losses
