#pragma once

#include <map>
#include <string>

#include "ge2ae/graph.hpp"
#include "ge2ae/model.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::train {

// Linear warmup to base_lr, then cosine decay to 0 over the remaining steps.
double lr_at_step(long long step, long long total_steps, long long warmup_steps, double base_lr);

struct AdamWState {
  std::map<std::string, Tensor> m, v;
  long long step = 0;
};

// Decoupled weight decay: theta <- theta - lr*(mhat/(sqrt(vhat)+eps) + wd*theta).
void adamw_step(model::Params& params, const GradMap& grads, AdamWState& state, double lr,
                double weight_decay, double beta1, double beta2, double eps = 1e-8);

}  // namespace ge2ae::train
