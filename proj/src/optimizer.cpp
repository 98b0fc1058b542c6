#include "ge2ae/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace ge2ae::train {

double lr_at_step(long long step, long long total_steps, long long warmup_steps, double base_lr) {
  if (step < 0 || step >= total_steps || warmup_steps < 0 || warmup_steps >= total_steps)
    throw std::invalid_argument("lr_at_step: need 0 <= step < total and warmup < total");
  if (step < warmup_steps)
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  const double lr = 0.5 * base_lr * (1.0 + std::cos(3.14159265358979323846 * progress));
  return lr > 0.0 ? lr : 0.0;
}

void adamw_step(model::Params& params, const GradMap& grads, AdamWState& state, double lr,
                double weight_decay, double beta1, double beta2, double eps) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    const Tensor* grad = git == grads.end() ? nullptr : &git->second;
    if (grad && !grad->same_shape(theta))
      throw std::invalid_argument("adamw: gradient shape " + shape_str(grad->shape) +
                                  " does not match parameter '" + name + "' " +
                                  shape_str(theta.shape));
    Tensor& m = state.m.try_emplace(name, Tensor(theta.shape)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(theta.shape)).first->second;
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      const double gi = grad ? grad->data[i] : 0.0;
      if (!std::isfinite(gi))
        throw std::runtime_error("adamw: non-finite gradient for parameter '" + name + "'");
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      theta.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * theta.data[i]);
    }
  }
}

}  // namespace ge2ae::train
