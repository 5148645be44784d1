#pragma once

#include <span>
#include <vector>

#include "uwrange/labels.hpp"
#include "uwrange/tensor.hpp"

namespace uwrange {

// Layer primitives.  All ops are deterministic, 64-bit, and batched over the
// leading dimension; every forward has a matching backward producing exact
// gradients, verified against central finite differences in the test suite.

/// Valid cross-correlation, stride 1, no padding.
/// input [B, C_in, H, W], kernel [C_out, C_in, k, k], bias [C_out]
/// -> [B, C_out, H-k+1, W-k+1].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);

/// Gradients of conv2d_forward; any output pointer may be null to skip it.
void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                     Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias);

/// input [B, N], weight [M, N], optional bias [M] -> [B, M].
Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor* bias);

void linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                     Tensor* grad_input, Tensor* grad_weight, Tensor* grad_bias);

Tensor relu_forward(const Tensor& input);

/// grad_input = grad_output where input > 0, else 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// Max-shifted softmax of a single logit vector.
Pmf softmax(std::span<const double> logits);

/// Row-wise softmax: logits [B, M] -> probabilities [B, M].
Tensor softmax_rows(const Tensor& logits);

/// d(loss)/d(logits) for one row given d(loss)/d(probs).
void softmax_backward_row(std::span<const double> probs, std::span<const double> grad_probs,
                          std::span<double> grad_logits);

/// Jensen-Shannon divergence (natural log):
/// 0.5 [KL(p||m) + KL(q||m)], m = (p+q)/2, with 0 log(0/x) := 0.
double jsd(const Pmf& p, const Pmf& q);

/// dJSD(p, q)/dq_k = 0.5 ln(q_k / m_k), accumulated into grad_q with weight.
void jsd_grad_q(std::span<const double> p, std::span<const double> q, double weight,
                std::span<double> grad_q);

/// Discrete entropy -sum p ln p with 0 ln 0 := 0.
double entropy(const Pmf& p);

// --- Adam --------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Optimizer state over a fixed list of parameter tensors.
struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static AdamState init(const std::vector<const Tensor*>& params, const AdamConfig& cfg);
};

/// Standard bias-corrected Adam update, in place.  params, grads and the
/// state accumulators must be parallel lists of identical shapes.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state);

}  // namespace uwrange
