#include "uwrange/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uwrange {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorMap = Eigen::Map<RowMajorMatrix>;
using ConstRowMajorMap = Eigen::Map<const RowMajorMatrix>;

constexpr double kTinyProb = 1e-300;  // avoids -inf from log on underflowed probs

void check(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

struct ConvDims {
  std::size_t batch, in_channels, in_h, in_w;
  std::size_t out_channels, kernel;
  std::size_t out_h, out_w;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, const Tensor* bias) {
  check(input.shape.size() == 4, "conv2d: input must be [B, C, H, W]");
  check(kernel.shape.size() == 4, "conv2d: kernel must be [C_out, C_in, k, k]");
  ConvDims d;
  d.batch = input.dim(0);
  d.in_channels = input.dim(1);
  d.in_h = input.dim(2);
  d.in_w = input.dim(3);
  d.out_channels = kernel.dim(0);
  d.kernel = kernel.dim(2);
  check(kernel.dim(1) == d.in_channels, "conv2d: channel mismatch");
  check(kernel.dim(3) == d.kernel, "conv2d: kernel must be square");
  check(d.in_h >= d.kernel && d.in_w >= d.kernel, "conv2d: input smaller than kernel");
  if (bias != nullptr) {
    check(bias->shape.size() == 1 && bias->dim(0) == d.out_channels,
          "conv2d: bias must be [C_out]");
  }
  d.out_h = d.in_h - d.kernel + 1;
  d.out_w = d.in_w - d.kernel + 1;
  return d;
}

using MatrixMap = Eigen::Map<Eigen::MatrixXd>;

// Large per-batch work buffers, reused across calls and layers: the conv
// column matrix alone reaches ~100 MB at batch 128, and reallocating (and
// page-faulting) it on every forward/backward dominates the runtime
// otherwise.  Grow-only flat storage keeps one allocation per thread.
MatrixMap scratch(int which, std::size_t rows, std::size_t cols) {
  thread_local std::vector<double> buffers[3];
  std::vector<double>& buf = buffers[which];
  if (buf.size() < rows * cols) buf.resize(rows * cols);
  return MatrixMap(buf.data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

// col(:, b*out_h*out_w + y*out_w + x) = input patch at (b, :, y.., x..)
MatrixMap im2col(const Tensor& input, const ConvDims& d) {
  const std::size_t patch = d.in_channels * d.kernel * d.kernel;
  const std::size_t cols = d.batch * d.out_h * d.out_w;
  MatrixMap col = scratch(0, patch, cols);
  const double* in = input.data.data();
  std::size_t j = 0;
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* sample = in + b * d.in_channels * d.in_h * d.in_w;
    for (std::size_t y = 0; y < d.out_h; ++y) {
      for (std::size_t x = 0; x < d.out_w; ++x, ++j) {
        double* dst = col.data() + j * patch;
        for (std::size_t c = 0; c < d.in_channels; ++c) {
          const double* plane = sample + c * d.in_h * d.in_w;
          for (std::size_t dy = 0; dy < d.kernel; ++dy) {
            const double* row = plane + (y + dy) * d.in_w + x;
            for (std::size_t dx = 0; dx < d.kernel; ++dx) {
              *dst++ = row[dx];
            }
          }
        }
      }
    }
  }
  return col;
}

void col2im_accumulate(const MatrixMap& col, const ConvDims& d, Tensor* grad_input) {
  const std::size_t patch = d.in_channels * d.kernel * d.kernel;
  double* out = grad_input->data.data();
  std::size_t j = 0;
  for (std::size_t b = 0; b < d.batch; ++b) {
    double* sample = out + b * d.in_channels * d.in_h * d.in_w;
    for (std::size_t y = 0; y < d.out_h; ++y) {
      for (std::size_t x = 0; x < d.out_w; ++x, ++j) {
        const double* src = col.data() + j * patch;
        for (std::size_t c = 0; c < d.in_channels; ++c) {
          double* plane = sample + c * d.in_h * d.in_w;
          for (std::size_t dy = 0; dy < d.kernel; ++dy) {
            double* row = plane + (y + dy) * d.in_w + x;
            for (std::size_t dx = 0; dx < d.kernel; ++dx) {
              row[dx] += *src++;
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  const ConvDims d = conv_dims(input, kernel, &bias);
  const std::size_t patch = d.in_channels * d.kernel * d.kernel;
  const std::size_t cols = d.batch * d.out_h * d.out_w;

  const MatrixMap col = im2col(input, d);
  ConstRowMajorMap kernel_mat(kernel.data.data(), static_cast<Eigen::Index>(d.out_channels),
                              static_cast<Eigen::Index>(patch));
  MatrixMap out_mat = scratch(1, d.out_channels, cols);
  out_mat.noalias() = kernel_mat * col;  // [C_out, cols], cols ordered (b, y, x)

  // Column j of out_mat holds all channels at one output position; writes to
  // consecutive j land in the same output cache lines.
  Tensor output({d.batch, d.out_channels, d.out_h, d.out_w});
  const std::size_t plane = d.out_h * d.out_w;
  const double* src = out_mat.data();
  for (std::size_t b = 0; b < d.batch; ++b) {
    double* sample = output.data.data() + b * d.out_channels * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t co = 0; co < d.out_channels; ++co) {
        sample[co * plane + p] = *src++ + bias.data[co];
      }
    }
  }
  return output;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                     Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias) {
  const ConvDims d = conv_dims(input, kernel, nullptr);
  check(grad_output.shape ==
            std::vector<std::size_t>({d.batch, d.out_channels, d.out_h, d.out_w}),
        "conv2d_backward: grad_output shape mismatch");
  const std::size_t patch = d.in_channels * d.kernel * d.kernel;
  const std::size_t plane = d.out_h * d.out_w;
  const std::size_t cols = d.batch * plane;

  // Repack grad_output as [C_out, cols]: column j gathers all channels at one
  // output position, reading consecutive positions from the same cache lines.
  MatrixMap grad_mat = scratch(1, d.out_channels, cols);
  double* dst = grad_mat.data();
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* sample = grad_output.data.data() + b * d.out_channels * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t co = 0; co < d.out_channels; ++co) {
        *dst++ = sample[co * plane + p];
      }
    }
  }

  if (grad_bias != nullptr) {
    *grad_bias = Tensor({d.out_channels});
    for (std::size_t co = 0; co < d.out_channels; ++co) {
      grad_bias->data[co] = grad_mat.row(static_cast<Eigen::Index>(co)).sum();
    }
  }
  if (grad_kernel != nullptr) {
    const MatrixMap col = im2col(input, d);
    *grad_kernel = Tensor(kernel.shape);
    RowMajorMap grad_kernel_mat(grad_kernel->data.data(),
                                static_cast<Eigen::Index>(d.out_channels),
                                static_cast<Eigen::Index>(patch));
    grad_kernel_mat.noalias() = grad_mat * col.transpose();
  }
  if (grad_input != nullptr) {
    ConstRowMajorMap kernel_mat(kernel.data.data(),
                                static_cast<Eigen::Index>(d.out_channels),
                                static_cast<Eigen::Index>(patch));
    MatrixMap col_grad = scratch(2, patch, cols);
    col_grad.noalias() = kernel_mat.transpose() * grad_mat;  // [patch, cols]
    *grad_input = Tensor(input.shape);
    col2im_accumulate(col_grad, d, grad_input);
  }
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor* bias) {
  check(input.shape.size() == 2, "linear: input must be [B, N]");
  check(weight.shape.size() == 2, "linear: weight must be [M, N]");
  const std::size_t batch = input.dim(0);
  const std::size_t in_dim = input.dim(1);
  const std::size_t out_dim = weight.dim(0);
  check(weight.dim(1) == in_dim, "linear: weight/input dimension mismatch");
  if (bias != nullptr) {
    check(bias->shape.size() == 1 && bias->dim(0) == out_dim, "linear: bias must be [M]");
  }

  Tensor output({batch, out_dim});
  ConstRowMajorMap in_mat(input.data.data(), static_cast<Eigen::Index>(batch),
                          static_cast<Eigen::Index>(in_dim));
  ConstRowMajorMap w_mat(weight.data.data(), static_cast<Eigen::Index>(out_dim),
                         static_cast<Eigen::Index>(in_dim));
  RowMajorMap out_mat(output.data.data(), static_cast<Eigen::Index>(batch),
                      static_cast<Eigen::Index>(out_dim));
  out_mat.noalias() = in_mat * w_mat.transpose();
  if (bias != nullptr) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t m = 0; m < out_dim; ++m) {
        output.data[b * out_dim + m] += bias->data[m];
      }
    }
  }
  return output;
}

void linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                     Tensor* grad_input, Tensor* grad_weight, Tensor* grad_bias) {
  const std::size_t batch = input.dim(0);
  const std::size_t in_dim = input.dim(1);
  const std::size_t out_dim = weight.dim(0);
  check(grad_output.shape == std::vector<std::size_t>({batch, out_dim}),
        "linear_backward: grad_output shape mismatch");

  ConstRowMajorMap in_mat(input.data.data(), static_cast<Eigen::Index>(batch),
                          static_cast<Eigen::Index>(in_dim));
  ConstRowMajorMap w_mat(weight.data.data(), static_cast<Eigen::Index>(out_dim),
                         static_cast<Eigen::Index>(in_dim));
  ConstRowMajorMap grad_mat(grad_output.data.data(), static_cast<Eigen::Index>(batch),
                            static_cast<Eigen::Index>(out_dim));

  if (grad_input != nullptr) {
    *grad_input = Tensor(input.shape);
    RowMajorMap gi(grad_input->data.data(), static_cast<Eigen::Index>(batch),
                   static_cast<Eigen::Index>(in_dim));
    gi.noalias() = grad_mat * w_mat;
  }
  if (grad_weight != nullptr) {
    *grad_weight = Tensor(weight.shape);
    RowMajorMap gw(grad_weight->data.data(), static_cast<Eigen::Index>(out_dim),
                   static_cast<Eigen::Index>(in_dim));
    gw.noalias() = grad_mat.transpose() * in_mat;
  }
  if (grad_bias != nullptr) {
    *grad_bias = Tensor({out_dim});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t m = 0; m < out_dim; ++m) {
        grad_bias->data[m] += grad_output.data[b * out_dim + m];
      }
    }
  }
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  check(input.same_shape(grad_output), "relu_backward: shape mismatch");
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (input.data[i] <= 0.0) grad.data[i] = 0.0;
  }
  return grad;
}

Pmf softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  Pmf probs(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - max_logit);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

Tensor softmax_rows(const Tensor& logits) {
  check(logits.shape.size() == 2, "softmax_rows: logits must be [B, M]");
  Tensor probs = logits;
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = probs.data.data() + b * classes;
    const double max_logit = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      row[k] = std::exp(row[k] - max_logit);
      sum += row[k];
    }
    for (std::size_t k = 0; k < classes; ++k) row[k] /= sum;
  }
  return probs;
}

void softmax_backward_row(std::span<const double> probs, std::span<const double> grad_probs,
                          std::span<double> grad_logits) {
  check(probs.size() == grad_probs.size() && probs.size() == grad_logits.size(),
        "softmax_backward_row: size mismatch");
  double dot = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) dot += grad_probs[k] * probs[k];
  for (std::size_t k = 0; k < probs.size(); ++k) {
    grad_logits[k] = probs[k] * (grad_probs[k] - dot);
  }
}

double jsd(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) throw std::invalid_argument("jsd: size mismatch");
  double divergence = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    if (p[k] > 0.0) divergence += 0.5 * p[k] * std::log(p[k] / m);
    if (q[k] > 0.0) divergence += 0.5 * q[k] * std::log(q[k] / m);
  }
  return divergence;
}

void jsd_grad_q(std::span<const double> p, std::span<const double> q, double weight,
                std::span<double> grad_q) {
  check(p.size() == q.size() && q.size() == grad_q.size(), "jsd_grad_q: size mismatch");
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double qk = std::max(q[k], kTinyProb);
    const double mk = std::max(0.5 * (p[k] + q[k]), kTinyProb);
    grad_q[k] += weight * 0.5 * std::log(qk / mk);
  }
}

double entropy(const Pmf& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

AdamState AdamState::init(const std::vector<const Tensor*>& params, const AdamConfig& cfg) {
  AdamState state;
  state.config = cfg;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const Tensor* p : params) {
    state.first_moment.push_back(Tensor::zeros_like(*p));
    state.second_moment.push_back(Tensor::zeros_like(*p));
  }
  return state;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state) {
  check(params.size() == grads.size() && params.size() == state.first_moment.size(),
        "adam_step: parameter list mismatch");
  state.step += 1;
  const auto& cfg = state.config;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& param = *params[t];
    const Tensor& grad = *grads[t];
    check(param.same_shape(grad), "adam_step: grad shape mismatch");
    Tensor& m = state.first_moment[t];
    Tensor& v = state.second_moment[t];
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      const double g = grad.data[i];
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m.data[i] / bias1;
      const double v_hat = v.data[i] / bias2;
      param.data[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace uwrange
