#pragma once

#include <initializer_list>
#include <span>
#include <vector>

#include "wasr/tensor.hpp"

namespace wasr {

// Differentiable operations over Tensor. Feature maps are laid out as
// [channels, height, width].

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  int pad_h = 0;
  int pad_w = 0;
};

/// Padding that preserves spatial size at stride 1 for an odd kernel.
int same_padding(int kernel, int dilation);

/// Cross-correlation with dilation. `bias` may be undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv2dOptions& opt = {});

/// Per-window maximum without padding. Ties route the gradient to the
/// lowest linear index.
Tensor max_pool2d(const Tensor& input, int window, int stride);

/// Align-corners-false bilinear resampling to an arbitrary target size.
Tensor resize_bilinear(const Tensor& input, int out_h, int out_w);

/// Bilinear upsampling by an integer factor (2 or 4).
Tensor upsample_bilinear(const Tensor& input, int factor);

enum class Activation { relu, sigmoid };

Tensor activation(const Tensor& input, Activation kind);
Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);

/// Per-pixel softmax over the channel axis, max-subtracted.
Tensor softmax_channels(const Tensor& input);

Tensor concat_channels(std::span<const Tensor> inputs);
Tensor concat_channels(std::initializer_list<Tensor> inputs);
Tensor slice_channels(const Tensor& input, int begin, int count);

/// [C,H,W] -> [C,1,1] channel means.
Tensor global_avg_pool(const Tensor& input);

enum class BatchNormMode { train, eval };

struct BatchNormOptions {
  BatchNormMode mode = BatchNormMode::train;
  double eps = 1e-5;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  bool update_running = true;
};

/// Per-channel normalization of a [C,H,W] map. Train mode uses the map's own
/// statistics and, when requested, folds them into the running buffers.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, const BatchNormOptions& opt = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// x[C,H,W] * w[C,1,1] broadcast over the spatial grid.
Tensor mul_channels(const Tensor& x, const Tensor& w);

/// Sum of all elements as a rank-0 tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_squares(const Tensor& a);

}  // namespace wasr
