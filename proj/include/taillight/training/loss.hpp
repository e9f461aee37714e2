#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "taillight/autodiff/tensor.hpp"
#include "taillight/preprocess/state.hpp"
#include "taillight/training/train_config.hpp"

namespace taillight {

template <typename T>
std::vector<T> one_hot(TaillightState label);

// Cross-entropy of softmax(p_T) against the label (or a soft target).
template <typename T>
Tensor<T> chunk_loss(const Tensor<T>& last_logits, TaillightState label);
template <typename T>
Tensor<T> chunk_loss(const Tensor<T>& last_logits, const std::vector<T>& target);

// Blended target for the label-bootstrap modes: (1-r) y + r q, where q is the
// model's softmax (soft) or its one-hot argmax (hard).
template <typename T>
std::vector<T> bootstrap_target(std::span<const T> logits, TaillightState label, double ratio, LossMode mode);

// Number of hardest chunks kept: ceil(r B), at least 1.
std::size_t bootstrap_count(std::size_t batch, double ratio);

// Mean of the ceil(r B) largest losses. Throws on an empty batch.
template <typename T>
T bootstrapped_batch_loss(std::span<const T> losses, double ratio);

}  // namespace taillight
