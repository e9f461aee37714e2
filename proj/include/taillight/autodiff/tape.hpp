#pragma once

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "taillight/autodiff/tensor.hpp"

namespace taillight {

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

// Receives dL/d(output) and one accumulation buffer per input; a null buffer
// means that input is detached and needs no gradient.
template <typename T>
using BackwardFn = std::function<void(std::span<const T> grad_out, std::span<std::vector<T>* const> grad_in)>;

// Records operations in execution order, which is a topological order of the
// graph. Single-owner; one tape per chunk forward/backward.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf carrying a parameter identity. Watching the same id twice returns
  // the same leaf.
  Tensor<T> watch(const std::string& id, const Tensor<T>& value);

  // Used by ops: appends a node whose parents are the attached inputs.
  Tensor<T> record(Shape shape, std::shared_ptr<const std::vector<T>> values,
                   std::span<const Tensor<T>* const> inputs, BackwardFn<T> fn);

  // Reverse sweep from a scalar. Returns a gradient for every watched id;
  // ids the loss does not reach get exact zeros. seed scales dL.
  GradMap<T> backward(const Tensor<T>& loss, T seed = T(1));

  std::size_t size() const { return nodes_.size(); }
  // Node indices visited by the last backward(), in visit order.
  const std::vector<std::int32_t>& last_visit_order() const { return visit_order_; }

 private:
  struct Node {
    Shape shape;
    std::vector<std::int32_t> parents;
    BackwardFn<T> fn;
    std::string param;
  };

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::int32_t> watched_;
  std::vector<std::int32_t> visit_order_;
};

template <typename T>
Tensor<T> Tape<T>::watch(const std::string& id, const Tensor<T>& value) {
  if (auto it = watched_.find(id); it != watched_.end()) {
    Tensor<T> leaf(nodes_[it->second].shape, value.buffer());
    leaf.tape_ = this;
    leaf.node_ = it->second;
    return leaf;
  }
  Tensor<T> leaf(value.shape(), value.buffer());
  leaf.tape_ = this;
  leaf.node_ = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{value.shape(), {}, nullptr, id});
  watched_.emplace(id, leaf.node_);
  return leaf;
}

template <typename T>
Tensor<T> Tape<T>::record(Shape shape, std::shared_ptr<const std::vector<T>> values,
                          std::span<const Tensor<T>* const> inputs, BackwardFn<T> fn) {
  Node node;
  node.parents.reserve(inputs.size());
  for (const auto* in : inputs) {
    if (in->attached() && in->tape() != this) {
      throw std::logic_error("operation mixes tensors from different tapes");
    }
    node.parents.push_back(in->attached() ? in->node() : -1);
  }
  Tensor<T> out(shape, std::move(values));
  node.shape = std::move(shape);
  node.fn = std::move(fn);
  out.tape_ = this;
  out.node_ = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(std::move(node));
  return out;
}

template <typename T>
GradMap<T> Tape<T>::backward(const Tensor<T>& loss, T seed) {
  if (!loss.attached()) throw std::logic_error("backward() called on a detached tensor");
  if (loss.tape() != this) throw std::logic_error("backward() called on a tensor from another tape");
  if (loss.size() != 1) throw ShapeError("backward() needs a scalar loss, got " + to_string(loss.shape()));

  std::vector<std::vector<T>> grads(nodes_.size());
  grads[loss.node()] = {seed};
  visit_order_.clear();
  GradMap<T> result;

  std::vector<std::vector<T>*> slots;
  for (std::int32_t i = loss.node(); i >= 0; --i) {
    auto& g = grads[i];
    if (g.empty()) continue;
    visit_order_.push_back(i);
    const Node& node = nodes_[i];
    if (!node.param.empty()) {
      result.insert_or_assign(node.param, Tensor<T>(node.shape, std::move(g)));
      continue;
    }
    if (!node.fn) continue;
    slots.assign(node.parents.size(), nullptr);
    for (std::size_t p = 0; p < node.parents.size(); ++p) {
      const auto parent = node.parents[p];
      if (parent < 0) continue;
      auto& pg = grads[parent];
      if (pg.empty()) pg.assign(numel(nodes_[parent].shape), T(0));
      slots[p] = &pg;
    }
    node.fn(std::span<const T>(g), std::span<std::vector<T>* const>(slots));
    std::vector<T>().swap(g);
  }
  for (const auto& [id, index] : watched_) {
    if (!result.contains(id)) result.emplace(id, Tensor<T>::zeros(nodes_[index].shape));
  }
  return result;
}

}  // namespace taillight
