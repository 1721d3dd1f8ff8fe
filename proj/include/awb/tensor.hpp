#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace awb {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
};

}  // namespace detail

/// Dense row-major tensor handle with an optional reverse-mode graph.
///
/// Copies share storage. Results of ops record their parents only when at
/// least one input requires a gradient, so inference builds no graph.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  std::vector<T>& values() { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<T> grad() { return node_->grad; }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  T item() const;
  const char* op_name() const { return node_->op; }

  /// Deep copy of the values; the copy is a fresh leaf.
  Tensor clone() const;
  /// Same storage semantics as clone() but keeps requires_grad off.
  Tensor detach() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(node_->data[i]);
    return Tensor<U>(shape(), std::move(out));
  }

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node<T>> node);

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

/// Named parameters, iterated in lexicographic order.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> tensor);
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return map_.count(name) != 0; }
  std::size_t size() const { return map_.size(); }
  std::size_t total_numel() const;
  std::vector<std::string> names() const;
  void zero_grad();

  typename Map::iterator begin() { return map_.begin(); }
  typename Map::iterator end() { return map_.end(); }
  typename Map::const_iterator begin() const { return map_.begin(); }
  typename Map::const_iterator end() const { return map_.end(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, t] : map_) {
      auto c = t.template cast<U>();
      c.set_requires_grad(t.requires_grad());
      out.add(name, c);
    }
    return out;
  }

 private:
  Map map_;
};

/// Fills every parameter's grad with d(loss)/d(param). Parameters the loss
/// does not depend on receive zeros. Intermediate grads are rebuilt from
/// scratch on every call, so repeated calls do not accumulate.
template <typename T>
void backward(const Tensor<T>& loss, ParamStore<T>& params);

/// Same as above for ad-hoc leaves outside a ParamStore.
template <typename T>
void backward(const Tensor<T>& loss);

namespace detail {

/// Builds an op result. Records parents and the backward closure only when
/// some parent requires grad. Throws NumericError on non-finite outputs.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn);

/// Allocates (zeroed) grad storage on demand.
template <typename T>
std::vector<T>& grad_of(Node<T>& node) {
  if (node.grad.empty()) node.grad.assign(node.data.size(), T(0));
  return node.grad;
}

}  // namespace detail

}  // namespace awb
