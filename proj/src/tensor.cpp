#include "awb/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "awb/errors.hpp"

namespace awb {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(shape(), node_->data);
  out.set_requires_grad(requires_grad());
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), node_->data);
}

template <typename T>
Tensor<T> Tensor<T>::from_node(std::shared_ptr<detail::Node<T>> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> tensor) {
  auto [it, inserted] = map_.emplace(name, std::move(tensor));
  if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::total_numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : map_) n += t.numel();
  return n;
}

template <typename T>
std::vector<std::string> ParamStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(map_.size());
  for (const auto& [name, _] : map_) out.push_back(name);
  return out;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, t] : map_) t.zero_grad();
}

namespace {

template <typename T>
std::vector<detail::Node<T>*> topo_order(detail::Node<T>* root) {
  enum class Mark : unsigned char { active, done };
  std::unordered_map<detail::Node<T>*, Mark> marks;
  std::vector<detail::Node<T>*> order;
  // Explicit stack of (node, next parent index) so deep graphs do not recurse.
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  marks[root] = Mark::active;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<T>* parent = node->parents[next++].get();
      if (!parent->requires_grad) continue;
      auto it = marks.find(parent);
      if (it == marks.end()) {
        marks[parent] = Mark::active;
        stack.emplace_back(parent, 0);
      } else if (it->second == Mark::active) {
        throw NumericError("backward: cyclic graph detected at op '" + std::string(parent->op) + "'");
      }
    } else {
      marks[node] = Mark::done;
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

template <typename T>
void run_backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("backward: loss must be a scalar, got shape " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  detail::Node<T>* root = loss.node().get();
  if (!root->requires_grad) return;
  auto order = topo_order(root);
  for (auto* node : order) node->grad.assign(node->data.size(), T(0));
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* node = *it;
    if (node->backward && !node->parents.empty()) node->backward(*node);
  }
}

}  // namespace

template <typename T>
void backward(const Tensor<T>& loss) {
  run_backward(loss);
}

template <typename T>
void backward(const Tensor<T>& loss, ParamStore<T>& params) {
  for (auto& [_, p] : params) p.zero_grad();
  run_backward(loss);
}

namespace detail {

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  for (const T& v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>::from_node(std::move(node));
}

template Tensor<float> make_result(const char*, Shape, std::vector<float>,
                                   std::vector<std::shared_ptr<Node<float>>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(const char*, Shape, std::vector<double>,
                                    std::vector<std::shared_ptr<Node<double>>>,
                                    std::function<void(Node<double>&)>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template void backward(const Tensor<float>&, ParamStore<float>&);
template void backward(const Tensor<double>&, ParamStore<double>&);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace awb
