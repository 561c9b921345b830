#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "../error.hpp"

namespace sga::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode record of matrix-valued primitives.
//
// Nodes are appended in evaluation order, so their ids are a topological
// order; backward() walks them once in reverse. Adjoints of intermediate
// nodes are released as soon as they have been propagated. A tape is used by
// one thread at a time.
class Tape {
 public:
  // Pushes the adjoint of a node into its inputs.
  using Backprop = std::function<void(Tape&, const Matrix& adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, {}, false); }
  Var variable(Matrix value) { return push(std::move(value), true, {}, true); }

  Var record(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(backprop));
  }

  Var record(Matrix value, const std::vector<Var>& inputs, Backprop backprop) {
    bool grad = false;
    for (const auto& v : inputs) {
      check_owner(v);
      grad = grad || nodes_[v.id()].needs_grad;
    }
    return push(std::move(value), grad, grad ? std::move(backprop) : Backprop{}, false);
  }

  bool needs_grad(Var v) const { return nodes_.at(v.id()).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }

  void accumulate(Var v, const Matrix& g) {
    auto& node = nodes_[v.id()];
    if (!node.needs_grad) return;
    if (node.adjoint.size() == 0) {
      node.adjoint = g;
    } else {
      node.adjoint += g;
    }
  }

  // Lazily builds the contribution only when the input needs a gradient.
  template <typename F>
  void accumulate_with(Var v, F&& make) {
    if (nodes_[v.id()].needs_grad) accumulate(v, make());
  }

  // Seeds d(out)/d(out) = 1 for a 1x1 output and propagates to every
  // variable. May be called once per tape.
  void backward(Var out) {
    check_owner(out);
    if (out.rows() != 1 || out.cols() != 1) throw InvalidArgument("backward needs a scalar output");
    if (ran_backward_) throw InvalidArgument("backward already ran on this tape");
    ran_backward_ = true;
    if (!nodes_[out.id()].needs_grad) return;
    nodes_[out.id()].adjoint = Matrix::Ones(1, 1);
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (node.adjoint.size() == 0 || !node.backprop) continue;
      node.backprop(*this, node.adjoint);
      if (!node.is_variable) node.adjoint.resize(0, 0);
    }
  }

  // Gradient of the last backward() output w.r.t. a variable; zeros if unused.
  Matrix gradient(Var v) const {
    const auto& node = nodes_.at(v.id());
    if (node.adjoint.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
    return node.adjoint;
  }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    bool needs_grad = false;
    bool is_variable = false;
    Backprop backprop;
  };

  Var push(Matrix value, bool grad, Backprop backprop, bool variable) {
    nodes_.push_back(Node{std::move(value), Matrix(), grad, variable, std::move(backprop)});
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape_ != this) throw InvalidArgument("Var belongs to a different tape");
  }

  std::deque<Node> nodes_;
  bool ran_backward_ = false;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

}  // namespace sga::ad
