#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfm/graph.hpp"
#include "gfm/types.hpp"

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every value produced during a forward pass together with a
// closure that pushes the output gradient back onto its inputs. Parameters
// live outside the tape; a parameter leaf forwards its gradient into
// Parameter::grad when the tape is run backwards.
namespace gfm::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Matrix::Zero(value.rows(), value.cols());
    } else {
      grad.setZero();
    }
  }
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value);
  /// Leaf holding a copy of `value` whose gradient can be read with grad().
  Var variable(Matrix value);
  /// Parameter leaf. With trainable=false it behaves like a constant and no
  /// gradient is computed for it.
  Var param(Parameter& p, bool trainable = true);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient accumulated for `v` by the last backward(); zeros if none reached it.
  Matrix grad(Var v) const;

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and runs every closure in
  /// reverse creation order.
  void backward(Var root);

  // Used by op implementations.
  Var push(Matrix value, bool requires_grad, Backward backward = {});
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double factor);
/// x * weight + bias, bias broadcast over rows. `bias` may be an invalid Var.
Var affine(Tape& t, Var x, Var weight, Var bias = {});
Var relu(Tape& t, Var x);
/// Row i becomes the mean of the rows of its neighbours; zero for isolated nodes.
Var neighbor_mean(Tape& t, Var x, const Graph& graph);

enum class Activation { none, relu };

/// act(h W_self + mean_{j in adj(i)} h_j W_neigh).
Var sage_layer(Tape& t, Var h, const Graph& graph, Var w_self, Var w_neigh,
               Activation act = Activation::relu);

/// Each row divided by max(||row||_2, 1e-12).
Var row_l2_normalize(Tape& t, Var x);

/// Inverted dropout. Identity when !training or rate == 0. The mask is a pure
/// function of `seed`.
Var dropout(Tape& t, Var x, double rate, bool training, std::uint64_t seed);

Var concat_cols(Tape& t, Var a, Var b);
Var gather_rows(Tape& t, Var x, std::span<const NodeId> rows);
Var sum(Tape& t, Var x);
/// Elementwise product with a constant matrix, then sum: <x, weights>.
Var weighted_sum(Tape& t, Var x, const Matrix& weights);

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
  double lr = 1e-5;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// false: classic Adam with weight decay added to the gradient.
  /// true: decoupled (AdamW-style) decay applied to the weights directly.
  bool decoupled = false;
};

struct AdamMoments {
  Matrix m;
  Matrix v;
  std::uint64_t steps = 0;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// One bias-corrected update of `p` from p.grad at learning rate `lr`.
  void step(Parameter& p, double lr);
  void step(Parameter& p) { step(p, options_.lr); }
  void step(std::span<Parameter* const> params, double lr) {
    for (Parameter* p : params) step(*p, lr);
  }

  const AdamOptions& options() const noexcept { return options_; }
  AdamOptions& options() noexcept { return options_; }
  std::map<std::string, AdamMoments>& moments() noexcept { return moments_; }
  const std::map<std::string, AdamMoments>& moments() const noexcept { return moments_; }

 private:
  AdamOptions options_;
  std::map<std::string, AdamMoments> moments_;
};

}  // namespace gfm::nn
