#include "gfm/diff.hpp"

#include <cmath>

#include "gfm/random.hpp"

namespace gfm::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Var Tape::variable(Matrix value) { return push(std::move(value), true); }

Var Tape::param(Parameter& p, bool trainable) {
  Var v = push(p.value, trainable);
  if (trainable) nodes_[v.id].param = &p;
  return v;
}

void Tape::accumulate(Var v, const Matrix& g) { accumulate_expr(v, g); }

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  require(value(root).size() == 1, "backward() needs a scalar root");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->zero_grad();
      }
      n.param->grad += n.grad;
    }
  }
}

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.cols() == bv.rows(), "matmul: " + shape(av) + " times " + shape(bv));
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(out), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate_expr(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate_expr(b, t.value(a).transpose() * g);
  });
}

Var add(Tape& t, Var a, Var b) {
  require(t.value(a).rows() == t.value(b).rows() && t.value(a).cols() == t.value(b).cols(),
          "add: " + shape(t.value(a)) + " vs " + shape(t.value(b)));
  Matrix out = t.value(a) + t.value(b);
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(out), rg, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Tape& t, Var x, double factor) {
  Matrix out = t.value(x) * factor;
  return t.push(std::move(out), t.requires_grad(x),
                [x, factor](Tape& t, const Matrix& g) { t.accumulate_expr(x, g * factor); });
}

Var affine(Tape& t, Var x, Var weight, Var bias) {
  const Matrix& xv = t.value(x);
  const Matrix& wv = t.value(weight);
  require(xv.cols() == wv.rows(), "affine: input " + shape(xv) + " vs weight " + shape(wv));
  Matrix out(xv.rows(), wv.cols());
  out.noalias() = xv * wv;
  bool rg = t.requires_grad(x) || t.requires_grad(weight);
  if (bias.valid()) {
    const Matrix& bv = t.value(bias);
    require(bv.rows() == 1 && bv.cols() == wv.cols(), "affine: bias " + shape(bv) + " vs weight " + shape(wv));
    out.rowwise() += bv.row(0);
    rg = rg || t.requires_grad(bias);
  }
  return t.push(std::move(out), rg, [x, weight, bias](Tape& t, const Matrix& g) {
    if (t.requires_grad(x)) t.accumulate_expr(x, g * t.value(weight).transpose());
    if (t.requires_grad(weight)) t.accumulate_expr(weight, t.value(x).transpose() * g);
    if (bias.valid() && t.requires_grad(bias)) t.accumulate_expr(bias, g.colwise().sum());
  });
}

Var relu(Tape& t, Var x) {
  Matrix out = t.value(x).cwiseMax(0.0);
  return t.push(std::move(out), t.requires_grad(x), [x](Tape& t, const Matrix& g) {
    t.accumulate_expr(x, (t.value(x).array() > 0.0).cast<double>().matrix().cwiseProduct(g));
  });
}

Var neighbor_mean(Tape& t, Var x, const Graph& graph) {
  const Matrix& xv = t.value(x);
  require(static_cast<std::size_t>(xv.rows()) == graph.node_count(),
          "neighbor_mean: " + std::to_string(xv.rows()) + " rows for " +
              std::to_string(graph.node_count()) + " nodes");
  Matrix out = Matrix::Zero(xv.rows(), xv.cols());
  for (NodeId i = 0; i < graph.node_count(); ++i) {
    auto nb = graph.neighbors(i);
    if (nb.empty()) continue;
    for (NodeId j : nb) out.row(i) += xv.row(j);
    out.row(i) /= static_cast<double>(nb.size());
  }
  const Graph* gp = &graph;
  return t.push(std::move(out), t.requires_grad(x), [x, gp](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(g.rows(), g.cols());
    for (NodeId i = 0; i < gp->node_count(); ++i) {
      auto nb = gp->neighbors(i);
      if (nb.empty()) continue;
      const double w = 1.0 / static_cast<double>(nb.size());
      for (NodeId j : nb) dx.row(j) += w * g.row(i);
    }
    t.accumulate(x, dx);
  });
}

Var sage_layer(Tape& t, Var h, const Graph& graph, Var w_self, Var w_neigh, Activation act) {
  require(t.value(w_self).rows() == t.value(w_neigh).rows() &&
              t.value(w_self).cols() == t.value(w_neigh).cols(),
          "sage_layer: self and neighbour weights differ in shape");
  // mean_j(h_j W) == (mean_j h_j) W; projecting first is cheaper when b < a.
  Var self_term = matmul(t, h, w_self);
  Var neigh_term = neighbor_mean(t, matmul(t, h, w_neigh), graph);
  Var pre = add(t, self_term, neigh_term);
  return act == Activation::relu ? relu(t, pre) : pre;
}

namespace {
constexpr double kFloor = 1e-12;
}

Var row_l2_normalize(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  Vector norms(xv.rows());
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    norms[i] = std::max(xv.row(i).norm(), kFloor);
    out.row(i) = xv.row(i) / norms[i];
  }
  return t.push(std::move(out), t.requires_grad(x), [x, norms](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(x);
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (norms[i] > kFloor) {
        const auto yi = xv.row(i) / norms[i];
        dx.row(i) = (g.row(i) - yi * yi.dot(g.row(i))) / norms[i];
      } else {
        dx.row(i) = g.row(i) / kFloor;
      }
    }
    t.accumulate(x, dx);
  });
}

Var dropout(Tape& t, Var x, double rate, bool training, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const Matrix& xv = t.value(x);
  Matrix mask(xv.rows(), xv.cols());
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() >= rate ? keep_scale : 0.0;
  }
  Matrix out = xv.cwiseProduct(mask);
  return t.push(std::move(out), t.requires_grad(x),
                [x, mask = std::move(mask)](Tape& t, const Matrix& g) {
                  t.accumulate_expr(x, g.cwiseProduct(mask));
                });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.rows() == bv.rows(), "concat_cols: " + shape(av) + " vs " + shape(bv));
  Matrix out(av.rows(), av.cols() + bv.cols());
  out.leftCols(av.cols()) = av;
  out.rightCols(bv.cols()) = bv;
  const auto split = av.cols();
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(out), rg, [a, b, split](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(split));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(g.cols() - split));
  });
}

Var gather_rows(Tape& t, Var x, std::span<const NodeId> rows) {
  const Matrix& xv = t.value(x);
  Matrix out(rows.size(), xv.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require(rows[k] < xv.rows(), "gather_rows: index out of range");
    out.row(k) = xv.row(rows[k]);
  }
  std::vector<NodeId> idx(rows.begin(), rows.end());
  const auto n_rows = xv.rows();
  return t.push(std::move(out), t.requires_grad(x),
                [x, idx = std::move(idx), n_rows](Tape& t, const Matrix& g) {
                  Matrix dx = Matrix::Zero(n_rows, g.cols());
                  for (std::size_t k = 0; k < idx.size(); ++k) dx.row(idx[k]) += g.row(k);
                  t.accumulate(x, dx);
                });
}

Var sum(Tape& t, Var x) {
  Matrix out(1, 1);
  out(0, 0) = t.value(x).sum();
  return t.push(std::move(out), t.requires_grad(x), [x](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(x);
    t.accumulate_expr(x, Matrix::Constant(xv.rows(), xv.cols(), g(0, 0)));
  });
}

Var weighted_sum(Tape& t, Var x, const Matrix& weights) {
  require(t.value(x).rows() == weights.rows() && t.value(x).cols() == weights.cols(),
          "weighted_sum: shape mismatch");
  Matrix out(1, 1);
  out(0, 0) = t.value(x).cwiseProduct(weights).sum();
  return t.push(std::move(out), t.requires_grad(x), [x, weights](Tape& t, const Matrix& g) {
    t.accumulate_expr(x, weights * g(0, 0));
  });
}

void Adam::step(Parameter& p, double lr) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
    throw DimensionError("adam: gradient of '" + p.name + "' has shape " + shape(p.grad) +
                         ", parameter is " + shape(p.value));
  }
  AdamMoments& s = moments_[p.name];
  if (s.m.size() == 0) {
    s.m = Matrix::Zero(p.value.rows(), p.value.cols());
    s.v = Matrix::Zero(p.value.rows(), p.value.cols());
  }
  require(s.m.rows() == p.value.rows() && s.m.cols() == p.value.cols(),
          "adam: moment shape mismatch for '" + p.name + "'");
  ++s.steps;
  const auto& o = options_;
  Matrix g = p.grad;
  if (o.weight_decay != 0.0) {
    if (o.decoupled) {
      p.value *= 1.0 - lr * o.weight_decay;
    } else {
      g += o.weight_decay * p.value;
    }
  }
  s.m = o.beta1 * s.m + (1.0 - o.beta1) * g;
  s.v = o.beta2 * s.v + (1.0 - o.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.steps));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.steps));
  p.value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + o.eps);
}

}  // namespace gfm::nn
