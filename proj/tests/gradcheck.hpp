#pragma once

// Finite-difference checks for every differentiable operation, shared by the
// unit tests and the acceptance binary.

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "gfm/adapt.hpp"
#include "gfm/diff.hpp"
#include "gfm/model.hpp"
#include "gfm/pretrain.hpp"
#include "oracles.hpp"

namespace gradcheck {

using gfm::Matrix;
using gfm::NodeId;
using gfm::nn::Tape;
using gfm::nn::Var;

struct Result {
  std::string name;
  double error = 0.0;  // worst normwise relative error over all inputs
};

using Op = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Checks d<op(inputs), W>/d input for every input, W a fixed random matrix.
inline Result check_op(const std::string& name, std::vector<Matrix> inputs, const Op& op, gfm::Rng& rng) {
  Matrix weights;
  auto loss = [&](bool backward, std::vector<Matrix>* grads) {
    Tape t;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(t.variable(x));
    Var out = op(t, vars);
    if (weights.size() == 0) weights = oracle::random_matrix(rng, t.value(out).rows(), t.value(out).cols());
    Var root = gfm::nn::weighted_sum(t, out, weights);
    if (backward) {
      t.backward(root);
      for (const auto& v : vars) grads->push_back(t.grad(v));
    }
    return t.value(root)(0, 0);
  };
  std::vector<Matrix> analytic;
  loss(true, &analytic);
  Result r{name, 0.0};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    r.error = std::max(r.error, oracle::gradient_error(inputs[i], analytic[i], [&] { return loss(false, nullptr); }));
  }
  return r;
}

/// Checks a scalar loss built from trainable parameters against every parameter.
inline Result check_params(const std::string& name, const std::vector<gfm::nn::Parameter*>& params,
                           const std::function<double(bool backward)>& loss) {
  for (auto* p : params) p->zero_grad();
  loss(true);
  Result r{name, 0.0};
  for (auto* p : params) {
    const Matrix analytic = p->grad;
    r.error = std::max(r.error, oracle::gradient_error(p->value, analytic, [&] { return loss(false); }));
  }
  return r;
}

inline gfm::Graph small_graph(gfm::Rng& rng, std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);  // connected spine
  for (int i = 0; i < static_cast<int>(n); ++i) {
    e.emplace_back(static_cast<NodeId>(rng.below(n)), static_cast<NodeId>(rng.below(n)));
  }
  return gfm::Graph::from_edges(n, e);
}

inline std::vector<Result> run_all(std::uint64_t seed) {
  using namespace gfm::nn;
  gfm::Rng rng(seed);
  auto rand = [&](Eigen::Index r, Eigen::Index c) { return oracle::random_matrix(rng, r, c); };
  const std::size_t n = 3 + rng.below(5);
  const gfm::Graph graph = small_graph(rng, n);
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(4));
  const Eigen::Index h = 2 + static_cast<Eigen::Index>(rng.below(4));
  std::vector<Result> out;

  out.push_back(check_op("matmul", {rand(N, d), rand(d, h)}, [](Tape& t, auto& v) { return matmul(t, v[0], v[1]); }, rng));
  out.push_back(check_op("add", {rand(N, d), rand(N, d)}, [](Tape& t, auto& v) { return add(t, v[0], v[1]); }, rng));
  out.push_back(check_op("scale", {rand(N, d)}, [](Tape& t, auto& v) { return scale(t, v[0], -1.7); }, rng));
  out.push_back(check_op("affine", {rand(N, d), rand(d, h), rand(1, h)},
                         [](Tape& t, auto& v) { return affine(t, v[0], v[1], v[2]); }, rng));
  out.push_back(check_op("affine_no_bias", {rand(N, d), rand(d, h)},
                         [](Tape& t, auto& v) { return affine(t, v[0], v[1]); }, rng));
  out.push_back(check_op("relu", {rand(N, d)}, [](Tape& t, auto& v) { return relu(t, v[0]); }, rng));
  out.push_back(check_op("neighbor_mean", {rand(N, d)},
                         [&](Tape& t, auto& v) { return neighbor_mean(t, v[0], graph); }, rng));
  out.push_back(check_op("sage_layer", {rand(N, d), rand(d, h), rand(d, h)},
                         [&](Tape& t, auto& v) { return sage_layer(t, v[0], graph, v[1], v[2]); }, rng));
  out.push_back(check_op("sage_layer_linear", {rand(N, d), rand(d, h), rand(d, h)},
                         [&](Tape& t, auto& v) { return sage_layer(t, v[0], graph, v[1], v[2], Activation::none); }, rng));
  out.push_back(check_op("row_l2_normalize", {rand(N, d)}, [](Tape& t, auto& v) { return row_l2_normalize(t, v[0]); }, rng));
  out.push_back(check_op("dropout", {rand(N, d)}, [](Tape& t, auto& v) { return dropout(t, v[0], 0.4, true, 99); }, rng));
  out.push_back(check_op("concat_cols", {rand(N, d), rand(N, h)},
                         [](Tape& t, auto& v) { return concat_cols(t, v[0], v[1]); }, rng));
  const std::vector<NodeId> rows{0, static_cast<NodeId>(n - 1), 0, 1};
  out.push_back(check_op("gather_rows", {rand(N, d)}, [&](Tape& t, auto& v) { return gather_rows(t, v[0], rows); }, rng));
  out.push_back(check_op("sum", {rand(N, d)}, [](Tape& t, auto& v) { return sum(t, v[0]); }, rng));

  std::vector<NodeId> anchors, positives;
  for (NodeId a = 0; a < n; a += 2) {
    anchors.push_back(a);
    positives.push_back(static_cast<NodeId>((a + 1) % n));
  }
  out.push_back(check_op("infonce_symmetric", {rand(N, d), rand(N, d)}, [&](Tape& t, auto& v) {
    return gfm::infonce_symmetric(t, row_l2_normalize(t, v[0]), row_l2_normalize(t, v[1]), anchors, positives, 0.1);
  }, rng));
  const std::vector<NodeId> candidates{1, 2};
  out.push_back(check_op("infonce_symmetric_sampled", {rand(N, d), rand(N, d)}, [&](Tape& t, auto& v) {
    return gfm::infonce_symmetric(t, v[0], v[1], anchors, positives, 0.5, candidates);
  }, rng));
  out.push_back(check_op("laplacian_smoothing", {rand(N, d)},
                         [&](Tape& t, auto& v) { return gfm::laplacian_smoothing(t, v[0], graph, 0.3); }, rng));

  gfm::LabelMatrix labels(N, 3);
  for (Eigen::Index i = 0; i < labels.size(); ++i) labels.data()[i] = static_cast<std::uint8_t>(rng.below(2));
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), 0);
  out.push_back(check_op("bce_with_logits", {rand(N, 3)}, [&](Tape& t, auto& v) {
    return gfm::bce_with_logits(t, v[0], labels, all, {true, false, true});
  }, rng));

  // Adapter, both streams, combined embedding, contrastive and smoothing terms.
  gfm::ModelConfig cfg;
  cfg.context_dim = 4;
  cfg.hidden_dim = 5;
  cfg.sage_hidden = 4;
  cfg.embed_dim = 3;
  cfg.dropout = 0.3;
  gfm::ModelState model = gfm::init_model(cfg, seed);
  gfm::Adapter adapter = gfm::make_adapter("g", 2, cfg, seed + 1);
  adapter.bias.value = rand(1, 5);
  const gfm::Graph featured = graph.with_features(rand(N, 2));
  const Matrix context = rand(N, 4);
  std::vector<gfm::nn::Parameter*> params = model.backbone_params();
  params.push_back(&model.text_projection);
  params.push_back(&adapter.weight);
  params.push_back(&adapter.bias);
  auto pipeline = [&](bool backward) {
    Tape t;
    auto s = gfm::forward(t, model, adapter, featured, context, true, 1234);
    Var nce = gfm::infonce_symmetric(t, s.g, s.z, anchors, positives, 0.1);
    Var smooth = gfm::laplacian_smoothing(t, s.g, featured, 5e-3);
    Var embed_term = weighted_sum(t, s.e, Matrix::Constant(N, 6, 0.25));
    Var total = add(t, add(t, nce, smooth), embed_term);
    if (backward) t.backward(total);
    return t.value(total)(0, 0);
  };
  out.push_back(check_params("composed_pipeline", params, pipeline));

  gfm::ClassifierHead head = gfm::make_head(6, 3, seed);
  std::vector<gfm::nn::Parameter*> with_head = params;
  with_head.push_back(&head.weight);
  with_head.push_back(&head.bias);
  auto supervised = [&](bool backward) {
    Tape t;
    auto s = gfm::forward(t, model, adapter, featured, context, true, 77);
    Var logits = affine(t, s.e, t.param(head.weight), t.param(head.bias));
    Var loss = gfm::bce_with_logits(t, logits, labels, all, {true, true, true});
    if (backward) t.backward(loss);
    return t.value(loss)(0, 0);
  };
  out.push_back(check_params("finetune_pipeline", with_head, supervised));
  return out;
}

}  // namespace gradcheck
