/*
 * Copyright 2026 The aio-stereo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <functional>
#include <random>

#include "../tensor/impl.hpp"
#include "aio/commands.hpp"
#include "aio/dlskt.hpp"
#include "aio/ops.hpp"
#include "aio/stereo_net.hpp"

namespace aio {

namespace {

constexpr double kOpTol = 1e-4;
constexpr double kBlockTol = 1e-3;
constexpr double kEps = 1e-4;
// Composite blocks carry parameters whose gradient is exactly zero (a bias
// ahead of instance_norm) or ~1e-8; at eps=1e-4 the difference quotient
// cannot resolve those, so the relative error is floored at 1e-6 there.
constexpr double kOpFloor = 1e-8;
constexpr double kBlockFloor = 1e-6;

// y = x^2 with a backward rule that is off by half. Only reachable through
// the fault-injection switch of the suite.
Tensor faulty_square(const Tensor& x) {
  Tensor out = detail::make_tensor(x.shape(), x.dtype());
  auto xi = x.impl();
  auto& src = xi->vec<double>();
  auto& dst = out.impl()->vec<double>();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * src[i];
  if (detail::should_record({&x})) {
    detail::record(out, "faulty_square", {x}, [xi](TensorImpl& o) {
      const double* g = o.grad_cptr<double>();
      double* gx = xi->grad_ptr<double>();
      const auto& v = xi->vec<double>();
      for (std::size_t i = 0; i < v.size(); ++i) gx[i] += 3.0 * v[i] * g[i];
    });
  }
  return out;
}

class Rand {
 public:
  explicit Rand(std::uint64_t seed) : rng_(seed) {}

  Tensor leaf(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = u(rng_);
    return Tensor::from_vector(std::move(shape), v, DType::f64);
  }
  std::uint64_t next() { return rng_(); }
  Tensor mask(Shape shape) {
    std::bernoulli_distribution b(0.7);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = b(rng_) ? 1.0 : 0.0;
    v[0] = 1.0;
    return Tensor::from_vector(std::move(shape), v, DType::f64);
  }

 private:
  std::mt19937_64 rng_;
};

// Contracts an output with fixed random weights so every output element
// contributes its own gradient.
Tensor weighted(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

struct Case {
  std::string name;
  double tol;
  double floor;
  std::function<void(Rand&, std::vector<Tensor>&, GraphBuilder&)> setup;
};

void add_param_inputs(const ParamStore& store, std::vector<Tensor>& inputs, const std::string& prefix = {}) {
  for (const auto& p : store.params())
    if (prefix.empty() || p.name.rfind(prefix, 0) == 0) inputs.push_back(p.tensor);
}

ModelConfig micro_config() {
  ModelConfig m;
  m.context_channels = {3, 4, 5, 6};
  m.feature_hidden = {4, 5};
  m.feature_channels = 6;
  m.hidden_channels = 4;
  m.max_disparity = 3;
  m.corr_levels = 2;
  m.corr_radius = 1;
  m.align_hidden = 3;
  m.teacher_channels = 2;
  m.top_k = 2;
  return m;
}

// Models built for a check live as long as the suite.
std::vector<std::shared_ptr<void>>& keep_alive() {
  static thread_local std::vector<std::shared_ptr<void>> v;
  return v;
}

std::vector<Case> op_cases() {
  std::vector<Case> c;
  auto unary = [&](std::string name, Shape shape, std::function<Tensor(const Tensor&)> f) {
    c.push_back({name, kOpTol, kOpFloor, [shape, f](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                   in = {r.leaf(shape)};
                   const Tensor probe = f(in[0].detach());
                   const Tensor w = r.leaf(probe.shape());
                   b = [f, w](const std::vector<Tensor>& x) { return weighted(f(x[0]), w); };
                 }});
  };
  auto binary = [&](std::string name, Shape sa, Shape sb, std::function<Tensor(const Tensor&, const Tensor&)> f) {
    c.push_back({name, kOpTol, kOpFloor, [sa, sb, f](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                   in = {r.leaf(sa), r.leaf(sb)};
                   const Tensor probe = f(in[0].detach(), in[1].detach());
                   const Tensor w = r.leaf(probe.shape());
                   b = [f, w](const std::vector<Tensor>& x) { return weighted(f(x[0], x[1]), w); };
                 }});
  };

  c.push_back({"conv2d_s1_p1", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({2, 5, 5}), r.leaf({3, 2, 3, 3}), r.leaf({3})};
                 const Tensor w = r.leaf({3, 5, 5});
                 b = [w](const std::vector<Tensor>& x) { return weighted(conv2d(x[0], x[1], x[2], 1, 1), w); };
               }});
  c.push_back({"conv2d_s2_batched", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({2, 2, 6, 7}), r.leaf({3, 2, 3, 3}), r.leaf({3})};
                 const Tensor w = r.leaf({2, 3, 3, 4});
                 b = [w](const std::vector<Tensor>& x) { return weighted(conv2d(x[0], x[1], x[2], 2, 1), w); };
               }});
  c.push_back({"conv2d_1x1", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({3, 4, 4}), r.leaf({2, 3, 1, 1}), r.leaf({2})};
                 const Tensor w = r.leaf({2, 4, 4});
                 b = [w](const std::vector<Tensor>& x) { return weighted(conv2d(x[0], x[1], x[2]), w); };
               }});
  c.push_back({"conv2d_7x7_s2", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({3, 8, 8}), r.leaf({2, 3, 7, 7}), r.leaf({2})};
                 const Tensor w = r.leaf({2, 4, 4});
                 b = [w](const std::vector<Tensor>& x) { return weighted(conv2d(x[0], x[1], x[2], 2, 3), w); };
               }});
  unary("avg_pool2", {2, 4, 6}, [](const Tensor& x) { return avg_pool2(x); });
  unary("avg_pool2_odd", {2, 5, 3}, [](const Tensor& x) { return avg_pool2(x); });
  unary("avg_pool_last2", {3, 4, 5}, [](const Tensor& x) { return avg_pool_last2(x); });
  unary("interp_bilinear_up", {2, 3, 4}, [](const Tensor& x) { return interp_bilinear(x, 5, 7); });
  unary("interp_bilinear_down", {2, 6, 5}, [](const Tensor& x) { return interp_bilinear(x, 2, 3); });
  binary("add", {2, 3, 4}, {2, 3, 4}, [](const Tensor& a, const Tensor& b) { return add(a, b); });
  binary("sub", {2, 3, 4}, {2, 3, 4}, [](const Tensor& a, const Tensor& b) { return sub(a, b); });
  binary("mul", {2, 3, 4}, {2, 3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  binary("mul_gate_broadcast", {1, 3, 4}, {5, 3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  binary("mul_gate_broadcast_rhs", {5, 3, 4}, {1, 3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  unary("scale", {3, 4}, [](const Tensor& x) { return scale(x, -1.7); });
  unary("add_scalar", {3, 4}, [](const Tensor& x) { return add_scalar(x, 0.3); });
  unary("relu", {4, 5}, [](const Tensor& x) { return relu(x); });
  unary("sigmoid", {4, 5}, [](const Tensor& x) { return sigmoid(scale(x, 3.0)); });
  unary("tanh", {4, 5}, [](const Tensor& x) { return tanh(scale(x, 2.0)); });
  unary("clamp_min", {4, 5}, [](const Tensor& x) { return clamp_min(x, 0.1); });
  unary("softmax_axis0", {3, 4, 4}, [](const Tensor& x) { return softmax(scale(x, 2.0), 0); });
  unary("softmax_last", {2, 3, 5}, [](const Tensor& x) { return softmax(x, 2); });
  unary("keep_topk", {3, 4, 4}, [](const Tensor& x) { return keep_topk(x, 2); });
  unary("softmax_keep_topk", {3, 4, 4}, [](const Tensor& x) { return keep_topk(softmax(scale(x, 2.0), 0), 2); });
  unary("instance_norm", {3, 4, 5}, [](const Tensor& x) { return instance_norm(x); });
  unary("sum", {3, 4}, [](const Tensor& x) { return sum(x); });
  unary("mean", {3, 4}, [](const Tensor& x) { return mean(x); });
  unary("concat", {2, 3, 4}, [](const Tensor& x) { return concat({x, scale(x, 2.0), slice(x, 0, 1, 1)}, 0); });
  unary("slice", {4, 3, 2}, [](const Tensor& x) { return slice(x, 1, 1, 2); });
  unary("reshape", {4, 3, 2}, [](const Tensor& x) { return reshape(x, {2, 12}); });
  for (auto kind : {LossKind::mse, LossKind::l1}) {
    const std::string name = kind == LossKind::mse ? "loss_mse_masked" : "loss_l1_masked";
    c.push_back({name, kOpTol, kOpFloor, [kind](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                   in = {r.leaf({3, 5}), r.leaf({3, 5})};
                   const Tensor m = r.mask({3, 5});
                   b = [kind, m](const std::vector<Tensor>& x) { return loss(kind, x[0], x[1], m); };
                 }});
  }
  binary("correlation", {4, 3, 6}, {4, 3, 6}, [](const Tensor& a, const Tensor& b) { return correlation(a, b, 4); });
  c.push_back({"sample_volume", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({3, 4, 6})};
                 const Tensor d = r.leaf({1, 3, 4}, 0.1, 4.9);
                 const Tensor w = r.leaf({5, 3, 4});
                 b = [d, w](const std::vector<Tensor>& x) { return weighted(sample_volume(x[0], d, 2.0, 2), w); };
               }});
  unary("upsample_disparity", {1, 2, 3}, [](const Tensor& x) { return upsample_disparity(x); });
  return c;
}

std::vector<Case> block_cases() {
  std::vector<Case> c;
  c.push_back({"conv_relu_mse", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({2, 6, 6}), r.leaf({3, 2, 3, 3}), r.leaf({3})};
                 const Tensor t = r.leaf({3, 6, 6});
                 b = [t](const std::vector<Tensor>& x) { return mse_loss(relu(conv2d(x[0], x[1], x[2], 1, 1)), t); };
               }});
  c.push_back({"corr_pyramid_lookup", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 in = {r.leaf({4, 3, 8}), r.leaf({4, 3, 8})};
                 const Tensor d = r.leaf({1, 3, 8}, 0.2, 3.8);
                 const Tensor w = r.leaf({4 * 3, 3, 8});
                 b = [d, w](const std::vector<Tensor>& x) {
                   const CorrelationPyramid pyr = build_corr({x[0], x[1]}, 6, 4);
                   return weighted(corr_lookup(pyr, d, 1), w);
                 };
               }});
  c.push_back({"feature_net", kBlockTol, kBlockFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 auto store = std::make_shared<ParamStore>(r.next());
                 auto net = std::make_shared<FeatureNet>(make_feature_net(*store, micro_config()));
                 keep_alive().push_back(store);
                 keep_alive().push_back(net);
                 in = {r.leaf({3, 8, 8}, 0.0, 1.0)};
                 add_param_inputs(*store, in);
                 const Tensor w = r.leaf({6, 2, 2});
                 b = [net, w](const std::vector<Tensor>& x) { return weighted((*net)(x[0]), w); };
               }});
  auto dlskt_case = [](int block) {
    return [block](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
      const ModelConfig cfg = micro_config();
      auto store = std::make_shared<ParamStore>(r.next());
      auto net = std::make_shared<ContextNetwork>(make_context_network(*store, cfg));
      keep_alive().push_back(store);
      keep_alive().push_back(net);
      const DlsktBlock& blk = net->blocks[block - 1];
      const std::int64_t hw = 8 / blk.block.stride;
      in = {r.leaf({blk.block.c_in, 8, 8})};
      add_param_inputs(*store, in, "ctx.block" + std::to_string(block) + ".");
      std::vector<TeacherFeatures> teachers;
      for (auto k : cfg.teachers) teachers.push_back({k, block, r.leaf({cfg.teacher_channels, 5, 6})});
      const Tensor w = r.leaf({blk.block.c_out, hw, hw});
      b = [net, block, cfg, teachers, w](const std::vector<Tensor>& x) {
        const DlsktBlock& bb = net->blocks[block - 1];
        std::vector<Tensor> experts;
        for (std::size_t t = 0; t < cfg.teachers.size(); ++t) experts.push_back(expert_forward(bb, t, x[0]));
        const Tensor fused = selective_fuse(bb, x[0], experts, gate(bb, x[0], cfg.top_k));
        return add(weighted(fused, w), multi_kd_loss(bb, cfg.teachers, experts, teachers));
      };
    };
  };
  c.push_back({"dlskt_block1", kBlockTol, kBlockFloor, dlskt_case(1)});
  c.push_back({"dlskt_block2", kBlockTol, kBlockFloor, dlskt_case(2)});
  c.push_back({"expert_forward", kOpTol, kBlockFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 const ModelConfig cfg = micro_config();
                 auto store = std::make_shared<ParamStore>(r.next());
                 auto net = std::make_shared<ContextNetwork>(make_context_network(*store, cfg));
                 keep_alive().push_back(store);
                 keep_alive().push_back(net);
                 in = {r.leaf({3, 6, 6})};
                 add_param_inputs(*store, in, "ctx.block1.sam.expert");
                 const Tensor w = r.leaf({4, 6, 6});
                 b = [net, w](const std::vector<Tensor>& x) { return weighted(expert_forward(net->blocks[0], 1, x[0]), w); };
               }});
  c.push_back({"gru_block", kBlockTol, kBlockFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                 const ModelConfig cfg = micro_config();
                 auto store = std::make_shared<ParamStore>(r.next());
                 auto ub = std::make_shared<UpdateBlock>(make_update_block(*store, cfg));
                 keep_alive().push_back(store);
                 keep_alive().push_back(ub);
                 const auto ch = cfg.hidden_channels;
                 in = {r.leaf({ch, 8, 8}, -0.9, 0.9), r.leaf({ch, 8, 8}, 0.0, 1.0), r.leaf({cfg.corr_features(), 8, 8})};
                 add_param_inputs(*store, in);
                 const Tensor disp = r.leaf({1, 8, 8}, 20.0, 30.0);
                 const Tensor wh = r.leaf({ch, 8, 8}), wd = r.leaf({1, 8, 8});
                 b = [ub, disp, wh, wd](const std::vector<Tensor>& x) {
                   const GruResult g = gru_update(*ub, {x[0], x[1], disp}, x[2]);
                   return add(weighted(g.state.hidden, wh), weighted(g.state.disparity, wd));
                 };
               }});
  return c;
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck_suite(const std::string& inject_fault) {
  DTypeScope f64(DType::f64);
  std::vector<Case> cases = op_cases();
  for (auto& k : block_cases()) cases.push_back(std::move(k));
  if (!inject_fault.empty()) {
    if (inject_fault != "bad_backward") throw ContractError("unknown fault '" + inject_fault + "'");
    cases.push_back({"faulty_square", kOpTol, kOpFloor, [](Rand& r, std::vector<Tensor>& in, GraphBuilder& b) {
                       in = {r.leaf({3, 4})};
                       b = [](const std::vector<Tensor>& x) { return sum(faulty_square(x[0])); };
                     }});
  }
  std::vector<GradcheckEntry> out;
  for (const auto& c : cases) {
    for (std::uint64_t seed : {1, 2, 3}) {
      Rand rng(seed * 7919 + std::hash<std::string>{}(c.name) % 1000);
      std::vector<Tensor> inputs;
      GraphBuilder build;
      c.setup(rng, inputs, build);
      GradcheckEntry e;
      e.tolerance = c.tol;
      e.report = grad_check(build, inputs, kEps, c.name + "[seed=" + std::to_string(seed) + "]", c.floor);
      out.push_back(std::move(e));
    }
    keep_alive().clear();
  }
  return out;
}

}  // namespace aio
