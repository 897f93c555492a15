#include "tumornet/nn/gradcheck.hpp"
#include "tumornet/nn/layers.hpp"
#include "tumornet/nn/ops.hpp"

namespace tumornet::nn {

TensorD weighted_sum(const TensorD& out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

namespace {

using Fn = std::function<TensorD(const std::vector<TensorD>&)>;

GradcheckCase make_case(std::string name, std::vector<Shape> shapes, Fn f, double lo = -1.0, double hi = 1.0) {
  return {name, [=](const GradcheckOptions& opts) {
            Rng rng(derive_seed(opts.seed, std::hash<std::string>{}(name)));
            std::vector<TensorD> inputs;
            for (const auto& s : shapes) inputs.push_back(random_tensor(s, rng, lo, hi));
            return gradcheck([&] { return weighted_sum(f(inputs), 7); }, inputs, opts);
          }};
}

// Checks gradients with respect to the module's parameters and its input.
template <typename M, typename Build>
GradcheckCase module_case(std::string name, Shape input_shape, Build build, bool train_mode = true) {
  return {name, [=](const GradcheckOptions& opts) {
            Rng rng(derive_seed(opts.seed, std::hash<std::string>{}(name)));
            std::unique_ptr<M> m = build(rng);
            m->train(true);
            auto x = random_tensor(input_shape, rng);
            if (!train_mode) {
              m->forward(x);  // populate running statistics
              m->eval();
            }
            std::vector<TensorD> inputs{x};
            for (auto& [n, p] : m->parameters()) inputs.push_back(p);
            return gradcheck([&] { return weighted_sum(m->forward(x), 11); }, inputs, opts);
          }};
}

}  // namespace

std::vector<GradcheckCase> primitive_gradcheck_cases() {
  std::vector<GradcheckCase> c;
  c.push_back(make_case("add", {{2, 3}, {2, 3}}, [](const auto& v) { return add(v[0], v[1]); }));
  c.push_back(make_case("sub", {{2, 3}, {2, 3}}, [](const auto& v) { return sub(v[0], v[1]); }));
  c.push_back(make_case("mul", {{2, 3}, {2, 3}}, [](const auto& v) { return mul(v[0], v[1]); }));
  c.push_back(make_case("mul_self", {{4}}, [](const auto& v) { return mul(v[0], v[0]); }));
  c.push_back(make_case("add_scalar", {{5}}, [](const auto& v) { return add_scalar(v[0], 0.3); }));
  c.push_back(make_case("mul_scalar", {{5}}, [](const auto& v) { return mul_scalar(v[0], -1.7); }));
  c.push_back(make_case("matmul", {{2, 3}, {3, 4}}, [](const auto& v) { return matmul(v[0], v[1]); }));
  c.push_back(make_case("matmul_shared_rhs", {{2, 3, 4}, {4, 2}}, [](const auto& v) { return matmul(v[0], v[1]); }));
  c.push_back(make_case("matmul_batched", {{2, 2, 3, 4}, {2, 2, 4, 3}}, [](const auto& v) { return matmul(v[0], v[1]); }));
  c.push_back(make_case("linear", {{3, 4}, {5, 4}, {5}}, [](const auto& v) { return linear(v[0], v[1], &v[2]); }));
  c.push_back(make_case("reshape", {{2, 6}}, [](const auto& v) { return reshape(v[0], {3, -1}); }));
  c.push_back(make_case("permute", {{2, 3, 4}}, [](const auto& v) { return permute(v[0], {2, 0, 1}); }));
  c.push_back(make_case("broadcast_to", {{1, 3, 1}}, [](const auto& v) { return broadcast_to(v[0], {2, 2, 3, 4}); }));
  c.push_back(make_case("concat", {{2, 2, 3}, {2, 1, 3}}, [](const auto& v) { return concat<double>({v[0], v[1]}, 1); }));
  c.push_back(make_case("slice", {{3, 5}}, [](const auto& v) { return slice(v[0], 1, 1, 3); }));
  c.push_back(make_case("sum", {{2, 3}}, [](const auto& v) { return sum(v[0]); }));
  c.push_back(make_case("mean", {{2, 3}}, [](const auto& v) { return mean(v[0]); }));
  c.push_back(make_case("relu", {{4, 5}}, [](const auto& v) { return relu(v[0]); }));
  c.push_back(make_case("gelu", {{4, 5}}, [](const auto& v) { return gelu(v[0]); }, -3.0, 3.0));
  c.push_back(make_case("sigmoid", {{4, 5}}, [](const auto& v) { return sigmoid(v[0]); }, -4.0, 4.0));
  c.push_back(make_case("softmax_last", {{3, 4}}, [](const auto& v) { return softmax(v[0], -1); }, -2.0, 2.0));
  c.push_back(make_case("softmax_mid", {{2, 3, 4}}, [](const auto& v) { return softmax(v[0], 1); }, -2.0, 2.0));
  c.push_back(make_case("conv3d_k3_s1_p1", {{2, 2, 4, 4, 4}, {3, 2, 3, 3, 3}, {3}},
                        [](const auto& v) { return conv3d(v[0], v[1], &v[2], 1, 1); }));
  c.push_back(make_case("conv3d_k3_s2_p1", {{1, 2, 5, 4, 6}, {2, 2, 3, 3, 3}, {2}},
                        [](const auto& v) { return conv3d(v[0], v[1], &v[2], 2, 1); }));
  c.push_back(make_case("conv3d_k3_p0", {{1, 1, 4, 5, 3}, {2, 1, 3, 3, 3}},
                        [](const auto& v) { return conv3d<double>(v[0], v[1], nullptr, 1, 0); }));
  c.push_back(make_case("conv3d_k1", {{2, 3, 2, 3, 2}, {4, 3, 1, 1, 1}, {4}},
                        [](const auto& v) { return conv3d(v[0], v[1], &v[2], 1, 0); }));
  c.push_back(make_case("upsample_nearest2x", {{1, 2, 2, 3, 2}}, [](const auto& v) { return upsample_nearest2x(v[0]); }));
  c.push_back(make_case("avg_pool2x", {{1, 2, 4, 2, 4}}, [](const auto& v) { return avg_pool2x(v[0]); }));
  c.push_back(make_case("layer_norm", {{3, 6}, {6}, {6}}, [](const auto& v) { return layer_norm(v[0], v[1], v[2]); }));
  c.push_back(make_case("batch_norm_train", {{3, 2, 2, 2, 2}, {2}, {2}}, [](const auto& v) {
    BatchNormState<double> st(2);
    return batch_norm(v[0], v[1], v[2], st, true);
  }));
  c.push_back(make_case("batch_norm_eval", {{2, 2, 2, 2, 2}, {2}, {2}}, [](const auto& v) {
    BatchNormState<double> st(2);
    st.running_mean.value() << 0.2, -0.1;
    st.running_var.value() << 1.5, 0.7;
    st.updates.value()[0] = 1;
    return batch_norm(v[0], v[1], v[2], st, false);
  }));
  c.push_back(make_case("mse_loss", {{2, 5}, {2, 5}}, [](const auto& v) { return mse_loss(v[0], v[1]); }));
  c.push_back(make_case("masked_mse", {{2, 5}, {2, 5}}, [](const auto& v) {
    TensorD mask(v[0].shape());
    for (std::int64_t i = 0; i < mask.numel(); i += 2) mask.value()[i] = 1.0;
    return masked_mse(v[0], v[1], mask);
  }));

  c.push_back(module_case<Linear<double>>("Linear", {2, 3, 4}, [](Rng& rng) {
    return std::make_unique<Linear<double>>(4, 3, InitKind::torch_default, rng);
  }));
  c.push_back(module_case<Conv3d<double>>("Conv3d", {1, 2, 4, 4, 4}, [](Rng& rng) {
    return std::make_unique<Conv3d<double>>(2, 3, 3, 2, 1, InitKind::kaiming_normal, rng);
  }));
  c.push_back(module_case<BatchNorm<double>>("BatchNorm_train", {2, 3, 2, 2, 2}, [](Rng&) {
    return std::make_unique<BatchNorm<double>>(3);
  }));
  c.push_back(module_case<BatchNorm<double>>(
      "BatchNorm_eval", {2, 3, 2, 2, 2}, [](Rng&) { return std::make_unique<BatchNorm<double>>(3); }, false));
  c.push_back(module_case<LayerNorm<double>>("LayerNorm", {2, 3, 8}, [](Rng&) {
    return std::make_unique<LayerNorm<double>>(8);
  }));
  c.push_back(module_case<MultiHeadAttention<double>>("MultiHeadAttention", {2, 3, 8}, [](Rng& rng) {
    return std::make_unique<MultiHeadAttention<double>>(8, 2, InitKind::kaiming_normal, rng);
  }));
  c.push_back(module_case<Mlp<double>>("Mlp", {2, 3, 4}, [](Rng& rng) {
    return std::make_unique<Mlp<double>>(4, 8, InitKind::kaiming_normal, rng);
  }));
  c.push_back(module_case<TransformerBlock<double>>("TransformerBlock", {2, 3, 8}, [](Rng& rng) {
    return std::make_unique<TransformerBlock<double>>(8, 2, 2.0, InitKind::kaiming_normal, rng);
  }));
  c.push_back(module_case<ResBlock<double>>("ResBlock_plain", {1, 2, 4, 4, 4}, [](Rng& rng) {
    return std::make_unique<ResBlock<double>>(2, 2, 1, false, InitKind::torch_default, rng);
  }));
  c.push_back(module_case<ResBlock<double>>("ResBlock_bn_stride2", {2, 2, 4, 4, 4}, [](Rng& rng) {
    return std::make_unique<ResBlock<double>>(2, 3, 2, true, InitKind::kaiming_normal, rng);
  }));
  c.push_back(module_case<ParamProjection<double>>("ParamProjection", {2, 5}, [](Rng& rng) {
    return std::make_unique<ParamProjection<double>>(5, 2, 2, InitKind::kaiming_normal, rng);
  }));
  return c;
}

}  // namespace tumornet::nn
