#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "reference.hpp"
#include "relstab/errors.hpp"
#include "relstab/network.hpp"
#include "relstab/rng.hpp"
#include "relstab/tensor.hpp"

using namespace relstab;

namespace {

// Softmax cross-entropy written out directly, averaged over the batch.
double reference_ce(const std::vector<double>& logits, std::size_t k,
                    const std::vector<int>& labels) {
  double total = 0.0;
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits[i * k + j]);
    total += std::log(denom) - logits[i * k + labels[i]];
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("tensor_autodiff") {

TEST_CASE("tensor construction validates shape and length") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), InputError);
  CHECK_THROWS_AS(Tensor(Shape{}), InputError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), InputError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.at(1, 2) == 6.0f);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped({4, 2}), InputError);
  CHECK(t.slice(1) == Tensor({3}, {4, 5, 6}));
  const std::vector<Tensor> items{Tensor({2}, {1, 2}), Tensor({2}, {3, 4})};
  CHECK(stack(items) == Tensor({2, 2}, {1, 2, 3, 4}));
}

TEST_CASE("dense layer with identity weights passes the input through") {
  const LayerChain chain{LayerSpec::dense(2, 2)};
  Params p = zero_params(chain);
  p.tensors[0] = Tensor({2, 2}, {1, 0, 0, 1});
  const Tensor logits = forward_pass(chain, p, Tensor({1, 2}, {3.0f, -1.0f})).logits;
  CHECK(logits == Tensor({1, 2}, {3.0f, -1.0f}));
}

TEST_CASE("2x2 all-ones kernel without padding matches the hand-computed result") {
  const LayerChain chain{LayerSpec::conv(1, 1, 2, 0), LayerSpec::flatten()};
  Params p = zero_params(chain);
  p.tensors[0].fill(1.0f);
  const Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor y = forward_pass(chain, p, x).logits;
  CHECK(y == Tensor({1, 4}, {12, 16, 24, 28}));
}

TEST_CASE("ReLU zeroes negative input and the tape keeps pre-activations") {
  const LayerChain chain{LayerSpec::relu()};
  const Tensor x({1, 3}, {-1.0f, -0.5f, -2.0f});
  const ForwardResult r = forward_pass(chain, zero_params(chain), x);
  CHECK(r.logits == Tensor({1, 3}, 0.0f));
  CHECK(r.tape.input(0) == x);
}

TEST_CASE("zero loss gradient gives exactly zero parameter gradients") {
  Rng rng(5);
  const LayerChain chain{LayerSpec::conv(1, 2), LayerSpec::relu(),
                         LayerSpec::max_pool(), LayerSpec::flatten(),
                         LayerSpec::dense(2 * 4 * 4, 3)};
  const Params p = init_params(chain, rng);
  Tensor x({2, 1, 8, 8});
  for (float& v : x.values()) v = static_cast<float>(rng.uniform());
  const ForwardResult fr = forward_pass(chain, p, x);
  const BackwardResult br = backward_pass(chain, p, fr.tape, Tensor({2, 3}, 0.0f));
  for (const Tensor& g : br.grads.tensors)
    for (float v : g.values()) CHECK(v == 0.0f);
}

TEST_CASE("negative pre-activation blocks the upstream gradient") {
  const LayerChain chain{LayerSpec::relu(), LayerSpec::dense(2, 1)};
  Params p = zero_params(chain);
  p.tensors[0] = Tensor({1, 2}, {1.0f, 1.0f});
  const Tensor x({1, 2}, {-1.0f, 2.0f});
  const ForwardResult fr = forward_pass(chain, p, x);
  const BackwardResult br =
      backward_pass(chain, p, fr.tape, Tensor({1, 1}, {1.0f}), true);
  CHECK(br.input_grad[0] == 0.0f);
  CHECK(br.input_grad[1] == 1.0f);
}

TEST_CASE("softmax cross-entropy closed forms") {
  const std::vector<int> label0{0};
  const LossResult one = softmax_cross_entropy(Tensor({1, 2}, {0, 0}), label0);
  CHECK(one.loss == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(one.grad[0] == doctest::Approx(-0.5));
  CHECK(one.grad[1] == doctest::Approx(0.5));

  const std::vector<int> labels00{0, 0};
  const LossResult two = softmax_cross_entropy(Tensor({2, 2}, 0.0f), labels00);
  CHECK(two.grad[0] == doctest::Approx(-0.25));
  CHECK(two.grad[1] == doctest::Approx(0.25));

  const LossResult big = softmax_cross_entropy(Tensor({1, 2}, {1000, 0}), label0);
  CHECK(std::isfinite(big.loss));
  CHECK(big.loss == doctest::Approx(0.0).epsilon(1e-6));

  const std::vector<int> bad{2};
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 2}, 0.0f), bad), InputError);
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(4), k = 2 + rng.below(4);
    Tensor logits({n, k});
    std::vector<int> labels(n);
    for (float& v : logits.values()) v = static_cast<float>(4.0 * rng.uniform() - 2.0);
    for (int& l : labels) l = static_cast<int>(rng.below(k));
    const LossResult r = softmax_cross_entropy(logits, labels);
    std::vector<double> z(logits.values().begin(), logits.values().end());
    CHECK(r.loss == doctest::Approx(reference_ce(z, k, labels)).epsilon(1e-6));
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double saved = z[i];
      z[i] = saved + 1e-3;
      const double up = reference_ce(z, k, labels);
      z[i] = saved - 1e-3;
      const double down = reference_ce(z, k, labels);
      z[i] = saved;
      CHECK(std::fabs(r.grad[i] - (up - down) / 2e-3) <= 1e-4);
    }
  }
}

TEST_CASE("sgd step closed forms") {
  Params p{{Tensor({1}, {1.0f})}};
  const Params before = p;
  sgd_step(p, Params{{Tensor({1}, {2.0f})}}, 0.0f);
  CHECK(bit_identical(p.tensors[0], before.tensors[0]));
  sgd_step(p, Params{{Tensor({1}, {0.0f})}}, 0.1f);
  CHECK(bit_identical(p.tensors[0], before.tensors[0]));
  sgd_step(p, Params{{Tensor({1}, {2.0f})}}, 0.1f);
  CHECK(p.tensors[0][0] == doctest::Approx(0.8f));
}

TEST_CASE("shape inference rejects an incompatible chain and names the layer") {
  const LayerChain chain{LayerSpec::conv(1, 4), LayerSpec::flatten(),
                         LayerSpec::dense(10, 2)};
  try {
    infer_shapes(chain, {1, 8, 8});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
  CHECK(infer_shapes({LayerSpec::conv(1, 4), LayerSpec::max_pool()}, {1, 8, 8}).back() ==
        Shape{4, 4, 4});
}

TEST_CASE("forward pass agrees with the double-precision reference") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const gradcheck::Case c = gradcheck::draw_case(gradcheck::Target::kStack, rng);
    const Tensor logits = forward_pass(c.chain, c.params, c.input).logits;
    const reference::Forward f = reference::forward(
        c.chain, reference::to_double(c.params),
        {c.input_shape, std::vector<double>(c.input.values().begin(),
                                            c.input.values().end())});
    REQUIRE(f.out.v.size() == logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
      CHECK(std::fabs(logits[i] - f.out.v[i]) <= 1e-5 * (1.0 + std::fabs(f.out.v[i])));
    CHECK(bit_identical(predict_logits(c.chain, c.params, c.input), logits));
  }
}

TEST_CASE("gradients match finite differences for every layer kind") {
  using gradcheck::Target;
  for (Target t : {Target::kConv, Target::kDense, Target::kReLU, Target::kMaxPool,
                   Target::kFlatten, Target::kStack}) {
    const gradcheck::Stats s = gradcheck::run(t, 20, 100 + static_cast<int>(t));
    MESSAGE(std::string(gradcheck::target_name(t)) << ": " << s.components << " components, worst "
                                      << s.worst << " at " << s.worst_where << ", "
                                      << s.discarded << " draws discarded at kinks");
    CHECK(s.configs == 20);
    CHECK(s.components > 0);
    CHECK(s.worst <= 1e-3);
  }
}

TEST_CASE("backward pass rejects a tape from a different chain") {
  const LayerChain chain{LayerSpec::dense(2, 2)};
  const Params p = zero_params(chain);
  const ForwardResult fr = forward_pass(chain, p, Tensor({1, 2}, 1.0f));
  const LayerChain other{LayerSpec::dense(2, 2), LayerSpec::relu()};
  CHECK_THROWS(backward_pass(other, zero_params(other), fr.tape, Tensor({1, 2}, 0.0f)));
}

}  // TEST_SUITE
