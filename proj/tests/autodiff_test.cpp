// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "support/finite_difference.hpp"
#include "support/random_tensor.hpp"
#include "synthgt/autodiff/adam.hpp"
#include "synthgt/autodiff/nn.hpp"
#include "synthgt/autodiff/ops.hpp"
#include "synthgt/error.hpp"

namespace synthgt::ad {
namespace {

using testing::check_gradients;
using testing::random_tensor;

// Runs `f` on a fresh tape, backpropagates, then compares against central
// differences of the same function evaluated without a tape.
double grad_error(const std::function<Tensor()>& f, const std::vector<Tensor>& params) {
  for (Tensor p : params) p.clear_grad();
  {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(f());
  }
  const auto check = check_gradients([&] { return f().item(); }, params);
  EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
  return check.max_rel_error;
}

TEST(Ops, SoftmaxOfSingleElementIsOne) {
  Tensor x = Tensor::from({1, 1}, {5.0});
  EXPECT_DOUBLE_EQ(softmax_rows(x)[0], 1.0);
}

TEST(Ops, ReluClampsNegatives) {
  Tensor y = relu(Tensor::from({3}, {-1.0, 0.0, 2.0}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
            (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Ops, MatmulOfOnes) {
  Tensor c = matmul(Tensor::full({2, 3}, 1.0), Tensor::full({3, 2}, 1.0));
  ASSERT_EQ(c.shape(), (Shape{2, 2}));
  for (double v : c.data()) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(Ops, ShapeMismatchNamesPrimitiveAndShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
  }
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), DimensionError);
  EXPECT_THROW(mul(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
}

TEST(Ops, AddBroadcastsBiasOverRows) {
  Tensor y = add(Tensor::zeros({2, 2}), Tensor::from({2}, {1.0, 2.0}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
            (std::vector<double>{1.0, 2.0, 1.0, 2.0}));
}

TEST(Ops, SegmentReductions) {
  Tensor x = Tensor::from({4, 2}, {1, 8, 3, 2, 5, 5, -1, 0});
  const std::vector<std::size_t> seg{0, 0, 1, 1};
  Tensor mx = segment_max(x, seg, 2);
  Tensor mn = segment_mean(x, seg, 2);
  EXPECT_EQ(std::vector<double>(mx.data().begin(), mx.data().end()),
            (std::vector<double>{3, 8, 5, 5}));
  EXPECT_EQ(std::vector<double>(mn.data().begin(), mn.data().end()),
            (std::vector<double>{2, 5, 2, 2.5}));
}

TEST(Ops, SegmentSoftmaxNormalizesWithinSegments) {
  Tensor s = Tensor::from({3}, {0.0, std::log(3.0), 7.0});
  const std::vector<std::size_t> seg{0, 0, 1};
  Tensor a = segment_softmax(s, seg, 2);
  EXPECT_NEAR(a[0], 0.25, 1e-15);
  EXPECT_NEAR(a[1], 0.75, 1e-15);
  EXPECT_DOUBLE_EQ(a[2], 1.0);
}

TEST(Ops, DropoutEvalIsIdentityAndTrainScales) {
  Rng rng(3);
  Tensor x = random_tensor({50, 4}, rng, false);
  Tensor eval = dropout(x, 0.3, rng, false);
  Tensor p0 = dropout(x, 0.0, rng, true);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(eval[i], x[i]);
    EXPECT_EQ(p0[i], x[i]);
  }
  Tensor train = dropout(x, 0.5, rng, true);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (train[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(train[i], 2.0 * x[i]);
    }
  }
  EXPECT_GT(zeros, 60u);
  EXPECT_LT(zeros, 140u);
  EXPECT_THROW(dropout(x, 1.0, rng, true), ContractError);
}

TEST(Backward, SquareAtThree) {
  Tensor x = Tensor::from({1}, {3.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  tape.backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Rng rng(1);
  Tensor x = random_tensor({1, 5}, rng);
  Tape tape;
  Tape::Scope scope(tape);
  tape.backward(sum(softmax_rows(x)));
  for (double g : x.grad()) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Backward, NormOfMatrixVectorMatchesFiniteDifferences) {
  Rng rng(11);
  Tensor w = random_tensor({4, 4}, rng);
  Tensor v = random_tensor({4, 1}, rng, false);
  const auto f = [&] {
    Tensor y = matmul(w, v);
    return sum(mul(y, y));
  };
  grad_error(f, {w});
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, LossFromAnotherTapeIsRejected) {
  Tensor x = Tensor::from({1}, {2.0}, true);
  Tape first;
  Tensor loss;
  {
    Tape::Scope scope(first);
    loss = sum(x);
  }
  Tape second;
  EXPECT_THROW(second.backward(loss), ContractError);
}

TEST(Backward, RepeatedBackwardAccumulates) {
  Tensor x = Tensor::from({1}, {3.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor loss = sum(mul(x, x));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Backward, EveryReachableParameterGetsAGradient) {
  Tensor a = Tensor::from({2}, {1.0, -1.0}, true);
  Tensor b = Tensor::from({2}, {-2.0, -3.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  tape.backward(sum(add(relu(b), a)));  // relu blocks every path through b
  ASSERT_TRUE(b.has_grad());
  EXPECT_EQ(b.grad()[0], 0.0);
}

TEST(Backward, NoTapeMeansNoRecording) {
  Tensor x = Tensor::from({1}, {1.0}, true);
  Tensor y = scale(x, 2.0);
  EXPECT_EQ(y.impl()->tape, nullptr);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor z = scale(Tensor::from({1}, {1.0}), 2.0);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(z.requires_grad());
}

// Every primitive against central differences on random small tensors.
class PrimitiveGradient : public ::testing::Test {
 protected:
  Rng rng{2024};
};

TEST_F(PrimitiveGradient, Matmul) {
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor w = random_tensor({3, 2}, rng, false);
  grad_error([&] { return sum(mul(matmul(a, b), w)); }, {a, b});
}

TEST_F(PrimitiveGradient, AddSubMulScale) {
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor c = random_tensor({3, 4}, rng);
  grad_error([&] { return sum(mul(scale(sub(add(a, b), c), 1.7), add(a, b))); }, {a, b, c});
}

TEST_F(PrimitiveGradient, ReluAndLog) {
  Tensor a = random_tensor({5, 3}, rng);
  Tensor p = random_tensor({5, 3}, rng, true, 0.5, 2.0);
  Tensor w = random_tensor({5, 3}, rng, false);
  grad_error([&] { return sum(mul(add(relu(a), log(p)), w)); }, {a, p});
}

TEST_F(PrimitiveGradient, SoftmaxRowsAndMean) {
  Tensor a = random_tensor({4, 5}, rng);
  Tensor w = random_tensor({4, 5}, rng, false);
  grad_error([&] { return mean(mul(softmax_rows(a), w)); }, {a});
}

TEST_F(PrimitiveGradient, SegmentSoftmax) {
  Tensor s = random_tensor({7, 3}, rng);
  Tensor w = random_tensor({7, 3}, rng, false);
  const std::vector<std::size_t> seg{0, 2, 0, 1, 2, 2, 0};
  grad_error([&] { return sum(mul(segment_softmax(s, seg, 3), w)); }, {s});
}

TEST_F(PrimitiveGradient, SegmentMaxMeanSum) {
  Tensor x = random_tensor({6, 3}, rng);
  Tensor w = random_tensor({2, 3}, rng, false);
  const std::vector<std::size_t> seg{0, 1, 1, 0, 1, 0};
  grad_error([&] { return sum(mul(segment_max(x, seg, 2), w)); }, {x});
  grad_error([&] { return sum(mul(segment_mean(x, seg, 2), w)); }, {x});
  grad_error([&] { return sum(mul(segment_sum(x, seg, 2), w)); }, {x});
}

TEST_F(PrimitiveGradient, ConcatGatherReshape) {
  Tensor a = random_tensor({3, 2}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({4, 6}, rng, false);
  const std::vector<std::size_t> idx{2, 0, 2, 1};
  grad_error([&] { return sum(mul(gather_rows(concat_last({a, b}), idx), w)); }, {a, b});
  Tensor u = random_tensor({3}, rng);
  Tensor v = random_tensor({2}, rng);
  Tensor w5 = random_tensor({5}, rng, false);
  grad_error([&] { return sum(mul(reshape(concat_last({u, v}), {5}), w5)); }, {u, v});
}

TEST_F(PrimitiveGradient, DropoutWithFixedMask) {
  Tensor x = random_tensor({4, 4}, rng);
  Tensor w = random_tensor({4, 4}, rng, false);
  grad_error(
      [&] {
        Rng mask_rng(5);
        return sum(mul(dropout(x, 0.3, mask_rng, true), w));
      },
      {x});
}

TEST_F(PrimitiveGradient, HeadDotAndScale) {
  Tensor q = random_tensor({5, 6}, rng);
  Tensor k = random_tensor({5, 6}, rng);
  Tensor v = random_tensor({5, 6}, rng);
  Tensor w = random_tensor({5, 6}, rng, false);
  grad_error([&] { return sum(mul(head_scale(head_dot(q, k, 2), v, 2), w)); }, {q, k, v});
}

TEST_F(PrimitiveGradient, NeighborhoodAttention) {
  NeighborLists nbrs;
  nbrs.offsets = {0, 2, 5, 7, 8};
  nbrs.indices = {0, 1, 0, 1, 2, 1, 2, 3};
  Tensor q = random_tensor({8, 6}, rng);  // two graphs of four nodes
  Tensor k = random_tensor({8, 6}, rng);
  Tensor v = random_tensor({8, 6}, rng);
  Tensor w = random_tensor({8, 6}, rng, false);
  grad_error([&] { return sum(mul(neighborhood_attention(q, k, v, nbrs, 3), w)); }, {q, k, v});
}

TEST_F(PrimitiveGradient, CrossEntropyAndMse) {
  Tensor logits = random_tensor({6, 2}, rng);
  const std::vector<int> labels{0, 1, 1, 0, 1, 0};
  grad_error([&] { return softmax_cross_entropy(logits, labels); }, {logits});
  Tensor p = random_tensor({3, 3}, rng);
  Tensor t = random_tensor({3, 3}, rng);
  grad_error([&] { return mse(p, t); }, {p, t});
}

TEST(Attention, FusedMatchesComposedPrimitives) {
  Rng rng(77);
  NeighborLists nbrs;
  nbrs.offsets = {0, 2, 5, 7};
  nbrs.indices = {0, 1, 0, 1, 2, 1, 2};
  const std::size_t heads = 2;
  Tensor q = random_tensor({6, 4}, rng, false);
  Tensor k = random_tensor({6, 4}, rng, false);
  Tensor v = random_tensor({6, 4}, rng, false);
  Tensor fused = neighborhood_attention(q, k, v, nbrs, heads);

  std::vector<std::size_t> src, dst;
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t u = 0; u < 3; ++u) {
      for (std::size_t v_idx : nbrs.of(u)) {
        dst.push_back(g * 3 + u);
        src.push_back(g * 3 + v_idx);
      }
    }
  }
  Tensor scores = scale(head_dot(gather_rows(q, dst), gather_rows(k, src), heads), 1.0 / std::sqrt(2.0));
  Tensor alpha = segment_softmax(scores, dst, 6);
  Tensor composed = segment_sum(head_scale(alpha, gather_rows(v, src), heads), dst, 6);
  for (std::size_t i = 0; i < fused.size(); ++i) EXPECT_NEAR(fused[i], composed[i], 1e-14);
}

TEST(Backward, ReplayIsDeterministic) {
  auto run = [] {
    Rng rng(99);
    Mlp net({5, 8, 3}, rng);
    Tensor x = random_tensor({4, 5}, rng, false);
    ParameterList params;
    net.collect(params, "");
    Tape tape;
    Tape::Scope scope(tape);
    Rng drop(4);
    Tensor loss = mean(dropout(relu(net.forward(x)), 0.3, drop, true));
    tape.backward(loss);
    std::vector<double> out{loss.item()};
    for (const Tensor& t : params.tensors()) out.insert(out.end(), t.grad().begin(), t.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<Tensor> params{Tensor::from({3}, {1.0, -2.0, 0.5}, true)};
  params[0].mutable_grad();
  AdamState state = AdamState::for_params(params, 0.1);
  adam_step(params, state);
  EXPECT_EQ(params[0][0], 1.0);
  EXPECT_EQ(params[0][1], -2.0);
  EXPECT_EQ(params[0][2], 0.5);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  std::vector<Tensor> params{Tensor::from({1}, {0.0}, true)};
  params[0].mutable_grad()[0] = 1.0;
  AdamState state = AdamState::for_params(params, 0.001);
  adam_step(params, state);
  EXPECT_NEAR(params[0][0], -0.001, 1e-10);
  EXPECT_EQ(params[0].grad()[0], 0.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, QuadraticDecreasesMonotonically) {
  // Scalar oracle: the same recursion evaluated by hand, then compared.
  std::vector<Tensor> params{Tensor::from({1}, {1.0}, true)};
  AdamState state = AdamState::for_params(params, 0.1);
  double m = 0.0, v = 0.0, x = 1.0;
  double previous = std::abs(params[0][0]);
  for (int step = 1; step <= 10; ++step) {
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(sum(mul(params[0], params[0])));
    adam_step(params, state);
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, step))) / (std::sqrt(v / (1 - std::pow(0.999, step))) + 1e-8);
    EXPECT_NEAR(params[0][0], x, 1e-12);
    EXPECT_LT(std::abs(params[0][0]), previous);
    previous = std::abs(params[0][0]);
  }
}

TEST(Adam, MissingGradientIsContractError) {
  std::vector<Tensor> params{Tensor::from({1}, {0.0}, true)};
  AdamState state = AdamState::for_params(params, 0.1);
  EXPECT_THROW(adam_step(params, state), ContractError);
}

TEST(ParameterList, HashTracksBitwiseChanges) {
  Rng rng(1);
  Linear layer(3, 2, rng);
  ParameterList params;
  layer.collect(params, "fc.");
  const std::string before = params.hash();
  EXPECT_EQ(before, params.hash());
  layer.weight.mutable_data()[0] = std::nextafter(layer.weight[0], 10.0);
  EXPECT_NE(before, params.hash());
}

}  // namespace
}  // namespace synthgt::ad
