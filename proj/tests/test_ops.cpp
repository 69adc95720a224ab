#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "icaclf/error.hpp"
#include "icaclf/ops.hpp"

using namespace icaclf;

namespace {

std::vector<real> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor backward_through(Tensor& x, const std::function<Tensor(const Tensor&)>& f) {
  x.set_requires_grad(true);
  x.zero_grad();
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = f(x);
  }
  tape.backward(loss);
  return loss;
}

}  // namespace

TEST(Conv, OneDimensionalHandExample) {
  const Tensor x({1, 1, 3}, std::vector<real>{1, 2, 3});
  const Tensor w({1, 1, 3}, std::vector<real>{1, 0, -1});
  const Tensor y = conv(x, w, Tensor(), ConvSpec{1, {3}, {}, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y.data()[0], real(-2));
}

TEST(Conv, AllOnesCube) {
  const Tensor x({1, 1, 4, 4, 4}, real(1));
  const Tensor w({1, 1, 3, 3, 3}, real(1));
  const Tensor y = conv(x, w, Tensor(), ConvSpec{3, {3, 3, 3}, {}, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2, 2}));
  for (real v : y.data()) EXPECT_EQ(v, real(27));
}

TEST(Conv, OutputShape) {
  const ConvSpec spec{3, {3, 3, 3}, {}, 1, 8};
  const std::size_t in[] = {32, 32, 32};
  EXPECT_EQ(spec.output_extents(in), (std::vector<std::size_t>{30, 30, 30}));
  const Tensor y = conv(Tensor({1, 1, 32, 32, 32}), Tensor({8, 1, 3, 3, 3}), Tensor({8}), spec);
  EXPECT_EQ(y.shape(), (Shape{1, 8, 30, 30, 30}));
}

TEST(Conv, ErrorsNameTheAxis) {
  const ConvSpec spec{3, {3, 3, 3}, {}, 1, 1};
  try {
    conv(Tensor({1, 1, 5, 2, 5}), Tensor({1, 1, 3, 3, 3}), Tensor({1}), spec);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv(Tensor({1, 2, 5, 5, 5}), Tensor({1, 1, 3, 3, 3}), Tensor({1}), spec), DimensionError);
}

TEST(Conv, BiasIsPerOutputChannel) {
  const Tensor x({1, 1, 4}, real(0));
  const Tensor y = conv(x, Tensor({2, 1, 2}), Tensor({2}, std::vector<real>{1, -3}), ConvSpec{1, {2}, {}, 1, 2});
  EXPECT_EQ(values(y), (std::vector<real>{1, 1, 1, -3, -3, -3}));
}

TEST(MaxPool, WindowedMax) {
  const Tensor x({1, 1, 4}, std::vector<real>{1, 3, 2, 5});
  const std::size_t w[] = {2};
  EXPECT_EQ(values(max_pool(x, w, w)), (std::vector<real>{3, 5}));
}

TEST(MaxPool, EqualInputGivesEqualOutput) {
  const Tensor x({1, 2, 4, 4, 4}, real(0.7));
  const std::size_t w[] = {2, 2, 2};
  const Tensor y = max_pool(x, w, w);
  for (real v : y.data()) EXPECT_EQ(v, real(0.7));
}

TEST(MaxPool, GradientRoutesToArgmax) {
  Tensor x({1, 1, 6}, std::vector<real>{0.1f, 0.9f, -1.f, -2.f, 4.f, 3.f});
  backward_through(x, [](const Tensor& t) {
    const std::size_t w[] = {2};
    return sum(max_pool(t, w, w));
  });
  EXPECT_EQ(std::vector<real>(x.grad().begin(), x.grad().end()), (std::vector<real>{0, 1, 1, 0, 1, 0}));
}

TEST(MaxPool, WindowLargerThanInput) {
  const std::size_t w[] = {5};
  EXPECT_THROW(max_pool(Tensor({1, 1, 4}), w, w), DimensionError);
}

TEST(Dense, HandExample) {
  const Tensor x({1, 2}, std::vector<real>{1, 2});
  const Tensor w({2, 2}, std::vector<real>{1, 1, 0, 1});
  const Tensor b({2}, std::vector<real>{0, 1});
  EXPECT_EQ(values(dense(x, w, b)), (std::vector<real>{3, 3}));
}

TEST(Dense, ZeroWeightsGiveBias) {
  const Tensor x({3, 4}, real(5));
  const Tensor b({2}, std::vector<real>{0.5, -1});
  const Tensor y = dense(x, Tensor({2, 4}), b);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(y.data()[2 * r], real(0.5));
    EXPECT_EQ(y.data()[2 * r + 1], real(-1));
  }
}

TEST(Dense, WeightGradientIsBroadcastInput) {
  const Tensor x({1, 3}, std::vector<real>{1, -2, 0.5});
  Tensor w({2, 3}, real(0.3));
  backward_through(w, [&](const Tensor& t) { return sum(dense(x, t, Tensor({2}))); });
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(w.grad()[o * 3 + i], x.data()[i]);
}

TEST(Dense, DimensionMismatch) {
  EXPECT_THROW(dense(Tensor({1, 3}), Tensor({2, 4}), Tensor({2})), DimensionError);
}

TEST(BatchNorm, TwoValueExample) {
  BatchNormState state{Tensor({1}), Tensor({1}, real(1))};
  state.epsilon = 0;
  const Tensor x({2, 1}, std::vector<real>{1, 3});
  const Tensor y = batch_norm(x, Tensor({1}, real(1)), Tensor({1}), state, Mode::train);
  EXPECT_NEAR(y.data()[0], -1, 1e-6);
  EXPECT_NEAR(y.data()[1], 1, 1e-6);
  // momentum 0.9: running mean 0.1 * 2, unbiased variance 2.
  EXPECT_NEAR(state.running_mean.data()[0], 0.2, 1e-6);
  EXPECT_NEAR(state.running_var.data()[0], 0.9 + 0.1 * 2.0, 1e-6);
}

TEST(BatchNorm, AffineOnStandardizedInput) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(4, 3);
  Tensor x({8, 2, 5});
  for (auto& v : x.data()) v = n(rng);
  BatchNormState state{Tensor({2}), Tensor({2}, real(1))};
  const Tensor y = batch_norm(x, Tensor({2}, real(2)), Tensor({2}, real(5)), state, Mode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t b = 0; b < 8; ++b)
      for (std::size_t i = 0; i < 5; ++i) {
        const double v = y.data()[(b * 2 + c) * 5 + i];
        s += v;
        ss += v * v;
      }
    const double mean = s / 40, var = ss / 40 - mean * mean;
    EXPECT_NEAR(mean, 5, 1e-4);
    EXPECT_NEAR(std::sqrt(var), 2, 1e-3);
  }
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
  BatchNormState state{Tensor({1}, real(1)), Tensor({1}, real(4))};
  state.epsilon = 0;
  const Tensor y = batch_norm(Tensor({1, 1}, real(5)), Tensor({1}, real(1)), Tensor({1}), state, Mode::eval);
  EXPECT_NEAR(y.data()[0], 2, 1e-6);
}

TEST(BatchNorm, SingleSampleTrainBatchIsDegenerate) {
  BatchNormState state{Tensor({1}), Tensor({1}, real(1))};
  EXPECT_THROW(batch_norm(Tensor({1, 1, 3}), Tensor({1}, real(1)), Tensor({1}), state, Mode::train),
               DegenerateBatchError);
}

TEST(Dropout, IdentityCases) {
  std::mt19937_64 rng(1);
  const Tensor x({4, 5}, real(2));
  EXPECT_TRUE(dropout(x, 0.0, Mode::train, rng).same_storage(x));
  EXPECT_TRUE(dropout(x, 0.7, Mode::eval, rng).same_storage(x));
  EXPECT_THROW(dropout(x, 1.0, Mode::train, rng), ParameterError);
}

TEST(Dropout, InvertedScalingExpectation) {
  std::mt19937_64 rng(2);
  const Tensor x({100000, 1}, real(1));
  const Tensor y = dropout(x, 0.5, Mode::train, rng);
  double total = 0;
  for (real v : y.data()) {
    EXPECT_TRUE(v == real(0) || v == real(2));
    total += v;
  }
  EXPECT_NEAR(total / 1e5, 1.0, 0.02);
}

TEST(Lstm, ZeroParametersGiveZeroState) {
  const std::size_t H = 3;
  Tensor x({2, 4, 2}, real(0.8));
  const Tensor h = lstm(x, Tensor({4 * H, 2}), Tensor({4 * H, H}), Tensor({4 * H}));
  EXPECT_EQ(h.shape(), (Shape{2, H}));
  for (real v : h.data()) EXPECT_EQ(v, real(0));
}

TEST(Lstm, SingleStepByHand) {
  // One feature, one hidden unit, every weight 1, input 1, zero state:
  // each gate pre-activation is 1 (input) + 0 (recurrent) + 1 (bias) = 2.
  const Tensor x({1, 1, 1}, real(1));
  const Tensor h = lstm(x, Tensor({4, 1}, real(1)), Tensor({4, 1}, real(1)), Tensor({4}, real(1)));
  const double s = 1 / (1 + std::exp(-2.0));
  const double c = s * std::tanh(2.0);
  EXPECT_NEAR(h.data()[0], s * std::tanh(c), 1e-6);
}

TEST(Lstm, ZeroHiddenSizeIsAParameterError) {
  EXPECT_THROW(lstm(Tensor({1, 2, 3}), Tensor({0, 3}), Tensor({0, 0}), Tensor({0})), Error);
}

TEST(Activation, ReluAndSigmoid) {
  EXPECT_EQ(values(relu(Tensor::from({-1, 0, 2}))), (std::vector<real>{0, 0, 2}));
  EXPECT_EQ(sigmoid(Tensor::from({0})).data()[0], real(0.5));
  const Tensor s = sigmoid(Tensor::from({-30, -5, 5, 15}));
  for (real v : s.data()) {
    EXPECT_GT(v, real(0));
    EXPECT_LE(v, real(1));
  }
}

TEST(Shapes, FlattenConcatSplit) {
  EXPECT_EQ(flatten(Tensor({2, 3, 4})).shape(), (Shape{2, 12}));
  Tensor a({2, 5}), b({2, 7});
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = real(i);
  for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = real(100 + i);
  const Tensor parts[] = {a, b};
  const Tensor joined = concat(parts);
  EXPECT_EQ(joined.shape(), (Shape{2, 12}));
  const std::size_t widths[] = {5, 7};
  const auto back = split(joined, widths);
  EXPECT_EQ(values(back[0]), values(a));
  EXPECT_EQ(values(back[1]), values(b));
  const Tensor mismatched[] = {Tensor({2, 3}), Tensor({3, 3})};
  EXPECT_THROW(concat(mismatched), DimensionError);
}

TEST(Shapes, CenterCrop) {
  Tensor x({1, 1, 4});
  for (std::size_t i = 0; i < 4; ++i) x.data()[i] = real(i);
  const std::size_t crop[] = {1};
  EXPECT_EQ(values(center_crop(x, crop)), (std::vector<real>{1, 2}));
}

TEST(Shapes, FrameSequence) {
  Tensor x({1, 1, 7});
  for (std::size_t i = 0; i < 7; ++i) x.data()[i] = real(i);
  const Tensor f = frame_sequence(x, 3);
  EXPECT_EQ(f.shape(), (Shape{1, 2, 3}));
  EXPECT_EQ(values(f), (std::vector<real>{0, 1, 2, 3, 4, 5}));
}

TEST(Bce, Values) {
  const Tensor y({1, 1}, real(1));
  EXPECT_NEAR(bce_loss(Tensor({1, 1}, real(0.5)), y).item(), std::log(2.0), 1e-6);
  EXPECT_NEAR(bce_loss(Tensor({1, 1}, real(1)), y).item(), 0, 1e-6);
  EXPECT_THROW(bce_loss(Tensor({1, 1}, real(0.5)), Tensor({1, 1}, real(0.5))), LabelError);
}

TEST(Bce, GradientAtHalf) {
  Tensor p({1, 1}, real(0.5));
  const Tensor y({1, 1}, real(1));
  backward_through(p, [&](const Tensor& t) { return bce_loss(t, y); });
  EXPECT_NEAR(p.grad()[0], -2, 1e-6);
}

TEST(Bce, LogitFormMatchesProbabilityForm) {
  const Tensor z({4, 1}, std::vector<real>{-2, -0.3f, 0.4f, 3});
  const Tensor y({4, 1}, std::vector<real>{0, 1, 0, 1});
  EXPECT_NEAR(bce_with_logits(z, y).item(), bce_loss(sigmoid(z), y).item(), 1e-6);
  // Saturated logits still give a usable gradient.
  Tensor far({1, 1}, real(-80));
  backward_through(far, [&](const Tensor& t) { return bce_with_logits(t, Tensor({1, 1}, real(1))); });
  EXPECT_NEAR(far.grad()[0], -1, 1e-6);
}
