#include <gtest/gtest.h>

#include "dfrnet/errors.hpp"
#include "dfrnet/nn_core.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace dfrnet;
using namespace dfrnet::nn;
using dfrnet::testing::gradcheck;
using dfrnet::testing::seeded_uniform;
using dfrnet::testing::weighted_sum;

namespace {

template <typename M>
M init_double(M m, uint64_t seed) {
  init_parameters(*m, seed);
  m->to(torch::kFloat64);
  return m;
}

}  // namespace

TEST(AttentionWidth, FloorsAtOne) {
  EXPECT_EQ(attention_width(32, 8), 4);
  EXPECT_EQ(attention_width(36, 8), 4);
  EXPECT_EQ(attention_width(4, 8), 1);
}

TEST(ResBlock, PreservesShape) {
  ResBlock b(BlockSpec{32});
  init_parameters(*b, 1);
  auto y = b(torch::rand({1, 32, 16, 16}));
  EXPECT_EQ(y.sizes(), (std::vector<int64_t>{1, 32, 16, 16}));
  EXPECT_TRUE(torch::isfinite(y).all().item<bool>());
}

TEST(ResBlock, ZeroWeightsGiveIdentity) {
  ResBlock b(BlockSpec{8});
  zero_parameters(*b);
  auto x = torch::randn({2, 8, 6, 6});
  EXPECT_TRUE(torch::equal(b(x), x));
}

TEST(ResBlock, ChannelMismatchThrows) {
  ResBlock b(BlockSpec{8});
  EXPECT_THROW(b(torch::rand({1, 4, 6, 6})), DimensionError);
}

TEST(ResBlock, GradientMatchesFiniteDifferences) {
  auto b = init_double(ResBlock(BlockSpec{8}), 3);
  auto x = seeded_uniform({1, 8, 4, 4}, 4, -1, 1).requires_grad_(true);
  std::vector<torch::Tensor> wrt{x};
  for (auto& p : b->parameters()) wrt.push_back(p);
  auto r = gradcheck([&] { return weighted_sum(b(x), 5); }, wrt);
  EXPECT_TRUE(r.ok(1e-4)) << r.max_rel_error << " " << r.worst;
}

TEST(ResBlock, ParameterCountIsStable) {
  auto count = [] { return count_parameters(*ResBlock(BlockSpec{32})); };
  // conv1 + conv2: 2 * (32*32*9 + 32); CA: 32*4+4 + 4*32+32; PA: 32*4+4 + 4*1+1
  const int64_t expected = 2 * (32 * 32 * 9 + 32) + (32 * 4 + 4 + 4 * 32 + 32) + (32 * 4 + 4 + 4 + 1);
  EXPECT_EQ(count(), expected);
  EXPECT_EQ(count(), count());
}

TEST(PixelShuffle, UnshuffleChannelOrderIsRowMajor) {
  auto x = torch::tensor({1.0, 2.0, 3.0, 4.0}).view({1, 1, 2, 2});  // [[a,b],[c,d]]
  auto y = pixel_unshuffle2(x);
  ASSERT_EQ(y.sizes(), (std::vector<int64_t>{1, 4, 1, 1}));
  for (int k = 0; k < 4; ++k) EXPECT_EQ(y[0][k][0][0].item<double>(), k + 1.0);
}

TEST(PixelShuffle, MutualInverses) {
  auto x = torch::randn({1, 4, 2, 2});
  EXPECT_TRUE(torch::equal(pixel_shuffle2(pixel_unshuffle2(x)), x));
  EXPECT_TRUE(torch::equal(pixel_unshuffle2(pixel_shuffle2(x)), x));
  auto big = torch::randn({2, 3, 8, 6});
  auto sorted_in = std::get<0>(big.flatten().sort());
  auto sorted_out = std::get<0>(pixel_unshuffle2(big).flatten().sort());
  EXPECT_TRUE(torch::equal(sorted_in, sorted_out));
}

TEST(PixelShuffle, OddSizesThrow) {
  EXPECT_THROW(pixel_unshuffle2(torch::rand({1, 2, 3, 4})), DimensionError);
  EXPECT_THROW(pixel_shuffle2(torch::rand({1, 3, 2, 2})), DimensionError);
}

TEST(Downsample, ShapeContract) {
  Downsample d(32, 64);
  EXPECT_EQ(d(torch::rand({1, 32, 16, 16})).sizes(), (std::vector<int64_t>{1, 64, 8, 8}));
  EXPECT_THROW(d(torch::rand({1, 32, 15, 16})), DimensionError);
}

TEST(Upsample, ShapeContract) {
  Upsample u(64, 32);
  EXPECT_EQ(u(torch::rand({1, 64, 8, 8})).sizes(), (std::vector<int64_t>{1, 32, 16, 16}));
}

TEST(Upsample, IdentityConvThenUnshuffleRecoversInput) {
  Upsample u(8, 2);
  {
    torch::NoGradGuard g;
    u->conv()->weight.copy_(torch::eye(8).view({8, 8, 1, 1}));
    u->conv()->bias.zero_();
  }
  auto x = torch::randn({1, 8, 4, 4});
  EXPECT_TRUE(torch::equal(pixel_unshuffle2(u(x)), x));
}

TEST(Upsample, GradientMatchesFiniteDifferences) {
  auto u = init_double(Upsample(4, 2), 6);
  auto x = seeded_uniform({1, 4, 4, 4}, 7, -1, 1).requires_grad_(true);
  std::vector<torch::Tensor> wrt{x};
  for (auto& p : u->parameters()) wrt.push_back(p);
  auto r = gradcheck([&] { return weighted_sum(u(x), 8); }, wrt);
  EXPECT_TRUE(r.ok(1e-4)) << r.max_rel_error << " " << r.worst;
}

TEST(MultiScaleEmbed, ShapeContract) {
  MultiScaleEmbed m(4);
  EXPECT_EQ(m(torch::rand({1, 3, 32, 32})).sizes(), (std::vector<int64_t>{1, 4, 32, 32}));
  EXPECT_THROW(m(torch::rand({1, 4, 32, 32})), DimensionError);
}

TEST(MultiScaleEmbed, ZeroInputGivesSpatiallyConstantOutput) {
  MultiScaleEmbed m(4);
  init_parameters(*m, 2);
  {
    torch::NoGradGuard g;
    for (auto& p : m->parameters()) {
      if (p.dim() == 1) p.uniform_(-1, 1);
    }
  }
  auto y = m(torch::zeros({1, 3, 12, 12}));
  auto ref = y.index({torch::indexing::Slice(), torch::indexing::Slice(), 0, 0}).unsqueeze(-1).unsqueeze(-1);
  EXPECT_TRUE(torch::allclose(y, ref.expand_as(y), 0, 1e-6));
  EXPECT_GT(ref.abs().max().item<double>(), 0.0);
}

TEST(MultiScaleEmbed, TranslationEquivariantWithCircularPadding) {
  MultiScaleEmbed m(4, torch::kCircular);
  init_parameters(*m, 3);
  m->to(torch::kFloat64);
  auto x = seeded_uniform({1, 3, 16, 16}, 4);
  auto shifted = torch::roll(x, {2, 2}, {2, 3});
  auto lhs = m(shifted);
  auto rhs = torch::roll(m(x), {2, 2}, {2, 3});
  EXPECT_LT(dfrnet::testing::max_abs_diff(lhs, rhs), 1e-12);
}

TEST(RestoreBlock, ShapeContracts) {
  RestoreBlock rb4(64, 4);
  EXPECT_EQ(rb4(torch::rand({1, 64, 16, 16})).sizes(), (std::vector<int64_t>{1, 3, 16, 16}));
  RestoreBlock rb2(8, 2);
  EXPECT_EQ(rb2(torch::rand({1, 8, 8, 8})).sizes(), (std::vector<int64_t>{1, 3, 8, 8}));
}

TEST(RestoreBlock, GradientMatchesFiniteDifferences) {
  auto rb = init_double(RestoreBlock(8, 2), 9);
  auto x = seeded_uniform({1, 8, 4, 4}, 10, -1, 1).requires_grad_(true);
  std::vector<torch::Tensor> wrt{x};
  for (auto& p : rb->parameters()) wrt.push_back(p);
  auto r = gradcheck([&] { return weighted_sum(rb(x), 11); }, wrt);
  EXPECT_TRUE(r.ok(1e-4)) << r.max_rel_error << " " << r.worst;
}

TEST(Init, DeterministicTruncatedNormal) {
  ResBlock a(BlockSpec{16}), b(BlockSpec{16});
  init_parameters(*a, 42);
  init_parameters(*b, 42);
  auto pa = a->parameters();
  auto pb = b->parameters();
  for (size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    if (pa[i].dim() >= 2) {
      const double sigma = 1.0 / std::sqrt(static_cast<double>(pa[i].numel() / pa[i].size(0)));
      EXPECT_LE(pa[i].abs().max().item<double>(), 2 * sigma + 1e-6);
    } else {
      EXPECT_EQ(pa[i].abs().max().item<double>(), 0.0);
    }
  }
}

TEST(Blocks, FiniteOnFiniteInputs) {
  ResBlock b(BlockSpec{16});
  init_parameters(*b, 5);
  auto y = b(torch::randn({3, 16, 8, 8}) * 10);
  EXPECT_EQ(y.size(0), 3);
  EXPECT_TRUE(torch::isfinite(y).all().item<bool>());
}
