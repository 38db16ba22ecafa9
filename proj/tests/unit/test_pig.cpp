#include <gtest/gtest.h>

#include <numeric>

#include "dfrnet/errors.hpp"
#include "dfrnet/pig.hpp"
#include "test_util.hpp"

using namespace dfrnet;
using dfrnet::testing::TempDir;

namespace {

std::vector<haze::ImagePair> toy_pairs(const TempDir& dir, int64_t n = 4, int64_t size = 32) {
  haze::DatasetOptions o;
  o.n_pairs = n;
  o.height = o.width = size;
  o.seed = 7;
  return haze::load_pairs(haze::generate_dataset(o, dir.path()));
}

double mean_l1(ProposalGenerator& pig, const std::vector<haze::ImagePair>& pairs, bool use_pig) {
  torch::NoGradGuard g;
  double total = 0;
  for (const auto& p : pairs) {
    auto x = p.hazy.unsqueeze(0);
    auto pred = use_pig ? pig(x) : x;
    total += (pred - p.clear.unsqueeze(0)).abs().mean().item<double>();
  }
  return total / static_cast<double>(pairs.size());
}

double window_mean(const std::vector<double>& v, size_t begin, size_t end) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end),
                         0.0) /
         static_cast<double>(end - begin);
}

}  // namespace

TEST(Pig, ShapeAndRange) {
  ProposalGenerator pig(PigConfig{});
  nn::init_parameters(*pig, 1);
  auto x = torch::rand({2, 3, 32, 32});
  auto p = pig(x);
  EXPECT_EQ(p.sizes(), x.sizes());
  EXPECT_GE(p.min().item<double>(), 0.0);
  EXPECT_LE(p.max().item<double>(), 1.0);
}

TEST(Pig, IndivisibleSizesThrow) {
  ProposalGenerator pig(PigConfig{});
  EXPECT_THROW(pig(torch::rand({1, 3, 30, 32})), DimensionError);
  EXPECT_THROW(pig(torch::rand({1, 4, 32, 32})), DimensionError);
}

TEST(Pig, ZeroWeightsGiveInput) {
  ProposalGenerator pig(PigConfig{});
  nn::zero_parameters(*pig);
  auto x = torch::rand({1, 3, 16, 16});
  EXPECT_TRUE(torch::equal(pig(x), x));
}

TEST(Pig, RejectsAsymmetricConfig) {
  PigConfig c;
  c.widths = {16, 32, 64, 32, 8};
  EXPECT_THROW(ProposalGenerator{c}, ParameterError);
  c.widths = {16, 32, 32, 16};
  EXPECT_THROW(ProposalGenerator{c}, ParameterError);
}

TEST(PigPretrain, ZeroStepsIsNoOp) {
  TempDir dir;
  auto pairs = toy_pairs(dir, 2);
  ProposalGenerator pig(PigConfig{});
  nn::init_parameters(*pig, 3);
  std::vector<torch::Tensor> before;
  for (auto& p : pig->parameters()) before.push_back(p.clone());
  PigPretrainOptions o;
  o.steps = 0;
  auto r = pretrain_pig(pig, pairs, o);
  EXPECT_TRUE(r.losses.empty());
  auto after = pig->parameters();
  for (size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(torch::equal(before[i], after[i]));
}

TEST(PigPretrain, EmptyDataIsDataError) {
  ProposalGenerator pig(PigConfig{});
  EXPECT_THROW(pretrain_pig(pig, std::vector<haze::ImagePair>{}, PigPretrainOptions{}), DataError);
  EXPECT_THROW(pretrain_pig(pig, haze::DatasetManifest{}, PigPretrainOptions{}), DataError);
}

TEST(PigPretrain, DeterministicForSeed) {
  TempDir dir;
  auto pairs = toy_pairs(dir, 2);
  auto run = [&] {
    ProposalGenerator pig(PigConfig{});
    nn::init_parameters(*pig, 5);
    PigPretrainOptions o;
    o.steps = 5;
    o.seed = 9;
    pretrain_pig(pig, pairs, o);
    return pig;
  };
  auto a = run();
  auto b = run();
  auto pa = a->parameters();
  auto pb = b->parameters();
  for (size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}

TEST(PigPretrain, LowersDensityOnTrainingPairs) {
  TempDir dir;
  auto pairs = toy_pairs(dir, 4, 32);
  ProposalGenerator pig(PigConfig{});
  nn::init_parameters(*pig, 1);
  PigPretrainOptions o;
  o.steps = 2000;
  o.seed = 2;
  auto r = pretrain_pig(pig, pairs, o);
  ASSERT_EQ(r.losses.size(), 2000u);
  // Smoothed over 100-step windows the loss only goes down at this scale.
  EXPECT_LT(window_mean(r.losses, 1900, 2000), window_mean(r.losses, 0, 100));
  EXPECT_LT(mean_l1(pig, pairs, true), mean_l1(pig, pairs, false));
}
