#include <gtest/gtest.h>

#include <cmath>

#include "dfrnet/errors.hpp"
#include "dfrnet/global_branch.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace dfrnet;
using dfrnet::testing::gradcheck;
using dfrnet::testing::max_abs_diff;
using dfrnet::testing::seeded_uniform;
using dfrnet::testing::weighted_sum;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GbConfig toy_gb() {
  GbConfig c;
  c.widths = {8, 16, 32, 64, 32, 16, 8};
  c.blocks = {1, 1, 2, 2, 2, 1, 1};
  c.restore_blocks = 2;
  return c;
}

}  // namespace

TEST(Gdfr, EqualInputsGiveFiveQuarters) {
  auto f = seeded_uniform({2, 4, 5, 5}, 1, -2, 2);
  auto st = gdfr(f, f);
  EXPECT_LT(max_abs_diff(st.w_c, torch::full_like(st.w_c, 0.5)), 1e-15);
  EXPECT_LT(max_abs_diff(st.w_s, torch::full_like(st.w_s, 0.5)), 1e-15);
  EXPECT_LT(max_abs_diff(st.f_tilde, 0.5 * f), 1e-15);
  EXPECT_LT(max_abs_diff(st.f_g, 1.25 * f), 1e-6);
}

TEST(Gdfr, ScalarCaseMatchesHandEvaluation) {
  // D = 4, W_c = W_s = sigmoid(4), F~ = 2 sigmoid(4), F_G = (1 - sigmoid(4)) F~ + 2.
  const double s4 = sigmoid(4.0);
  const double expected = (1 - s4) * 2 * s4 + 2;
  auto st = gdfr(torch::full({1, 1, 1, 1}, 2.0, torch::kFloat64), torch::zeros({1, 1, 1, 1}, torch::kFloat64));
  EXPECT_NEAR(st.w_c.item<double>(), s4, 1e-15);
  EXPECT_NEAR(st.f_tilde.item<double>(), 2 * s4, 1e-15);
  EXPECT_NEAR(st.f_g.item<double>(), expected, 1e-12);
  EXPECT_NEAR(st.f_g.item<double>(), 2.035331, 1e-5);
}

TEST(Gdfr, ZeroImageFeatureGivesZero) {
  auto fi = torch::zeros({1, 3, 4, 4}, torch::kFloat64);
  auto fp = seeded_uniform({1, 3, 4, 4}, 2, -3, 3);
  auto st = gdfr(fi, fp);
  EXPECT_EQ(st.f_tilde.abs().max().item<double>(), 0.0);
  EXPECT_EQ(st.f_g.abs().max().item<double>(), 0.0);
}

TEST(Gdfr, ShapesAndRanges) {
  auto fi = seeded_uniform({2, 6, 5, 7}, 3, -1, 1);
  auto fp = seeded_uniform({2, 6, 5, 7}, 4, -1, 1);
  auto st = gdfr(fi, fp);
  EXPECT_EQ(st.w_c.sizes(), (std::vector<int64_t>{2, 6, 1, 1}));
  EXPECT_EQ(st.w_s.sizes(), (std::vector<int64_t>{2, 1, 5, 7}));
  EXPECT_EQ(st.f_g.sizes(), fi.sizes());
  for (const auto& w : {st.w_c, st.w_s}) {
    EXPECT_GT(w.min().item<double>(), 0.0);
    EXPECT_LT(w.max().item<double>(), 1.0);
  }
  EXPECT_THROW(gdfr(fi, fp.narrow(1, 0, 5)), DimensionError);
}

TEST(Gdfr, ResidualIdentityHolds) {
  auto fi = seeded_uniform({2, 5, 6, 6}, 5, -2, 2);
  auto fp = seeded_uniform({2, 5, 6, 6}, 6, -2, 2);
  auto st = gdfr(fi, fp);
  EXPECT_LT(max_abs_diff(st.f_g - fi, (1 - st.w_s) * (st.w_c * fi)), 1e-6);
}

TEST(Gdfr, WeightsSymmetricOutputsNot) {
  auto a = seeded_uniform({1, 4, 6, 6}, 7, -2, 2);
  auto b = seeded_uniform({1, 4, 6, 6}, 8, -2, 2);
  auto ab = gdfr(a, b);
  auto ba = gdfr(b, a);
  EXPECT_TRUE(torch::equal(ab.w_c, ba.w_c));
  EXPECT_TRUE(torch::equal(ab.w_s, ba.w_s));
  EXPECT_FALSE(torch::allclose(ab.f_tilde, ba.f_tilde));
  EXPECT_FALSE(torch::allclose(ab.f_g, ba.f_g));
}

TEST(Gdfr, SpatialMapVariantUsesChannelWeights) {
  auto fi = seeded_uniform({1, 4, 3, 3}, 9, -2, 2);
  auto fp = seeded_uniform({1, 4, 3, 3}, 10, -2, 2);
  auto st = gdfr(fi, fp, /*ws_uses_wc=*/true);
  auto d = (fp - fi).pow(2);
  auto expected = torch::sigmoid((d * st.w_c).mean(1, true));
  EXPECT_LT(max_abs_diff(st.w_s, expected), 1e-15);
  EXPECT_FALSE(torch::allclose(st.w_s, gdfr(fi, fp).w_s));
}

TEST(Gdfr, GradientMatchesFiniteDifferences) {
  auto fi = seeded_uniform({1, 4, 4, 4}, 11, -1, 1).requires_grad_(true);
  auto fp = seeded_uniform({1, 4, 4, 4}, 12, -1, 1).requires_grad_(true);
  auto r = gradcheck([&] { return weighted_sum(gdfr(fi, fp).f_g, 13); }, {fi, fp});
  EXPECT_TRUE(r.ok(1e-4)) << r.max_rel_error << " " << r.worst;
}

TEST(SiameseStage, SharedWeightsGiveEqualAndSwappableOutputs) {
  GlobalBranch gb(toy_gb(), AblationFlags{});
  nn::init_parameters(*gb, 1);
  auto a = torch::randn({1, 8, 8, 8});
  auto b = torch::randn({1, 8, 8, 8});
  auto [x1, y1] = gb->siamese_stage(0, a, a);
  EXPECT_TRUE(torch::equal(x1, y1));
  auto [p, q] = gb->siamese_stage(0, a, b);
  auto [q2, p2] = gb->siamese_stage(0, b, a);
  EXPECT_TRUE(torch::equal(p, p2));
  EXPECT_TRUE(torch::equal(q, q2));
  EXPECT_THROW(gb->siamese_stage(0, a, b.narrow(2, 0, 4)), DimensionError);
}

TEST(SiameseStage, PseudoSiameseTowersDivergeAfterPerturbation) {
  AblationFlags flags;
  flags.siamese = false;
  GlobalBranch gb(toy_gb(), flags);
  EXPECT_FALSE(gb->shared());
  nn::init_parameters(*gb, 2);
  {
    torch::NoGradGuard g;
    for (auto& p : gb->tower_p()->parameters()) p.add_(0.01);
  }
  auto a = torch::randn({1, 8, 8, 8});
  auto [x, y] = gb->siamese_stage(0, a, a);
  EXPECT_FALSE(torch::equal(x, y));
}

TEST(SiameseStage, SharingReducesParameterCount) {
  AblationFlags pseudo;
  pseudo.siamese = false;
  GlobalBranch shared(toy_gb(), AblationFlags{});
  GlobalBranch separate(toy_gb(), pseudo);
  EXPECT_LT(nn::count_parameters(*shared), nn::count_parameters(*separate));
}

TEST(GlobalBranch, ShapeContract) {
  GbConfig c;  // full widths
  GlobalBranch gb(c, AblationFlags{});
  nn::init_parameters(*gb, 3);
  auto i = torch::rand({1, 3, 32, 32});
  auto p = torch::rand({1, 3, 32, 32});
  auto out = gb(i, p);
  EXPECT_EQ(out.j_gb.sizes(), i.sizes());
  const std::vector<int64_t> spatial{32, 16, 8, 4, 8, 16, 32};
  ASSERT_EQ(out.f_g.size(), 7u);
  for (size_t s = 0; s < 7; ++s) {
    EXPECT_EQ(out.f_g[s].sizes(), (std::vector<int64_t>{1, c.widths[s], spatial[s], spatial[s]}));
    EXPECT_EQ(out.f_i[s].sizes(), out.f_g[s].sizes());
    EXPECT_EQ(out.f_p[s].sizes(), out.f_g[s].sizes());
    EXPECT_TRUE(torch::isfinite(out.f_g[s]).all().item<bool>());
  }
  EXPECT_THROW(gb(torch::rand({1, 3, 20, 32}), torch::rand({1, 3, 20, 32})), DimensionError);
}

TEST(GlobalBranch, ZeroWeightsReturnInput) {
  GlobalBranch gb(toy_gb(), AblationFlags{});
  nn::zero_parameters(*gb);
  auto i = torch::rand({1, 3, 16, 16});
  auto out = gb(i, torch::rand({1, 3, 16, 16}));
  EXPECT_TRUE(torch::equal(out.j_gb, i));
}

TEST(GlobalBranch, BothInputsReceiveGradient) {
  GlobalBranch gb(toy_gb(), AblationFlags{});
  nn::init_parameters(*gb, 4);
  auto i = (torch::rand({1, 3, 16, 16}) * 0.6 + 0.2).requires_grad_(true);
  auto p = (torch::rand({1, 3, 16, 16}) * 0.6 + 0.2).requires_grad_(true);
  gb(i, p).j_gb.sum().backward();
  EXPECT_GT(i.grad().abs().sum().item<double>(), 0.0);
  EXPECT_GT(p.grad().abs().sum().item<double>(), 0.0);
}

TEST(GlobalBranch, GdfrOffPassesImageFeature) {
  AblationFlags flags;
  flags.gdfr = false;
  GlobalBranch gb(toy_gb(), flags);
  nn::init_parameters(*gb, 5);
  auto out = gb(torch::rand({1, 3, 16, 16}), torch::rand({1, 3, 16, 16}));
  for (size_t s = 0; s < 7; ++s) EXPECT_TRUE(torch::equal(out.f_g[s], out.f_i[s]));
}
