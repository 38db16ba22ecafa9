#include <gtest/gtest.h>

#include <fstream>

#include "dfrnet/checkpoint.hpp"
#include "dfrnet/errors.hpp"
#include "dfrnet/losses.hpp"
#include "dfrnet/model.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace dfrnet;
using dfrnet::testing::TempDir;
using dfrnet::testing::gradcheck;
using dfrnet::testing::max_abs_diff;
using dfrnet::testing::seeded_uniform;
using dfrnet::testing::weighted_sum;

namespace {

void set_alpha(DfrNet& m, double a) {
  torch::NoGradGuard g;
  m->alpha().fill_(a);
}

}  // namespace

TEST(Fusion, HalfAlphaIsMean) {
  auto m = make_model(ModelConfig::toy(), 1);
  auto a = torch::rand({1, 3, 8, 8});
  auto b = torch::rand({1, 3, 8, 8});
  EXPECT_LT(max_abs_diff(m->fuse(a, b), (a + b) / 2), 1e-7);
}

TEST(Fusion, EndpointsSelectBranch) {
  auto m = make_model(ModelConfig::toy(), 1);
  auto a = torch::rand({1, 3, 8, 8});
  auto b = torch::rand({1, 3, 8, 8});
  set_alpha(m, 1.0);
  EXPECT_TRUE(torch::equal(m->fuse(a, b), a));
  set_alpha(m, 0.0);
  EXPECT_TRUE(torch::equal(m->fuse(a, b), b));
}

TEST(Fusion, PreclampIdentityForAnyAlpha) {
  auto m = make_model(ModelConfig::toy(), 2);
  auto x = torch::rand({1, 3, 16, 16});
  for (double a : {-0.5, 0.3, 1.7}) {
    set_alpha(m, a);
    torch::NoGradGuard g;
    auto out = m(x);
    EXPECT_LT(max_abs_diff(out.j_preclamp, a * out.gb.j_gb + (1 - a) * out.lb.j_lb), 1e-6);
    EXPECT_TRUE(torch::equal(out.j, out.j_preclamp.clamp(0, 1)));
  }
}

TEST(DfrNet, FullConfigShapeContract) {
  auto m = make_model(ModelConfig::paper(), 3);
  torch::NoGradGuard g;
  auto x = torch::rand({1, 3, 64, 64});
  auto out = m(x);
  for (const auto& t : {out.j, out.gb.j_gb, out.lb.j_lb, out.proposal}) {
    EXPECT_EQ(t.sizes(), x.sizes());
    EXPECT_TRUE(torch::isfinite(t).all().item<bool>());
  }
}

TEST(DfrNet, IndivisibleInputThrows) {
  auto m = make_model(ModelConfig::toy(), 3);
  EXPECT_THROW(m(torch::rand({1, 3, 20, 16})), DimensionError);
  EXPECT_THROW(m(torch::rand({1, 1, 16, 16})), DimensionError);
}

TEST(DfrNet, ZeroWeightsReproduceInputEverywhere) {
  DfrNet m(ModelConfig::toy());
  nn::zero_parameters(*m);
  set_alpha(m, 0.5);
  torch::NoGradGuard g;
  auto x = torch::rand({1, 3, 16, 16});
  auto out = m(x);
  EXPECT_TRUE(torch::equal(out.gb.j_gb, x));
  EXPECT_TRUE(torch::equal(out.lb.j_lb, x));
  EXPECT_TRUE(torch::equal(out.j, x));
  ASSERT_EQ(out.lb.j_inter.size(), 6u);
  for (const auto& j : out.lb.j_inter) EXPECT_TRUE(torch::equal(j, area_downsample(x, j.size(2), j.size(3))));
}

TEST(DfrNet, EveryFlagCombinationRuns) {
  auto x = torch::rand({1, 3, 16, 16});
  for (int mask = 0; mask < 128; ++mask) {
    auto c = ModelConfig::toy();
    c.flags.siamese = mask & 1;
    c.flags.l_rd = mask & 2;
    c.flags.gdfr = mask & 4;
    c.flags.daff = mask & 8;
    c.flags.dr = mask & 16;
    c.flags.idrf = mask & 32;
    c.flags.l_ldr = mask & 64;
    auto m = make_model(c, 4);
    torch::NoGradGuard g;
    auto out = m(x);
    EXPECT_EQ(out.j.sizes(), x.sizes()) << mask;
    EXPECT_EQ(out.gb.j_gb.sizes(), x.sizes()) << mask;
    EXPECT_EQ(out.lb.j_lb.sizes(), x.sizes()) << mask;
    EXPECT_TRUE(torch::isfinite(out.j).all().item<bool>()) << mask;
  }
}

TEST(DfrNet, ForwardIsDeterministic) {
  auto a = make_model(ModelConfig::toy(), 5);
  auto b = make_model(ModelConfig::toy(), 5);
  auto x = torch::rand({1, 3, 16, 16});
  torch::NoGradGuard g;
  auto ya = a(x).j;
  EXPECT_TRUE(torch::equal(ya, a(x).j));
  EXPECT_TRUE(torch::equal(ya, b(x).j));
}

TEST(DfrNet, AllTrainableParamsIncludingPigGetGradient) {
  auto m = make_model(ModelConfig::toy(), 6);
  auto x = torch::rand({1, 3, 16, 16}) * 0.6 + 0.2;
  auto target = torch::rand({1, 3, 16, 16});
  IdentityExtractor ex;
  auto out = m(x);
  total_loss(out, target, LossWeights{}, m->config().flags, ex).total_tensor.backward();
  double pig_grad = 0;
  for (auto& p : m->pig()->parameters()) pig_grad += p.grad().abs().sum().item<double>();
  EXPECT_GT(pig_grad, 0.0);
  EXPECT_NE(m->alpha().grad().item<double>(), 0.0);
}

TEST(DfrNet, ToyModelGradientMatchesFiniteDifferences) {
  auto m = make_model(ModelConfig::toy(), 7);
  m->to(torch::kFloat64);
  auto x = seeded_uniform({1, 3, 16, 16}, 8, 0.2, 0.8).requires_grad_(true);
  std::vector<torch::Tensor> wrt{x};
  for (auto& p : m->parameters()) wrt.push_back(p);
  dfrnet::testing::GradCheckOptions o;
  // one coordinate per tensor keeps this under a minute; the floor sits above
  // float64 rounding of an O(10) objective divided by 2*eps
  o.coords_per_tensor = 1;
  o.min_grad = 1e-5;
  auto r = gradcheck([&] { return weighted_sum(m(x).j_preclamp, 9); }, wrt, o);
  EXPECT_TRUE(r.ok(1e-4)) << r.max_rel_error << " " << r.worst << " kinks " << r.kinks << "/" << r.checked;
}

TEST(ParameterCount, DeterministicOnToy) {
  EXPECT_EQ(count_parameters(ModelConfig::toy()), count_parameters(ModelConfig::toy()));
  auto m = make_model(ModelConfig::toy(), 1);
  EXPECT_EQ(count_parameters(ModelConfig::toy()), nn::count_parameters(*m));
}

TEST(ParameterCount, DirectionsOfTheAblationTable) {
  auto with = [](const AblationFlags& f) {
    auto c = ModelConfig::paper();
    c.flags = f;
    return count_parameters(c);
  };
  EXPECT_GT(with(ablation_variant(1).flags), with(ablation_variant(2).flags));
  EXPECT_EQ(with(ablation_variant(7).flags), with(ablation_variant(8).flags));
}

TEST(ParameterCount, FullConfigNearPublishedSize) {
  const double count = static_cast<double>(count_parameters(ModelConfig::paper()));
  EXPECT_NEAR(count / 42.11e6, 1.0, 0.15) << count;
}

TEST(Checkpoint, ModelRoundTripIsBitExact) {
  TempDir dir;
  auto a = make_model(ModelConfig::toy(), 10);
  set_alpha(a, 0.3125);
  Archive ar;
  ar.manifest = ModelConfig::toy().to_kv();
  add_module_tensors(ar, *a);
  write_archive(dir / "m.ckpt", ar);

  auto back = read_archive(dir / "m.ckpt");
  EXPECT_EQ(back.manifest.at("model.gb.widths"), ar.manifest.at("model.gb.widths"));
  auto b = make_model(ModelConfig::toy(), 11);
  load_module_tensors(back, *b);
  auto pa = a->named_parameters();
  auto pb = b->named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i].value(), pb[i].value())) << pa[i].key();
  EXPECT_EQ(b->alpha().item<float>(), 0.3125f);
  auto x = torch::rand({1, 3, 16, 16});
  torch::NoGradGuard g;
  EXPECT_TRUE(torch::equal(a(x).j, b(x).j));
}

TEST(Checkpoint, CorruptFilesAreDataErrors) {
  TempDir dir;
  EXPECT_THROW(read_archive(dir / "missing.ckpt"), DataError);
  {
    std::ofstream(dir / "foreign.ckpt") << "not a checkpoint\n";
  }
  EXPECT_THROW(read_archive(dir / "foreign.ckpt"), DataError);
  Archive ar;
  ar.add("x", torch::rand({4, 4}));
  write_archive(dir / "ok.ckpt", ar);
  auto bytes = dfrnet::testing::read_file(dir / "ok.ckpt");
  {
    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(read_archive(dir / "short.ckpt"), DataError);
  auto m = make_model(ModelConfig::toy(), 1);
  EXPECT_THROW(load_module_tensors(ar, *m), DataError);
}
