#include "dfrnet/model_config.hpp"

#include <algorithm>

#include "dfrnet/errors.hpp"

namespace dfrnet {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ParameterError(message);
}

bool symmetric(const std::vector<int64_t>& v) {
  return std::equal(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.rbegin());
}

bool all_positive(const std::vector<int64_t>& v) {
  return std::all_of(v.begin(), v.end(), [](int64_t x) { return x > 0; });
}

}  // namespace

void PigConfig::validate() const {
  require(widths.size() % 2 == 1 && widths.size() >= 3, "pig.widths needs an odd number (>= 3) of stages");
  require(symmetric(widths), "pig.widths must be symmetric");
  require(all_positive(widths), "pig.widths must be positive");
  require(blocks_per_stage >= 0, "pig.blocks must be >= 0");
}

void GbConfig::validate() const {
  require(widths.size() == 7 && blocks.size() == 7, "global branch needs exactly 7 stages");
  require(symmetric(widths), "gb.widths must be symmetric");
  require(all_positive(widths), "gb.widths must be positive");
  require(std::all_of(blocks.begin(), blocks.end(), [](int64_t b) { return b >= 0; }), "gb.blocks must be >= 0");
  require(restore_blocks >= 0, "gb.restore_blocks must be >= 0");
}

void LbConfig::validate() const {
  require(widths.size() == 7 && blocks.size() == 7, "local branch needs exactly 7 stages");
  require(symmetric(widths), "lb.widths must be symmetric");
  require(all_positive(widths), "lb.widths must be positive");
  require(std::all_of(blocks.begin(), blocks.end(), [](int64_t b) { return b >= 0; }), "lb.blocks must be >= 0");
  require(local_channels >= 1, "lb.local_channels must be >= 1");
  for (auto s : idrf_stages) require(s >= 1 && s <= 6, "lb.idrf_stages entries must lie in 1..6");
  require(restore_blocks >= 0 && irb_blocks >= 0, "restore block depths must be >= 0");
  require(daff_guide_depth >= 1, "lb.daff_guide_depth must be >= 1");
  require(csda_body_depth >= 0, "lb.csda_body_depth must be >= 0");
}

std::vector<AblationVariant> ablation_variants() {
  std::vector<AblationVariant> rows;
  AblationFlags f{false, false, false, false, false, false, false};
  rows.push_back({1, "base", f});
  f.siamese = true;
  rows.push_back({2, "+Siamese", f});
  f.l_rd = true;
  rows.push_back({3, "+L_RD", f});
  f.gdfr = true;
  rows.push_back({4, "+GDFR", f});
  f.daff = true;
  rows.push_back({5, "+DAFF", f});
  f.dr = true;
  rows.push_back({6, "+DR", f});
  f.idrf = true;
  rows.push_back({7, "+IDRF", f});
  f.l_ldr = true;
  rows.push_back({8, "+L_LDR", f});
  return rows;
}

const AblationVariant& ablation_variant(int index) {
  static const auto rows = ablation_variants();
  if (index < 1 || index > static_cast<int>(rows.size())) {
    throw ParameterError("ablation variant must be in 1.." + std::to_string(rows.size()));
  }
  return rows[static_cast<size_t>(index - 1)];
}

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.pig.widths = {8, 16, 32, 16, 8};
  c.pig.blocks_per_stage = 1;
  c.gb.widths = {8, 16, 32, 64, 32, 16, 8};
  c.gb.blocks = {1, 1, 2, 2, 2, 1, 1};
  c.gb.restore_blocks = 2;
  c.lb.widths = c.gb.widths;
  c.lb.blocks = {2, 3, 4, 5, 3, 4, 4};
  c.lb.local_channels = 2;
  c.lb.restore_blocks = 2;
  return c;
}

void ModelConfig::validate() const {
  pig.validate();
  gb.validate();
  lb.validate();
  // The branches exchange stage features, so their image widths must agree.
  require(gb.widths == lb.widths, "gb.widths and lb.widths must match");
}

KeyValues ModelConfig::to_kv() const {
  KeyValues kv;
  kv.set("model.pig.widths", join_ints(pig.widths));
  kv.set("model.pig.blocks", std::to_string(pig.blocks_per_stage));
  kv.set("model.gb.widths", join_ints(gb.widths));
  kv.set("model.gb.blocks", join_ints(gb.blocks));
  kv.set("model.gb.restore_blocks", std::to_string(gb.restore_blocks));
  kv.set("model.gb.ws_uses_wc", gb.ws_uses_wc ? "true" : "false");
  kv.set("model.lb.widths", join_ints(lb.widths));
  kv.set("model.lb.blocks", join_ints(lb.blocks));
  kv.set("model.lb.local_channels", std::to_string(lb.local_channels));
  kv.set("model.lb.idrf_stages", lb.idrf_stages.empty() ? "none" : join_ints(lb.idrf_stages));
  kv.set("model.lb.restore_blocks", std::to_string(lb.restore_blocks));
  kv.set("model.lb.irb_blocks", std::to_string(lb.irb_blocks));
  kv.set("model.lb.daff_guide_depth", std::to_string(lb.daff_guide_depth));
  kv.set("model.lb.csda_body_depth", std::to_string(lb.csda_body_depth));
  kv.set("model.lb.leaky_slope", format_double(lb.leaky_slope));
  kv.set("model.flags.siamese", flags.siamese ? "true" : "false");
  kv.set("model.flags.l_rd", flags.l_rd ? "true" : "false");
  kv.set("model.flags.gdfr", flags.gdfr ? "true" : "false");
  kv.set("model.flags.daff", flags.daff ? "true" : "false");
  kv.set("model.flags.dr", flags.dr ? "true" : "false");
  kv.set("model.flags.idrf", flags.idrf ? "true" : "false");
  kv.set("model.flags.l_ldr", flags.l_ldr ? "true" : "false");
  kv.set("model.alpha_init", format_double(alpha_init));
  return kv;
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv, ModelConfig c) {
  c.pig.widths = kv.get_ints("model.pig.widths", c.pig.widths);
  c.pig.blocks_per_stage = kv.get_int("model.pig.blocks", c.pig.blocks_per_stage);
  c.gb.widths = kv.get_ints("model.gb.widths", c.gb.widths);
  c.gb.blocks = kv.get_ints("model.gb.blocks", c.gb.blocks);
  c.gb.restore_blocks = kv.get_int("model.gb.restore_blocks", c.gb.restore_blocks);
  c.gb.ws_uses_wc = kv.get_bool("model.gb.ws_uses_wc", c.gb.ws_uses_wc);
  c.lb.widths = kv.get_ints("model.lb.widths", c.lb.widths);
  c.lb.blocks = kv.get_ints("model.lb.blocks", c.lb.blocks);
  c.lb.local_channels = kv.get_int("model.lb.local_channels", c.lb.local_channels);
  if (kv.has("model.lb.idrf_stages")) {
    const auto& v = kv.at("model.lb.idrf_stages");
    c.lb.idrf_stages = v == "none" ? std::vector<int64_t>{} : parse_ints(v, "model.lb.idrf_stages");
  }
  c.lb.restore_blocks = kv.get_int("model.lb.restore_blocks", c.lb.restore_blocks);
  c.lb.irb_blocks = kv.get_int("model.lb.irb_blocks", c.lb.irb_blocks);
  c.lb.daff_guide_depth = kv.get_int("model.lb.daff_guide_depth", c.lb.daff_guide_depth);
  c.lb.csda_body_depth = kv.get_int("model.lb.csda_body_depth", c.lb.csda_body_depth);
  c.lb.leaky_slope = kv.get_double("model.lb.leaky_slope", c.lb.leaky_slope);
  c.flags.siamese = kv.get_bool("model.flags.siamese", c.flags.siamese);
  c.flags.l_rd = kv.get_bool("model.flags.l_rd", c.flags.l_rd);
  c.flags.gdfr = kv.get_bool("model.flags.gdfr", c.flags.gdfr);
  c.flags.daff = kv.get_bool("model.flags.daff", c.flags.daff);
  c.flags.dr = kv.get_bool("model.flags.dr", c.flags.dr);
  c.flags.idrf = kv.get_bool("model.flags.idrf", c.flags.idrf);
  c.flags.l_ldr = kv.get_bool("model.flags.l_ldr", c.flags.l_ldr);
  c.alpha_init = kv.get_double("model.alpha_init", c.alpha_init);
  c.validate();
  return c;
}

std::vector<std::string> ModelConfig::known_keys() {
  std::vector<std::string> keys;
  const auto kv = ModelConfig{}.to_kv();
  for (const auto& [k, v] : kv.entries()) keys.push_back(k);
  return keys;
}

}  // namespace dfrnet
