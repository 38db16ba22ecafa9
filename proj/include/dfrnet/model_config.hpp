#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfrnet/config.hpp"

namespace dfrnet {

/// Proposal-image U-Net: odd number of stages, symmetric widths.
struct PigConfig {
  std::vector<int64_t> widths{16, 32, 64, 32, 16};
  int64_t blocks_per_stage = 2;

  void validate() const;
};

/// Global branch: 7 Siamese stages. widths[0] is the embedding width C.
struct GbConfig {
  std::vector<int64_t> widths{32, 64, 128, 256, 128, 64, 32};
  std::vector<int64_t> blocks{2, 2, 3, 4, 3, 2, 2};
  int64_t restore_blocks = 4;
  // W_s from CAP(W_c * D) instead of CAP(D).
  bool ws_uses_wc = false;

  void validate() const;
};

/// Local branch: 7 stages over (image width + local_channels) features.
struct LbConfig {
  std::vector<int64_t> widths{32, 64, 128, 256, 128, 64, 32};
  std::vector<int64_t> blocks{4, 6, 8, 10, 6, 8, 8};
  int64_t local_channels = 4;
  // 1-based stage indices followed by an IDRF module; never stage 7.
  std::vector<int64_t> idrf_stages{1, 2, 3, 4, 5, 6};
  int64_t restore_blocks = 4;
  int64_t irb_blocks = 2;
  // DAFF internals: Conv+LReLU layers applied to the cross-branch feature,
  // and Conv+LReLU layers ahead of each CSDA's channel attention.
  int64_t daff_guide_depth = 2;
  int64_t csda_body_depth = 3;
  double leaky_slope = 0.2;

  void validate() const;
  int64_t stage_channels(int64_t stage) const { return widths.at(stage) + local_channels; }
};

/// Ablation toggles. All true is the default (full) model.
struct AblationFlags {
  bool siamese = true;
  bool l_rd = true;
  bool gdfr = true;
  bool daff = true;
  bool dr = true;
  bool idrf = true;
  bool l_ldr = true;

  bool operator==(const AblationFlags&) const = default;
};

/// One row of the ablation table: cumulative flag sets in table order.
struct AblationVariant {
  int index;  // 1-based row number
  std::string label;
  AblationFlags flags;
};

/// The eight cumulative rows: base, +Siamese, +L_RD, +GDFR, +DAFF, +DR,
/// +IDRF, +L_LDR.
std::vector<AblationVariant> ablation_variants();
const AblationVariant& ablation_variant(int index);

struct ModelConfig {
  PigConfig pig;
  GbConfig gb;
  LbConfig lb;
  AblationFlags flags;
  double alpha_init = 0.5;

  /// Full-size architecture (C = 32, C_L = 4, block counts as published).
  static ModelConfig paper();
  /// Desk-scale architecture: C = 8, C_L = 2, roughly halved block counts.
  static ModelConfig toy();

  void validate() const;

  /// Required divisor of input height/width (three 2x downsamplings).
  static constexpr int64_t kSpatialMultiple = 8;

  KeyValues to_kv() const;
  /// Overrides fields of `base` with the `model.*` keys present in `kv`.
  static ModelConfig from_kv(const KeyValues& kv, ModelConfig base);
  static std::vector<std::string> known_keys();
};

}  // namespace dfrnet
