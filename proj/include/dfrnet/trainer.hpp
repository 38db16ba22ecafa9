#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dfrnet/config.hpp"
#include "dfrnet/haze_synth.hpp"
#include "dfrnet/losses.hpp"
#include "dfrnet/model.hpp"
#include "dfrnet/optim.hpp"

namespace dfrnet {

struct PatchStage {
  int64_t patch;
  int64_t start;  // first iteration using this patch size
};

struct TrainConfig {
  std::string profile = "desk";
  int64_t total_iters = 3000;
  double lr_max = 1e-4;
  double lr_min = 1e-6;
  AdamWOptions adamw;
  int64_t batch_size = 2;
  std::vector<PatchStage> schedule{{32, 0}, {48, 1000}, {64, 2000}};
  uint64_t seed = 0;
  int64_t checkpoint_interval = 500;  // 0: only the final checkpoint
  int64_t val_interval = 0;           // 0: validate only at the end (when a val set is given)
  int64_t pig_pretrain_steps = 0;
  LossWeights weights;
  std::string extractor;  // archive path; empty selects the seeded random pyramid

  static TrainConfig desk();
  static TrainConfig paper();
  static TrainConfig for_profile(const std::string& name);

  void validate() const;
  KeyValues to_kv() const;
  static TrainConfig from_kv(const KeyValues& kv, TrainConfig base);
  static std::vector<std::string> known_keys();
};

/// Cosine-annealed learning rate for step `iter` in [0, total_iters].
double lr_at(int64_t iter, const TrainConfig& cfg);
/// Patch size of the latest schedule entry whose start is <= iter.
int64_t patch_size_at(int64_t iter, const TrainConfig& cfg);

std::string format_schedule(const std::vector<PatchStage>& schedule);
std::vector<PatchStage> parse_schedule(const std::string& text);

struct LossRow {
  int64_t iter;  // steps completed
  double total, rec, perceptual, rd, ldr, lr, alpha;

  bool operator==(const LossRow&) const = default;
};

std::string loss_csv_header();
std::string loss_csv_row(const LossRow& row);
std::vector<LossRow> read_loss_csv(const std::filesystem::path& path);

/// Everything needed to continue training exactly where it stopped. Batches
/// are a pure function of (seed, iteration), so no extra RNG state is kept.
struct TrainState {
  ModelConfig model_config;
  TrainConfig train_config;
  DfrNet model{nullptr};
  std::unique_ptr<AdamW> optimizer;
  int64_t iteration = 0;
  double best_val_psnr = -1.0;
  int64_t best_val_iter = -1;
};

/// Fresh state: model initialized from the seed, zeroed moments.
TrainState make_train_state(const ModelConfig& model_config, const TrainConfig& train_config);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);
/// Builds a model from a checkpoint (any archive holding param.* tensors and
/// a model config echo).
DfrNet load_model(const std::filesystem::path& path);

struct TrainOptions {
  std::filesystem::path out_dir;          // checkpoints, loss.csv; empty: nothing written
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> pig_checkpoint;
  std::vector<haze::ImagePair> val_pairs;
  int64_t stop_after = -1;                // stop early at this iteration (>= 0)
  std::function<void(const LossRow&)> on_step;
};

struct TrainResult {
  TrainState state;
  std::vector<LossRow> log;  // includes rows restored from a resumed run
};

/// End-to-end optimization loop. Throws NumericError (after writing
/// nan_snapshot.txt in out_dir) when the loss becomes non-finite.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::vector<haze::ImagePair>& train_pairs, const TrainOptions& options);

struct AblationRow {
  int index;
  std::string label;
  double psnr;
  double ssim;
  int64_t params;
};

/// Trains every ablation variant with the same config and data, evaluates it
/// on `eval_pairs` and returns the rows in table order. `base` supplies the
/// architecture; its flags are replaced per row.
std::vector<AblationRow> run_ablation_grid(const ModelConfig& base, const TrainConfig& train_config,
                                           const std::vector<haze::ImagePair>& train_pairs,
                                           const std::vector<haze::ImagePair>& eval_pairs,
                                           const std::function<void(const AblationRow&)>& on_row = {});

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace dfrnet
