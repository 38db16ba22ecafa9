// dfrnet command line: dataset synthesis, training, evaluation, inference
// and inspection. Exit codes: 0 ok, 1 usage, 2 data/io, 3 numeric.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "dfrnet/batch.hpp"
#include "dfrnet/checkpoint.hpp"
#include "dfrnet/errors.hpp"
#include "dfrnet/haze_synth.hpp"
#include "dfrnet/image_io.hpp"
#include "dfrnet/metrics.hpp"
#include "dfrnet/model.hpp"
#include "dfrnet/pig.hpp"
#include "dfrnet/rng.hpp"
#include "dfrnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace dfrnet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string profile = "desk";
  std::string config;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--profile", c.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--config", c.config, "key = value config file (model.* / train.* keys)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "seed (falls back to DFRNET_SEED)");
}

std::optional<uint64_t> env_seed() {
  const char* s = std::getenv("DFRNET_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParameterError(std::string("DFRNET_SEED is not an unsigned integer: ") + s);
  }
}

// Profile defaults, then the config file, then the seed.
std::pair<ModelConfig, TrainConfig> resolve(const Common& c) {
  auto model = c.profile == "paper" ? ModelConfig::paper() : ModelConfig::toy();
  auto train = TrainConfig::for_profile(c.profile);
  if (!c.config.empty()) {
    auto kv = KeyValues::load(c.config);
    auto known = ModelConfig::known_keys();
    for (const auto& k : TrainConfig::known_keys()) known.push_back(k);
    kv.reject_unknown(known);
    model = ModelConfig::from_kv(kv, model);
    train = TrainConfig::from_kv(kv, train);
  }
  if (c.seed) {
    train.seed = *c.seed;
  } else if (auto s = env_seed()) {
    train.seed = *s;
  }
  model.validate();
  train.validate();
  return {model, train};
}

uint64_t plain_seed(const std::optional<uint64_t>& flag) {
  if (flag) return *flag;
  return env_seed().value_or(0);
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ParameterError("--beta-range expects lo:hi, got '" + text + "'");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ParameterError("--beta-range expects numbers, got '" + text + "'");
  }
}

torch::Tensor crop_with_warning(const torch::Tensor& image, const std::string& name) {
  auto cropped = center_crop_to_multiple(image, ModelConfig::kSpatialMultiple);
  if (cropped.size(1) != image.size(1) || cropped.size(2) != image.size(2)) {
    std::fprintf(stderr, "warning: %s is %lldx%lld, center-cropped to %lldx%lld\n", name.c_str(),
                 static_cast<long long>(image.size(2)), static_cast<long long>(image.size(1)),
                 static_cast<long long>(cropped.size(2)), static_cast<long long>(cropped.size(1)));
  }
  if (cropped.size(1) == 0 || cropped.size(2) == 0) throw DataError(name + " is smaller than 8x8");
  return cropped;
}

void require_finite(const torch::Tensor& t, const std::string& what) {
  if (!torch::isfinite(t).all().item<bool>()) throw NumericError("non-finite values in " + what);
}

// ---- subcommands ----

struct SynthArgs {
  int64_t n = 4;
  int64_t size = 64;
  std::string beta = "0.05:0.25";
  std::optional<uint64_t> seed;
  std::string out;
  std::string split = "train";
};

int run_synth(const SynthArgs& a) {
  haze::DatasetOptions o;
  o.n_pairs = a.n;
  o.height = o.width = a.size;
  std::tie(o.beta_lo, o.beta_hi) = parse_range(a.beta);
  o.seed = plain_seed(a.seed);
  o.split = a.split;
  auto m = haze::generate_dataset(o, a.out);
  double beta = 0;
  for (const auto& e : m.entries) beta += e.beta_mean;
  std::printf("wrote %zu pairs (%lldx%lld, seed %llu, mean beta %.4f) to %s\n", m.size(),
              static_cast<long long>(a.size), static_cast<long long>(a.size), static_cast<unsigned long long>(o.seed),
              beta / static_cast<double>(m.size()), a.out.c_str());
  return kOk;
}

struct PigArgs {
  Common common;
  std::string data, out;
  std::optional<int64_t> steps;
};

int run_pretrain_pig(const PigArgs& a) {
  auto [model, train] = resolve(a.common);
  auto manifest = haze::load_manifest(a.data);
  ProposalGenerator pig(model.pig);
  nn::init_parameters(*pig, derive_seed(train.seed, kInitStream));
  PigPretrainOptions o;
  o.steps = a.steps.value_or(train.pig_pretrain_steps > 0 ? train.pig_pretrain_steps : 2000);
  o.seed = derive_seed(train.seed, kPigStream);
  o.lr = train.lr_max;
  o.weight_decay = train.adamw.weight_decay;
  o.batch_size = train.batch_size;
  o.patch = train.schedule.front().patch;
  auto r = pretrain_pig(pig, manifest, o);
  Archive ar;
  ar.manifest = model.to_kv();
  ar.manifest.set("pig.steps", std::to_string(o.steps));
  add_module_tensors(ar, *pig, "param.pig.");
  write_archive(a.out, ar);
  std::printf("pretrained PIG for %lld steps, final L1 %.6f -> %s\n", static_cast<long long>(o.steps),
              r.losses.empty() ? 0.0 : r.losses.back(), a.out.c_str());
  return kOk;
}

struct TrainArgs {
  Common common;
  std::string data, out, resume, pig, val;
  bool no_pretrain = false;
  std::optional<int64_t> iters;
  int64_t stop_after = -1;
  int64_t log_every = 100;
};

int run_train(const TrainArgs& a) {
  auto [model, train_cfg] = resolve(a.common);
  if (a.iters) {
    train_cfg.total_iters = *a.iters;
    train_cfg.validate();
  }
  if (a.no_pretrain) train_cfg.pig_pretrain_steps = 0;
  if (!a.resume.empty() && !fs::exists(a.resume)) throw DataError("no checkpoint at " + a.resume);
  if (!a.pig.empty() && !fs::exists(a.pig)) throw DataError("no PIG checkpoint at " + a.pig);
  auto pairs = haze::load_pairs(haze::load_manifest(a.data));

  TrainOptions o;
  o.out_dir = a.out;
  o.stop_after = a.stop_after;
  if (!a.resume.empty()) o.resume = a.resume;
  if (!a.pig.empty()) o.pig_checkpoint = a.pig;
  if (!a.val.empty()) o.val_pairs = haze::load_pairs(haze::load_manifest(a.val));
  o.on_step = [&](const LossRow& r) {
    if (r.iter % a.log_every == 0 || r.iter == train_cfg.total_iters) {
      std::printf("iter %6lld  total %.6f  rec %.6f  perc %.6f  rd %.4f  ldr %.6f  lr %.3e  alpha %.4f\n",
                  static_cast<long long>(r.iter), r.total, r.rec, r.perceptual, r.rd, r.ldr, r.lr, r.alpha);
      std::fflush(stdout);
    }
  };
  auto result = train(model, train_cfg, pairs, o);
  auto ev = metrics::evaluate(result.state.model, pairs);
  std::printf("done at iter %lld: train PSNR %.4f dB (hazy %.4f dB), SSIM %.4f\n",
              static_cast<long long>(result.state.iteration), ev.mean_psnr, ev.mean_baseline_psnr, ev.mean_ssim);
  std::printf("checkpoint: %s\n", (fs::path(a.out) / "latest.ckpt").c_str());
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, out;
};

int run_eval(const EvalArgs& a) {
  auto model = load_model(a.checkpoint);
  auto r = metrics::evaluate(model, haze::load_manifest(a.data));
  const auto summary = metrics::results_summary(r);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    io::write_text_atomic(fs::path(a.out) / "results.csv", metrics::results_csv(r));
    io::write_text_atomic(fs::path(a.out) / "summary.txt", summary);
  }
  std::fputs(summary.c_str(), stdout);
  return kOk;
}

struct DehazeArgs {
  std::string checkpoint, out;
  std::vector<std::string> inputs;
  bool branches = false;
};

int run_dehaze(const DehazeArgs& a) {
  auto model = load_model(a.checkpoint);
  model->eval();
  fs::create_directories(a.out);
  torch::NoGradGuard no_grad;
  for (const auto& in : a.inputs) {
    auto image = crop_with_warning(io::read_png(in), in);
    auto out = model(image.unsqueeze(0));
    require_finite(out.j, in);
    const auto stem = fs::path(in).stem().string();
    const fs::path dir(a.out);
    io::write_png(dir / (stem + ".png"), out.j[0]);
    if (a.branches) {
      io::write_png(dir / (stem + "_gb.png"), out.gb.j_gb[0]);
      io::write_png(dir / (stem + "_lb.png"), out.lb.j_lb[0]);
      io::write_png(dir / (stem + "_proposal.png"), out.proposal[0]);
    }
    std::printf("%s -> %s\n", in.c_str(), (dir / (stem + ".png")).c_str());
  }
  return kOk;
}

struct InspectArgs {
  std::string checkpoint, input, out;
};

void write_heatmap(const fs::path& path, const torch::Tensor& map) {
  auto m = map.detach().to(torch::kFloat32)[0];  // (1,H,W)
  const double lo = m.min().item<double>();
  const double hi = m.max().item<double>();
  auto norm = hi > lo ? (m - lo) / (hi - lo) : torch::zeros_like(m);
  io::write_png(path, norm);
  std::printf("%-28s min %.6g max %.6g\n", path.filename().c_str(), lo, hi);
}

int run_inspect(const InspectArgs& a) {
  auto model = load_model(a.checkpoint);
  model->eval();
  const auto& flags = model->config().flags;
  auto image = crop_with_warning(io::read_png(a.input), a.input);
  fs::create_directories(a.out);
  torch::NoGradGuard no_grad;
  auto out = model(image.unsqueeze(0));
  if (!flags.dr) std::fprintf(stderr, "warning: checkpoint has DR disabled; local features start from zeros\n");
  if (!flags.gdfr) {
    std::fprintf(stderr, "warning: checkpoint has GDFR disabled; W_s maps are recomputed for display only\n");
  }
  const fs::path dir(a.out);
  for (size_t s = 0; s < out.gb.f_i.size(); ++s) {
    auto ws = out.gb.w_s[s].defined() ? out.gb.w_s[s] : gdfr(out.gb.f_i[s], out.gb.f_p[s]).w_s;
    write_heatmap(dir / ("ws_stage" + std::to_string(s + 1) + ".png"), ws);
  }
  for (size_t s = 0; s < out.lb.local_mean.size(); ++s) {
    write_heatmap(dir / ("local_stage" + std::to_string(s + 1) + ".png"), out.lb.local_mean[s]);
  }
  return kOk;
}

struct AblateArgs {
  Common common;
  std::string data, eval_data, out;
  int64_t iters = 100;
};

int run_ablate(const AblateArgs& a) {
  auto [model, train_cfg] = resolve(a.common);
  train_cfg.total_iters = a.iters;
  train_cfg.checkpoint_interval = 0;
  train_cfg.validate();
  auto pairs = haze::load_pairs(haze::load_manifest(a.data));
  auto eval_pairs = a.eval_data.empty() ? pairs : haze::load_pairs(haze::load_manifest(a.eval_data));
  auto rows = run_ablation_grid(model, train_cfg, pairs, eval_pairs, [](const AblationRow& r) {
    std::printf("row %d %-10s PSNR %.3f dB  SSIM %.4f  params %lld\n", r.index, r.label.c_str(), r.psnr, r.ssim,
                static_cast<long long>(r.params));
    std::fflush(stdout);
  });
  const auto table = ablation_table(rows);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    io::write_text_atomic(fs::path(a.out) / "ablation.csv", ablation_csv(rows));
    io::write_text_atomic(fs::path(a.out) / "ablation.txt", table);
  }
  std::fputs(table.c_str(), stdout);
  return kOk;
}

struct ParamsArgs {
  Common common;
  bool all = false;
};

int run_params(const ParamsArgs& a) {
  auto [model, train] = resolve(a.common);
  (void)train;
  if (!a.all) {
    const auto n = count_parameters(model);
    std::printf("%lld parameters (%.2f M)\n", static_cast<long long>(n), static_cast<double>(n) / 1e6);
    return kOk;
  }
  for (const auto& v : ablation_variants()) {
    auto m = model;
    m.flags = v.flags;
    const auto n = count_parameters(m);
    std::printf("%d %-10s %lld (%.2f M)\n", v.index, v.label.c_str(), static_cast<long long>(n),
                static_cast<double>(n) / 1e6);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"DFR-Net single-image dehazing"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic hazy/clear dataset");
  c_synth->add_option("--n", synth.n, "number of pairs")->check(CLI::PositiveNumber);
  c_synth->add_option("--size", synth.size, "image side in pixels")->check(CLI::Range(int64_t{11}, int64_t{4096}));
  c_synth->add_option("--beta-range", synth.beta, "scattering coefficient range lo:hi");
  c_synth->add_option("--seed", synth.seed, "seed (falls back to DFRNET_SEED)");
  c_synth->add_option("--split", synth.split, "split label written to the manifest");
  c_synth->add_option("--out", synth.out, "output directory")->required();

  PigArgs pig;
  auto* c_pig = app.add_subcommand("pretrain-pig", "pretrain the proposal generator");
  add_common(c_pig, pig.common);
  c_pig->add_option("--data", pig.data, "dataset directory")->required();
  c_pig->add_option("--out", pig.out, "output checkpoint")->required();
  c_pig->add_option("--steps", pig.steps, "optimizer steps")->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train DFR-Net");
  add_common(c_train, tr.common);
  c_train->add_option("--data", tr.data, "training dataset directory")->required();
  c_train->add_option("--out", tr.out, "output directory")->required();
  c_train->add_option("--resume", tr.resume, "checkpoint to resume from");
  c_train->add_option("--pig", tr.pig, "pretrained PIG checkpoint");
  c_train->add_flag("--no-pretrain", tr.no_pretrain, "skip PIG pretraining");
  c_train->add_option("--val", tr.val, "validation dataset directory");
  c_train->add_option("--iters", tr.iters, "override total iterations")->check(CLI::PositiveNumber);
  c_train->add_option("--stop-after", tr.stop_after, "checkpoint and stop at this iteration")
      ->check(CLI::NonNegativeNumber);
  c_train->add_option("--log-every", tr.log_every, "progress line interval")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  c_eval->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  c_eval->add_option("--data", ev.data, "dataset directory")->required();
  c_eval->add_option("--out", ev.out, "directory for results.csv and summary.txt");

  DehazeArgs dh;
  auto* c_dehaze = app.add_subcommand("dehaze", "dehaze PNG images");
  c_dehaze->add_option("--checkpoint", dh.checkpoint, "model checkpoint")->required();
  c_dehaze->add_option("--input", dh.inputs, "input PNG(s)")->required();
  c_dehaze->add_option("--out", dh.out, "output directory")->required();
  c_dehaze->add_flag("--emit-branches", dh.branches, "also write GB, LB and proposal images");

  InspectArgs in;
  auto* c_inspect = app.add_subcommand("inspect", "dump W_s and local-density heatmaps");
  c_inspect->add_option("--checkpoint", in.checkpoint, "model checkpoint")->required();
  c_inspect->add_option("--input", in.input, "input PNG")->required();
  c_inspect->add_option("--out", in.out, "output directory")->required();

  AblateArgs ab;
  auto* c_ablate = app.add_subcommand("ablate", "train and score every ablation row");
  add_common(c_ablate, ab.common);
  c_ablate->add_option("--data", ab.data, "training dataset directory")->required();
  c_ablate->add_option("--eval-data", ab.eval_data, "evaluation dataset (default: training set)");
  c_ablate->add_option("--iters", ab.iters, "iterations per row")->check(CLI::PositiveNumber);
  c_ablate->add_option("--out", ab.out, "directory for ablation.csv / ablation.txt");

  ParamsArgs pa;
  auto* c_params = app.add_subcommand("params", "count model parameters");
  add_common(c_params, pa.common);
  c_params->add_flag("--all", pa.all, "one line per ablation row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth);
    if (c_pig->parsed()) return run_pretrain_pig(pig);
    if (c_train->parsed()) return run_train(tr);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_dehaze->parsed()) return run_dehaze(dh);
    if (c_inspect->parsed()) return run_inspect(in);
    if (c_ablate->parsed()) return run_ablate(ab);
    if (c_params->parsed()) return run_params(pa);
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  } catch (const c10::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what_without_backtrace());
    return kNumeric;
  }
  return kUsage;
}
