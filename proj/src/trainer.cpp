#include "dfrnet/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfrnet/batch.hpp"
#include "dfrnet/checkpoint.hpp"
#include "dfrnet/errors.hpp"
#include "dfrnet/image_io.hpp"
#include "dfrnet/metrics.hpp"
#include "dfrnet/rng.hpp"

namespace dfrnet {
namespace {


void require(bool ok, const std::string& message) {
  if (!ok) throw ParameterError(message);
}

std::unique_ptr<FeatureExtractor> make_extractor(const TrainConfig& cfg) {
  if (cfg.extractor.empty()) return std::make_unique<ConvPyramidExtractor>();
  return ConvPyramidExtractor::load(cfg.extractor);
}

}  // namespace

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.lr_max = 1e-3;
  return c;
}

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.profile = "paper";
  c.total_iters = 600000;
  c.batch_size = 8;
  c.schedule = {{128, 0}, {160, 200000}, {192, 400000}};
  c.checkpoint_interval = 10000;
  c.val_interval = 10000;
  c.pig_pretrain_steps = 20000;
  return c;
}

TrainConfig TrainConfig::for_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ParameterError("unknown profile '" + name + "' (expected desk or paper)");
}

void TrainConfig::validate() const {
  require(total_iters >= 1, "train.total_iters must be >= 1");
  require(lr_max > 0 && lr_min > 0 && lr_min <= lr_max, "need 0 < lr_min <= lr_max");
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(!schedule.empty() && schedule.front().start == 0, "patch schedule must start at iteration 0");
  for (size_t i = 0; i < schedule.size(); ++i) {
    require(schedule[i].patch > 0 && schedule[i].patch % ModelConfig::kSpatialMultiple == 0,
            "patch sizes must be positive multiples of 8");
    if (i > 0) {
      require(schedule[i].start > schedule[i - 1].start, "patch schedule starts must increase");
      require(schedule[i].patch >= schedule[i - 1].patch, "patch sizes must be non-decreasing");
    }
  }
  require(checkpoint_interval >= 0 && val_interval >= 0 && pig_pretrain_steps >= 0, "intervals must be >= 0");
  require(weights.perceptual >= 0 && weights.rd >= 0 && weights.ldr >= 0, "loss weights must be >= 0");
  require(adamw.beta1 >= 0 && adamw.beta1 < 1 && adamw.beta2 >= 0 && adamw.beta2 < 1, "AdamW betas must lie in [0,1)");
}

KeyValues TrainConfig::to_kv() const {
  KeyValues kv;
  kv.set("train.profile", profile);
  kv.set("train.total_iters", std::to_string(total_iters));
  kv.set("train.lr_max", format_double(lr_max));
  kv.set("train.lr_min", format_double(lr_min));
  kv.set("train.beta1", format_double(adamw.beta1));
  kv.set("train.beta2", format_double(adamw.beta2));
  kv.set("train.eps", format_double(adamw.eps));
  kv.set("train.weight_decay", format_double(adamw.weight_decay));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.schedule", format_schedule(schedule));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.checkpoint_interval", std::to_string(checkpoint_interval));
  kv.set("train.val_interval", std::to_string(val_interval));
  kv.set("train.pig_pretrain_steps", std::to_string(pig_pretrain_steps));
  kv.set("train.lambda1", format_double(weights.perceptual));
  kv.set("train.lambda2", format_double(weights.rd));
  kv.set("train.lambda3", format_double(weights.ldr));
  kv.set("train.extractor", extractor.empty() ? "default" : extractor);
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv, TrainConfig c) {
  c.profile = kv.get_string("train.profile", c.profile);
  c.total_iters = kv.get_int("train.total_iters", c.total_iters);
  c.lr_max = kv.get_double("train.lr_max", c.lr_max);
  c.lr_min = kv.get_double("train.lr_min", c.lr_min);
  c.adamw.beta1 = kv.get_double("train.beta1", c.adamw.beta1);
  c.adamw.beta2 = kv.get_double("train.beta2", c.adamw.beta2);
  c.adamw.eps = kv.get_double("train.eps", c.adamw.eps);
  c.adamw.weight_decay = kv.get_double("train.weight_decay", c.adamw.weight_decay);
  c.batch_size = kv.get_int("train.batch_size", c.batch_size);
  if (kv.has("train.schedule")) c.schedule = parse_schedule(kv.at("train.schedule"));
  if (kv.has("train.seed")) c.seed = static_cast<uint64_t>(parse_int(kv.at("train.seed"), "train.seed"));
  c.checkpoint_interval = kv.get_int("train.checkpoint_interval", c.checkpoint_interval);
  c.val_interval = kv.get_int("train.val_interval", c.val_interval);
  c.pig_pretrain_steps = kv.get_int("train.pig_pretrain_steps", c.pig_pretrain_steps);
  c.weights.perceptual = kv.get_double("train.lambda1", c.weights.perceptual);
  c.weights.rd = kv.get_double("train.lambda2", c.weights.rd);
  c.weights.ldr = kv.get_double("train.lambda3", c.weights.ldr);
  if (kv.has("train.extractor")) {
    const auto& e = kv.at("train.extractor");
    c.extractor = e == "default" ? "" : e;
  }
  c.validate();
  return c;
}

std::vector<std::string> TrainConfig::known_keys() {
  std::vector<std::string> keys;
  const auto kv = TrainConfig{}.to_kv();
  for (const auto& [k, v] : kv.entries()) keys.push_back(k);
  return keys;
}

double lr_at(int64_t iter, const TrainConfig& cfg) { return cosine_lr(iter, cfg.total_iters, cfg.lr_max, cfg.lr_min); }

int64_t patch_size_at(int64_t iter, const TrainConfig& cfg) {
  int64_t patch = cfg.schedule.front().patch;
  for (const auto& s : cfg.schedule) {
    if (s.start <= iter) patch = s.patch;
  }
  return patch;
}

std::string format_schedule(const std::vector<PatchStage>& schedule) {
  std::string out;
  for (const auto& s : schedule) {
    if (!out.empty()) out += ",";
    out += std::to_string(s.patch) + "@" + std::to_string(s.start);
  }
  return out;
}

std::vector<PatchStage> parse_schedule(const std::string& text) {
  std::vector<PatchStage> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto at = item.find('@');
    if (at == std::string::npos) throw ParameterError("schedule entries look like <patch>@<start>, got '" + item + "'");
    out.push_back({parse_int(item.substr(0, at), "schedule patch"), parse_int(item.substr(at + 1), "schedule start")});
  }
  if (out.empty()) throw ParameterError("empty patch schedule");
  return out;
}

std::string loss_csv_header() { return "iter,total,rec,perceptual,rd,ldr,lr,alpha\n"; }

std::string loss_csv_row(const LossRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(r.iter),
                r.total, r.rec, r.perceptual, r.rd, r.ldr, r.lr, r.alpha);
  return buf;
}

std::vector<LossRow> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<LossRow> rows;
  std::string line;
  std::getline(in, line);
  if (line + "\n" != loss_csv_header()) throw DataError(path.string() + " is not a loss log");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRow r{};
    long long it = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &it, &r.total, &r.rec, &r.perceptual, &r.rd,
                    &r.ldr, &r.lr, &r.alpha) != 8) {
      throw DataError("malformed loss row in " + path.string() + ": " + line);
    }
    r.iter = it;
    rows.push_back(r);
  }
  return rows;
}

TrainState make_train_state(const ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  TrainState st;
  st.model_config = model_config;
  st.train_config = train_config;
  st.model = make_model(model_config, derive_seed(train_config.seed, kInitStream));
  st.optimizer = std::make_unique<AdamW>(named_parameters_of(*st.model), train_config.adamw);
  return st;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& st) {
  Archive a;
  a.manifest = st.model_config.to_kv();
  a.manifest.merge(st.train_config.to_kv());
  a.manifest.set("state.iteration", std::to_string(st.iteration));
  a.manifest.set("state.adam_steps", std::to_string(st.optimizer->step_count()));
  a.manifest.set("state.alpha", format_double(st.model->alpha().item<double>()));
  a.manifest.set("state.seed", std::to_string(st.train_config.seed));
  a.manifest.set("state.best_val_psnr", format_double(st.best_val_psnr));
  a.manifest.set("state.best_val_iter", std::to_string(st.best_val_iter));
  add_module_tensors(a, *st.model);
  const auto& params = st.optimizer->params();
  for (size_t i = 0; i < params.size(); ++i) {
    a.add("adam.m." + params[i].first, st.optimizer->first_moments()[i]);
    a.add("adam.v." + params[i].first, st.optimizer->second_moments()[i]);
  }
  write_archive(path, a);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  auto a = read_archive(path);
  TrainState st;
  st.model_config = ModelConfig::from_kv(a.manifest, ModelConfig{});
  st.train_config = TrainConfig::from_kv(a.manifest, TrainConfig{});
  st.model = DfrNet(st.model_config);
  load_module_tensors(a, *st.model);
  st.optimizer = std::make_unique<AdamW>(named_parameters_of(*st.model), st.train_config.adamw);
  torch::NoGradGuard no_grad;
  const auto& params = st.optimizer->params();
  for (size_t i = 0; i < params.size(); ++i) {
    st.optimizer->first_moments()[i].copy_(a.get("adam.m." + params[i].first));
    st.optimizer->second_moments()[i].copy_(a.get("adam.v." + params[i].first));
  }
  st.optimizer->set_step_count(a.manifest.get_int("state.adam_steps", 0));
  st.iteration = a.manifest.get_int("state.iteration", 0);
  st.best_val_psnr = a.manifest.get_double("state.best_val_psnr", -1.0);
  st.best_val_iter = a.manifest.get_int("state.best_val_iter", -1);
  return st;
}

DfrNet load_model(const std::filesystem::path& path) {
  auto a = read_archive(path);
  DfrNet model(ModelConfig::from_kv(a.manifest, ModelConfig{}));
  load_module_tensors(a, *model);
  return model;
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& cfg,
                  const std::vector<haze::ImagePair>& train_pairs, const TrainOptions& options) {
  if (train_pairs.empty()) throw DataError("training set is empty");
  TrainResult result;
  auto& st = result.state;
  const auto& out_dir = options.out_dir;
  const bool write = !out_dir.empty();
  if (write) std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / "loss.csv";

  if (options.resume) {
    st = load_checkpoint(*options.resume);
    if (st.model_config.to_kv().entries() != model_config.to_kv().entries()) {
      throw ParameterError("checkpoint model config differs from the requested one");
    }
    if (st.train_config.to_kv().entries() != cfg.to_kv().entries()) {
      throw ParameterError("checkpoint training config differs from the requested one");
    }
    if (write && std::filesystem::exists(csv_path)) {
      for (const auto& r : read_loss_csv(csv_path)) {
        if (r.iter <= st.iteration) result.log.push_back(r);
      }
    }
  } else {
    st = make_train_state(model_config, cfg);
    if (options.pig_checkpoint) {
      load_module_tensors(read_archive(*options.pig_checkpoint), *st.model->pig(), "param.pig.");
    } else if (cfg.pig_pretrain_steps > 0) {
      PigPretrainOptions po;
      po.steps = cfg.pig_pretrain_steps;
      po.seed = derive_seed(cfg.seed, kPigStream);
      po.lr = cfg.lr_max;
      po.weight_decay = cfg.adamw.weight_decay;
      po.batch_size = cfg.batch_size;
      po.patch = cfg.schedule.front().patch;
      pretrain_pig(st.model->pig(), train_pairs, po);
    }
  }

  auto extractor = make_extractor(cfg);
  auto save_all = [&](bool csv) {
    if (!write) return;
    save_checkpoint(out_dir / "latest.ckpt", st);
    if (csv) {
      std::string text = loss_csv_header();
      for (const auto& r : result.log) text += loss_csv_row(r);
      io::write_text_atomic(csv_path, text);
    }
  };
  auto validate = [&]() {
    if (options.val_pairs.empty()) return;
    const auto r = metrics::evaluate(st.model, options.val_pairs);
    if (r.mean_psnr > st.best_val_psnr) {
      st.best_val_psnr = r.mean_psnr;
      st.best_val_iter = st.iteration;
      if (write) save_checkpoint(out_dir / "best.ckpt", st);
    }
  };

  const auto stop = options.stop_after >= 0 ? std::min(options.stop_after, cfg.total_iters) : cfg.total_iters;
  const auto dtype = st.model->alpha().scalar_type();
  st.model->train();
  for (int64_t i = st.iteration; i < stop; ++i) {
    const double lr = lr_at(i, cfg);
    auto batch = sample_batch(train_pairs, cfg.batch_size, patch_size_at(i, cfg), cfg.seed, i);
    st.optimizer->zero_grad();
    auto out = st.model->forward(batch.hazy.to(dtype));
    auto rep = total_loss(out, batch.clear.to(dtype), cfg.weights, model_config.flags, *extractor);
    if (!std::isfinite(rep.total)) {
      if (write) {
        std::ostringstream snap;
        snap << "iteration = " << i << "\nlr = " << format_double(lr) << "\nbatch_ids =";
        for (const auto& id : batch.ids) snap << " " << id;
        snap << "\nrec = " << rep.rec << "\nperceptual = " << rep.perceptual << "\nrd = " << rep.rd
             << "\nldr = " << rep.ldr << "\n";
        io::write_text_atomic(out_dir / "nan_snapshot.txt", snap.str());
        save_checkpoint(out_dir / "nan_state.ckpt", st);
      }
      throw NumericError("non-finite loss at iteration " + std::to_string(i) + " (lr " + format_double(lr) + ")");
    }
    rep.total_tensor.backward();
    st.optimizer->step(lr);
    st.iteration = i + 1;
    LossRow row{st.iteration, rep.total, rep.rec, rep.perceptual, rep.rd, rep.ldr, lr, st.model->alpha().item<double>()};
    result.log.push_back(row);
    if (options.on_step) options.on_step(row);
    if (cfg.val_interval > 0 && st.iteration % cfg.val_interval == 0) validate();
    if (cfg.checkpoint_interval > 0 && st.iteration % cfg.checkpoint_interval == 0) save_all(true);
  }
  if (st.iteration == cfg.total_iters && (cfg.val_interval == 0 || st.iteration % cfg.val_interval != 0)) validate();
  save_all(true);
  return result;
}

std::vector<AblationRow> run_ablation_grid(const ModelConfig& base, const TrainConfig& train_config,
                                           const std::vector<haze::ImagePair>& train_pairs,
                                           const std::vector<haze::ImagePair>& eval_pairs,
                                           const std::function<void(const AblationRow&)>& on_row) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants()) {
    auto mc = base;
    mc.flags = v.flags;
    auto trained = train(mc, train_config, train_pairs, TrainOptions{});
    auto eval = metrics::evaluate(trained.state.model, eval_pairs);
    rows.push_back({v.index, v.label, eval.mean_psnr, eval.mean_ssim, nn::count_parameters(*trained.state.model)});
    if (on_row) on_row(rows.back());
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "index,setting,psnr_db,ssim,params,params_m\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.4f,%.6f,%lld,%.4f\n", r.index, r.label.c_str(), r.psnr, r.ssim,
                  static_cast<long long>(r.params), static_cast<double>(r.params) / 1e6);
    out += buf;
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "  #  setting      PSNR (dB)     SSIM   Params (M)\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%3d  %-10s  %9.3f  %7.4f  %11.4f\n", r.index, r.label.c_str(), r.psnr, r.ssim,
                  static_cast<double>(r.params) / 1e6);
    out += buf;
  }
  return out;
}

}  // namespace dfrnet
