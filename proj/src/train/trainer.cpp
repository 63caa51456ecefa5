#include "voxtr/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "voxtr/core/errors.hpp"
#include "voxtr/core/rng.hpp"
#include "voxtr/train/adamw.hpp"
#include "voxtr/train/checkpoint.hpp"
#include "voxtr/train/metrics.hpp"

namespace voxtr {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

std::string loss_kind_name(LossKind k) {
  return k == LossKind::kDice ? "dice" : "cross_entropy";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "dice") return LossKind::kDice;
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  throw ConfigError("unknown loss kind '" + s + "'");
}

Tensor grid_targets(const VoxelGrid& g) {
  Tensor t({g.num_cells()});
  for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(g.occupancy()[static_cast<size_t>(i)]);
  return t;
}

double field_iou(const Tensor& probs, const VoxelGrid& target, double thresh = 0.5) {
  VoxelField field(target.resolution(), probs.vec());
  return iou(threshold(field, thresh), target);
}

ag::Var batch_mean(const std::vector<ag::Var>& losses) {
  ag::Var sum = losses.front();
  for (size_t i = 1; i < losses.size(); ++i) sum = ag::add(sum, losses[i]);
  return ag::scale(sum, 1.0 / static_cast<double>(losses.size()));
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const std::string& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

// Everything the three loops share: deterministic epoch shuffling and batch
// chunking, the learning-rate schedule, metrics/checkpoint cadence, and the
// non-finite abort. The per-sample work is the only varying part.
class Loop {
 public:
  Loop(const TrainConfig& cfg, long dataset_size, std::string out_dir)
      : cfg_(cfg), n_(dataset_size), out_dir_(std::move(out_dir)) {
    cfg_.validate();
    if (n_ < 1) throw std::invalid_argument("training needs a non-empty dataset");
    std::filesystem::create_directories(out_dir_);
    if (cfg_.mixed_precision) {
      std::fprintf(stderr,
                   "note: mixed_precision requested; this backend computes in double "
                   "precision (the flag is recorded in the checkpoint config)\n");
    }
    opt_ = AdamW(AdamWConfig{cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.weight_decay, 1e-8});
  }

  AdamW& optimizer() { return opt_; }

  // step_fn(batch indices) -> (loss Var over the batch, batch quality scalar,
  // batch object ids). Drives it for max_steps and owns logging/saving.
  template <typename StepFn>
  TrainResult run(ParamStore& params, const nlohmann::json& ckpt_config, StepFn&& step_fn) {
    MetricsWriter metrics(out_dir_ + "/metrics.ndjson");
    TrainResult result;
    result.metrics_path = out_dir_ + "/metrics.ndjson";

    long step = 0;
    long epoch = 0;
    while (step < cfg_.max_steps) {
      Rng shuffle(mix_seed(cfg_.seed, hash_string("epoch-" + std::to_string(epoch))));
      std::vector<long> order = shuffle.permutation(n_);
      for (size_t at = 0; at < order.size() && step < cfg_.max_steps; at += cfg_.batch_size) {
        std::vector<long> batch(order.begin() + static_cast<long>(at),
                                order.begin() + std::min(at + cfg_.batch_size, order.size()));
        ++step;

        params.zero_grads();
        auto [loss, quality, ids] = step_fn(batch);
        const double loss_value = loss->value[0];
        if (!std::isfinite(loss_value)) {
          throw std::runtime_error("non-finite loss at step " + std::to_string(step) +
                                   "; batch objects: " + join_ids(ids));
        }
        ag::backward(loss);
        opt_.step(params, learning_rate_at(step - 1));

        result.steps = step;
        result.final_loss = loss_value;
        result.final_train_iou = quality;
        if (step % cfg_.log_every == 0 || step == cfg_.max_steps) {
          metrics.append({step, loss_value, quality});
        }
        if (cfg_.checkpoint_every > 0 && step % cfg_.checkpoint_every == 0 &&
            step != cfg_.max_steps) {
          save_checkpoint(out_dir_ + "/step-" + std::to_string(step) + ".vxta", ckpt_config, step,
                          params, &opt_);
        }
      }
      ++epoch;
    }

    result.checkpoint_path = out_dir_ + "/final.vxta";
    save_checkpoint(result.checkpoint_path, ckpt_config, step, params, &opt_);
    return result;
  }

 private:
  double learning_rate_at(long completed) const {
    if (!cfg_.cosine_schedule) return cfg_.learning_rate;
    const double frac = static_cast<double>(completed) / static_cast<double>(cfg_.max_steps);
    return cfg_.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  }

  TrainConfig cfg_;
  long n_;
  std::string out_dir_;
  AdamW opt_;
};

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate >= 0.0, "learning_rate must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(max_steps >= 1, "max_steps must be at least 1");
  require(views_per_sample >= 1 && views_per_sample <= 24,
          "views_per_sample must lie in [1, 24]");
  require(log_every >= 1, "log_every must be at least 1");
  require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  require(loss.epsilon > 0.0, "loss epsilon must be positive");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"kind", loss_kind_name(c.kind)}, {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  if (j.contains("kind")) c.kind = loss_kind_from_string(j["kind"].get<std::string>());
  c.epsilon = j.value("epsilon", c.epsilon);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"weight_decay", c.weight_decay},
                     {"batch_size", c.batch_size},
                     {"max_steps", c.max_steps},
                     {"views_per_sample", c.views_per_sample},
                     {"mixed_precision", c.mixed_precision},
                     {"seed", c.seed},
                     {"loss", c.loss},
                     {"cosine_schedule", c.cosine_schedule},
                     {"log_every", c.log_every},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.views_per_sample = j.value("views_per_sample", c.views_per_sample);
  c.mixed_precision = j.value("mixed_precision", c.mixed_precision);
  c.seed = j.value("seed", c.seed);
  if (j.contains("loss")) from_json(j["loss"], c.loss);
  c.cosine_schedule = j.value("cosine_schedule", c.cosine_schedule);
  c.log_every = j.value("log_every", c.log_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

TrainResult train_model(VoxtrModel& model, const SampleSource& data, const TrainConfig& cfg,
                        const std::string& out_dir) {
  Loop loop(cfg, data.size(), out_dir);
  nlohmann::json ckpt_config{{"kind", "model"}, {"model", model.config()}, {"train", cfg}};

  auto step_fn = [&](const std::vector<long>& batch) {
    std::vector<ag::Var> losses;
    std::vector<std::string> ids;
    double iou_sum = 0.0;
    for (long idx : batch) {
      ResolvedSample s = data.resolve(idx, cfg.views_per_sample, cfg.seed);
      ag::Var recon = model.forward(s.views);
      Tensor targets = grid_targets(s.target);
      ag::Var l = cfg.loss.kind == LossKind::kDice
                      ? ag::dice_loss(recon, targets, cfg.loss.epsilon)
                      : ag::ce_loss(recon, targets, cfg.loss.epsilon);
      losses.push_back(l);
      iou_sum += field_iou(recon->value, s.target);
      ids.push_back(s.object_id);
    }
    return std::tuple(batch_mean(losses), iou_sum / static_cast<double>(batch.size()), ids);
  };
  return loop.run(model.params(), ckpt_config, step_fn);
}

TrainResult train_vqvae(VQVae& vae, const SampleSource& data, const TrainConfig& cfg,
                        const std::string& out_dir) {
  Loop loop(cfg, data.size(), out_dir);
  nlohmann::json ckpt_config{{"kind", "vqvae"}, {"vq", vae.config()}, {"train", cfg}};

  auto step_fn = [&](const std::vector<long>& batch) {
    std::vector<ag::Var> losses;
    std::vector<std::string> ids;
    double iou_sum = 0.0;
    for (long idx : batch) {
      VoxelGrid grid = data.target(idx);
      VQVae::Stage1Terms terms = vae.stage1_loss(grid);
      losses.push_back(terms.total);
      iou_sum += field_iou(terms.recon->value, grid);
      ids.push_back(data.object_id(idx));
    }
    return std::tuple(batch_mean(losses), iou_sum / static_cast<double>(batch.size()), ids);
  };
  return loop.run(vae.params(), ckpt_config, step_fn);
}

TrainResult train_code_prior(CodePriorModel& prior, const VQVae& frozen_vae,
                             const SampleSource& data, const TrainConfig& cfg,
                             const std::string& out_dir) {
  Loop loop(cfg, data.size(), out_dir);
  nlohmann::json ckpt_config{{"kind", "code_prior"},
                             {"encoder", prior.encoder_config()},
                             {"decoder", prior.decoder_config()},
                             {"vq", frozen_vae.config()},
                             {"train", cfg}};

  // Stage-1 codes are frozen, so each object's target sequence is fixed for
  // the whole run; compute it once.
  std::map<std::string, std::vector<long>> code_cache;
  auto codes_of = [&](long idx) -> const std::vector<long>& {
    const std::string id = data.object_id(idx);
    auto it = code_cache.find(id);
    if (it == code_cache.end()) {
      it = code_cache.emplace(id, frozen_vae.encode_codes(data.target(idx))).first;
    }
    return it->second;
  };

  auto step_fn = [&](const std::vector<long>& batch) {
    std::vector<ag::Var> losses;
    std::vector<std::string> ids;
    double acc_sum = 0.0;
    for (long idx : batch) {
      ResolvedSample s = data.resolve(idx, cfg.views_per_sample, cfg.seed);
      const std::vector<long>& codes = codes_of(idx);
      ag::Var memory = prior.memory(s.views);
      ag::Var logits = prior.teacher_logits(memory, codes);
      losses.push_back(ag::softmax_xent_mean(logits, codes));

      const long k = logits->value.dim(1);
      long hits = 0;
      for (size_t t = 0; t < codes.size(); ++t) {
        long best = 0;
        for (long j = 1; j < k; ++j) {
          if (logits->value[static_cast<long>(t) * k + j] >
              logits->value[static_cast<long>(t) * k + best]) {
            best = j;
          }
        }
        if (best == codes[t]) ++hits;
      }
      acc_sum += static_cast<double>(hits) / static_cast<double>(codes.size());
      ids.push_back(s.object_id);
    }
    return std::tuple(batch_mean(losses), acc_sum / static_cast<double>(batch.size()), ids);
  };
  return loop.run(prior.params(), ckpt_config, step_fn);
}

}  // namespace voxtr
