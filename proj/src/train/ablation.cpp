#include "voxtr/train/ablation.hpp"

#include <utility>
#include <vector>

#include "voxtr/core/errors.hpp"
#include "voxtr/core/rng.hpp"

namespace voxtr {

namespace {

void check_setup(int setup) {
  if (setup < 1 || setup > 6) {
    throw ConfigError("ablation setup must lie in 1..6, got " + std::to_string(setup));
  }
}

// Aggregates (category, iou) pairs the same way evaluate_model does:
// category means first, then the mean over categories.
EvalReport aggregate(const std::vector<std::pair<std::string, double>>& scored, long views_used,
                     double threshold_at) {
  EvalReport report;
  report.views_used = views_used;
  report.threshold = threshold_at;
  report.sample_count = static_cast<long>(scored.size());
  std::map<std::string, double> sums;
  std::map<std::string, long> counts;
  double example_sum = 0.0;
  for (const auto& [category, score] : scored) {
    sums[category] += score;
    counts[category] += 1;
    example_sum += score;
  }
  double category_sum = 0.0;
  for (const auto& [category, sum] : sums) {
    const double mean = sum / static_cast<double>(counts[category]);
    report.per_category_iou[category] = mean;
    category_sum += mean;
  }
  report.overall_iou = category_sum / static_cast<double>(report.per_category_iou.size());
  report.per_example_iou = example_sum / static_cast<double>(scored.size());
  return report;
}

AblationOutcome run_two_stage(const SampleSource& train_data, const SampleSource& eval_data,
                              const ModelConfig& base_model, const TrainConfig& tcfg,
                              const VQConfig& vq, const std::string& out_dir) {
  AblationOutcome out;
  out.setup = 4;
  out.label = ablation_label(4);

  // Stage 1: the autoencoder sees only voxel grids.
  VQVae vae = VQVae::create(vq, mix_seed(tcfg.seed, hash_string("stage1-init")));
  train_vqvae(vae, train_data, tcfg, out_dir + "/stage1");

  double stage1_sum = 0.0;
  for (long i = 0; i < eval_data.size(); ++i) {
    VoxelGrid grid = eval_data.target(i);
    VoxelField recon = vae.decode_codes(vae.encode_codes(grid));
    stage1_sum += iou(threshold(recon, 0.5), grid);
  }
  out.stage1_iou = stage1_sum / static_cast<double>(eval_data.size());

  // Stage 2: the code prior fits the frozen codes from images.
  CodePriorModel prior = CodePriorModel::create(base_model.encoder, base_model.decoder, vq,
                                                mix_seed(tcfg.seed, hash_string("stage2-init")));
  out.training = train_code_prior(prior, vae, train_data, tcfg, out_dir + "/stage2");

  // Teacher-forced per-token accuracy on the eval split.
  ag::NoGradGuard guard;
  double acc_sum = 0.0;
  std::vector<std::pair<std::string, double>> scored;
  for (long i = 0; i < eval_data.size(); ++i) {
    ResolvedSample s = eval_data.resolve(i, tcfg.views_per_sample, kEvalSeed);
    std::vector<long> codes = vae.encode_codes(s.target);
    ag::Var memory = prior.memory(s.views);

    ag::Var logits = prior.teacher_logits(memory, codes);
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

    // End-to-end: greedy codes through the frozen decoder.
    VoxelField pred = vae.decode_codes(prior.decode_codes_autoregressive(memory));
    scored.emplace_back(s.category, iou(threshold(pred, 0.5), s.target));
  }
  out.stage2_token_accuracy = acc_sum / static_cast<double>(eval_data.size());
  out.report = aggregate(scored, tcfg.views_per_sample, 0.5);
  return out;
}

}  // namespace

std::string ablation_label(int setup) {
  check_setup(setup);
  switch (setup) {
    case 1: return "tiny decoder (1 layer, 1 head)";
    case 2: return "no pretrained encoder";
    case 3: return "ResNet-50 backbone";
    case 4: return "two-stage vector-quantized variant";
    case 5: return "cross-entropy loss";
    default: return "one-layer MLP voxel head";
  }
}

ModelConfig ablation_model_config(int setup, const ModelConfig& base) {
  check_setup(setup);
  ModelConfig cfg = base;
  switch (setup) {
    case 1:
      cfg.decoder.layers = 1;
      cfg.decoder.heads = 1;
      break;
    case 2:
      cfg.encoder.pretrained = false;
      break;
    case 3: {
      const int image = base.encoder.image_size();
      if (image % 32 != 0) {
        throw ConfigError("ResNet-50 backbone needs an image side divisible by 32, got " +
                          std::to_string(image));
      }
      cfg.encoder.variant = EncoderVariant::kResNet50;
      cfg.encoder.patch_size = 32;  // the backbone's effective stride
      cfg.encoder.token_grid = image / 32;
      break;
    }
    case 6:
      cfg.head = VoxelHead::kMlp;
      break;
    default:
      break;  // 4 and 5 leave the model untouched
  }
  cfg.validate();
  return cfg;
}

TrainConfig ablation_train_config(int setup, const TrainConfig& base) {
  check_setup(setup);
  TrainConfig cfg = base;
  if (setup == 5) cfg.loss.kind = LossKind::kCrossEntropy;
  return cfg;
}

AblationOutcome run_ablation(int setup, const SampleSource& train_data,
                             const SampleSource& eval_data, const ModelConfig& base_model,
                             const TrainConfig& base_train, const VQConfig& vq,
                             const std::string& out_dir) {
  check_setup(setup);
  TrainConfig tcfg = ablation_train_config(setup, base_train);
  if (setup == 4) return run_two_stage(train_data, eval_data, base_model, tcfg, vq, out_dir);

  ModelConfig mcfg = ablation_model_config(setup, base_model);
  VoxtrModel model = VoxtrModel::create(mcfg, mix_seed(tcfg.seed, hash_string("model-init")));

  AblationOutcome out;
  out.setup = setup;
  out.label = ablation_label(setup);
  out.training = train_model(model, train_data, tcfg, out_dir);
  out.report = evaluate_model(model, eval_data, tcfg.views_per_sample, 0.5);
  return out;
}

}  // namespace voxtr
