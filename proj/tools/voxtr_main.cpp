// voxtr: single-image / multi-view voxel reconstruction toolkit.
//
// Verbs: preprocess, toy-data, train, eval, sweep, ablate, predict.
// Every run-shaping verb accepts --config <file.json>; explicit flags beat
// file values, file values beat built-in defaults.

#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxtr/core/errors.hpp"
#include "voxtr/core/rng.hpp"
#include "voxtr/data/dataset.hpp"
#include "voxtr/data/manifest.hpp"
#include "voxtr/model/model.hpp"
#include "voxtr/model/params.hpp"
#include "voxtr/model/vqvae.hpp"
#include "voxtr/train/ablation.hpp"
#include "voxtr/train/checkpoint.hpp"
#include "voxtr/train/data_source.hpp"
#include "voxtr/train/evaluate.hpp"
#include "voxtr/train/predict.hpp"
#include "voxtr/train/trainer.hpp"
#include "voxtr/voxel/binvox.hpp"

namespace {

using nlohmann::json;
using namespace voxtr;

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  return j;
}

// Recursive object merge: values in `patch` win; nested objects merge
// key-by-key instead of being replaced wholesale, so a config file can
// override a single nested field of a preset.
void deep_merge(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key)) {
      deep_merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

ModelConfig preset_by_name(const std::string& name) {
  if (name == "toy") return ModelConfig::toy();
  if (name == "small") return ModelConfig::small();
  if (name == "base") return ModelConfig::base();
  if (name == "base_faithful") return ModelConfig::base_faithful();
  if (name == "resnet") return ModelConfig::resnet();
  throw ConfigError("unknown preset '" + name +
                    "' (expected toy, small, base, base_faithful, or resnet)");
}

// preset (flag > file > "toy"), then the file's "model" object merged on top.
ModelConfig resolve_model(const json& file, const CLI::Option* preset_opt,
                          const std::string& preset_flag) {
  std::string name = "toy";
  if (file.contains("preset")) name = file["preset"].get<std::string>();
  if (preset_opt != nullptr && preset_opt->count() > 0) name = preset_flag;
  json merged = preset_by_name(name);
  if (file.contains("model")) deep_merge(merged, file["model"]);
  ModelConfig cfg = merged.get<ModelConfig>();
  cfg.validate();
  return cfg;
}

VQConfig resolve_vq(const json& file) {
  json merged = VQConfig::toy();
  if (file.contains("vq")) deep_merge(merged, file["vq"]);
  return merged.get<VQConfig>();
}

// Flags shared by train / eval / sweep / ablate that pick the sample source.
struct DataFlags {
  std::string root;
  std::string format = "shapenet";  // or "pix3d"
  std::string split = "train";
  long toy_count = 0;  // > 0 selects the procedural toy dataset
  uint64_t toy_seed = 0;
  int toy_views = 4;

  CLI::Option* root_opt = nullptr;
  CLI::Option* format_opt = nullptr;
  CLI::Option* split_opt = nullptr;
  CLI::Option* toy_opt = nullptr;
  CLI::Option* toy_seed_opt = nullptr;
  CLI::Option* toy_views_opt = nullptr;

  void attach(CLI::App* cmd, const std::string& default_split) {
    split = default_split;
    root_opt = cmd->add_option("--data-root", root, "dataset root directory");
    format_opt =
        cmd->add_option("--format", format, "manifest layout: shapenet or pix3d")
            ->check(CLI::IsMember({"shapenet", "pix3d"}));
    split_opt = cmd->add_option("--split", split, "split name (shapenet manifests)");
    toy_opt = cmd->add_option("--toy", toy_count,
                              "use N in-memory procedural toy objects instead of a data root");
    toy_seed_opt = cmd->add_option("--toy-seed", toy_seed, "toy dataset generator seed");
    toy_views_opt =
        cmd->add_option("--toy-views", toy_views, "rendered views per toy object (1..8)");
  }

  // file["data"] fills whatever the flags left untouched.
  void apply_file(const json& file) {
    if (!file.contains("data")) return;
    const json& d = file["data"];
    auto fill = [&](const CLI::Option* opt, auto& field, const char* key) {
      if (opt->count() == 0 && d.contains(key)) field = d[key].get<std::decay_t<decltype(field)>>();
    };
    fill(root_opt, root, "root");
    fill(format_opt, format, "format");
    fill(split_opt, split, "split");
    fill(toy_opt, toy_count, "toy_count");
    fill(toy_seed_opt, toy_seed, "toy_seed");
    fill(toy_views_opt, toy_views, "toy_views");
  }

  std::unique_ptr<SampleSource> make_source(const ModelConfig& model) const {
    if (toy_count > 0) {
      return std::make_unique<ToySource>(
          make_toy_dataset(toy_count, toy_seed, model.resolution, toy_views));
    }
    if (root.empty()) {
      throw ConfigError("no dataset selected: pass --data-root (or --toy N)");
    }
    std::vector<SampleRecord> records = format == "pix3d"
                                            ? load_pix3d_manifest(root)
                                            : load_shapenet_manifest(root, split);
    PreprocessConfig prep;
    prep.target_size = model.encoder.image_size();
    return std::make_unique<ManifestSource>(std::move(records), prep);
  }
};

TrainConfig resolve_train_base(const json& file) {
  TrainConfig cfg;
  if (file.contains("train")) from_json(file["train"], cfg);
  return cfg;
}

// Training knobs exposed as flags; apply() lays them over the file values.
struct TrainFlags {
  double lr = 0.0;
  long batch_size = 0;
  long max_steps = 0;
  long views = 0;
  uint64_t seed = 0;
  std::string loss;
  long log_every = 0;
  long checkpoint_every = 0;
  bool cosine = false;
  bool mixed_precision = false;

  CLI::Option* lr_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* views_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* loss_opt = nullptr;
  CLI::Option* log_opt = nullptr;
  CLI::Option* ckpt_opt = nullptr;
  CLI::Option* cosine_opt = nullptr;
  CLI::Option* mp_opt = nullptr;

  void attach(CLI::App* cmd) {
    lr_opt = cmd->add_option("--lr", lr, "learning rate");
    batch_opt = cmd->add_option("--batch-size", batch_size, "objects per step");
    steps_opt = cmd->add_option("--max-steps", max_steps, "total optimization steps");
    views_opt = cmd->add_option("--views", views, "views per object during training (V_train)");
    seed_opt = cmd->add_option("--seed", seed, "run seed (shuffle, view draws, model init)");
    loss_opt = cmd->add_option("--loss", loss, "training loss: dice or cross_entropy")
                   ->check(CLI::IsMember({"dice", "cross_entropy"}));
    log_opt = cmd->add_option("--log-every", log_every, "metrics cadence in steps");
    ckpt_opt = cmd->add_option("--checkpoint-every", checkpoint_every,
                               "periodic checkpoint cadence (0 = final only)");
    cosine_opt = cmd->add_flag("--cosine", cosine, "half-cosine learning-rate schedule");
    mp_opt = cmd->add_flag("--mixed-precision", mixed_precision,
                           "record the mixed-precision request (this backend stays in double)");
  }

  TrainConfig apply(TrainConfig cfg) const {
    if (lr_opt->count() > 0) cfg.learning_rate = lr;
    if (batch_opt->count() > 0) cfg.batch_size = batch_size;
    if (steps_opt->count() > 0) cfg.max_steps = max_steps;
    if (views_opt->count() > 0) cfg.views_per_sample = views;
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (loss_opt->count() > 0) from_json(json{{"kind", loss}}, cfg.loss);
    if (log_opt->count() > 0) cfg.log_every = log_every;
    if (ckpt_opt->count() > 0) cfg.checkpoint_every = checkpoint_every;
    if (cosine_opt->count() > 0) cfg.cosine_schedule = cosine;
    if (mp_opt->count() > 0) cfg.mixed_precision = mixed_precision;
    cfg.validate();
    return cfg;
  }
};

VoxtrModel model_from_checkpoint(const CheckpointData& ckpt, const std::string& path) {
  const std::string kind = ckpt.config.value("kind", "");
  if (kind != "model") {
    throw ConfigError("checkpoint '" + path + "' holds a '" + kind +
                      "' artifact, not a reconstruction model");
  }
  ModelConfig cfg = ckpt.config.at("model").get<ModelConfig>();
  return VoxtrModel(cfg, CheckpointData(ckpt).load_params(model_param_specs(cfg)));
}

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2);
  std::printf("%s\n", text.c_str());
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out || !(out << text << "\n")) {
      throw IoError("cannot write report to '" + out_path + "'");
    }
  }
}

void add_preprocess(CLI::App& app) {
  auto* cmd = app.add_subcommand("preprocess", "build and validate a dataset manifest");
  auto root = std::make_shared<std::string>();
  auto format = std::make_shared<std::string>("shapenet");
  auto split = std::make_shared<std::string>("train");
  auto out = std::make_shared<std::string>();
  auto check_voxels = std::make_shared<bool>(false);
  cmd->add_option("--data-root", *root, "dataset root directory")->required();
  cmd->add_option("--format", *format, "manifest layout: shapenet or pix3d")
      ->check(CLI::IsMember({"shapenet", "pix3d"}));
  cmd->add_option("--split", *split, "split name (shapenet manifests)");
  cmd->add_option("--out", *out, "write the record list as JSON to this path");
  cmd->add_flag("--check-voxels", *check_voxels, "parse every voxel file and report failures");

  cmd->callback([=]() {
    std::vector<SampleRecord> records = *format == "pix3d"
                                            ? load_pix3d_manifest(*root)
                                            : load_shapenet_manifest(*root, *split);
    std::map<std::string, long> categories;
    long views = 0;
    for (const SampleRecord& r : records) {
      ++categories[r.category];
      views += static_cast<long>(r.view_paths.size());
    }
    json summary{{"records", records.size()}, {"views", views}, {"categories", categories}};

    if (*check_voxels) {
      json failures = json::array();
      for (const SampleRecord& r : records) {
        try {
          read_binvox_file(r.voxel_path);
        } catch (const std::exception& e) {
          failures.push_back({{"object_id", r.object_id}, {"error", e.what()}});
        }
      }
      summary["voxel_failures"] = failures;
      if (!failures.empty()) {
        emit(summary, "");
        throw IoError(std::to_string(failures.size()) + " voxel file(s) failed to parse");
      }
    }

    if (!out->empty()) {
      json list = json::array();
      for (const SampleRecord& r : records) {
        list.push_back({{"object_id", r.object_id},
                        {"category", r.category},
                        {"view_paths", r.view_paths},
                        {"voxel_path", r.voxel_path}});
      }
      std::ofstream f(*out, std::ios::binary);
      if (!f || !(f << list.dump(2) << "\n")) throw IoError("cannot write '" + *out + "'");
    }
    emit(summary, "");
  });
}

void add_toy_data(CLI::App& app) {
  auto* cmd = app.add_subcommand("toy-data", "generate the procedural toy dataset on disk");
  auto out = std::make_shared<std::string>();
  auto count = std::make_shared<long>(8);
  auto seed = std::make_shared<uint64_t>(0);
  auto resolution = std::make_shared<long>(32);
  auto views = std::make_shared<int>(4);
  cmd->add_option("--out", *out, "output directory")->required();
  cmd->add_option("--count", *count, "number of objects");
  cmd->add_option("--seed", *seed, "generator seed");
  cmd->add_option("--resolution", *resolution, "voxel grid side length");
  cmd->add_option("--views", *views, "rendered views per object (1..8)");

  cmd->callback([=]() {
    write_toy_dataset(*out, *count, *seed, *resolution, *views);
    emit(json{{"out", *out}, {"objects", *count}, {"resolution", *resolution}, {"views", *views}},
         "");
  });
}

void add_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "train a reconstruction model from scratch");
  auto config_path = std::make_shared<std::string>();
  auto preset = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  auto data = std::make_shared<DataFlags>();
  auto train = std::make_shared<TrainFlags>();
  cmd->add_option("--config", *config_path, "JSON config file");
  CLI::Option* preset_opt =
      cmd->add_option("--preset", *preset, "model preset: toy, small, base, base_faithful, resnet");
  cmd->add_option("--out-dir", *out_dir, "checkpoint and metrics directory")->required();
  data->attach(cmd, "train");
  train->attach(cmd);

  cmd->callback([=]() {
    json file = load_config_file(*config_path);
    ModelConfig model_cfg = resolve_model(file, preset_opt, *preset);
    TrainConfig train_cfg = train->apply(resolve_train_base(file));
    data->apply_file(file);
    std::unique_ptr<SampleSource> source = data->make_source(model_cfg);

    VoxtrModel model =
        VoxtrModel::create(model_cfg, mix_seed(train_cfg.seed, hash_string("model-init")));
    std::fprintf(stderr, "training %ld steps on %ld objects (%ld trainable parameters)\n",
                 train_cfg.max_steps, source->size(), count_params(model_cfg));
    TrainResult result = train_model(model, *source, train_cfg, *out_dir);
    emit(json{{"steps", result.steps},
              {"final_loss", result.final_loss},
              {"final_train_iou", result.final_train_iou},
              {"checkpoint", result.checkpoint_path},
              {"metrics", result.metrics_path}},
         "");
  });
}

void add_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  auto config_path = std::make_shared<std::string>();
  auto ckpt_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto views = std::make_shared<long>(1);
  auto threshold = std::make_shared<double>(0.5);
  auto data = std::make_shared<DataFlags>();
  cmd->add_option("--config", *config_path, "JSON config file");
  cmd->add_option("--checkpoint", *ckpt_path, "model checkpoint to evaluate")->required();
  CLI::Option* views_opt = cmd->add_option("--views", *views, "views per object (V_eval)");
  CLI::Option* thresh_opt = cmd->add_option("--threshold", *threshold, "binarization threshold");
  cmd->add_option("--out", *out, "also write the report JSON to this path");
  data->attach(cmd, "test");

  cmd->callback([=]() {
    json file = load_config_file(*config_path);
    if (file.contains("eval")) {
      const json& e = file["eval"];
      if (views_opt->count() == 0 && e.contains("views")) *views = e["views"].get<long>();
      if (thresh_opt->count() == 0 && e.contains("threshold"))
        *threshold = e["threshold"].get<double>();
    }
    data->apply_file(file);

    CheckpointData ckpt = load_checkpoint(*ckpt_path);
    VoxtrModel model = model_from_checkpoint(ckpt, *ckpt_path);
    std::unique_ptr<SampleSource> source = data->make_source(model.config());
    EvalReport report = evaluate_model(model, *source, *views, *threshold);
    json j = report;
    emit(j, *out);
  });
}

// "--checkpoint path" rows are labeled by the V_train recorded in the
// checkpoint; "--checkpoint V=path" overrides the label explicitly.
void add_sweep(CLI::App& app) {
  auto* cmd = app.add_subcommand("sweep", "multi-view table: rows V_train, columns V_eval");
  auto config_path = std::make_shared<std::string>();
  auto ckpts = std::make_shared<std::vector<std::string>>();
  auto eval_views = std::make_shared<std::vector<long>>(std::vector<long>{1, 2, 3, 4, 5, 8});
  auto threshold = std::make_shared<double>(0.5);
  auto out = std::make_shared<std::string>();
  auto data = std::make_shared<DataFlags>();
  cmd->add_option("--config", *config_path, "JSON config file");
  cmd->add_option("--checkpoint", *ckpts, "model checkpoint, plain path or V=path")
      ->required()
      ->take_all();
  cmd->add_option("--eval-views", *eval_views, "evaluation view counts")->delimiter(',');
  cmd->add_option("--threshold", *threshold, "binarization threshold");
  cmd->add_option("--out", *out, "also write the table JSON to this path");
  data->attach(cmd, "test");

  cmd->callback([=]() {
    json file = load_config_file(*config_path);
    data->apply_file(file);

    std::deque<VoxtrModel> storage;
    std::map<long, const VoxtrModel*> models;
    for (const std::string& entry : *ckpts) {
      std::string path = entry;
      long label = -1;
      const size_t eq = entry.find('=');
      if (eq != std::string::npos && eq > 0 &&
          entry.find_first_not_of("0123456789", 0) >= eq) {
        label = std::stol(entry.substr(0, eq));
        path = entry.substr(eq + 1);
      }
      CheckpointData ckpt = load_checkpoint(path);
      if (label < 0) {
        if (!ckpt.config.contains("train")) {
          throw ConfigError("checkpoint '" + path +
                            "' records no training config; label it explicitly as V=path");
        }
        label = ckpt.config["train"].value("views_per_sample", 1L);
      }
      if (models.count(label) > 0) {
        throw ConfigError("two checkpoints share the V_train label " + std::to_string(label));
      }
      storage.push_back(model_from_checkpoint(ckpt, path));
      models[label] = &storage.back();
    }

    std::unique_ptr<SampleSource> source = data->make_source(storage.front().config());
    CrossTable table = multi_view_cross_table(models, *eval_views, *source, *threshold);
    json j = table;
    emit(j, *out);
  });
}

void add_ablate(CLI::App& app) {
  auto* cmd = app.add_subcommand("ablate", "train and evaluate one ablation setup");
  auto config_path = std::make_shared<std::string>();
  auto preset = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  auto setup = std::make_shared<int>(0);
  auto data = std::make_shared<DataFlags>();
  auto train = std::make_shared<TrainFlags>();
  cmd->add_option("--config", *config_path, "JSON config file");
  CLI::Option* preset_opt =
      cmd->add_option("--preset", *preset, "model preset: toy, small, base, base_faithful, resnet");
  cmd->add_option("--setup", *setup, "ablation setup id (1..6)")->required();
  cmd->add_option("--out-dir", *out_dir, "checkpoint and metrics directory")->required();
  data->attach(cmd, "train");
  train->attach(cmd);

  cmd->callback([=]() {
    json file = load_config_file(*config_path);
    ModelConfig model_cfg = resolve_model(file, preset_opt, *preset);
    TrainConfig train_cfg = train->apply(resolve_train_base(file));
    VQConfig vq = resolve_vq(file);
    data->apply_file(file);
    std::unique_ptr<SampleSource> source = data->make_source(model_cfg);

    AblationOutcome outcome =
        run_ablation(*setup, *source, *source, model_cfg, train_cfg, vq, *out_dir);
    json j{{"setup", outcome.setup},
           {"label", outcome.label},
           {"report", outcome.report},
           {"final_loss", outcome.training.final_loss},
           {"checkpoint", outcome.training.checkpoint_path}};
    if (outcome.stage1_iou >= 0.0) {
      j["stage1_iou"] = outcome.stage1_iou;
      j["stage2_token_accuracy"] = outcome.stage2_token_accuracy;
    }
    emit(j, "");
  });
}

void add_predict(CLI::App& app) {
  auto* cmd = app.add_subcommand("predict", "reconstruct one object from 1..20 images");
  auto ckpt_path = std::make_shared<std::string>();
  auto images = std::make_shared<std::vector<std::string>>();
  auto out = std::make_shared<std::string>();
  auto probabilities = std::make_shared<std::string>();
  auto threshold = std::make_shared<double>(0.5);
  cmd->add_option("--checkpoint", *ckpt_path, "model checkpoint")->required();
  cmd->add_option("images", *images, "input view images (PNG)")->required();
  cmd->add_option("--out", *out, "output binvox path")->required();
  cmd->add_option("--probabilities", *probabilities,
                  "also write the raw probability field to this archive path");
  cmd->add_option("--threshold", *threshold, "binarization threshold");

  cmd->callback([=]() {
    CheckpointData ckpt = load_checkpoint(*ckpt_path);
    VoxtrModel model = model_from_checkpoint(ckpt, *ckpt_path);
    PredictRequest request;
    request.image_paths = *images;
    request.threshold = *threshold;
    request.out_path = *out;
    request.probabilities_path = *probabilities;
    VoxelGrid grid = predict_to_file(model, request);
    emit(json{{"out", *out},
              {"resolution", grid.resolution()},
              {"occupied", grid.count_occupied()},
              {"threshold", *threshold}},
         "");
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxtr: transformer voxel reconstruction toolkit"};
  app.require_subcommand(1);
  add_preprocess(app);
  add_toy_data(app);
  add_train(app);
  add_eval(app);
  add_sweep(app);
  add_ablate(app);
  add_predict(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
