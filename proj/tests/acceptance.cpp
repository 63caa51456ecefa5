// Exit-gate checks for the toolkit, one line of output per check:
//   [PASS] 3. binvox codec: round-trip, fixture, malformed rejection (0.1 s)
// Run with no arguments for the full list, or pass check ids (1..11) to run
// a subset, e.g. `acceptance 6 10`. Exits non-zero if any selected check
// fails. Paths to fixtures are repo-relative; run from the repository root
// (ctest does this automatically).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voxtr/core/errors.hpp"
#include "voxtr/core/rng.hpp"
#include "voxtr/data/dataset.hpp"
#include "voxtr/loss/losses.hpp"
#include "voxtr/model/model.hpp"
#include "voxtr/model/params.hpp"
#include "voxtr/model/vit.hpp"
#include "voxtr/model/vqvae.hpp"
#include "voxtr/train/ablation.hpp"
#include "voxtr/train/checkpoint.hpp"
#include "voxtr/train/data_source.hpp"
#include "voxtr/train/evaluate.hpp"
#include "voxtr/train/metrics.hpp"
#include "voxtr/train/trainer.hpp"
#include "voxtr/voxel/binvox.hpp"
#include "voxtr/voxel/voxel_grid.hpp"

namespace fs = std::filesystem;
using namespace voxtr;

namespace {

// A failed expectation inside a check; carries the reason up to the runner.
struct CheckFailure {
  std::string reason;
};

void expect(bool ok, const std::string& reason) {
  if (!ok) throw CheckFailure{reason};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path("/tmp") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

VoxelGrid random_grid(long res, Rng& rng, double fill) {
  VoxelGrid g(res);
  for (auto& v : g.occupancy()) v = rng.uniform() < fill ? 1 : 0;
  return g;
}

Tensor random_image(long side, Rng& rng) {
  Tensor t({3, side, side});
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor grid_tensor(const VoxelGrid& g) {
  Tensor t({g.num_cells()});
  for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(g.occupancy()[static_cast<size_t>(i)]);
  return t;
}

TrainConfig toy_overfit_config(long max_steps, uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  cfg.max_steps = max_steps;
  cfg.views_per_sample = 1;
  cfg.seed = seed;
  cfg.log_every = 1;
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. Dice loss: exact worked examples and finite-difference gradients.

void check_dice_loss() {
  // Matching binary prediction -> loss 0.
  Rng rng(101);
  VoxelGrid y(2);
  y.set(0, 0, 0, true);
  y.set(1, 1, 0, true);
  VoxelField p_eq(2);
  for (long i = 0; i < 8; ++i) p_eq.values()[static_cast<size_t>(i)] = y.occupancy()[static_cast<size_t>(i)];
  expect(std::abs(dice_loss(p_eq, y)) < 1e-9, "matching prediction should score 0");

  // Complemented prediction -> loss 1.
  VoxelField p_inv(2);
  for (long i = 0; i < 8; ++i) p_inv.values()[static_cast<size_t>(i)] = 1.0 - y.occupancy()[static_cast<size_t>(i)];
  expect(std::abs(dice_loss(p_inv, y) - 1.0) < 1e-9, "complemented prediction should score 1");

  // Two cells, y=(1,0), p=(0.5,0.5): 1 - 0.5/2 - 0.5/2 = 0.5.
  ag::Var p_half = ag::leaf(Tensor({2}, {0.5, 0.5}), false);
  const double half = ag::dice_loss(p_half, Tensor({2}, {1.0, 0.0}))->value.item();
  expect(std::abs(half - 0.5) < 1e-9, "hand-evaluated two-cell example should be 0.5, got " + fmt(half));

  // Analytic gradient vs central finite differences, 20 random 6^3 fields.
  for (int trial = 0; trial < 20; ++trial) {
    VoxelGrid yt = random_grid(6, rng, 0.2 + 0.03 * trial);
    Tensor target = grid_tensor(yt);
    Tensor p0({yt.num_cells()});
    for (long i = 0; i < p0.numel(); ++i) p0[i] = 0.05 + 0.9 * rng.uniform();

    ag::Var p = ag::leaf(p0, true);
    ag::backward(ag::dice_loss(p, target));

    const double h = 1e-5;
    for (long i = 0; i < p0.numel(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = ag::dice_loss(p, target)->value.item();
      p->value[i] = orig - h;
      const double fm = ag::dice_loss(p, target)->value.item();
      p->value[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ana = p->grad[i];
      const double rel = std::abs(ana - fd) / std::max({std::abs(fd), std::abs(ana), 1e-8});
      expect(rel < 1e-4, "gradient mismatch at trial " + std::to_string(trial) + " coord " +
                             std::to_string(i) + ": analytic " + fmt(ana) + " vs fd " + fmt(fd));
    }
  }
}

// ---------------------------------------------------------------------------
// 2. IoU equals an exhaustive triple-loop oracle, exactly.

double iou_oracle(const VoxelGrid& a, const VoxelGrid& b) {
  long inter = 0;
  long uni = 0;
  for (long x = 0; x < a.resolution(); ++x) {
    for (long y = 0; y < a.resolution(); ++y) {
      for (long z = 0; z < a.resolution(); ++z) {
        const bool av = a.get(x, y, z) != 0;
        const bool bv = b.get(x, y, z) != 0;
        if (av && bv) ++inter;
        if (av || bv) ++uni;
      }
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void check_iou_oracle() {
  Rng rng(202);
  for (int pair = 0; pair < 50; ++pair) {
    VoxelGrid a(32), b(32);
    if (pair == 0) {
      // both empty: defined as perfect agreement
    } else if (pair == 1) {
      std::fill(a.occupancy().begin(), a.occupancy().end(), 1);
      std::fill(b.occupancy().begin(), b.occupancy().end(), 1);
    } else {
      const double fill = 0.05 + 0.018 * pair;
      a = random_grid(32, rng, fill);
      b = random_grid(32, rng, 1.0 - fill * 0.5);
    }
    const double fast = iou(a, b);
    const double slow = iou_oracle(a, b);
    expect(fast == slow, "pair " + std::to_string(pair) + ": iou " + fmt(fast) +
                             " != oracle " + fmt(slow));
  }
}

// ---------------------------------------------------------------------------
// 3. Binvox codec: bit-exact round-trip, reference fixture, malformed input.

std::vector<uint8_t> binvox_bytes(const std::string& header, const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void check_binvox_codec() {
  Rng rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    const long res = trial % 3 == 0 ? 17 : 32;  // include a non-power-of-two side
    VoxelGrid g = random_grid(res, rng, 0.02 + 0.04 * trial);
    g.translate = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    g.scale = 0.5 + rng.uniform();

    const std::vector<uint8_t> enc = write_binvox(g);
    VoxelGrid back = read_binvox(enc);
    expect(back.resolution() == g.resolution(), "round-trip changed the resolution");
    expect(back.occupancy() == g.occupancy(), "round-trip changed the occupancy");
    expect(back.translate == g.translate && back.scale == g.scale,
           "round-trip changed the metadata");
    expect(write_binvox(back) == enc, "encoding is not byte-stable");
  }

  // Reference fixture: file index 1 means (x=0, y=1, z=0) because the file
  // order runs y fastest, then z, then x.
  VoxelGrid fx = read_binvox_file("data/fixtures/axis_probe.binvox");
  expect(fx.count_occupied() == 1, "fixture should contain exactly one voxel");
  expect(fx.get(0, 1, 0) == 1, "fixture voxel should sit at (0, 1, 0)");

  // Three malformed inputs, each rejected with its documented error class.
  bool threw = false;
  try {
    (void)read_binvox(binvox_bytes("#binvox 2\ndim 2 2 2\ndata\n", {0, 8}));
  } catch (const BinvoxFormatError&) {
    threw = true;
  }
  expect(threw, "unsupported version line must raise the format error");

  threw = false;
  try {
    (void)read_binvox(binvox_bytes("#binvox 1\ndim 2 3 2\ndata\n", {0, 8}));
  } catch (const BinvoxFormatError& e) {
    threw = std::string(e.what()).find("dim 2 3 2") != std::string::npos;
  }
  expect(threw, "non-cubic dim line must raise the format error quoting the line");

  threw = false;
  try {
    (void)read_binvox(binvox_bytes("#binvox 1\ndim 2 2 2\ndata\n", {0, 7}));
  } catch (const BinvoxTruncationError&) {
    threw = true;
  }
  expect(threw, "short payload must raise the truncation error");
}

// ---------------------------------------------------------------------------
// 4. Forward contract: 32^3 output, every value finite and inside (0,1),
//    per-view latency under 5 s, for view counts 1..20.

void check_forward_contract() {
  ModelConfig cfg = ModelConfig::small();
  VoxtrModel model = VoxtrModel::create(cfg, 404);
  Rng rng(405);
  for (long v : {1, 2, 3, 5, 8, 20}) {
    std::vector<Tensor> views;
    for (long i = 0; i < v; ++i) views.push_back(random_image(cfg.encoder.image_size(), rng));

    const auto t0 = std::chrono::steady_clock::now();
    VoxelField field = model.predict(views);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    expect(field.resolution() == 32, "V=" + std::to_string(v) + ": resolution != 32");
    for (double val : field.values()) {
      expect(std::isfinite(val) && val > 0.0 && val < 1.0,
             "V=" + std::to_string(v) + ": value " + fmt(val) + " outside (0,1)");
    }
    const double per_view = secs / static_cast<double>(v);
    expect(per_view < 5.0,
           "V=" + std::to_string(v) + ": " + fmt(per_view) + " s per view exceeds 5 s");
  }
}

// ---------------------------------------------------------------------------
// 5. View-order invariance: end-to-end within 1e-5 relative, feature pooling
//    bit-exact.

void check_view_order_invariance() {
  ModelConfig cfg = ModelConfig::toy();
  VoxtrModel model = VoxtrModel::create(cfg, 505);
  Rng rng(506);
  std::vector<Tensor> views;
  for (int i = 0; i < 4; ++i) views.push_back(random_image(cfg.encoder.image_size(), rng));
  const VoxelField base = model.predict(views);

  for (int perm = 0; perm < 5; ++perm) {
    std::vector<long> order = rng.permutation(4);
    std::vector<Tensor> shuffled;
    for (long idx : order) shuffled.push_back(views[static_cast<size_t>(idx)]);
    VoxelField out = model.predict(shuffled);
    for (size_t i = 0; i < out.values().size(); ++i) {
      const double a = base.values()[i];
      const double b = out.values()[i];
      const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
      expect(rel <= 1e-5, "permutation " + std::to_string(perm) + ": relative deviation " +
                              fmt(rel) + " at voxel " + std::to_string(i));
    }
  }

  // The pooling op itself must be bit-exact under reordering.
  std::vector<ag::Var> seqs;
  for (int i = 0; i < 5; ++i) {
    Tensor t({16, 64});
    for (long k = 0; k < t.numel(); ++k) t[k] = rng.uniform(-2.0, 2.0);
    seqs.push_back(ag::leaf(t, false));
  }
  Tensor pooled = pool_views(seqs)->value;
  for (int perm = 0; perm < 5; ++perm) {
    std::vector<long> order = rng.permutation(5);
    std::vector<ag::Var> shuffled;
    for (long idx : order) shuffled.push_back(seqs[static_cast<size_t>(idx)]);
    expect(pool_views(shuffled)->value.vec() == pooled.vec(),
           "feature pooling is not bit-exact under view reordering");
  }
}

// ---------------------------------------------------------------------------
// 6. Toy overfit: train IoU >= 0.85 within 500 steps, and after warm-up the
//    loss never rises across any 100-step window by more than 0.01.

void check_toy_overfit() {
  const fs::path dir = fresh_dir("voxtr_acceptance_overfit");
  ToySource source(make_toy_dataset(8, 0));
  VoxtrModel model = VoxtrModel::create(ModelConfig::toy(), mix_seed(0, hash_string("model-init")));
  TrainConfig cfg = toy_overfit_config(500, 0);
  cfg.cosine_schedule = true;  // smooth late-phase convergence for the trend check
  TrainResult result = train_model(model, source, cfg, dir.string());

  std::vector<MetricsRecord> rows = read_metrics(result.metrics_path);
  expect(rows.size() == 500, "expected one metrics row per step");

  double best = 0.0;
  long best_step = 0;
  for (const MetricsRecord& r : rows) {
    if (r.iou > best) {
      best = r.iou;
      best_step = r.step;
    }
  }
  expect(best >= 0.85, "train IoU peaked at " + fmt(best) + " (step " +
                           std::to_string(best_step) + "), below 0.85");

  const long warmup = 100;
  for (long s = warmup; s + 100 <= 500; ++s) {
    const double early = rows[static_cast<size_t>(s - 1)].loss;
    const double late = rows[static_cast<size_t>(s + 99)].loss;
    expect(late <= early + 0.01, "loss rose from " + fmt(early) + " (step " + std::to_string(s) +
                                     ") to " + fmt(late) + " (step " + std::to_string(s + 100) +
                                     ")");
  }
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 7. Parameter budgets: base within 5% of 163M, small within 10% of 11M.

void check_parameter_budgets() {
  const long base = count_params(ModelConfig::base());
  const double base_dev = std::abs(static_cast<double>(base) - 163e6) / 163e6;
  expect(base_dev <= 0.05,
         "base has " + std::to_string(base) + " parameters, " + fmt(base_dev * 100) +
             "% away from 163M");

  const long small = count_params(ModelConfig::small());
  const double small_dev = std::abs(static_cast<double>(small) - 11e6) / 11e6;
  expect(small_dev <= 0.10,
         "small has " + std::to_string(small) + " parameters, " + fmt(small_dev * 100) +
             "% away from 11M");
}

// ---------------------------------------------------------------------------
// 8. Ablation suite: setups 1, 2, 3, 5, 6 run one step + one evaluation;
//    setup 4 trains both stages and must overfit (stage-1 reconstruction
//    IoU >= 0.85 on the 8 toy grids, stage-2 teacher-forced per-token
//    accuracy >= 0.95).

void check_ablation_suite() {
  const fs::path dir = fresh_dir("voxtr_acceptance_ablation");
  ToySource source(make_toy_dataset(8, 0));

  TrainConfig smoke = toy_overfit_config(1, 0);
  for (int setup : {1, 2, 3, 5, 6}) {
    AblationOutcome out = run_ablation(setup, source, source, ModelConfig::toy(), smoke,
                                       VQConfig::toy(), (dir / std::to_string(setup)).string());
    expect(out.training.steps == 1, "setup " + std::to_string(setup) + " did not run one step");
    expect(out.report.sample_count == 8,
           "setup " + std::to_string(setup) + " did not evaluate all 8 objects");
  }

  TrainConfig two_stage = toy_overfit_config(700, 0);
  two_stage.learning_rate = 2e-3;
  AblationOutcome vq = run_ablation(4, source, source, ModelConfig::toy(), two_stage,
                                    VQConfig::toy(), (dir / "4").string());
  expect(vq.stage1_iou >= 0.85,
         "stage-1 reconstruction IoU " + fmt(vq.stage1_iou) + " below 0.85");
  expect(vq.stage2_token_accuracy >= 0.95,
         "stage-2 teacher-forced accuracy " + fmt(vq.stage2_token_accuracy) + " below 0.95");
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 9. Quantizer: indices equal an exhaustive nearest-neighbor scan, with ties
//    resolved to the lowest index.

void check_quantizer_oracle() {
  Rng rng(909);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor codebook({4, 2});
    for (long i = 0; i < codebook.numel(); ++i) codebook[i] = rng.uniform(-1.0, 1.0);
    if (trial % 3 == 0) {
      // Duplicate a row so ties genuinely occur.
      const long src = rng.uniform_int(4);
      const long dst = rng.uniform_int(4);
      codebook[dst * 2] = codebook[src * 2];
      codebook[dst * 2 + 1] = codebook[src * 2 + 1];
    }

    Tensor z({12, 2});
    for (long r = 0; r < 12; ++r) {
      if (r % 4 == 0) {
        // Exactly a codebook row: distance 0 to it (and to any duplicate).
        const long pick = rng.uniform_int(4);
        z[r * 2] = codebook[pick * 2];
        z[r * 2 + 1] = codebook[pick * 2 + 1];
      } else if (r % 4 == 1) {
        // Exact midpoint of two rows: equidistant by symmetry of the
        // squared-distance arithmetic.
        const long a = rng.uniform_int(4);
        const long b = rng.uniform_int(4);
        z[r * 2] = (codebook[a * 2] + codebook[b * 2]) / 2.0;
        z[r * 2 + 1] = (codebook[a * 2 + 1] + codebook[b * 2 + 1]) / 2.0;
      } else {
        z[r * 2] = rng.uniform(-1.5, 1.5);
        z[r * 2 + 1] = rng.uniform(-1.5, 1.5);
      }
    }

    std::vector<long> got = nearest_codes(z, codebook);
    for (long r = 0; r < 12; ++r) {
      long want = 0;
      double best = 1e300;
      for (long k = 0; k < 4; ++k) {
        const double dx = z[r * 2] - codebook[k * 2];
        const double dy = z[r * 2 + 1] - codebook[k * 2 + 1];
        const double d = dx * dx + dy * dy;
        if (d < best) {  // strict: first (lowest) index wins ties
          best = d;
          want = k;
        }
      }
      expect(got[static_cast<size_t>(r)] == want,
             "trial " + std::to_string(trial) + " row " + std::to_string(r) + ": got code " +
                 std::to_string(got[static_cast<size_t>(r)]) + ", oracle says " +
                 std::to_string(want));
    }
  }
}

// ---------------------------------------------------------------------------
// 10. Determinism and persistence: fixed-seed training reproduces the metrics
//     file byte-for-byte; a reloaded checkpoint reproduces forward outputs
//     bit-exactly.

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void check_determinism() {
  const fs::path dir = fresh_dir("voxtr_acceptance_determinism");
  ToySource source(make_toy_dataset(4, 11));
  TrainConfig cfg = toy_overfit_config(5, 13);
  cfg.batch_size = 2;
  cfg.views_per_sample = 2;

  VoxtrModel m1 = VoxtrModel::create(ModelConfig::toy(), 77);
  TrainResult r1 = train_model(m1, source, cfg, (dir / "a").string());
  VoxtrModel m2 = VoxtrModel::create(ModelConfig::toy(), 77);
  TrainResult r2 = train_model(m2, source, cfg, (dir / "b").string());
  expect(file_bytes(r1.metrics_path) == file_bytes(r2.metrics_path),
         "two fixed-seed runs wrote different metrics bytes");

  CheckpointData ckpt = load_checkpoint(r1.checkpoint_path);
  ModelConfig cfg2 = ckpt.config.at("model").get<ModelConfig>();
  VoxtrModel rebuilt(cfg2, ckpt.load_params(model_param_specs(cfg2)));

  ResolvedSample sample = source.resolve(0, 2, 99);
  const VoxelField before = m1.predict(sample.views);
  const VoxelField after = rebuilt.predict(sample.views);
  expect(before.values() == after.values(),
         "reloaded checkpoint does not reproduce forward outputs bit-exactly");
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 11. Multi-view trend: for models trained with 4 views, evaluating with 8
//     views scores at least as well as evaluating with 1, averaged over
//     three training seeds.

void check_multi_view_trend() {
  const fs::path dir = fresh_dir("voxtr_acceptance_views");
  ToySource source(make_toy_dataset(4, 5, 32, 8));

  double mean_at_1 = 0.0;
  double mean_at_8 = 0.0;
  for (uint64_t seed : {1, 2, 3}) {
    TrainConfig cfg = toy_overfit_config(120, seed);
    cfg.batch_size = 4;
    cfg.views_per_sample = 4;
    VoxtrModel model =
        VoxtrModel::create(ModelConfig::toy(), mix_seed(seed, hash_string("model-init")));
    train_model(model, source, cfg, (dir / ("s" + std::to_string(seed))).string());
    mean_at_1 += evaluate_model(model, source, 1).overall_iou / 3.0;
    mean_at_8 += evaluate_model(model, source, 8).overall_iou / 3.0;
  }
  expect(mean_at_8 >= mean_at_1, "8-view evaluation (" + fmt(mean_at_8) +
                                     ") scored below 1-view evaluation (" + fmt(mean_at_1) + ")");
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------

struct Check {
  int id;
  std::string name;
  double budget_seconds;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks = {
      {1, "dice loss: worked examples and finite-difference gradients", 10.0, check_dice_loss},
      {2, "iou matches the exhaustive triple-loop oracle", 30.0, check_iou_oracle},
      {3, "binvox codec: round-trip, fixture, malformed rejection", 5.0, check_binvox_codec},
      {4, "forward contract: 32^3 output in (0,1) across view counts", 300.0,
       check_forward_contract},
      {5, "view-order invariance, bit-exact feature pooling", 120.0, check_view_order_invariance},
      {6, "toy overfit reaches train IoU 0.85 within 500 steps", 900.0, check_toy_overfit},
      {7, "parameter budgets for the base and small configurations", 30.0,
       check_parameter_budgets},
      {8, "ablation suite: five smoke setups plus the two-stage overfit", 1800.0,
       check_ablation_suite},
      {9, "quantizer matches the exhaustive nearest-neighbor oracle", 10.0,
       check_quantizer_oracle},
      {10, "fixed-seed determinism and checkpoint persistence", 300.0, check_determinism},
      {11, "more evaluation views never score worse on the toy sweep", 900.0,
       check_multi_view_trend},
  };

  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Check& c : checks) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;

    const auto t0 = std::chrono::steady_clock::now();
    std::string reason;
    try {
      c.run();
    } catch (const CheckFailure& f) {
      reason = f.reason;
    } catch (const std::exception& e) {
      reason = std::string("unexpected exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (reason.empty() && secs > c.budget_seconds) {
      reason = "took " + fmt(secs) + " s, budget is " + fmt(c.budget_seconds) + " s";
    }

    if (reason.empty()) {
      std::printf("[PASS] %d. %s (%.1f s)\n", c.id, c.name.c_str(), secs);
    } else {
      std::printf("[FAIL] %d. %s (%.1f s): %s\n", c.id, c.name.c_str(), secs, reason.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
