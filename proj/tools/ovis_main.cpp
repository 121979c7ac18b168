#include "CLI11.hpp"

#include "ovis/eval.hpp"
#include "ovis/pipeline.hpp"
#include "ovis/simulator.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace ovis;

namespace {

int exit_code_for(const Error& e) {
  if (e.code() == "ConfigInvalid" || e.code() == "AblationUnsupported") return 2;
  if (e.code() == "DatasetMalformed") return 3;
  if (e.code() == "SolverDiverged") return 4;
  return 1;
}

int cmd_gen(const std::string& stock, const std::string& spec_path, const std::string& out,
            uint64_t seed) {
  SceneSpec spec;
  if (!spec_path.empty()) {
    spec = read_scene_spec(spec_path);
  } else {
    spec = make_stock_spec(stock, seed);
  }
  DatasetStats stats = emit_dataset(spec, out);
  std::cout << "frames=" << stats.frames << " path_length=" << stats.path_length
            << " occluded_frame_fraction=" << stats.occluded_frame_fraction << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& dataset, const std::string& out,
            uint64_t seed, bool seed_set, bool deterministic, bool ablate_seg, bool verbose) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) fail("ConfigInvalid", "cannot open config " + config_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg = run_config_from_json(text);
  }
  if (seed_set) cfg.seed = seed;
  if (deterministic) cfg.deterministic = true;
  if (ablate_seg) cfg.segmentation_off = true;
  if (verbose) cfg.verbose = true;
  PipelineResult res = run_pipeline(cfg, dataset, out);
  std::cout << "frames=" << res.trajectory.size() << " keyframes=" << res.keyframe_frames.size()
            << " ba=" << res.ba_invocations << " diverged=" << res.diverged_windows
            << " runtime_s=" << res.runtime_sec << "\n";
  return res.diverged_windows > 0 ? 4 : 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& masks,
             const std::string& gt_masks, double delta, const std::string& csv_out) {
  std::vector<TrajectorySample> est = read_trajectory(est_path);
  std::vector<TrajectorySample> gt = read_trajectory(gt_path);
  double ate = ate_rmse(est, gt);
  double rpe = rpe_rmse(est, gt, delta);

  double mean_iou = std::nan("");
  if (!masks.empty() && !gt_masks.empty()) {
    double iou_sum = 0;
    int n = 0;
    for (const auto& entry : fs::directory_iterator(masks)) {
      fs::path gt_file = fs::path(gt_masks) / entry.path().filename();
      if (!fs::exists(gt_file)) continue;
      ImageU8 pred8 = read_png8(entry.path().string());
      ImageU8 gt8 = read_png8(gt_file.string());
      ImageF gamma(pred8.width, pred8.height, 0.f);
      for (int y = 0; y < pred8.height; ++y)
        for (int x = 0; x < pred8.width; ++x) gamma.at(x, y) = pred8.at(x, y) / 255.f;
      Image<uint16_t> gm(gt8.width, gt8.height, 0);
      for (int y = 0; y < gt8.height; ++y)
        for (int x = 0; x < gt8.width; ++x) gm.at(x, y) = gt8.at(x, y);
      SegFrameMetrics m = seg_metrics(gamma, gm);
      if (m.gt_dynamic_pixels > 0) {
        iou_sum += m.iou;
        ++n;
      }
    }
    if (n > 0) mean_iou = iou_sum / n;
  }

  std::ostream* out = &std::cout;
  std::ofstream fout;
  if (!csv_out.empty()) {
    fout.open(csv_out);
    out = &fout;
  }
  *out << "ate_rmse_m,rpe_rmse_mps,mean_iou\n";
  *out << ate << "," << rpe << "," << mean_iou << "\n";
  return 0;
}

int cmd_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& name) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  // Closed-form score solver vs a quick grid search.
  {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 4), p(0, 1);
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      double a = u(rng), b = u(rng), pr = p(rng), nb = p(rng) * 3, lg = 0.5 + u(rng);
      int n = 3;
      double g = solve_gamma(a, b, pr, nb, n, lg, 0.5);
      auto f = [&](double x) {
        return x * x * a + (1 - x) * (1 - x) * b + lg * (x - pr) * (x - pr) +
               0.5 * (n * x * x - 2 * x * nb);
      };
      double best = 0, bv = f(0);
      for (double x = 0; x <= 1.0; x += 1e-4) {
        if (f(x) < bv) {
          bv = f(x);
          best = x;
        }
      }
      if (std::abs(g - best) > 2e-4) ok = false;
    }
    check(ok, "score solver matches grid search");
  }

  // Rotation round trip.
  {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      Vec3 w(n01(rng), n01(rng), n01(rng));
      if ((so3_log(so3_exp(w)) - w).norm() > 1e-9 && w.norm() < 3.1) ok = false;
    }
    check(ok, "so3 exp/log round trip");
  }

  // Preintegration split/compose identity.
  {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n01;
    std::vector<ImuSample> s;
    for (int i = 0; i <= 40; ++i) {
      ImuSample x;
      x.timestamp = i * 0.005;
      x.gyro = 0.3 * Vec3(n01(rng), n01(rng), n01(rng));
      x.accel = Vec3(n01(rng), n01(rng), 9.8 + n01(rng));
      s.push_back(x);
    }
    ImuBias b;
    PreintegratedImu whole = preintegrate(s, b, ImuNoise{});
    std::vector<ImuSample> s1(s.begin(), s.begin() + 21), s2(s.begin() + 20, s.end());
    PreintegratedImu comp = compose(preintegrate(s1, b, ImuNoise{}), preintegrate(s2, b, ImuNoise{}));
    bool ok = (whole.dP - comp.dP).norm() < 1e-9 && (whole.dV - comp.dV).norm() < 1e-9 &&
              so3_log(Mat3(whole.dR.transpose() * comp.dR)).norm() < 1e-9;
    check(ok, "preintegration split/compose identity");
  }

  std::cout << (failures == 0 ? "selftest OK" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D inertial dynamic SLAM toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_stock = "static", gen_spec, gen_out;
  uint64_t gen_seed = 1;
  gen->add_option("--stock", gen_stock, "Stock scene: static, stlo, ltlo");
  gen->add_option("--spec", gen_spec, "Scene spec JSON file (overrides --stock)");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "Scene seed");

  auto* run = app.add_subcommand("run", "Run the SLAM pipeline on a dataset");
  std::string run_config, run_dataset, run_out;
  uint64_t run_seed = 1;
  bool run_det = false, run_ablate = false;
  run->add_option("--config", run_config, "Run config JSON");
  run->add_option("--dataset", run_dataset, "Dataset directory")->required();
  run->add_option("--out", run_out, "Output directory")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "Seed override");
  run->add_flag("--deterministic", run_det, "Deterministic mode");
  run->add_flag("--ablate-segmentation", run_ablate, "Pin all scores at 1");
  bool run_verbose = false;
  run->add_flag("--verbose", run_verbose, "Per-keyframe progress on stderr");

  auto* ev = app.add_subcommand("eval", "Evaluate a trajectory (and optionally masks)");
  std::string ev_est, ev_gt, ev_masks, ev_gt_masks, ev_csv;
  double ev_delta = 1.0;
  ev->add_option("--est", ev_est, "Estimated trajectory")->required();
  ev->add_option("--gt", ev_gt, "Ground-truth trajectory")->required();
  ev->add_option("--masks", ev_masks, "Predicted gamma mask directory");
  ev->add_option("--gt-masks", ev_gt_masks, "Ground-truth mover mask directory");
  ev->add_option("--delta", ev_delta, "RPE time offset (s)");
  ev->add_option("--csv", ev_csv, "CSV output path (default stdout)");

  app.add_subcommand("selftest", "Run built-in consistency checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_stock, gen_spec, gen_out, gen_seed);
    if (run->parsed())
      return cmd_run(run_config, run_dataset, run_out, run_seed, seed_opt->count() > 0, run_det,
                     run_ablate, run_verbose);
    if (ev->parsed()) return cmd_eval(ev_est, ev_gt, ev_masks, ev_gt_masks, ev_delta, ev_csv);
    return cmd_selftest();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
