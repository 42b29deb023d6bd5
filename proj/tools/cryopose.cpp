// Command-line entry points: simulate, train, eval, project.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data mismatch,
// 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "cryopose/dataset.hpp"
#include "cryopose/io.hpp"
#include "cryopose/training.hpp"

namespace fs = std::filesystem;
using namespace cryopose;

namespace {

struct SimulateArgs {
  std::string config;
  std::string out;
  bool force = false;
};

void run_simulate(const SimulateArgs& args) {
  const SimRunConfig cfg = parse_sim_config_file(args.config);
  const Volume phantom = make_phantom(cfg.phantom);
  const ParticleStack stack = generate_dataset(phantom, cfg.dataset, cfg.optics);
  write_dataset_dir(args.out, stack, phantom, cfg, args.force);
  std::printf("simulate: wrote %lld images (%lld train / %lld test) to %s\n",
              static_cast<long long>(stack.count()),
              static_cast<long long>(stack.n_train),
              static_cast<long long>(stack.n_test()), args.out.c_str());
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
};

void write_train_outputs(const std::string& dir, const TrainState& state,
                         const ParticleStack& stack) {
  fs::create_directories(dir);
  write_mrc((fs::path(dir) / "volume.mrc").string(), state.volume.density,
            state.volume.pixel_size, /*as_volume=*/true);
  if (!state.weights.entries.empty()) {
    write_encoder_weights((fs::path(dir) / "encoder_weights.bin").string(), state.weights,
                          state.encoder);
  }
  // Predicted poses: all images in Learned/Tomo mode; RawAd optimizes poses
  // for the training split only.
  const std::int64_t count =
      state.rawad_params.defined() ? state.rawad_params.dim(0) : stack.count();
  std::vector<so3::Quaternion> poses;
  poses.reserve(static_cast<std::size_t>(count));
  for (const auto& r : state_rotations(state, stack, 0, count))
    poses.push_back(so3::matrix_to_quaternion(r));
  write_poses_csv((fs::path(dir) / "poses.csv").string(), poses);
}

void run_train(const TrainArgs& args) {
  const TrainRunConfig cfg = parse_train_config_file(args.config);
  LoadedDataset data = read_dataset_dir(args.data);
  const Volume* gt = data.ground_truth ? &*data.ground_truth : nullptr;

  fs::create_directories(args.out);
  const std::string config_echo = train_config_json(cfg);
  atomic_write_file((fs::path(args.out) / "config.json").string(), config_echo);
  write_manifest((fs::path(args.out) / "manifest.json").string(), "train", cfg.seed,
                 config_echo);

  CheckpointCallback on_checkpoint = [&](const TrainState& state) {
    if (state.step < cfg.train.steps && cfg.train.checkpoint_interval > 0) {
      char sub[32];
      std::snprintf(sub, sizeof(sub), "checkpoints/step_%06lld",
                    static_cast<long long>(state.step));
      write_train_outputs((fs::path(args.out) / sub).string(), state, data.stack);
    }
  };
  EvalCallback on_eval = [&](const MetricsRow& row) {
    std::printf("step %6lld  loss %.6g  mae_raw %.3f  mae_aligned %.3f",
                static_cast<long long>(row.step), row.loss, row.pose_mae_raw_deg,
                row.pose_mae_aligned_deg);
    if (!std::isnan(row.fsc_resolution_A)) std::printf("  res %.3f A", row.fsc_resolution_A);
    std::printf("\n");
    std::fflush(stdout);
  };

  TrainResult result = train(data.stack, data.optics, cfg.train, gt, on_eval, on_checkpoint);
  write_train_outputs(args.out, result.state, data.stack);
  write_metrics_csv((fs::path(args.out) / "metrics.csv").string(), result.metrics);
  if (result.state.skipped_updates > 0) {
    std::fprintf(stderr, "train: %lld parameter updates skipped on non-finite gradients\n",
                 static_cast<long long>(result.state.skipped_updates));
  }
  std::printf("train: finished %lld steps, outputs in %s\n",
              static_cast<long long>(result.state.step), args.out.c_str());
}

struct EvalArgs {
  std::string volume;
  std::string reference;
  std::vector<std::string> poses;  // est.csv gt.csv
  std::string out;
  bool refine = false;
};

void run_eval(const EvalArgs& args) {
  MrcData va = read_mrc(args.volume);
  MrcData vb = read_mrc(args.reference);
  CP_CHECK(va.data.same_shape(vb.data), DataError,
           "eval: volume grids differ between " + args.volume + " and " + args.reference);
  CP_CHECK(std::abs(va.pixel_size - vb.pixel_size) < 1e-6, DataError,
           "eval: pixel sizes differ between the two volumes");
  Volume est{va.data, va.pixel_size};
  const Volume ref{vb.data, vb.pixel_size};

  so3::PoseAlignment alignment;  // identity unless poses are given
  double mae_raw = std::numeric_limits<double>::quiet_NaN();
  double mae_aligned = std::numeric_limits<double>::quiet_NaN();
  if (!args.poses.empty()) {
    CP_CHECK(args.poses.size() == 2, ConfigError,
             "--poses takes two files: estimated.csv ground_truth.csv");
    const auto est_q = read_poses_csv(args.poses[0]);
    const auto gt_q = read_poses_csv(args.poses[1]);
    CP_CHECK(est_q.size() == gt_q.size() && !est_q.empty(), DataError,
             "--poses files must have the same non-zero number of rows");
    std::vector<so3::Rotation> est_r, gt_r;
    for (const auto& q : est_q) est_r.push_back(so3::quaternion_to_matrix(q));
    for (const auto& q : gt_q) gt_r.push_back(so3::quaternion_to_matrix(q));
    const PoseEvalResult pe = evaluate_poses(est_r, gt_r);
    mae_raw = pe.raw_mae_deg;
    mae_aligned = pe.aligned_mae_deg;
    alignment = pe.alignment;
  }

  auto [aligned, info] = align_volumes(est, ref, alignment, args.refine);
  const FscCurve curve = fsc(aligned, ref);
  const double resolution =
      resolution_at_threshold(curve, kFscResolutionThreshold, ref.pixel_size);

  fs::create_directories(args.out);
  write_fsc_csv((fs::path(args.out) / "fsc.csv").string(), curve);
  std::vector<std::vector<std::string>> report = {
      {"fsc_resolution_A", fmt_double(resolution)},
      {"correlation", fmt_double(info.correlation)},
      {"pose_mae_raw_deg", std::isnan(mae_raw) ? "" : fmt_double(mae_raw)},
      {"pose_mae_aligned_deg", std::isnan(mae_aligned) ? "" : fmt_double(mae_aligned)},
  };
  write_csv((fs::path(args.out) / "report.csv").string(), {"metric", "value"}, report);
  std::printf("eval: resolution %.4f A (threshold %.3f), correlation %.4f\n", resolution,
              kFscResolutionThreshold, info.correlation);
  if (!std::isnan(mae_raw))
    std::printf("eval: pose MAE raw %.4f deg, aligned %.4f deg\n", mae_raw, mae_aligned);
}

struct ProjectArgs {
  std::string volume;
  std::string pose;
  std::string defocus;
  std::string shift;
  std::string out;
  int pad = 1;
};

std::vector<double> parse_numbers(const std::string& text, std::size_t count,
                                  const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) values.push_back(parse_double(field));
  CP_CHECK(values.size() == count, ConfigError,
           what + " expects " + std::to_string(count) + " comma-separated numbers");
  return values;
}

void run_project(const ProjectArgs& args) {
  MrcData mrc = read_mrc(args.volume);
  CP_CHECK(mrc.data.dim(0) == mrc.data.dim(1) && mrc.data.dim(1) == mrc.data.dim(2),
           DataError, "project: input must be a cubic volume");
  const Volume vol{mrc.data, mrc.pixel_size};

  const auto q = parse_numbers(args.pose, 4, "--pose");
  so3::Quaternion quat(q[0], q[1], q[2], q[3]);
  CP_CHECK(std::abs(quat.norm() - 1.0) <= 1e-6, ConfigError,
           "--pose quaternion must be unit-norm (within 1e-6)");

  ImagingParams params;
  params.rotation = so3::quaternion_to_matrix(quat);
  if (!args.shift.empty()) {
    const auto t = parse_numbers(args.shift, 2, "--shift");
    params.shift = Eigen::Vector2d(t[0], t[1]);
  }
  OpticsConfig optics;
  optics.pixel_size = vol.pixel_size;
  if (!args.defocus.empty()) {
    const auto d = parse_numbers(args.defocus, 3, "--defocus");
    params.ctf = CtfParams{d[0], d[1], d[2]};
  }

  const Tensor image = project_volume(vol, params, optics, args.pad);
  write_mrc(args.out, image.reshaped({1, vol.n(), vol.n()}), vol.pixel_size,
            /*as_volume=*/false);
  std::printf("project: wrote %s\n", args.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cryopose: unsupervised cryo-EM pose and map reconstruction"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic particle dataset");
  sim->add_option("--config", sim_args.config, "Simulation config (JSON)")->required();
  sim->add_option("--out", sim_args.out, "Output directory")->required();
  sim->add_flag("--force", sim_args.force, "Overwrite an existing dataset");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Reconstruct a map (and poses) from a dataset");
  tr->add_option("--data", train_args.data, "Dataset directory from `simulate`")->required();
  tr->add_option("--config", train_args.config, "Training config (JSON)")->required();
  tr->add_option("--out", train_args.out, "Output directory")->required();

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "FSC and pose-error report");
  ev->add_option("--volume", eval_args.volume, "Volume to evaluate (MRC)")->required();
  ev->add_option("--reference", eval_args.reference, "Reference volume (MRC)")->required();
  ev->add_option("--poses", eval_args.poses,
                 "Estimated and ground-truth pose CSVs (2 files)")
      ->expected(2);
  ev->add_option("--out", eval_args.out, "Output directory")->required();
  ev->add_flag("--refine", eval_args.refine, "Refine volume alignment by local search");

  ProjectArgs proj_args;
  auto* pr = app.add_subcommand("project", "Single application of the imaging operator");
  pr->add_option("--volume", proj_args.volume, "Input volume (MRC)")->required();
  pr->add_option("--pose", proj_args.pose, "Quaternion q1,q2,q3,q4")->required();
  pr->add_option("--defocus", proj_args.defocus, "CTF d1_um,d2_um,alpha_rad");
  pr->add_option("--shift", proj_args.shift, "Shift t1,t2 in pixels");
  pr->add_option("--pad", proj_args.pad, "CTF padding factor (default 1)");
  pr->add_option("--out", proj_args.out, "Output image (MRC)")->required();

  try {
    app.parse(argc, argv);
    if (*sim) run_simulate(sim_args);
    if (*tr) run_train(train_args);
    if (*ev) run_eval(eval_args);
    if (*pr) run_project(proj_args);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
