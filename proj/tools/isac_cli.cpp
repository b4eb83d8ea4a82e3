// Batch command-line surface for the sensing lab: dataset generation,
// covariance design, channel estimation, diffusion training/sampling and
// point-cloud evaluation. All stages are file based and seed deterministic.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "isac/beamform.hpp"
#include "isac/constants.hpp"
#include "isac/channel.hpp"
#include "isac/cloud.hpp"
#include "isac/config.hpp"
#include "isac/data.hpp"
#include "isac/io.hpp"
#include "isac/metrics.hpp"
#include "isac/train.hpp"

namespace fs = std::filesystem;
using namespace isac;

namespace {

constexpr const char* kToolVersion = "isac-lab 0.1.0";

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "system config file (key=value)")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master RNG seed");
  cmd->add_option("--threads", args.threads, "worker cap for parallel stages");
}

void write_stage_manifest(const std::string& dir, const std::string& command,
                          const CommonArgs& args,
                          std::vector<std::pair<std::string, std::string>> extra) {
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("tool_version", kToolVersion);
  entries.emplace_back("command", command);
  entries.emplace_back("config", args.config_path);
  entries.emplace_back("config_fingerprint",
                       std::to_string(file_fingerprint(args.config_path)));
  entries.emplace_back("seed", std::to_string(args.seed));
  entries.emplace_back("threads", std::to_string(args.threads));
  for (auto& e : extra) entries.push_back(std::move(e));
  write_manifest(dir + "/manifest.txt", entries);
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

int cmd_gen_data(const CommonArgs& args, int records, int points, double fixed_x,
                 bool has_fixed_center, double fixed_y, double fixed_z) {
  SystemConfig cfg = SystemConfig::load(args.config_path);
  fs::create_directories(args.out_dir);
  BuildDatasetOptions opt;
  opt.n_records = records;
  opt.seed = args.seed;
  opt.gen.cloud_points = points;
  opt.synthesis.threads = args.threads;
  if (has_fixed_center) opt.gen.fixed_center = Vec3(fixed_x, fixed_y, fixed_z);
  const Dataset ds = build_dataset(args.out_dir, cfg, args.config_path, opt);
  // merge the stage entries into the dataset manifest written by the builder
  auto ids = [](const std::vector<int>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
    return s.str();
  };
  write_manifest(args.out_dir + "/manifest.txt",
                 {{"tool_version", kToolVersion},
                  {"command", "gen-data"},
                  {"config", args.config_path},
                  {"config_fingerprint", std::to_string(ds.config_fingerprint)},
                  {"seed", std::to_string(args.seed)},
                  {"threads", std::to_string(args.threads)},
                  {"requested_records", std::to_string(records)},
                  {"points", std::to_string(points)},
                  {"record_count", std::to_string(ds.records.size())},
                  {"train", ids(ds.splits.train)},
                  {"test", ids(ds.splits.test)},
                  {"val", ids(ds.splits.val)},
                  {"quarantined", ids(ds.splits.quarantined)}});
  std::cout << "dataset: " << ds.records.size() << " records ("
            << ds.splits.quarantined.size() << " quarantined), splits "
            << ds.splits.train.size() << "/" << ds.splits.test.size() << "/"
            << ds.splits.val.size() << "\n";
  return 0;
}

int cmd_design_beams(const CommonArgs& args, int ue_count, double power_dbm,
                     bool has_power, double min_rate, bool has_rate, double tol) {
  SystemConfig cfg = SystemConfig::load(args.config_path);
  if (has_power) cfg.max_power_w = dbm_to_watts(power_dbm);
  if (has_rate) cfg.min_rate_bps_hz = min_rate;
  fs::create_directories(args.out_dir);

  BeamformProblem prob;
  Rng rng(args.seed);
  prob.channels = draw_comm_channels(ue_count, cfg, rng);
  prob.noise_powers.assign(static_cast<std::size_t>(ue_count), cfg.noise_power_ue_w);
  prob.max_power = cfg.max_power_w;
  prob.min_rate = cfg.min_rate_bps_hz;

  const SdrSolution sol = solve_sdr(prob, tol);
  if (!sol.feasible) {
    std::cout << "INFEASIBLE: rate " << prob.min_rate
              << " bps/Hz cannot be met at power " << watts_to_dbm(prob.max_power)
              << " dBm (margin " << sol.infeasibility_margin << ")\n";
    write_stage_manifest(args.out_dir, "design-beams", args,
                         {{"status", "infeasible"},
                          {"margin", fmt(sol.infeasibility_margin)}});
    return 2;
  }
  const BeamformDesign design = extract_beamformers(sol.S, sol.R, prob);
  {
    // problem instance: UE channels as columns plus a key=value summary
    ChannelMatrix h_cols(cfg.n_tx, ue_count);
    for (int k = 0; k < ue_count; ++k) h_cols.col(k) = prob.channels[k];
    save_channel(args.out_dir + "/problem_channels.chan", h_cols);
    write_manifest(args.out_dir + "/problem.txt",
                   {{"ue_count", std::to_string(ue_count)},
                    {"max_power_w", fmt(prob.max_power)},
                    {"min_rate_bps_hz", fmt(prob.min_rate)},
                    {"noise_power_ue_w", fmt(cfg.noise_power_ue_w)}});
  }
  save_channel(args.out_dir + "/design_Sx.chan", design.S_x);
  save_channel(args.out_dir + "/design_Wc.chan", design.W_c);
  save_channel(args.out_dir + "/design_Ws.chan", design.W_s);
  for (std::size_t k = 0; k < design.R_k.size(); ++k) {
    save_channel(args.out_dir + "/design_R" + std::to_string(k) + ".chan", design.R_k[k]);
  }
  {
    std::ofstream table(args.out_dir + "/feasibility.txt");
    table << format_feasibility_table(design.feasibility_report);
  }
  write_stage_manifest(args.out_dir, "design-beams", args,
                       {{"status", "feasible"},
                        {"ue_count", std::to_string(ue_count)},
                        {"objective_tr_sinv", fmt(design.objective)},
                        {"power_used_w", fmt(design.S_x.real().trace())}});
  std::cout << format_feasibility_table(design.feasibility_report);
  std::cout << "objective tr(S^-1) = " << design.objective << ", tr(S) = "
            << design.S_x.real().trace() << " W (budget " << prob.max_power << " W)\n";
  return design.feasibility_report.all_pass ? 0 : 3;
}

int cmd_estimate(const CommonArgs& args, const std::string& dataset_dir, int record_id,
                 const std::string& design_dir, bool noiseless, int trials,
                 double power_dbm, bool has_power) {
  SystemConfig cfg = SystemConfig::load(args.config_path);
  if (has_power) cfg.max_power_w = dbm_to_watts(power_dbm);
  fs::create_directories(args.out_dir);

  const std::string stem =
      dataset_dir + "/records/" + [&] {
        std::ostringstream s;
        s << std::setw(6) << std::setfill('0') << record_id;
        return s.str();
      }();
  const ChannelMatrix h_true = load_channel(stem + ".chan");

  ChannelMatrix w_s, w_c;
  if (!design_dir.empty()) {
    w_s = load_channel(design_dir + "/design_Ws.chan");
    w_c = load_channel(design_dir + "/design_Wc.chan");
  } else {
    w_s = std::sqrt(cfg.max_power_w / cfg.n_tx) *
          ChannelMatrix::Identity(cfg.n_tx, cfg.n_tx);
    w_c = ChannelMatrix::Zero(cfg.n_tx, 0);
  }
  const TransmitBlock block =
      build_transmit_block(w_s, w_c, cfg.symbol_count, args.seed);
  const double sigma2 = noiseless ? 0.0 : cfg.noise_power_sensing_w;
  const ChannelMatrix y = simulate_echo(h_true, block.X, sigma2, args.seed + 1);
  const ChannelMatrix h_hat = ls_estimate(y, block.X);
  save_channel(args.out_dir + "/h_hat.chan", h_hat);
  const double err = nmse(h_true, h_hat);
  std::cout << "estimation NMSE = " << std::scientific << err << "\n";

  std::vector<std::pair<std::string, std::string>> extra = {
      {"record", std::to_string(record_id)},
      {"noiseless", noiseless ? "1" : "0"},
      {"nmse", fmt(err)}};
  if (trials > 0) {
    const MonteCarloMse mc =
        estimate_mse_monte_carlo(h_true, block.X, sigma2, trials, args.seed + 2);
    std::ofstream csv(args.out_dir + "/crb_comparison.csv");
    csv << "trial,error_sq\n" << std::setprecision(17);
    for (std::size_t i = 0; i < mc.per_trial_error_sq.size(); ++i) {
      csv << i << ',' << mc.per_trial_error_sq[i] << '\n';
    }
    const double crb = crb_trace(block.S_x, sigma2, cfg.symbol_count, cfg.n_rx);
    csv << "# mean_error_sq = " << mc.mean_error_sq << "\n";
    csv << "# crb_trace = " << crb << "\n";
    std::cout << "Monte-Carlo MSE " << mc.mean_error_sq << " vs CRB " << crb << "\n";
    extra.emplace_back("mc_mean_error_sq", fmt(mc.mean_error_sq));
    extra.emplace_back("crb_trace", fmt(crb));
  }
  write_stage_manifest(args.out_dir, "estimate", args, std::move(extra));
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_dir, int steps,
              int epochs, int phase2_epochs, int batch, int width, int blocks) {
  SystemConfig cfg = SystemConfig::load(args.config_path);
  fs::create_directories(args.out_dir);
  const Dataset ds = load_dataset(dataset_dir, cfg.omega());
  const auto train_records = ds.subset(ds.splits.train);
  if (train_records.empty()) throw std::invalid_argument("train: empty train split");

  TrainHyper hyper;
  hyper.steps = steps;
  hyper.max_epochs = epochs;
  hyper.phase2_max_epochs = phase2_epochs;
  hyper.batch = batch;
  hyper.transfer_width = width;
  hyper.transfer_blocks = blocks;
  TrainResult result = train(train_records, cfg, hyper, args.seed);

  save_checkpoint(args.out_dir + "/checkpoint.isacdm", result.params);
  write_loss_csv(args.out_dir + "/loss1.csv", result.loss1_curve);
  write_loss_csv(args.out_dir + "/loss2.csv", result.loss2_curve);
  write_stage_manifest(args.out_dir, "train", args,
                       {{"dataset", dataset_dir},
                        {"steps", std::to_string(steps)},
                        {"epochs_run_phase1", std::to_string(result.loss1_curve.size())},
                        {"epochs_run_phase2", std::to_string(result.loss2_curve.size())},
                        {"final_loss1",
                         result.loss1_curve.empty() ? "n/a" : fmt(result.loss1_curve.back())},
                        {"final_loss2",
                         result.loss2_curve.empty() ? "n/a" : fmt(result.loss2_curve.back())}});
  std::cout << "trained: phase1 epochs " << result.loss1_curve.size() << ", phase2 epochs "
            << result.loss2_curve.size() << "\n";
  return 0;
}

int cmd_sample(const CommonArgs& args, const std::string& checkpoint,
               const std::string& channel_file, const std::string& meta_file,
               int n_points, int steps) {
  SystemConfig cfg = SystemConfig::load(args.config_path);
  fs::create_directories(args.out_dir);
  NoiseEstimatorParams params = load_checkpoint(checkpoint);
  const ChannelMatrix h_hat = load_channel(channel_file);
  Vec3 center = cfg.reference_location;
  Vec3 scale = Vec3::Ones();
  if (!meta_file.empty()) {
    const auto meta = read_keyvalue_file(meta_file);
    std::istringstream c(meta.at("center")), s(meta.at("scale"));
    char comma;
    c >> center[0] >> comma >> center[1] >> comma >> center[2];
    s >> scale[0] >> comma >> scale[1] >> comma >> scale[2];
  }
  const DiffusionSchedule sched = make_schedule(steps, 1e-4, 0.05);
  PointCloud5D cloud = sample_cloud(params, h_hat, center, n_points, sched, args.seed);
  cloud.center_m = center;
  cloud.scale_m = scale;
  const auto physical = denormalize_cloud(cloud, cfg.omega());
  write_cloud_csv(args.out_dir + "/sampled.csv", physical);
  write_cloud_ply(args.out_dir + "/sampled.ply", physical);
  write_stage_manifest(args.out_dir, "sample", args,
                       {{"checkpoint", checkpoint},
                        {"channel", channel_file},
                        {"points", std::to_string(n_points)},
                        {"steps", std::to_string(steps)}});
  std::cout << "sampled " << n_points << " points -> " << args.out_dir << "/sampled.csv\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::vector<std::string>& truth_files,
                 const std::vector<std::string>& estimate_files) {
  SystemConfig cfg = SystemConfig::load(args.config_path);
  if (truth_files.size() != estimate_files.size() || truth_files.empty()) {
    throw std::invalid_argument("evaluate: need matching --truth/--estimate lists");
  }
  fs::create_directories(args.out_dir);
  EvalReport report;
  for (std::size_t i = 0; i < truth_files.size(); ++i) {
    const auto truth_pts = read_cloud_csv(truth_files[i]);
    const auto est_pts = read_cloud_csv(estimate_files[i]);
    // both clouds normalized with the truth's center/scale (its 5D map)
    NormalizeOptions nopt;
    nopt.fixed_scale_m = 0.5;
    const PointCloud5D truth = normalize_cloud(truth_pts, cfg.omega(), nopt);
    PointCloud5D est;
    est.center_m = truth.center_m;
    est.scale_m = truth.scale_m;
    const double sig_norm = 1.0 / (kVacuumPermittivity * cfg.omega());
    for (const auto& p : est_pts) {
      Point5D q;
      q[0] = (p.x - truth.center_m[0]) / truth.scale_m[0];
      q[1] = (p.y - truth.center_m[1]) / truth.scale_m[1];
      q[2] = (p.z - truth.center_m[2]) / truth.scale_m[2];
      q[3] = p.eps_r;
      q[4] = p.sigma * sig_norm;
      est.points.push_back(q);
    }
    report.per_sample_chamfer.push_back(chamfer(truth, est));
    // side-by-side viewer exports
    write_cloud_ply(args.out_dir + "/pair" + std::to_string(i) + "_truth.ply", truth_pts);
    write_cloud_ply(args.out_dir + "/pair" + std::to_string(i) + "_estimate.ply", est_pts);
  }
  report.mcd_db = mcd_db_from_values(report.per_sample_chamfer);
  write_eval_csv(args.out_dir + "/evaluation.csv", report);
  write_stage_manifest(args.out_dir, "evaluate", args,
                       {{"pairs", std::to_string(truth_files.size())},
                        {"mcd_db", fmt(report.mcd_db)}});
  std::cout << "MCD = " << report.mcd_db << " dB over " << truth_files.size()
            << " pair(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale EM property sensing lab"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic target dataset");
  add_common(gen, args);
  int records = 8, points = 128;
  double fx = 0, fy = 0, fz = 0;
  gen->add_option("--records", records, "number of records");
  gen->add_option("--points", points, "cloud points per record");
  auto* fxo = gen->add_option("--fixed-center-x", fx, "fix every target center (x)");
  gen->add_option("--fixed-center-y", fy, "fix every target center (y)");
  gen->add_option("--fixed-center-z", fz, "fix every target center (z)");

  auto* design = app.add_subcommand("design-beams", "solve the covariance design");
  add_common(design, args);
  int ue_count = 1;
  double power_dbm = 15.0, min_rate = 1.0, tol = 1e-6;
  design->add_option("--ue-count", ue_count, "number of UEs");
  auto* po = design->add_option("--power-dbm", power_dbm, "transmit power override (dBm)");
  auto* ro = design->add_option("--min-rate", min_rate, "per-UE min rate override (bps/Hz)");
  design->add_option("--tol", tol, "design feasibility tolerance");

  auto* est = app.add_subcommand("estimate", "simulate echoes and LS-estimate a channel");
  add_common(est, args);
  std::string dataset_dir, design_dir;
  int record_id = 0, trials = 0;
  bool noiseless = false;
  double est_power_dbm = 15.0;
  est->add_option("--dataset", dataset_dir, "dataset directory")->required();
  est->add_option("--record", record_id, "record id");
  est->add_option("--design", design_dir, "design directory (optional)");
  est->add_flag("--noiseless", noiseless, "disable receiver noise");
  est->add_option("--trials", trials, "Monte-Carlo trials for the CRB comparison");
  auto* epo = est->add_option("--power-dbm", est_power_dbm, "transmit power override (dBm)");

  auto* tr = app.add_subcommand("train", "train the reverse noise estimator");
  add_common(tr, args);
  std::string train_dataset;
  int steps = 200, epochs = 60, phase2_epochs = 150, batch = 64, width = 512, blocks = 6;
  tr->add_option("--dataset", train_dataset, "dataset directory")->required();
  tr->add_option("--steps", steps, "diffusion steps T");
  tr->add_option("--epochs", epochs, "phase-1 epoch cap");
  tr->add_option("--phase2-epochs", phase2_epochs, "phase-2 epoch cap");
  tr->add_option("--batch", batch, "phase-1 batch size");
  tr->add_option("--width", width, "transfer net width");
  tr->add_option("--blocks", blocks, "transfer net blocks");

  auto* sa = app.add_subcommand("sample", "sample a 5D point cloud from a checkpoint");
  add_common(sa, args);
  std::string checkpoint, channel_file, meta_file;
  int n_points = 128, sample_steps = 200;
  sa->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  sa->add_option("--channel", channel_file, "estimated sensing channel file")->required();
  sa->add_option("--meta", meta_file, "record meta for center/scale (optional)");
  sa->add_option("--points", n_points, "points to sample");
  sa->add_option("--steps", sample_steps, "diffusion steps T");

  auto* ev = app.add_subcommand("evaluate", "Chamfer/MCD against ground truth");
  add_common(ev, args);
  std::vector<std::string> truth_files, estimate_files;
  ev->add_option("--truth", truth_files, "ground-truth cloud CSV (repeatable)")->required();
  ev->add_option("--estimate", estimate_files, "estimated cloud CSV (repeatable)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_data(args, records, points, fx, !fxo->empty(), fy, fz);
    }
    if (design->parsed()) {
      return cmd_design_beams(args, ue_count, power_dbm, !po->empty(), min_rate,
                              !ro->empty(), tol);
    }
    if (est->parsed()) {
      return cmd_estimate(args, dataset_dir, record_id, design_dir, noiseless, trials,
                          est_power_dbm, !epo->empty());
    }
    if (tr->parsed()) {
      return cmd_train(args, train_dataset, steps, epochs, phase2_epochs, batch, width,
                       blocks);
    }
    if (sa->parsed()) {
      return cmd_sample(args, checkpoint, channel_file, meta_file, n_points,
                        sample_steps);
    }
    if (ev->parsed()) {
      return cmd_evaluate(args, truth_files, estimate_files);
    }
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::domain_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return 3;
  }
  return 0;
}
