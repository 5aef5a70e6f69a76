// mapprior: simulate, train, localize, eval.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapprior/baselines.hpp"
#include "mapprior/io.hpp"
#include "mapprior/maps.hpp"
#include "mapprior/metrics.hpp"
#include "mapprior/particle_filter.hpp"
#include "mapprior/prior_model.hpp"
#include "mapprior/trajectory.hpp"
#include "mapprior/weights_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mapprior;

namespace {

constexpr int kManifestVersion = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Common {
  std::string map = "corridor_rooms";
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--map", c.map, "named layout (corridor_rooms, corridor, open, hallway) or a .pgm with a .json sidecar")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "seed for all randomness")->capture_default_str();
  cmd->add_option("--config", c.config, "JSON config overriding defaults");
  auto* o = cmd->add_option("--out", c.out, "output path");
  if (out_required) o->required();
}

OccupancyMap load_named_map(const std::string& name) {
  const fs::path p(name);
  if (p.extension() == ".pgm") {
    fs::path meta = p;
    meta.replace_extension(".json");
    return load_map(p, meta);
  }
  return maps::by_name(name);
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageError("config " + path + " is not a JSON object");
  return j;
}

/// Section of the config, rejecting keys outside `allowed`.
json section(const json& config, const std::string& name, std::initializer_list<const char*> allowed) {
  if (!config.contains(name)) return json::object();
  const json& s = config.at(name);
  if (!s.is_object()) throw UsageError("config section '" + name + "' must be an object");
  for (const auto& [k, v] : s.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw UsageError("config section '" + name + "' has unknown key '" + k + "'");
  }
  return s;
}

void check_sections(const json& config, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : config.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw UsageError("unknown config section '" + k + "' for this command");
  }
}

NoiseProfile noise_from(const json& config, MotionProfile profile) {
  NoiseProfile n = NoiseProfile::for_profile(profile);
  const json s = section(config, "noise",
                         {"velocity_bias_sigma", "additive_sigma_cells", "heading_drift_sigma", "bias_period_s"});
  n.velocity_bias_sigma = s.value("velocity_bias_sigma", n.velocity_bias_sigma);
  n.additive_sigma_cells = s.value("additive_sigma_cells", n.additive_sigma_cells);
  n.heading_drift_sigma = s.value("heading_drift_sigma", n.heading_drift_sigma);
  n.bias_period_s = s.value("bias_period_s", n.bias_period_s);
  return n;
}

json to_json(const NoiseProfile& n) {
  return {{"velocity_bias_sigma", n.velocity_bias_sigma},
          {"additive_sigma_cells", n.additive_sigma_cells},
          {"heading_drift_sigma", n.heading_drift_sigma},
          {"bias_period_s", n.bias_period_s}};
}

StepNoise steps_from(const json& config) {
  StepNoise n;
  const json s =
      section(config, "steps", {"stride_mean_m", "stride_sigma_m", "heading_noise_rad", "heading_drift_rad_per_step"});
  n.stride_mean_m = s.value("stride_mean_m", n.stride_mean_m);
  n.stride_sigma_m = s.value("stride_sigma_m", n.stride_sigma_m);
  n.heading_noise_rad = s.value("heading_noise_rad", n.heading_noise_rad);
  n.heading_drift_rad_per_step = s.value("heading_drift_rad_per_step", n.heading_drift_rad_per_step);
  return n;
}

json to_json(const StepNoise& n) {
  return {{"stride_mean_m", n.stride_mean_m},
          {"stride_sigma_m", n.stride_sigma_m},
          {"heading_noise_rad", n.heading_noise_rad},
          {"heading_drift_rad_per_step", n.heading_drift_rad_per_step}};
}

FilterConfig filter_from(const json& config, MotionProfile profile) {
  FilterConfig f = FilterConfig::for_profile(profile);
  const json s = section(config, "filter",
                         {"particle_count", "init_sigma", "motion_sigma", "reinit_radius", "reinit_fraction"});
  f.particle_count = s.value("particle_count", f.particle_count);
  f.init_sigma = s.value("init_sigma", f.init_sigma);
  f.motion_sigma = s.value("motion_sigma", f.motion_sigma);
  f.reinit_radius = s.value("reinit_radius", f.reinit_radius);
  f.reinit_fraction = s.value("reinit_fraction", f.reinit_fraction);
  f.validate();
  return f;
}

json to_json(const FilterConfig& f) {
  return {{"particle_count", f.particle_count}, {"init_sigma", f.init_sigma},
          {"motion_sigma", f.motion_sigma},     {"reinit_radius", f.reinit_radius},
          {"reinit_fraction", f.reinit_fraction}, {"rate_hz", f.rate_hz},
          {"window_len", f.window_len},         {"mode", profile_name(f.mode)}};
}

CrfParams crf_from(const json& config) {
  CrfParams p;
  const json s = section(config, "crf", {"unary_weight", "pairwise_weight", "edge_length"});
  p.unary_weight = s.value("unary_weight", p.unary_weight);
  p.pairwise_weight = s.value("pairwise_weight", p.pairwise_weight);
  p.edge_length = s.value("edge_length", p.edge_length);
  return p;
}

json to_json(const CrfParams& p) {
  return {{"unary_weight", p.unary_weight}, {"pairwise_weight", p.pairwise_weight}, {"edge_length", p.edge_length}};
}

void write_manifest(const fs::path& path, const std::string& command, const Common& c, const json& config,
                    const json& inputs, const json& outputs, const json& timings) {
  json m = {{"format_version", kManifestVersion},
            {"command", command},
            {"seed", c.seed},
            {"map", c.map},
            {"config", config},
            {"inputs", inputs},
            {"outputs", outputs},
            {"timings", timings}};
  write_file_atomic(path, m.dump(2) + "\n");
}

fs::path sibling_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::string traj_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%03d", i);
  return buf;
}

Pose parse_pose(const std::string& text) {
  Pose p;
  double* fields[] = {&p.x, &p.y, &p.theta};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find(',', pos) : text.size();
    if (end == std::string::npos) throw UsageError("--start expects x,y,theta");
    const char* b = text.data() + pos;
    const char* e = text.data() + end;
    auto [ptr, ec] = std::from_chars(b, e, *fields[i]);
    if (ec != std::errc{} || ptr != e) throw UsageError("--start expects x,y,theta");
    pos = end + 1;
  }
  return p;
}

// --- simulate --------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string profile = "pedestrian";
  int n_trajs = 8;
  double duration = 600.0;
};

void cmd_simulate(const SimulateArgs& a) {
  const auto t0 = Clock::now();
  if (a.n_trajs < 1) throw UsageError("--n-trajs must be >= 1");
  if (!(a.duration > 0)) throw UsageError("--duration must be > 0 seconds");
  const json config = read_config(a.common.config);
  check_sections(config, {"noise", "steps"});
  const MotionProfile profile = parse_profile(a.profile);
  const NoiseProfile noise = noise_from(config, profile);
  const StepNoise step_noise = steps_from(config);
  const OccupancyMap map = load_named_map(a.common.map);

  // Everything is generated before the first write so a failure leaves no files.
  struct Item {
    Trajectory gt;
    OdometryStream odom;
    std::optional<StepEvents> steps;
  };
  std::vector<Item> items;
  std::mt19937_64 seeds(a.common.seed);
  for (int i = 0; i < a.n_trajs; ++i) {
    const std::uint64_t s_traj = seeds(), s_odom = seeds(), s_steps = seeds();
    Item it{generate_trajectory(map, s_traj, a.duration, profile), {}, std::nullopt};
    it.odom = corrupt_to_odometry(it.gt, noise, map.resolution(), s_odom);
    if (profile == MotionProfile::Pedestrian) it.steps = synthesize_steps(it.gt, step_noise, s_steps);
    items.push_back(std::move(it));
  }
  const double t_generate = seconds_since(t0);

  const fs::path dir(a.common.out);
  fs::create_directories(dir);
  json outputs = json::array();
  for (int i = 0; i < a.n_trajs; ++i) {
    const std::string name = traj_name(i);
    write_trajectory_csv(dir / (name + ".gt.csv"), items[i].gt);
    write_odometry_csv(dir / (name + ".odometry.csv"), items[i].odom);
    outputs.push_back(name + ".gt.csv");
    outputs.push_back(name + ".odometry.csv");
    if (items[i].steps) {
      write_steps_csv(dir / (name + ".steps.csv"), *items[i].steps);
      outputs.push_back(name + ".steps.csv");
    }
  }
  const json cfg = {{"profile", a.profile},
                    {"n_trajs", a.n_trajs},
                    {"duration_s", a.duration},
                    {"noise", to_json(noise)},
                    {"steps", to_json(step_noise)}};
  write_manifest(dir / "manifest.json", "simulate", a.common, cfg, json::array(), outputs,
                 {{"generate_s", t_generate}, {"total_s", seconds_since(t0)}});
}

// --- train -----------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
};

std::vector<fs::path> list_with_suffix(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (e.is_regular_file() && n.size() > suffix.size() && n.ends_with(suffix)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void cmd_train(const TrainArgs& a) {
  const auto t0 = Clock::now();
  const json config = read_config(a.common.config);
  check_sections(config, {"model", "dataset", "train", "noise"});
  const ModelConfig mc = ModelConfig::from_json(section(
      config, "model",
      {"channels", "unet_depth", "base_width", "lstm_layers", "window_len", "crop_size", "input_scale"}));
  DatasetConfig dc;
  dc.noise = noise_from(config, MotionProfile::Pedestrian);
  const json ds = section(config, "dataset", {"windows_per_crop", "groups", "val_fraction", "loss_weighting"});
  dc.windows_per_crop = ds.value("windows_per_crop", dc.windows_per_crop);
  dc.groups = ds.value("groups", dc.groups);
  dc.val_fraction = ds.value("val_fraction", dc.val_fraction);
  const std::string weighting = ds.value("loss_weighting", std::string("balanced"));
  if (weighting == "inverse_area")
    dc.weighting = LossWeighting::InverseArea;
  else if (weighting != "balanced")
    throw UsageError("dataset.loss_weighting must be \"balanced\" or \"inverse_area\"");
  TrainConfig tc;
  const json ts = section(config, "train", {"epochs", "batch_size", "lr", "warmup_steps", "grad_clip", "time_budget_s"});
  tc.epochs = ts.value("epochs", tc.epochs);
  tc.batch_size = ts.value("batch_size", tc.batch_size);
  tc.lr = ts.value("lr", tc.lr);
  tc.warmup_steps = ts.value("warmup_steps", tc.warmup_steps);
  tc.grad_clip = ts.value("grad_clip", tc.grad_clip);
  tc.time_budget_s = ts.value("time_budget_s", tc.time_budget_s);

  const OccupancyMap map = load_named_map(a.common.map);
  const auto files = list_with_suffix(a.data, ".gt.csv");
  if (files.empty()) throw IoError("no *.gt.csv trajectories in " + a.data);
  std::vector<Trajectory> trajs;
  json inputs = json::array();
  for (const auto& f : files) {
    trajs.push_back(read_trajectory_csv(f));
    inputs.push_back(f.string());
  }

  std::mt19937_64 seeds(a.common.seed);
  const std::uint64_t s_data = seeds(), s_init = seeds(), s_train = seeds();
  const Dataset data = build_dataset(map, trajs, mc, dc, s_data);
  const double t_data = seconds_since(t0);
  const auto t1 = Clock::now();
  const TrainResult r = train(mc, init_parameters(mc, s_init), data, tc, s_train, [](const LossRecord& l) {
    std::fprintf(stderr, "epoch %d train %.6g val %.6g\n", l.epoch, l.train_loss, l.val_loss);
  });
  const double t_train = seconds_since(t1);

  const fs::path out(a.common.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  PriorModel{mc, r.best_params}.save(out);
  fs::path loss = out;
  loss.replace_extension(".loss.csv");
  write_loss_csv(loss, r.curve);

  const json cfg = {{"model", mc.to_json()},
                    {"dataset",
                     {{"windows_per_crop", dc.windows_per_crop},
                      {"groups", dc.groups},
                      {"val_fraction", dc.val_fraction},
                      {"loss_weighting", weighting},
                      {"train_samples", data.train_samples()},
                      {"val_samples", data.val_samples()}}},
                    {"noise", to_json(dc.noise)},
                    {"train", {{"epochs", tc.epochs}, {"batch_size", tc.batch_size}, {"lr", tc.lr},
                               {"warmup_steps", tc.warmup_steps}, {"grad_clip", tc.grad_clip},
                               {"time_budget_s", tc.time_budget_s}}},
                    {"best_epoch", r.best_epoch}};
  write_manifest(sibling_manifest(out), "train", a.common, cfg, inputs,
                 {out.string(), weights_blob_path(out).string(), loss.string()},
                 {{"dataset_s", t_data}, {"train_s", t_train}, {"total_s", seconds_since(t0)}});
}

// --- localize --------------------------------------------------------------------

struct LocalizeArgs {
  Common common;
  std::string odom;
  std::string method;
  std::string weights;
  std::string profile = "pedestrian";
  std::string start;
  std::string start_from;
  std::string steps;
  std::string crf_tune;
};

void cmd_localize(const LocalizeArgs& a) {
  const auto t0 = Clock::now();
  const json config = read_config(a.common.config);
  check_sections(config, {"filter", "crf"});
  const MotionProfile profile = parse_profile(a.profile);
  const OccupancyMap map = load_named_map(a.common.map);

  Pose start;
  if (!a.start.empty()) {
    start = parse_pose(a.start);
  } else if (!a.start_from.empty()) {
    start = read_trajectory_csv(a.start_from).poses.front();
  } else {
    throw UsageError("localize needs --start x,y,theta or --start-from <trajectory.csv>");
  }
  json inputs = json::object();
  if (!a.odom.empty()) inputs["odometry"] = a.odom;
  if (!a.start_from.empty()) inputs["start_from"] = a.start_from;

  json cfg = {{"method", a.method}, {"profile", a.profile}};
  json timings;
  Trajectory est;
  std::mt19937_64 seeds(a.common.seed);
  const std::uint64_t s_filter = seeds();

  if (a.method == "pdr") {
    if (a.steps.empty()) throw UsageError("method pdr needs --steps <steps.csv>");
    inputs["steps"] = a.steps;
    est = pdr(read_steps_csv(a.steps), start);
    cfg["step_length_m"] = kPdrStepLength;
  } else {
    if (a.odom.empty()) throw UsageError("method " + a.method + " needs --odom <odometry.csv>");
    const OdometryStream odom = read_odometry_csv(a.odom);
    if (a.method == "odom") {
      est = integrate_odometry(odom, start);
    } else if (a.method == "crf") {
      CrfParams p = crf_from(config);
      if (!a.crf_tune.empty()) {
        std::vector<CrfValidationRun> runs;
        for (const auto& gt : list_with_suffix(a.crf_tune, ".gt.csv")) {
          std::string base = gt.string();
          base.resize(base.size() - std::string(".gt.csv").size());
          runs.push_back({read_odometry_csv(base + ".odometry.csv"), read_trajectory_csv(gt)});
        }
        if (runs.empty()) throw IoError("no *.gt.csv runs in " + a.crf_tune);
        p = grid_search_crf(map, runs);
        inputs["crf_tune"] = a.crf_tune;
      }
      cfg["crf"] = to_json(p);
      const auto t1 = Clock::now();
      est = crf_match(build_graph(map, p.edge_length), odom, start, p);
      timings["crf_s"] = seconds_since(t1);
    } else {
      const PriorKind kind = parse_prior(a.method);
      const FilterConfig fc = filter_from(config, profile);
      cfg["filter"] = to_json(fc);
      std::optional<PriorModel> model;
      std::optional<DeepMapTensor> tensor;
      PriorSource source;
      source.kind = kind;
      if (kind == PriorKind::Learned) {
        if (a.weights.empty()) throw UsageError("method ours needs --weights <model.json>");
        inputs["weights"] = a.weights;
        model = PriorModel::load(a.weights).with_window_len(fc.window_len);
        const auto t1 = Clock::now();
        tensor = encode_map(map, *model);
        timings["encode_map_s"] = seconds_since(t1);
        source.model = &*model;
        source.map_tensor = &*tensor;
      }
      const FilterResult r = run_filter(odom, map, source, start, fc, s_filter);
      est = r.estimate;
      double sum = 0.0;
      for (double v : r.step_ms) sum += v;
      timings["step_ms"] = r.step_ms;
      timings["mean_step_ms"] = r.step_ms.empty() ? 0.0 : sum / static_cast<double>(r.step_ms.size());
      cfg["reinit_count"] = r.reinit_count;
      cfg["degenerate_count"] = r.degenerate_count;
    }
  }

  const fs::path out(a.common.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_trajectory_csv(out, est);
  timings["total_s"] = seconds_since(t0);
  write_manifest(sibling_manifest(out), "localize", a.common, cfg, inputs, {out.string()}, timings);
}

// --- eval ------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string est_dir;
  std::string gt_dir;
};

void cmd_eval(const EvalArgs& a) {
  const auto t0 = Clock::now();
  const json config = read_config(a.common.config);
  check_sections(config, {});
  // Estimates are <trajectory>.<method>.csv; ground truth is <trajectory>.gt.csv.
  // Odometry and step inputs that share the directory are skipped.
  std::vector<MetricsRow> rows;
  std::vector<std::string> unmatched;
  std::map<std::string, std::vector<double>> per_method_errors;
  json inputs = json::array();
  for (const auto& f : list_with_suffix(a.est_dir, ".csv")) {
    const std::string stem = f.filename().string().substr(0, f.filename().string().size() - 4);
    const auto dot = stem.rfind('.');
    if (dot == std::string::npos || dot == 0) continue;
    const std::string traj = stem.substr(0, dot), method = stem.substr(dot + 1);
    if (method == "odometry" || method == "steps" || method == "loss") continue;
    const fs::path gt = fs::path(a.gt_dir) / (traj + ".gt.csv");
    if (!fs::exists(gt)) {
      unmatched.push_back(f.filename().string());
      continue;
    }
    const TrajectoryError e = trajectory_error(read_trajectory_csv(f), read_trajectory_csv(gt));
    rows.push_back({method, a.common.map, traj, e.ate, e.ee, e.per_step_errors.size()});
    auto& all = per_method_errors[method];
    all.insert(all.end(), e.per_step_errors.begin(), e.per_step_errors.end());
    inputs.push_back(f.string());
  }
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& u : unmatched) list += (list.empty() ? "" : ", ") + u;
    throw IoError("no ground truth in " + a.gt_dir + " for: " + list);
  }
  if (rows.empty()) throw IoError("no <trajectory>.<method>.csv estimates in " + a.est_dir);

  json jrows = json::array();
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_method;
  for (const MetricsRow& r : rows) {
    jrows.push_back({{"method", r.method}, {"map", r.map}, {"trajectory", r.seed},
                     {"ate_m", r.ate_m}, {"ee_m", r.ee_m}, {"n_steps", r.n_steps}});
    by_method[r.method].first.push_back(r.ate_m);
    by_method[r.method].second.push_back(r.ee_m);
  }
  const fs::path dir(a.common.out);
  fs::create_directories(dir);
  json summary = json::object();
  json outputs = {"metrics.json"};
  for (const auto& [method, v] : by_method) {
    const auto mean = [](const std::vector<double>& x) {
      double s = 0.0;
      for (double e : x) s += e;
      return s / static_cast<double>(x.size());
    };
    summary[method] = {{"mean_ate_m", mean(v.first)}, {"mean_ee_m", mean(v.second)}, {"trajectories", v.first.size()}};
    const std::string cdf = "cdf_" + method + ".csv";
    write_cdf_csv(dir / cdf, cdf_points(per_method_errors[method]));
    outputs.push_back(cdf);
  }
  write_file_atomic(dir / "metrics.json", json{{"rows", jrows}, {"per_method", summary}}.dump(2) + "\n");
  write_manifest(dir / "manifest.json", "eval", a.common, json::object(), inputs, outputs,
                 {{"total_s", seconds_since(t0)}});
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return "usage";
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  if (dynamic_cast<const WeightsError*>(&e)) return "weights";
  if (dynamic_cast<const ModelError*>(&e)) return "model";
  if (dynamic_cast<const json::exception*>(&e)) return "config";
  return "runtime";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned map priors for odometry-only localization"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "ground-truth trajectories and corrupted odometry");
  add_common(c_sim, sim.common);
  c_sim->add_option("--profile", sim.profile, "pedestrian or wheeled")->capture_default_str();
  c_sim->add_option("--n-trajs", sim.n_trajs)->capture_default_str();
  c_sim->add_option("--duration", sim.duration, "seconds per trajectory")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train the prior network");
  add_common(c_train, tr.common);
  c_train->add_option("--data", tr.data, "directory written by simulate")->required();

  LocalizeArgs loc;
  auto* c_loc = app.add_subcommand("localize", "estimate a trajectory from odometry");
  add_common(c_loc, loc.common);
  c_loc->add_option("--odom", loc.odom, "odometry CSV (all methods but pdr)");
  c_loc->add_option("--method", loc.method, "ours, heuristic, crf, pdr or odom")
      ->required()
      ->check(CLI::IsMember({"ours", "heuristic", "crf", "pdr", "odom"}));
  c_loc->add_option("--weights", loc.weights, "model manifest for ours");
  c_loc->add_option("--profile", loc.profile, "pedestrian or wheeled")->capture_default_str();
  c_loc->add_option("--start", loc.start, "initial pose x,y,theta");
  c_loc->add_option("--start-from", loc.start_from, "take the initial pose from this trajectory CSV");
  c_loc->add_option("--steps", loc.steps, "step events CSV for pdr");
  c_loc->add_option("--crf-tune", loc.crf_tune, "grid-search CRF weights on the runs in this directory");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "ATE/EE tables and error CDFs");
  add_common(c_eval, ev.common);
  c_eval->add_option("--est", ev.est_dir, "directory of <trajectory>.<method>.csv")->required();
  c_eval->add_option("--gt", ev.gt_dir, "directory of <trajectory>.gt.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (c_sim->parsed()) cmd_simulate(sim);
    if (c_train->parsed()) cmd_train(tr);
    if (c_loc->parsed()) cmd_localize(loc);
    if (c_eval->parsed()) cmd_eval(ev);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
