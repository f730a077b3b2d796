#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "clothfit/fitting.hpp"
#include "clothfit/synth.hpp"

namespace fs = std::filesystem;
using namespace clothfit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitMissingInput = 2;

// Plain key=value lines; '#' comments and blank lines skipped.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

void require_file(const std::string& path) {
  if (!fs::exists(path))
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            path);
}

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int resolution = 64;
  double iso = 0.01;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--resolution", args.resolution, "extraction grid nodes per axis");
  cmd->add_option("--iso", args.iso, "extraction iso level (meters)");
}

// Config-file values fill in anything the command line left at default.
void apply_config(const CLI::App* cmd, CommonArgs& args,
                  std::map<std::string, std::string>& kv) {
  auto take = [&](const char* flag, const char* key, auto& slot) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    if (!cmd->get_option(flag)->empty()) return;  // flag wins
    std::istringstream ss(it->second);
    ss >> slot;
    if (ss.fail()) throw std::invalid_argument(std::string("bad config value for ") + key);
    kv.erase(it);
  };
  take("--seed", "seed", args.seed);
  take("--out", "out", args.out_dir);
  take("--resolution", "resolution", args.resolution);
  take("--iso", "iso", args.iso);
}

int run_synth(const CommonArgs& args, const std::string& truncate,
              const std::string& gt_path) {
  SynthConfig cfg = SynthConfig::with_defaults(args.seed);
  cfg.resolution = args.resolution;
  cfg.iso = args.iso;
  if (!gt_path.empty()) {
    require_file(gt_path);
    cfg.gt_state = load_cloth_state(gt_path);
  }
  if (truncate == "hips")
    cfg.truncation = SynthConfig::Truncation::Hips;
  else if (truncate == "chest")
    cfg.truncation = SynthConfig::Truncation::Chest;
  else if (truncate != "none")
    throw std::invalid_argument("unknown truncation: " + truncate);
  SceneManifest m = synthesize_scene(cfg, args.out_dir);
  std::cout << "scene written: " << (fs::path(args.out_dir) / "manifest.json").string()
            << "\n";
  (void)m;
  return kExitOk;
}

int run_fit(const CommonArgs& args, const std::string& manifest_path,
            const std::string& ablate, int max_iters, double lr,
            bool random_init) {
  require_file(manifest_path);
  SceneManifest m = load_manifest(manifest_path);
  require_file(m.body_dir + "/body.json");
  require_file(m.segmentation_fit_path);
  require_file(m.densepose_fit_path);

  BodyModel model = load_body(m.body_dir);
  ShapeParams beta;
  beta.beta = m.beta;
  TPoseBody tpose = shape_body(model, beta);
  ProceduralBackend backend(tpose);
  ObservationSet obs = load_observation(m, false);

  FitConfig cfg;
  cfg.seed = args.seed;
  cfg.max_iters = max_iters;
  cfg.lr = lr;
  cfg.random_latent_init = random_init;
  if (ablate == "no-reg")
    cfg.no_reg = true;
  else if (ablate == "no-dp")
    cfg.no_dp = true;
  else if (ablate == "silhouette-for-dp")
    cfg.silhouette_for_dp = true;
  else if (!ablate.empty())
    throw std::invalid_argument("unknown ablation: " + ablate);

  FitResult result = fit_clothes(tpose, backend, obs, cfg);
  fs::create_directories(args.out_dir);
  save_cloth_state(result.state, (fs::path(args.out_dir) / "state.json").string());
  save_fit_trace(result, (fs::path(args.out_dir) / "trace.jsonl").string());
  std::cout << "iterations " << result.iterations << " converged "
            << (result.converged ? "yes" : "no") << " total "
            << result.final_loss.total << "\n";
  if (result.no_supervision) std::cout << "warning: no query points, nothing fitted\n";
  return kExitOk;
}

int run_eval(const CommonArgs& args, const std::string& manifest_path,
             const std::string& state_path) {
  require_file(manifest_path);
  SceneManifest m = load_manifest(manifest_path);
  require_file(state_path);
  require_file(m.body_dir + "/body.json");
  require_file(m.segmentation_eval_path);
  require_file(m.densepose_eval_path);

  BodyModel model = load_body(m.body_dir);
  ShapeParams beta;
  beta.beta = m.beta;
  TPoseBody tpose = shape_body(model, beta);
  ProceduralBackend backend(tpose);
  ClothState state = load_cloth_state(state_path);

  auto recon = extract_cloth_meshes(state, backend, tpose, args.resolution, args.iso);
  std::array<Mesh, kClothCount> gt;
  for (int c = 0; c < kClothCount; ++c)
    if (!m.gt_mesh_paths[c].empty()) {
      require_file(m.gt_mesh_paths[c]);
      gt[c] = load_obj(m.gt_mesh_paths[c]);
    }

  PoseParams theta;
  theta.theta = m.theta;
  auto collect = [](const std::array<Mesh, kClothCount>& meshes) {
    std::vector<Mesh> out;
    for (const Mesh& mm : meshes)
      if (!mm.empty()) out.push_back(mm);
    return out;
  };
  auto merge = [](const PosedScene& scene) {
    Mesh all = scene.body;
    for (const Mesh& c : scene.cloths) {
      std::uint32_t base = static_cast<std::uint32_t>(all.vertices.size());
      all.vertices.insert(all.vertices.end(), c.vertices.begin(), c.vertices.end());
      for (const Tri& f : c.faces)
        all.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    }
    all.attachment.clear();
    return all;
  };
  Mesh recon_posed = merge(pose_deform(tpose, collect(recon), theta));
  Mesh gt_posed = merge(pose_deform(tpose, collect(gt), theta));

  MetricReport report;
  CdResult cd = evaluate_cd(recon_posed, gt_posed, m.camera);
  report.cd_mm = cd.cd_mm;
  report.alignment = cd.alignment;
  report.matched_pairs = cd.matched_pairs;

  ObservationSet obs_eval = load_observation(m, true);
  BccResult bcc = evaluate_bcc(recon, obs_eval, tpose);
  report.bcc = bcc.per_class;
  report.bcc_average = bcc.average;

  fs::create_directories(args.out_dir);
  for (int c = 0; c < kClothCount; ++c)
    if (!recon[c].empty())
      save_obj(recon[c],
               (fs::path(args.out_dir) /
                (std::string("recon_") + cloth_name(static_cast<ClothType>(c)) + ".obj"))
                   .string());
  std::ofstream out((fs::path(args.out_dir) / "report.json").string());
  out << metric_report_json(report) << "\n";
  std::cout << "cd_mm " << report.cd_mm << " bcc_avg " << report.bcc_average << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloth reconstruction toolkit: synthetic scenes, latent fitting, metrics"};
  app.require_subcommand(1);

  CommonArgs synth_args, fit_args, eval_args;
  std::string truncate = "none";
  std::string manifest_path, state_path, ablate, gt_path;
  int max_iters = 300;
  double lr = 1e-2;
  bool random_init = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  add_common(synth, synth_args);
  synth->add_option("--truncate", truncate,
                    "crop the fit observation: none, hips, chest");
  synth->add_option("--gt", gt_path, "cloth state JSON to use instead of sampling");

  CLI::App* fit = app.add_subcommand("fit", "fit cloth state to an observation");
  add_common(fit, fit_args);
  fit->add_option("--manifest", manifest_path, "scene manifest path")->required();
  fit->add_option("--ablate", ablate, "one of: no-reg, no-dp, silhouette-for-dp");
  fit->add_option("--iters", max_iters, "max iterations");
  fit->add_option("--lr", lr, "learning rate");
  fit->add_flag("--random-init", random_init, "gaussian latent initialization");

  CLI::App* eval = app.add_subcommand("eval", "metrics for a fitted state");
  add_common(eval, eval_args);
  eval->add_option("--manifest", manifest_path, "scene manifest path")->required();
  eval->add_option("--state", state_path, "cloth state JSON to evaluate")->required();

  try {
    app.parse(argc, argv);
    CLI::App* cmd = app.get_subcommands().front();
    CommonArgs* args = synth->parsed() ? &synth_args
                       : fit->parsed() ? &fit_args
                                       : &eval_args;
    if (!args->config_path.empty()) {
      require_file(args->config_path);
      auto kv = read_config(args->config_path);
      apply_config(cmd, *args, kv);
    }
    if (synth->parsed()) return run_synth(*args, truncate, gt_path);
    if (fit->parsed()) return run_fit(*args, manifest_path, ablate, max_iters, lr, random_init);
    return run_eval(*args, manifest_path, state_path);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  } catch (const std::system_error& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
