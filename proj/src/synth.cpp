#include "clothfit/synth.hpp"

#include "clothfit/fitting.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace clothfit {

namespace fs = std::filesystem;

SynthConfig SynthConfig::with_defaults(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  // Arms lowered 35 degrees so sleeves read against the torso in 2D.
  cfg.pose.set_axis_angle(16, Vec3(0, 0, -0.6));
  cfg.pose.set_axis_angle(17, Vec3(0, 0, 0.6));
  return cfg;
}

void SynthConfig::validate() const {
  body_spec.validate();
  beta.validate();
  pose.validate();
  camera.validate();
  if (resolution < 2) throw std::invalid_argument("synth: resolution >= 2");
  if (iso <= 0) throw std::invalid_argument("synth: iso must be positive");
  if (gt_state) gt_state->validate();
}

ClothState sample_gt_state(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> latent(0.0, 0.4);

  ClothState s = ClothState::neutral();
  bool pants = u01(rng) < 0.6;
  s.existence[int(ClothType::UpperCloth)] = 1.0;
  s.existence[int(ClothType::Coat)] = u01(rng) < 0.25 ? 1.0 : 0.0;
  s.existence[int(ClothType::Pants)] = pants ? 1.0 : 0.0;
  s.existence[int(ClothType::Skirt)] = pants ? 0.0 : 1.0;
  s.existence[int(ClothType::Shoes)] = u01(rng) < 0.75 ? 1.0 : 0.0;

  for (int c = 0; c < kClothCount; ++c) {
    int active = active_latent_dim(static_cast<ClothType>(c));
    for (int k = 0; k < active; ++k)
      s.latents[c].z[k] = std::clamp(latent(rng), -2.0, 2.0);
  }
  bool male = u01(rng) < 0.5;
  s.gender_male = male ? 1.0 : 0.0;
  s.gender_female = 1.0 - s.gender_male;
  return s;
}

namespace {

std::uint8_t cloth_label(ClothType c) {
  switch (c) {
    case ClothType::UpperCloth: return kLabelUpper;
    case ClothType::Coat: return kLabelCoat;
    case ClothType::Pants: return kLabelPants;
    case ClothType::Skirt: return kLabelSkirt;
    case ClothType::Shoes: return kLabelShoes;
  }
  throw std::logic_error("bad cloth type");
}

// Renders body + posed cloth meshes into one segmentation; occlusion by
// depth through a single combined rasterization.
ClothSegmentation render_segmentation(const PosedScene& scene,
                                      const std::array<bool, kClothCount>& gated,
                                      const Camera& camera) {
  Mesh combined = scene.body;
  std::vector<std::uint8_t> face_label(combined.faces.size(),
                                       kLabelNonClothBody);
  int cloth_idx = 0;
  for (int c = 0; c < kClothCount; ++c) {
    if (!gated[c]) continue;
    const Mesh& cloth = scene.cloths[cloth_idx++];
    std::uint32_t base = static_cast<std::uint32_t>(combined.vertices.size());
    combined.vertices.insert(combined.vertices.end(), cloth.vertices.begin(),
                             cloth.vertices.end());
    for (const Tri& f : cloth.faces) {
      combined.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
      face_label.push_back(cloth_label(static_cast<ClothType>(c)));
    }
  }

  FaceIndexMap raster = rasterize(combined, camera);
  ClothSegmentation seg;
  seg.width = camera.width;
  seg.height = camera.height;
  seg.labels.assign(size_t(seg.width) * seg.height, kLabelBackground);
  for (int y = 0; y < seg.height; ++y)
    for (int x = 0; x < seg.width; ++x)
      if (raster.covered(x, y))
        seg.labels[raster.idx(x, y)] = face_label[raster.face[raster.idx(x, y)]];
  return seg;
}

// Simulated image truncation: rows below the cut line become background /
// uncovered in both observation maps.
void truncate_below(ClothSegmentation& seg, FaceIndexMap& dp,
                    const Camera& camera, double world_y) {
  double py;
  double px_unused;
  camera.project(Vec3(0, world_y, 0), px_unused, py);
  int first_cropped_row = std::max(0, int(std::floor(py)));
  for (int y = first_cropped_row; y < seg.height; ++y)
    for (int x = 0; x < seg.width; ++x) {
      seg.labels[size_t(y) * seg.width + x] = kLabelBackground;
      dp.face[dp.idx(x, y)] = -1;
    }
}

}  // namespace

SceneManifest synthesize_scene(const SynthConfig& cfg,
                               const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  auto path = [&](const std::string& name) {
    return (fs::path(out_dir) / name).string();
  };

  BodyModel model = make_procedural_body(cfg.body_spec, "neutral");
  TPoseBody tpose = shape_body(model, cfg.beta);
  ProceduralBackend backend(tpose);

  ClothState gt = cfg.gt_state ? *cfg.gt_state : sample_gt_state(cfg.seed);

  auto gt_meshes =
      extract_cloth_meshes(gt, backend, tpose, cfg.resolution, cfg.iso);
  std::array<bool, kClothCount> gated{};
  std::vector<Mesh> gated_meshes;
  for (int c = 0; c < kClothCount; ++c) {
    gated[c] = existence_gate(gt.existence[c]) && !gt_meshes[c].empty();
    if (gated[c]) gated_meshes.push_back(gt_meshes[c]);
  }

  PosedScene scene = pose_deform(tpose, gated_meshes, cfg.pose);
  FaceIndexMap densepose = rasterize(scene.body, cfg.camera);
  ClothSegmentation seg = render_segmentation(scene, gated, cfg.camera);

  SceneManifest m;
  m.body_dir = path("body");
  m.state_path = path("gt_state.json");
  m.densepose_eval_path = path("densepose_eval.dpm");
  m.segmentation_eval_path = path("segmentation_eval.pgm");
  m.densepose_fit_path = path("densepose_fit.dpm");
  m.segmentation_fit_path = path("segmentation_fit.pgm");
  m.camera = cfg.camera;
  m.gender_male = gt.gender_male > 0.5;
  m.beta = cfg.beta.beta;
  m.theta = cfg.pose.theta;
  m.seed = cfg.seed;
  m.resolution = cfg.resolution;
  m.iso = cfg.iso;

  fs::create_directories(m.body_dir);
  save_body(model, m.body_dir);
  save_cloth_state(gt, m.state_path);
  save_face_index_map(densepose, m.densepose_eval_path);
  save_segmentation(seg, m.segmentation_eval_path);

  ClothSegmentation seg_fit = seg;
  FaceIndexMap dp_fit = densepose;
  if (cfg.truncation != SynthConfig::Truncation::None) {
    auto posed_joints = pose_joints(tpose, cfg.pose);
    const char* joint =
        cfg.truncation == SynthConfig::Truncation::Hips ? "pelvis" : "spine2";
    double cut = posed_joints[model.joint_index(joint)].y() + 0.02;
    truncate_below(seg_fit, dp_fit, cfg.camera, cut);
  }
  save_face_index_map(dp_fit, m.densepose_fit_path);
  save_segmentation(seg_fit, m.segmentation_fit_path);

  for (int c = 0; c < kClothCount; ++c) {
    if (!gated[c]) continue;
    std::string p = path(std::string("gt_") +
                         cloth_name(static_cast<ClothType>(c)) + ".obj");
    save_obj(gt_meshes[c], p);
    m.gt_mesh_paths[c] = p;
  }

  // Supervision truths from the fit view.
  ObservationSet obs_fit;
  obs_fit.segmentation = seg_fit;
  obs_fit.densepose = dp_fit;
  obs_fit.camera = cfg.camera;
  obs_fit.gender_male_truth = m.gender_male;
  auto visible = cloth_part_visibility(dp_fit, model);
  m.existence_supervision = existence_labels(obs_fit, visible);

  save_manifest(m, path("manifest.json"));
  return m;
}

void save_manifest(const SceneManifest& m, const std::string& path) {
  nlohmann::json j;
  j["format"] = "clothfit-scene-1";
  j["body_dir"] = m.body_dir;
  j["state"] = m.state_path;
  for (int c = 0; c < kClothCount; ++c)
    j["gt_meshes"][cloth_name(static_cast<ClothType>(c))] = m.gt_mesh_paths[c];
  j["densepose_fit"] = m.densepose_fit_path;
  j["segmentation_fit"] = m.segmentation_fit_path;
  j["densepose_eval"] = m.densepose_eval_path;
  j["segmentation_eval"] = m.segmentation_eval_path;
  j["camera"] = {{"width", m.camera.width},   {"height", m.camera.height},
                 {"scale", m.camera.scale},   {"cx", m.camera.cx},
                 {"cy", m.camera.cy}};
  j["gender_male"] = m.gender_male;
  std::vector<int> sup;
  for (auto t : m.existence_supervision) sup.push_back(int(t));
  j["existence_supervision"] = sup;
  j["beta"] = std::vector<double>(m.beta.begin(), m.beta.end());
  j["theta"] = std::vector<double>(m.theta.begin(), m.theta.end());
  j["seed"] = m.seed;
  j["resolution"] = m.resolution;
  j["iso"] = m.iso;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

SceneManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "clothfit-scene-1")
    throw std::runtime_error("unrecognized manifest format");

  SceneManifest m;
  m.body_dir = j.at("body_dir").get<std::string>();
  m.state_path = j.at("state").get<std::string>();
  for (int c = 0; c < kClothCount; ++c)
    m.gt_mesh_paths[c] =
        j.at("gt_meshes").at(cloth_name(static_cast<ClothType>(c)))
            .get<std::string>();
  m.densepose_fit_path = j.at("densepose_fit").get<std::string>();
  m.segmentation_fit_path = j.at("segmentation_fit").get<std::string>();
  m.densepose_eval_path = j.at("densepose_eval").get<std::string>();
  m.segmentation_eval_path = j.at("segmentation_eval").get<std::string>();
  const auto& cam = j.at("camera");
  m.camera.width = cam.at("width").get<int>();
  m.camera.height = cam.at("height").get<int>();
  m.camera.scale = cam.at("scale").get<double>();
  m.camera.cx = cam.at("cx").get<double>();
  m.camera.cy = cam.at("cy").get<double>();
  m.gender_male = j.at("gender_male").get<bool>();
  auto sup = j.at("existence_supervision").get<std::vector<int>>();
  if (sup.size() != kClothCount)
    throw std::runtime_error("bad existence supervision length");
  for (int c = 0; c < kClothCount; ++c)
    m.existence_supervision[c] = static_cast<Tristate>(sup[c]);
  auto beta = j.at("beta").get<std::vector<double>>();
  auto theta = j.at("theta").get<std::vector<double>>();
  if (beta.size() != m.beta.size() || theta.size() != m.theta.size())
    throw std::runtime_error("bad beta/theta length");
  std::copy(beta.begin(), beta.end(), m.beta.begin());
  std::copy(theta.begin(), theta.end(), m.theta.begin());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.resolution = j.at("resolution").get<int>();
  m.iso = j.at("iso").get<double>();
  return m;
}

ObservationSet load_observation(const SceneManifest& m, bool eval_view) {
  ObservationSet obs;
  obs.segmentation = load_segmentation(
      eval_view ? m.segmentation_eval_path : m.segmentation_fit_path);
  obs.densepose = load_face_index_map(eval_view ? m.densepose_eval_path
                                                : m.densepose_fit_path);
  obs.camera = m.camera;
  obs.gender_male_truth = m.gender_male;
  obs.existence_truth = m.existence_supervision;
  obs.validate();
  return obs;
}

}  // namespace clothfit
