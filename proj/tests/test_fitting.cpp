#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "clothfit/fitting.hpp"
#include "clothfit/synth.hpp"

using namespace clothfit;

namespace {

struct Scene {
  SceneManifest manifest;
  BodyModel model;
  TPoseBody body;

  explicit Scene(std::uint64_t seed, const std::string& dir,
                 std::optional<ClothState> gt = std::nullopt) {
    SynthConfig cfg = SynthConfig::with_defaults(seed);
    cfg.resolution = 48;
    cfg.gt_state = std::move(gt);
    manifest = synthesize_scene(cfg, dir);
    model = load_body(manifest.body_dir);
    ShapeParams beta;
    beta.beta = manifest.beta;
    body = shape_body(model, beta);
  }
};

}  // namespace

TEST_CASE("finite differences recover analytic gradients") {
  auto sq = [](const std::vector<double>& z) {
    double s = 0;
    for (double v : z) s += v * v;
    return s;
  };
  auto g = fd_gradient(sq, {1.0, 0.0}, 1e-5);
  CHECK(std::abs(g[0] - 2.0) < 1e-6);
  CHECK(std::abs(g[1] - 0.0) < 1e-6);

  auto constant = [](const std::vector<double>&) { return 3.5; };
  for (double v : fd_gradient(constant, {0.2, -0.7, 1.1}, 1e-4))
    CHECK(v == 0.0);

  CHECK(std::abs(fd_derivative([](double x) { return std::sin(x); }, 0.3,
                               1e-5) -
                 std::cos(0.3)) < 1e-5);
}

TEST_CASE("fd_derivative rejects non-finite objectives") {
  CHECK_THROWS(fd_derivative([](double x) { return std::log(x); }, 0.0, 1e-3));
}

TEST_CASE("adam step: zero gradient leaves parameters unchanged") {
  FitConfig cfg;
  AdamState adam;
  adam.resize(3);
  std::vector<double> params = {0.5, -1.0, 2.0};
  std::vector<double> before = params;
  adam.step(params, {0.0, 0.0, 0.0}, cfg);
  CHECK(params == before);
}

TEST_CASE("adam first step moves by approximately the learning rate") {
  FitConfig cfg;
  cfg.lr = 0.1;
  AdamState adam;
  adam.resize(1);
  std::vector<double> params = {1.0};
  adam.step(params, {2.0}, cfg);  // d/dz z^2 at z=1
  CHECK(std::abs(params[0] - 0.9) < 1e-4);
}

TEST_CASE("adam is deterministic") {
  FitConfig cfg;
  auto run = [&] {
    AdamState adam;
    adam.resize(2);
    std::vector<double> params = {0.3, -0.2};
    for (int i = 0; i < 25; ++i)
      adam.step(params, {2.0 * params[0], 2.0 * params[1]}, cfg);
    return params;
  };
  CHECK(run() == run());
}

TEST_CASE("cloth state json round trip") {
  ClothState s = ClothState::neutral();
  s.existence = {0.9, 0.1, 0.8, 0.2, 0.6};
  s.latent(ClothType::UpperCloth).z[0] = 0.37;
  s.latent(ClothType::Shoes).z[1] = -1.2;
  s.gender_male = 0.8;
  s.gender_female = 0.2;
  ClothState back = cloth_state_from_json(cloth_state_json(s));
  for (int c = 0; c < kClothCount; ++c) {
    CHECK(back.existence[c] == s.existence[c]);
    CHECK((back.latents[c].z - s.latents[c].z).norm() == 0.0);
  }
  CHECK(back.gender_male == s.gender_male);
  CHECK(back.gender_female == s.gender_female);
}

TEST_CASE("fitting a synthetic scene decreases the loss and recovers shape") {
  // GT near the latent prior mean so coverage recovery is within reach of
  // the regularized optimum.
  ClothState gt_in = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) gt_in.existence[c] = 0.0;
  gt_in.existence[int(ClothType::UpperCloth)] = 1.0;
  gt_in.existence[int(ClothType::Pants)] = 1.0;
  gt_in.existence[int(ClothType::Shoes)] = 1.0;
  gt_in.latent(ClothType::UpperCloth).z[0] = 0.3;
  gt_in.latent(ClothType::UpperCloth).z[1] = -0.3;
  gt_in.latent(ClothType::Pants).z[0] = 0.2;
  gt_in.gender_male = 1.0;
  gt_in.gender_female = 0.0;
  Scene scene(6, "fit_scene_tmp", gt_in);
  ObservationSet obs = load_observation(scene.manifest);
  ProceduralBackend backend(scene.body);

  FitConfig cfg;
  cfg.max_iters = 300;
  cfg.seed = 6;
  FitResult res = fit_clothes(scene.body, backend, obs, cfg);
  REQUIRE_FALSE(res.trace.empty());
  CHECK(res.final_loss.total < res.trace.front().loss.total);

  ClothState gt = load_cloth_state(scene.manifest.state_path);
  for (int c = 0; c < kClothCount; ++c) {
    if (scene.manifest.existence_supervision[c] == Tristate::Unsupervised)
      continue;
    CHECK(existence_gate(res.state.existence[c]) ==
          existence_gate(gt.existence[c]));
  }
  CHECK((res.state.gender_male > 0.5) == scene.manifest.gender_male);

  // Supervised coverage parameters end within 0.1 sigmoid units of GT.
  for (int c = 0; c < kClothCount; ++c) {
    if (!existence_gate(gt.existence[c])) continue;
    ClothSurfaceParams fitted = decode_latent(res.state.latents[c]);
    ClothSurfaceParams truth = decode_latent(gt.latents[c]);
    CHECK(std::abs(fitted.coverage1 - truth.coverage1) < 0.1);
    CHECK(std::abs(fitted.coverage2 - truth.coverage2) < 0.1);
  }
  std::filesystem::remove_all("fit_scene_tmp");
}

TEST_CASE("warm starting at the generator keeps the densepose loss flat") {
  Scene scene(1, "fit_warm_tmp");
  ObservationSet obs = load_observation(scene.manifest);
  ProceduralBackend backend(scene.body);
  ClothState gt = load_cloth_state(scene.manifest.state_path);

  // Measure L_dp at the generating state, then after 50 data-term-only fit
  // iterations started from that state. Without the prior term the
  // generating state is already near a minimum of the objective, so the
  // data loss must not get worse.
  LossWeights w;
  auto mapped = cloth_to_body_map(obs, scene.body, kMappedPointCount, 0);
  auto sets = build_query_sets(scene.body, mapped, w);
  const double initial_dp = densepose_loss(sets, gt, backend, w);

  FitConfig cfg;
  cfg.max_iters = 50;
  cfg.no_reg = true;
  cfg.initial_state = gt;
  FitResult res = fit_clothes(scene.body, backend, obs, cfg);
  REQUIRE_FALSE(res.trace.empty());
  CHECK(res.final_loss.total <= res.trace.front().loss.total + 1e-9);
  const double final_dp = densepose_loss(sets, res.state, backend, w);
  CHECK(final_dp <= initial_dp + 1e-6);
  std::filesystem::remove_all("fit_warm_tmp");
}

TEST_CASE("absent pants with visible legs are gated off") {
  // Seed 2 wears a skirt, so the scene supervises pants as absent.
  Scene scene(2, "fit_nopants_tmp");
  REQUIRE(scene.manifest.existence_supervision[int(ClothType::Pants)] ==
          Tristate::False);
  ObservationSet obs = load_observation(scene.manifest);
  ProceduralBackend backend(scene.body);
  FitConfig cfg;
  cfg.max_iters = 150;
  FitResult res = fit_clothes(scene.body, backend, obs, cfg);
  CHECK(res.state.existence[int(ClothType::Pants)] < 0.25);
  std::filesystem::remove_all("fit_nopants_tmp");
}

TEST_CASE("fit trace file holds one json object per iteration") {
  Scene scene(1, "fit_trace_tmp");
  ObservationSet obs = load_observation(scene.manifest);
  ProceduralBackend backend(scene.body);
  FitConfig cfg;
  cfg.max_iters = 5;
  FitResult res = fit_clothes(scene.body, backend, obs, cfg);
  save_fit_trace(res, "trace_tmp.jsonl");
  std::ifstream in("trace_tmp.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == int(res.trace.size()));
  std::remove("trace_tmp.jsonl");
  std::filesystem::remove_all("fit_trace_tmp");
}
