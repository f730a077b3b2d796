#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clothfit/supervision.hpp"

namespace clothfit {

struct FitConfig {
  int max_iters = 300;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double fd_step = 1e-3;
  double tol = 1e-6;        // total-loss change over tol_window iterations
  int tol_window = 10;
  double silhouette_iso = 0.01;
  // The silhouette objective is piecewise constant in z (pixel counts), so
  // its finite differences need a probe wide enough to move the projected
  // boundary across pixels.
  double silhouette_fd_step = 0.25;

  // Ablation switches.
  bool no_reg = false;
  bool no_dp = false;
  bool silhouette_for_dp = false;

  // Latent initialization. Zero by default; optionally gaussian or an
  // explicit warm start.
  bool random_latent_init = false;
  double random_latent_sigma = 2.0;
  std::optional<ClothState> initial_state;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitIterate {
  int iter = 0;
  LossBreakdown loss;
  double grad_norm = 0.0;
};

struct FitResult {
  ClothState state;
  std::vector<FitIterate> trace;
  LossBreakdown final_loss;
  int iterations = 0;
  bool converged = false;
  bool no_supervision = false;  // every query set came back empty
};

// Plain Adam with bias correction; m/v persist across calls.
struct AdamState {
  std::vector<double> m, v;
  int t = 0;

  void resize(size_t n);
  void step(std::vector<double>& params, const std::vector<double>& grad,
            const FitConfig& cfg);
};

// Central finite difference of f at x. Throws on non-finite values.
double fd_derivative(const std::function<double(double)>& f, double x,
                     double h);
std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h);

// Fits existence, latents and gender to one observation by coordinate
// finite differences and Adam. Supervision (mapped points, query sets,
// labels) is built once up front and stays fixed.
FitResult fit_clothes(const TPoseBody& tpose, const FieldBackend& backend,
                      const ObservationSet& obs, const FitConfig& cfg,
                      const LossWeights& weights = {});

std::string cloth_state_json(const ClothState& state);
ClothState cloth_state_from_json(const std::string& json_text);
void save_cloth_state(const ClothState& state, const std::string& path);
ClothState load_cloth_state(const std::string& path);

// One JSON object per line: iteration index, loss terms, gradient norm.
void save_fit_trace(const FitResult& result, const std::string& path);

}  // namespace clothfit
