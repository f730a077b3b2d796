#include "clothfit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace clothfit {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (lr <= 0 || fd_step <= 0) throw std::invalid_argument("lr/fd_step must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw std::invalid_argument("adam betas must be in [0,1)");
  if (tol < 0 || tol_window < 1) throw std::invalid_argument("bad tolerance");
}

void AdamState::resize(size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  t = 0;
}

void AdamState::step(std::vector<double>& params,
                     const std::vector<double>& grad, const FitConfig& cfg) {
  if (params.size() != m.size() || grad.size() != m.size())
    throw std::invalid_argument("adam state size mismatch");
  ++t;
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    double mh = m[i] / bc1;
    double vh = v[i] / bc2;
    params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.adam_eps);
  }
}

double fd_derivative(const std::function<double(double)>& f, double x,
                     double h) {
  double fp = f(x + h);
  double fm = f(x - h);
  if (!std::isfinite(fp) || !std::isfinite(fm))
    throw std::runtime_error("non-finite loss in finite difference");
  return (fp - fm) / (2.0 * h);
}

std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h) {
  std::vector<double> grad(x.size());
  std::vector<double> probe = x;
  for (size_t k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    double fp = f(probe);
    probe[k] = x[k] - h;
    double fm = f(probe);
    probe[k] = x[k];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("non-finite loss at component " +
                               std::to_string(k));
    grad[k] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

namespace {

// Flattened optimization vector: active latent dims per cloth, then five
// existence logits, then one gender logit.
struct ParamLayout {
  std::array<int, kClothCount> latent_offset{};
  std::array<int, kClothCount> latent_count{};
  int exist_offset = 0;
  int gender_offset = 0;
  int total = 0;
};

ParamLayout make_layout() {
  ParamLayout lay;
  int off = 0;
  for (int c = 0; c < kClothCount; ++c) {
    lay.latent_offset[c] = off;
    lay.latent_count[c] = active_latent_dim(static_cast<ClothType>(c));
    off += lay.latent_count[c];
  }
  lay.exist_offset = off;
  off += kClothCount;
  lay.gender_offset = off;
  lay.total = off + 1;
  return lay;
}

ClothState state_from_params(const std::vector<double>& p,
                             const ParamLayout& lay) {
  ClothState s = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) {
    for (int k = 0; k < lay.latent_count[c]; ++k)
      s.latents[c].z[k] = p[lay.latent_offset[c] + k];
    s.existence[c] = sigmoid(p[lay.exist_offset + c]);
  }
  s.gender_male = sigmoid(p[lay.gender_offset]);
  s.gender_female = 1.0 - s.gender_male;
  return s;
}

}  // namespace

FitResult fit_clothes(const TPoseBody& tpose, const FieldBackend& backend,
                      const ObservationSet& obs, const FitConfig& cfg,
                      const LossWeights& weights) {
  cfg.validate();
  weights.validate();
  obs.validate();

  // Supervision is frozen before the first iteration.
  auto mapped = cloth_to_body_map(obs, tpose, kMappedPointCount, cfg.seed);
  auto querysets = build_query_sets(tpose, mapped, weights);
  const auto& exist_truth = obs.existence_truth;

  bool any_queries = false;
  for (const auto& qs : querysets) any_queries |= !qs.points.empty();
  if (!any_queries) {
    FitResult degenerate;
    degenerate.state = ClothState::neutral();
    degenerate.no_supervision = true;
    return degenerate;
  }

  ParamLayout lay = make_layout();
  std::vector<double> params(lay.total, 0.0);
  for (int c = 0; c < kClothCount; ++c) params[lay.exist_offset + c] = logit(0.5);
  if (cfg.random_latent_init) {
    std::mt19937_64 rng(cfg.seed ^ 0x5eedf17ULL);
    std::normal_distribution<double> dist(0.0, cfg.random_latent_sigma);
    for (int c = 0; c < kClothCount; ++c)
      for (int k = 0; k < lay.latent_count[c]; ++k)
        params[lay.latent_offset[c] + k] = dist(rng);
  }
  if (cfg.initial_state) {
    const ClothState& init = *cfg.initial_state;
    auto clamp_prob = [](double p) { return std::clamp(p, 1e-6, 1.0 - 1e-6); };
    for (int c = 0; c < kClothCount; ++c) {
      for (int k = 0; k < lay.latent_count[c]; ++k)
        params[lay.latent_offset[c] + k] = init.latents[c].z[k];
      params[lay.exist_offset + c] = logit(clamp_prob(init.existence[c]));
    }
    params[lay.gender_offset] = logit(clamp_prob(init.gender_male));
  }

  // Geometry objective for one cloth as a function of its own latent; the
  // other parameters are held at their current values, so the full-vector
  // gradient decomposes cloth by cloth.
  auto cloth_objective = [&](ClothState& s, int c) -> double {
    ClothType cloth = static_cast<ClothType>(c);
    if (!existence_gate(s.existence[c])) return 0.0;
    double val = 0.0;
    if (!cfg.no_dp) {
      if (cfg.silhouette_for_dp)
        val += weights.lambda_dp *
               silhouette_loss_single(cloth, s, backend, tpose, obs,
                                      cfg.silhouette_iso);
      else
        val += weights.lambda_dp * densepose_loss_single(querysets[c], cloth,
                                                         s, backend, weights);
    }
    if (!cfg.no_reg)
      val += weights.lambda_reg * weights.alpha_of(cloth) * s.latents[c].z.norm();
    return val;
  };

  auto breakdown = [&](const ClothState& s) {
    LossBreakdown b;
    b.dp = cfg.no_dp ? 0.0 : densepose_loss(querysets, s, backend, weights);
    b.reg = cfg.no_reg ? 0.0 : reg_loss(s, weights);
    b.exist = existence_loss(s.existence, exist_truth);
    b.gender = gender_loss(s.gender_male, s.gender_female,
                           obs.gender_male_truth);
    if (cfg.silhouette_for_dp)
      b.silhouette = silhouette_loss(s, backend, tpose, obs, cfg.silhouette_iso);
    return total_loss(b, weights, cfg.silhouette_for_dp);
  };

  FitResult result;
  AdamState adam;
  adam.resize(params.size());
  std::vector<double> grad(params.size());
  std::vector<double> totals;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    ClothState state = state_from_params(params, lay);
    std::fill(grad.begin(), grad.end(), 0.0);

    double latent_h = cfg.silhouette_for_dp ? cfg.silhouette_fd_step : cfg.fd_step;
    for (int c = 0; c < kClothCount; ++c) {
      for (int k = 0; k < lay.latent_count[c]; ++k) {
        int pi = lay.latent_offset[c] + k;
        grad[pi] = fd_derivative(
            [&](double x) {
              ClothState s = state;
              s.latents[c].z[k] = x;
              return cloth_objective(s, c);
            },
            params[pi], latent_h);
      }
      // The existence gate is a step function, so geometry terms do not
      // move the logit; the supervision cross-entropy does.
      int pe = lay.exist_offset + c;
      grad[pe] = fd_derivative(
          [&](double x) {
            auto scores = state.existence;
            scores[c] = sigmoid(x);
            return weights.lambda_exist * existence_loss(scores, exist_truth);
          },
          params[pe], cfg.fd_step);
    }
    grad[lay.gender_offset] = fd_derivative(
        [&](double x) {
          double gm = sigmoid(x);
          return weights.lambda_gender *
                 gender_loss(gm, 1.0 - gm, obs.gender_male_truth);
        },
        params[lay.gender_offset], cfg.fd_step);

    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);

    LossBreakdown b = breakdown(state);
    result.trace.push_back({iter, b, gnorm});
    totals.push_back(b.total);
    result.iterations = iter + 1;

    // Loss plateaus alone do not mean convergence: the silhouette objective
    // is piecewise constant, so require a vanishing gradient as well.
    if (iter >= cfg.tol_window && gnorm < 1e-3 &&
        std::abs(totals[iter] - totals[iter - cfg.tol_window]) < cfg.tol) {
      result.converged = true;
      break;
    }
    adam.step(params, grad, cfg);
  }

  result.state = state_from_params(params, lay);
  result.final_loss = breakdown(result.state);
  return result;
}

std::string cloth_state_json(const ClothState& state) {
  nlohmann::json j;
  j["format"] = "clothfit-state-1";
  for (int c = 0; c < kClothCount; ++c) {
    ClothType cloth = static_cast<ClothType>(c);
    nlohmann::json e;
    e["existence"] = state.existence[c];
    e["latent"] = std::vector<double>(state.latents[c].z.data(),
                                      state.latents[c].z.data() +
                                          state.latents[c].z.size());
    j["clothes"][cloth_name(cloth)] = e;
  }
  j["gender"] = {{"male", state.gender_male}, {"female", state.gender_female}};
  return j.dump(2);
}

ClothState cloth_state_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (j.value("format", "") != "clothfit-state-1")
    throw std::runtime_error("unrecognized state format");
  ClothState s = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) {
    ClothType cloth = static_cast<ClothType>(c);
    const auto& e = j.at("clothes").at(cloth_name(cloth));
    s.existence[c] = e.at("existence").get<double>();
    auto z = e.at("latent").get<std::vector<double>>();
    if (static_cast<int>(z.size()) != latent_dim(cloth))
      throw std::runtime_error("latent size mismatch in state file");
    for (size_t k = 0; k < z.size(); ++k) s.latents[c].z[k] = z[k];
  }
  s.gender_male = j.at("gender").at("male").get<double>();
  s.gender_female = j.at("gender").at("female").get<double>();
  s.validate();
  return s;
}

void save_cloth_state(const ClothState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << cloth_state_json(state) << "\n";
}

ClothState load_cloth_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return cloth_state_from_json(text);
}

void save_fit_trace(const FitResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const FitIterate& it : result.trace) {
    nlohmann::json j;
    j["iter"] = it.iter;
    j["dp"] = it.loss.dp;
    j["reg"] = it.loss.reg;
    j["exist"] = it.loss.exist;
    j["gender"] = it.loss.gender;
    j["silhouette"] = it.loss.silhouette;
    j["total"] = it.loss.total;
    j["grad_norm"] = it.grad_norm;
    out << j.dump() << "\n";
  }
}

}  // namespace clothfit
