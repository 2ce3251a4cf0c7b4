#include "zilm/fit.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "zilm/errors.hpp"
#include "zilm/math.hpp"
#include "zilm/random.hpp"

namespace zilm {

namespace {

constexpr double kInitialPi = 0.05;

/// First-order update rule over a list of parameter blocks.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  void step(const std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads) {
    if (kind_ == OptimizerKind::GradientDescent) {
      for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].values.size(); ++i) {
          params[b].values[i] -= lr_ * grads[b].values[i];
        }
      }
      return;
    }
    if (m_.empty()) {
      for (const ParamBlock& p : params) {
        m_.emplace_back(p.values.size(), 0.0);
        v_.emplace_back(p.values.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t b = 0; b < params.size(); ++b) {
      std::vector<double>& m = m_[b];
      std::vector<double>& v = v_[b];
      for (std::size_t i = 0; i < params[b].values.size(); ++i) {
        const double g = grads[b].values[i];
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        params[b].values[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEpsilon);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  OptimizerKind kind_;
  double lr_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

template <typename Params, typename Objective, typename Blocks>
TrainingTrace minimise(const Objective& objective, Params& params, const FitConfig& cfg,
                       Blocks blocks) {
  TrainingTrace trace;
  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  Params grad;
  for (std::int64_t it = 0;; ++it) {
    const double f = objective.value_and_gradient(params, grad);
    if (!std::isfinite(f)) {
      std::ostringstream os;
      os << "non-finite training objective at iteration " << it;
      throw NumericError(os.str());
    }
    const bool converged = !trace.nll.empty() &&
                           std::abs(trace.nll.back() - f) <=
                               cfg.rel_tol * std::max(std::abs(trace.nll.back()), 1e-300);
    trace.nll.push_back(f);
    if (converged) {
      trace.converged = true;
      break;
    }
    if (it >= cfg.max_iters) break;
    opt.step(blocks(params), blocks(grad));
    trace.iterations = it + 1;
  }
  return trace;
}

void fill_normal(std::vector<double>& v, RandomSource& rng, double scale) {
  for (double& x : v) x = rng.normal(0.0, scale);
}

}  // namespace

std::string_view to_token(OptimizerKind k) {
  return k == OptimizerKind::GradientDescent ? "gradient_descent" : "adaptive_moments";
}

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "gradient_descent" || s == "gd") return OptimizerKind::GradientDescent;
  if (s == "adaptive_moments" || s == "adam") return OptimizerKind::AdaptiveMoments;
  throw ConfigError("unknown optimizer '" + std::string(s) +
                    "' (expected gradient_descent, adaptive_moments)");
}

void require_valid(const FitConfig& cfg) {
  std::vector<std::string> bad;
  if (!(cfg.learning_rate > 0.0)) bad.emplace_back("learning_rate must be > 0");
  if (!(cfg.rel_tol > 0.0)) bad.emplace_back("rel_tol must be > 0");
  if (cfg.max_iters < 0) bad.emplace_back("max_iters must be >= 0");
  if (!(cfg.l2_theta >= 0.0 && cfg.l2_item >= 0.0 && cfg.l2_weights >= 0.0)) {
    bad.emplace_back("l2 strengths must be >= 0");
  }
  if (!(cfg.init_scale >= 0.0)) bad.emplace_back("init_scale must be >= 0");
  if (bad.empty()) return;
  std::string msg = "invalid fit config:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ConfigError(msg);
}

std::size_t FittedModel::n_students() const {
  return kind == ModelKind::Ktm1 ? ktm().user_weights.size() : zilm().theta.size();
}

std::size_t FittedModel::n_items() const {
  return kind == ModelKind::Ktm1 ? ktm().item_weights.size() : zilm().b.size();
}

std::variant<ZilmParams, Ktm1Params> initial_params(const Dataset& d, ModelKind kind,
                                                    const FitConfig& cfg) {
  RandomSource rng(cfg.seed, 0x1f17);
  const std::size_t ns = d.students.size();
  const std::size_t ni = d.items.size();
  if (kind == ModelKind::Ktm1) {
    Ktm1Params p = Ktm1Params::zeros(ns, ni);
    fill_normal(p.user_weights, rng, cfg.init_scale);
    fill_normal(p.item_weights, rng, cfg.init_scale);
    fill_normal(p.context_weights, rng, cfg.init_scale);
    return p;
  }
  ZilmParams p = ZilmParams::zeros(ns, ni);
  fill_normal(p.theta, rng, cfg.init_scale);
  fill_normal(p.b, rng, cfg.init_scale);
  fill_normal(p.a_raw, rng, cfg.init_scale);
  fill_normal(p.g_raw, rng, cfg.init_scale);
  if (kind == ModelKind::Irt) {
    p.w_pi = frozen_irt_pi_weights();
  } else {
    fill_normal(p.w_pi, rng, cfg.init_scale);
    p.w_pi[0] = logit(kInitialPi);
  }
  return p;
}

FittedModel fit(const Dataset& d, ModelKind kind, const FitConfig& cfg) {
  return fit(d, kind, cfg, initial_params(d, kind, cfg));
}

FittedModel fit(const Dataset& d, ModelKind kind, const FitConfig& cfg,
                const std::variant<ZilmParams, Ktm1Params>& warm_start) {
  require_valid(cfg);
  FittedModel model;
  model.kind = kind;
  model.config = cfg;
  if (kind == ModelKind::Ktm1) {
    Ktm1Params params = std::get<Ktm1Params>(warm_start);
    const Ktm1Objective objective(d, Split::Train, cfg.penalty());
    model.trace = minimise(objective, params, cfg, [](Ktm1Params& p) { return param_blocks(p); });
    model.params = std::move(params);
  } else {
    ZilmParams params = std::get<ZilmParams>(warm_start);
    const bool freeze = kind == ModelKind::Irt;
    if (freeze) params.w_pi = frozen_irt_pi_weights();
    const ZilmObjective objective(d, Split::Train, cfg.penalty(), freeze);
    model.trace = minimise(objective, params, cfg,
                           [freeze](ZilmParams& p) { return param_blocks(p, !freeze); });
    model.params = std::move(params);
  }
  return model;
}

double predict_pi(const FittedModel& model, const NdcProfile& ndc, const Item& item) {
  if (model.kind != ModelKind::IrtZilm) return 0.0;
  const PiFeatureVector x = pi_features(ndc, item);
  return pi_of(model.zilm(), x);
}

double predict(const FittedModel& model, const StudentProfile& student, const Item& item) {
  if (model.kind == ModelKind::Ktm1) {
    const KtmContextVector x = ktm_context_features(student.ndc, item);
    return ktm1_prob(model.ktm(), student.id, item.id, x);
  }
  const double p = irt_prob(model.zilm(), student.id, item.id);
  if (model.kind == ModelKind::Irt) return p;
  return zilm_success_prob(predict_pi(model, student.ndc, item), p);
}

namespace {

template <typename Params, typename Objective, typename Blocks>
GradientCheckReport finite_difference_check(const Objective& objective, Params params,
                                            double epsilon, Blocks blocks) {
  Params analytic;
  objective.value_and_gradient(params, analytic);
  GradientCheckReport report;
  const std::vector<ParamBlock> pb = blocks(params);
  const std::vector<ParamBlock> gb = blocks(analytic);
  for (std::size_t b = 0; b < pb.size(); ++b) {
    BlockGradientError e{std::string(pb[b].name), pb[b].values.size(), 0.0, 0.0};
    for (std::size_t i = 0; i < pb[b].values.size(); ++i) {
      double& x = pb[b].values[i];
      const double saved = x;
      x = saved + epsilon;
      const double up = objective.value(params);
      x = saved - epsilon;
      const double down = objective.value(params);
      x = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = gb[b].values[i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
      e.max_abs_error = std::max(e.max_abs_error, abs_err);
      e.max_rel_error = std::max(e.max_rel_error, rel_err);
    }
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.blocks.push_back(std::move(e));
  }
  return report;
}

}  // namespace

GradientCheckReport check_gradients(ModelKind kind, const Dataset& d, const FitConfig& cfg,
                                    double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("check_gradients: epsilon must be > 0");
  }
  const auto start = initial_params(d, kind, cfg);
  if (kind == ModelKind::Ktm1) {
    const Ktm1Objective objective(d, Split::Train, cfg.penalty());
    return finite_difference_check(objective, std::get<Ktm1Params>(start), epsilon,
                                   [](Ktm1Params& p) { return param_blocks(p); });
  }
  const bool freeze = kind == ModelKind::Irt;
  const ZilmObjective objective(d, Split::Train, cfg.penalty(), freeze);
  return finite_difference_check(objective, std::get<ZilmParams>(start), epsilon,
                                 [freeze](ZilmParams& p) { return param_blocks(p, !freeze); });
}

}  // namespace zilm
