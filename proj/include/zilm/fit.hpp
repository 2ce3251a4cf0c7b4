#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "zilm/domain.hpp"
#include "zilm/models.hpp"

namespace zilm {

enum class OptimizerKind { GradientDescent, AdaptiveMoments };

std::string_view to_token(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct FitConfig {
  double learning_rate = 0.05;
  std::int64_t max_iters = 3000;
  double rel_tol = 1e-7;
  double l2_theta = 0.5;   // Normal(0, 1) prior surrogate
  double l2_item = 0.1;
  double l2_weights = 0.001;
  double init_scale = 0.01;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::AdaptiveMoments;

  [[nodiscard]] Penalty penalty() const { return {l2_theta, l2_item, l2_weights}; }

  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

/// Throws ConfigError when learning_rate, tolerances or strengths are out of range.
void require_valid(const FitConfig& cfg);

struct TrainingTrace {
  std::vector<double> nll;  // penalized train objective, one entry per evaluation
  std::int64_t iterations = 0;
  bool converged = false;

  friend bool operator==(const TrainingTrace&, const TrainingTrace&) = default;
};

struct FittedModel {
  ModelKind kind = ModelKind::IrtZilm;
  std::variant<ZilmParams, Ktm1Params> params;
  TrainingTrace trace;
  FitConfig config;

  [[nodiscard]] const ZilmParams& zilm() const { return std::get<ZilmParams>(params); }
  [[nodiscard]] const Ktm1Params& ktm() const { return std::get<Ktm1Params>(params); }
  [[nodiscard]] std::size_t n_students() const;
  [[nodiscard]] std::size_t n_items() const;

  friend bool operator==(const FittedModel&, const FittedModel&) = default;
};

/// Full-batch minimisation of the penalized train-split NLL.
///
/// IRT fits the same parameterisation as IRT-ZILM with w_pi frozen at the
/// near-zero inflation vector. `warm_start` (optional) replaces the seeded
/// initialisation; its shape must match the dataset.
FittedModel fit(const Dataset& d, ModelKind kind, const FitConfig& cfg);
FittedModel fit(const Dataset& d, ModelKind kind, const FitConfig& cfg,
                const std::variant<ZilmParams, Ktm1Params>& warm_start);

/// Seeded initial parameters: Normal(0, init_scale^2) draws; the pi bias
/// starts at logit(0.05) (or the frozen IRT vector).
std::variant<ZilmParams, Ktm1Params> initial_params(const Dataset& d, ModelKind kind,
                                                    const FitConfig& cfg);

/// Probability of a correct answer when `item` (possibly with counterfactual
/// delivery/response) is shown to `student`. Throws std::out_of_range on ids
/// unknown to the model.
double predict(const FittedModel& model, const StudentProfile& student, const Item& item);

/// Fitted zero-inflation probability; 0 for models without an inflation part.
double predict_pi(const FittedModel& model, const NdcProfile& ndc, const Item& item);

struct BlockGradientError {
  std::string block;
  std::size_t n_params = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradientCheckReport {
  std::vector<BlockGradientError> blocks;
  double max_rel_error = 0.0;
};

/// Analytic vs central finite-difference gradient at the seeded initial point
/// of `kind` (init scale from cfg). Frozen blocks are not reported.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
/// Throws std::invalid_argument when epsilon <= 0.
GradientCheckReport check_gradients(ModelKind kind, const Dataset& d, const FitConfig& cfg,
                                    double epsilon);

}  // namespace zilm
