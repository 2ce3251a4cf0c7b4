#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "zilm/domain.hpp"

namespace zilm {

enum class ModelKind { Irt, IrtZilm, Ktm1 };

std::string_view to_token(ModelKind k);
/// Accepts "irt", "irt_zilm", "ktm1" (also "zilm", "ktm"). Throws ConfigError.
ModelKind parse_model_kind(std::string_view s);

// ---------------------------------------------------------------------------
// Feature maps. The layouts below are frozen; serialized weights depend on them.
// ---------------------------------------------------------------------------

/// Features of the zero-inflation component for one (student, item) pair:
///
///   [0]      bias
///   [1..3]   NDC flags            dyslexia, dyscalculia, spd
///   [4..6]   delivery one-hot     read, listen, both
///   [7..10]  response one-hot     written, speak, click_picture, click_read
///   [11..13] content one-hot      letter, digit, both
///   [14]     density
///   [15..23] NDC x delivery       NDC-major, delivery-minor
///   [24..35] NDC x response       NDC-major, response-minor
///   [36..44] NDC x content        NDC-major, content-minor
inline constexpr std::size_t kPiFeatureCount = 45;
using PiFeatureVector = std::array<double, kPiFeatureCount>;

PiFeatureVector pi_features(const NdcProfile& ndc, const Item& it);
/// Names in frozen order, e.g. "dyslexia*delivery=read".
const std::array<std::string_view, kPiFeatureCount>& pi_feature_names();

/// Context features of the linear knowledge-tracing baseline:
///   [0..2] delivery one-hot, [3..6] response one-hot, [7..9] content one-hot,
///   [10] density, [11..13] NDC flags.
inline constexpr std::size_t kKtmContextCount = 14;
using KtmContextVector = std::array<double, kKtmContextCount>;

KtmContextVector ktm_context_features(const NdcProfile& ndc, const Item& it);
const std::array<std::string_view, kKtmContextCount>& ktm_context_names();

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

inline constexpr double kGuessingCeiling = 0.15;

/// Unconstrained parameters of IRT and IRT-ZILM.
/// discrimination = softplus(a_raw), guessing = 0.15 * sigmoid(g_raw).
struct ZilmParams {
  std::vector<double> theta;
  std::vector<double> b;
  std::vector<double> a_raw;
  std::vector<double> g_raw;
  std::vector<double> w_pi = std::vector<double>(kPiFeatureCount, 0.0);

  static ZilmParams zeros(std::size_t n_students, std::size_t n_items);

  [[nodiscard]] double discrimination(std::size_t item) const;
  [[nodiscard]] double guessing(std::size_t item) const;

  friend bool operator==(const ZilmParams&, const ZilmParams&) = default;
};

struct Ktm1Params {
  std::vector<double> user_weights;
  std::vector<double> item_weights;
  std::vector<double> context_weights = std::vector<double>(kKtmContextCount, 0.0);
  double bias = 0.0;

  static Ktm1Params zeros(std::size_t n_students, std::size_t n_items);

  friend bool operator==(const Ktm1Params&, const Ktm1Params&) = default;
};

/// Named view of one parameter array; optimizers and gradient checks walk these.
struct ParamBlock {
  std::string_view name;
  std::span<double> values;
};

std::vector<ParamBlock> param_blocks(ZilmParams& p, bool include_pi);
std::vector<ParamBlock> param_blocks(Ktm1Params& p);

/// L2 strengths. The objective is
///   (1/N) * [ sum_attempts nll + l2_theta*|ability|^2 + l2_item*|item params|^2
///             + l2_weights*|weights without bias|^2 ]
/// with N the number of attempts in the split.
struct Penalty {
  double l2_theta = 0.0;
  double l2_item = 0.0;
  double l2_weights = 0.0;
};

// ---------------------------------------------------------------------------
// Probabilities
// ---------------------------------------------------------------------------

/// Pr(Y = 1) of the zero-inflated mixture: (1 - pi) * p. Throws std::invalid_argument
/// when either input leaves [0, 1].
double zilm_success_prob(double pi, double p);
/// Pr(Y = 0): a contextual zero (pi) or an ability failure, pi + (1 - pi)(1 - p).
double zilm_failure_prob(double pi, double p);

/// sigmoid(w_pi . x). Throws std::invalid_argument on dimension mismatch.
double pi_of(const ZilmParams& params, std::span<const double> x);

/// 3PL probability with the derived (b, a, g). Throws std::out_of_range on bad ids.
double irt_prob(const ZilmParams& params, std::int64_t student_id, std::int64_t item_id);

/// sigmoid(bias + user_w + item_w + context_w . x).
double ktm1_prob(const Ktm1Params& params, std::int64_t student_id, std::int64_t item_id,
                 std::span<const double> context);

/// w_pi that pins pi near zero (~1e-6); the IRT baseline keeps it frozen.
std::vector<double> frozen_irt_pi_weights();

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// Penalized mean negative log-likelihood of IRT / IRT-ZILM over one split.
///
/// Attempts are preprocessed once; pi only depends on (NDC profile, item), so
/// it is evaluated per distinct pair rather than per attempt. All reductions
/// run in a fixed order, so repeated evaluations are bit-identical.
class ZilmObjective {
 public:
  ZilmObjective(const Dataset& d, Split split, Penalty penalty, bool freeze_pi);

  [[nodiscard]] double value(const ZilmParams& params) const;
  /// Writes into `grad` (resized as needed); frozen blocks get zero gradient.
  double value_and_gradient(const ZilmParams& params, ZilmParams& grad) const;

  [[nodiscard]] std::size_t n_attempts() const { return student_.size(); }
  [[nodiscard]] bool pi_frozen() const { return freeze_pi_; }

 private:
  double evaluate(const ZilmParams& params, ZilmParams* grad) const;

  std::size_t n_students_;
  std::size_t n_items_;
  Penalty penalty_;
  bool freeze_pi_;
  std::vector<std::int32_t> student_;
  std::vector<std::int32_t> item_;
  std::vector<std::int32_t> group_;
  std::vector<std::uint8_t> label_;
  std::vector<PiFeatureVector> group_features_;
};

class Ktm1Objective {
 public:
  Ktm1Objective(const Dataset& d, Split split, Penalty penalty);

  [[nodiscard]] double value(const Ktm1Params& params) const;
  double value_and_gradient(const Ktm1Params& params, Ktm1Params& grad) const;
  [[nodiscard]] std::size_t n_attempts() const { return student_.size(); }

 private:
  double evaluate(const Ktm1Params& params, Ktm1Params* grad) const;

  std::size_t n_students_;
  std::size_t n_items_;
  Penalty penalty_;
  std::vector<std::int32_t> student_;
  std::vector<std::int32_t> item_;
  std::vector<std::int32_t> group_;
  std::vector<std::uint8_t> label_;
  std::vector<KtmContextVector> group_features_;
};

double zilm_nll(const ZilmParams& params, const Dataset& d, Split split, Penalty penalty = {});
ZilmParams zilm_grad(const ZilmParams& params, const Dataset& d, Split split,
                     Penalty penalty = {}, bool freeze_pi = false);
double ktm1_nll(const Ktm1Params& params, const Dataset& d, Split split, Penalty penalty = {});
Ktm1Params ktm1_grad(const Ktm1Params& params, const Dataset& d, Split split, Penalty penalty = {});

}  // namespace zilm
