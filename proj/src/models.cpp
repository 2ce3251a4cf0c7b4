#include "zilm/models.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "zilm/errors.hpp"
#include "zilm/math.hpp"

namespace zilm {

namespace {

constexpr double kFrozenPiBias = -13.8;

struct ItemTerms {
  double a;        // discrimination
  double da;       // d a / d a_raw
  double g;        // guessing
  double dg;       // d g / d g_raw
};

std::vector<ItemTerms> item_terms(const ZilmParams& p) {
  std::vector<ItemTerms> out(p.b.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double sg = sigmoid(p.g_raw[j]);
    out[j] = {softplus(p.a_raw[j]), sigmoid(p.a_raw[j]), kGuessingCeiling * sg,
              kGuessingCeiling * sg * (1.0 - sg)};
  }
  return out;
}

double sum_squares(std::span<const double> v, std::size_t skip = 0) {
  double s = 0.0;
  for (std::size_t i = skip; i < v.size(); ++i) s += v[i] * v[i];
  return s;
}

template <typename Features, typename MakeFeatures>
void index_attempts(const Dataset& d, std::optional<Split> split, MakeFeatures make,
                    std::vector<std::int32_t>& student, std::vector<std::int32_t>& item,
                    std::vector<std::int32_t>& group, std::vector<std::uint8_t>& label,
                    std::vector<Features>& features) {
  const std::size_t n_items = d.items.size();
  std::vector<std::int32_t> group_of(8 * n_items, -1);
  for (const Attempt& a : d.attempts) {
    if (split && a.split != *split) continue;
    if (a.student_id < 0 || a.student_id >= static_cast<std::int64_t>(d.students.size()) ||
        a.item_id < 0 || a.item_id >= static_cast<std::int64_t>(n_items)) {
      throw DataError("attempt references unknown student " + std::to_string(a.student_id) +
                      " or item " + std::to_string(a.item_id));
    }
    const StudentProfile& s = d.students[static_cast<std::size_t>(a.student_id)];
    const auto key = static_cast<std::size_t>(ndc_code(s.ndc)) * n_items +
                     static_cast<std::size_t>(a.item_id);
    if (group_of[key] < 0) {
      group_of[key] = static_cast<std::int32_t>(features.size());
      features.push_back(make(s.ndc, d.items[static_cast<std::size_t>(a.item_id)]));
    }
    student.push_back(static_cast<std::int32_t>(a.student_id));
    item.push_back(static_cast<std::int32_t>(a.item_id));
    group.push_back(group_of[key]);
    label.push_back(static_cast<std::uint8_t>(a.label()));
  }
  if (student.empty()) {
    throw DataError(split ? "split '" + std::string(to_token(*split)) + "' has no attempts"
                          : std::string("dataset has no attempts"));
  }
}

void check_shape(const ZilmParams& p, std::size_t n_students, std::size_t n_items) {
  if (p.theta.size() != n_students || p.b.size() != n_items || p.a_raw.size() != n_items ||
      p.g_raw.size() != n_items || p.w_pi.size() != kPiFeatureCount) {
    throw std::invalid_argument("ZilmParams shape does not match dataset");
  }
}

void check_shape(const Ktm1Params& p, std::size_t n_students, std::size_t n_items) {
  if (p.user_weights.size() != n_students || p.item_weights.size() != n_items ||
      p.context_weights.size() != kKtmContextCount) {
    throw std::invalid_argument("Ktm1Params shape does not match dataset");
  }
}

}  // namespace

std::string_view to_token(ModelKind k) {
  switch (k) {
    case ModelKind::Irt: return "irt";
    case ModelKind::IrtZilm: return "irt_zilm";
    case ModelKind::Ktm1: return "ktm1";
  }
  return "irt";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "irt") return ModelKind::Irt;
  if (s == "irt_zilm" || s == "irt-zilm" || s == "zilm") return ModelKind::IrtZilm;
  if (s == "ktm1" || s == "ktm") return ModelKind::Ktm1;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected irt, irt_zilm, ktm1)");
}

// --- feature maps -----------------------------------------------------------

PiFeatureVector pi_features(const NdcProfile& ndc, const Item& it) {
  PiFeatureVector x{};
  const std::array<double, 3> flags{ndc.dyslexia ? 1.0 : 0.0, ndc.dyscalculia ? 1.0 : 0.0,
                                    ndc.spd ? 1.0 : 0.0};
  const auto d = static_cast<std::size_t>(it.delivery);
  const auto r = static_cast<std::size_t>(it.response);
  const auto c = static_cast<std::size_t>(it.content);
  x[0] = 1.0;
  for (std::size_t n = 0; n < 3; ++n) x[1 + n] = flags[n];
  x[4 + d] = 1.0;
  x[7 + r] = 1.0;
  x[11 + c] = 1.0;
  x[14] = it.density;
  for (std::size_t n = 0; n < 3; ++n) {
    x[15 + 3 * n + d] = flags[n];
    x[24 + 4 * n + r] = flags[n];
    x[36 + 3 * n + c] = flags[n];
  }
  return x;
}

const std::array<std::string_view, kPiFeatureCount>& pi_feature_names() {
  static const std::array<std::string_view, kPiFeatureCount> names = {
      "bias",
      "dyslexia", "dyscalculia", "spd",
      "delivery=read", "delivery=listen", "delivery=both",
      "response=written", "response=speak", "response=click_picture", "response=click_read",
      "content=letter", "content=digit", "content=both",
      "density",
      "dyslexia*delivery=read", "dyslexia*delivery=listen", "dyslexia*delivery=both",
      "dyscalculia*delivery=read", "dyscalculia*delivery=listen", "dyscalculia*delivery=both",
      "spd*delivery=read", "spd*delivery=listen", "spd*delivery=both",
      "dyslexia*response=written", "dyslexia*response=speak",
      "dyslexia*response=click_picture", "dyslexia*response=click_read",
      "dyscalculia*response=written", "dyscalculia*response=speak",
      "dyscalculia*response=click_picture", "dyscalculia*response=click_read",
      "spd*response=written", "spd*response=speak",
      "spd*response=click_picture", "spd*response=click_read",
      "dyslexia*content=letter", "dyslexia*content=digit", "dyslexia*content=both",
      "dyscalculia*content=letter", "dyscalculia*content=digit", "dyscalculia*content=both",
      "spd*content=letter", "spd*content=digit", "spd*content=both",
  };
  return names;
}

KtmContextVector ktm_context_features(const NdcProfile& ndc, const Item& it) {
  KtmContextVector x{};
  x[static_cast<std::size_t>(it.delivery)] = 1.0;
  x[3 + static_cast<std::size_t>(it.response)] = 1.0;
  x[7 + static_cast<std::size_t>(it.content)] = 1.0;
  x[10] = it.density;
  x[11] = ndc.dyslexia ? 1.0 : 0.0;
  x[12] = ndc.dyscalculia ? 1.0 : 0.0;
  x[13] = ndc.spd ? 1.0 : 0.0;
  return x;
}

const std::array<std::string_view, kKtmContextCount>& ktm_context_names() {
  static const std::array<std::string_view, kKtmContextCount> names = {
      "delivery=read", "delivery=listen", "delivery=both",
      "response=written", "response=speak", "response=click_picture", "response=click_read",
      "content=letter", "content=digit", "content=both",
      "density", "dyslexia", "dyscalculia", "spd",
  };
  return names;
}

// --- parameters -------------------------------------------------------------

ZilmParams ZilmParams::zeros(std::size_t n_students, std::size_t n_items) {
  ZilmParams p;
  p.theta.assign(n_students, 0.0);
  p.b.assign(n_items, 0.0);
  p.a_raw.assign(n_items, 0.0);
  p.g_raw.assign(n_items, 0.0);
  return p;
}

double ZilmParams::discrimination(std::size_t item) const { return softplus(a_raw.at(item)); }
double ZilmParams::guessing(std::size_t item) const {
  return kGuessingCeiling * sigmoid(g_raw.at(item));
}

Ktm1Params Ktm1Params::zeros(std::size_t n_students, std::size_t n_items) {
  Ktm1Params p;
  p.user_weights.assign(n_students, 0.0);
  p.item_weights.assign(n_items, 0.0);
  return p;
}

std::vector<ParamBlock> param_blocks(ZilmParams& p, bool include_pi) {
  std::vector<ParamBlock> out{{"theta", p.theta}, {"b", p.b}, {"a_raw", p.a_raw}, {"g_raw", p.g_raw}};
  if (include_pi) out.push_back({"w_pi", p.w_pi});
  return out;
}

std::vector<ParamBlock> param_blocks(Ktm1Params& p) {
  return {{"user_weights", p.user_weights},
          {"item_weights", p.item_weights},
          {"context_weights", p.context_weights},
          {"bias", std::span<double>(&p.bias, 1)}};
}

std::vector<double> frozen_irt_pi_weights() {
  std::vector<double> w(kPiFeatureCount, 0.0);
  w[0] = kFrozenPiBias;
  return w;
}

// --- probabilities ----------------------------------------------------------

double zilm_success_prob(double pi, double p) {
  if (!(pi >= 0.0 && pi <= 1.0) || !(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("zilm_success_prob: pi and p must lie in [0, 1]");
  }
  return (1.0 - pi) * p;
}

double zilm_failure_prob(double pi, double p) {
  if (!(pi >= 0.0 && pi <= 1.0) || !(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("zilm_failure_prob: pi and p must lie in [0, 1]");
  }
  return pi + (1.0 - pi) * (1.0 - p);
}

double pi_of(const ZilmParams& params, std::span<const double> x) {
  if (x.size() != params.w_pi.size()) {
    throw std::invalid_argument("pi_of: feature vector has " + std::to_string(x.size()) +
                                " entries, weights have " + std::to_string(params.w_pi.size()));
  }
  double z = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) z += params.w_pi[k] * x[k];
  return sigmoid(z);
}

double irt_prob(const ZilmParams& params, std::int64_t student_id, std::int64_t item_id) {
  if (student_id < 0 || static_cast<std::size_t>(student_id) >= params.theta.size()) {
    throw std::out_of_range("irt_prob: unknown student id " + std::to_string(student_id));
  }
  if (item_id < 0 || static_cast<std::size_t>(item_id) >= params.b.size()) {
    throw std::out_of_range("irt_prob: unknown item id " + std::to_string(item_id));
  }
  const auto j = static_cast<std::size_t>(item_id);
  const double a = params.discrimination(j);
  const double g = params.guessing(j);
  const double f = sigmoid(a * (params.theta[static_cast<std::size_t>(student_id)] - params.b[j]));
  return g + (1.0 - g) * f;
}

double ktm1_prob(const Ktm1Params& params, std::int64_t student_id, std::int64_t item_id,
                 std::span<const double> context) {
  if (context.size() != params.context_weights.size()) {
    throw std::invalid_argument("ktm1_prob: context has " + std::to_string(context.size()) +
                                " entries, weights have " +
                                std::to_string(params.context_weights.size()));
  }
  double z = params.bias + params.user_weights.at(static_cast<std::size_t>(student_id)) +
             params.item_weights.at(static_cast<std::size_t>(item_id));
  for (std::size_t k = 0; k < context.size(); ++k) z += params.context_weights[k] * context[k];
  return sigmoid(z);
}

// --- IRT / IRT-ZILM objective -------------------------------------------------

ZilmObjective::ZilmObjective(const Dataset& d, Split split, Penalty penalty, bool freeze_pi)
    : n_students_(d.students.size()),
      n_items_(d.items.size()),
      penalty_(penalty),
      freeze_pi_(freeze_pi) {
  index_attempts<PiFeatureVector>(d, split, pi_features, student_, item_, group_, label_,
                                  group_features_);
}

double ZilmObjective::value(const ZilmParams& params) const { return evaluate(params, nullptr); }

double ZilmObjective::value_and_gradient(const ZilmParams& params, ZilmParams& grad) const {
  return evaluate(params, &grad);
}

double ZilmObjective::evaluate(const ZilmParams& params, ZilmParams* grad) const {
  check_shape(params, n_students_, n_items_);
  const std::vector<ItemTerms> items = item_terms(params);

  const std::size_t n_groups = group_features_.size();
  std::vector<double> pi(n_groups);
  std::vector<double> one_minus_pi(n_groups);
  for (std::size_t gi = 0; gi < n_groups; ++gi) {
    double z = 0.0;
    for (std::size_t k = 0; k < kPiFeatureCount; ++k) z += params.w_pi[k] * group_features_[gi][k];
    pi[gi] = sigmoid(z);
    one_minus_pi[gi] = sigmoid(-z);
  }

  std::vector<double> group_dz;
  if (grad != nullptr) {
    *grad = ZilmParams::zeros(n_students_, n_items_);
    group_dz.assign(n_groups, 0.0);
  }

  double total = 0.0;
  for (std::size_t k = 0; k < student_.size(); ++k) {
    const auto s = static_cast<std::size_t>(student_[k]);
    const auto j = static_cast<std::size_t>(item_[k]);
    const auto gi = static_cast<std::size_t>(group_[k]);
    const ItemTerms& t = items[j];

    const double diff = params.theta[s] - params.b[j];
    const double f = sigmoid(t.a * diff);
    const double f_bar = sigmoid(-t.a * diff);
    const double p = t.g + (1.0 - t.g) * f;
    const double success = one_minus_pi[gi] * p;

    double dl_dsuccess = 0.0;
    if (label_[k] == 1) {
      total -= clamped_log(success);
      if (success >= kLogFloor) dl_dsuccess = -1.0 / success;
    } else {
      // 1 - (1-pi)p written to avoid cancellation when success is close to 1.
      const double failure = pi[gi] + one_minus_pi[gi] * (1.0 - t.g) * f_bar;
      total -= clamped_log(failure);
      if (failure >= kLogFloor) dl_dsuccess = 1.0 / failure;
    }
    if (grad == nullptr) continue;

    const double dl_dp = dl_dsuccess * one_minus_pi[gi];
    const double dl_dt = dl_dp * (1.0 - t.g) * f * f_bar;
    grad->theta[s] += dl_dt * t.a;
    grad->b[j] -= dl_dt * t.a;
    grad->a_raw[j] += dl_dt * diff * t.da;
    grad->g_raw[j] += dl_dp * (1.0 - f) * t.dg;
    group_dz[gi] -= dl_dsuccess * p * pi[gi] * one_minus_pi[gi];
  }

  double penalty = penalty_.l2_theta * sum_squares(params.theta) +
                   penalty_.l2_item * (sum_squares(params.b) + sum_squares(params.a_raw) +
                                       sum_squares(params.g_raw));
  if (!freeze_pi_) penalty += penalty_.l2_weights * sum_squares(params.w_pi, 1);

  const double n = static_cast<double>(student_.size());
  if (grad != nullptr) {
    if (!freeze_pi_) {
      for (std::size_t gi = 0; gi < n_groups; ++gi) {
        for (std::size_t k = 0; k < kPiFeatureCount; ++k) {
          grad->w_pi[k] += group_dz[gi] * group_features_[gi][k];
        }
      }
    }
    auto finish = [n](std::vector<double>& g, const std::vector<double>& x, double l2,
                      std::size_t skip) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = (g[i] + (i >= skip ? 2.0 * l2 * x[i] : 0.0)) / n;
      }
    };
    finish(grad->theta, params.theta, penalty_.l2_theta, 0);
    finish(grad->b, params.b, penalty_.l2_item, 0);
    finish(grad->a_raw, params.a_raw, penalty_.l2_item, 0);
    finish(grad->g_raw, params.g_raw, penalty_.l2_item, 0);
    if (freeze_pi_) {
      std::fill(grad->w_pi.begin(), grad->w_pi.end(), 0.0);
    } else {
      finish(grad->w_pi, params.w_pi, penalty_.l2_weights, 1);
    }
  }
  return (total + penalty) / n;
}

// --- KTM degree-1 objective -----------------------------------------------------

Ktm1Objective::Ktm1Objective(const Dataset& d, Split split, Penalty penalty)
    : n_students_(d.students.size()), n_items_(d.items.size()), penalty_(penalty) {
  index_attempts<KtmContextVector>(d, split, ktm_context_features, student_, item_, group_,
                                   label_, group_features_);
}

double Ktm1Objective::value(const Ktm1Params& params) const { return evaluate(params, nullptr); }

double Ktm1Objective::value_and_gradient(const Ktm1Params& params, Ktm1Params& grad) const {
  return evaluate(params, &grad);
}

double Ktm1Objective::evaluate(const Ktm1Params& params, Ktm1Params* grad) const {
  check_shape(params, n_students_, n_items_);
  const std::size_t n_groups = group_features_.size();
  std::vector<double> context(n_groups, 0.0);
  for (std::size_t gi = 0; gi < n_groups; ++gi) {
    for (std::size_t k = 0; k < kKtmContextCount; ++k) {
      context[gi] += params.context_weights[k] * group_features_[gi][k];
    }
  }
  std::vector<double> group_dz;
  if (grad != nullptr) {
    *grad = Ktm1Params::zeros(n_students_, n_items_);
    group_dz.assign(n_groups, 0.0);
  }

  double total = 0.0;
  for (std::size_t k = 0; k < student_.size(); ++k) {
    const auto s = static_cast<std::size_t>(student_[k]);
    const auto j = static_cast<std::size_t>(item_[k]);
    const auto gi = static_cast<std::size_t>(group_[k]);
    const double z = params.bias + params.user_weights[s] + params.item_weights[j] + context[gi];
    // Signed margin: -log sigmoid(+z) for y=1, -log sigmoid(-z) for y=0.
    const double m = label_[k] == 1 ? z : -z;
    const double prob = sigmoid(m);
    total -= clamped_log(prob);
    if (grad == nullptr) continue;
    const double dz = prob >= kLogFloor ? (label_[k] == 1 ? -(1.0 - prob) : (1.0 - prob)) : 0.0;
    grad->user_weights[s] += dz;
    grad->item_weights[j] += dz;
    grad->bias += dz;
    group_dz[gi] += dz;
  }

  const double penalty = penalty_.l2_theta * sum_squares(params.user_weights) +
                         penalty_.l2_item * sum_squares(params.item_weights) +
                         penalty_.l2_weights * sum_squares(params.context_weights);
  const double n = static_cast<double>(student_.size());
  if (grad != nullptr) {
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
      for (std::size_t k = 0; k < kKtmContextCount; ++k) {
        grad->context_weights[k] += group_dz[gi] * group_features_[gi][k];
      }
    }
    auto finish = [n](std::vector<double>& g, const std::vector<double>& x, double l2) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] + 2.0 * l2 * x[i]) / n;
    };
    finish(grad->user_weights, params.user_weights, penalty_.l2_theta);
    finish(grad->item_weights, params.item_weights, penalty_.l2_item);
    finish(grad->context_weights, params.context_weights, penalty_.l2_weights);
    grad->bias /= n;
  }
  return (total + penalty) / n;
}

// --- free-function wrappers --------------------------------------------------------

double zilm_nll(const ZilmParams& params, const Dataset& d, Split split, Penalty penalty) {
  return ZilmObjective(d, split, penalty, false).value(params);
}

ZilmParams zilm_grad(const ZilmParams& params, const Dataset& d, Split split, Penalty penalty,
                     bool freeze_pi) {
  ZilmParams g;
  ZilmObjective(d, split, penalty, freeze_pi).value_and_gradient(params, g);
  return g;
}

double ktm1_nll(const Ktm1Params& params, const Dataset& d, Split split, Penalty penalty) {
  return Ktm1Objective(d, split, penalty).value(params);
}

Ktm1Params ktm1_grad(const Ktm1Params& params, const Dataset& d, Split split, Penalty penalty) {
  Ktm1Params g;
  Ktm1Objective(d, split, penalty).value_and_gradient(params, g);
  return g;
}

}  // namespace zilm
