#include "zilm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

#include "zilm/errors.hpp"
#include "zilm/io.hpp"
#include "zilm/math.hpp"
#include "zilm/random.hpp"

namespace zilm {

using nlohmann::json;

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("correlation undefined for constant input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

const Item& item_at(const Dataset& d, std::int64_t id) {
  if (id < 0 || id >= static_cast<std::int64_t>(d.items.size())) {
    throw DataError("unknown item id " + std::to_string(id));
  }
  return d.items[static_cast<std::size_t>(id)];
}

const StudentProfile& student_at(const Dataset& d, std::int64_t id) {
  if (id < 0 || id >= static_cast<std::int64_t>(d.students.size())) {
    throw DataError("unknown student id " + std::to_string(id));
  }
  return d.students[static_cast<std::size_t>(id)];
}

void check_compatible(const FittedModel& m, const Dataset& d) {
  if (m.n_students() != d.students.size() || m.n_items() != d.items.size()) {
    std::ostringstream os;
    os << "model has " << m.n_students() << " students and " << m.n_items()
       << " items but the dataset has " << d.students.size() << " and " << d.items.size();
    throw DataError(os.str());
  }
}

CorrelationPair both_correlations(std::span<const double> truth, std::span<const double> est) {
  return {correlation(truth, est, CorrelationKind::Pearson),
          correlation(truth, est, CorrelationKind::Spearman)};
}

std::size_t outcome_index(Outcome o) { return static_cast<std::size_t>(o); }

json ndc_json(const NdcProfile& p) {
  return {{"dyslexia", p.dyslexia}, {"dyscalculia", p.dyscalculia}, {"spd", p.spd},
          {"label", ndc_label(p)}};
}

json pair_json(const CorrelationPair& c) { return {{"pearson", c.pearson}, {"spearman", c.spearman}}; }

json group_json(const PolicyGroup& g) {
  return {{"baseline_rate", g.baseline_rate},
          {"policy_rate", g.policy_rate},
          {"ratio", g.ratio},
          {"n_attempts", g.n_attempts}};
}

std::string csv_real(double v) { return format_double(v); }

}  // namespace

// --- classification metrics -----------------------------------------------------

MetricsReport classification_metrics(std::span<const double> predicted,
                                     std::span<const int> labels, Split split) {
  if (predicted.size() != labels.size()) {
    throw DataError("prediction and label counts differ");
  }
  if (predicted.empty()) throw DataError("cannot score an empty split");
  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  double nll = 0.0, brier = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double p = predicted[i];
    const int y = labels[i];
    const int yhat = p >= 0.5 ? 1 : 0;
    correct += yhat == y ? 1 : 0;
    tp += (yhat == 1 && y == 1) ? 1 : 0;
    fp += (yhat == 1 && y == 0) ? 1 : 0;
    fn += (yhat == 0 && y == 1) ? 1 : 0;
    nll -= y == 1 ? clamped_log(p) : clamped_log(1.0 - p);
    brier += (p - y) * (p - y);
  }
  const double n = static_cast<double>(predicted.size());
  MetricsReport r;
  r.accuracy = static_cast<double>(correct) / n;
  const std::size_t denom = 2 * tp + fp + fn;
  r.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  r.nll = nll / n;
  r.brier = brier / n;
  r.n_attempts = predicted.size();
  r.split = split;
  return r;
}

MetricsReport classification_metrics(const FittedModel& model, const Dataset& d, Split split) {
  check_compatible(model, d);
  std::vector<double> predicted;
  std::vector<int> labels;
  for (const Attempt& a : d.attempts) {
    if (a.split != split) continue;
    predicted.push_back(predict(model, student_at(d, a.student_id), item_at(d, a.item_id)));
    labels.push_back(a.label());
  }
  return classification_metrics(predicted, labels, split);
}

// --- correlation and recovery ----------------------------------------------------

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double correlation(std::span<const double> xs, std::span<const double> ys, CorrelationKind kind) {
  if (xs.size() != ys.size()) throw std::invalid_argument("correlation: length mismatch");
  if (xs.size() < 3) throw std::invalid_argument("correlation: need at least 3 points");
  if (kind == CorrelationKind::Pearson) return pearson(xs, ys);
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  return pearson(rx, ry);
}

RecoveryReport recovery_from_estimates(std::span<const double> truth, std::span<const double> est,
                                       std::span<const int> ndc_counts) {
  if (truth.size() != est.size() || truth.size() != ndc_counts.size()) {
    throw std::invalid_argument("recovery: length mismatch");
  }
  RecoveryReport r;
  r.ability = both_correlations(truth, est);

  const double me = mean_of(est);
  const double mt = mean_of(truth);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    sxy += (est[i] - me) * (truth[i] - mt);
    sxx += (est[i] - me) * (est[i] - me);
  }
  r.align_slope = sxy / sxx;
  r.align_intercept = mt - r.align_slope * me;

  std::map<int, double> sums;
  double nd_sum = 0.0;
  std::size_t nd_n = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double resid = r.align_intercept + r.align_slope * est[i] - truth[i];
    sums[ndc_counts[i]] += resid;
    ++r.group_size[ndc_counts[i]];
    if (ndc_counts[i] > 0) {
      nd_sum += resid;
      ++nd_n;
    }
  }
  for (const auto& [k, s] : sums) r.ability_bias[k] = s / static_cast<double>(r.group_size[k]);
  r.nd_bias = nd_n == 0 ? 0.0 : nd_sum / static_cast<double>(nd_n);
  return r;
}

RecoveryReport recovery_report(const FittedModel& model, const Dataset& d) {
  check_compatible(model, d);
  std::vector<double> true_theta, true_b, true_a;
  std::vector<int> counts;
  for (const StudentProfile& s : d.students) {
    true_theta.push_back(s.ability);
    counts.push_back(ndc_count(s.ndc));
  }
  for (const Item& it : d.items) {
    true_b.push_back(it.difficulty);
    true_a.push_back(it.discrimination);
  }

  RecoveryReport r;
  if (model.kind == ModelKind::Ktm1) {
    const Ktm1Params& p = model.ktm();
    std::vector<double> est_b(p.item_weights.size());
    std::transform(p.item_weights.begin(), p.item_weights.end(), est_b.begin(),
                   [](double w) { return -w; });
    r = recovery_from_estimates(true_theta, p.user_weights, counts);
    r.difficulty = both_correlations(true_b, est_b);
  } else {
    const ZilmParams& p = model.zilm();
    std::vector<double> est_a(p.a_raw.size());
    for (std::size_t j = 0; j < est_a.size(); ++j) est_a[j] = p.discrimination(j);
    r = recovery_from_estimates(true_theta, p.theta, counts);
    r.difficulty = both_correlations(true_b, p.b);
    r.discrimination = both_correlations(true_a, est_a);
  }
  r.kind = model.kind;
  return r;
}

// --- forced delivery ---------------------------------------------------------------

double DeliveryReport::correct_spread(const std::string& group) const {
  const auto& cells = groups.at(group);
  double lo = cells[0].correct_rate, hi = cells[0].correct_rate;
  for (const DeliveryCell& c : cells) {
    lo = std::min(lo, c.correct_rate);
    hi = std::max(hi, c.correct_rate);
  }
  return hi - lo;
}

DeliveryReport forced_delivery_experiment(const SimConfig& cfg) {
  DeliveryReport r;
  for (Delivery forced : kDeliveries) {
    const Dataset d = generate_dataset(cfg, [forced](const StudentProfile&, const Item& it) {
      return DrtChoice{forced, it.response};
    });
    struct Tally {
      std::size_t n = 0, correct = 0, answered = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const char* g : {"all", "nt", "nd", "dyslexia", "dyscalculia", "spd"}) tallies[g];
    for (const Attempt& a : d.attempts) {
      const NdcProfile& ndc = student_at(d, a.student_id).ndc;
      const int count = ndc_count(ndc);
      std::vector<std::string> groups{"all", count == 0 ? "nt" : "nd"};
      if (count == 1) groups.push_back(ndc_label(ndc));
      for (const std::string& g : groups) {
        Tally& t = tallies[g];
        ++t.n;
        t.correct += a.outcome == Outcome::Correct ? 1 : 0;
        t.answered += a.outcome != Outcome::NotAnswered ? 1 : 0;
      }
    }
    for (const auto& [g, t] : tallies) {
      DeliveryCell& c = r.groups[g][static_cast<std::size_t>(forced)];
      c.n_attempts = t.n;
      if (t.n > 0) {
        c.correct_rate = static_cast<double>(t.correct) / static_cast<double>(t.n);
        c.answered_rate = static_cast<double>(t.answered) / static_cast<double>(t.n);
      }
    }
  }
  return r;
}

// --- contrast analysis --------------------------------------------------------------

std::string_view to_token(ContrastPartition p) {
  switch (p) {
    case ContrastPartition::Subject: return "subject";
    case ContrastPartition::ReadVsListen: return "read_vs_listen";
    case ContrastPartition::BothVsRead: return "both_vs_read";
    case ContrastPartition::RandomHalf: return "random_half";
  }
  return "subject";
}

ContrastPartition parse_partition(std::string_view s) {
  for (auto p : {ContrastPartition::Subject, ContrastPartition::ReadVsListen,
                 ContrastPartition::BothVsRead, ContrastPartition::RandomHalf}) {
    if (to_token(p) == s) return p;
  }
  throw ConfigError("unknown partition '" + std::string(s) +
                    "' (expected subject, read_vs_listen, both_vs_read, random_half)");
}

std::optional<int> contrast_side(ContrastPartition p, const Attempt& a, const Item& it) {
  switch (p) {
    case ContrastPartition::Subject:
      return it.subject == Subject::Maths ? 0 : 1;
    case ContrastPartition::ReadVsListen:
      if (it.delivery == Delivery::Read) return 0;
      if (it.delivery == Delivery::Listen) return 1;
      return std::nullopt;
    case ContrastPartition::BothVsRead:
      if (it.delivery == Delivery::Both) return 0;
      if (it.delivery == Delivery::Read) return 1;
      return std::nullopt;
    case ContrastPartition::RandomHalf: {
      const auto key = (static_cast<std::uint64_t>(a.student_id) << 32) ^
                       static_cast<std::uint64_t>(a.item_id);
      return static_cast<int>(mix64(key) & 1);
    }
  }
  return std::nullopt;
}

ContrastReport contrast_analysis(const Dataset& d, ContrastPartition p) {
  ContrastReport r;
  r.partition = p;
  const std::size_t n = d.students.size();
  std::vector<std::array<std::array<std::size_t, kOutcomeCount>, 2>> counts(n);
  for (const Attempt& a : d.attempts) {
    const auto side = contrast_side(p, a, item_at(d, a.item_id));
    if (!side) continue;
    student_at(d, a.student_id);
    ++counts[static_cast<std::size_t>(a.student_id)][static_cast<std::size_t>(*side)]
            [outcome_index(a.outcome)];
  }

  std::map<std::string, std::vector<const StudentContrast*>> members;
  r.students.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& c = counts[s];
    const std::size_t na = c[0][0] + c[0][1] + c[0][2];
    const std::size_t nb = c[1][0] + c[1][1] + c[1][2];
    if (na == 0 || nb == 0) {
      ++r.excluded_students;
      continue;
    }
    StudentContrast sc;
    sc.student_id = d.students[s].id;
    sc.ndc = ndc_label(d.students[s].ndc);
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
      sc.rate_a[k] = static_cast<double>(c[0][k]) / static_cast<double>(na);
      sc.rate_b[k] = static_cast<double>(c[1][k]) / static_cast<double>(nb);
      sc.diff[k] = sc.rate_a[k] - sc.rate_b[k];
    }
    r.students.push_back(std::move(sc));
  }
  for (const StudentContrast& sc : r.students) members[sc.ndc].push_back(&sc);

  for (const auto& [label, list] : members) {
    GroupContrast g;
    g.n_students = list.size();
    const double m = static_cast<double>(list.size());
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
      double sum = 0.0;
      for (const StudentContrast* sc : list) sum += sc->diff[k];
      const double mean = sum / m;
      double ss = 0.0;
      for (const StudentContrast* sc : list) ss += (sc->diff[k] - mean) * (sc->diff[k] - mean);
      g.mean_diff[k] = mean;
      g.std_error[k] = list.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
    }
    r.groups[label] = g;
  }
  return r;
}

// --- DRT selection policies --------------------------------------------------------

std::string_view to_token(PolicyKind p) {
  switch (p) {
    case PolicyKind::Random: return "random";
    case PolicyKind::OracleActive: return "oracle-active";
    case PolicyKind::OracleAdversarial: return "oracle-adversarial";
    case PolicyKind::ModelActive: return "model-active";
  }
  return "random";
}

PolicyKind parse_policy(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '_', '-');
  for (auto p : {PolicyKind::Random, PolicyKind::OracleActive, PolicyKind::OracleAdversarial,
                 PolicyKind::ModelActive}) {
    if (to_token(p) == norm) return p;
  }
  throw ConfigError("unknown policy '" + std::string(s) +
                    "' (expected random, oracle-active, oracle-adversarial, model-active)");
}

PolicyReport policy_experiment(const SimConfig& cfg, PolicyKind policy,
                               const FittedModel* model) {
  if (policy == PolicyKind::ModelActive && (model == nullptr || model->kind != ModelKind::IrtZilm)) {
    throw ConfigError("model-active policy needs a fitted irt_zilm model");
  }

  auto choose = [&cfg, policy, model](const StudentProfile& s, const Item& base) {
    DrtChoice best{base.delivery, base.response};
    double best_pi = 0.0;
    bool first = true;
    for (Delivery dl : kDeliveries) {
      for (Response rs : kResponses) {
        Item shown = base;
        shown.delivery = dl;
        shown.response = rs;
        const double pi = policy == PolicyKind::ModelActive ? predict_pi(*model, s.ndc, shown)
                                                            : true_lqf_pi(s, shown, cfg.lqf);
        const bool better = policy == PolicyKind::OracleAdversarial ? pi > best_pi : pi < best_pi;
        if (first || better) {
          best = {dl, rs};
          best_pi = pi;
          first = false;
        }
      }
    }
    return best;
  };

  const Dataset baseline = generate_dataset(cfg);
  const Dataset chosen =
      policy == PolicyKind::Random ? baseline : generate_dataset(cfg, DrtOverride(choose));

  struct Tally {
    std::size_t n = 0, base_correct = 0, policy_correct = 0;
  };
  std::map<int, Tally> tallies;
  Tally nd;
  for (std::size_t k = 0; k < baseline.attempts.size(); ++k) {
    const Attempt& b = baseline.attempts[k];
    const Attempt& c = chosen.attempts[k];
    const int count = ndc_count(student_at(baseline, b.student_id).ndc);
    for (Tally* t : {&tallies[count], count > 0 ? &nd : nullptr}) {
      if (t == nullptr) continue;
      ++t->n;
      t->base_correct += b.outcome == Outcome::Correct ? 1 : 0;
      t->policy_correct += c.outcome == Outcome::Correct ? 1 : 0;
    }
  }
  auto finish = [](const Tally& t) {
    PolicyGroup g;
    g.n_attempts = t.n;
    if (t.n == 0) return g;
    g.baseline_rate = static_cast<double>(t.base_correct) / static_cast<double>(t.n);
    g.policy_rate = static_cast<double>(t.policy_correct) / static_cast<double>(t.n);
    g.ratio = g.baseline_rate > 0.0 ? g.policy_rate / g.baseline_rate : 0.0;
    return g;
  };

  PolicyReport r;
  r.policy = policy;
  for (const auto& [count, t] : tallies) r.groups[count] = finish(t);
  r.nd = finish(nd);
  return r;
}

// --- likelihood-ratio NDC probe ----------------------------------------------------

HypothesisReport ndc_hypothesis_test(const Dataset& d, std::int64_t student_id,
                                     const NdcProfile& alternative, const FitConfig& cfg,
                                     const FittedModel* null_model) {
  const StudentProfile& student = student_at(d, student_id);
  HypothesisReport r;
  r.student_id = student_id;
  r.null_ndc = student.ndc;
  r.alt_ndc = alternative;
  r.degenerate = alternative == student.ndc;

  std::optional<FittedModel> owned;
  if (null_model == nullptr) {
    owned = fit(d, ModelKind::IrtZilm, cfg);
    null_model = &*owned;
  }
  if (null_model->kind != ModelKind::IrtZilm) {
    throw ConfigError("hypothesis test needs an irt_zilm model");
  }
  check_compatible(*null_model, d);
  const ZilmParams& p = null_model->zilm();

  std::vector<const Attempt*> mine;
  for (const Attempt& a : d.attempts) {
    if (a.student_id == student_id) mine.push_back(&a);
  }
  if (mine.empty()) throw DataError("student " + std::to_string(student_id) + " has no attempts");
  r.n_attempts = mine.size();

  // Per-student NLL as a function of ability for one NDC hypothesis.
  auto profile = [&](const NdcProfile& ndc) {
    std::vector<double> pis, as, bs, gs;
    std::vector<int> ys;
    for (const Attempt* a : mine) {
      const Item& it = item_at(d, a->item_id);
      const auto j = static_cast<std::size_t>(a->item_id);
      pis.push_back(pi_of(p, pi_features(ndc, it)));
      as.push_back(p.discrimination(j));
      bs.push_back(p.b[j]);
      gs.push_back(p.guessing(j));
      ys.push_back(a->label());
    }
    auto nll = [=](double theta) {
      double total = 0.0;
      for (std::size_t k = 0; k < ys.size(); ++k) {
        const double z = as[k] * (theta - bs[k]);
        if (ys[k] == 1) {
          total -= clamped_log((1.0 - pis[k]) * (gs[k] + (1.0 - gs[k]) * sigmoid(z)));
        } else {
          total -= clamped_log(pis[k] + (1.0 - pis[k]) * (1.0 - gs[k]) * sigmoid(-z));
        }
      }
      return total;
    };
    // Coarse grid first: with guessing the profile need not be unimodal.
    constexpr double kLo = -6.0, kHi = 6.0, kStep = 0.25;
    double best_theta = kLo, best = nll(kLo);
    for (double t = kLo + kStep; t <= kHi + 1e-12; t += kStep) {
      const double v = nll(t);
      if (v < best) {
        best = v;
        best_theta = t;
      }
    }
    const auto [theta, value] = boost::math::tools::brent_find_minima(
        nll, std::max(kLo, best_theta - kStep), std::min(kHi, best_theta + kStep), 40);
    return value < best ? std::pair{theta, value} : std::pair{best_theta, best};
  };

  std::tie(r.theta_null, r.nll_null) = profile(student.ndc);
  if (r.degenerate) {
    r.theta_alt = r.theta_null;
    r.nll_alt = r.nll_null;
    r.statistic = 0.0;
    return r;
  }
  std::tie(r.theta_alt, r.nll_alt) = profile(alternative);
  r.statistic = 2.0 * (r.nll_null - r.nll_alt);
  return r;
}

// --- serialization -------------------------------------------------------------------

json to_json(const MetricsReport& r) {
  return {{"split", to_token(r.split)}, {"n_attempts", r.n_attempts}, {"accuracy", r.accuracy},
          {"f1", r.f1},                 {"nll", r.nll},               {"brier", r.brier}};
}

json to_json(const RecoveryReport& r) {
  json bias = json::object();
  for (const auto& [k, v] : r.ability_bias) {
    bias[std::to_string(k)] = {{"mean_residual", v}, {"n_students", r.group_size.at(k)}};
  }
  json j = {{"kind", to_token(r.kind)},
            {"ability", pair_json(r.ability)},
            {"difficulty", pair_json(r.difficulty)},
            {"discrimination", r.discrimination ? pair_json(*r.discrimination) : json(nullptr)},
            {"alignment", {{"intercept", r.align_intercept}, {"slope", r.align_slope}}},
            {"ability_bias_by_ndc_count", bias},
            {"ability_bias_nd", r.nd_bias}};
  return j;
}

json to_json(const DeliveryReport& r) {
  json j = json::object();
  for (const auto& [g, cells] : r.groups) {
    json row = json::object();
    for (Delivery dl : kDeliveries) {
      const DeliveryCell& c = cells[static_cast<std::size_t>(dl)];
      row[std::string(to_token(dl))] = {{"correct_rate", c.correct_rate},
                                        {"answered_rate", c.answered_rate},
                                        {"n_attempts", c.n_attempts}};
    }
    j[g] = row;
  }
  return {{"groups", j}};
}

json to_json(const ContrastReport& r) {
  json groups = json::object();
  for (const auto& [label, g] : r.groups) {
    json row = {{"n_students", g.n_students}};
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
      row[std::string(to_token(kOutcomes[k]))] = {{"mean_diff", g.mean_diff[k]},
                                                  {"std_error", g.std_error[k]}};
    }
    groups[label] = row;
  }
  json students = json::array();
  for (const StudentContrast& s : r.students) {
    json diffs = json::object();
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
      diffs[std::string(to_token(kOutcomes[k]))] = s.diff[k];
    }
    students.push_back({{"student_id", s.student_id}, {"ndc", s.ndc}, {"diff", diffs}});
  }
  return {{"partition", to_token(r.partition)},
          {"excluded_students", r.excluded_students},
          {"groups", groups},
          {"students", students}};
}

json to_json(const PolicyReport& r) {
  json groups = json::object();
  for (const auto& [k, g] : r.groups) groups[std::to_string(k)] = group_json(g);
  return {{"policy", to_token(r.policy)}, {"groups_by_ndc_count", groups}, {"nd", group_json(r.nd)}};
}

json to_json(const HypothesisReport& r) {
  return {{"student_id", r.student_id},
          {"null_ndc", ndc_json(r.null_ndc)},
          {"alt_ndc", ndc_json(r.alt_ndc)},
          {"nll_null", r.nll_null},
          {"nll_alt", r.nll_alt},
          {"theta_null", r.theta_null},
          {"theta_alt", r.theta_alt},
          {"statistic", r.statistic},
          {"threshold", kHypothesisThreshold},
          {"n_attempts", r.n_attempts},
          {"degenerate", r.degenerate}};
}

std::string to_csv(const MetricsReport& r, std::string_view model_label) {
  return "model,split,n_attempts,accuracy,f1,nll,brier\n" + std::string(model_label) + ',' +
         std::string(to_token(r.split)) + ',' + std::to_string(r.n_attempts) + ',' +
         csv_real(r.accuracy) + ',' + csv_real(r.f1) + ',' + csv_real(r.nll) + ',' +
         csv_real(r.brier) + '\n';
}

std::string to_csv(const RecoveryReport& r) {
  std::string out = "kind,parameter,statistic,value\n";
  const std::string kind(to_token(r.kind));
  auto add = [&](std::string_view param, const CorrelationPair& c) {
    out += kind + ',' + std::string(param) + ",pearson," + csv_real(c.pearson) + '\n';
    out += kind + ',' + std::string(param) + ",spearman," + csv_real(c.spearman) + '\n';
  };
  add("ability", r.ability);
  add("difficulty", r.difficulty);
  if (r.discrimination) add("discrimination", *r.discrimination);
  for (const auto& [k, v] : r.ability_bias) {
    out += kind + ",ability_bias,ndc_count=" + std::to_string(k) + ',' + csv_real(v) + '\n';
  }
  out += kind + ",ability_bias,nd," + csv_real(r.nd_bias) + '\n';
  return out;
}

std::string to_csv(const DeliveryReport& r) {
  std::string out = "group,metric,read,listen,both\n";
  for (const auto& [g, cells] : r.groups) {
    out += g + ",correct_rate";
    for (const DeliveryCell& c : cells) out += ',' + csv_real(c.correct_rate);
    out += '\n' + g + ",answered_rate";
    for (const DeliveryCell& c : cells) out += ',' + csv_real(c.answered_rate);
    out += '\n';
  }
  return out;
}

std::string to_csv(const ContrastReport& r) {
  std::string out = "partition,group,outcome,n_students,mean_diff,std_error\n";
  const std::string part(to_token(r.partition));
  for (const auto& [label, g] : r.groups) {
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
      out += part + ',' + label + ',' + std::string(to_token(kOutcomes[k])) + ',' +
             std::to_string(g.n_students) + ',' + csv_real(g.mean_diff[k]) + ',' +
             csv_real(g.std_error[k]) + '\n';
    }
  }
  return out;
}

std::string to_csv(const PolicyReport& r) {
  const char* ratio = r.policy == PolicyKind::OracleAdversarial ? "drop" : "lift";
  std::string out = std::string("policy,group,n_attempts,baseline_rate,policy_rate,") + ratio + '\n';
  const std::string pol(to_token(r.policy));
  auto row = [&](const std::string& group, const PolicyGroup& g) {
    out += pol + ',' + group + ',' + std::to_string(g.n_attempts) + ',' +
           csv_real(g.baseline_rate) + ',' + csv_real(g.policy_rate) + ',' + csv_real(g.ratio) +
           '\n';
  };
  for (const auto& [k, g] : r.groups) row("ndc_count=" + std::to_string(k), g);
  row("nd", r.nd);
  return out;
}

std::string to_csv(const HypothesisReport& r) {
  return "student_id,null_ndc,alt_ndc,n_attempts,nll_null,nll_alt,statistic,threshold\n" +
         std::to_string(r.student_id) + ',' + ndc_label(r.null_ndc) + ',' +
         ndc_label(r.alt_ndc) + ',' + std::to_string(r.n_attempts) + ',' + csv_real(r.nll_null) +
         ',' + csv_real(r.nll_alt) + ',' + csv_real(r.statistic) + ',' +
         csv_real(kHypothesisThreshold) + '\n';
}

}  // namespace zilm
