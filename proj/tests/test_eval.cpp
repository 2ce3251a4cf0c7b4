#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "zilm/errors.hpp"
#include "zilm/eval.hpp"
#include "zilm/math.hpp"
#include "zilm/random.hpp"

using namespace zilm;
using zilm::testing::make_attempt;
using zilm::testing::make_item;
using zilm::testing::small_dataset;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("metrics of a constant one-half predictor") {
  const std::vector<double> p(4, 0.5);
  const std::vector<int> y{1, 0, 1, 0};
  const MetricsReport r = classification_metrics(p, y, Split::Test);
  CHECK(r.accuracy == 0.5);  // ties go to class 1
  CHECK(r.brier == 0.25);
  CHECK(r.nll == doctest::Approx(std::log(2.0)));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.n_attempts == 4);
}

TEST_CASE("metrics of a perfect predictor") {
  const std::vector<double> p{1.0, 0.0, 1.0};
  const std::vector<int> y{1, 0, 1};
  const MetricsReport r = classification_metrics(p, y, Split::Test);
  CHECK(r.accuracy == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.brier == 0.0);
  CHECK(r.nll < 1e-9);
}

TEST_CASE("hand-computed Brier and F1") {
  const std::vector<double> p{0.9, 0.2};
  const std::vector<int> y{1, 0};
  CHECK(classification_metrics(p, y, Split::Test).brier == doctest::Approx(0.025).epsilon(1e-12));

  // tp 2, fp 1, fn 1 -> precision 2/3, recall 2/3
  const std::vector<double> q{0.8, 0.7, 0.6, 0.1, 0.3};
  const std::vector<int> z{1, 1, 0, 1, 0};
  const MetricsReport r = classification_metrics(q, z, Split::Test);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.accuracy == doctest::Approx(0.6));

  const std::vector<double> none_p{0.1, 0.2};
  const std::vector<int> none_y{0, 0};
  CHECK(classification_metrics(none_p, none_y, Split::Test).f1 == 0.0);
  CHECK_THROWS_AS(classification_metrics(std::vector<double>{}, std::vector<int>{}, Split::Test),
                  DataError);
}

TEST_CASE("NLL and Brier are proper on simulated data") {
  SimConfig cfg;
  cfg.n_students = 5000;
  const Dataset d = generate_dataset(cfg);
  std::vector<double> truth;
  std::vector<int> y;
  double base = 0.0;
  for (const Attempt& a : d.attempts) {
    truth.push_back((1.0 - *a.true_pi) * *a.true_p);
    y.push_back(a.label());
    base += a.label();
  }
  REQUIRE(truth.size() >= 100000);
  base /= static_cast<double>(y.size());
  const MetricsReport best = classification_metrics(truth, y, Split::Train);
  for (double c : {0.2, 0.5, base, 0.8}) {
    const MetricsReport r =
        classification_metrics(std::vector<double>(y.size(), c), y, Split::Train);
    CHECK(best.nll <= r.nll);
    CHECK(best.brier <= r.brier);
  }
}

TEST_CASE("correlation examples") {
  const std::vector<double> x{1, 2, 3}, sq{1, 4, 9}, neg{-1, -2, -3};
  for (CorrelationKind k : {CorrelationKind::Pearson, CorrelationKind::Spearman}) {
    CHECK(correlation(x, x, k) == doctest::Approx(1.0));
    CHECK(correlation(x, neg, k) == doctest::Approx(-1.0));
  }
  CHECK(correlation(x, sq, CorrelationKind::Spearman) == doctest::Approx(1.0));
  // sxy = 8, sxx = 2, syy = 98/3 around means 2 and 14/3
  const double hand = 8.0 / std::sqrt(2.0 * 98.0 / 3.0);
  CHECK(correlation(x, sq, CorrelationKind::Pearson) == doctest::Approx(hand).epsilon(1e-12));
  CHECK(hand == doctest::Approx(0.9897).epsilon(1e-4));

  const std::vector<double> two{1, 2}, flat{1, 1, 1};
  CHECK_THROWS_AS(correlation(two, two, CorrelationKind::Pearson), std::invalid_argument);
  CHECK_THROWS_AS(correlation(x, flat, CorrelationKind::Pearson), std::invalid_argument);
  CHECK_THROWS_AS(correlation(x, two, CorrelationKind::Spearman), std::invalid_argument);
}

TEST_CASE("average ranks") {
  const std::vector<double> v{10, 20, 20, 5, 20};
  CHECK(average_ranks(v) == std::vector<double>{2, 4, 4, 1, 4});
}

TEST_CASE("correlations are invariant under positive affine maps") {
  RandomSource r(2);
  std::vector<double> x(500), y(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = r.normal();
    y[i] = 0.6 * x[i] + r.normal();
  }
  for (CorrelationKind k : {CorrelationKind::Pearson, CorrelationKind::Spearman}) {
    const double base = correlation(x, y, k);
    std::vector<double> x2 = x, y2 = y;
    for (double& v : x2) v = 3.5 * v - 7.0;
    for (double& v : y2) v = 0.25 * v + 100.0;
    CHECK(std::abs(correlation(x2, y2, k) - base) <= 1e-12);
  }
}

TEST_CASE("recovery from exact and affine estimates") {
  RandomSource r(3);
  std::vector<double> truth(300);
  std::vector<int> counts(300);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = r.normal();
    counts[i] = static_cast<int>(i % 3);
  }
  std::vector<double> affine = truth;
  for (double& v : affine) v = 2.0 * v + 3.0;
  for (const auto* est : {&truth, &affine}) {
    const RecoveryReport rep = recovery_from_estimates(truth, *est, counts);
    CHECK(rep.ability.pearson == doctest::Approx(1.0));
    CHECK(rep.ability.spearman == doctest::Approx(1.0));
    for (const auto& [group, bias] : rep.ability_bias) CHECK(std::abs(bias) < 1e-9);
    CHECK(std::abs(rep.nd_bias) < 1e-9);
  }
}

TEST_CASE("aligned residuals expose a group offset") {
  RandomSource r(4);
  std::vector<double> truth(2000), est(2000);
  std::vector<int> counts(2000);
  double shift_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = r.normal();
    counts[i] = i % 4 == 0 ? 1 : 0;
    est[i] = truth[i] - (counts[i] ? 0.5 : 0.0);
    shift_sum += counts[i] ? 0.5 : 0.0;
  }
  const RecoveryReport rep = recovery_from_estimates(truth, est, counts);
  CHECK(rep.ability_bias.at(1) < rep.ability_bias.at(0));
  CHECK(rep.nd_bias == doctest::Approx(rep.ability_bias.at(1)));
  CHECK(rep.group_size.at(1) == 500);
}

TEST_CASE("forced delivery layout and dyscalculia invariance") {
  SimConfig cfg;
  const DeliveryReport r = forced_delivery_experiment(cfg);
  for (const char* g : {"all", "nt", "nd", "dyslexia", "dyscalculia", "spd"}) {
    REQUIRE(r.groups.count(g) == 1);
    for (Delivery d : kDeliveries) {
      CHECK(r.cell(g, d).n_attempts > 0);
      CHECK(r.cell(g, d).correct_rate <= r.cell(g, d).answered_rate);
    }
  }
  CHECK(r.correct_spread("dyscalculia") < 0.02);
  CHECK(r.correct_spread("all") < 0.03);
  // NT students never change: pi is constant and random numbers are shared.
  CHECK(r.correct_spread("nt") == 0.0);

  const std::string csv = to_csv(r);
  CHECK(first_line(csv) == "group,metric,read,listen,both");
}

TEST_CASE("contrast side conventions") {
  Item it = make_item(0);
  const Attempt a = make_attempt(0, 0, Outcome::Correct);
  it.subject = Subject::Maths;
  CHECK(contrast_side(ContrastPartition::Subject, a, it) == 0);
  it.subject = Subject::English;
  CHECK(contrast_side(ContrastPartition::Subject, a, it) == 1);
  it.delivery = Delivery::Read;
  CHECK(contrast_side(ContrastPartition::ReadVsListen, a, it) == 0);
  CHECK(contrast_side(ContrastPartition::BothVsRead, a, it) == 1);
  it.delivery = Delivery::Listen;
  CHECK(contrast_side(ContrastPartition::ReadVsListen, a, it) == 1);
  CHECK_FALSE(contrast_side(ContrastPartition::BothVsRead, a, it).has_value());
  for (ContrastPartition p : {ContrastPartition::Subject, ContrastPartition::ReadVsListen,
                              ContrastPartition::BothVsRead, ContrastPartition::RandomHalf}) {
    CHECK(parse_partition(to_token(p)) == p);
  }
  CHECK_THROWS_AS(parse_partition("delivery"), ConfigError);
}

TEST_CASE("contrast rates on a hand-built dataset") {
  Dataset d;
  d.students = {{0, 0.0, {}}, {1, 0.0, {true, false, false}}};
  for (int i = 0; i < 4; ++i) {
    d.items.push_back(make_item(i));
    d.items.back().subject = i < 2 ? Subject::Maths : Subject::English;
  }
  d.attempts = {make_attempt(0, 0, Outcome::Correct),     make_attempt(0, 1, Outcome::NotAnswered),
                make_attempt(0, 2, Outcome::Correct),     make_attempt(0, 3, Outcome::Correct),
                make_attempt(1, 0, Outcome::Incorrect),   make_attempt(1, 1, Outcome::Incorrect),
                make_attempt(1, 2, Outcome::Correct),     make_attempt(1, 3, Outcome::Incorrect)};
  const ContrastReport r = contrast_analysis(d, ContrastPartition::Subject);
  REQUIRE(r.students.size() == 2);
  CHECK(r.students[0].diff[0] == doctest::Approx(0.5 - 1.0));
  CHECK(r.students[0].diff[2] == doctest::Approx(0.5));
  CHECK(r.students[1].diff[0] == doctest::Approx(-0.5));
  CHECK(r.students[1].diff[1] == doctest::Approx(0.5));
  CHECK(r.groups.at("nt").mean_diff[2] == doctest::Approx(0.5));
  CHECK(r.groups.at("dyslexia").n_students == 1);
  CHECK(r.excluded_students == 0);

  // a student with no Read/Listen split is excluded and counted
  const ContrastReport rl = contrast_analysis(d, ContrastPartition::ReadVsListen);
  CHECK(rl.students.empty());
  CHECK(rl.excluded_students == 2);
  CHECK(first_line(to_csv(r)) == "partition,group,outcome,n_students,mean_diff,std_error");
}

TEST_CASE("random halves show no group differences") {
  SimConfig cfg;
  const Dataset d = generate_dataset(cfg);
  const ContrastReport r = contrast_analysis(d, ContrastPartition::RandomHalf);
  for (const auto& [label, g] : r.groups) {
    for (double m : g.mean_diff) {
      CHECK_MESSAGE(std::abs(m) <= 0.03 + 3.0 / std::sqrt(static_cast<double>(g.n_students)),
                    label);
    }
  }
  for (const char* big : {"nt", "dyslexia", "spd", "dyscalculia"}) {
    for (double m : r.groups.at(big).mean_diff) CHECK(std::abs(m) <= 0.03);
  }
}

TEST_CASE("oracle-active never lowers a group's success rate") {
  SimConfig cfg;
  cfg.n_students = 2000;
  const PolicyReport random = policy_experiment(cfg, PolicyKind::Random);
  const PolicyReport active = policy_experiment(cfg, PolicyKind::OracleActive);
  const PolicyReport adversarial = policy_experiment(cfg, PolicyKind::OracleAdversarial);
  for (const auto& [count, g] : random.groups) CHECK(g.ratio == 1.0);
  for (const auto& [count, g] : active.groups) {
    CHECK(g.policy_rate >= random.groups.at(count).policy_rate);
    CHECK(g.ratio >= 1.0);
  }
  for (const auto& [count, g] : adversarial.groups) CHECK(g.ratio <= 1.0);
  CHECK(adversarial.groups.at(2).ratio < 0.25);
  CHECK(active.groups.at(0).ratio == doctest::Approx(1.0).epsilon(0.02));

  CHECK(first_line(to_csv(active)).ends_with(",lift"));
  CHECK(first_line(to_csv(adversarial)).ends_with(",drop"));
  CHECK(parse_policy("oracle_active") == PolicyKind::OracleActive);
  CHECK_THROWS_AS(parse_policy("greedy"), ConfigError);
}

TEST_CASE("model-active needs a fitted ZILM") {
  SimConfig cfg;
  cfg.n_students = 50;
  cfg.n_items = 30;
  CHECK_THROWS(policy_experiment(cfg, PolicyKind::ModelActive));
}

TEST_CASE("degenerate hypothesis test") {
  const Dataset d = small_dataset(60, 30, 7);
  FitConfig cfg;
  cfg.max_iters = 200;
  const FittedModel m = fit(d, ModelKind::IrtZilm, cfg);
  const HypothesisReport r = ndc_hypothesis_test(d, 4, d.students[4].ndc, cfg, &m);
  CHECK(r.statistic == 0.0);
  CHECK(r.degenerate);
  CHECK(r.n_attempts == 20);
  CHECK_THROWS(ndc_hypothesis_test(d, 999, {}, cfg, &m));
}

TEST_CASE("hypothesis statistic is twice the NLL gap") {
  const Dataset d = small_dataset(300, 60, 8);
  FitConfig cfg;
  cfg.max_iters = 400;
  const FittedModel m = fit(d, ModelKind::IrtZilm, cfg);
  const HypothesisReport r = ndc_hypothesis_test(d, 0, {true, true, true}, cfg, &m);
  CHECK_FALSE(r.degenerate);
  CHECK(r.statistic == doctest::Approx(2.0 * (r.nll_null - r.nll_alt)));
  CHECK(r.nll_null >= 0.0);
  CHECK(r.nll_alt >= 0.0);
  CHECK(to_json(r).contains("statistic"));
}

}
