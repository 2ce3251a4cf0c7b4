#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "fixtures.hpp"
#include "zilm/errors.hpp"
#include "zilm/io.hpp"
#include "zilm/math.hpp"
#include "zilm/simulate.hpp"

using namespace zilm;
using zilm::testing::make_item;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

StudentProfile student(NdcProfile ndc, double ability = 0.0) { return {0, ability, ndc}; }

Item drt_item(Delivery d, Response r, Content c = Content::Letter, double density = 0.35) {
  Item it = make_item(0);
  it.delivery = d;
  it.response = r;
  it.content = c;
  it.density = density;
  return it;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("student abilities and prevalences at n = 100000") {
  SimConfig cfg;
  cfg.n_students = 100000;
  RandomSource rng(1);
  const auto students = sample_students(cfg, rng);
  std::vector<double> ability, count;
  double dys = 0.0;
  for (const auto& s : students) {
    ability.push_back(s.ability);
    count.push_back(ndc_count(s.ndc));
    dys += s.ndc.dyslexia;
  }
  CHECK(std::abs(mean_of(ability)) <= 0.02);
  CHECK(sd_of(ability) >= 0.98);
  CHECK(sd_of(ability) <= 1.02);
  const double rate = dys / 100000.0;
  CHECK(rate >= 0.094);
  CHECK(rate <= 0.106);

  // ability independent of ndc_count
  const double ma = mean_of(ability), mc = mean_of(count);
  double sxy = 0.0;
  for (std::size_t i = 0; i < ability.size(); ++i) sxy += (ability[i] - ma) * (count[i] - mc);
  const double r = sxy / static_cast<double>(ability.size()) / (sd_of(ability) * sd_of(count));
  CHECK(std::abs(r) <= 0.02);
}

TEST_CASE("zero prevalence gives only NT students") {
  SimConfig cfg;
  cfg.n_students = 2000;
  cfg.ndc_prevalence = {0.0, 0.0, 0.0};
  RandomSource rng(2);
  for (const auto& s : sample_students(cfg, rng)) CHECK(ndc_count(s.ndc) == 0);
}

TEST_CASE("item fields respect their ranges") {
  SimConfig cfg;
  cfg.n_items = 100000;
  RandomSource rng(3);
  const auto items = sample_items(cfg, rng);
  double min_b = 9, max_b = -9, min_a = 9, max_a = -9;
  for (const auto& it : items) {
    min_b = std::min(min_b, it.difficulty);
    max_b = std::max(max_b, it.difficulty);
    min_a = std::min(min_a, it.discrimination);
    max_a = std::max(max_a, it.discrimination);
    REQUIRE(it.guessing >= 0.0);
    REQUIRE(it.guessing <= 0.15);
    REQUIRE(it.density >= 0.1);
    REQUIRE(it.density <= 1.0);
    if (it.subject == Subject::English) REQUIRE(it.content == Content::Letter);
  }
  CHECK(min_b >= -2.0);
  CHECK(max_b <= 2.0);
  CHECK(min_a >= 0.5);
  CHECK(max_a <= 4.0);
}

TEST_CASE("all-English pool is all letter content") {
  SimConfig cfg;
  cfg.n_items = 5000;
  cfg.subject_probs = {0.0, 1.0};
  RandomSource rng(4);
  for (const auto& it : sample_items(cfg, rng)) CHECK(it.content == Content::Letter);
}

TEST_CASE("zero density sd pins density at the mean") {
  SimConfig cfg;
  cfg.n_items = 500;
  cfg.density_sd = 0.0;
  RandomSource rng(5);
  for (const auto& it : sample_items(cfg, rng)) CHECK(it.density == 0.35);
}

TEST_CASE("true pi examples") {
  const LqfWeights w;
  const double base = sigmoid(w.intercept);
  CHECK(base == doctest::Approx(0.02).epsilon(1e-12));

  for (Delivery d : kDeliveries) {
    for (Response r : kResponses) {
      CHECK(true_lqf_pi(student({}), drt_item(d, r, Content::Both, 0.9), w) == base);
    }
  }
  CHECK(true_lqf_pi(student({true, false, false}),
                    drt_item(Delivery::Listen, Response::Speak, Content::Letter), w) == base);
  const StudentProfile spd = student({false, false, true});
  CHECK(true_lqf_pi(spd, drt_item(Delivery::Both, Response::Written), w) >
        true_lqf_pi(spd, drt_item(Delivery::Read, Response::Written), w));
}

TEST_CASE("true pi matches the severity formula") {
  LqfWeights w;
  w.intercept = -2.0;
  w.w_dyslexia = 1.5;
  w.w_dyslexia_text = 0.5;
  w.w_dyscalculia = 2.0;
  w.w_spd = 0.7;
  w.w_spd_speak = 0.3;
  const StudentProfile all = student({true, true, true});
  const Item it = drt_item(Delivery::Both, Response::ClickRead, Content::Both, 0.4);
  // letters, digits, reads, text response, Both delivery, no Speak
  const double severity = 0.4 * (1.5 + 0.5) / 2 + 2.0 * 0.4 * 2 / 2 + 0.7;
  CHECK(true_lqf_pi(all, it, w) == doctest::Approx(1.0 / (1.0 + std::exp(2.0 - severity))));
}

TEST_CASE("pi is non-decreasing in every weight") {
  const StudentProfile all = student({true, true, true});
  double LqfWeights::*fields[] = {&LqfWeights::intercept,     &LqfWeights::w_dyslexia,
                                  &LqfWeights::w_dyslexia_text, &LqfWeights::w_dyscalculia,
                                  &LqfWeights::w_spd,           &LqfWeights::w_spd_speak};
  for (Delivery d : kDeliveries) {
    for (Response r : kResponses) {
      for (Content c : kContents) {
        const Item it = drt_item(d, r, c, 0.5);
        for (auto field : fields) {
          LqfWeights w;
          w.intercept = -6.0;
          const double before = true_lqf_pi(all, it, w);
          w.*field += 0.5;
          CHECK(true_lqf_pi(all, it, w) >= before);
        }
      }
    }
  }
}

TEST_CASE("3PL probability") {
  Item it = make_item(0, 0.0, 2.0, 0.1);
  CHECK(irt3pl_prob(1.0, it) == doctest::Approx(0.1 + 0.9 / (1.0 + std::exp(-2.0))));
  CHECK(irt3pl_prob(1.0, it) == doctest::Approx(0.89272).epsilon(1e-5));
  CHECK(irt3pl_prob(0.0, it) == doctest::Approx(0.1 + 0.9 / 2));
  CHECK(irt3pl_prob(60.0, it) == doctest::Approx(1.0));
  CHECK(irt3pl_prob(60.0, it) < 1.0);
  CHECK(irt3pl_prob(-60.0, it) == doctest::Approx(0.1));
}

TEST_CASE("attempts: distinct items, split sizes, recorded truth") {
  SimConfig cfg;
  cfg.n_students = 300;
  cfg.n_items = 50;
  const Dataset d = generate_dataset(cfg);
  CHECK(d.attempts.size() == 300u * 20u);
  CHECK(validate_dataset(d, 20).empty());
  std::map<std::int64_t, int> tests;
  for (const auto& a : d.attempts) {
    REQUIRE(a.true_pi.has_value());
    REQUIRE(a.true_p.has_value());
    CHECK(*a.true_pi == true_lqf_pi(d.students[a.student_id], d.items[a.item_id], cfg.lqf));
    CHECK(*a.true_p == irt3pl_prob(d.students[a.student_id].ability, d.items[a.item_id]));
    if (a.split == Split::Test) ++tests[a.student_id];
  }
  for (const auto& s : d.students) CHECK(tests[s.id] == 4);
}

TEST_CASE("a single student over twenty items has twenty attempts") {
  SimConfig cfg;
  cfg.n_students = 1;
  cfg.n_items = 20;
  CHECK(generate_dataset(cfg).attempts.size() == 20);
}

TEST_CASE("more attempts than items is a configuration error") {
  SimConfig cfg;
  cfg.n_items = 10;
  CHECK_THROWS_AS(generate_dataset(cfg), ConfigError);
}

TEST_CASE("extreme intercepts give no or only NotAnswered outcomes") {
  SimConfig cfg;
  cfg.n_students = 200;
  cfg.n_items = 40;
  RandomSource root(9);
  RandomSource srng = root.substream(1), irng = root.substream(2);
  const auto students = sample_students(cfg, srng);
  const auto items = sample_items(cfg, irng);

  cfg.lqf = LqfWeights{-800.0, -800.0, -800.0, -800.0, -800.0, -800.0};
  for (const auto& a : generate_attempts(students, items, cfg, root.substream(3))) {
    CHECK(a.outcome != Outcome::NotAnswered);
  }
  cfg.lqf = LqfWeights{800.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& a : generate_attempts(students, items, cfg, root.substream(3))) {
    CHECK(a.outcome == Outcome::NotAnswered);
  }
}

TEST_CASE("empirical success converges to (1 - pi) p") {
  // 1e5 replicates of one (student, item) cell.
  SimConfig cfg;
  cfg.n_items = 1;
  cfg.n_attempts_per_student = 1;
  const std::vector<Item> items = {drt_item(Delivery::Read, Response::Written, Content::Letter, 0.3)};
  std::vector<StudentProfile> students(100000);
  for (std::size_t i = 0; i < students.size(); ++i) {
    students[i] = {static_cast<std::int64_t>(i), 0.4, {true, false, false}};
  }
  std::vector<Item> pool = items;
  pool[0].difficulty = -0.2;
  pool[0].discrimination = 1.7;
  pool[0].guessing = 0.08;
  const auto attempts = generate_attempts(students, pool, cfg, RandomSource(17));
  double correct = 0.0;
  for (const auto& a : attempts) correct += a.outcome == Outcome::Correct;
  const double pi = true_lqf_pi(students[0], pool[0], cfg.lqf);
  const double p = irt3pl_prob(0.4, pool[0]);
  CHECK(std::abs(correct / 1e5 - (1.0 - pi) * p) < 0.01);
}

TEST_CASE("datasets are deterministic in the config") {
  SimConfig cfg;
  cfg.n_students = 200;
  cfg.n_items = 60;
  cfg.seed = 5;
  const Dataset a = generate_dataset(cfg);
  const Dataset b = generate_dataset(cfg);
  CHECK(a == b);
  CHECK(attempts_csv(a) == attempts_csv(b));
  cfg.seed = 6;
  CHECK(generate_dataset(cfg).attempts != a.attempts);
}

TEST_CASE("default config NotAnswered rates by group") {
  SimConfig cfg;
  const Dataset d = generate_dataset(cfg);
  std::map<int, std::pair<double, double>> na;  // ndc_count -> (not answered, total)
  for (const auto& a : d.attempts) {
    auto& cell = na[ndc_count(d.students[a.student_id].ndc)];
    cell.first += a.outcome == Outcome::NotAnswered;
    cell.second += 1.0;
  }
  CHECK(na[0].first / na[0].second < 0.05);
  CHECK(na[2].first / na[2].second > 0.15);
}

TEST_CASE("an override changes the shown DRT but not the random numbers") {
  SimConfig cfg;
  cfg.n_students = 100;
  cfg.n_items = 40;
  cfg.ndc_prevalence = {0.0, 0.0, 0.0};
  const Dataset base = generate_dataset(cfg);
  const Dataset forced = generate_dataset(
      cfg, [](const StudentProfile&, const Item& it) { return DrtChoice{Delivery::Both, it.response}; });
  REQUIRE(base.attempts.size() == forced.attempts.size());
  // NT students: pi is the same everywhere, so outcomes must coincide exactly.
  for (std::size_t k = 0; k < base.attempts.size(); ++k) {
    CHECK(base.attempts[k].outcome == forced.attempts[k].outcome);
  }
}

TEST_CASE("config validation") {
  SimConfig cfg;
  CHECK(validate_config(cfg).empty());
  cfg.delivery_probs = {0.5, 0.5, 0.5};
  cfg.n_students = 0;
  cfg.lqf.intercept = 0.0;
  CHECK(validate_config(cfg).size() >= 3);
  CHECK_THROWS_AS(require_valid(cfg), ConfigError);
}

}
