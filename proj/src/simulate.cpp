#include "zilm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "zilm/errors.hpp"
#include "zilm/io.hpp"
#include "zilm/math.hpp"

namespace zilm {

namespace {

enum StreamKey : std::uint64_t { kStudents = 1, kItems = 2, kAttempts = 3 };

template <std::size_t N>
std::size_t categorical(RandomSource& rng, const std::array<double, N>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding slack: fall back to the last category with non-zero mass.
  for (std::size_t i = N; i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return N - 1;
}

template <std::size_t N>
void check_row(std::vector<std::string>& out, const char* name, const std::array<double, N>& p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      out.push_back(std::string(name) + ": entries must be probabilities in [0,1]");
      return;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os.precision(17);
    os << name << ": probabilities sum to " << sum << ", expected 1";
    out.push_back(os.str());
  }
}

bool has_letters(Content c) { return c != Content::Digit; }
bool has_digits(Content c) { return c != Content::Letter; }
bool reads(Delivery d) { return d != Delivery::Listen; }
bool text_response(Response r) { return r == Response::Written || r == Response::ClickRead; }

}  // namespace

std::vector<std::string> validate_config(const SimConfig& cfg) {
  std::vector<std::string> out;
  auto need = [&out](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };
  need(cfg.n_students >= 1, "n_students must be >= 1");
  need(cfg.n_items >= 1, "n_items must be >= 1");
  need(cfg.n_attempts_per_student >= 1, "n_attempts_per_student must be >= 1");
  need(cfg.n_attempts_per_student <= cfg.n_items,
       "n_attempts_per_student must not exceed n_items (items are drawn without replacement)");
  need(cfg.ability_sd >= 0.0, "ability.sd must be >= 0");
  for (double p : cfg.ndc_prevalence) need(p >= 0.0 && p <= 1.0, "ndc_prevalence entries must lie in [0,1]");
  need(cfg.difficulty.low <= cfg.difficulty.high, "difficulty: low must not exceed high");
  need(cfg.discrimination.low <= cfg.discrimination.high, "discrimination: low must not exceed high");
  need(cfg.guessing.low <= cfg.guessing.high, "guessing: low must not exceed high");
  need(cfg.guessing.low >= 0.0 && cfg.guessing.high < 1.0, "guessing range must lie in [0,1)");
  need(cfg.density_sd >= 0.0, "density.sd must be >= 0");
  need(cfg.density_clip.low <= cfg.density_clip.high, "density clip: low must not exceed high");
  check_row(out, "subject_probs", cfg.subject_probs);
  check_row(out, "content_probs.maths", cfg.content_probs_maths);
  check_row(out, "content_probs.english", cfg.content_probs_english);
  need(cfg.content_probs_english[0] == 1.0,
       "content_probs.english must be (1, 0, 0): English items are letter-only");
  check_row(out, "delivery_probs", cfg.delivery_probs);
  check_row(out, "response_probs", cfg.response_probs);
  need(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0, "test_fraction must lie in [0,1)");
  need(sigmoid(cfg.lqf.intercept) < 0.1,
       "lqf.intercept must satisfy sigmoid(intercept) < 0.1 (neurotypical inflation stays small)");
  return out;
}

void require_valid(const SimConfig& cfg) {
  const auto problems = validate_config(cfg);
  if (problems.empty()) return;
  std::string msg = "invalid simulation config:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

RandomSource root_stream(const SimConfig& cfg) { return RandomSource(cfg.seed); }

std::vector<StudentProfile> sample_students(const SimConfig& cfg, RandomSource& rng) {
  std::vector<StudentProfile> out(static_cast<std::size_t>(cfg.n_students));
  for (std::size_t i = 0; i < out.size(); ++i) {
    StudentProfile& s = out[i];
    s.id = static_cast<std::int64_t>(i);
    s.ability = rng.normal(cfg.ability_mean, cfg.ability_sd);
    s.ndc.dyslexia = rng.bernoulli(cfg.ndc_prevalence[0]);
    s.ndc.dyscalculia = rng.bernoulli(cfg.ndc_prevalence[1]);
    s.ndc.spd = rng.bernoulli(cfg.ndc_prevalence[2]);
  }
  return out;
}

std::vector<Item> sample_items(const SimConfig& cfg, RandomSource& rng) {
  std::vector<Item> out(static_cast<std::size_t>(cfg.n_items));
  for (std::size_t i = 0; i < out.size(); ++i) {
    Item& it = out[i];
    it.id = static_cast<std::int64_t>(i);
    it.difficulty = rng.uniform(cfg.difficulty.low, cfg.difficulty.high);
    it.discrimination = rng.uniform(cfg.discrimination.low, cfg.discrimination.high);
    it.guessing = rng.uniform(cfg.guessing.low, cfg.guessing.high);
    it.subject = kSubjects[categorical(rng, cfg.subject_probs)];
    it.content = kContents[categorical(
        rng, it.subject == Subject::Maths ? cfg.content_probs_maths : cfg.content_probs_english)];
    it.density = std::clamp(rng.normal(cfg.density_mean, cfg.density_sd), cfg.density_clip.low,
                            cfg.density_clip.high);
    it.delivery = kDeliveries[categorical(rng, cfg.delivery_probs)];
    it.response = kResponses[categorical(rng, cfg.response_probs)];
  }
  return out;
}

double true_lqf_pi(const StudentProfile& s, const Item& it, const LqfWeights& w) {
  const double letters = has_letters(it.content) ? 1.0 : 0.0;
  const double digits = has_digits(it.content) ? 1.0 : 0.0;
  const double read = reads(it.delivery) ? 1.0 : 0.0;
  const double text = text_response(it.response) ? 1.0 : 0.0;

  double severity = 0.0;
  if (s.ndc.dyslexia) {
    severity += it.density * letters * (w.w_dyslexia * read + w.w_dyslexia_text * text) / 2.0;
  }
  if (s.ndc.dyscalculia) {
    severity += w.w_dyscalculia * it.density * digits * (1.0 + text) / 2.0;
  }
  if (s.ndc.spd) {
    if (it.delivery == Delivery::Both) severity += w.w_spd;
    if (it.response == Response::Speak) severity += w.w_spd_speak;
  }
  const double pi = sigmoid(w.intercept + severity);
  return std::clamp(pi, 0x1.0p-1074, kOneMinus);
}

double irt3pl_prob(double ability, const Item& it) {
  const double f = sigmoid(it.discrimination * (ability - it.difficulty));
  return std::min(it.guessing + (1.0 - it.guessing) * f, kOneMinus);
}

std::vector<Attempt> generate_attempts(const std::vector<StudentProfile>& students,
                                       const std::vector<Item>& items, const SimConfig& cfg,
                                       const RandomSource& rng, const DrtOverride& override) {
  const auto n_attempts = static_cast<std::size_t>(cfg.n_attempts_per_student);
  if (cfg.n_attempts_per_student < 1 || n_attempts > items.size()) {
    throw ConfigError("n_attempts_per_student (" + std::to_string(cfg.n_attempts_per_student) +
                      ") must be in [1, n_items=" + std::to_string(items.size()) + "]");
  }
  const std::size_t n_test =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(n_attempts))));

  std::vector<Attempt> out;
  out.reserve(students.size() * n_attempts);
  std::vector<std::size_t> pool(items.size());
  std::vector<std::size_t> positions(n_attempts);

  for (const StudentProfile& s : students) {
    RandomSource sub = rng.substream(static_cast<std::uint64_t>(s.id));

    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < n_attempts; ++k) {
      const std::size_t j = k + sub.index(pool.size() - k);
      std::swap(pool[k], pool[j]);
    }

    const std::size_t first = out.size();
    for (std::size_t k = 0; k < n_attempts; ++k) {
      const Item& base = items[pool[k]];
      const double u_inflate = sub.uniform();
      const double u_success = sub.uniform();

      Item shown = base;
      if (override) {
        const DrtChoice c = override(s, base);
        shown.delivery = c.delivery;
        shown.response = c.response;
      }
      Attempt a;
      a.student_id = s.id;
      a.item_id = base.id;
      a.true_pi = true_lqf_pi(s, shown, cfg.lqf);
      a.true_p = irt3pl_prob(s.ability, shown);
      if (u_inflate < *a.true_pi) {
        a.outcome = Outcome::NotAnswered;
      } else {
        a.outcome = u_success < *a.true_p ? Outcome::Correct : Outcome::Incorrect;
      }
      a.split = Split::Train;
      out.push_back(a);
    }

    std::iota(positions.begin(), positions.end(), std::size_t{0});
    for (std::size_t k = 0; k < std::min(n_test, n_attempts); ++k) {
      const std::size_t j = k + sub.index(n_attempts - k);
      std::swap(positions[k], positions[j]);
      out[first + positions[k]].split = Split::Test;
    }
  }
  return out;
}

Dataset generate_dataset(const SimConfig& cfg, const DrtOverride& override) {
  require_valid(cfg);
  const RandomSource root = root_stream(cfg);
  RandomSource student_rng = root.substream(kStudents);
  RandomSource item_rng = root.substream(kItems);

  Dataset d;
  d.students = sample_students(cfg, student_rng);
  d.items = sample_items(cfg, item_rng);
  d.attempts = generate_attempts(d.students, d.items, cfg, root.substream(kAttempts), override);
  d.sim_config_digest = config_digest(cfg);
  return d;
}

}  // namespace zilm
