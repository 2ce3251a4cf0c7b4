#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zilm/domain.hpp"
#include "zilm/random.hpp"

namespace zilm {

/// Weights of the ground-truth zero-inflation probability
///   pi = sigmoid(intercept + severity(student, item)).
///
/// With L = content has letters, D = content has digits, read = delivery is
/// Read or Both, text = response is Written or ClickRead:
///   dyslexia    density * L * (w_dyslexia * read + w_dyslexia_text * text) / 2
///   dyscalculia w_dyscalculia * density * D * (1 + text) / 2
///   SPD         w_spd * [delivery == Both] + w_spd_speak * [response == Speak]
///
/// Defaults are calibrated so that forced-delivery, contrast and DRT-selection
/// experiments land in their target bands.
struct LqfWeights {
  double intercept = -3.8918202981106265;  // logit(0.02)
  double w_dyslexia = 14.0;
  double w_dyslexia_text = 40.0;
  double w_dyscalculia = 25.0;
  double w_spd = 3.25;
  double w_spd_speak = 4.0;

  friend bool operator==(const LqfWeights&, const LqfWeights&) = default;
};

struct UniformRange {
  double low = 0.0;
  double high = 1.0;
  friend bool operator==(const UniformRange&, const UniformRange&) = default;
};

struct SimConfig {
  std::int64_t n_students = 5000;
  std::int64_t n_items = 400;
  std::int64_t n_attempts_per_student = 20;
  std::uint64_t seed = 0;

  double ability_mean = 0.0;
  double ability_sd = 1.0;
  // dyslexia, dyscalculia, spd
  std::array<double, 3> ndc_prevalence{0.1, 0.06, 0.11};

  UniformRange difficulty{-2.0, 2.0};
  UniformRange discrimination{0.5, 4.0};
  UniformRange guessing{0.0, 0.15};

  // Maths, English
  std::array<double, 2> subject_probs{0.5, 0.5};
  // Letter, Digit, Both.
  std::array<double, 3> content_probs_maths{0.1, 0.3, 0.6};
  std::array<double, 3> content_probs_english{1.0, 0.0, 0.0};

  double density_mean = 0.35;
  double density_sd = 0.15;
  UniformRange density_clip{0.1, 1.0};

  std::array<double, 3> delivery_probs{0.3, 0.3, 0.4};
  std::array<double, 4> response_probs{0.4, 0.2, 0.2, 0.2};

  double test_fraction = 0.2;
  LqfWeights lqf;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Human-readable violations of the config invariants; empty when valid.
std::vector<std::string> validate_config(const SimConfig& cfg);
/// Throws ConfigError listing every violation.
void require_valid(const SimConfig& cfg);

/// Counterfactual presentation of an item to one student.
struct DrtChoice {
  Delivery delivery;
  Response response;
};

/// Picks the delivery/response actually shown for a (student, item) pair.
/// Used by the forced-delivery and DRT-selection experiments.
using DrtOverride = std::function<DrtChoice(const StudentProfile&, const Item&)>;

std::vector<StudentProfile> sample_students(const SimConfig& cfg, RandomSource& rng);
std::vector<Item> sample_items(const SimConfig& cfg, RandomSource& rng);

double true_lqf_pi(const StudentProfile& s, const Item& it, const LqfWeights& w);
double irt3pl_prob(double ability, const Item& it);

/// Attempts are generated student by student, each from its own sub-stream
/// of `rng` keyed by student id. Every attempt consumes the same draws
/// regardless of outcome, so runs that differ only in `override` share their
/// random numbers attempt for attempt.
std::vector<Attempt> generate_attempts(const std::vector<StudentProfile>& students,
                                       const std::vector<Item>& items, const SimConfig& cfg,
                                       const RandomSource& rng,
                                       const DrtOverride& override = nullptr);

Dataset generate_dataset(const SimConfig& cfg, const DrtOverride& override = nullptr);

/// Root stream of the generator. Students, items and attempts draw from
/// fixed sub-streams of it.
RandomSource root_stream(const SimConfig& cfg);

}  // namespace zilm
