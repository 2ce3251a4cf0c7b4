#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zilm/domain.hpp"
#include "zilm/fit.hpp"
#include "zilm/simulate.hpp"

namespace zilm {

// --- classification metrics -----------------------------------------------------

struct MetricsReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  double nll = 0.0;    // mean, unpenalized
  double brier = 0.0;
  std::size_t n_attempts = 0;
  Split split = Split::Test;
};

/// Metrics from raw predictions. Predictions of exactly 0.5 count as class 1;
/// F1 is 0 when the positive class is never predicted nor present.
/// Throws DataError on empty or mismatched input.
MetricsReport classification_metrics(std::span<const double> predicted,
                                     std::span<const int> labels, Split split);
MetricsReport classification_metrics(const FittedModel& model, const Dataset& d, Split split);

// --- correlation and recovery ----------------------------------------------------

enum class CorrelationKind { Pearson, Spearman };

/// Throws std::invalid_argument for length mismatch, fewer than 3 points, or a
/// constant input.
double correlation(std::span<const double> xs, std::span<const double> ys, CorrelationKind kind);
/// 1-based ranks with ties averaged.
std::vector<double> average_ranks(std::span<const double> xs);

struct CorrelationPair {
  double pearson = 0.0;
  double spearman = 0.0;
};

struct RecoveryReport {
  ModelKind kind = ModelKind::IrtZilm;
  CorrelationPair ability;
  CorrelationPair difficulty;
  std::optional<CorrelationPair> discrimination;  // absent for the KTM baseline
  // true ability ~ intercept + slope * estimate, least squares over all students
  double align_intercept = 0.0;
  double align_slope = 1.0;
  std::map<int, double> ability_bias;  // ndc_count -> mean(aligned estimate - truth)
  std::map<int, std::size_t> group_size;
  double nd_bias = 0.0;                // students with at least one NDC
};

/// Recovery from explicit estimates; `ndc_counts` groups the aligned residuals.
RecoveryReport recovery_from_estimates(std::span<const double> true_ability,
                                       std::span<const double> est_ability,
                                       std::span<const int> ndc_counts);
/// KTM: ability = user weight, difficulty = -item weight; no discrimination.
RecoveryReport recovery_report(const FittedModel& model, const Dataset& d);

// --- forced delivery ---------------------------------------------------------------

struct DeliveryCell {
  double correct_rate = 0.0;
  double answered_rate = 0.0;  // 1 - NotAnswered rate
  std::size_t n_attempts = 0;
};

/// Groups: "all", "nt", "nd", and "dyslexia", "dyscalculia", "spd" counting
/// only students with exactly that one condition.
struct DeliveryReport {
  std::map<std::string, std::array<DeliveryCell, 3>> groups;  // indexed by Delivery

  [[nodiscard]] const DeliveryCell& cell(const std::string& group, Delivery d) const {
    return groups.at(group)[static_cast<std::size_t>(d)];
  }
  /// max - min of the correct rate across the three deliveries.
  [[nodiscard]] double correct_spread(const std::string& group) const;
};

/// Re-simulates the population with every item shown in one delivery type.
/// Students, items, responses and random numbers are shared across the runs.
DeliveryReport forced_delivery_experiment(const SimConfig& cfg);

// --- contrast analysis --------------------------------------------------------------

enum class ContrastPartition { Subject, ReadVsListen, BothVsRead, RandomHalf };

std::string_view to_token(ContrastPartition p);
/// "subject", "read_vs_listen", "both_vs_read", "random_half". Throws ConfigError.
ContrastPartition parse_partition(std::string_view s);

/// Side of an attempt: 0 = A, 1 = B, nullopt = neither. Side A is Maths, Read
/// and Both respectively.
std::optional<int> contrast_side(ContrastPartition p, const Attempt& a, const Item& it);

inline constexpr std::size_t kOutcomeCount = 3;  // in kOutcomes order

struct StudentContrast {
  std::int64_t student_id = 0;
  std::string ndc;
  std::array<double, kOutcomeCount> rate_a{};
  std::array<double, kOutcomeCount> rate_b{};
  std::array<double, kOutcomeCount> diff{};  // rate_a - rate_b
};

struct GroupContrast {
  std::size_t n_students = 0;
  std::array<double, kOutcomeCount> mean_diff{};
  std::array<double, kOutcomeCount> std_error{};
};

struct ContrastReport {
  ContrastPartition partition = ContrastPartition::Subject;
  std::vector<StudentContrast> students;
  std::map<std::string, GroupContrast> groups;  // keyed by ndc_label
  std::size_t excluded_students = 0;            // no attempts on one side
};

ContrastReport contrast_analysis(const Dataset& d, ContrastPartition p);

// --- DRT selection policies --------------------------------------------------------

enum class PolicyKind { Random, OracleActive, OracleAdversarial, ModelActive };

std::string_view to_token(PolicyKind p);
/// "random", "oracle-active", "oracle-adversarial", "model-active"
/// (underscores accepted). Throws ConfigError.
PolicyKind parse_policy(std::string_view s);

struct PolicyGroup {
  double baseline_rate = 0.0;
  double policy_rate = 0.0;
  double ratio = 0.0;  // policy / baseline: lift for active, drop for adversarial
  std::size_t n_attempts = 0;
};

struct PolicyReport {
  PolicyKind policy = PolicyKind::Random;
  std::map<int, PolicyGroup> groups;  // ndc_count 0..3
  PolicyGroup nd;                     // all students with at least one NDC
};

/// Oracle policies pick the delivery/response with the smallest (largest) true
/// pi; ModelActive uses the fitted pi of `model`, which must be IRT-ZILM.
/// Ties go to the first choice in (delivery, response) declaration order.
/// Baseline and policy runs share students, items and random numbers.
PolicyReport policy_experiment(const SimConfig& cfg, PolicyKind policy,
                               const FittedModel* model = nullptr);

// --- likelihood-ratio NDC probe ----------------------------------------------------

struct HypothesisReport {
  std::int64_t student_id = 0;
  NdcProfile null_ndc;
  NdcProfile alt_ndc;
  double nll_null = 0.0;
  double nll_alt = 0.0;
  double theta_null = 0.0;
  double theta_alt = 0.0;
  double statistic = 0.0;  // 2 * (nll_null - nll_alt); positive favours the alternative
  std::size_t n_attempts = 0;
  bool degenerate = false;  // alternative equals the reported flags
};

/// Statistic values at or below this count as "no evidence" for the alternative.
inline constexpr double kHypothesisThreshold = 2.0;

/// Compares the student's reported NDC flags against `alternative` under a
/// fitted IRT-ZILM. Item parameters and pi weights come from `null_model`
/// (fitted with the reported flags when not supplied); the student's ability
/// is re-estimated under each hypothesis over all of their attempts.
HypothesisReport ndc_hypothesis_test(const Dataset& d, std::int64_t student_id,
                                     const NdcProfile& alternative, const FitConfig& cfg,
                                     const FittedModel* null_model = nullptr);

// --- serialization -------------------------------------------------------------------

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const RecoveryReport& r);
nlohmann::json to_json(const DeliveryReport& r);
nlohmann::json to_json(const ContrastReport& r);
nlohmann::json to_json(const PolicyReport& r);
nlohmann::json to_json(const HypothesisReport& r);

std::string to_csv(const MetricsReport& r, std::string_view model_label);
std::string to_csv(const RecoveryReport& r);
/// One row per (group, metric) with read/listen/both columns.
std::string to_csv(const DeliveryReport& r);
/// One row per (group, outcome) bar.
std::string to_csv(const ContrastReport& r);
std::string to_csv(const PolicyReport& r);
std::string to_csv(const HypothesisReport& r);

}  // namespace zilm
