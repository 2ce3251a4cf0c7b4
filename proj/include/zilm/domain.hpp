#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zilm {

enum class Subject : std::uint8_t { Maths, English };
enum class Content : std::uint8_t { Letter, Digit, Both };
enum class Delivery : std::uint8_t { Read, Listen, Both };
enum class Response : std::uint8_t { Written, Speak, ClickPicture, ClickRead };
enum class Outcome : std::uint8_t { Correct, Incorrect, NotAnswered };
enum class Split : std::uint8_t { Train, Test };

inline constexpr std::array kSubjects{Subject::Maths, Subject::English};
inline constexpr std::array kContents{Content::Letter, Content::Digit, Content::Both};
inline constexpr std::array kDeliveries{Delivery::Read, Delivery::Listen, Delivery::Both};
inline constexpr std::array kResponses{Response::Written, Response::Speak, Response::ClickPicture,
                                       Response::ClickRead};
inline constexpr std::array kOutcomes{Outcome::Correct, Outcome::Incorrect, Outcome::NotAnswered};

// Lowercase snake-case tokens used in every file format.
std::string_view to_token(Subject v);
std::string_view to_token(Content v);
std::string_view to_token(Delivery v);
std::string_view to_token(Response v);
std::string_view to_token(Outcome v);
std::string_view to_token(Split v);

// Parsers throw DataError on unknown tokens.
Subject parse_subject(std::string_view s);
Content parse_content(std::string_view s);
Delivery parse_delivery(std::string_view s);
Response parse_response(std::string_view s);
Outcome parse_outcome(std::string_view s);
Split parse_split(std::string_view s);

struct NdcProfile {
  bool dyslexia = false;
  bool dyscalculia = false;
  bool spd = false;

  friend bool operator==(const NdcProfile&, const NdcProfile&) = default;
};

int ndc_count(const NdcProfile& p);

/// Dense code in [0, 8): bit 0 dyslexia, bit 1 dyscalculia, bit 2 SPD.
int ndc_code(const NdcProfile& p);
NdcProfile ndc_from_code(int code);

/// "nt", "dyslexia", "dyslexia+spd", ... in flag order.
std::string ndc_label(const NdcProfile& p);
/// Inverse of ndc_label; also accepts "none". Throws ConfigError.
NdcProfile parse_ndc_label(std::string_view s);

struct StudentProfile {
  std::int64_t id = 0;
  double ability = 0.0;
  NdcProfile ndc;

  friend bool operator==(const StudentProfile&, const StudentProfile&) = default;
};

struct Item {
  std::int64_t id = 0;
  double difficulty = 0.0;
  double discrimination = 1.0;
  double guessing = 0.0;
  Subject subject = Subject::Maths;
  Content content = Content::Letter;
  double density = 0.35;
  Delivery delivery = Delivery::Read;
  Response response = Response::Written;

  friend bool operator==(const Item&, const Item&) = default;
};

struct Attempt {
  std::int64_t student_id = 0;
  std::int64_t item_id = 0;
  Outcome outcome = Outcome::Incorrect;
  std::optional<double> true_pi;
  std::optional<double> true_p;
  Split split = Split::Train;

  /// Binary fitting label: NotAnswered and Incorrect both collapse to 0.
  [[nodiscard]] int label() const { return outcome == Outcome::Correct ? 1 : 0; }

  friend bool operator==(const Attempt&, const Attempt&) = default;
};

struct Dataset {
  std::vector<StudentProfile> students;
  std::vector<Item> items;
  std::vector<Attempt> attempts;
  std::string sim_config_digest;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Every violated invariant, one human-readable line each. Empty when valid.
/// Each student is expected to carry the same number of attempts; pass
/// `expected_attempts` to pin that number (0 infers it from the first student).
std::vector<std::string> validate_dataset(const Dataset& d, std::size_t expected_attempts = 0);

}  // namespace zilm
