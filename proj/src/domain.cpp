#include "zilm/domain.hpp"

#include <set>
#include <sstream>
#include <utility>

#include "zilm/errors.hpp"

namespace zilm {

namespace {

template <typename Enum, std::size_t N>
Enum parse_token(std::string_view s, const std::array<Enum, N>& values, std::string_view what) {
  for (Enum v : values) {
    if (to_token(v) == s) return v;
  }
  throw DataError("unknown " + std::string(what) + " token '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_token(Subject v) {
  switch (v) {
    case Subject::Maths: return "maths";
    case Subject::English: return "english";
  }
  return "maths";
}

std::string_view to_token(Content v) {
  switch (v) {
    case Content::Letter: return "letter";
    case Content::Digit: return "digit";
    case Content::Both: return "both";
  }
  return "letter";
}

std::string_view to_token(Delivery v) {
  switch (v) {
    case Delivery::Read: return "read";
    case Delivery::Listen: return "listen";
    case Delivery::Both: return "both";
  }
  return "read";
}

std::string_view to_token(Response v) {
  switch (v) {
    case Response::Written: return "written";
    case Response::Speak: return "speak";
    case Response::ClickPicture: return "click_picture";
    case Response::ClickRead: return "click_read";
  }
  return "written";
}

std::string_view to_token(Outcome v) {
  switch (v) {
    case Outcome::Correct: return "correct";
    case Outcome::Incorrect: return "incorrect";
    case Outcome::NotAnswered: return "not_answered";
  }
  return "incorrect";
}

std::string_view to_token(Split v) { return v == Split::Train ? "train" : "test"; }

Subject parse_subject(std::string_view s) { return parse_token(s, kSubjects, "subject"); }
Content parse_content(std::string_view s) { return parse_token(s, kContents, "content"); }
Delivery parse_delivery(std::string_view s) { return parse_token(s, kDeliveries, "delivery"); }
Response parse_response(std::string_view s) { return parse_token(s, kResponses, "response"); }
Outcome parse_outcome(std::string_view s) { return parse_token(s, kOutcomes, "outcome"); }
Split parse_split(std::string_view s) {
  return parse_token(s, std::array{Split::Train, Split::Test}, "split");
}

int ndc_count(const NdcProfile& p) {
  return static_cast<int>(p.dyslexia) + static_cast<int>(p.dyscalculia) + static_cast<int>(p.spd);
}

int ndc_code(const NdcProfile& p) {
  return static_cast<int>(p.dyslexia) | (static_cast<int>(p.dyscalculia) << 1) |
         (static_cast<int>(p.spd) << 2);
}

NdcProfile ndc_from_code(int code) {
  return NdcProfile{(code & 1) != 0, (code & 2) != 0, (code & 4) != 0};
}

std::string ndc_label(const NdcProfile& p) {
  std::string out;
  auto add = [&out](std::string_view name) {
    if (!out.empty()) out += '+';
    out += name;
  };
  if (p.dyslexia) add("dyslexia");
  if (p.dyscalculia) add("dyscalculia");
  if (p.spd) add("spd");
  return out.empty() ? "nt" : out;
}

NdcProfile parse_ndc_label(std::string_view s) {
  NdcProfile p;
  if (s == "nt" || s == "none") return p;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find_first_of("+,", start), s.size());
    const std::string_view part = s.substr(start, end - start);
    if (part == "dyslexia") {
      p.dyslexia = true;
    } else if (part == "dyscalculia") {
      p.dyscalculia = true;
    } else if (part == "spd") {
      p.spd = true;
    } else {
      throw ConfigError("unknown NDC '" + std::string(part) +
                        "' (expected dyslexia, dyscalculia, spd, nt)");
    }
    start = end + 1;
  }
  return p;
}

std::vector<std::string> validate_dataset(const Dataset& d, std::size_t expected_attempts) {
  std::vector<std::string> out;
  auto report = [&out](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    out.push_back(os.str());
  };

  for (std::size_t i = 0; i < d.students.size(); ++i) {
    if (d.students[i].id != static_cast<std::int64_t>(i)) {
      report("student at row ", i, " has id ", d.students[i].id, ": ids must be dense 0..n-1");
    }
  }
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    const Item& it = d.items[i];
    if (it.id != static_cast<std::int64_t>(i)) {
      report("item at row ", i, " has id ", it.id, ": ids must be dense 0..n-1");
    }
    if (!(it.difficulty >= -2.0 && it.difficulty <= 2.0)) {
      report("item ", it.id, ": difficulty ", it.difficulty, " violates difficulty ∈ [−2,2]");
    }
    if (!(it.discrimination >= 0.5 && it.discrimination <= 4.0)) {
      report("item ", it.id, ": discrimination ", it.discrimination,
             " violates discrimination ∈ [0.5,4]");
    }
    if (!(it.guessing >= 0.0 && it.guessing <= 0.15)) {
      report("item ", it.id, ": guessing ", it.guessing, " violates guessing ∈ [0,0.15]");
    }
    if (!(it.density >= 0.1 && it.density <= 1.0)) {
      report("item ", it.id, ": density ", it.density, " violates density ∈ [0.1,1]");
    }
    if (it.subject == Subject::English && it.content != Content::Letter) {
      report("item ", it.id, ": English item has content '", to_token(it.content),
             "' but English content must be letter (English content distribution is letter 1, digit 0, both 0)");
    }
  }

  const auto n_students = static_cast<std::int64_t>(d.students.size());
  const auto n_items = static_cast<std::int64_t>(d.items.size());
  std::vector<std::size_t> per_student(d.students.size(), 0);
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (std::size_t k = 0; k < d.attempts.size(); ++k) {
    const Attempt& a = d.attempts[k];
    const bool student_ok = a.student_id >= 0 && a.student_id < n_students;
    const bool item_ok = a.item_id >= 0 && a.item_id < n_items;
    if (!student_ok) report("attempt ", k, ": unknown student id ", a.student_id);
    if (!item_ok) report("attempt ", k, ": unknown item id ", a.item_id);
    if (student_ok) ++per_student[static_cast<std::size_t>(a.student_id)];
    if (student_ok && item_ok && !seen.emplace(a.student_id, a.item_id).second) {
      report("attempt ", k, ": student ", a.student_id, " repeats item ", a.item_id,
             " (items must be distinct per student)");
    }
    if (a.true_pi.has_value() != a.true_p.has_value()) {
      report("attempt ", k, ": true_pi and true_p must be both present or both absent");
    }
    for (const auto& [name, v] : {std::pair{"true_pi", a.true_pi}, std::pair{"true_p", a.true_p}}) {
      if (v && !(*v >= 0.0 && *v <= 1.0)) {
        report("attempt ", k, ": ", name, " ", *v, " is not a probability");
      }
    }
  }
  if (!per_student.empty()) {
    const std::size_t expected = expected_attempts > 0 ? expected_attempts : per_student.front();
    for (std::size_t s = 0; s < per_student.size(); ++s) {
      if (per_student[s] != expected) {
        report("student ", s, ": has ", per_student[s], " attempts, expected ", expected);
      }
    }
  }
  return out;
}

}  // namespace zilm
