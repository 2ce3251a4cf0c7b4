#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "zilm/domain.hpp"
#include "zilm/simulate.hpp"

namespace zilm::testing {

inline Item make_item(std::int64_t id, double b = 0.0, double a = 1.0, double g = 0.0) {
  Item it;
  it.id = id;
  it.difficulty = b;
  it.discrimination = a;
  it.guessing = g;
  return it;
}

inline Attempt make_attempt(std::int64_t s, std::int64_t i, Outcome o, Split split = Split::Train) {
  Attempt a;
  a.student_id = s;
  a.item_id = i;
  a.outcome = o;
  a.split = split;
  return a;
}

// Small simulated instance; n_attempts is clipped to n_items.
inline Dataset small_dataset(std::int64_t n_students, std::int64_t n_items, std::uint64_t seed,
                             std::int64_t n_attempts = 0) {
  SimConfig cfg;
  cfg.n_students = n_students;
  cfg.n_items = n_items;
  cfg.n_attempts_per_student = n_attempts > 0 ? n_attempts : std::min<std::int64_t>(n_items, 20);
  cfg.seed = seed;
  return generate_dataset(cfg);
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("zilm_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace zilm::testing
