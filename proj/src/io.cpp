#include "zilm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <openssl/evp.h>

#include "zilm/errors.hpp"
#include "zilm/random.hpp"

namespace zilm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Raised while decoding a config object; carries the dotted key path so the
// text-level parser can point at a line.
struct KeyError : ConfigError {
  KeyError(std::string key_path, const std::string& msg)
      : ConfigError(msg), key(std::move(key_path)) {}
  std::string key;
};

std::string join(std::string_view path, std::string_view key) {
  return path.empty() ? std::string(key) : std::string(path) + "." + std::string(key);
}

void reject_unknown(const json& obj, std::string_view path,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw KeyError(std::string(path), std::string(path) + ": expected a JSON object");
  }
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || a == key;
    if (!known) {
      const std::string p = join(path, key);
      throw KeyError(p, "unknown config key '" + p + "'");
    }
  }
}

void read_real(const json& obj, std::string_view path, std::string_view key, double& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  if (!it->is_number()) throw KeyError(join(path, key), join(path, key) + ": expected a number");
  out = it->get<double>();
}

void read_count(const json& obj, std::string_view path, std::string_view key, std::int64_t& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  if (!it->is_number_integer()) {
    throw KeyError(join(path, key), join(path, key) + ": expected an integer");
  }
  out = it->get<std::int64_t>();
}

void read_seed(const json& obj, std::string_view path, std::string_view key, std::uint64_t& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  if (!it->is_number_unsigned()) {
    throw KeyError(join(path, key), join(path, key) + ": expected a non-negative integer");
  }
  out = it->get<std::uint64_t>();
}

template <std::size_t N>
void read_row(const json& obj, std::string_view path, std::string_view key,
              const std::array<std::string_view, N>& names, std::array<double, N>& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  const std::string p = join(path, key);
  if (!it->is_object()) throw KeyError(p, p + ": expected an object keyed by category");
  for (const auto& [k, _] : it->items()) {
    bool known = false;
    for (std::string_view n : names) known = known || n == k;
    if (!known) throw KeyError(join(p, k), "unknown config key '" + join(p, k) + "'");
  }
  for (std::size_t i = 0; i < N; ++i) read_real(*it, p, names[i], out[i]);
}

void read_range(const json& obj, std::string_view path, std::string_view key, UniformRange& r) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  const std::string p = join(path, key);
  reject_unknown(*it, p, {"low", "high"});
  read_real(*it, p, "low", r.low);
  read_real(*it, p, "high", r.high);
}

constexpr std::array<std::string_view, 3> kNdcNames{"dyslexia", "dyscalculia", "spd"};
constexpr std::array<std::string_view, 2> kSubjectNames{"maths", "english"};
constexpr std::array<std::string_view, 3> kContentNames{"letter", "digit", "both"};
constexpr std::array<std::string_view, 3> kDeliveryNames{"read", "listen", "both"};
constexpr std::array<std::string_view, 4> kResponseNames{"written", "speak", "click_picture",
                                                         "click_read"};

template <std::size_t N>
json row_json(const std::array<std::string_view, N>& names, const std::array<double, N>& v) {
  json j = json::object();
  for (std::size_t i = 0; i < N; ++i) j[std::string(names[i])] = v[i];
  return j;
}

json range_json(const UniformRange& r) { return {{"low", r.low}, {"high", r.high}}; }

std::size_t line_of(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset; ++i) line += text[i] == '\n' ? 1 : 0;
  return line;
}

// Line of the first occurrence of the last segment of a dotted key, or 0.
std::size_t line_of_key(std::string_view text, std::string_view key_path) {
  const std::size_t dot = key_path.rfind('.');
  const std::string needle =
      "\"" + std::string(dot == std::string_view::npos ? key_path : key_path.substr(dot + 1)) +
      "\"";
  const std::size_t at = text.find(needle);
  return at == std::string_view::npos ? 0 : line_of(text, at);
}

std::string with_line(std::string_view text, std::string_view key_path, const std::string& msg) {
  const std::size_t line = line_of_key(text, key_path);
  if (line == 0) return msg;
  return "line " + std::to_string(line) + ": " + msg;
}

// --- CSV ------------------------------------------------------------------------

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string_view> fields;
};

/// Rows of a CSV file after checking the header; '\r' endings tolerated.
std::vector<CsvRow> csv_rows(std::string_view text, std::string_view file,
                             std::string_view header) {
  std::vector<CsvRow> rows;
  std::size_t start = 0;
  std::size_t line_no = 0;
  const std::size_t n_fields = split_fields(header).size();
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != header) {
        throw DataError(std::string(file) + ": expected header '" + std::string(header) +
                        "', got '" + std::string(line) + "'");
      }
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != n_fields) {
      throw DataError(std::string(file) + " line " + std::to_string(line_no) + ": expected " +
                      std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
    }
    rows.push_back({line_no, std::move(fields)});
  }
  if (line_no == 0) throw DataError(std::string(file) + ": empty file");
  return rows;
}

/// Runs `parse` on every row, prefixing failures with the file and line.
template <typename F>
void for_each_row(std::string_view text, std::string_view file, std::string_view header,
                  F&& parse) {
  for (const CsvRow& row : csv_rows(text, file, header)) {
    try {
      parse(row.fields);
    } catch (const DataError& e) {
      throw DataError(std::string(file) + " line " + std::to_string(row.line) + ": " + e.what());
    }
  }
}

bool parse_flag(std::string_view s, std::string_view what) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw DataError(std::string(what) + ": expected 0 or 1, got '" + std::string(s) + "'");
}

std::string optional_real(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

constexpr std::string_view kStudentsHeader = "id,ability,dyslexia,dyscalculia,spd";
constexpr std::string_view kItemsHeader =
    "id,difficulty,discrimination,guessing,subject,content,density,delivery,response";
constexpr std::string_view kAttemptsHeader = "student_id,item_id,outcome,true_pi,true_p,split";

constexpr std::string_view kMathsContentNote =
    "content_probs.maths (letter, digit, both) = (0.1, 0.3, 0.6): the source row (0.1, 0.5, 0.6) "
    "does not sum to 1, so its 0.5 is read as a typo for 0.3";

json vector_json(const std::vector<double>& v) { return json(v); }

std::vector<double> vector_from(const json& j, std::string_view what) {
  if (!j.is_array()) throw DataError(std::string(what) + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const json& x : j) {
    if (!x.is_number()) throw DataError(std::string(what) + ": non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

const json& field(const json& j, std::string_view key, std::string_view what) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) {
    throw DataError(std::string(what) + ": missing key '" + std::string(key) + "'");
  }
  return *it;
}

}  // namespace

// --- primitives -------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw DataError(std::string(what) + ": '" + std::string(s) + "' is not a number");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw DataError(std::string(what) + ": '" + std::string(s) + "' is not an integer");
  }
  return v;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot move '" + tmp.string() + "' into place");
  }
}

// --- simulation config ----------------------------------------------------------

json to_json(const SimConfig& c) {
  return {
      {"n_students", c.n_students},
      {"n_items", c.n_items},
      {"n_attempts_per_student", c.n_attempts_per_student},
      {"seed", c.seed},
      {"ability", {{"mean", c.ability_mean}, {"sd", c.ability_sd}}},
      {"ndc_prevalence", row_json(kNdcNames, c.ndc_prevalence)},
      {"difficulty", range_json(c.difficulty)},
      {"discrimination", range_json(c.discrimination)},
      {"guessing", range_json(c.guessing)},
      {"subject_probs", row_json(kSubjectNames, c.subject_probs)},
      {"content_probs",
       {{"maths", row_json(kContentNames, c.content_probs_maths)},
        {"english", row_json(kContentNames, c.content_probs_english)}}},
      {"density",
       {{"mean", c.density_mean},
        {"sd", c.density_sd},
        {"low", c.density_clip.low},
        {"high", c.density_clip.high}}},
      {"delivery_probs", row_json(kDeliveryNames, c.delivery_probs)},
      {"response_probs", row_json(kResponseNames, c.response_probs)},
      {"test_fraction", c.test_fraction},
      {"lqf",
       {{"intercept", c.lqf.intercept},
        {"w_dyslexia", c.lqf.w_dyslexia},
        {"w_dyslexia_text", c.lqf.w_dyslexia_text},
        {"w_dyscalculia", c.lqf.w_dyscalculia},
        {"w_spd", c.lqf.w_spd},
        {"w_spd_speak", c.lqf.w_spd_speak}}},
  };
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  reject_unknown(j, "",
                 {"n_students", "n_items", "n_attempts_per_student", "seed", "ability",
                  "ndc_prevalence", "difficulty", "discrimination", "guessing", "subject_probs",
                  "content_probs", "density", "delivery_probs", "response_probs", "test_fraction",
                  "lqf"});
  read_count(j, "", "n_students", c.n_students);
  read_count(j, "", "n_items", c.n_items);
  read_count(j, "", "n_attempts_per_student", c.n_attempts_per_student);
  read_seed(j, "", "seed", c.seed);
  if (const auto it = j.find("ability"); it != j.end()) {
    reject_unknown(*it, "ability", {"mean", "sd"});
    read_real(*it, "ability", "mean", c.ability_mean);
    read_real(*it, "ability", "sd", c.ability_sd);
  }
  read_row(j, "", "ndc_prevalence", kNdcNames, c.ndc_prevalence);
  read_range(j, "", "difficulty", c.difficulty);
  read_range(j, "", "discrimination", c.discrimination);
  read_range(j, "", "guessing", c.guessing);
  read_row(j, "", "subject_probs", kSubjectNames, c.subject_probs);
  if (const auto it = j.find("content_probs"); it != j.end()) {
    reject_unknown(*it, "content_probs", {"maths", "english"});
    read_row(*it, "content_probs", "maths", kContentNames, c.content_probs_maths);
    read_row(*it, "content_probs", "english", kContentNames, c.content_probs_english);
  }
  if (const auto it = j.find("density"); it != j.end()) {
    reject_unknown(*it, "density", {"mean", "sd", "low", "high"});
    read_real(*it, "density", "mean", c.density_mean);
    read_real(*it, "density", "sd", c.density_sd);
    read_real(*it, "density", "low", c.density_clip.low);
    read_real(*it, "density", "high", c.density_clip.high);
  }
  read_row(j, "", "delivery_probs", kDeliveryNames, c.delivery_probs);
  read_row(j, "", "response_probs", kResponseNames, c.response_probs);
  read_real(j, "", "test_fraction", c.test_fraction);
  if (const auto it = j.find("lqf"); it != j.end()) {
    reject_unknown(*it, "lqf",
                   {"intercept", "w_dyslexia", "w_dyslexia_text", "w_dyscalculia", "w_spd",
                    "w_spd_speak"});
    read_real(*it, "lqf", "intercept", c.lqf.intercept);
    read_real(*it, "lqf", "w_dyslexia", c.lqf.w_dyslexia);
    read_real(*it, "lqf", "w_dyslexia_text", c.lqf.w_dyslexia_text);
    read_real(*it, "lqf", "w_dyscalculia", c.lqf.w_dyscalculia);
    read_real(*it, "lqf", "w_spd", c.lqf.w_spd);
    read_real(*it, "lqf", "w_spd_speak", c.lqf.w_spd_speak);
  }
  return c;
}

SimConfig parse_sim_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": malformed JSON (" + e.what() + ")");
  }
  SimConfig c;
  try {
    c = sim_config_from_json(j);
  } catch (const KeyError& e) {
    throw ConfigError(with_line(text, e.key, e.what()));
  }
  const auto problems = validate_config(c);
  if (!problems.empty()) {
    std::string msg = "invalid simulation config:";
    for (const std::string& p : problems) {
      // Violations start with the offending key, e.g. "ability.sd must be >= 0".
      std::string key = p.substr(0, p.find_first_of(" :"));
      msg += "\n  " + with_line(text, key, p);
    }
    throw ConfigError(msg);
  }
  return c;
}

SimConfig load_sim_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config '" + path.string() + "'");
  }
  try {
    return parse_sim_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_digest(const SimConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

json to_json(const FitConfig& c) {
  return {
      {"learning_rate", c.learning_rate}, {"max_iters", c.max_iters},
      {"rel_tol", c.rel_tol},             {"l2_theta", c.l2_theta},
      {"l2_item", c.l2_item},             {"l2_weights", c.l2_weights},
      {"init_scale", c.init_scale},       {"seed", c.seed},
      {"optimizer", to_token(c.optimizer)},
  };
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig c;
  try {
    reject_unknown(j, "",
                   {"learning_rate", "max_iters", "rel_tol", "l2_theta", "l2_item", "l2_weights",
                    "init_scale", "seed", "optimizer"});
    read_real(j, "", "learning_rate", c.learning_rate);
    read_count(j, "", "max_iters", c.max_iters);
    read_real(j, "", "rel_tol", c.rel_tol);
    read_real(j, "", "l2_theta", c.l2_theta);
    read_real(j, "", "l2_item", c.l2_item);
    read_real(j, "", "l2_weights", c.l2_weights);
    read_real(j, "", "init_scale", c.init_scale);
    read_seed(j, "", "seed", c.seed);
    if (const auto it = j.find("optimizer"); it != j.end()) {
      if (!it->is_string()) throw ConfigError("optimizer: expected a string");
      c.optimizer = parse_optimizer(it->get<std::string>());
    }
  } catch (const KeyError& e) {
    throw ConfigError(e.what());
  }
  require_valid(c);
  return c;
}

FitConfig load_fit_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read fit config '" + path.string() + "'");
  }
  try {
    return fit_config_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": line " +
                      std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": malformed JSON");
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- dataset directory -------------------------------------------------------------

DatasetManifest make_manifest(const Dataset& d, const SimConfig& cfg) {
  DatasetManifest m;
  m.seed = cfg.seed;
  m.config_digest = config_digest(cfg);
  m.rng_algorithm = std::string(RandomSource::kAlgorithm);
  m.n_students = static_cast<std::int64_t>(d.students.size());
  m.n_items = static_cast<std::int64_t>(d.items.size());
  m.n_attempts = static_cast<std::int64_t>(d.attempts.size());
  if (cfg.content_probs_maths == SimConfig{}.content_probs_maths) {
    m.notes.emplace_back(kMathsContentNote);
  }
  if (cfg.lqf == LqfWeights{}) {
    m.notes.emplace_back(
        "lqf weights are the calibrated defaults (separate dyslexia text-response weight and an "
        "spd speaking pathway), tuned for this generator");
  }
  m.config = to_json(cfg);
  return m;
}

std::string students_csv(const Dataset& d) {
  std::string out(kStudentsHeader);
  out += '\n';
  for (const StudentProfile& s : d.students) {
    out += std::to_string(s.id) + ',' + format_double(s.ability) + ',' +
           (s.ndc.dyslexia ? '1' : '0') + ',' + (s.ndc.dyscalculia ? '1' : '0') + ',' +
           (s.ndc.spd ? '1' : '0') + '\n';
  }
  return out;
}

std::string items_csv(const Dataset& d) {
  std::string out(kItemsHeader);
  out += '\n';
  for (const Item& it : d.items) {
    out += std::to_string(it.id) + ',' + format_double(it.difficulty) + ',' +
           format_double(it.discrimination) + ',' + format_double(it.guessing) + ',' +
           std::string(to_token(it.subject)) + ',' + std::string(to_token(it.content)) + ',' +
           format_double(it.density) + ',' + std::string(to_token(it.delivery)) + ',' +
           std::string(to_token(it.response)) + '\n';
  }
  return out;
}

std::string attempts_csv(const Dataset& d) {
  std::string out(kAttemptsHeader);
  out += '\n';
  for (const Attempt& a : d.attempts) {
    out += std::to_string(a.student_id) + ',' + std::to_string(a.item_id) + ',' +
           std::string(to_token(a.outcome)) + ',' + optional_real(a.true_pi) + ',' +
           optional_real(a.true_p) + ',' + std::string(to_token(a.split)) + '\n';
  }
  return out;
}

void write_dataset(const fs::path& dir, const Dataset& d, const DatasetManifest& m) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "'");
  json mj = {
      {"format_version", m.format_version},
      {"seed", m.seed},
      {"config_digest", m.config_digest},
      {"rng_algorithm", m.rng_algorithm},
      {"counts", {{"students", m.n_students}, {"items", m.n_items}, {"attempts", m.n_attempts}}},
      {"notes", m.notes},
      {"config", m.config},
  };
  write_file_atomic(dir / "students.csv", students_csv(d));
  write_file_atomic(dir / "items.csv", items_csv(d));
  write_file_atomic(dir / "attempts.csv", attempts_csv(d));
  // Manifest last: its presence marks a complete directory.
  write_file_atomic(dir / "manifest.json", mj.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir, DatasetManifest* manifest) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' not found");

  DatasetManifest m;
  {
    const std::string text = read_file(dir / "manifest.json");
    json j;
    try {
      j = json::parse(text);
      m.format_version = field(j, "format_version", "manifest.json").get<int>();
      if (m.format_version != kDatasetFormatVersion) {
        throw DataError("manifest.json: format_version " + std::to_string(m.format_version) +
                        " is not supported (expected " + std::to_string(kDatasetFormatVersion) +
                        ")");
      }
      m.seed = field(j, "seed", "manifest.json").get<std::uint64_t>();
      m.config_digest = field(j, "config_digest", "manifest.json").get<std::string>();
      m.rng_algorithm = j.value("rng_algorithm", std::string());
      const json& counts = field(j, "counts", "manifest.json");
      m.n_students = field(counts, "students", "manifest.json counts").get<std::int64_t>();
      m.n_items = field(counts, "items", "manifest.json counts").get<std::int64_t>();
      m.n_attempts = field(counts, "attempts", "manifest.json counts").get<std::int64_t>();
      if (const auto it = j.find("notes"); it != j.end()) {
        m.notes = it->get<std::vector<std::string>>();
      }
      if (const auto it = j.find("config"); it != j.end()) m.config = *it;
    } catch (const json::exception& e) {
      throw DataError("manifest.json: " + std::string(e.what()));
    }
  }

  Dataset d;
  d.sim_config_digest = m.config_digest;

  const std::string students_text = read_file(dir / "students.csv");
  for_each_row(students_text, "students.csv",
               kStudentsHeader, [&](const std::vector<std::string_view>& f) {
    StudentProfile s;
    s.id = parse_int(f[0], "id");
    s.ability = parse_double(f[1], "ability");
    s.ndc.dyslexia = parse_flag(f[2], "dyslexia");
    s.ndc.dyscalculia = parse_flag(f[3], "dyscalculia");
    s.ndc.spd = parse_flag(f[4], "spd");
    d.students.push_back(s);
  });

  const std::string items_text = read_file(dir / "items.csv");
  for_each_row(items_text, "items.csv",
               kItemsHeader, [&](const std::vector<std::string_view>& f) {
    Item it;
    it.id = parse_int(f[0], "id");
    it.difficulty = parse_double(f[1], "difficulty");
    it.discrimination = parse_double(f[2], "discrimination");
    it.guessing = parse_double(f[3], "guessing");
    it.subject = parse_subject(f[4]);
    it.content = parse_content(f[5]);
    it.density = parse_double(f[6], "density");
    it.delivery = parse_delivery(f[7]);
    it.response = parse_response(f[8]);
    d.items.push_back(it);
  });

  const std::string attempts_text = read_file(dir / "attempts.csv");
  for_each_row(attempts_text, "attempts.csv",
               kAttemptsHeader, [&](const std::vector<std::string_view>& f) {
    Attempt a;
    a.student_id = parse_int(f[0], "student_id");
    a.item_id = parse_int(f[1], "item_id");
    a.outcome = parse_outcome(f[2]);
    if (!f[3].empty()) a.true_pi = parse_double(f[3], "true_pi");
    if (!f[4].empty()) a.true_p = parse_double(f[4], "true_p");
    a.split = parse_split(f[5]);
    d.attempts.push_back(a);
  });

  if (static_cast<std::int64_t>(d.students.size()) != m.n_students ||
      static_cast<std::int64_t>(d.items.size()) != m.n_items ||
      static_cast<std::int64_t>(d.attempts.size()) != m.n_attempts) {
    throw DataError("dataset row counts do not match manifest.json counts");
  }
  if (const auto problems = validate_dataset(d); !problems.empty()) {
    std::string msg = "invalid dataset in '" + dir.string() + "':";
    const std::size_t shown = std::min<std::size_t>(problems.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + problems[i];
    if (problems.size() > shown) {
      msg += "\n  ... " + std::to_string(problems.size() - shown) + " more";
    }
    throw DataError(msg);
  }
  if (manifest != nullptr) *manifest = std::move(m);
  return d;
}

// --- fitted models -----------------------------------------------------------------

json to_json(const FittedModel& m) {
  json params;
  json names = json::array();
  if (m.kind == ModelKind::Ktm1) {
    const Ktm1Params& p = m.ktm();
    params = {{"user_weights", vector_json(p.user_weights)},
              {"item_weights", vector_json(p.item_weights)},
              {"context_weights", vector_json(p.context_weights)},
              {"bias", p.bias}};
    for (std::string_view n : ktm_context_names()) names.push_back(n);
  } else {
    const ZilmParams& p = m.zilm();
    params = {{"theta", vector_json(p.theta)}, {"b", vector_json(p.b)},
              {"a_raw", vector_json(p.a_raw)}, {"g_raw", vector_json(p.g_raw)},
              {"w_pi", vector_json(p.w_pi)}};
    for (std::string_view n : pi_feature_names()) names.push_back(n);
  }
  return {
      {"format_version", kModelFormatVersion},
      {"kind", to_token(m.kind)},
      {"transforms",
       {{"discrimination", "softplus(a_raw)"}, {"guessing", "0.15*sigmoid(g_raw)"}}},
      {"feature_names", names},
      {"params", params},
      {"fit_config", to_json(m.config)},
      {"trace",
       {{"iterations", m.trace.iterations},
        {"converged", m.trace.converged},
        {"nll", m.trace.nll}}},
  };
}

FittedModel model_from_json(const json& j) {
  try {
    const int version = field(j, "format_version", "model").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("model format_version " + std::to_string(version) + " is not supported");
    }
    FittedModel m;
    try {
      m.kind = parse_model_kind(field(j, "kind", "model").get<std::string>());
    } catch (const ConfigError& e) {
      throw DataError(std::string("model: ") + e.what());
    }
    const json& params = field(j, "params", "model");
    if (m.kind == ModelKind::Ktm1) {
      Ktm1Params p;
      p.user_weights = vector_from(field(params, "user_weights", "model"), "user_weights");
      p.item_weights = vector_from(field(params, "item_weights", "model"), "item_weights");
      p.context_weights =
          vector_from(field(params, "context_weights", "model"), "context_weights");
      p.bias = field(params, "bias", "model").get<double>();
      if (p.context_weights.size() != kKtmContextCount) {
        throw DataError("model: context_weights has the wrong length");
      }
      m.params = std::move(p);
    } else {
      ZilmParams p;
      p.theta = vector_from(field(params, "theta", "model"), "theta");
      p.b = vector_from(field(params, "b", "model"), "b");
      p.a_raw = vector_from(field(params, "a_raw", "model"), "a_raw");
      p.g_raw = vector_from(field(params, "g_raw", "model"), "g_raw");
      p.w_pi = vector_from(field(params, "w_pi", "model"), "w_pi");
      if (p.w_pi.size() != kPiFeatureCount) throw DataError("model: w_pi has the wrong length");
      if (p.a_raw.size() != p.b.size() || p.g_raw.size() != p.b.size()) {
        throw DataError("model: item parameter arrays differ in length");
      }
      m.params = std::move(p);
    }
    try {
      m.config = fit_config_from_json(field(j, "fit_config", "model"));
    } catch (const ConfigError& e) {
      throw DataError(std::string("model fit_config: ") + e.what());
    }
    const json& trace = field(j, "trace", "model");
    m.trace.iterations = field(trace, "iterations", "model trace").get<std::int64_t>();
    m.trace.converged = field(trace, "converged", "model trace").get<bool>();
    m.trace.nll = vector_from(field(trace, "nll", "model trace"), "trace nll");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

void save_model(const fs::path& path, const FittedModel& m) {
  write_file_atomic(path, to_json(m).dump(1) + "\n");
}

FittedModel load_model(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON");
  }
  return model_from_json(j);
}

std::string trace_csv(const TrainingTrace& t) {
  std::string out = "iter,nll\n";
  for (std::size_t i = 0; i < t.nll.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(t.nll[i]) + '\n';
  }
  return out;
}

}  // namespace zilm
