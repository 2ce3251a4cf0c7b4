#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "zilm/cli.hpp"
#include "zilm/io.hpp"

using namespace zilm;
using zilm::testing::make_attempt;
using zilm::testing::make_item;
using zilm::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run zilm_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "zilm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string small_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "sim.json";
  write_file_atomic(p, body);
  return p.string();
}

const char* kSmall = R"({
  "n_students": 60,
  "n_items": 40,
  "seed": 3
}
)";

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

bool contains(const std::string& s, const std::string& part) {
  return s.find(part) != std::string::npos;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate is deterministic and refuses to overwrite") {
  TempDir tmp("cli_simulate");
  const std::string cfg = small_config(tmp.path(), kSmall);
  const fs::path a = tmp.path() / "a", b = tmp.path() / "b";
  REQUIRE(zilm_cmd({"simulate", "--config", cfg, "--out", a.string()}).code == kExitOk);
  REQUIRE(zilm_cmd({"simulate", "--config", cfg, "--out", b.string()}).code == kExitOk);
  for (const char* f : {"students.csv", "items.csv", "attempts.csv", "manifest.json"}) {
    CHECK(read_file(a / f) == read_file(b / f));
  }
  const auto rm = nlohmann::json::parse(read_file(a / "run_manifest.json"));
  CHECK(rm["config_digest"] == sha256_hex(read_file(cfg)));
  CHECK(rm["seed"] == 3);

  const Run again = zilm_cmd({"simulate", "--config", cfg, "--out", a.string()});
  CHECK(again.code == kExitConfig);
  CHECK(contains(again.err, "--force"));
  CHECK(zilm_cmd({"simulate", "--config", cfg, "--out", a.string(), "--force"}).code == kExitOk);

  CHECK(zilm_cmd({"simulate", "--config", cfg, "--seed", "4", "--out", (tmp.path() / "c").string()})
            .code == kExitOk);
  CHECK(read_file(tmp.path() / "c" / "attempts.csv") != read_file(a / "attempts.csv"));
}

TEST_CASE("invalid configs fail before any output") {
  TempDir tmp("cli_bad_config");
  const fs::path out = tmp.path() / "out";
  const std::string neg = small_config(tmp.path(), "{\n  \"n_students\": -5\n}\n");
  const Run r = zilm_cmd({"simulate", "--config", neg, "--out", out.string()});
  CHECK(r.code == kExitConfig);
  CHECK(contains(r.err, "line 2"));
  CHECK_FALSE(fs::exists(out));

  const std::string broken = small_config(tmp.path(), "{\n  \"seed\": 1,\n  oops\n}\n");
  const Run s = zilm_cmd({"simulate", "--config", broken, "--out", out.string()});
  CHECK(s.code == kExitConfig);
  CHECK(contains(s.err, "line 3"));
  CHECK_FALSE(fs::exists(out));

  CHECK(zilm_cmd({"simulate", "--bogus"}).code == kExitConfig);
  CHECK(zilm_cmd({"--help"}).code == kExitOk);
}

TEST_CASE("default simulate records the content normalisation note") {
  TempDir tmp("cli_note");
  const fs::path out = tmp.path() / "d";
  REQUIRE(zilm_cmd({"simulate", "--quick", "--out", out.string()}).code == kExitOk);
  const auto m = nlohmann::json::parse(read_file(out / "manifest.json"));
  bool found = false;
  for (const auto& n : m["notes"]) found |= contains(n.get<std::string>(), "content_probs.maths");
  CHECK(found);
  CHECK(m["counts"]["students"] == 500);
}

TEST_CASE("output root comes from the environment") {
  TempDir tmp("cli_env");
  const std::string cfg = small_config(tmp.path(), kSmall);
  ::setenv(kOutRootEnv, (tmp.path() / "root").string().c_str(), 1);
  const Run r = zilm_cmd({"simulate", "--config", cfg});
  ::unsetenv(kOutRootEnv);
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(tmp.path() / "root" / "dataset" / "manifest.json"));
}

TEST_CASE("fit writes a model and a trace") {
  TempDir tmp("cli_fit");
  const std::string cfg = small_config(tmp.path(), kSmall);
  const fs::path data = tmp.path() / "data";
  REQUIRE(zilm_cmd({"simulate", "--config", cfg, "--out", data.string()}).code == kExitOk);
  const fs::path out = tmp.path() / "irt";
  const Run r = zilm_cmd({"fit", data.string(), "--kind", "irt", "--out", out.string()});
  REQUIRE(r.code == kExitOk);
  const FittedModel m = load_model(out / "model.json");
  CHECK(m.kind == ModelKind::Irt);
  CHECK(m.trace.converged);
  const auto trace = csv_lines(out / "trace.csv");
  CHECK(trace.front() == "iter,nll");
  CHECK(trace.size() == m.trace.nll.size() + 1);

  CHECK(zilm_cmd({"fit", data.string(), "--kind", "bkt", "--out", (tmp.path() / "x").string()})
            .code == kExitConfig);
  CHECK_FALSE(fs::exists(tmp.path() / "x"));
}

TEST_CASE("missing dataset fails without partial outputs") {
  TempDir tmp("cli_missing");
  const fs::path out = tmp.path() / "out";
  const Run r =
      zilm_cmd({"fit", (tmp.path() / "nowhere").string(), "--kind", "irt", "--out", out.string()});
  CHECK(r.code == kExitData);
  CHECK_FALSE(fs::exists(out));
  CHECK(zilm_cmd({"eval", "contrast", (tmp.path() / "nowhere").string(), "--out", out.string()})
            .code == kExitData);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("metrics on a perfect-oracle fixture") {
  TempDir tmp("cli_oracle");
  Dataset d;
  d.students = {{0, 1.0, {}}, {1, -1.0, {}}};
  d.items = {make_item(0), make_item(1)};
  d.attempts = {make_attempt(0, 0, Outcome::Correct, Split::Train),
                make_attempt(0, 1, Outcome::Correct, Split::Test),
                make_attempt(1, 0, Outcome::Incorrect, Split::Train),
                make_attempt(1, 1, Outcome::NotAnswered, Split::Test)};
  write_dataset(tmp.path() / "data", d, make_manifest(d, SimConfig{}));
  FittedModel m;
  m.kind = ModelKind::Ktm1;
  Ktm1Params k = Ktm1Params::zeros(2, 2);
  k.user_weights = {30.0, -30.0};
  m.params = k;
  save_model(tmp.path() / "model.json", m);

  const fs::path out = tmp.path() / "metrics";
  REQUIRE(zilm_cmd({"eval", "metrics", (tmp.path() / "data").string(), "--model",
                    (tmp.path() / "model.json").string(), "--out", out.string()})
              .code == kExitOk);
  const auto lines = csv_lines(out / "metrics.csv");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "model,split,n_attempts,accuracy,f1,nll,brier");
  CHECK(split(lines[1])[3] == "1");

  // a model for a different population is rejected before writing
  Ktm1Params wrong = Ktm1Params::zeros(3, 2);
  m.params = wrong;
  save_model(tmp.path() / "wrong.json", m);
  const fs::path out2 = tmp.path() / "metrics2";
  CHECK(zilm_cmd({"eval", "metrics", (tmp.path() / "data").string(), "--model",
                  (tmp.path() / "wrong.json").string(), "--out", out2.string()})
            .code == kExitData);
  CHECK_FALSE(fs::exists(out2));
}

TEST_CASE("delivery and policy report layouts") {
  TempDir tmp("cli_reports");
  const fs::path dv = tmp.path() / "delivery";
  REQUIRE(zilm_cmd({"eval", "delivery", "--quick", "--out", dv.string()}).code == kExitOk);
  const auto lines = csv_lines(dv / "delivery.csv");
  CHECK(lines[0] == "group,metric,read,listen,both");
  bool dyslexia_row = false;
  for (const auto& l : lines) dyslexia_row |= l.rfind("dyslexia,correct_rate,", 0) == 0;
  CHECK(dyslexia_row);

  const fs::path pol = tmp.path() / "policy";
  REQUIRE(zilm_cmd({"eval", "policy", "--policy", "oracle-active", "--quick", "--out",
                    pol.string()})
              .code == kExitOk);
  const auto rows = csv_lines(pol / "policy_oracle-active.csv");
  CHECK(split(rows[0]).back() == "lift");
  CHECK(rows.size() >= 5);  // header + ndc_count 0..3

  CHECK(zilm_cmd({"eval", "policy", "--policy", "greedy", "--out", (tmp.path() / "g").string()})
            .code == kExitConfig);
  CHECK(zilm_cmd({"eval", "hypothesis", "--out", (tmp.path() / "h").string()}).code ==
        kExitConfig);
}

TEST_CASE("quick reproduce: ZILM dominates IRT and reruns are identical") {
  TempDir tmp("cli_reproduce");
  const fs::path a = tmp.path() / "a", b = tmp.path() / "b";
  REQUIRE(zilm_cmd({"reproduce", "--quick", "--out", a.string()}).code == kExitOk);
  REQUIRE(zilm_cmd({"reproduce", "--quick", "--out", b.string()}).code == kExitOk);
  CHECK(read_file(a / "summary.csv") == read_file(b / "summary.csv"));

  const auto lines = csv_lines(a / "summary.csv");
  REQUIRE(lines.size() == 4);
  std::vector<std::string> irt, zilm;
  for (const auto& l : lines) {
    const auto f = split(l);
    if (f[0] == "irt") irt = f;
    if (f[0] == "irt_zilm") zilm = f;
  }
  REQUIRE(irt.size() >= 5);
  REQUIRE(zilm.size() >= 5);
  CHECK(std::stod(zilm[1]) >= std::stod(irt[1]));  // accuracy
  CHECK(std::stod(zilm[2]) >= std::stod(irt[2]));  // f1
  CHECK(std::stod(zilm[3]) <= std::stod(irt[3]));  // nll
  CHECK(std::stod(zilm[4]) <= std::stod(irt[4]));  // brier

  for (const char* f : {"dataset/manifest.json", "models/irt_zilm.json", "reports/delivery.csv",
                        "reports/hypothesis.json", "run_manifest.json"}) {
    CHECK_MESSAGE(fs::exists(a / f), f);
  }
  CHECK(zilm_cmd({"reproduce", "--quick", "--out", a.string()}).code == kExitConfig);
}

}
