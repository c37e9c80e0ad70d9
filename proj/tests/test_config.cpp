#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eitgate/config.hpp"

using namespace eitgate;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Proc {
  int status = 0;
  std::string out;
};

Proc run(const std::string& args) {
  const std::string cmd = std::string(EITGATE_CLI) + " " + args + " 2>&1";
  Proc p;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) p.out += buf;
  const int raw = pclose(pipe);
  p.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return p;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("eitgate_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

bool mentions(const std::vector<Diagnostic>& d, const std::string& path) {
  for (const auto& x : d) {
    if (x.path == path && x.severity == Diagnostic::Severity::Error) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("every shipped config parses, validates and round-trips") {
  int n = 0;
  for (const auto& e : fs::directory_iterator(EITGATE_CONFIG_DIR)) {
    if (e.path().extension() != ".toml") continue;
    ++n;
    CAPTURE(e.path().string());
    const auto parsed = parse_config(slurp(e.path()));
    REQUIRE(parsed.config);
    CHECK(parsed.diagnostics.empty());
    CHECK_FALSE(has_errors(validate_config(*parsed.config)));
    const auto again = parse_config(serialize_config(*parsed.config));
    REQUIRE(again.config);
    CHECK(*again.config == *parsed.config);
  }
  CHECK(n >= 10);
}

TEST_CASE("diagnostics name the offending key") {
  auto p = parse_config("protocol = \"bell\"\n[scheme]\nwaist_um = -3.0\n");
  REQUIRE(p.config);
  CHECK(mentions(validate_config(*p.config), "scheme.waist_um"));

  p = parse_config("protocol = \"ghz\"\n[ghz]\nk = 5\n");
  REQUIRE(p.config);
  CHECK(mentions(validate_config(*p.config), "ghz.k"));

  p = parse_config("protocol = \"ghz\"\n[ghz]\nk = 3\n[geometry]\nlayout = \"right_angle\"\n");
  CHECK(mentions(validate_config(*p.config), "geometry.layout"));

  p = parse_config("protocol = \"\"\n");
  CHECK(mentions(validate_config(*p.config), "protocol"));

  p = parse_config("protocol = \"raman_scan\"\n[scan]\naxis = \"phi_rad\"\nstart = 0.0\n"
                   "stop = 1.0\npoints = 5\n");
  CHECK(mentions(validate_config(*p.config), "scan.axis"));

  p = parse_config("protocol = \"bell\"\n[scheme]\npreset = 6\n");
  CHECK_FALSE(p.diagnostics.empty());
  p = parse_config("protocol = \"bell\"\n[schema]\npreset = \"6p32\"\n");
  CHECK_FALSE(p.diagnostics.empty());
  p = parse_config("protocol = \n");
  CHECK_FALSE(p.config);
  CHECK_FALSE(p.diagnostics.empty());
}

TEST_CASE("content hash") {
  // git hash-object of "hello\n".
  CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("CLI exit codes") {
  const auto dir = scratch("cli");
  const auto bad = write(dir, "bad.toml", "protocol = \"ghz\"\n[ghz]\nk = 7\n");
  auto r = run("validate " + bad.string());
  CHECK(r.status == 2);
  CHECK(r.out.find("ghz.k") != std::string::npos);

  const auto empty = write(dir, "empty.toml", "protocol = \"\"\n");
  CHECK(run("run " + empty.string()).status == 2);

  const auto waist = write(dir, "waist.toml",
                           "protocol = \"bell\"\n[scheme]\npreset = \"7p12\"\nwaist_um = -1.0\n");
  r = run("run " + waist.string());
  CHECK(r.status == 2);
  CHECK(r.out.find("scheme.waist_um") != std::string::npos);

  CHECK(run("run " + (dir / "missing.toml").string()).status == 2);
  r = run("presets");
  CHECK(r.status == 0);
  CHECK(r.out.find("6p32") != std::string::npos);
  CHECK(r.out.find("7p12") != std::string::npos);
}

TEST_CASE("reruns produce byte-identical CSV") {
  const auto dir = scratch("rerun");
  const auto cfg = write(dir, "scan.toml",
                         "protocol = \"raman_scan\"\n[scan]\naxis = \"raman_detuning_mhz\"\n"
                         "start = 0.2\nstop = 0.4\npoints = 3\n");
  REQUIRE(run("run " + cfg.string() + " --out-dir " + (dir / "a").string()).status == 0);
  REQUIRE(run("run " + cfg.string() + " --out-dir " + (dir / "b").string()).status == 0);
  const auto a = slurp(dir / "a" / "raman_scan.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(dir / "b" / "raman_scan.csv"));
  CHECK(a.find("# config_hash") != std::string::npos);
  const auto json = slurp(dir / "a" / "raman_scan.json");
  for (const char* key : {"\"protocol\"", "\"parameters\"", "\"fidelity\"", "\"populations\"",
                          "\"coherence\"", "\"loss\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
}

}
