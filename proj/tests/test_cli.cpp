#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "explab/cli.hpp"
#include "explab/io.hpp"

using namespace explab;
namespace fs = std::filesystem;

namespace {

const std::string kData = EXPLAB_TEST_DATA;

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("explab_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("parse the BSC channel file") {
  const auto ch = io::load_channel(kData + "/bsc01.ch");
  REQUIRE(ch.inputs() == 2);
  REQUIRE(ch.outputs() == 2);
  CHECK(ch(0, 0) == 0.9);
  CHECK(ch(0, 1) == 0.1);
  CHECK(ch(1, 0) == 0.1);
  CHECK(ch(1, 1) == 0.9);
  CHECK(ch.name() == "bsc01");
}

TEST_CASE("channel syntax errors") {
  try {
    io::parse_channel("dmc 2 2\n0.9 0.1\n0.5 0.3\n");
    FAIL("accepted a row summing to 0.8");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  CHECK_THROWS_AS(io::parse_channel("dmc 2 2\n0.9 0.1\n"), Error);
  CHECK_THROWS_AS(io::parse_channel("dmc 2 2\n0.9 0.1 0\n0.1 0.9\n"), Error);
  CHECK_THROWS_AS(io::parse_channel("channel 2 2\n0.9 0.1\n0.1 0.9\n"), Error);
  CHECK_THROWS_AS(io::parse_channel("dmc 2 2\n0.9 abc\n0.1 0.9\n"), Error);
  // Within 1e-9 of 1 the row is renormalized.
  const auto ch = io::parse_channel("# near\ndmc 1 2\n0.5 0.5000000004\n");
  CHECK(ch(0, 0) + ch(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("channel round trip") {
  const auto ch = io::load_channel(kData + "/z3.ch");
  REQUIRE(ch.outputs() == 3);
  const auto again = io::parse_channel(io::serialize_channel(ch));
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 3; ++y) CHECK(again(x, y) == ch(x, y));
  CHECK(io::serialize_channel(again) == io::serialize_channel(ch));
}

TEST_CASE("rate lists") {
  CHECK(io::parse_rates("0:0.4:0.05").size() == 9);
  CHECK(io::parse_rates("0.1,0.2").size() == 2);
  CHECK(io::parse_rates("0:0:1").size() == 1);
  CHECK_THROWS_AS(io::parse_rates("0.2,0.1"), Error);
  CHECK_THROWS_AS(io::parse_rates("-0.1,0.1"), Error);
  CHECK_THROWS_AS(io::parse_rates("0:1:0"), Error);
}

TEST_CASE("number formatting") {
  CHECK(io::format_number(0.1234567891234) == "0.123456789");
  CHECK(io::format_number(1.0 / 0.0) == "+inf");
  CHECK(io::format_number(-1.0 / 0.0) == "-inf");
  CHECK(io::json_number(1.0 / 0.0) == "+inf");
  CHECK(io::json_number(0.1234567891234).get<double>() == 0.123456789);
}

TEST_CASE("exponent sweep writes one CSV row per rate") {
  TempDir dir;
  const auto r = run({"exponent", "trc", "--channel", kData + "/bsc01.ch", "--rates", "0:0.4:0.05",
                      "--metric", "mmi", "--grid-k", "4", "--outer-k", "4", "--refine", "4", "--csv",
                      dir / "trc.csv", "--plot-script", dir / "trc.gp"});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(dir / "trc.csv"));
  REQUIRE(rows.size() == 10);
  CHECK(rows[0].rfind("rate,value", 0) == 0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(split(rows[i]).size() == split(rows[0]).size());
  CHECK(slurp(dir / "trc.gp").find("trc.csv") != std::string::npos);
}

TEST_CASE("CSV and JSON carry the same numbers and the resolved config") {
  TempDir dir;
  const auto r = run({"exponent", "random", "--bsc", "0.1", "--rates", "0,0.1,0.2", "--csv", dir / "r.csv",
                      "--json", dir / "r.json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "r.json"));
  CHECK(doc["version"] == io::kFormatVersion);
  CHECK(doc["config"].contains("rates"));
  CHECK(doc["config"].contains("optimizer"));
  CHECK(doc["config"].contains("channel"));
  const auto rows = lines(slurp(dir / "r.csv"));
  REQUIRE(rows.size() == 4);
  const auto& res = doc["results"];
  REQUIRE(res.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto cells = split(rows[i + 1]);
    CHECK(std::stod(cells[0]) == res[i]["rate"].get<double>());
    CHECK(std::stod(cells[1]) == res[i]["result"]["value"].get<double>());
  }
}

TEST_CASE("certify exit codes") {
  const auto ok = run({"certify", "theorem1", "--bsc", "0.1", "--rate", "0", "--no-primal", "--strict"});
  CHECK(ok.code == 0);
  // Psi <= Lambda fails on a negatively correlated coupling admitted at R = 0.1.
  const auto flagged = run({"certify", "theorem1", "--bsc", "0.1", "--rate", "0.1", "--no-primal", "--strict"});
  CHECK(flagged.code == 1);
  CHECK(flagged.err.find("psi<=lambda") != std::string::npos);
  const auto lenient = run({"certify", "theorem1", "--bsc", "0.1", "--rate", "0.1", "--no-primal"});
  CHECK(lenient.code == 0);
}

TEST_CASE("simulation JSON is byte-identical across runs") {
  TempDir dir;
  const std::vector<std::string> base{"simulate", "--channel", kData + "/bsc01.ch", "--n", "8", "--M", "2",
                                      "--samples", "100", "--seed", "7", "--json"};
  auto a = base, b = base;
  a.push_back(dir / "a.json");
  b.push_back(dir / "b.json");
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  const std::string ja = slurp(dir / "a.json"), jb = slurp(dir / "b.json");
  CHECK(!ja.empty());
  CHECK(ja == jb);
  const auto doc = nlohmann::json::parse(ja);
  CHECK(doc["config"]["seed"] == 7);
  CHECK(doc["results"].size() == 2);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"exponent", "trc", "--bsc", "0.1"}).code == 2);
  CHECK(run({"exponent", "trc", "--bsc", "0.1", "--rates", "0.2,0.1"}).code == 2);
  CHECK(run({"simulate", "--channel", kData + "/missing.ch", "--n", "4", "--M", "2"}).code == 2);
  CHECK(run({"exponent", "trc", "--bsc", "0.1", "--rates", "0.1", "--plot-script", "x.gp"}).code == 2);
}

TEST_CASE("the installed binary behaves like run()") {
  TempDir dir;
  const std::string cmd = std::string(EXPLAB_CLI) + " simulate --bsc 0.1 --n 4 --M 2 --samples 5 --json " +
                          (dir / "bin.json") + " > " + (dir / "stdout.txt") + " 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  const auto in_proc = run({"simulate", "--bsc", "0.1", "--n", "4", "--M", "2", "--samples", "5", "--json",
                            dir / "lib.json"});
  REQUIRE(in_proc.code == 0);
  CHECK(slurp(dir / "bin.json") == slurp(dir / "lib.json"));
}
