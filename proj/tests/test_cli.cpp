#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "pmsim/cli.hpp"

using namespace pmsim;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"pmsim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = cli_run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("bounds subcommand emits the exact closed-form values") {
  const auto r = run({"bounds", "--K", "240", "--mu", "1", "--capacity", "0.4", "--gammas",
                      "0.5,1"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 3);
  CHECK(ls[0] == "gamma,K_over_lambda,traditional_bound,sce_bound");
  CHECK(ls[1] == "0.5,480,1080,840");
  CHECK(ls[2] == "1,240,840,600");
}

TEST_CASE("bounds are ordered: sce below traditional, arrival floor decreasing in gamma") {
  const auto r = run({"bounds", "--K", "240", "--mu", "1", "--capacity", "0.7", "--gammas",
                      "0.5,0.6,0.7,0.8,0.9,1.0"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  double prev_floor = 1e18;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = fields(ls[i]);
    REQUIRE(f.size() == 4);
    const double floor = std::stod(f[1]), trad = std::stod(f[2]), sce = std::stod(f[3]);
    CHECK(sce <= trad);
    CHECK(floor < prev_floor);
    prev_floor = floor;
  }
}

TEST_CASE("simulate rejects conflicting or invalid channel flags with exit 2") {
  CHECK(run({"simulate", "--scheme", "spm", "--K", "8", "--p", "0.6", "--gamma", "1",
             "--trials", "2"})
            .code == 2);
  CHECK(run({"simulate", "--scheme", "spm", "--K", "8", "--p", "0.1", "--capacity", "0.5",
             "--gamma", "1", "--trials", "2"})
            .code == 2);
  CHECK(run({"simulate", "--scheme", "spm", "--K", "8", "--gamma", "1", "--trials", "2"}).code ==
        2);
  CHECK(run({"simulate", "--scheme", "nope", "--K", "8", "--p", "0.1", "--gamma", "1"}).code == 2);
  CHECK(run({"simulate", "--scheme", "spm", "--K", "8", "--p", "0.1", "--gamma", "1",
             "--lambda", "0.5"})
            .code == 2);
  CHECK(run({"simulate", "--scheme", "sbc", "--K", "8", "--N", "3", "--p", "0.1", "--gamma", "1",
             "--trials", "2"})
            .code == 2);
  CHECK(run({"bogus"}).code == 2);
}

TEST_CASE("simulate emits one header and one data row") {
  const auto r = run({"simulate", "--scheme", "sbc", "--K", "24", "--N", "4", "--capacity",
                      "0.5", "--gamma", "0.8", "--mu", "1", "--epsilon", "1e-3", "--trials",
                      "25", "--seed", "7"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] ==
        "scheme,K,N,p,C,lambda,mu,gamma,epsilon,trials,mean_rate_EKtau,rate_KEtau,"
        "mean_Td_seconds,stderr_Td,fer,mean_tau");
  const auto f = fields(ls[1]);
  REQUIRE(f.size() == 16);
  CHECK(f[0] == "sbc");
  CHECK(f[1] == "24");
  CHECK(f[2] == "4");
  CHECK(std::stod(f[4]) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::stod(f[7]) == doctest::Approx(0.8));
  CHECK(f[9] == "25");
  // no locale-dependent separators: every field parses as plain decimal
  for (const auto& field : f)
    CHECK(field.find(';') == std::string::npos);
}

TEST_CASE("identical invocations produce identical bytes") {
  const std::vector<std::string> args = {"simulate", "--scheme", "sce",      "--K",    "20",
                                         "--p",      "0.1",      "--gamma",  "0.7",    "--mu",
                                         "1",        "--trials", "20",       "--seed", "3"};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("sweep emits the full cross product in capacity-major order") {
  const auto r = run({"sweep", "--scheme", "sce", "--K", "16", "--mu", "1", "--epsilon", "1e-2",
                      "--trials", "5", "--seed", "2", "--gammas", "0.5,0.75,1.0",
                      "--capacities", "0.4,0.7"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 7);  // header + 6 cells
  const auto first = fields(ls[1]);
  const auto last = fields(ls[6]);
  CHECK(std::stod(first[4]) == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(std::stod(first[7]) == doctest::Approx(0.5));
  CHECK(std::stod(last[4]) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(std::stod(last[7]) == doctest::Approx(1.0));
}

TEST_CASE("weight subcommand marks the argmax at P0 = 1/2") {
  const auto r = run({"weight", "--p", "0.1", "--grid-step", "0.01"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 102);  // header + 101 grid rows
  CHECK(ls[0] == "P0,expected_weight,d1,d2,is_argmax");
  int argmax_rows = 0;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = fields(ls[i]);
    REQUIRE(f.size() == 5);
    CHECK(std::stod(f[3]) < 0.0);  // d2 negative everywhere
    if (f[4] == "1") {
      ++argmax_rows;
      CHECK(std::stod(f[0]) == doctest::Approx(0.5));
      CHECK(std::stod(f[2]) == 0.0);  // d1 vanishes at the maximizer
    }
  }
  CHECK(argmax_rows == 1);
  // E[w] = 1 at the degenerate partitions
  CHECK(std::stod(fields(ls[1])[1]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::stod(fields(ls[101])[1]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weight rejects an out-of-range p") {
  CHECK(run({"weight", "--p", "0.5"}).code == 2);
  CHECK(run({"weight", "--p", "0.1", "--grid-step", "0"}).code == 2);
}

TEST_CASE("malformed numeric lists are usage errors") {
  CHECK(run({"bounds", "--K", "8", "--capacity", "0.5", "--gammas", "0.5,,1"}).code == 2);
  CHECK(run({"bounds", "--K", "8", "--capacity", "0.5", "--gammas", "abc"}).code == 2);
}
