#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "randqe/rational.hpp"

using namespace randqe;
using nlohmann::ordered_json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "randqe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string data(const char* name) { return std::string(RANDQE_TEST_DATA) + "/" + name; }

}  // namespace

TEST_CASE("eval: exact value report") {
  Run r = run({"eval", "--structure", "pureset", "--formula", "(mu (ev \"(= x y)\" X Y))", "--assign",
               "X={e0:[0,1/2); e1:[1/2,1)}", "--assign", "Y={e0:[0,1)}"});
  CHECK(r.code == 0);
  CHECK(r.out == "{\"value\":\"1/2\"}\n");

  Run t = run({"eval", "--formula", "(half (mu A))", "--assign", "A=[0,1/3)", "--format", "text"});
  CHECK(t.out == "1/6\n");
}

TEST_CASE("report formats") {
  cli::Report r;
  r.body["lo"] = "0";
  r.body["hi"] = "1/64";
  CHECK(cli::emit_report(r, cli::Format::Json) == R"({"lo":"0","hi":"1/64"})");
  CHECK(cli::emit_report(r, cli::Format::Text) == "[0, 1/64]");

  cli::Report suite;
  suite.body["pass"] = false;
  suite.body["criteria"] = ordered_json::array(
      {ordered_json{{"id", 4}, {"title", "near-realization repair"}, {"pass", false}, {"failures", {"instance 3"}}}});
  std::string text = cli::emit_report(suite, cli::Format::Text);
  CHECK(text.find("FAIL criterion 4") != std::string::npos);
  CHECK(text.find("    instance 3") != std::string::npos);
}

TEST_CASE("qe against a signature file, deterministic") {
  std::vector<std::string> args{"qe", "--structure-signature", data("graph.sig"), "--formula",
                                "(inf (K X) (mu (ev \"(= x y)\" X Y)))", "--eps", "1/16"};
  Run a = run(args), b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  auto j = ordered_json::parse(a.out);
  CHECK(j["quantifier_free"] == true);
  CHECK(j["trace"]["epsilon"] == "1/16");
  // Lossless round trip of the report.
  CHECK(j.dump() + "\n" == a.out);

  Run apa = run({"qe-apa", "--formula", "(inf (B x) (mu (join (meet x (compl A)) (meet (compl x) A))))", "--eps", "1/32"});
  CHECK(apa.code == 0);
  CHECK(ordered_json::parse(apa.out)["quantifier_free"] == true);
}

TEST_CASE("iso: step log and preservation table") {
  Run r = run({"iso", "--flavor", "apa", "--pres1", "std", "--pres2", "rot:1/3", "--steps", "8", "--prec", "6"});
  REQUIRE(r.code == 0);
  auto j = ordered_json::parse(r.out);
  CHECK(j["log"]["steps"].size() == 8);
  CHECK(parse_rational(j["max_error"].get<std::string>()) <= pow2_neg(4));
  CHECK(j["preservation"].size() > 0);

  Run rand = run({"iso", "--flavor", "rand", "--structure", "pureset", "--pres2", "digitperm", "--steps", "4"});
  REQUIRE(rand.code == 0);
  CHECK(parse_rational(ordered_json::parse(rand.out)["max_error"].get<std::string>()) <= pow2_neg(4));
}

TEST_CASE("check runs selected criteria") {
  Run r = run({"check", "--criterion", "1", "--criterion", "4"});
  CHECK(r.code == 0);
  auto j = ordered_json::parse(r.out);
  CHECK(j["pass"] == true);
  CHECK(j["criteria"].size() == 2);
  CHECK(!j["criteria"][0].contains("seconds"));
}

TEST_CASE("usage errors and resource caps") {
  Run parse = run({"eval", "--formula", "(mu (meet X"});
  CHECK(parse.code == 2);
  auto j = ordered_json::parse(parse.out);
  CHECK(j["error"] == "parse");
  CHECK(j.contains("position"));

  CHECK(run({"qe", "--formula", "(inf (K X) (mu (ev \"(= x y)\" X Y)))", "--eps", "0.1"}).code == 2);
  CHECK(run({"iso", "--flavor", "classical"}).code == 2);
  CHECK(run({"check", "--criterion", "11"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);

  Run cap = run({"qe", "--formula", "(inf (K X) (min (mu (ev \"(= x y)\" X Y)) (mu (ev \"(= x z)\" X Z))))",
                 "--max-m", "1"});
  CHECK(cap.code == 3);
  CHECK(ordered_json::parse(cap.out)["error"] == "resource_cap");
}
