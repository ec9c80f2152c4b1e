#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <set>
#include <sstream>

#include "acceptance.hpp"
#include "randqe/categoricity.hpp"
#include "randqe/qe.hpp"
#include "randqe/semantics.hpp"

namespace randqe::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read " + path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::ordered_json bracket_json(const Bracket& b) {
  nlohmann::ordered_json j;
  if (b.lo == b.hi) {
    j["value"] = to_string(b.lo);
  } else {
    j["lo"] = to_string(b.lo);
    j["hi"] = to_string(b.hi);
  }
  return j;
}

Report run_eval(const Command& cmd) {
  StructurePtr m = make_structure(cmd.structure);
  RFormulaPtr f = parse_rformula(cmd.formula, m->signature());
  Assignment a;
  for (const auto& b : cmd.assign) add_assignment(a, b, m);
  EvalOptions opts;
  opts.mesh = cmd.mesh;
  return {bracket_json(eval_rformula(*m, *f, a, opts))};
}

Report run_qe(const Command& cmd, bool apa) {
  Signature sig = cmd.signature_path.empty() ? make_structure(cmd.structure)->signature()
                                             : parse_signature_json(read_file(cmd.signature_path));
  RFormulaPtr f = parse_rformula(cmd.formula, sig);
  QEOptions opts;
  opts.max_m = cmd.max_m;
  const Rational eps = parse_rational(cmd.eps);
  QEResult r = apa ? qe_apa(f, eps, opts) : qe_randomization(f, eps, opts);
  Report out;
  out.body["formula"] = to_string(*r.formula);
  out.body["quantifier_free"] = quantifier_count(*r.formula) == 0;
  out.body["trace"] = r.trace;
  return out;
}

PointSpacePtr space_for(const Command& cmd, const std::string& descriptor) {
  if (cmd.flavor == "apa") return event_space(make_event_presentation(descriptor));
  StructurePtr m = make_structure(cmd.structure);
  return rv_space(descriptor == "std" ? induced_randomization_presentation(m) : make_rv_presentation(m, descriptor));
}

Report run_iso(const Command& cmd) {
  PointSpacePtr s1 = space_for(cmd, cmd.pres1), s2 = space_for(cmd, cmd.pres2);
  IsoOptions opts;
  opts.steps = cmd.steps;
  opts.k = cmd.prec;
  IsoOracle iso = back_and_forth(s1, s2, opts);

  // Distances between the first domain points and between their images; for
  // events also measures, as distances to the bottom event.
  const unsigned k = cmd.prec + 4;
  std::vector<Code> pts, img;
  for (std::uint64_t i = 0; i < 4; ++i)
    if (auto f = iso.map(s1->point(i), cmd.prec)) {
      pts.push_back(s1->point(i));
      img.push_back(*f);
    }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  Rational worst = 0;
  auto row = [&](const std::string& what, const Rational& v1, const Rational& v2) {
    worst = std::max(worst, abs(Rational(v1 - v2)));
    nlohmann::ordered_json j;
    j["quantity"] = what;
    j["first"] = to_string(v1);
    j["second"] = to_string(v2);
    rows.push_back(j);
  };
  auto d1 = [&](const Code& a, const Code& b) { return s1->dist(a, b, k).mid(); };
  auto d2 = [&](const Code& a, const Code& b) { return s2->dist(a, b, k).mid(); };
  const bool apa = cmd.flavor == "apa";
  for (std::size_t a = 0; a < pts.size(); ++a) {
    const std::string ta = s1->point_text(pts[a]);
    if (apa) row("mu(" + ta + ")", d1(pts[a], Code(0)), d2(img[a], Code(0)));
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const std::string tb = s1->point_text(pts[b]);
      row("d(" + ta + ", " + tb + ")", d1(pts[a], pts[b]), d2(img[a], img[b]));
      if (apa) {
        // mu(a meet b) = (mu(a) + mu(b) - d(a, b)) / 2
        auto meet = [](const Rational& ma, const Rational& mb, const Rational& d) { return Rational((ma + mb - d) / 2); };
        row("mu(" + ta + " meet " + tb + ")", meet(d1(pts[a], Code(0)), d1(pts[b], Code(0)), d1(pts[a], pts[b])),
            meet(d2(img[a], Code(0)), d2(img[b], Code(0)), d2(img[a], img[b])));
      } else {
        // mu[[X = Y]] = 1 - d(X, Y)
        row("mu[[" + ta + " = " + tb + "]]", 1 - d1(pts[a], pts[b]), 1 - d2(img[a], img[b]));
      }
    }
  }
  Report out;
  out.body["log"] = iso.log();
  out.body["preservation"] = rows;
  out.body["max_error"] = to_string(worst);
  return out;
}

Report run_check(const Command& cmd) {
  std::set<int> only(cmd.criteria.begin(), cmd.criteria.end());
  Report out;
  bool pass = true;
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& c : acceptance::criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    acceptance::Result r = acceptance::run(c);
    pass = pass && r.pass;
    results.push_back(acceptance::to_json(r, cmd.timing));
  }
  out.body["pass"] = pass;
  out.body["criteria"] = results;
  if (!pass) out.exit_code = kSuiteFailure;
  return out;
}

}  // namespace

void validate(const Command& cmd) {
  static const std::set<std::string> subs{"eval", "qe", "qe-apa", "iso", "check"};
  if (!subs.count(cmd.subcommand)) throw PreconditionError("unknown subcommand '" + cmd.subcommand + "'");
  if ((cmd.subcommand == "eval" || cmd.subcommand == "qe" || cmd.subcommand == "qe-apa") && cmd.formula.empty())
    throw PreconditionError(cmd.subcommand + ": --formula is required");
  if (cmd.subcommand == "qe" || cmd.subcommand == "qe-apa") {
    if (parse_rational(cmd.eps) <= 0) throw PreconditionError("--eps must be positive");
  }
  if (cmd.subcommand == "eval" && cmd.mesh == 0) throw PreconditionError("--mesh must be positive");
  if (cmd.subcommand == "iso") {
    if (cmd.flavor != "apa" && cmd.flavor != "rand") throw PreconditionError("--flavor must be apa or rand");
    if (cmd.steps == 0) throw PreconditionError("--steps must be positive");
    if (cmd.prec < 2 || cmd.prec > 16) throw PreconditionError("--prec must be between 2 and 16");
  }
  for (int c : cmd.criteria)
    if (c < 1 || c > static_cast<int>(acceptance::criteria().size()))
      throw PreconditionError("no criterion " + std::to_string(c));
}

Report execute(const Command& cmd) {
  if (cmd.subcommand == "eval") return run_eval(cmd);
  if (cmd.subcommand == "qe") return run_qe(cmd, false);
  if (cmd.subcommand == "qe-apa") return run_qe(cmd, true);
  if (cmd.subcommand == "iso") return run_iso(cmd);
  return run_check(cmd);
}

Report error_report(const std::exception& e) {
  Report r;
  r.exit_code = kUsage;
  std::string kind = "error";
  if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
    kind = "parse";
    r.body["position"] = p->position();
  } else if (dynamic_cast<const PreconditionError*>(&e)) {
    kind = "validation";
  } else if (dynamic_cast<const ResourceCap*>(&e)) {
    kind = "resource_cap";
    r.exit_code = kResourceCap;
  }
  nlohmann::ordered_json body;
  body["error"] = kind;
  body["message"] = e.what();
  if (r.body.contains("position")) body["position"] = r.body["position"];
  r.body = body;
  return r;
}

std::string emit_report(const Report& r, Format format) {
  if (format == Format::Json) return r.body.dump();
  const auto& b = r.body;
  if (b.contains("value") && b.size() == 1) return b["value"].get<std::string>();
  if (b.contains("lo") && b.contains("hi") && b.size() == 2)
    return "[" + b["lo"].get<std::string>() + ", " + b["hi"].get<std::string>() + "]";
  if (b.contains("criteria")) {
    std::string s;
    for (const auto& c : b["criteria"]) {
      s += std::string(c["pass"].get<bool>() ? "PASS" : "FAIL") + " criterion " + std::to_string(c["id"].get<int>()) +
           ": " + c["title"].get<std::string>() + "\n";
      for (const auto& f : c["failures"]) s += "    " + f.get<std::string>() + "\n";
    }
    return s + (b["pass"].get<bool>() ? "all criteria pass" : "some criteria fail");
  }
  return b.dump(2);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Command cmd;
  std::string format = "json";
  CLI::App app{"Quantifier elimination and categoricity for randomizations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));

  auto* eval = app.add_subcommand("eval", "Evaluate a formula at random variables and events");
  eval->add_option("--structure", cmd.structure, "Structure descriptor");
  eval->add_option("--formula", cmd.formula, "Formula in the s-expression grammar")->required();
  eval->add_option("--assign", cmd.assign, "NAME=literal; repeatable")->allow_extra_args(false);
  eval->add_option("--mesh", cmd.mesh, "Mass grid for quantifier search");

  for (const char* name : {"qe", "qe-apa"}) {
    auto* qe = app.add_subcommand(name, std::string(name) == "qe" ? "Quantifier elimination for randomizations"
                                                                  : "Quantifier elimination for atomless algebras");
    qe->add_option("--structure", cmd.structure, "Structure descriptor supplying the signature");
    qe->add_option("--structure-signature", cmd.signature_path, "Signature file (JSON)");
    qe->add_option("--formula", cmd.formula, "Formula in the s-expression grammar")->required();
    qe->add_option("--eps", cmd.eps, "Tolerance, an exact rational");
    qe->add_option("--max-m", cmd.max_m, "Largest number of classical formulas per random-variable quantifier");
  }

  auto* iso = app.add_subcommand("iso", "Back-and-forth between two presentations");
  iso->add_option("--flavor", cmd.flavor, "apa or rand");
  iso->add_option("--pres1", cmd.pres1, "First presentation");
  iso->add_option("--pres2", cmd.pres2, "Second presentation");
  iso->add_option("--structure", cmd.structure, "Structure for the rand flavor");
  iso->add_option("--steps", cmd.steps, "Number of back-and-forth steps");
  iso->add_option("--prec", cmd.prec, "Precision exponent k");

  auto* check = app.add_subcommand("check", "Run the acceptance suite");
  check->add_option("--criterion", cmd.criteria, "Criterion number; repeatable")->allow_extra_args(false);
  check->add_flag("--timing", cmd.timing, "Include timings in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  cmd.subcommand = app.get_subcommands().front()->get_name();
  cmd.format = format == "text" ? Format::Text : Format::Json;

  Report r;
  try {
    validate(cmd);
    r = execute(cmd);
  } catch (const std::exception& e) {
    r = error_report(e);
    err << "error: " << e.what() << "\n";
  }
  out << emit_report(r, cmd.format) << "\n";
  return r.exit_code;
}

}  // namespace randqe::cli
