// gftlab — exact evaluation and property checking for two-sided matching
// markets: instance generation, mechanism evaluation, property suites, and
// lambda sweeps with machine-readable reports.
//
// exit codes: 0 all pass, 1 property failure, 2 usage error, 3 capability
// error (a requested exact computation needs an enumerable instance).

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gftlab/errors.hpp"
#include "gftlab/verify.hpp"

using nlohmann::json;
using namespace gftlab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCapability = 3;

std::string hash_tag(const MarketInstance& m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(m.hash()));
  return buf;
}

// GFTLAB_THREADS caps the worker count; the exact engine keeps a single
// deterministic worker, which satisfies every positive cap
void validate_threads_env() {
  const char* s = std::getenv("GFTLAB_THREADS");
  if (!s) return;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 1)
    throw ValidationError(std::string("GFTLAB_THREADS must be a positive "
                                      "integer, got \"") +
                          s + "\"");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << text;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// the side whose profit the mechanism is built to harvest (plus any budget
// surplus, which the operator also keeps)
Rat side_profit(MechanismId id, const Metrics& mm) {
  switch (id) {
    case MechanismId::Gsom:
    case MechanismId::GsomBic:
    case MechanismId::MaSellerRun:
      return Rat(mm.pi_sellers + mm.budget);
    case MechanismId::Gbom:
    case MechanismId::GbomBic:
    case MechanismId::MaBuyerRun:
      return Rat(mm.pi_buyers + mm.budget);
    case MechanismId::Randomized:
      break;
  }
  throw ContractError("randomized profit is the mixture of its branches");
}

json metrics_to_json(const Metrics& mm) {
  return {{"gft", to_double(mm.gft)},
          {"gft_exact", rat_str(mm.gft)},
          {"pi_buyers", to_double(mm.pi_buyers)},
          {"pi_buyers_exact", rat_str(mm.pi_buyers)},
          {"pi_sellers", to_double(mm.pi_sellers)},
          {"pi_sellers_exact", rat_str(mm.pi_sellers)},
          {"budget", to_double(mm.budget)},
          {"budget_exact", rat_str(mm.budget)}};
}

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  int buyers = 2;
  int sellers = 2;
  int atoms = 3;
  int density = 75;
  int grid_ticks = 10;
  std::string family = "all";
  int k = 1;
  bool single_edge = false;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  GenSpec spec;
  spec.buyers = a.buyers;
  spec.sellers = a.sellers;
  spec.atoms = a.atoms;
  spec.density_pct = a.density;
  spec.grid_ticks = a.grid_ticks;
  spec.single_edge = a.single_edge;
  if (a.family == "all") {
    spec.family = 0;
  } else if (a.family == "max_trades") {
    if (a.k < 1) throw ValidationError("--k must be at least 1");
    spec.family = a.k;
  } else if (a.family == "mixed") {
    spec.family = -1;
  } else {
    throw ValidationError("--family must be all, max_trades, or mixed");
  }
  std::mt19937_64 rng(a.seed);
  const MarketInstance m = random_instance(rng, spec);
  write_text(a.out, instance_to_json(m).dump(2) + "\n");
  return kExitPass;
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string instance;
  std::vector<std::string> mechanisms;
  double lambda = 0.317844;
  bool exact = false;
  std::uint64_t mc = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
};

Rat lambda_rat(double lambda) {
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw ValidationError("--lambda must lie strictly between 0 and 1");
  return rat_from_double(lambda);
}

int cmd_eval(const EvalArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const MarketInstance m = load_instance(a.instance);
  MechParams prm;
  prm.lambda = lambda_rat(a.lambda);
  std::vector<MechanismId> ids;
  for (const std::string& name : a.mechanisms)
    ids.push_back(mechanism_from_name(name));
  if (ids.empty())
    ids = {MechanismId::Gsom, MechanismId::Gbom};
  const bool use_mc = a.mc > 0;

  json rep;
  rep["instance"] = a.instance;
  rep["instance_hash"] = hash_tag(m);
  rep["mode"] = use_mc ? "mc" : "exact";
  json mechs = json::object();
  json metrics = json::object();

  if (!use_mc) {
    for (const MechanismId id : ids) {
      const Metrics mm = expected_metrics(m, id, prm);
      json one = metrics_to_json(mm);
      if (id == MechanismId::Randomized) {
        const Metrics gs = expected_metrics(m, MechanismId::Gsom, prm);
        const Metrics gb = expected_metrics(m, MechanismId::Gbom, prm);
        const Rat profit =
            Rat(side_profit(MechanismId::Gsom, gs) +
                side_profit(MechanismId::Gbom, gb)) /
            2;
        one["profit"] = to_double(profit);
        one["profit_exact"] = rat_str(profit);
      } else {
        one["profit"] = to_double(side_profit(id, mm));
        one["profit_exact"] = rat_str(side_profit(id, mm));
      }
      mechs[mechanism_name(id)] = one;
    }
    const ProfitReport pr = profit_report(m);
    metrics["gft_star"] = to_double(pr.gft_star);
    metrics["gft_star_exact"] = rat_str(pr.gft_star);
    metrics["pi_s_gsom"] = to_double(pr.pi_s_gsom);
    metrics["pi_b_gbom"] = to_double(pr.pi_b_gbom);
    metrics["ratio"] = pr.ratio ? json(to_double(*pr.ratio)) : json(nullptr);
  } else {
    const auto n = static_cast<std::size_t>(a.mc);
    auto estimate = [&](MechanismId id,
                        const std::function<Rat(const Metrics&)>& pick) {
      return mc_expectation(m, a.seed, n, [&](const Profile& p) {
        if (id == MechanismId::Randomized) {
          const Reports r = truthful(p);
          const Metrics gs = realized_metrics(p, run_gsom(m, r));
          const Metrics gb = realized_metrics(p, run_gbom(m, r));
          return Rat((pick(gs) + pick(gb)) / 2);
        }
        return pick(realized_metrics(p, run_mechanism(m, id, truthful(p), prm)));
      });
    };
    for (const MechanismId id : ids) {
      json one;
      const auto add = [&](const char* key,
                           const std::function<Rat(const Metrics&)>& pick) {
        const McEstimate e = estimate(id, pick);
        one[key] = e.mean;
        one[std::string(key) + "_se"] = e.std_error;
      };
      add("gft", [](const Metrics& mm) { return mm.gft; });
      add("pi_buyers", [](const Metrics& mm) { return mm.pi_buyers; });
      add("pi_sellers", [](const Metrics& mm) { return mm.pi_sellers; });
      add("budget", [](const Metrics& mm) { return mm.budget; });
      mechs[mechanism_name(id)] = one;
    }
    const McEstimate star = first_best_gft_mc(m, a.seed, n);
    const McEstimate ps = estimate(MechanismId::Gsom, [](const Metrics& mm) {
      return Rat(mm.pi_sellers + mm.budget);
    });
    const McEstimate pb = estimate(MechanismId::Gbom, [](const Metrics& mm) {
      return Rat(mm.pi_buyers + mm.budget);
    });
    metrics["gft_star"] = star.mean;
    metrics["gft_star_se"] = star.std_error;
    metrics["pi_s_gsom"] = ps.mean;
    metrics["pi_b_gbom"] = pb.mean;
    metrics["ratio"] = star.mean > 0
                           ? json((ps.mean + pb.mean) / 2 / star.mean)
                           : json(nullptr);
    rep["samples"] = a.mc;
  }
  rep["metrics"] = metrics;
  rep["mechanisms"] = mechs;
  rep["runtime_seconds"] = elapsed_since(t0);

  if (a.format == "csv") {
    std::string csv = "instance_hash,mechanism,metric,value\n";
    const std::string tag = rep["instance_hash"].get<std::string>();
    for (const auto& [key, val] : metrics.items()) {
      if (key.size() > 6 && key.substr(key.size() - 6) == "_exact") continue;
      csv += tag + ",market," + key + "," +
             (val.is_null() ? "" : std::to_string(val.get<double>())) + "\n";
    }
    for (const auto& [name, fields] : mechs.items())
      for (const auto& [key, val] : fields.items()) {
        if (key.size() > 6 && key.substr(key.size() - 6) == "_exact") continue;
        csv += tag + "," + name + "," + key + "," +
               std::to_string(val.get<double>()) + "\n";
      }
    write_text(a.out, csv);
  } else {
    write_text(a.out, rep.dump(2) + "\n");
  }
  return kExitPass;
}

// -------------------------------------------------------------- check ----

struct CheckArgs {
  bool oracle_suite = false;
  bool control_fixture = false;
  bool random = false;
  bool single_edge = false;
  std::string instance;
  int count = 200;
  std::uint64_t seed = 1;
  double lambda = 0.317844;
  std::optional<double> tol;
  std::string out;
  std::string format = "json";
};

// pins one exact payment against its published value
CheckResult pin(const std::string& name, const Rat& got, const Rat& want) {
  CheckResult c{name};
  c.checks = 1;
  c.worst = to_double(Rat(-(got > want ? got - want : want - got)));
  c.pass = got == want;
  if (!c.pass)
    c.witness = name + ": got " + rat_str(got) + ", want " + rat_str(want);
  return c;
}

// built-in instances with hand-derived published values, plus the full
// property suite on the enumerable ones
std::vector<CheckResult> oracle_suite_checks(const Rat& lambda) {
  std::map<std::string, CheckResult> acc;

  // one buyer ~ U(0,1) against point sellers at 0 and 1/2; at the realized
  // bid 1 the expectation-payment optimum charges the buyer 1/2, pays the
  // cheap seller 3/8, and retains the strictly positive difference: budget
  // balance holds in the weak sense and provably not in the strong sense
  const MarketInstance fixture(
      {Distribution::uniform(0, 1)},
      {Distribution::discrete({{0, 1}}),
       Distribution::discrete({{Rat(1, 2), 1}})},
      {{0, 0}, {0, 1}}, {});
  Reports r;
  r.values = {1};
  r.costs = {0, Rat(1, 2)};
  const Outcome o = run_gsom_bic(fixture, r);
  CheckResult alloc{"oracle.exclusive_pair_allocation"};
  alloc.checks = 1;
  alloc.pass = o.trades.edges == std::vector<Edge>{{0, 0}};
  alloc.worst = alloc.pass ? 0.0 : -1.0;
  if (!alloc.pass) alloc.witness = "exclusive-pair fixture traded the wrong edge";
  merge(acc, alloc);
  merge(acc, pin("oracle.exclusive_pair_buyer_price", o.buyer_payments[0], Rat(1, 2)));
  merge(acc,
        pin("oracle.exclusive_pair_seller_price", o.seller_payments[0], Rat(3, 8)));
  CheckResult bb{"oracle.exclusive_pair_weak_not_strong_bb"};
  bb.checks = 1;
  bb.worst = to_double(outcome_budget(o));
  bb.pass = outcome_budget(o) > 0;
  if (!bb.pass)
    bb.witness = "exclusive-pair budget is " + rat_str(outcome_budget(o)) +
                 ", expected a strictly positive surplus";
  merge(acc, bb);

  // symmetric single edge: U(0,1) buyer against a free seller splits the
  // unit surplus evenly and balances exactly
  const MarketInstance sym({Distribution::uniform(0, 1)},
                           {Distribution::discrete({{0, 1}})}, {{0, 0}}, {});
  Reports rs;
  rs.values = {1};
  rs.costs = {0};
  const Outcome os = run_gsom_bic(sym, rs);
  merge(acc, pin("oracle.symmetric_buyer_price", os.buyer_payments[0],
                 Rat(1, 2)));
  merge(acc, pin("oracle.symmetric_seller_price", os.seller_payments[0],
                 Rat(1, 2)));

  // two-point bilateral: first best 5/4, each one-sided optimum harvests 1,
  // so the guaranteed mixture sits at ratio 4/5
  const MarketInstance bi(
      {Distribution::discrete({{1, Rat(1, 2)}, {3, Rat(1, 2)}})},
      {Distribution::discrete({{0, Rat(1, 2)}, {2, Rat(1, 2)}})}, {{0, 0}},
      {});
  const ProfitReport pr = profit_report(bi);
  merge(acc, pin("oracle.bilateral_gft_star", pr.gft_star, Rat(5, 4)));
  CheckResult ratio{"oracle.bilateral_ratio"};
  ratio.checks = 1;
  ratio.pass = pr.ratio && *pr.ratio == Rat(4, 5);
  ratio.worst = ratio.pass ? 0.0 : -1.0;
  if (!ratio.pass) ratio.witness = "bilateral ratio is not 4/5";
  merge(acc, ratio);
  merge(acc, check_instance(bi, lambda));

  // a competitive market exercising both virtual transforms at once
  const MarketInstance comp(
      {Distribution::discrete({{1, Rat(1, 2)}, {3, Rat(1, 2)}}),
       Distribution::discrete({{2, 1}})},
      {Distribution::discrete({{0, Rat(1, 2)}, {2, Rat(1, 2)}}),
       Distribution::discrete({{1, 1}})},
      {{0, 0}, {0, 1}, {1, 0}}, {});
  merge(acc, check_instance(comp, lambda));

  std::vector<CheckResult> out;
  out.reserve(acc.size());
  for (auto& [name, c] : acc) out.push_back(std::move(c));
  return out;
}

int report_checks(const CheckArgs& a, const std::vector<CheckResult>& checks,
                  long long instances, double runtime,
                  const std::string& instance_hash) {
  bool all = true;
  json rows = json::array();
  std::string csv = "name,pass,checks,worst\n";
  for (const CheckResult& c : checks) {
    const bool pass = a.tol ? c.worst >= -*a.tol : c.pass;
    all = all && pass;
    std::printf("  %s  %-34s comparisons=%-9lld worst=%+.3e\n",
                pass ? "pass" : "FAIL", c.name.c_str(),
                static_cast<long long>(c.checks), c.worst);
    if (!pass && !c.witness.empty())
      std::printf("        %s\n", c.witness.c_str());
    json row = {{"name", c.name},
                {"pass", pass},
                {"checks", c.checks},
                {"worst", c.worst}};
    if (!pass && !c.witness.empty()) row["witness"] = c.witness;
    rows.push_back(row);
    csv += c.name + "," + (pass ? "true" : "false") + "," +
           std::to_string(c.checks) + "," + std::to_string(c.worst) + "\n";
  }
  std::printf("%s: %zu checks, %lld instances, %.2f s\n",
              all ? "all pass" : "FAILURES PRESENT", checks.size(), instances,
              runtime);
  if (!a.out.empty()) {
    if (a.format == "csv") {
      write_text(a.out, csv);
    } else {
      json rep = {{"checks", rows},
                  {"instances", instances},
                  {"runtime_seconds", runtime},
                  {"all_pass", all}};
      if (!instance_hash.empty()) rep["instance_hash"] = instance_hash;
      write_text(a.out, rep.dump(2) + "\n");
    }
  }
  return all ? kExitPass : kExitFail;
}

int cmd_check(const CheckArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Rat lambda = lambda_rat(a.lambda);
  const int modes = int(a.oracle_suite) + int(a.control_fixture) +
                    int(a.random) + int(!a.instance.empty());
  if (modes != 1)
    throw ValidationError(
        "pick exactly one of --oracle-suite, --random, --instance, "
        "--control-fixture");

  if (a.oracle_suite)
    return report_checks(a, oracle_suite_checks(lambda), 4, elapsed_since(t0),
                         "");

  if (a.control_fixture) {
    // negative control: a first-price rule is knowingly manipulable; the
    // truthfulness audit must convict it, so this command exits nonzero
    // exactly when the audit still works
    const MarketInstance m(
        {Distribution::discrete({{1, Rat(1, 2)}, {3, Rat(1, 2)}})},
        {Distribution::discrete({{0, 1}})}, {{0, 0}}, {});
    const CheckResult raw = check_dsic_by_rerun(
        m, run_first_price, Side::Buyer, "control.first_price_dsic");
    return report_checks(a, {raw}, 1, elapsed_since(t0), hash_tag(m));
  }

  if (!a.instance.empty()) {
    const MarketInstance m = load_instance(a.instance);
    return report_checks(a, check_instance(m, lambda), 1, elapsed_since(t0),
                         hash_tag(m));
  }

  GenSpec spec;
  spec.single_edge = a.single_edge;
  const SuiteReport rep = run_random_suite(spec, a.count, a.seed, lambda);
  std::vector<CheckResult> checks;
  checks.reserve(rep.checks.size());
  for (const auto& [name, c] : rep.checks) checks.push_back(c);
  return report_checks(a, checks, rep.instances, rep.total_seconds, "");
}

// -------------------------------------------------------------- sweep ----

struct SweepArgs {
  std::string instance;
  std::string out;
  std::string format = "json";
};

int cmd_sweep(const SweepArgs& a) {
  const MarketInstance m = load_instance(a.instance);
  std::vector<Rat> lambdas;
  for (int k = 1; k <= 19; ++k) lambdas.push_back(Rat(k, 20));
  lambdas.push_back(Rat(317844, 1000000));  // the tuned operating point
  std::sort(lambdas.begin(), lambdas.end());

  json rows = json::array();
  std::string csv = "lambda,mechanism,metric,value\n";
  std::optional<Rat> best_profit;
  Rat best_lambda = 0;
  for (const Rat& lam : lambdas) {
    MechParams prm;
    prm.lambda = lam;
    const Metrics ms = expected_metrics(m, MechanismId::MaSellerRun, prm);
    const Metrics mb = expected_metrics(m, MechanismId::MaBuyerRun, prm);
    const Rat ps = side_profit(MechanismId::MaSellerRun, ms);
    const Rat pb = side_profit(MechanismId::MaBuyerRun, mb);
    if (!best_profit || ps > *best_profit) {
      best_profit = ps;
      best_lambda = lam;
    }
    json row = {{"lambda", to_double(lam)},
                {"lambda_exact", rat_str(lam)},
                {"ma_s", metrics_to_json(ms)},
                {"ma_b", metrics_to_json(mb)}};
    row["ma_s"]["profit"] = to_double(ps);
    row["ma_b"]["profit"] = to_double(pb);
    rows.push_back(row);
    for (const auto& [mech, mm] :
         {std::pair<const char*, const Metrics*>{"ma_s", &ms},
          std::pair<const char*, const Metrics*>{"ma_b", &mb}}) {
      csv += rat_str(lam) + "," + mech + ",gft," +
             std::to_string(to_double(mm->gft)) + "\n";
      csv += rat_str(lam) + "," + mech + ",profit," +
             std::to_string(to_double(
                 mech == std::string("ma_s")
                     ? Rat(mm->pi_sellers + mm->budget)
                     : Rat(mm->pi_buyers + mm->budget))) +
             "\n";
    }
  }
  if (a.format == "csv") {
    write_text(a.out, csv);
  } else {
    json rep = {{"instance", a.instance},
                {"instance_hash", hash_tag(m)},
                {"rows", rows},
                {"best_seller_run",
                 {{"lambda", to_double(best_lambda)},
                  {"lambda_exact", rat_str(best_lambda)},
                  {"profit", best_profit ? to_double(*best_profit) : 0.0}}}};
    write_text(a.out, rep.dump(2) + "\n");
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact gains-from-trade mechanisms on two-sided matching "
               "markets"};
  app.require_subcommand(1);

  GenArgs ga;
  CLI::App* gen = app.add_subcommand("gen", "generate a random instance");
  gen->add_option("--buyers", ga.buyers, "number of buyers")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  gen->add_option("--sellers", ga.sellers, "number of sellers")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  gen->add_option("--atoms", ga.atoms, "atoms per law")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  gen->add_option("--density", ga.density, "edge retention percentage")
      ->check(CLI::Range(1, 100))
      ->capture_default_str();
  gen->add_option("--grid-ticks", ga.grid_ticks,
                  "atom locations k/2 for k in 0..ticks")
      ->check(CLI::Range(1, 40))
      ->capture_default_str();
  gen->add_option("--family", ga.family, "all, max_trades, or mixed")
      ->capture_default_str();
  gen->add_option("--k", ga.k, "trade cap for --family max_trades")
      ->capture_default_str();
  gen->add_flag("--single-edge", ga.single_edge,
                "one buyer, one seller, one edge");
  gen->add_option("--seed", ga.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", ga.out, "output path (default stdout)");

  EvalArgs ea;
  CLI::App* ev = app.add_subcommand("eval", "evaluate mechanisms");
  ev->add_option("--instance", ea.instance, "instance JSON path")->required();
  ev->add_option("--mechanism", ea.mechanisms,
                 "gsom, gbom, gsom_bic, gbom_bic, ma_s, ma_b, randomized "
                 "(repeatable; default gsom gbom)");
  ev->add_option("--lambda", ea.lambda, "multi-quantile parameter")
      ->capture_default_str();
  auto* exact_flag = ev->add_flag("--exact", ea.exact,
                                  "exact expectations (default)");
  ev->add_option("--mc", ea.mc, "Monte Carlo with this many samples")
      ->excludes(exact_flag);
  ev->add_option("--seed", ea.seed, "sampling seed for --mc")
      ->capture_default_str();
  ev->add_option("--out", ea.out, "report path (default stdout)");
  ev->add_option("--format", ea.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  CheckArgs ca;
  CLI::App* ch = app.add_subcommand("check", "run property suites");
  ch->add_flag("--oracle-suite", ca.oracle_suite,
               "built-in instances with published values");
  ch->add_flag("--random", ca.random, "seeded random suite");
  ch->add_flag("--single-edge", ca.single_edge,
               "restrict --random to single-edge markets");
  ch->add_option("--instance", ca.instance, "check one instance file");
  ch->add_flag("--control-fixture", ca.control_fixture,
               "audit a knowingly manipulable rule; exits 1 when the audit "
               "still catches it");
  ch->add_option("--count", ca.count, "instances for --random")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  ch->add_option("--seed", ca.seed, "suite seed")->capture_default_str();
  ch->add_option("--lambda", ca.lambda, "multi-quantile parameter")
      ->capture_default_str();
  double tol_opt = 0;
  auto* tol_flag =
      ch->add_option("--tol", tol_opt, "override the pass tolerance");
  ch->add_option("--out", ca.out, "machine-readable report path");
  ch->add_option("--format", ca.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  SweepArgs sa;
  CLI::App* sw = app.add_subcommand("sweep", "sweep the lambda grid");
  sw->add_option("--instance", sa.instance, "instance JSON path")->required();
  sw->add_option("--out", sa.out, "report path (default stdout)");
  sw->add_option("--format", sa.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    validate_threads_env();
    if (*tol_flag) ca.tol = tol_opt;
    if (app.got_subcommand(gen)) return cmd_gen(ga);
    if (app.got_subcommand(ev)) return cmd_eval(ea);
    if (app.got_subcommand(ch)) return cmd_check(ca);
    if (app.got_subcommand(sw)) return cmd_sweep(sa);
    throw ContractError("unreachable: subcommand required");
  } catch (const CapabilityError& e) {
    std::cerr << "capability error: " << e.what() << "\n";
    return kExitCapability;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
