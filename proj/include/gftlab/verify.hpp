#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gftlab/generator.hpp"
#include "gftlab/mechanisms.hpp"

namespace gftlab {

// slack allowed by every inequality check; equality checks that are exact by
// construction use zero instead
inline const Rat kCheckTol = Rat(1, 1000000000);
// guaranteed fraction of the first best captured by the mechanism pairs
inline const Rat kProfitFloor = Rat(20, 63);

// money flows of one outcome at one realized type profile
struct Metrics {
  Rat gft = 0;         // gains from trade of the allocation
  Rat pi_buyers = 0;   // total buyer surplus, payments deducted
  Rat pi_sellers = 0;  // total seller surplus, costs deducted
  Rat budget = 0;      // money collected minus money disbursed
};

Metrics realized_metrics(const Profile& p, const Outcome& o);

// truthful-play expectation over an enumerable instance; Randomized is the
// exact fair-coin mixture of its two branches
Metrics expected_metrics(const MarketInstance& m, MechanismId id,
                         const MechParams& params = {});

// E[max over the family of the realized surplus], exact
Rat first_best_gft(const MarketInstance& m);

struct McEstimate {
  double mean = 0;
  double std_error = 0;
  std::size_t samples = 0;
};

// Monte Carlo expectation of a per-profile statistic under truthful play
McEstimate mc_expectation(const MarketInstance& m, std::uint64_t seed,
                          std::size_t samples,
                          const std::function<Rat(const Profile&)>& realized);
McEstimate first_best_gft_mc(const MarketInstance& m, std::uint64_t seed,
                             std::size_t samples);

// one named property aggregated over many comparisons. `worst` is the
// smallest slack seen (negative means a violation); `witness` replays the
// first failure.
struct CheckResult {
  CheckResult() = default;
  explicit CheckResult(std::string n) : name(std::move(n)) {}

  std::string name;
  bool pass = true;
  double worst = std::numeric_limits<double>::infinity();
  long long checks = 0;
  std::string witness;
};

// folds `piece` into the entry of the same name, keeping the first witness
void merge(std::map<std::string, CheckResult>& into, const CheckResult& piece);
void merge(std::map<std::string, CheckResult>& into,
           const std::vector<CheckResult>& pieces);

// deviation reports probed by the incentive audits: every support point of
// every law, the uniform endpoints and midpoints, zero, one point above the
// top, and the midpoints between all of those
std::vector<Rat> deviation_grid(const MarketInstance& m);

// one-sided optimum (`Gsom` or `Gbom`): both sides dominant-strategy
// truthful, ex-post IR, and weakly budget balanced in expectation. deviation
// utilities are evaluated on the factored deviation slice, whose agreement
// with whole-market reruns is itself audited by the structural-property and
// bisection checks; IR and the budget come from actual outcomes.
std::vector<CheckResult> check_one_sided(const MarketInstance& m,
                                         MechanismId id);

// expectation-payment variant (`GsomBic` or `GbomBic`): retained side stays
// dominant-strategy truthful, the other side is truthful in expectation
// against the full deviation grid, outcomes are ex-post IR and ex-post
// weakly budget balanced, the interim payment of every support report
// matches the one-sided mechanism, and the audit's payment model agrees
// with the payments the mechanism actually made.
std::vector<CheckResult> check_bic(const MarketInstance& m, MechanismId id);

// the first best splits exactly, edge by edge, into expected bilateral-trade
// gains against the seller law censored at the edge's critical cost
CheckResult check_decomposition(const MarketInstance& m);

struct ProfitReport {
  Rat gft_star = 0;
  Rat pi_s_gsom = 0;  // seller-side surplus plus budget under Gsom
  Rat pi_b_gbom = 0;  // buyer-side surplus plus budget under Gbom
  std::optional<Rat> ratio;  // half their sum over gft_star; empty when 0
};

ProfitReport profit_report(const MarketInstance& m);

// the fair mixture of the two one-sided optima captures at least 20/63 of
// the first best
CheckResult check_profit_ratio(const MarketInstance& m);

// per profile and per selected pair, each meta-auction trades exactly when
// the posted-price game on the censored seller law trades, settles at zero
// budget, and the strategic side's threshold transfer weakly beats the
// posted price for the side running the auction
std::vector<CheckResult> check_ma_dominance(const MarketInstance& m,
                                            const Rat& lambda);

// single-edge market, uncensored laws: half the sum of the seller-side
// multi-quantile profit and the buyer-side post-quantile profit reaches
// 20/63 of the bilateral first best
CheckResult check_single_edge_bound(const MarketInstance& m,
                                    const Rat& lambda);

// rerun-based dominant-strategy audit of an arbitrary outcome rule; used for
// the deliberately broken control below and available for spot checks
using OutcomeRule = std::function<Outcome(const MarketInstance&, const Reports&)>;
CheckResult check_dsic_by_rerun(const MarketInstance& m,
                                const OutcomeRule& rule, Side side,
                                const std::string& name);

// pay-as-reported rule on the raw matching: winners pay their bid and
// receive their ask. deliberately manipulable.
Outcome run_first_price(const MarketInstance& m, const Reports& r);

// negative control: the audit must FIND a profitable deviation against the
// first-price rule; the result passes exactly when one was found and carries
// it as the witness
CheckResult check_first_price_control();

// randomized structural audits against whole-market reruns:
//   property.mwm_monotone        improving a report never ejects the agent
//   property.partner_stable      the partner is constant across winning reports
//   property.membership_equiv    deviation slices agree with reruns pointwise
//   property.trade_cap_monotone  posted-price trades survive looser caps
//   property.price_cap_monotone  the multi-quantile price never rises as the
//                                cap loosens
std::vector<CheckResult> run_property_trials(std::uint64_t seed, int trials);

// agent, pair, and critical-cost thresholds against a bisection oracle that
// sees only whole-market matching membership
CheckResult check_bisection_agreement(std::uint64_t seed, int instances);

// every audit that applies to one enumerable instance
std::vector<CheckResult> check_instance(const MarketInstance& m,
                                        const Rat& lambda);

struct SuiteReport {
  std::map<std::string, CheckResult> checks;
  int instances = 0;
  double decomposition_seconds = 0;  // time inside check_decomposition only
  double total_seconds = 0;
};

// generates `count` instances from the seed and folds every applicable audit;
// a single-edge spec runs only the single-edge profit bound
SuiteReport run_random_suite(const GenSpec& spec, int count,
                             std::uint64_t seed, const Rat& lambda);

}  // namespace gftlab
