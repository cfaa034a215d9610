#pragma once

#include <cstdint>
#include <string>

#include "gftlab/bilateral.hpp"
#include "gftlab/matching.hpp"

namespace gftlab {

// GSOM / GBOM: maximize virtual surplus on one side, pay both sides their
// thresholds. the BIC variants keep the allocation and the strategic side's
// threshold payments but pay the opposite side its conditional expected
// threshold, trading that side's DSIC for BIC to gain ex-post weak budget
// balance. the meta-auctions match on raw weights and settle each selected
// pair through a posted-price bilateral game on the censored seller law;
// both transfers sit at the strategic side's two-phase threshold, so the
// budget nets to zero. Randomized mixes GSOM and GBOM with a fair coin.
enum class MechanismId {
  Gsom,
  Gbom,
  GsomBic,
  GbomBic,
  MaBuyerRun,   // PostQuantile phase two, sellers strategic
  MaSellerRun,  // MultiQuantile phase two, buyers strategic
  Randomized,
};

MechanismId mechanism_from_name(const std::string& name);
std::string mechanism_name(MechanismId id);

struct MechParams {
  Rat lambda = Rat(317844, 1000000);  // MultiQuantile quantile multiplier
  std::uint64_t seed = 0;             // coin seed for Randomized
};

struct Outcome {
  Matching trades;
  std::vector<Rat> buyer_payments;   // money paid by each buyer
  std::vector<Rat> seller_payments;  // money received by each seller
  bool flagged = false;  // a conditional payment hit a zero-probability event
                         // and fell back to the realized-report threshold
};

Rat outcome_budget(const Outcome& o);

Outcome run_gsom(const MarketInstance& m, const Reports& r);
Outcome run_gbom(const MarketInstance& m, const Reports& r);
Outcome run_gsom_bic(const MarketInstance& m, const Reports& r);
Outcome run_gbom_bic(const MarketInstance& m, const Reports& r);
Outcome run_ma_buyer_run(const MarketInstance& m, const Reports& r,
                         const MechParams& params = {});
Outcome run_ma_seller_run(const MarketInstance& m, const Reports& r,
                          const MechParams& params = {});
// one branch of the randomized mixture, chosen by the caller's coin
Outcome run_randomized(const MarketInstance& m, const Reports& r,
                       bool gsom_branch);

// uniform dispatch; Randomized draws its coin from params.seed
Outcome run_mechanism(const MarketInstance& m, MechanismId id,
                      const Reports& r, const MechParams& params = {});

// conditional-expectation payments of the BIC variants, exposed so the
// interim identities can be verified term by term. the expectation runs over
// the partner's law conditioned on the edge staying selected; `degenerate`
// marks the zero-probability fallback (payment at the realized report).
struct ConditionalPayment {
  Rat value = 0;
  bool degenerate = false;
};
// expected supremum winning cost for the seller of e under GSOM weights
ConditionalPayment gsom_bic_seller_payment(const MarketInstance& m,
                                           const Reports& r, const Edge& e);
// expected infimum winning bid for the buyer of e under GBOM weights
ConditionalPayment gbom_bic_buyer_payment(const MarketInstance& m,
                                          const Reports& r, const Edge& e);

// two-phase threshold reports of the meta-auctions on a selected edge: the
// infimum winning bid of the buyer in MA(S), the supremum winning cost of
// the seller in MA(B), with phase-two acceptance folded into the win
// predicate. both transfers of the pair settle at this value.
ThresholdResult ma_seller_run_buyer_threshold(const MarketInstance& m,
                                              const Reports& r, const Edge& e,
                                              const Rat& lambda);
ThresholdResult ma_buyer_run_seller_threshold(const MarketInstance& m,
                                              const Reports& r, const Edge& e);

}  // namespace gftlab
