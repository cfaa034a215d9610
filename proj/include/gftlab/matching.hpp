#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "gftlab/market.hpp"

namespace gftlab {

enum class Side { Buyer, Seller };

// weight transforms applied to reports before matching:
//   Raw:           b - s
//   VirtualBuyer:  phi~(b) - s
//   VirtualSeller: b - psi~(s)
enum class WeightKind { Raw, VirtualBuyer, VirtualSeller };

// signed contribution of one endpoint to an edge weight; the seller term is
// already negated, so edge weight = buyer_term + seller_term. terms live in
// [-inf, finite]; +inf never occurs, and since the empty matching always has
// weight 0, a -inf edge is never selected.
Ext buyer_term(const MarketInstance& m, WeightKind kind, int i, const Rat& bid);
Ext seller_term(const MarketInstance& m, WeightKind kind, int j,
                const Rat& cost);

Ext edge_weight(const MarketInstance& m, WeightKind kind, const Reports& r,
                const Edge& e);
Ext matching_weight(const MarketInstance& m, WeightKind kind, const Reports& r,
                    const Matching& mu);

struct MwmResult {
  int index = 0;  // into m.feasible()
  Ext weight = Ext(0);
};

// canonical maximum-weight matching: scans feasible() in canonical order and
// keeps the first strict improvement, so ties resolve to the canonically
// earliest maximizer (the empty matching wins an all-zero tie).
MwmResult mwm(const MarketInstance& m, WeightKind kind, const Reports& r);

// same maximization scanned in a caller-supplied order over feasible()
// indices; exists so tests can demonstrate that properties downstream depend
// on the canonical tie-break. `order` must be a permutation of 0..F-1.
MwmResult mwm_scan_order(const MarketInstance& m, WeightKind kind,
                         const Reports& r, const std::vector<int>& order);

// boundary of a one-dimensional winning set of reports within [0, inf).
// buyers get the infimum of an upper set, sellers the supremum of a lower
// set. `attained` says whether the boundary report itself wins; payments use
// the value alone, but membership tests at the boundary need the flag.
// POS_INF/NEG_INF (never attained) mean the winning set is empty.
struct ThresholdResult {
  Ext value = Ext(0);
  bool attained = false;
};

// best base weight within one class of matchings, together with the canonical
// index attaining it (the scan keeps the first maximizer, matching the global
// tie-break). weight is NEG_INF and index -1 for an empty class.
struct ClassBest {
  Ext weight = Ext::neg_inf();
  int index = -1;
  bool empty() const { return index < 0; }
};

// three-way split of the feasible family relative to one varying agent:
//   in    - target matchings (agent matched / edge present), own term removed
//   other - agent matched but not the target (edge slices only), term removed
//   free  - agent unmatched, full weight
// within each of `in` and `other` every weight shifts by the same own-term as
// the agent's report moves, so the class argmax is report-independent; all
// report dependence collapses to one comparison against `free`.
struct ParametricDecomposition {
  ClassBest in, other, free;
};

// per-matching view of the feasible family with one agent's report left
// symbolic. supports O(1) membership/argmax queries and closed-form threshold
// extraction; this is the engine behind every payment rule.
class DeviationSlice {
 public:
  // target event: `agent` on `side` is matched (to anyone)
  static DeviationSlice for_agent(const MarketInstance& m, WeightKind kind,
                                  const Reports& r, Side side, int agent);
  // target event: edge e is in the canonical mwm; the varying report is the
  // endpoint of e on `side`
  static DeviationSlice for_edge(const MarketInstance& m, WeightKind kind,
                                 const Reports& r, Side side, const Edge& e);

  Side side() const { return side_; }
  int agent() const { return agent_; }
  const ParametricDecomposition& decomposition() const { return dec_; }

  // signed own contribution of the varying agent at report z
  Ext own_term(const Rat& z) const;
  // transformed weight of feasible()[k] when the agent reports z
  Ext weight_at(int k, const Rat& z) const;
  // canonical argmax index at report z (exact, including tie-breaks)
  int mwm_index_at(const Rat& z) const;
  // whether the target event holds at report z
  bool member_at(const Rat& z) const;
  // agent slices: the agent's partner in the canonical mwm at z, -1 if none
  int partner_at(const Rat& z) const;

  // boundary of the winning report set in [0, inf): infimum for buyers,
  // supremum for sellers
  ThresholdResult threshold() const;

 private:
  DeviationSlice() = default;
  static DeviationSlice build(const MarketInstance& m, WeightKind kind,
                              const Reports& r, Side side, int agent,
                              std::optional<Edge> edge);
  // best of in/other (the classes that move with the report); identifies the
  // matching the mwm selects whenever the agent is matched
  ClassBest moving_best() const;

  const MarketInstance* m_ = nullptr;
  WeightKind kind_ = WeightKind::Raw;
  Side side_ = Side::Buyer;
  int agent_ = -1;
  bool edge_mode_ = false;
  Edge edge_{-1, -1};
  const Distribution* law_ = nullptr;
  std::vector<Ext> base_;       // own term removed (classes in/other), else full
  std::vector<signed char> cls_;  // 0 = in, 1 = other, 2 = free
  std::vector<int> partner_;    // agent slices only
  ParametricDecomposition dec_;
};

// convenience wrappers over DeviationSlice::threshold()
ThresholdResult agent_threshold(const MarketInstance& m, WeightKind kind,
                                const Reports& r, Side side, int agent);
// sup over seller reports keeping e selected (NEG_INF if never selected)
ThresholdResult critical_cost(const MarketInstance& m, WeightKind kind,
                              const Reports& r, const Edge& e);
// inf over buyer bids bringing e into the canonical mwm (POS_INF if never)
ThresholdResult edge_buyer_threshold(const MarketInstance& m, WeightKind kind,
                                     const Reports& r, const Edge& e);

// largest report of seller j's law that keeps e selected: for discrete laws
// the top support atom inside the winning set (NEG_INF if none wins), for
// continuous laws the raw boundary. censoring the seller's law here makes
// "cost below the cap" agree with actual membership atom by atom.
Ext snapped_critical_cost(const MarketInstance& m, WeightKind kind,
                          const Reports& r, const Edge& e);

// best base weight per joint status class of a buyer-seller pair, with BOTH
// endpoints' own terms removed; the two-parameter analogue of
// ParametricDecomposition, used where a closed form in both reports is needed
// (two-phase caps, conditional-payment integrands).
struct PairDecomp {
  ClassBest containing;        // matchings with the edge itself
  ClassBest neither;           // i and j both unmatched (includes empty)
  ClassBest buyer_elsewhere;   // i matched away, j unmatched
  ClassBest seller_elsewhere;  // j matched away, i unmatched
  ClassBest both_elsewhere;    // i and j matched, not to each other
};
PairDecomp pair_decomp(const MarketInstance& m, WeightKind kind,
                       const Reports& r, const Edge& e);

// membership of the pair's edge when the buyer contributes signed term g and
// the seller signed term h; exact, including canonical tie resolution.
bool pair_member(const PairDecomp& pd, const Ext& g, const Ext& h);

// generic monotone-boundary scans over [0, inf); `candidates` must contain
// every report where `wins` can change. negatives are dropped, 0 and an
// above-all probe are added. used by oracle tests and anywhere a closed form
// is not available.
ThresholdResult infimum_winning(std::vector<Rat> candidates,
                                const std::function<bool(const Rat&)>& wins);
ThresholdResult supremum_winning(std::vector<Rat> candidates,
                                 const std::function<bool(const Rat&)>& wins);

// checks that a winning indicator over one agent's reports is an upper set
// (buyer) or lower set (seller) across the grid and its midpoints; returns a
// violating pair (a winning report together with a later losing one, in scan
// order) if monotonicity fails.
std::optional<std::pair<Rat, Rat>> membership_monotone_scan(
    Side side, const std::vector<Rat>& grid,
    const std::function<bool(const Rat&)>& wins);

}  // namespace gftlab
