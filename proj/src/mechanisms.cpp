#include "gftlab/mechanisms.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "gftlab/errors.hpp"

namespace gftlab {

namespace {

Rat payment_value(const ThresholdResult& t, const char* what) {
  if (t.value.is_pos_inf() || t.value.is_neg_inf()) {
    throw ContractError(std::string("selected agent has an empty winning set: ") +
                        what);
  }
  return t.value.value();
}

Outcome empty_outcome(const MarketInstance& m) {
  Outcome o;
  o.buyer_payments.assign(static_cast<std::size_t>(m.n_buyers()), Rat(0));
  o.seller_payments.assign(static_cast<std::size_t>(m.n_sellers()), Rat(0));
  return o;
}

// one-sided optimal mechanism: maximize the transformed weight, charge every
// matched buyer the infimum winning bid and pay every matched seller the
// supremum winning cost
Outcome run_threshold_mechanism(const MarketInstance& m, WeightKind kind,
                                const Reports& r) {
  Outcome o = empty_outcome(m);
  o.trades = m.feasible()[static_cast<std::size_t>(mwm(m, kind, r).index)];
  for (const Edge& e : o.trades.edges) {
    o.buyer_payments[static_cast<std::size_t>(e.first)] = payment_value(
        agent_threshold(m, kind, r, Side::Buyer, e.first), "matched buyer");
    o.seller_payments[static_cast<std::size_t>(e.second)] = payment_value(
        agent_threshold(m, kind, r, Side::Seller, e.second), "matched seller");
  }
  return o;
}

// exact integral of min(2t + u, k) over [a, b]; k may be +inf
Rat integral_min_affine_const(const Rat& u, const Ext& k, const Rat& a,
                              const Rat& b) {
  auto affine_part = [&](const Rat& x, const Rat& y) {
    // integral of 2t + u over [x, y]
    return (y - x) * (x + y + u);
  };
  if (k.is_pos_inf()) return affine_part(a, b);
  const Rat kv = k.value();
  const Rat cross = (kv - u) / 2;  // 2t + u == k
  if (cross >= b) return affine_part(a, b);
  if (cross <= a) return kv * (b - a);
  return affine_part(a, cross) + kv * (b - cross);
}

// exact integral of max(2t + u, k) over [a, b]; k finite
Rat integral_max_affine_const(const Rat& u, const Rat& k, const Rat& a,
                              const Rat& b) {
  auto affine_part = [&](const Rat& x, const Rat& y) {
    return (y - x) * (x + y + u);
  };
  const Rat cross = (k - u) / 2;
  if (cross <= a) return affine_part(a, b);
  if (cross >= b) return k * (b - a);
  return k * (cross - a) + affine_part(cross, b);
}

// conditional threshold at the realized profile, used when the conditioning
// event has zero probability under the partner's law (the partner's realized
// report lies outside her support)
ConditionalPayment realized_fallback(const MarketInstance& m, WeightKind kind,
                                     const Reports& r, Side side,
                                     const Edge& e) {
  ThresholdResult t =
      DeviationSlice::for_edge(m, kind, r, side, e).threshold();
  return {payment_value(t, "degenerate conditional payment"), true};
}

}  // namespace

Rat outcome_budget(const Outcome& o) {
  Rat total = 0;
  for (const Rat& p : o.buyer_payments) total += p;
  for (const Rat& p : o.seller_payments) total -= p;
  return total;
}

Outcome run_gsom(const MarketInstance& m, const Reports& r) {
  return run_threshold_mechanism(m, WeightKind::VirtualBuyer, r);
}

Outcome run_gbom(const MarketInstance& m, const Reports& r) {
  return run_threshold_mechanism(m, WeightKind::VirtualSeller, r);
}

ConditionalPayment gsom_bic_seller_payment(const MarketInstance& m,
                                           const Reports& r, const Edge& e) {
  const Distribution& law = m.buyer(e.first);
  const Rat& cost = r.costs[static_cast<std::size_t>(e.second)];
  if (law.is_discrete()) {
    Rat num = 0, den = 0;
    Reports rp = r;
    for (std::size_t k = 0; k < law.support().size(); ++k) {
      rp.values[static_cast<std::size_t>(e.first)] = law.support()[k];
      DeviationSlice slice = DeviationSlice::for_edge(
          m, WeightKind::VirtualBuyer, rp, Side::Seller, e);
      if (!slice.member_at(cost)) continue;
      num += law.probs()[k] *
             payment_value(slice.threshold(), "conditional seller threshold");
      den += law.probs()[k];
    }
    if (den == 0)
      return realized_fallback(m, WeightKind::VirtualBuyer, r, Side::Seller, e);
    return {num / den, false};
  }

  // uniform partner: the selection event in the buyer's report is the upper
  // set above her edge threshold, and on that event the supremum winning cost
  // has the closed form min(phi~(b') + containing - neither,
  //                         containing - buyer_elsewhere),
  // every other comparison being report-free and already won on the event.
  ThresholdResult t =
      edge_buyer_threshold(m, WeightKind::VirtualBuyer, r, e);
  if (t.value.is_pos_inf())
    return realized_fallback(m, WeightKind::VirtualBuyer, r, Side::Seller, e);
  const Rat alpha = rat_max(t.value.value(), law.lo());
  const Rat beta = law.hi();
  if (alpha >= beta)
    return realized_fallback(m, WeightKind::VirtualBuyer, r, Side::Seller, e);
  const PairDecomp pd = pair_decomp(m, WeightKind::VirtualBuyer, r, e);
  // on a nonempty event the containing and neither bests are finite
  const Rat k1 = (pd.containing.weight - pd.neither.weight).value();
  const Ext k2 = pd.containing.weight - pd.buyer_elsewhere.weight;
  // phi~(b') = 2 b' - hi on the support, so the integrand is
  // min(2 b' + (k1 - hi), k2)
  const Rat integral =
      integral_min_affine_const(k1 - law.hi(), k2, alpha, beta);
  return {integral / (beta - alpha), false};
}

ConditionalPayment gbom_bic_buyer_payment(const MarketInstance& m,
                                          const Reports& r, const Edge& e) {
  const Distribution& law = m.seller(e.second);
  const Rat& bid = r.values[static_cast<std::size_t>(e.first)];
  if (law.is_discrete()) {
    Rat num = 0, den = 0;
    Reports rp = r;
    for (std::size_t k = 0; k < law.support().size(); ++k) {
      rp.costs[static_cast<std::size_t>(e.second)] = law.support()[k];
      DeviationSlice slice = DeviationSlice::for_edge(
          m, WeightKind::VirtualSeller, rp, Side::Buyer, e);
      if (!slice.member_at(bid)) continue;
      num += law.probs()[k] *
             payment_value(slice.threshold(), "conditional buyer threshold");
      den += law.probs()[k];
    }
    if (den == 0)
      return realized_fallback(m, WeightKind::VirtualSeller, r, Side::Buyer, e);
    return {num / den, false};
  }

  // uniform partner: the selection event in the seller's report is the lower
  // set below the critical cost, and on it the infimum winning bid is
  // max(psi~(s') + neither - containing, seller_elsewhere - containing, 0)
  ThresholdResult t = critical_cost(m, WeightKind::VirtualSeller, r, e);
  if (t.value.is_neg_inf())
    return realized_fallback(m, WeightKind::VirtualSeller, r, Side::Buyer, e);
  const Rat alpha = law.lo();
  const Rat beta = rat_min(t.value.value(), law.hi());
  if (beta <= alpha)
    return realized_fallback(m, WeightKind::VirtualSeller, r, Side::Buyer, e);
  const PairDecomp pd = pair_decomp(m, WeightKind::VirtualSeller, r, e);
  const Rat k1 = (pd.neither.weight - pd.containing.weight).value();
  const Ext gate = pd.seller_elsewhere.weight - pd.containing.weight;
  const Rat floor_const =
      gate.is_neg_inf() ? Rat(0) : rat_max(gate.value(), Rat(0));
  // psi~(s') = 2 s' - lo on the support, so the integrand is
  // max(2 s' + (k1 - lo), floor_const)
  const Rat integral =
      integral_max_affine_const(k1 - law.lo(), floor_const, alpha, beta);
  return {integral / (beta - alpha), false};
}

Outcome run_gsom_bic(const MarketInstance& m, const Reports& r) {
  Outcome o = run_gsom(m, r);
  for (const Edge& e : o.trades.edges) {
    ConditionalPayment p = gsom_bic_seller_payment(m, r, e);
    o.seller_payments[static_cast<std::size_t>(e.second)] = p.value;
    o.flagged = o.flagged || p.degenerate;
  }
  return o;
}

Outcome run_gbom_bic(const MarketInstance& m, const Reports& r) {
  Outcome o = run_gbom(m, r);
  for (const Edge& e : o.trades.edges) {
    ConditionalPayment p = gbom_bic_buyer_payment(m, r, e);
    o.buyer_payments[static_cast<std::size_t>(e.first)] = p.value;
    o.flagged = o.flagged || p.degenerate;
  }
  return o;
}

ThresholdResult ma_seller_run_buyer_threshold(const MarketInstance& m,
                                              const Reports& r, const Edge& e,
                                              const Rat& lambda) {
  const Distribution& law = m.seller(e.second);
  const Rat cost = r.costs[static_cast<std::size_t>(e.second)];
  const PairDecomp pd = pair_decomp(m, WeightKind::Raw, r, e);

  // raw-weight membership of the pair as both reports vary; the winning cost
  // set at a fixed bid is a lower set, so the snapped cap is the top support
  // atom still selected (discrete) or the raw boundary (uniform)
  auto member = [&](const Rat& bid, const Rat& c) {
    return pair_member(pd, Ext(bid), Ext(-c));
  };
  auto snapped_cap = [&](const Rat& bid) -> Ext {
    if (law.is_discrete()) {
      const auto& atoms = law.support();
      for (auto it = atoms.rbegin(); it != atoms.rend(); ++it)
        if (member(bid, *it)) return Ext(*it);
      return Ext::neg_inf();
    }
    if (!member(bid, rat_max(law.lo(), Rat(0)))) return Ext::neg_inf();
    // boundary value of the lower set; whether the boundary itself wins only
    // moves the censored mass at a continuity point of a uniform law
    return ext_min(Ext(bid) + pd.containing.weight - pd.neither.weight,
                   pd.containing.weight - pd.buyer_elsewhere.weight);
  };
  auto wins = [&](const Rat& bid) {
    if (!member(bid, cost)) return false;
    const Ext p = multi_quantile_price(censor(law, snapped_cap(bid)), lambda,
                                       cost);
    return !p.is_pos_inf() && Ext(bid) >= p;
  };

  // candidate bids: membership boundaries at the realized cost and at every
  // censoring level the cap can snap to, plus the posted price of each level
  std::vector<Rat> cands;
  auto add = [&](const Ext& x) {
    if (!x.is_pos_inf() && !x.is_neg_inf()) cands.push_back(x.value());
  };
  Reports rp = r;
  auto add_level = [&](const Rat& level) {
    rp.costs[static_cast<std::size_t>(e.second)] = level;
    add(edge_buyer_threshold(m, WeightKind::Raw, rp, e).value);
    add(multi_quantile_price(censor(law, Ext(level)), lambda, cost));
  };
  add_level(cost);
  if (law.is_discrete()) {
    for (const Rat& a : law.support()) add_level(a);
  } else {
    add_level(law.lo());
    add_level(law.hi());
    // with a uniform law the accepted price is constant once the cap clears
    // it; cover the price itself and the bid at which the cap reaches it
    const Ext p0 = Ext(law.quantile(rat_min(Rat(1), law.cdf(cost) / lambda)));
    add(p0);
    add(p0 - (pd.containing.weight - pd.neither.weight));
    add(Ext(cost) - (pd.containing.weight - pd.neither.weight));
  }
  return infimum_winning(std::move(cands), wins);
}

ThresholdResult ma_buyer_run_seller_threshold(const MarketInstance& m,
                                              const Reports& r,
                                              const Edge& e) {
  const Distribution& law = m.seller(e.second);
  const Rat& bid = r.values[static_cast<std::size_t>(e.first)];
  // the cap never depends on the seller's own report
  const Ext cap = snapped_critical_cost(m, WeightKind::Raw, r, e);
  const PostQuote quote = post_quantile(censor(law, cap), bid);
  if (quote.price.is_neg_inf()) return {Ext::neg_inf(), false};
  const Rat price = quote.price.value();
  DeviationSlice slice =
      DeviationSlice::for_edge(m, WeightKind::Raw, r, Side::Seller, e);
  auto wins = [&](const Rat& c) { return c <= price && slice.member_at(c); };
  std::vector<Rat> cands{price};
  const ThresholdResult boundary = slice.threshold();
  if (!boundary.value.is_pos_inf() && !boundary.value.is_neg_inf())
    cands.push_back(boundary.value.value());
  return supremum_winning(std::move(cands), wins);
}

Outcome run_ma_seller_run(const MarketInstance& m, const Reports& r,
                          const MechParams& params) {
  Outcome o = empty_outcome(m);
  const Matching& best =
      m.feasible()[static_cast<std::size_t>(mwm(m, WeightKind::Raw, r).index)];
  std::vector<Edge> traded;
  for (const Edge& e : best.edges) {
    const Rat& bid = r.values[static_cast<std::size_t>(e.first)];
    const Rat& cost = r.costs[static_cast<std::size_t>(e.second)];
    const Ext cap = snapped_critical_cost(m, WeightKind::Raw, r, e);
    if (!mq_trades(censor(m.seller(e.second), cap), params.lambda, bid, cost))
      continue;
    traded.push_back(e);
    const Rat pay = payment_value(
        ma_seller_run_buyer_threshold(m, r, e, params.lambda),
        "accepted buyer in the seller-run meta-auction");
    o.buyer_payments[static_cast<std::size_t>(e.first)] = pay;
    o.seller_payments[static_cast<std::size_t>(e.second)] = pay;
  }
  o.trades = Matching::of(std::move(traded));
  return o;
}

Outcome run_ma_buyer_run(const MarketInstance& m, const Reports& r,
                         const MechParams&) {
  Outcome o = empty_outcome(m);
  const Matching& best =
      m.feasible()[static_cast<std::size_t>(mwm(m, WeightKind::Raw, r).index)];
  std::vector<Edge> traded;
  for (const Edge& e : best.edges) {
    const Rat& bid = r.values[static_cast<std::size_t>(e.first)];
    const Rat& cost = r.costs[static_cast<std::size_t>(e.second)];
    const Ext cap = snapped_critical_cost(m, WeightKind::Raw, r, e);
    if (!pq_trades(censor(m.seller(e.second), cap), bid, cost)) continue;
    traded.push_back(e);
    const Rat pay =
        payment_value(ma_buyer_run_seller_threshold(m, r, e),
                      "accepting seller in the buyer-run meta-auction");
    o.buyer_payments[static_cast<std::size_t>(e.first)] = pay;
    o.seller_payments[static_cast<std::size_t>(e.second)] = pay;
  }
  o.trades = Matching::of(std::move(traded));
  return o;
}

Outcome run_randomized(const MarketInstance& m, const Reports& r,
                       bool gsom_branch) {
  return gsom_branch ? run_gsom(m, r) : run_gbom(m, r);
}

Outcome run_mechanism(const MarketInstance& m, MechanismId id,
                      const Reports& r, const MechParams& params) {
  if (r.values.size() != static_cast<std::size_t>(m.n_buyers()) ||
      r.costs.size() != static_cast<std::size_t>(m.n_sellers()))
    throw ValidationError("report vectors do not match the market shape");
  switch (id) {
    case MechanismId::Gsom:
      return run_gsom(m, r);
    case MechanismId::Gbom:
      return run_gbom(m, r);
    case MechanismId::GsomBic:
      return run_gsom_bic(m, r);
    case MechanismId::GbomBic:
      return run_gbom_bic(m, r);
    case MechanismId::MaBuyerRun:
      return run_ma_buyer_run(m, r, params);
    case MechanismId::MaSellerRun:
      return run_ma_seller_run(m, r, params);
    case MechanismId::Randomized: {
      std::mt19937_64 rng(params.seed);
      return run_randomized(m, r, sample_below(rng, 2) == 0);
    }
  }
  throw ValidationError("unknown mechanism id");
}

MechanismId mechanism_from_name(const std::string& name) {
  if (name == "gsom") return MechanismId::Gsom;
  if (name == "gbom") return MechanismId::Gbom;
  if (name == "gsom_bic") return MechanismId::GsomBic;
  if (name == "gbom_bic") return MechanismId::GbomBic;
  if (name == "ma_b") return MechanismId::MaBuyerRun;
  if (name == "ma_s") return MechanismId::MaSellerRun;
  if (name == "randomized") return MechanismId::Randomized;
  throw ValidationError("unknown mechanism: " + name);
}

std::string mechanism_name(MechanismId id) {
  switch (id) {
    case MechanismId::Gsom:
      return "gsom";
    case MechanismId::Gbom:
      return "gbom";
    case MechanismId::GsomBic:
      return "gsom_bic";
    case MechanismId::GbomBic:
      return "gbom_bic";
    case MechanismId::MaBuyerRun:
      return "ma_b";
    case MechanismId::MaSellerRun:
      return "ma_s";
    case MechanismId::Randomized:
      return "randomized";
  }
  throw ValidationError("unknown mechanism id");
}

}  // namespace gftlab
