#include "gftlab/bilateral.hpp"

#include <algorithm>

#include "gftlab/errors.hpp"

namespace gftlab {

Ext multi_quantile_price(const Censored& f, const Rat& lambda,
                         const Rat& cost) {
  if (lambda <= 0 || lambda >= 1)
    throw ValidationError("lambda must lie strictly between 0 and 1");
  if (f.total_mass() == 0) return Ext::pos_inf();  // nobody survives the cap
  Rat target = rat_min(Rat(1), f.cdf(cost) / lambda);
  return f.quantile(target);
}

PostQuote post_quantile(const Censored& f, const Rat& value) {
  Rat qmax = f.cdf(value);
  PostQuote best;  // abstain: zero expected profit
  Rat best_profit = 0;
  auto consider = [&](const Rat& q) {
    if (q <= 0 || q > qmax) return;
    Ext price = f.quantile(q);
    Rat profit = q * (value - price.value());
    if (profit > best_profit) {
      best_profit = profit;
      best = PostQuote{q, price};
    }
  };
  const Distribution& base = f.base;
  if (base.is_discrete()) {
    // the objective rises along each constant-price piece, so only the
    // cumulative probabilities (piece right endpoints) can be optimal
    for (const Rat& q : base.cum()) consider(q);
  } else {
    // profit(q) = q * (value - lo - q*(hi-lo)) is concave; clamp its vertex
    Rat width = base.hi() - base.lo();
    Rat vertex = (value - base.lo()) / (2 * width);
    consider(rat_min(rat_max(vertex, Rat(0)), qmax));
    consider(qmax);
  }
  return best;
}

bool mq_trades(const Censored& f, const Rat& lambda, const Rat& bid,
               const Rat& cost) {
  Ext p = multi_quantile_price(f, lambda, cost);
  return p.finite() && Ext(bid) >= p;
}

bool pq_trades(const Censored& f, const Rat& value, const Rat& cost) {
  PostQuote quote = post_quantile(f, value);
  return Ext(cost) <= quote.price;
}

Rat bt_gft(const Censored& f, const Rat& value) {
  const Distribution& base = f.base;
  if (base.is_discrete()) {
    Rat total = 0;
    for (size_t k = 0; k < base.support().size(); ++k) {
      if (Ext(base.support()[k]) > f.cap) break;
      Rat gain = value - base.support()[k];
      if (gain > 0) total += base.probs()[k] * gain;
    }
    return total;
  }
  // uniform base: integrate (value - c)^+ over [lo, min(cap, hi, value)]
  Ext top = ext_min(ext_min(f.cap, Ext(base.hi())), Ext(value));
  if (top <= Ext(base.lo())) return 0;
  Rat upper = top.value();
  Rat lo = base.lo();
  Rat width = base.hi() - lo;
  return ((value - lo) * (value - lo) - (value - upper) * (value - upper)) /
         (2 * width);
}

std::optional<std::pair<Ext, Ext>> check_cap_monotone(
    const Distribution& base, const SellerPriceRule& rule, const Rat& bid,
    const Rat& cost, std::vector<Ext> caps) {
  std::sort(caps.begin(), caps.end());
  caps.erase(std::unique(caps.begin(), caps.end()), caps.end());
  bool traded = false;
  Ext first_trading_cap = Ext::neg_inf();
  for (const Ext& cap : caps) {
    Ext price = rule(censor(base, cap), cost);
    bool trades = price.finite() && Ext(bid) >= price;
    if (trades && !traded) {
      traded = true;
      first_trading_cap = cap;
    }
    if (!trades && traded) return std::make_pair(first_trading_cap, cap);
  }
  return std::nullopt;
}

}  // namespace gftlab
