#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "gftlab/distribution.hpp"

namespace gftlab {

// seller-proposing posted price on a (possibly censored) seller law:
//   p = Fbar^{-1}( min(1, Fbar(cost) / lambda) )
// POS_INF when the target quantile exceeds the surviving mass, i.e. no price
// reaches deep enough into the censored support; the buyer trades at p (and
// pays p) exactly when her bid weakly beats it.
Ext multi_quantile_price(const Censored& f, const Rat& lambda,
                         const Rat& cost);

struct PostQuote {
  Rat q = 0;                  // chosen quantile; 0 means the buyer abstains
  Ext price = Ext::neg_inf();  // NEG_INF when abstaining
};

// buyer-proposing posted price: maximize q * (value - Fbar^{-1}(q)) over
// q in [0, Fbar(value)], ties resolved to the smallest quantile. when no
// strictly positive expected profit exists the buyer abstains and no trade
// can form. the seller trades (and is paid price) when cost <= price.
PostQuote post_quantile(const Censored& f, const Rat& value);

// realized allocations of the two rules
bool mq_trades(const Censored& f, const Rat& lambda, const Rat& bid,
               const Rat& cost);
bool pq_trades(const Censored& f, const Rat& value, const Rat& cost);

// first-best gains of the censored edge: E[(value - c)^+] with the censored
// mass contributing zero
Rat bt_gft(const Censored& f, const Rat& value);

// a seller-proposing rule as a function of the censored environment
using SellerPriceRule = std::function<Ext(const Censored&, const Rat& cost)>;

// audits cap-monotonicity of a rule at fixed (bid, cost): once a trade
// succeeds under some cap it must survive every looser cap. returns the
// violating pair (tight cap that trades, looser cap that does not).
std::optional<std::pair<Ext, Ext>> check_cap_monotone(
    const Distribution& base, const SellerPriceRule& rule, const Rat& bid,
    const Rat& cost, std::vector<Ext> caps);

}  // namespace gftlab
