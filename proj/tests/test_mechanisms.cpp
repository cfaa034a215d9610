#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gftlab/errors.hpp"
#include "gftlab/mechanisms.hpp"

using namespace gftlab;

namespace {

const Rat kLambda(317844, 1000000);

Distribution pt(const Rat& v) { return Distribution::discrete({{v, 1}}); }

Distribution two(const Rat& a, const Rat& b) {
  return Distribution::discrete({{a, Rat(1, 2)}, {b, Rat(1, 2)}});
}

MarketInstance complete(std::vector<Distribution> buyers,
                        std::vector<Distribution> sellers) {
  std::vector<Edge> edges;
  for (int i = 0; i < static_cast<int>(buyers.size()); ++i)
    for (int j = 0; j < static_cast<int>(sellers.size()); ++j)
      edges.push_back({i, j});
  return MarketInstance(std::move(buyers), std::move(sellers),
                        std::move(edges), FeasibilityFamily{});
}

Reports rep(std::vector<Rat> values, std::vector<Rat> costs) {
  return Reports{std::move(values), std::move(costs)};
}

Reports with_report(Reports r, Side side, int agent, const Rat& z) {
  (side == Side::Buyer ? r.values : r.costs)[static_cast<std::size_t>(agent)] =
      z;
  return r;
}

bool edge_in_mwm(const MarketInstance& m, WeightKind kind, const Reports& r,
                 const Edge& e) {
  return m.feasible()[static_cast<std::size_t>(mwm(m, kind, r).index)]
      .contains(e);
}

// one buyer ~ U(0,1) against point sellers at 0 and 1/2, one trade at most
MarketInstance exclusive_pair_instance() {
  return complete({Distribution::uniform(0, 1)}, {pt(0), pt(Rat(1, 2))});
}

MarketInstance bilateral_two_point() {
  return complete({two(1, 3)}, {two(0, 2)});
}

void check_no_trade(const Outcome& o) {
  CHECK(o.trades.edges.empty());
  for (const Rat& p : o.buyer_payments) CHECK(p == 0);
  for (const Rat& p : o.seller_payments) CHECK(p == 0);
}

// randomized instances for the meta-auction scans: a couple of agents per
// side, mixed discrete/uniform laws, occasional missing edges
Distribution random_law(std::mt19937_64& rng) {
  if (sample_below(rng, 2) == 0) {
    int n = 1 + static_cast<int>(sample_below(rng, 3));
    std::vector<std::pair<Rat, Rat>> atoms;
    Rat v = Rat(static_cast<long>(sample_below(rng, 4)), 2);
    Rat total = 0;
    std::vector<Rat> weights;
    for (int k = 0; k < n; ++k) {
      atoms.push_back({v, 0});
      v += Rat(1 + static_cast<long>(sample_below(rng, 4)), 2);
      weights.push_back(Rat(1 + static_cast<long>(sample_below(rng, 4))));
      total += weights.back();
    }
    for (int k = 0; k < n; ++k) atoms[static_cast<std::size_t>(k)].second =
        weights[static_cast<std::size_t>(k)] / total;
    return Distribution::discrete(std::move(atoms));
  }
  Rat lo = Rat(static_cast<long>(sample_below(rng, 4)), 2);
  Rat width = Rat(1 + static_cast<long>(sample_below(rng, 4)), 2);
  return Distribution::uniform(lo, lo + width);
}

MarketInstance random_market(std::mt19937_64& rng) {
  int nb = 1 + static_cast<int>(sample_below(rng, 2));
  int ns = 1 + static_cast<int>(sample_below(rng, 2));
  std::vector<Distribution> buyers, sellers;
  for (int i = 0; i < nb; ++i) buyers.push_back(random_law(rng));
  for (int j = 0; j < ns; ++j) sellers.push_back(random_law(rng));
  std::vector<Edge> edges;
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < ns; ++j)
      if (edges.empty() || sample_below(rng, 4) != 0) edges.push_back({i, j});
  return MarketInstance(std::move(buyers), std::move(sellers),
                        std::move(edges), FeasibilityFamily{});
}

Rat random_report(std::mt19937_64& rng, const Distribution& law) {
  if (law.is_discrete() && sample_below(rng, 2) == 0) {
    const auto& s = law.support();
    return s[sample_below(rng, s.size())];
  }
  return Rat(static_cast<long>(sample_below(rng, 9)), 2);
}

Reports random_reports(std::mt19937_64& rng, const MarketInstance& m) {
  Reports r;
  for (int i = 0; i < m.n_buyers(); ++i)
    r.values.push_back(random_report(rng, m.buyer(i)));
  for (int j = 0; j < m.n_sellers(); ++j)
    r.costs.push_back(random_report(rng, m.seller(j)));
  return r;
}

// exact-predicate bisection: the predicate is evaluated at exact rationals
// obtained from double midpoints, so the returned boundary is accurate to the
// double grid
double bisect_boundary(double lo, double hi,
                       const std::function<bool(double)>& upper_wins) {
  for (int k = 0; k < 60; ++k) {
    double mid = (lo + hi) / 2;
    if (mid <= lo || mid >= hi) break;
    if (upper_wins(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace

TEST_CASE("one-sided optimum on the two-point bilateral pays both thresholds") {
  MarketInstance m = bilateral_two_point();

  Outcome hi = run_gsom(m, rep({3}, {0}));
  REQUIRE(hi.trades.edges == std::vector<Edge>{{0, 0}});
  CHECK(hi.buyer_payments[0] == 3);
  CHECK(hi.seller_payments[0] == 3);
  CHECK(outcome_budget(hi) == 0);

  // the low bid has negative ironed virtual value, so no trade forms even
  // though there are positive gains at (1, 0)
  check_no_trade(run_gsom(m, rep({1}, {0})));
}

TEST_CASE("seller-side optimum on the two-point bilateral") {
  MarketInstance m = bilateral_two_point();

  Outcome o = run_gbom(m, rep({3}, {0}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // the winning-bid set is (0, inf), so the buyer pays the infimum 0; the
  // winning-cost set collapses to {0} under the ironed virtual cost
  CHECK(o.buyer_payments[0] == 0);
  CHECK(o.seller_payments[0] == 0);

  // virtual cost of the high atom is 4, above the high bid
  check_no_trade(run_gbom(m, rep({3}, {2})));
}

TEST_CASE("one-sided optimum prices competition between sellers") {
  MarketInstance m = exclusive_pair_instance();
  Outcome o = run_gsom(m, rep({Rat(4, 5)}, {0, Rat(1, 2)}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  CHECK(o.buyer_payments[0] == Rat(1, 2));
  CHECK(o.seller_payments[0] == Rat(1, 2));
  CHECK(o.seller_payments[1] == 0);
  CHECK(outcome_budget(o) == 0);
}

TEST_CASE("expected-threshold variant keeps the allocation and buyer price") {
  MarketInstance m = exclusive_pair_instance();
  Outcome o = run_gsom_bic(m, rep({1}, {0, Rat(1, 2)}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  CHECK(o.buyer_payments[0] == Rat(1, 2));
  // conditional on the edge surviving (bids above 1/2), the supremum winning
  // cost is min(2b - 1, 1/2) and integrates to 3/8
  CHECK(o.seller_payments[0] == Rat(3, 8));
  CHECK_FALSE(o.flagged);
  CHECK(outcome_budget(o) == Rat(1, 8));  // surplus, never a deficit

  ConditionalPayment direct = gsom_bic_seller_payment(m, rep({1}, {0, Rat(1, 2)}), {0, 0});
  CHECK(direct.value == Rat(3, 8));
  CHECK_FALSE(direct.degenerate);

  // the conditional expectation never reads the realized bid, only the event
  Outcome lower = run_gsom_bic(m, rep({Rat(3, 4)}, {0, Rat(1, 2)}));
  REQUIRE(lower.trades.edges == std::vector<Edge>{{0, 0}});
  CHECK(lower.buyer_payments[0] == Rat(1, 2));
  CHECK(lower.seller_payments[0] == Rat(3, 8));
}

TEST_CASE("expected-threshold variant balances exactly on a symmetric edge") {
  MarketInstance m = complete({Distribution::uniform(0, 1)}, {pt(0)});
  Outcome o = run_gsom_bic(m, rep({1}, {0}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  CHECK(o.buyer_payments[0] == Rat(1, 2));
  CHECK(o.seller_payments[0] == Rat(1, 2));
  CHECK(outcome_budget(o) == 0);
}

TEST_CASE("expected threshold over a discrete partner sums the winning atoms") {
  MarketInstance m = complete({two(1, 3)}, {pt(0)});
  Outcome o = run_gsom_bic(m, rep({3}, {0}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // only the high atom keeps the edge (virtual value -1 at the low atom), and
  // there the supremum winning cost is 3
  CHECK(o.seller_payments[0] == 3);
  CHECK_FALSE(o.flagged);

  // same conditional payment when the realized bid sits off-support above the
  // top atom: the stepwise virtual value is unchanged there
  Outcome above = run_gsom_bic(m, rep({5}, {0}));
  REQUIRE(above.trades.edges == std::vector<Edge>{{0, 0}});
  CHECK(above.seller_payments[0] == 3);
  CHECK_FALSE(above.flagged);
}

TEST_CASE("buyer-side expected threshold over a discrete partner") {
  MarketInstance m = complete({pt(3)}, {two(0, 2)});
  Outcome o = run_gbom_bic(m, rep({3}, {0}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // at the low cost atom the infimum winning bid is 0; the high atom has
  // virtual cost 4 and drops out of the event
  CHECK(o.buyer_payments[0] == 0);
  CHECK(o.seller_payments[0] == 0);
  CHECK_FALSE(o.flagged);
  CHECK(outcome_budget(o) == 0);
}

TEST_CASE("buyer-side expected threshold over a uniform partner") {
  MarketInstance m = complete({pt(1)}, {Distribution::uniform(0, 1)});
  Outcome o = run_gbom_bic(m, rep({1}, {Rat(1, 4)}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // the edge survives for costs below 1/2; conditional on that, the infimum
  // winning bid is the virtual cost 2s with mean 1/2
  CHECK(o.buyer_payments[0] == Rat(1, 2));
  CHECK(o.seller_payments[0] == Rat(1, 2));
  CHECK_FALSE(o.flagged);
  CHECK(outcome_budget(o) == 0);

  ConditionalPayment direct =
      gbom_bic_buyer_payment(m, rep({1}, {Rat(1, 4)}), {0, 0});
  CHECK(direct.value == Rat(1, 2));
}

TEST_CASE("conditional payment over a uniform partner with an outside option") {
  MarketInstance m = complete({Distribution::uniform(0, 1)}, {pt(Rat(3, 4))});
  Outcome o = run_gsom_bic(m, rep({2}, {Rat(3, 4)}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // event: virtual value above 3/4, i.e. bids above 7/8; expected supremum
  // winning cost is E[2b - 1 | b > 7/8] = 7/8
  CHECK(o.seller_payments[0] == Rat(7, 8));
  CHECK_FALSE(o.flagged);
}

TEST_CASE("zero-probability conditioning event falls back and is flagged") {
  // a point rival bidder ties the uniform buyer only at the very top of her
  // support, so the selection event has measure zero
  MarketInstance m =
      complete({Distribution::uniform(0, 1), pt(1)}, {pt(0)});
  Reports r = rep({1, 1}, {0});
  REQUIRE(edge_in_mwm(m, WeightKind::VirtualBuyer, r, {0, 0}));
  Outcome o = run_gsom_bic(m, r);
  CHECK(o.flagged);
  CHECK(o.buyer_payments[0] == 1);
  CHECK(o.seller_payments[0] == 1);
  CHECK(outcome_budget(o) == 0);

  // mirrored construction for the buyer-side variant
  MarketInstance ms =
      complete({pt(1)}, {Distribution::uniform(0, 1), pt(0)});
  Reports rs = rep({1}, {0, 0});
  REQUIRE(edge_in_mwm(ms, WeightKind::VirtualSeller, rs, {0, 0}));
  Outcome os = run_gbom_bic(ms, rs);
  CHECK(os.flagged);
  CHECK(os.buyer_payments[0] == 0);
  CHECK(os.seller_payments[0] == 0);
}

TEST_CASE("seller-run meta-auction on a single edge posts the deep quantile") {
  MarketInstance m = complete({pt(3)}, {two(0, 2)});
  Outcome o = run_ma_seller_run(m, rep({3}, {0}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // the bid-dependent cap only reaches the top atom for bids above 2, and
  // there the clipped quantile posts the full support: both transfers sit at 2
  CHECK(o.buyer_payments[0] == 2);
  CHECK(o.seller_payments[0] == 2);
  CHECK(outcome_budget(o) == 0);

  ThresholdResult t =
      ma_seller_run_buyer_threshold(m, rep({3}, {0}), {0, 0}, kLambda);
  CHECK(t.value == Ext(2));
  CHECK_FALSE(t.attained);
}

TEST_CASE("buyer-run meta-auction on a single edge posts the profit maximizer") {
  MarketInstance m = complete({pt(3)}, {two(0, 2)});
  Outcome o = run_ma_buyer_run(m, rep({3}, {0}));
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // price 0 earns 3/2 in expectation against price 2 earning 1
  CHECK(o.buyer_payments[0] == 0);
  CHECK(o.seller_payments[0] == 0);
  CHECK(outcome_budget(o) == 0);
}

TEST_CASE("seller-run meta-auction recovers the uncensored posted price") {
  MarketInstance m =
      complete({pt(Rat(9, 10))}, {Distribution::uniform(0, 1)});
  Reports r = rep({Rat(9, 10)}, {Rat(1, 5)});
  Outcome o = run_ma_seller_run(m, r);
  REQUIRE(o.trades.edges == std::vector<Edge>{{0, 0}});
  // once the bid-dependent cap clears the posted price, censoring no longer
  // moves it: the threshold equals the open-market quantile price
  CHECK(o.buyer_payments[0] == Rat(50000, 79461));
  CHECK(o.seller_payments[0] == Rat(50000, 79461));

  ThresholdResult t = ma_seller_run_buyer_threshold(m, r, {0, 0}, kLambda);
  CHECK(t.value == Ext(Rat(50000, 79461)));
  CHECK(t.attained);
}

TEST_CASE("meta-auction thresholds match a first-principles scan") {
  std::mt19937_64 rng(0x5eedau);
  int traded_s = 0, traded_b = 0;
  for (int trial = 0; trial < 30; ++trial) {
    MarketInstance m = random_market(rng);
    Reports r = random_reports(rng, m);
    const Matching& best =
        m.feasible()[static_cast<std::size_t>(mwm(m, WeightKind::Raw, r).index)];
    for (const Edge& e : best.edges) {
      const Rat cost = r.costs[static_cast<std::size_t>(e.second)];
      const Rat bid = r.values[static_cast<std::size_t>(e.first)];
      const Distribution& law = m.seller(e.second);

      // ground truth built from whole-market reruns, no slice machinery
      auto buyer_wins = [&](const Rat& z) {
        Reports rz = with_report(r, Side::Buyer, e.first, z);
        if (!edge_in_mwm(m, WeightKind::Raw, rz, e)) return false;
        Ext cap = snapped_critical_cost(m, WeightKind::Raw, rz, e);
        return mq_trades(censor(law, cap), kLambda, z, cost);
      };
      auto seller_wins = [&](const Rat& z) {
        Reports rz = with_report(r, Side::Seller, e.second, z);
        if (!edge_in_mwm(m, WeightKind::Raw, rz, e)) return false;
        Ext cap = snapped_critical_cost(m, WeightKind::Raw, rz, e);
        return pq_trades(censor(law, cap), bid, z);
      };

      ThresholdResult ts = ma_seller_run_buyer_threshold(m, r, e, kLambda);
      if (ts.value.is_pos_inf()) {
        for (Rat z = 0; z <= 12; z += Rat(1, 2)) CHECK_FALSE(buyer_wins(z));
      } else {
        ++traded_s;
        const Rat tv = ts.value.value();
        CHECK(buyer_wins(tv) == ts.attained);
        CHECK(buyer_wins(tv + 8));
        if (tv > 0) CHECK_FALSE(buyer_wins(tv / 2));
        double bis = bisect_boundary(-1.0 / 1024, 13.0, [&](double z) {
          return buyer_wins(rat_from_double(z));
        });
        CHECK(std::abs(ts.value.to_double() - bis) < 1e-9);
      }

      ThresholdResult tb = ma_buyer_run_seller_threshold(m, r, e);
      if (tb.value.is_neg_inf()) {
        for (Rat z = 0; z <= 12; z += Rat(1, 2)) CHECK_FALSE(seller_wins(z));
      } else {
        ++traded_b;
        const Rat tv = tb.value.value();
        CHECK(seller_wins(tv) == tb.attained);
        CHECK_FALSE(seller_wins(tv + 8));
        if (tv > 0) CHECK(seller_wins(tv / 2));
        // winning costs form a lower set; bisect the flip to losing
        double bis = bisect_boundary(-1.0 / 1024, 13.0, [&](double z) {
          return !seller_wins(rat_from_double(z));
        });
        CHECK(std::abs(tb.value.to_double() - bis) < 1e-9);
      }
    }
  }
  CHECK(traded_s > 10);
  CHECK(traded_b > 10);
}

TEST_CASE("meta-auction transfers are balanced and individually rational") {
  std::mt19937_64 rng(0xab1de5u);
  for (int trial = 0; trial < 40; ++trial) {
    MarketInstance m = random_market(rng);
    Reports r = random_reports(rng, m);
    for (bool seller_run : {false, true}) {
      Outcome o = seller_run ? run_ma_seller_run(m, r) : run_ma_buyer_run(m, r);
      CHECK(outcome_budget(o) == 0);
      for (const Edge& e : o.trades.edges) {
        const Rat pay = o.buyer_payments[static_cast<std::size_t>(e.first)];
        CHECK(pay == o.seller_payments[static_cast<std::size_t>(e.second)]);
        CHECK(pay <= r.values[static_cast<std::size_t>(e.first)]);
        CHECK(pay >= r.costs[static_cast<std::size_t>(e.second)]);
        // the strategic side never does worse than the standalone posted
        // price of its realized censored environment
        const Ext cap = snapped_critical_cost(m, WeightKind::Raw, r, e);
        const Censored env = censor(m.seller(e.second), cap);
        if (seller_run) {
          const Ext posted = multi_quantile_price(
              env, kLambda, r.costs[static_cast<std::size_t>(e.second)]);
          CHECK(Ext(pay) >= posted);
        } else {
          const PostQuote posted = post_quantile(
              env, r.values[static_cast<std::size_t>(e.first)]);
          CHECK(Ext(pay) <= posted.price);
        }
      }
      for (int i = 0; i < m.n_buyers(); ++i)
        if (!o.trades.uses_buyer(i))
          CHECK(o.buyer_payments[static_cast<std::size_t>(i)] == 0);
      for (int j = 0; j < m.n_sellers(); ++j)
        if (!o.trades.uses_seller(j))
          CHECK(o.seller_payments[static_cast<std::size_t>(j)] == 0);
    }
  }
}

TEST_CASE("fair-coin mixture dispatches to its branches deterministically") {
  MarketInstance m = bilateral_two_point();
  Reports r = rep({3}, {0});
  Outcome g = run_gsom(m, r);
  Outcome b = run_gbom(m, r);
  CHECK(run_randomized(m, r, true).buyer_payments == g.buyer_payments);
  CHECK(run_randomized(m, r, false).buyer_payments == b.buyer_payments);

  bool saw_gsom = false, saw_gbom = false;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    MechParams p;
    p.seed = seed;
    Outcome o = run_mechanism(m, MechanismId::Randomized, r, p);
    Outcome again = run_mechanism(m, MechanismId::Randomized, r, p);
    CHECK(o.buyer_payments == again.buyer_payments);
    CHECK(o.seller_payments == again.seller_payments);
    if (o.buyer_payments == g.buyer_payments) saw_gsom = true;
    if (o.buyer_payments == b.buyer_payments) saw_gbom = true;
  }
  CHECK(saw_gsom);
  CHECK(saw_gbom);
}

TEST_CASE("dispatcher validates report shapes and mechanism names") {
  MarketInstance m = bilateral_two_point();
  CHECK_THROWS_AS(run_mechanism(m, MechanismId::Gsom, rep({3, 1}, {0})),
                  ValidationError);
  CHECK_THROWS_AS(mechanism_from_name("vcg"), ValidationError);
  for (MechanismId id :
       {MechanismId::Gsom, MechanismId::Gbom, MechanismId::GsomBic,
        MechanismId::GbomBic, MechanismId::MaBuyerRun, MechanismId::MaSellerRun,
        MechanismId::Randomized}) {
    CHECK(mechanism_from_name(mechanism_name(id)) == id);
  }
}
