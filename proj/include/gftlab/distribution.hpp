#pragma once

#include <random>
#include <utility>
#include <vector>

#include "gftlab/rational.hpp"

namespace gftlab {

enum class Orientation { BuyerConcave, SellerConvex };

// piecewise-linear envelope of a quantile-space curve; for a buyer this is the
// upper concave envelope of the revenue curve R(q_k) = q_k * v_k (support
// descending, q_k = P[v >= v_k]); for a seller the lower convex envelope of
// the cost curve H(q_k) = q_k * c_k (support ascending, q_k = P[c <= c_k]).
// segment slopes are the ironed virtual values/costs.
struct IronedCurve {
  Orientation orientation = Orientation::BuyerConcave;
  std::vector<Rat> q;      // hull vertex quantiles, strictly increasing, 0..1
  std::vector<Rat> value;  // hull value at q[k]
  std::vector<Rat> slope;  // slope of segment [q[k], q[k+1]); size q.size()-1
};

class Distribution {
 public:
  enum class Kind { Discrete, Uniform };

  // atoms: (value, probability); validated then probabilities renormalized
  // exactly so they sum to exactly 1
  static Distribution discrete(std::vector<std::pair<Rat, Rat>> atoms);
  static Distribution uniform(Rat lo, Rat hi);

  Kind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == Kind::Discrete; }

  // discrete accessors (support ascending, probs aligned)
  const std::vector<Rat>& support() const { return support_; }
  const std::vector<Rat>& probs() const { return probs_; }
  // cumulative probability up to and including atom k
  const std::vector<Rat>& cum() const { return cum_; }

  const Rat& lo() const { return lo_; }  // uniform bounds
  const Rat& hi() const { return hi_; }

  Rat min_support() const;
  Rat max_support() const;

  Rat cdf(const Rat& x) const;  // P[X <= x]
  Rat cdf(const Ext& x) const;
  // min{x : F(x) >= p}; quantile(0) = min support by convention
  Rat quantile(const Rat& p) const;

  const IronedCurve& buyer_curve() const { return buyer_curve_; }
  const IronedCurve& seller_curve() const { return seller_curve_; }

  // ironed virtual value phi~(z) with the off-support step extension:
  //   -inf below min support; phi~(v_k) on [v_k, v_{k+1}); phi~(v_max) above.
  // uniform(a,b): -inf below a; 2z-b on [a,b]; b above b.
  Ext virtual_value(const Rat& z) const;
  // ironed virtual cost psi~(z):
  //   +inf above max support; psi~(c_k) on (c_{k-1}, c_k]; psi~(c_min) below.
  // uniform(a,b): +inf above b; 2z-a on [a,b]; a below a.
  Ext virtual_cost(const Rat& z) const;

  // generalized inverses over the report line.
  // inf{z : phi~(z) >= t} (strict: > t); POS_INF when unattainable.
  Ext virtual_value_inverse(const Ext& t, bool strict) const;
  // sup{z : psi~(z) <= t} (strict: < t); NEG_INF when unattainable.
  Ext virtual_cost_inverse(const Ext& t, bool strict) const;

  Rat mean() const;
  Rat sample(std::mt19937_64& rng) const;

 private:
  Distribution() = default;
  void build_curves();

  Kind kind_ = Kind::Discrete;
  std::vector<Rat> support_, probs_, cum_;
  std::vector<Rat> phi_, psi_;  // per-atom ironed virtual value / cost
  Rat lo_, hi_;
  IronedCurve buyer_curve_, seller_curve_;
};

// right-censored law: cdf(x) = base.cdf(min(x, cap)); mass above cap removed
struct Censored {
  Distribution base;
  Ext cap = Ext::pos_inf();

  Rat total_mass() const { return base.cdf(cap); }
  Rat cdf(const Rat& x) const { return base.cdf(ext_min(Ext(x), cap)); }
  // POS_INF once p exceeds the surviving mass
  Ext quantile(const Rat& p) const {
    if (p > total_mass()) return Ext::pos_inf();
    return Ext(base.quantile(p));
  }
};

inline Censored censor(const Distribution& f, const Ext& cap) {
  return Censored{f, cap};
}

// free-function spellings of the law primitives
inline Rat cdf(const Distribution& f, const Rat& x) { return f.cdf(x); }
inline Rat quantile(const Distribution& f, const Rat& p) {
  return f.quantile(p);
}
inline Ext ironed_virtual_value(const Distribution& f, const Rat& z) {
  return f.virtual_value(z);
}
inline Ext ironed_virtual_cost(const Distribution& f, const Rat& z) {
  return f.virtual_cost(z);
}
inline Ext virtual_inverse(const IronedCurve& curve, const Distribution& f,
                           const Ext& t) {
  return curve.orientation == Orientation::BuyerConcave
             ? f.virtual_value_inverse(t, /*strict=*/false)
             : f.virtual_cost_inverse(t, /*strict=*/false);
}

// dyadic uniform draw in [0,1): k/2^53
Rat sample_unit(std::mt19937_64& rng);
// platform-stable bounded draw in [0, n)
std::uint64_t sample_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace gftlab
