#include "gftlab/distribution.hpp"

#include <algorithm>
#include <cmath>

namespace gftlab {

namespace {

// upper (concave) or lower (convex) hull of points with strictly increasing x.
// returns indices of hull vertices, always including first and last point.
std::vector<int> hull_indices(const std::vector<Rat>& x,
                              const std::vector<Rat>& y, bool upper) {
  std::vector<int> h;
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    while (h.size() >= 2) {
      const int a = h[h.size() - 2], b = h[h.size() - 1];
      // cross product sign of (b-a) x (i-a); drop b when it does not bend the
      // right way
      const Rat cross = (x[b] - x[a]) * (y[i] - y[a]) -
                        (y[b] - y[a]) * (x[i] - x[a]);
      const bool keep = upper ? (cross < 0) : (cross > 0);
      if (keep) break;
      h.pop_back();
    }
    h.push_back(i);
  }
  return h;
}

}  // namespace

Distribution Distribution::discrete(std::vector<std::pair<Rat, Rat>> atoms) {
  if (atoms.empty()) throw ValidationError("discrete law needs atoms");
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Rat total = 0;
  for (size_t k = 0; k + 1 < atoms.size(); ++k)
    if (atoms[k].first == atoms[k + 1].first)
      throw ValidationError("duplicate atom value");
  for (const auto& [v, p] : atoms) {
    if (v < 0) throw ValidationError("negative support value");
    if (p <= 0) throw ValidationError("non-positive atom probability");
    total += p;
  }
  const Rat tol(1, 1000000000000LL);
  if (total < 1 - tol || total > 1 + tol)
    throw ValidationError("atom probabilities must sum to 1 within 1e-12");

  Distribution d;
  d.kind_ = Kind::Discrete;
  for (auto& [v, p] : atoms) {
    d.support_.push_back(v);
    d.probs_.push_back(p / total);  // exact renormalization
  }
  Rat c = 0;
  for (const Rat& p : d.probs_) d.cum_.push_back(c += p);
  d.cum_.back() = 1;  // exact by construction; keep it literal
  d.build_curves();
  return d;
}

Distribution Distribution::uniform(Rat lo, Rat hi) {
  if (lo < 0 || !(lo < hi)) throw ValidationError("uniform needs 0 <= lo < hi");
  Distribution d;
  d.kind_ = Kind::Uniform;
  d.lo_ = std::move(lo);
  d.hi_ = std::move(hi);
  // stub polylines; uniform virtual values use the closed forms
  d.buyer_curve_ = IronedCurve{Orientation::BuyerConcave, {0, 1}, {0, 0}, {0}};
  d.seller_curve_ = IronedCurve{Orientation::SellerConvex, {0, 1}, {0, 0}, {0}};
  return d;
}

void Distribution::build_curves() {
  const int n = static_cast<int>(support_.size());

  // buyer revenue curve: support descending, q_k = P[v >= v_k]
  {
    std::vector<Rat> q{0}, r{0};
    Rat acc = 0;
    for (int k = n - 1; k >= 0; --k) {
      acc += probs_[k];
      q.push_back(acc);
      r.push_back(acc * support_[k]);
    }
    q.back() = 1;
    auto h = hull_indices(q, r, /*upper=*/true);
    buyer_curve_.orientation = Orientation::BuyerConcave;
    buyer_curve_.q.clear();
    buyer_curve_.value.clear();
    buyer_curve_.slope.clear();
    for (int idx : h) {
      buyer_curve_.q.push_back(q[idx]);
      buyer_curve_.value.push_back(r[idx]);
    }
    for (size_t s = 0; s + 1 < buyer_curve_.q.size(); ++s)
      buyer_curve_.slope.push_back(
          (buyer_curve_.value[s + 1] - buyer_curve_.value[s]) /
          (buyer_curve_.q[s + 1] - buyer_curve_.q[s]));
    // atom v_k (descending index t = n-1-k) occupies quantile interval
    // (q[t], q[t+1]); its ironed value is the slope of the hull segment
    // containing that interval
    phi_.assign(n, Rat(0));
    size_t seg = 0;
    for (int t = 0; t < n; ++t) {
      while (buyer_curve_.q[seg + 1] < q[t + 1]) ++seg;
      phi_[n - 1 - t] = buyer_curve_.slope[seg];
    }
  }

  // seller cost curve: support ascending, q_k = P[c <= c_k]
  {
    std::vector<Rat> q{0}, hpts{0};
    for (int k = 0; k < n; ++k) {
      q.push_back(cum_[k]);
      hpts.push_back(cum_[k] * support_[k]);
    }
    auto h = hull_indices(q, hpts, /*upper=*/false);
    seller_curve_.orientation = Orientation::SellerConvex;
    seller_curve_.q.clear();
    seller_curve_.value.clear();
    seller_curve_.slope.clear();
    for (int idx : h) {
      seller_curve_.q.push_back(q[idx]);
      seller_curve_.value.push_back(hpts[idx]);
    }
    for (size_t s = 0; s + 1 < seller_curve_.q.size(); ++s)
      seller_curve_.slope.push_back(
          (seller_curve_.value[s + 1] - seller_curve_.value[s]) /
          (seller_curve_.q[s + 1] - seller_curve_.q[s]));
    psi_.assign(n, Rat(0));
    size_t seg = 0;
    for (int k = 0; k < n; ++k) {
      while (seller_curve_.q[seg + 1] < q[k + 1]) ++seg;
      psi_[k] = seller_curve_.slope[seg];
    }
  }
}

Rat Distribution::min_support() const {
  return is_discrete() ? support_.front() : lo_;
}
Rat Distribution::max_support() const {
  return is_discrete() ? support_.back() : hi_;
}

Rat Distribution::cdf(const Rat& x) const {
  if (is_discrete()) {
    Rat acc = 0;
    for (size_t k = 0; k < support_.size() && support_[k] <= x; ++k)
      acc = cum_[k];
    return acc;
  }
  if (x <= lo_) return 0;
  if (x >= hi_) return 1;
  return (x - lo_) / (hi_ - lo_);
}

Rat Distribution::cdf(const Ext& x) const {
  if (x.is_pos_inf()) return 1;
  if (x.is_neg_inf()) return 0;
  return cdf(x.value());
}

Rat Distribution::quantile(const Rat& p) const {
  if (p < 0 || p > 1) throw ContractError("quantile needs p in [0,1]");
  if (is_discrete()) {
    for (size_t k = 0; k < support_.size(); ++k)
      if (cum_[k] >= p) return support_[k];
    return support_.back();
  }
  return lo_ + (hi_ - lo_) * p;
}

Ext Distribution::virtual_value(const Rat& z) const {
  if (is_discrete()) {
    if (z < support_.front()) return Ext::neg_inf();
    size_t k = 0;
    while (k + 1 < support_.size() && support_[k + 1] <= z) ++k;
    return Ext(phi_[k]);
  }
  if (z < lo_) return Ext::neg_inf();
  if (z > hi_) return Ext(hi_);
  return Ext(2 * z - hi_);
}

Ext Distribution::virtual_cost(const Rat& z) const {
  if (is_discrete()) {
    if (z > support_.back()) return Ext::pos_inf();
    size_t k = support_.size() - 1;
    while (k > 0 && support_[k - 1] >= z) --k;
    return Ext(psi_[k]);
  }
  if (z > hi_) return Ext::pos_inf();
  if (z < lo_) return Ext(lo_);
  return Ext(2 * z - lo_);
}

Ext Distribution::virtual_value_inverse(const Ext& t, bool strict) const {
  auto ok = [&](const Ext& val) { return strict ? val > t : val >= t; };
  if (is_discrete()) {
    for (size_t k = 0; k < support_.size(); ++k)
      if (ok(Ext(phi_[k]))) return Ext(support_[k]);
    return Ext::pos_inf();
  }
  if (ok(virtual_value(lo_))) return Ext(lo_);
  // on [lo, hi] the value is 2z - hi; above hi it stays at hi
  if (!t.finite()) return t.is_neg_inf() ? Ext(lo_) : Ext::pos_inf();
  const Rat z = (t.value() + hi_) / 2;
  if (strict ? t.value() < hi_ : t.value() <= hi_)
    return Ext(rat_max(lo_, rat_min(z, hi_)));
  return Ext::pos_inf();
}

Ext Distribution::virtual_cost_inverse(const Ext& t, bool strict) const {
  auto ok = [&](const Ext& val) { return strict ? val < t : val <= t; };
  if (is_discrete()) {
    for (size_t k = support_.size(); k-- > 0;)
      if (ok(Ext(psi_[k]))) return Ext(support_[k]);
    return Ext::neg_inf();
  }
  if (ok(virtual_cost(hi_))) return Ext(hi_);
  if (!t.finite()) return t.is_pos_inf() ? Ext(hi_) : Ext::neg_inf();
  const Rat z = (t.value() + lo_) / 2;
  if (strict ? t.value() > lo_ : t.value() >= lo_)
    return Ext(rat_min(hi_, rat_max(z, lo_)));
  return Ext::neg_inf();
}

Rat Distribution::mean() const {
  if (is_discrete()) {
    Rat m = 0;
    for (size_t k = 0; k < support_.size(); ++k) m += support_[k] * probs_[k];
    return m;
  }
  return (lo_ + hi_) / 2;
}

Rat Distribution::sample(std::mt19937_64& rng) const {
  const Rat u = sample_unit(rng);
  if (is_discrete()) {
    for (size_t k = 0; k < support_.size(); ++k)
      if (u < cum_[k]) return support_[k];
    return support_.back();
  }
  return lo_ + (hi_ - lo_) * u;
}

Rat sample_unit(std::mt19937_64& rng) {
  const std::uint64_t bits = rng() >> 11;  // 53 bits
  return Rat(bits) / Rat(std::uint64_t(1) << 53);
}

std::uint64_t sample_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("sample_below(0)");
  // rejection sampling keeps this exactly uniform and platform-stable
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace gftlab
