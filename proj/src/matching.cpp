#include "gftlab/matching.hpp"

#include <algorithm>

#include "gftlab/errors.hpp"

namespace gftlab {

namespace {

void check_buyer(const MarketInstance& m, int i) {
  if (i < 0 || i >= m.n_buyers()) throw ContractError("buyer index out of range");
}

void check_seller(const MarketInstance& m, int j) {
  if (j < 0 || j >= m.n_sellers()) throw ContractError("seller index out of range");
}

void check_edge(const MarketInstance& m, const Edge& e) {
  if (!std::binary_search(m.edges().begin(), m.edges().end(), e))
    throw ContractError("edge not present in the instance");
}

// (weight, canonical index) comparison: a beats b when its weight is strictly
// larger or weights tie and a is canonically earlier
bool beats(const Ext& wa, int ia, const Ext& wb, int ib) {
  if (wa != wb) return wa > wb;
  return ia < ib;
}

void absorb(ClassBest& best, const Ext& w, int index) {
  if (best.empty() || w > best.weight) best = ClassBest{w, index};
}

}  // namespace

Ext buyer_term(const MarketInstance& m, WeightKind kind, int i, const Rat& bid) {
  check_buyer(m, i);
  if (kind == WeightKind::VirtualBuyer) return m.buyer(i).virtual_value(bid);
  return Ext(bid);
}

Ext seller_term(const MarketInstance& m, WeightKind kind, int j,
                const Rat& cost) {
  check_seller(m, j);
  if (kind == WeightKind::VirtualSeller) return -m.seller(j).virtual_cost(cost);
  return Ext(-cost);
}

Ext edge_weight(const MarketInstance& m, WeightKind kind, const Reports& r,
                const Edge& e) {
  return buyer_term(m, kind, e.first, r.values[e.first]) +
         seller_term(m, kind, e.second, r.costs[e.second]);
}

Ext matching_weight(const MarketInstance& m, WeightKind kind, const Reports& r,
                    const Matching& mu) {
  Ext total(0);
  for (const Edge& e : mu.edges) total += edge_weight(m, kind, r, e);
  return total;
}

MwmResult mwm(const MarketInstance& m, WeightKind kind, const Reports& r) {
  const auto& fam = m.feasible();
  MwmResult best{0, matching_weight(m, kind, r, fam[0])};
  for (int k = 1; k < static_cast<int>(fam.size()); ++k) {
    Ext w = matching_weight(m, kind, r, fam[k]);
    if (w > best.weight) best = MwmResult{k, w};
  }
  return best;
}

MwmResult mwm_scan_order(const MarketInstance& m, WeightKind kind,
                         const Reports& r, const std::vector<int>& order) {
  const auto& fam = m.feasible();
  if (order.size() != fam.size())
    throw ContractError("scan order must cover the feasible family");
  std::vector<bool> seen(fam.size(), false);
  for (int k : order) {
    if (k < 0 || k >= static_cast<int>(fam.size()) || seen[k])
      throw ContractError("scan order must be a permutation");
    seen[k] = true;
  }
  MwmResult best{order[0], matching_weight(m, kind, r, fam[order[0]])};
  for (size_t t = 1; t < order.size(); ++t) {
    Ext w = matching_weight(m, kind, r, fam[order[t]]);
    if (w > best.weight) best = MwmResult{order[t], w};
  }
  return best;
}

DeviationSlice DeviationSlice::for_agent(const MarketInstance& m,
                                         WeightKind kind, const Reports& r,
                                         Side side, int agent) {
  if (side == Side::Buyer) check_buyer(m, agent);
  else check_seller(m, agent);
  return build(m, kind, r, side, agent, std::nullopt);
}

DeviationSlice DeviationSlice::for_edge(const MarketInstance& m,
                                        WeightKind kind, const Reports& r,
                                        Side side, const Edge& e) {
  check_edge(m, e);
  int agent = side == Side::Buyer ? e.first : e.second;
  return build(m, kind, r, side, agent, e);
}

DeviationSlice DeviationSlice::build(const MarketInstance& m, WeightKind kind,
                                     const Reports& r, Side side, int agent,
                                     std::optional<Edge> edge) {
  DeviationSlice s;
  s.m_ = &m;
  s.kind_ = kind;
  s.side_ = side;
  s.agent_ = agent;
  s.edge_mode_ = edge.has_value();
  if (edge) s.edge_ = *edge;
  s.law_ = side == Side::Buyer ? &m.buyer(agent) : &m.seller(agent);

  const auto& fam = m.feasible();
  s.base_.reserve(fam.size());
  s.cls_.reserve(fam.size());
  s.partner_.reserve(fam.size());
  for (int k = 0; k < static_cast<int>(fam.size()); ++k) {
    const Matching& mu = fam[k];
    Ext base(0);
    int partner = -1;
    for (const Edge& e : mu.edges) {
      bool own_buyer = side == Side::Buyer && e.first == agent;
      bool own_seller = side == Side::Seller && e.second == agent;
      if (own_buyer) partner = e.second;
      if (own_seller) partner = e.first;
      if (!own_buyer) base += buyer_term(m, kind, e.first, r.values[e.first]);
      if (!own_seller) base += seller_term(m, kind, e.second, r.costs[e.second]);
    }
    signed char cls;
    if (partner < 0) {
      cls = 2;
    } else if (!s.edge_mode_ || mu.contains(s.edge_)) {
      cls = 0;
    } else {
      cls = 1;
    }
    s.base_.push_back(base);
    s.cls_.push_back(cls);
    s.partner_.push_back(partner);
    ClassBest& best = cls == 0 ? s.dec_.in : cls == 1 ? s.dec_.other : s.dec_.free;
    absorb(best, base, k);
  }
  return s;
}

Ext DeviationSlice::own_term(const Rat& z) const {
  if (side_ == Side::Buyer)
    return kind_ == WeightKind::VirtualBuyer ? law_->virtual_value(z) : Ext(z);
  return kind_ == WeightKind::VirtualSeller ? -law_->virtual_cost(z) : Ext(-z);
}

Ext DeviationSlice::weight_at(int k, const Rat& z) const {
  if (cls_[k] == 2) return base_[k];
  return base_[k] + own_term(z);
}

ClassBest DeviationSlice::moving_best() const {
  const ClassBest& a = dec_.in;
  const ClassBest& b = dec_.other;
  if (a.empty()) return b;
  if (b.empty()) return a;
  return beats(a.weight, a.index, b.weight, b.index) ? a : b;
}

int DeviationSlice::mwm_index_at(const Rat& z) const {
  ClassBest moving = moving_best();
  if (moving.empty()) return dec_.free.index;
  Ext w = moving.weight + own_term(z);
  return beats(w, moving.index, dec_.free.weight, dec_.free.index)
             ? moving.index
             : dec_.free.index;
}

bool DeviationSlice::member_at(const Rat& z) const {
  int k = mwm_index_at(z);
  return cls_[k] == 0;
}

int DeviationSlice::partner_at(const Rat& z) const {
  return partner_[mwm_index_at(z)];
}

ThresholdResult DeviationSlice::threshold() const {
  const bool buyer = side_ == Side::Buyer;
  const ThresholdResult never{buyer ? Ext::pos_inf() : Ext::neg_inf(), false};
  ClassBest moving = moving_best();
  // the target class must dominate its sibling; their comparison does not
  // depend on the report, so losing it means losing everywhere
  if (moving.empty() || cls_[moving.index] != 0) return never;
  if (moving.weight.is_neg_inf()) return never;

  // win at z  <=>  own_term(z) beats delta = free - in, with the tie resolved
  // by canonical position
  Ext delta = dec_.free.weight - moving.weight;
  bool tie_ok = moving.index < dec_.free.index;

  Ext boundary;
  if (buyer) {
    if (kind_ == WeightKind::VirtualBuyer) {
      boundary = law_->virtual_value_inverse(delta, /*strict=*/!tie_ok);
    } else {
      boundary = delta;  // own term is the identity
    }
    if (boundary.is_pos_inf()) return never;
    Rat z = rat_max(Rat(0), boundary.is_neg_inf() ? Rat(0) : boundary.value());
    return ThresholdResult{Ext(z), member_at(z)};
  }

  // seller: own term is -z (raw) or -psi~(z); win <=> h(z) <= in - free
  Ext target = -delta;
  if (kind_ == WeightKind::VirtualSeller) {
    boundary = law_->virtual_cost_inverse(target, /*strict=*/!tie_ok);
  } else {
    boundary = target;
  }
  if (boundary.is_neg_inf() || boundary < Ext(0)) return never;
  if (boundary.is_pos_inf())
    throw ContractError("seller winning set unbounded above");
  Rat z = boundary.value();
  bool attained = member_at(z);
  if (z == 0 && !attained) return never;  // winning set [0,0) is empty
  return ThresholdResult{Ext(z), attained};
}

ThresholdResult agent_threshold(const MarketInstance& m, WeightKind kind,
                                const Reports& r, Side side, int agent) {
  return DeviationSlice::for_agent(m, kind, r, side, agent).threshold();
}

ThresholdResult critical_cost(const MarketInstance& m, WeightKind kind,
                              const Reports& r, const Edge& e) {
  return DeviationSlice::for_edge(m, kind, r, Side::Seller, e).threshold();
}

ThresholdResult edge_buyer_threshold(const MarketInstance& m, WeightKind kind,
                                     const Reports& r, const Edge& e) {
  return DeviationSlice::for_edge(m, kind, r, Side::Buyer, e).threshold();
}

Ext snapped_critical_cost(const MarketInstance& m, WeightKind kind,
                          const Reports& r, const Edge& e) {
  DeviationSlice slice = DeviationSlice::for_edge(m, kind, r, Side::Seller, e);
  ThresholdResult t = slice.threshold();
  if (t.value.is_neg_inf()) return t.value;
  const Distribution& law = m.seller(e.second);
  if (!law.is_discrete()) return t.value;
  const auto& sup = law.support();
  for (int k = static_cast<int>(sup.size()) - 1; k >= 0; --k) {
    if (Ext(sup[k]) > t.value) continue;
    if (slice.member_at(sup[k])) return Ext(sup[k]);
    // only the boundary atom can fail while below the threshold value
  }
  return Ext::neg_inf();
}

PairDecomp pair_decomp(const MarketInstance& m, WeightKind kind,
                       const Reports& r, const Edge& e) {
  check_edge(m, e);
  const int i = e.first, j = e.second;
  PairDecomp pd;
  const auto& fam = m.feasible();
  for (int k = 0; k < static_cast<int>(fam.size()); ++k) {
    const Matching& mu = fam[k];
    Ext base(0);
    for (const Edge& f : mu.edges) {
      if (f.first != i) base += buyer_term(m, kind, f.first, r.values[f.first]);
      if (f.second != j)
        base += seller_term(m, kind, f.second, r.costs[f.second]);
    }
    bool bi = mu.uses_buyer(i), sj = mu.uses_seller(j);
    ClassBest& best = mu.contains(e)  ? pd.containing
                      : !bi && !sj    ? pd.neither
                      : bi && !sj     ? pd.buyer_elsewhere
                      : !bi && sj     ? pd.seller_elsewhere
                                      : pd.both_elsewhere;
    absorb(best, base, k);
  }
  return pd;
}

bool pair_member(const PairDecomp& pd, const Ext& g, const Ext& h) {
  struct Entry {
    Ext w;
    int index;
  };
  auto entry = [](const ClassBest& c, const Ext& shift) {
    if (c.empty()) return Entry{Ext::neg_inf(), -1};
    return Entry{c.weight + shift, c.index};
  };
  Entry win = entry(pd.containing, g + h);
  if (win.index < 0) return false;
  bool is_member = true;
  auto challenge = [&](const Entry& cand) {
    if (cand.index < 0) return;
    if (!beats(win.w, win.index, cand.w, cand.index)) {
      win = cand;
      is_member = false;
    }
  };
  challenge(entry(pd.neither, Ext(0)));
  challenge(entry(pd.buyer_elsewhere, g));
  challenge(entry(pd.seller_elsewhere, h));
  challenge(entry(pd.both_elsewhere, g + h));
  return is_member;
}

namespace {

// shared candidate preparation: clamp to [0, inf), add 0 and an above-all
// probe, and interleave midpoints so every maximal win/lose interval whose
// boundary is a candidate gets sampled in its interior
std::vector<Rat> scan_points(std::vector<Rat> candidates) {
  std::vector<Rat> cands;
  cands.push_back(Rat(0));
  for (const Rat& c : candidates)
    if (c >= 0) cands.push_back(c);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  cands.push_back(cands.back() + 1);
  std::vector<Rat> points;
  points.reserve(2 * cands.size());
  for (size_t k = 0; k < cands.size(); ++k) {
    points.push_back(cands[k]);
    if (k + 1 < cands.size()) points.push_back((cands[k] + cands[k + 1]) / 2);
  }
  return points;
}

bool is_candidate(size_t point_index) { return point_index % 2 == 0; }

}  // namespace

ThresholdResult infimum_winning(std::vector<Rat> candidates,
                                const std::function<bool(const Rat&)>& wins) {
  std::vector<Rat> pts = scan_points(std::move(candidates));
  for (size_t k = 0; k < pts.size(); ++k) {
    if (!wins(pts[k])) continue;
    if (is_candidate(k)) {
      if (k + 1 == pts.size())
        throw ContractError("winning boundary not covered by candidates");
      return ThresholdResult{Ext(pts[k]), true};
    }
    return ThresholdResult{Ext(pts[k - 1]), false};
  }
  return ThresholdResult{Ext::pos_inf(), false};
}

ThresholdResult supremum_winning(std::vector<Rat> candidates,
                                 const std::function<bool(const Rat&)>& wins) {
  std::vector<Rat> pts = scan_points(std::move(candidates));
  for (size_t k = pts.size(); k-- > 0;) {
    if (!wins(pts[k])) continue;
    if (is_candidate(k)) {
      if (k + 1 == pts.size()) return ThresholdResult{Ext::pos_inf(), false};
      return ThresholdResult{Ext(pts[k]), true};
    }
    return ThresholdResult{Ext(pts[k + 1]), false};
  }
  return ThresholdResult{Ext::neg_inf(), false};
}

std::optional<std::pair<Rat, Rat>> membership_monotone_scan(
    Side side, const std::vector<Rat>& grid,
    const std::function<bool(const Rat&)>& wins) {
  std::vector<Rat> pts = scan_points(grid);
  // sellers win a lower set; flip to scan both sides as an upper set
  if (side == Side::Seller) std::reverse(pts.begin(), pts.end());
  bool seen_win = false;
  Rat first_win;
  for (const Rat& z : pts) {
    bool w = wins(z);
    if (w && !seen_win) {
      seen_win = true;
      first_win = z;
    }
    if (!w && seen_win) return std::make_pair(first_win, z);
  }
  return std::nullopt;
}

}  // namespace gftlab
