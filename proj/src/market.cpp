#include "gftlab/market.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace gftlab {

Matching Matching::of(std::vector<Edge> e) {
  std::sort(e.begin(), e.end());
  Matching m;
  m.edges = std::move(e);
  for (const auto& [i, j] : m.edges) {
    if (m.buyer_mask >> i & 1 || m.seller_mask >> j & 1)
      throw ValidationError("edge set is not a matching");
    m.buyer_mask |= std::uint64_t(1) << i;
    m.seller_mask |= std::uint64_t(1) << j;
  }
  return m;
}

bool Matching::contains(const Edge& e) const {
  return std::binary_search(edges.begin(), edges.end(), e);
}

int Matching::partner_of_buyer(int i) const {
  for (const auto& [b, s] : edges)
    if (b == i) return s;
  return -1;
}

int Matching::partner_of_seller(int j) const {
  for (const auto& [b, s] : edges)
    if (s == j) return b;
  return -1;
}

namespace {

// depth-first enumeration of matchings over `edges` up to `max_size`, in
// canonical order (edges pre-sorted; extending a prefix by a later edge
// preserves lexicographic order)
std::vector<Matching> enumerate_matchings(const std::vector<Edge>& edges,
                                          size_t max_size) {
  std::vector<Matching> out;
  Matching cur;
  auto rec = [&](auto&& self, size_t from) -> void {
    out.push_back(cur);
    if (out.size() > MarketInstance::kEnumerationLimit)
      throw CapacityError("feasibility family exceeds enumeration limit");
    if (cur.size() == max_size) return;
    for (size_t e = from; e < edges.size(); ++e) {
      const auto& [i, j] = edges[e];
      if (cur.buyer_mask >> i & 1 || cur.seller_mask >> j & 1) continue;
      cur.edges.push_back(edges[e]);
      cur.buyer_mask |= std::uint64_t(1) << i;
      cur.seller_mask |= std::uint64_t(1) << j;
      self(self, e + 1);
      cur.edges.pop_back();
      cur.buyer_mask &= ~(std::uint64_t(1) << i);
      cur.seller_mask &= ~(std::uint64_t(1) << j);
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace

MarketInstance::MarketInstance(std::vector<Distribution> buyers,
                               std::vector<Distribution> sellers,
                               std::vector<Edge> edges,
                               FeasibilityFamily family)
    : buyers_(std::move(buyers)),
      sellers_(std::move(sellers)),
      edges_(std::move(edges)),
      family_(std::move(family)) {
  if (buyers_.size() > 62 || sellers_.size() > 62)
    throw CapacityError("too many agents");
  std::sort(edges_.begin(), edges_.end());
  for (size_t e = 0; e < edges_.size(); ++e) {
    const auto& [i, j] = edges_[e];
    if (i < 0 || i >= n_buyers() || j < 0 || j >= n_sellers())
      throw ValidationError("edge endpoint out of range");
    if (e > 0 && edges_[e] == edges_[e - 1])
      throw ValidationError("duplicate edge");
  }

  switch (family_.kind) {
    case FeasibilityFamily::Kind::All:
      feasible_ = enumerate_matchings(edges_, edges_.size());
      break;
    case FeasibilityFamily::Kind::MaxTrades: {
      if (family_.max_trades < 0)
        throw ValidationError("max_trades must be non-negative");
      feasible_ = enumerate_matchings(
          edges_, static_cast<size_t>(family_.max_trades));
      break;
    }
    case FeasibilityFamily::Kind::Explicit: {
      std::set<Matching> fam;
      for (const Matching& m : family_.members) {
        for (const Edge& e : m.edges)
          if (!std::binary_search(edges_.begin(), edges_.end(), e))
            throw ValidationError("family member uses an unknown edge");
        if (family_.auto_close) {
          // close downward: every sub-matching of a member is a member
          const size_t sz = m.size();
          for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << sz); ++bits) {
            std::vector<Edge> sub;
            for (size_t t = 0; t < sz; ++t)
              if (bits >> t & 1) sub.push_back(m.edges[t]);
            fam.insert(Matching::of(std::move(sub)));
          }
        } else {
          fam.insert(m);
        }
      }
      if (family_.auto_close) fam.insert(Matching{});
      if (!fam.count(Matching{}))
        throw ValidationError("family must contain the empty matching");
      for (const Matching& m : fam) {
        for (const Edge& e : m.edges) {
          Matching sub = m;
          sub.edges.erase(std::find(sub.edges.begin(), sub.edges.end(), e));
          sub = Matching::of(std::move(sub.edges));
          if (!fam.count(sub))
            throw ValidationError("family is not downward closed");
        }
      }
      feasible_.assign(fam.begin(), fam.end());
      break;
    }
  }
  std::sort(feasible_.begin(), feasible_.end());
}

bool MarketInstance::enumerable() const {
  for (const auto& d : buyers_)
    if (!d.is_discrete()) return false;
  for (const auto& d : sellers_)
    if (!d.is_discrete()) return false;
  return true;
}

std::size_t MarketInstance::profile_count() const {
  if (!enumerable()) return 0;
  std::size_t n = 1;
  for (const auto& d : buyers_) n *= d.support().size();
  for (const auto& d : sellers_) n *= d.support().size();
  return n;
}

std::vector<Profile> enumerate_profiles(const MarketInstance& m) {
  if (!m.enumerable())
    throw CapabilityError("instance has continuous laws; enumeration needs "
                          "discrete supports everywhere");
  std::vector<const Distribution*> laws;
  for (const auto& d : m.buyers()) laws.push_back(&d);
  for (const auto& d : m.sellers()) laws.push_back(&d);

  std::vector<Profile> out;
  std::vector<size_t> idx(laws.size(), 0);
  for (;;) {
    Profile p;
    p.prob = 1;
    for (size_t a = 0; a < laws.size(); ++a) {
      const Rat& v = laws[a]->support()[idx[a]];
      (a < m.buyers().size() ? p.values : p.costs).push_back(v);
      p.prob *= laws[a]->probs()[idx[a]];
    }
    out.push_back(std::move(p));
    // odometer, last position fastest (buyer-major order)
    size_t a = laws.size();
    while (a-- > 0) {
      if (++idx[a] < laws[a]->support().size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (laws.empty()) return out;
  }
}

Profile sample_profile(const MarketInstance& m, std::mt19937_64& rng) {
  Profile p;
  p.prob = 1;
  for (const auto& d : m.buyers()) p.values.push_back(d.sample(rng));
  for (const auto& d : m.sellers()) p.costs.push_back(d.sample(rng));
  return p;
}

namespace {

// exact rationals travel as canonical "p/q" strings; plain JSON numbers are
// still accepted on input for hand-written files
Rat rat_from_json(const nlohmann::json& j) {
  if (j.is_number()) return rat_from_double(j.get<double>());
  if (!j.is_string())
    throw ValidationError("expected a number or \"p/q\" string, got " +
                          j.dump());
  const std::string s = j.get<std::string>();
  const auto bad = [&] {
    return ValidationError("not an exact rational: \"" + s + "\"");
  };
  std::string_view v(s);
  if (!v.empty() && (v.front() == '+' || v.front() == '-')) v.remove_prefix(1);
  const auto digits = [](std::string_view w) {
    return !w.empty() &&
           w.find_first_not_of("0123456789") == std::string_view::npos;
  };
  const auto slash = v.find('/');
  if (slash == std::string_view::npos) {
    if (!digits(v)) throw bad();
  } else {
    const auto den = v.substr(slash + 1);
    if (!digits(v.substr(0, slash)) || !digits(den)) throw bad();
    if (den.find_first_not_of('0') == std::string_view::npos) throw bad();
  }
  return Rat(s);
}

}  // namespace

nlohmann::json distribution_to_json(const Distribution& d) {
  nlohmann::json j;
  if (d.is_discrete()) {
    j["kind"] = "discrete";
    auto atoms = nlohmann::json::array();
    for (size_t k = 0; k < d.support().size(); ++k)
      atoms.push_back({rat_str(d.support()[k]), rat_str(d.probs()[k])});
    j["atoms"] = atoms;
  } else {
    j["kind"] = "uniform";
    j["lo"] = rat_str(d.lo());
    j["hi"] = rat_str(d.hi());
  }
  return j;
}

Distribution distribution_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete") {
    std::vector<std::pair<Rat, Rat>> atoms;
    for (const auto& a : j.at("atoms"))
      atoms.emplace_back(rat_from_json(a.at(0)), rat_from_json(a.at(1)));
    return Distribution::discrete(std::move(atoms));
  }
  if (kind == "uniform")
    return Distribution::uniform(rat_from_json(j.at("lo")),
                                 rat_from_json(j.at("hi")));
  throw ValidationError("unknown distribution kind: " + kind);
}

MarketInstance instance_from_json(const nlohmann::json& j) {
  std::vector<Distribution> buyers, sellers;
  for (const auto& b : j.at("buyers")) buyers.push_back(distribution_from_json(b));
  for (const auto& s : j.at("sellers")) sellers.push_back(distribution_from_json(s));
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges"))
    edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());

  FeasibilityFamily fam;
  if (j.contains("family")) {
    const auto& f = j.at("family");
    const std::string kind = f.at("kind").get<std::string>();
    if (kind == "all") {
      fam.kind = FeasibilityFamily::Kind::All;
    } else if (kind == "max_trades") {
      fam.kind = FeasibilityFamily::Kind::MaxTrades;
      fam.max_trades = f.at("k").get<int>();
    } else if (kind == "explicit") {
      fam.kind = FeasibilityFamily::Kind::Explicit;
      fam.auto_close = f.value("auto_close", false);
      for (const auto& mj : f.at("matchings")) {
        std::vector<Edge> es;
        for (const auto& e : mj) es.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        fam.members.push_back(Matching::of(std::move(es)));
      }
    } else {
      throw ValidationError("unknown family kind: " + kind);
    }
  }
  return MarketInstance(std::move(buyers), std::move(sellers), std::move(edges),
                        std::move(fam));
}

nlohmann::json instance_to_json(const MarketInstance& m) {
  nlohmann::json j;
  j["buyers"] = nlohmann::json::array();
  j["sellers"] = nlohmann::json::array();
  for (const auto& d : m.buyers()) j["buyers"].push_back(distribution_to_json(d));
  for (const auto& d : m.sellers()) j["sellers"].push_back(distribution_to_json(d));
  j["edges"] = nlohmann::json::array();
  for (const auto& [i, jdx] : m.edges()) j["edges"].push_back({i, jdx});
  nlohmann::json fam;
  switch (m.family().kind) {
    case FeasibilityFamily::Kind::All:
      fam["kind"] = "all";
      break;
    case FeasibilityFamily::Kind::MaxTrades:
      fam["kind"] = "max_trades";
      fam["k"] = m.family().max_trades;
      break;
    case FeasibilityFamily::Kind::Explicit: {
      fam["kind"] = "explicit";
      fam["auto_close"] = m.family().auto_close;
      auto arr = nlohmann::json::array();
      for (const auto& mm : m.family().members) {
        auto mj = nlohmann::json::array();
        for (const auto& [i, jdx] : mm.edges) mj.push_back({i, jdx});
        arr.push_back(mj);
      }
      fam["matchings"] = arr;
      break;
    }
  }
  j["family"] = fam;
  return j;
}

MarketInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file: " + path);
  nlohmann::json j;
  in >> j;
  return instance_from_json(j);
}

void save_instance(const MarketInstance& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write instance file: " + path);
  out << instance_to_json(m).dump(2) << "\n";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t MarketInstance::hash() const {
  return fnv1a(instance_to_json(*this).dump());
}

}  // namespace gftlab
