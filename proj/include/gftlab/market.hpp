#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gftlab/distribution.hpp"
#include "gftlab/rational.hpp"

namespace gftlab {

using Edge = std::pair<int, int>;  // (buyer index, seller index)

// a matching is a set of edges, no shared endpoints; edges kept sorted so the
// edge list itself is the canonical key. canonical order over matchings =
// lexicographic over sorted edge lists with shorter prefixes first (so the
// empty matching is first). this order IS the global tie-break.
struct Matching {
  std::vector<Edge> edges;
  std::uint64_t buyer_mask = 0, seller_mask = 0;

  static Matching of(std::vector<Edge> e);
  bool contains(const Edge& e) const;
  bool uses_buyer(int i) const { return buyer_mask >> i & 1; }
  bool uses_seller(int j) const { return seller_mask >> j & 1; }
  int partner_of_buyer(int i) const;   // -1 if unmatched
  int partner_of_seller(int j) const;  // -1 if unmatched
  size_t size() const { return edges.size(); }

  friend bool operator<(const Matching& a, const Matching& b) {
    return a.edges < b.edges;
  }
  friend bool operator==(const Matching& a, const Matching& b) {
    return a.edges == b.edges;
  }
};

struct FeasibilityFamily {
  enum class Kind { All, MaxTrades, Explicit };
  Kind kind = Kind::All;
  int max_trades = 0;                 // MaxTrades only
  std::vector<Matching> members;      // Explicit only (input, pre-closure)
  bool auto_close = false;            // Explicit only
};

struct Profile {
  std::vector<Rat> values, costs;
  Rat prob = 1;
};

struct Reports {
  std::vector<Rat> values, costs;
};

inline Reports truthful(const Profile& p) { return Reports{p.values, p.costs}; }

class MarketInstance {
 public:
  static constexpr std::size_t kEnumerationLimit = 1000000;

  // validates everything and enumerates the feasibility family up front
  MarketInstance(std::vector<Distribution> buyers,
                 std::vector<Distribution> sellers, std::vector<Edge> edges,
                 FeasibilityFamily family);

  int n_buyers() const { return static_cast<int>(buyers_.size()); }
  int n_sellers() const { return static_cast<int>(sellers_.size()); }
  const std::vector<Distribution>& buyers() const { return buyers_; }
  const std::vector<Distribution>& sellers() const { return sellers_; }
  const Distribution& buyer(int i) const { return buyers_[i]; }
  const Distribution& seller(int j) const { return sellers_[j]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const FeasibilityFamily& family() const { return family_; }

  // all feasible matchings in canonical order; index 0 is the empty matching
  const std::vector<Matching>& feasible() const { return feasible_; }

  bool enumerable() const;  // every law discrete
  std::size_t profile_count() const;

  std::uint64_t hash() const;

 private:
  std::vector<Distribution> buyers_, sellers_;
  std::vector<Edge> edges_;
  FeasibilityFamily family_;
  std::vector<Matching> feasible_;
};

// full product of supports, buyer-major then sellers, mixed-radix order;
// probabilities exact and summing to exactly 1. throws CapabilityError on
// non-enumerable instances.
std::vector<Profile> enumerate_profiles(const MarketInstance& m);
Profile sample_profile(const MarketInstance& m, std::mt19937_64& rng);

// JSON schema:
//   distribution: {"kind":"discrete","atoms":[[x,p],...]}
//                 {"kind":"uniform","lo":a,"hi":b}
//   instance:     {"buyers":[...],"sellers":[...],"edges":[[i,j],...],
//                  "family":{"kind":"all"} | {"kind":"max_trades","k":n}
//                         | {"kind":"explicit","matchings":[[[i,j],...],...],
//                            "auto_close":bool}}
MarketInstance instance_from_json(const nlohmann::json& j);
nlohmann::json instance_to_json(const MarketInstance& m);
MarketInstance load_instance(const std::string& path);
void save_instance(const MarketInstance& m, const std::string& path);

nlohmann::json distribution_to_json(const Distribution& d);
Distribution distribution_from_json(const nlohmann::json& j);

std::uint64_t fnv1a(const std::string& s);

}  // namespace gftlab
