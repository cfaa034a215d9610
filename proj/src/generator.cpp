#include "gftlab/generator.hpp"

#include <algorithm>
#include <vector>

#include "gftlab/errors.hpp"

namespace gftlab {

namespace {

Distribution random_discrete(std::mt19937_64& rng, const GenSpec& spec,
                             int atom_budget) {
  const int ticks = spec.grid_ticks + 1;
  int n = std::min(atom_budget, ticks);
  // distinct grid locations via partial Fisher-Yates on the tick indices
  std::vector<int> pool(static_cast<std::size_t>(ticks));
  for (int k = 0; k < ticks; ++k) pool[static_cast<std::size_t>(k)] = k;
  std::vector<Rat> locations;
  for (int k = 0; k < n; ++k) {
    std::size_t pick =
        static_cast<std::size_t>(k) +
        sample_below(rng, static_cast<std::uint64_t>(ticks - k));
    std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
    locations.push_back(Rat(pool[static_cast<std::size_t>(k)], 2));
  }
  std::sort(locations.begin(), locations.end());
  std::vector<Rat> weights;
  Rat total = 0;
  for (int k = 0; k < n; ++k) {
    weights.push_back(Rat(
        1 + static_cast<long>(sample_below(
                rng, static_cast<std::uint64_t>(spec.max_weight)))));
    total += weights.back();
  }
  std::vector<std::pair<Rat, Rat>> atoms;
  for (int k = 0; k < n; ++k)
    atoms.push_back({locations[static_cast<std::size_t>(k)],
                     weights[static_cast<std::size_t>(k)] / total});
  return Distribution::discrete(std::move(atoms));
}

}  // namespace

MarketInstance random_instance(std::mt19937_64& rng, const GenSpec& spec) {
  for (int attempt = 0; attempt < 256; ++attempt) {
    // shrink the shape if the size constraints keep rejecting
    const bool cramped = attempt >= 64;
    int nb = spec.buyers > 0 ? spec.buyers
                             : 1 + static_cast<int>(sample_below(rng, 3));
    int ns = spec.sellers > 0 ? spec.sellers
                              : 1 + static_cast<int>(sample_below(rng, 3));
    int atom_budget = spec.atoms > 0
                          ? spec.atoms
                          : 1 + static_cast<int>(sample_below(rng, 4));
    if (spec.single_edge) nb = ns = 1;
    if (cramped) {
      nb = std::min(nb, 2);
      ns = std::min(ns, 2);
      atom_budget = std::min(atom_budget, 2);
    }

    std::vector<Distribution> buyers, sellers;
    for (int i = 0; i < nb; ++i) {
      int a = spec.atoms > 0 ? spec.atoms
                             : 1 + static_cast<int>(sample_below(
                                       rng, static_cast<std::uint64_t>(
                                                atom_budget)));
      buyers.push_back(random_discrete(rng, spec, a));
    }
    for (int j = 0; j < ns; ++j) {
      int a = spec.atoms > 0 ? spec.atoms
                             : 1 + static_cast<int>(sample_below(
                                       rng, static_cast<std::uint64_t>(
                                                atom_budget)));
      sellers.push_back(random_discrete(rng, spec, a));
    }

    std::vector<Edge> edges;
    if (spec.single_edge) {
      edges.push_back({0, 0});
    } else {
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < ns; ++j)
          if (sample_below(rng, 100) <
              static_cast<std::uint64_t>(spec.density_pct))
            edges.push_back({i, j});
      if (edges.empty())
        edges.push_back({static_cast<int>(sample_below(
                             rng, static_cast<std::uint64_t>(nb))),
                         static_cast<int>(sample_below(
                             rng, static_cast<std::uint64_t>(ns)))});
    }

    FeasibilityFamily family;
    int fam = spec.family;
    if (fam < 0)
      fam = sample_below(rng, 4) == 0
                ? 1 + static_cast<int>(sample_below(
                          rng, static_cast<std::uint64_t>(std::min(nb, ns))))
                : 0;
    if (fam > 0) {
      family.kind = FeasibilityFamily::Kind::MaxTrades;
      family.max_trades = fam;
    }

    MarketInstance m(std::move(buyers), std::move(sellers), std::move(edges),
                     family);
    if (m.profile_count() <= spec.max_profiles &&
        m.feasible().size() <= spec.max_feasible)
      return m;
  }
  throw ContractError("random_instance failed to satisfy the size budget");
}

}  // namespace gftlab
