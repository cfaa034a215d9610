#pragma once

#include <random>

#include "gftlab/market.hpp"

namespace gftlab {

// deterministic random-market generator: every draw flows through the seeded
// engine via integer rejection sampling, so a seed pins the instance exactly
// (byte-identical JSON across runs and platforms). atoms live on a half-step
// grid and probabilities are integer weights normalized exactly, which keeps
// the downstream expectation arithmetic rational.
struct GenSpec {
  int buyers = 0;   // exact count when > 0, else random in 1..3
  int sellers = 0;  // exact count when > 0, else random in 1..3
  int atoms = 0;    // exact atoms per discrete law when > 0, else random 1..4
  int grid_ticks = 10;    // atom locations k/2 for k in 0..grid_ticks
  int max_weight = 9;     // probability weights drawn from 1..max_weight
  int density_pct = 75;   // chance each candidate edge is kept
  int family = -1;        // -1 mixed, 0 all matchings, k>0 at most k trades
  bool single_edge = false;  // one buyer, one seller, one edge
  std::size_t max_profiles = 512;  // resample until the product fits
  std::size_t max_feasible = 20;
};

MarketInstance random_instance(std::mt19937_64& rng, const GenSpec& spec);

}  // namespace gftlab
