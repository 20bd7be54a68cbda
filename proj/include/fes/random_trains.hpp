#pragma once

// Random admissible pulse trains for randomized checks.

#include <cstddef>
#include <random>

#include "fes/model.hpp"

namespace fes {

struct RandomTrainOptions {
  std::size_t n_max = 10;   // pulses after t_0, drawn in [0, n_max]
  double i_min = 20.0;      // ms
  double gap_max = 80.0;    // interpulse drawn in [i_min, gap_max]
  double tail_max = 100.0;  // T - t_n drawn in (0, tail_max]
  bool unit_amplitudes = false;
};

PulseTrain random_train(std::mt19937_64& rng, const RandomTrainOptions& opts = {});

/// Runs of 1..p pulses with in-run gaps in [i_min, 5 tau_c] and gaps longer
/// than 5 tau_c between runs, so that persistence_order(train) <= p.
PulseTrain random_persistent_train(std::mt19937_64& rng, std::size_t p, const ModelParams& params,
                                   std::size_t n_max = 12, double i_min = 10.0);

}  // namespace fes
