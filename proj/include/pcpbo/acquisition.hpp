#pragma once

#include <cstddef>
#include <utility>

#include "pcpbo/pref_gp.hpp"

namespace pcpbo {

struct QueryPair {
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  int redraws = 0;  ///< how many times the second candidate was redrawn

  bool operator==(const QueryPair&) const = default;
};

/// Two distinct grid points, uniformly without replacement.
QueryPair random_pair(const WeightGrid& grid, Rng& rng);

/// Thompson sampling: argmax of two posterior draws (ties to the lowest index).
/// While the two are closer than min_separation the second draw is repeated,
/// at most max_reselect times; the last pair is returned regardless.
QueryPair thompson_pair(const GaussianApprox& q, const WeightGrid& grid, const AcquisitionConfig& cfg,
                        Rng& rng);

}  // namespace pcpbo
