#include "pcpbo/acquisition.hpp"

#include <random>

namespace pcpbo {

QueryPair random_pair(const WeightGrid& grid, Rng& rng) {
  if (grid.size() < 2) throw std::invalid_argument("random_pair: grid needs at least two points");
  std::uniform_int_distribution<std::size_t> first(0, grid.size() - 1);
  std::uniform_int_distribution<std::size_t> second(0, grid.size() - 2);
  QueryPair p;
  p.i0 = first(rng);
  p.i1 = second(rng);
  if (p.i1 >= p.i0) ++p.i1;
  return p;
}

QueryPair thompson_pair(const GaussianApprox& q, const WeightGrid& grid, const AcquisitionConfig& cfg,
                        Rng& rng) {
  cfg.validate();
  if (q.size() != grid.size()) throw std::invalid_argument("thompson_pair: posterior/grid mismatch");
  QueryPair p;
  p.i0 = argmax_lowest(sample_utility(q, rng));
  p.i1 = argmax_lowest(sample_utility(q, rng));
  const WeightVector w0 = grid.point(p.i0);
  while (w_distance(w0, grid.point(p.i1)) < cfg.min_separation && p.redraws < cfg.max_reselect) {
    p.i1 = argmax_lowest(sample_utility(q, rng));
    ++p.redraws;
  }
  return p;
}

}  // namespace pcpbo
