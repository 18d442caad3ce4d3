#ifndef FLSIM_TESTS_TEST_UTIL_HPP_
#define FLSIM_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <vector>

#include "flsim/data.hpp"
#include "flsim/params.hpp"
#include "flsim/rng.hpp"

namespace flsim::testing {

// Single-slot-per-layer params filled from a keyed stream.
inline LayeredParams random_params(const std::vector<std::size_t> &widths, std::uint64_t seed,
                                   double scale = 1.0) {
  std::vector<LayerSlot> slots;
  KeyedRng rng(seed, {0xEE});
  for (std::size_t l = 0; l < widths.size(); ++l) {
    LayerSlot s;
    s.layer_id = static_cast<LayerId>(l);
    s.shape = {widths[l]};
    s.values.resize(widths[l]);
    for (auto &v : s.values) v = scale * rng.uniform(-1.0, 1.0);
    slots.push_back(std::move(s));
  }
  return LayeredParams(std::move(slots));
}

inline LayeredParams single_layer(std::vector<double> values) {
  LayerSlot s;
  s.shape = {values.size()};
  s.values = std::move(values);
  return LayeredParams({s});
}

inline Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes,
                          std::uint64_t seed) {
  KeyedRng rng(seed, {0xBA});
  Batch b;
  b.inputs = Matrix(n, dim);
  for (auto &v : b.inputs.data) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(classes)));
  return b;
}

}  // namespace flsim::testing

#endif  // FLSIM_TESTS_TEST_UTIL_HPP_
