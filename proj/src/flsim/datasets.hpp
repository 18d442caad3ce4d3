/**
 * Copyright 2026 The flsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FLSIM_DATASETS_HPP_
#define FLSIM_DATASETS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "flsim/data.hpp"
#include "flsim/rng.hpp"

namespace flsim {

// Pooled labeled samples before partitioning.
struct LabeledPool {
  std::size_t num_classes = 0;
  Batch samples;
};

// ---------------------------------------------------------------------------
// Two-class 2-D toy domains.
//
// Globally class = [y > 0]. Domain d additionally has a vertical local
// boundary x = c_d with class 1 on side s_d:
//
//   domain  c_d   s_d   class-1 x-range   class-0 x-range
//     0     -6    left   [-10, -6.5]       [-5.5, -1]
//     1     +6    right  [6.5, 10]         [1, 5.5]
//     2     -6    right  [-5.5, -1]        [-10, -6.5]
//     3     +6    left   [1, 5.5]          [6.5, 10]
//
// Clean class-1 points have y in [0.5, 5], clean class-0 points y in
// [-5, -0.5]. A noise point keeps its label and its side of the local
// boundary but is drawn from the opposite y band, so on a single domain the
// local boundary separates everything while y = 0 does not.
// ---------------------------------------------------------------------------
struct ToySpec {
  int domain_id = 0;
  std::size_t n_per_class = 100;
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct ToyGeometry {
  double boundary_x;
  bool class1_left;
};

inline constexpr int kToyDomains = 4;
ToyGeometry toy_geometry(int domain_id);

// Independent train and test draws (streams differ) with identical sizes.
ClientDataset make_toy_domain(const ToySpec &spec);

// The four domains pooled and dealt round-robin after a keyed shuffle, so
// every client sees the same mixture.
std::vector<ClientDataset> make_toy_iid(std::size_t num_clients, std::size_t n_per_class,
                                        double noise_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gaussian blobs. Class c is centred at (1 + c / (2 * dim)) * sign * e_axis
// with axis = c % dim and sign = + for even (c / dim), - otherwise, so two
// classes in one dimension sit at +1 and -1.
// ---------------------------------------------------------------------------
std::vector<double> blob_center(std::size_t cls, std::size_t dim);
LabeledPool make_blobs(std::size_t num_classes, std::size_t dim, std::size_t n_per_class,
                       double spread, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dirichlet label-skew partitioning.
// ---------------------------------------------------------------------------
struct DirichletSpec {
  double alpha = 0.1;
  std::size_t num_clients = 10;
  std::uint64_t seed = 0;
  // With replacement: each client's count of class c is drawn from the
  // multinomial and filled by sampling the class pool uniformly with
  // replacement. Without replacement: the shuffled class pool itself is dealt
  // out, so shard sizes sum to the pool size.
  bool with_replacement = true;
  int max_retries = 100;
};

std::vector<double> sample_dirichlet(double alpha, std::size_t k, KeyedRng &rng);

std::vector<ClientDataset> partition_dirichlet(const LabeledPool &pool, const DirichletSpec &spec,
                                               double test_fraction);

// ---------------------------------------------------------------------------
// IDX (MNIST-style) files. Images: magic 0x00000803, count, rows, cols, then
// count*rows*cols unsigned bytes. Labels: magic 0x00000801, count, bytes.
// All header integers big-endian.
// ---------------------------------------------------------------------------
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

LabeledPool load_idx(const std::string &images_path, const std::string &labels_path);

}  // namespace flsim

#endif  // FLSIM_DATASETS_HPP_
