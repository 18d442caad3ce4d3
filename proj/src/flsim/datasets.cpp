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

#include "flsim/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "flsim/error.hpp"

namespace flsim {

namespace {

struct Range {
  double lo, hi;
};

constexpr Range kNearSide{-5.5, -1.0};  // mirrored for +6 domains
constexpr Range kFarSide{-10.0, -6.5};
constexpr Range kUpperBand{0.5, 5.0};
constexpr Range kLowerBand{-5.0, -0.5};

// x-range for a class in a domain.
Range toy_x_range(int domain, int label) {
  const ToyGeometry g = toy_geometry(domain);
  // Class 1 lives on the left of the boundary iff class1_left.
  const bool left = (label == 1) == g.class1_left;
  Range r = left ? kFarSide : kNearSide;
  if (g.boundary_x > 0) {
    // Mirror through x = 0: left of +6 is [1, 5.5], right is [6.5, 10].
    r = left ? Range{-kNearSide.hi, -kNearSide.lo} : Range{-kFarSide.hi, -kFarSide.lo};
  }
  return r;
}

Batch draw_toy(int domain, std::size_t n_per_class, double noise_fraction, KeyedRng &rng) {
  Batch b;
  b.inputs.cols = 2;
  const auto n_noise = static_cast<std::size_t>(std::floor(noise_fraction * n_per_class));
  for (int label = 0; label < 2; ++label) {
    const Range xr = toy_x_range(domain, label);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const bool noisy = i < n_noise;
      const bool upper = (label == 1) != noisy;
      const Range yr = upper ? kUpperBand : kLowerBand;
      const double pt[2] = {rng.uniform(xr.lo, xr.hi), rng.uniform(yr.lo, yr.hi)};
      b.append(pt, label);
    }
  }
  return b;
}

void shuffle_indices(std::vector<std::size_t> &v, KeyedRng &rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

ClientDataset split_shard(int client_id, std::size_t num_classes, const Batch &shard,
                          double test_fraction, KeyedRng &rng) {
  std::vector<std::size_t> idx(shard.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle_indices(idx, rng);
  const std::size_t n = idx.size();
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  ClientDataset cd;
  cd.client_id = client_id;
  cd.num_classes = num_classes;
  cd.test = shard.gather(std::span<const std::size_t>(idx.data(), n_test));
  cd.train = shard.gather(std::span<const std::size_t>(idx.data() + n_test, n - n_test));
  cd.label_histogram = histogram(cd.train, num_classes);
  return cd;
}

std::uint32_t read_be32(const unsigned char *p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

std::vector<unsigned char> slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open IDX file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ToyGeometry toy_geometry(int domain_id) {
  switch (domain_id) {
    case 0: return {-6.0, true};
    case 1: return {6.0, false};
    case 2: return {-6.0, false};
    case 3: return {6.0, true};
    default: throw ConfigError("toy domain_id must be in 0..3, got " + std::to_string(domain_id));
  }
}

ClientDataset make_toy_domain(const ToySpec &spec) {
  toy_geometry(spec.domain_id);
  if (spec.n_per_class < 1) throw ConfigError("dataset.n_per_class must be >= 1");
  if (!(spec.noise_fraction >= 0.0 && spec.noise_fraction < 0.5)) {
    throw ConfigError("dataset.noise_fraction must be in [0, 0.5)");
  }
  const auto d = static_cast<std::uint64_t>(spec.domain_id);
  KeyedRng train_rng(spec.seed, {0x70, d, 0});
  KeyedRng test_rng(spec.seed, {0x70, d, 1});
  ClientDataset cd;
  cd.client_id = spec.domain_id;
  cd.num_classes = 2;
  cd.train = draw_toy(spec.domain_id, spec.n_per_class, spec.noise_fraction, train_rng);
  cd.test = draw_toy(spec.domain_id, spec.n_per_class, spec.noise_fraction, test_rng);
  cd.label_histogram = histogram(cd.train, 2);
  return cd;
}

std::vector<ClientDataset> make_toy_iid(std::size_t num_clients, std::size_t n_per_class,
                                        double noise_fraction, std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  std::vector<Batch> train_parts, test_parts;
  for (int d = 0; d < kToyDomains; ++d) {
    auto cd = make_toy_domain({d, n_per_class, noise_fraction, seed});
    train_parts.push_back(std::move(cd.train));
    test_parts.push_back(std::move(cd.test));
  }
  const Batch train = concat(train_parts);
  const Batch test = concat(test_parts);
  auto deal = [&](const Batch &all, std::uint64_t tag) {
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    KeyedRng rng(seed, {0x71, tag});
    shuffle_indices(idx, rng);
    std::vector<std::vector<std::size_t>> per(num_clients);
    for (std::size_t i = 0; i < idx.size(); ++i) per[i % num_clients].push_back(idx[i]);
    return per;
  };
  const auto tr = deal(train, 0);
  const auto te = deal(test, 1);
  std::vector<ClientDataset> out(num_clients);
  for (std::size_t u = 0; u < num_clients; ++u) {
    out[u].client_id = static_cast<int>(u);
    out[u].num_classes = 2;
    out[u].train = train.gather(tr[u]);
    out[u].test = test.gather(te[u]);
    if (out[u].train.empty() || out[u].test.empty()) {
      throw ConfigError("toy IID split leaves client " + std::to_string(u) + " without data");
    }
    out[u].label_histogram = histogram(out[u].train, 2);
  }
  return out;
}

std::vector<double> blob_center(std::size_t cls, std::size_t dim) {
  std::vector<double> c(dim, 0.0);
  const std::size_t axis = cls % dim;
  const double sign = (cls / dim) % 2 == 0 ? 1.0 : -1.0;
  const double mag = 1.0 + static_cast<double>(cls / (2 * dim));
  c[axis] = sign * mag;
  return c;
}

LabeledPool make_blobs(std::size_t num_classes, std::size_t dim, std::size_t n_per_class,
                       double spread, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("dataset.num_classes must be >= 2");
  if (dim < 1) throw ConfigError("dataset.dim must be >= 1");
  if (n_per_class < 1) throw ConfigError("dataset.n_per_class must be >= 1");
  if (!(spread > 0.0)) throw ConfigError("dataset.spread must be > 0");
  LabeledPool pool;
  pool.num_classes = num_classes;
  pool.samples.inputs = Matrix(num_classes * n_per_class, dim);
  pool.samples.labels.reserve(num_classes * n_per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto center = blob_center(c, dim);
    KeyedRng rng(seed, {0xB1, c});
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      auto x = pool.samples.inputs.row(row);
      for (std::size_t j = 0; j < dim; ++j) x[j] = center[j] + spread * rng.normal();
      pool.samples.labels.push_back(static_cast<int>(c));
    }
  }
  return pool;
}

std::vector<double> sample_dirichlet(double alpha, std::size_t k, KeyedRng &rng) {
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto &v : p) {
    v = rng.gamma(alpha);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // Every gamma draw underflowed; fall back to a point mass.
    std::fill(p.begin(), p.end(), 0.0);
    p[rng.below(k)] = 1.0;
    return p;
  }
  for (auto &v : p) v /= sum;
  return p;
}

std::vector<ClientDataset> partition_dirichlet(const LabeledPool &pool, const DirichletSpec &spec,
                                               double test_fraction) {
  if (pool.samples.empty()) throw ConfigError("partition: pool is empty");
  if (!(spec.alpha > 0.0)) throw ConfigError("dataset.alpha must be > 0");
  if (spec.num_clients < 2) throw ConfigError("num_clients must be >= 2");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction must be in (0, 1)");
  }
  const std::size_t U = spec.num_clients;
  std::vector<std::vector<std::size_t>> by_class(pool.num_classes);
  for (std::size_t i = 0; i < pool.samples.size(); ++i) by_class[pool.samples.labels[i]].push_back(i);

  std::size_t starved = 0, starved_count = 0;
  for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
    std::vector<std::vector<std::size_t>> shards(U);
    for (std::size_t c = 0; c < pool.num_classes; ++c) {
      const auto &members = by_class[c];
      if (members.empty()) continue;
      KeyedRng rng(spec.seed, {0xD1, static_cast<std::uint64_t>(attempt), c});
      const auto p = sample_dirichlet(spec.alpha, U, rng);
      std::vector<double> cdf(U);
      std::partial_sum(p.begin(), p.end(), cdf.begin());
      auto pick_client = [&] {
        const double r = rng.uniform() * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        return std::min<std::size_t>(it - cdf.begin(), U - 1);
      };
      if (spec.with_replacement) {
        std::vector<std::size_t> counts(U, 0);
        for (std::size_t i = 0; i < members.size(); ++i) ++counts[pick_client()];
        for (std::size_t u = 0; u < U; ++u) {
          for (std::size_t i = 0; i < counts[u]; ++i) {
            shards[u].push_back(members[rng.below(members.size())]);
          }
        }
      } else {
        std::vector<std::size_t> order = members;
        shuffle_indices(order, rng);
        for (std::size_t idx : order) shards[pick_client()].push_back(idx);
      }
    }
    bool ok = true;
    for (std::size_t u = 0; u < U; ++u) {
      if (shards[u].size() < 2) {
        ok = false;
        starved = u;
        starved_count = shards[u].size();
        break;
      }
    }
    if (!ok) continue;
    std::vector<ClientDataset> out;
    out.reserve(U);
    for (std::size_t u = 0; u < U; ++u) {
      KeyedRng rng(spec.seed, {0xD2, static_cast<std::uint64_t>(attempt), u});
      out.push_back(split_shard(static_cast<int>(u), pool.num_classes,
                                pool.samples.gather(shards[u]), test_fraction, rng));
    }
    return out;
  }
  throw RuntimeError("partition: client " + std::to_string(starved) + " received " +
                     std::to_string(starved_count) + " sample(s) after " +
                     std::to_string(spec.max_retries + 1) +
                     " attempts; needs at least one train and one test sample");
}

LabeledPool load_idx(const std::string &images_path, const std::string &labels_path) {
  using K = FormatError::Kind;
  const auto img = slurp(images_path);
  const auto lab = slurp(labels_path);
  if (img.size() < 4 || lab.size() < 4) {
    throw FormatError(K::kTruncated, "IDX header truncated");
  }
  if (read_be32(img.data()) != kIdxImageMagic) {
    throw FormatError(K::kWrongMagic, "wrong magic in IDX images file " + images_path);
  }
  if (read_be32(lab.data()) != kIdxLabelMagic) {
    throw FormatError(K::kWrongMagic, "wrong magic in IDX labels file " + labels_path);
  }
  if (img.size() < 16) throw FormatError(K::kTruncated, "IDX images header truncated");
  if (lab.size() < 8) throw FormatError(K::kTruncated, "IDX labels header truncated");
  const std::size_t count = read_be32(img.data() + 4);
  const std::size_t rows = read_be32(img.data() + 8);
  const std::size_t cols = read_be32(img.data() + 12);
  const std::size_t label_count = read_be32(lab.data() + 4);
  const std::size_t pixels = rows * cols;
  if (img.size() - 16 < count * pixels) {
    throw FormatError(K::kTruncated, "IDX images payload truncated: expected " +
                                         std::to_string(count * pixels) + " bytes");
  }
  if (lab.size() - 8 < label_count) {
    throw FormatError(K::kTruncated, "IDX labels payload truncated");
  }
  if (count != label_count) {
    throw FormatError(K::kCountMismatch, "IDX count mismatch: " + std::to_string(count) +
                                             " images vs " + std::to_string(label_count) +
                                             " labels");
  }
  LabeledPool pool;
  pool.samples.inputs = Matrix(count, pixels);
  pool.samples.labels.resize(count);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    auto x = pool.samples.inputs.row(i);
    const unsigned char *src = img.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) x[j] = static_cast<double>(src[j]) / 255.0;
    pool.samples.labels[i] = lab[8 + i];
    max_label = std::max(max_label, static_cast<int>(lab[8 + i]));
  }
  pool.num_classes = static_cast<std::size_t>(max_label + 1);
  return pool;
}

}  // namespace flsim
