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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "flsim/datasets.hpp"
#include "flsim/error.hpp"
#include "flsim/mlp.hpp"

using namespace flsim;

namespace {

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "flsim_dataset_tests";
  std::filesystem::create_directories(p);
  return p;
}

void put_be32(std::ofstream &os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char *>(b), 4);
}

// Test-side IDX writer used as the oracle for load_idx.
void write_idx(const std::filesystem::path &images, const std::filesystem::path &labels,
               std::uint32_t rows, std::uint32_t cols, const std::vector<unsigned char> &pixels,
               const std::vector<unsigned char> &label_bytes, std::uint32_t image_magic = 0x803,
               std::uint32_t label_magic = 0x801) {
  std::ofstream im(images, std::ios::binary);
  put_be32(im, image_magic);
  put_be32(im, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
  put_be32(im, rows);
  put_be32(im, cols);
  im.write(reinterpret_cast<const char *>(pixels.data()), pixels.size());
  std::ofstream lb(labels, std::ios::binary);
  put_be32(lb, label_magic);
  put_be32(lb, static_cast<std::uint32_t>(label_bytes.size()));
  lb.write(reinterpret_cast<const char *>(label_bytes.data()), label_bytes.size());
}

double nearest_center_accuracy(const LabeledPool &pool, std::size_t dim) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    auto x = pool.samples.inputs.row(i);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < pool.num_classes; ++c) {
      const auto ctr = blob_center(c, dim);
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) d += (x[j] - ctr[j]) * (x[j] - ctr[j]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += static_cast<int>(best) == pool.samples.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(pool.samples.size());
}

}  // namespace

TEST_CASE("toy domains without noise follow the global rule y > 0") {
  for (int d = 0; d < kToyDomains; ++d) {
    const auto cd = make_toy_domain({d, 200, 0.0, 3});
    for (const Batch *b : {&cd.train, &cd.test}) {
      for (std::size_t i = 0; i < b->size(); ++i) {
        CHECK(b->labels[i] == (b->inputs(i, 1) > 0.0 ? 1 : 0));
      }
    }
    CHECK(cd.label_histogram == std::vector<std::size_t>{200, 200});
  }
}

TEST_CASE("toy domain clean points split by the local vertical boundary") {
  for (int d = 0; d < kToyDomains; ++d) {
    const auto g = toy_geometry(d);
    const auto cd = make_toy_domain({d, 150, 0.0, 5});
    for (std::size_t i = 0; i < cd.train.size(); ++i) {
      const bool left = cd.train.inputs(i, 0) < g.boundary_x;
      const bool class1 = cd.train.labels[i] == 1;
      CHECK(left == (class1 == g.class1_left));
    }
  }
  CHECK(toy_geometry(0).boundary_x == -6.0);
}

TEST_CASE("noisy toy points keep the local boundary and cross the global one") {
  const auto cd = make_toy_domain({0, 100, 0.2, 1});
  std::size_t violations = 0;
  for (std::size_t i = 0; i < cd.train.size(); ++i) {
    const bool left = cd.train.inputs(i, 0) < -6.0;
    CHECK(left == (cd.train.labels[i] == 1));
    violations += (cd.train.inputs(i, 1) > 0.0) != (cd.train.labels[i] == 1);
  }
  CHECK(violations == 40);
}

TEST_CASE("a linear model fit on one noisy domain does not solve the union") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.output_dim = 2;
  std::vector<Batch> clean_parts, noisy_parts;
  for (int d = 0; d < kToyDomains; ++d) {
    clean_parts.push_back(make_toy_domain({d, 100, 0.0, 9}).test);
    noisy_parts.push_back(make_toy_domain({d, 100, 0.2, 9}).test);
  }
  const Batch clean_union = concat(clean_parts);
  const Batch noisy_union = concat(noisy_parts);
  std::size_t rule_correct = 0;
  for (std::size_t i = 0; i < clean_union.size(); ++i) {
    rule_correct += (clean_union.inputs(i, 1) > 0.0 ? 1 : 0) == clean_union.labels[i];
  }
  CHECK(rule_correct == clean_union.size());

  for (int d = 0; d < kToyDomains; ++d) {
    const auto local = make_toy_domain({d, 100, 0.2, 9});
    const auto m = local_train(spec, init_model(spec, 1), local, {200, 0.05, 32, 3});
    const double local_acc = evaluate_batch(spec, m, local.train).accuracy;
    const double union_acc = evaluate_batch(spec, m, noisy_union).accuracy;
    CAPTURE(d);
    CHECK(local_acc > 0.9);
    CHECK(union_acc < 1.0);
    CHECK(union_acc < local_acc);
  }
}

TEST_CASE("toy spec validation") {
  CHECK_THROWS_AS(make_toy_domain({4, 10, 0.0, 1}), ConfigError);
  CHECK_THROWS_AS(make_toy_domain({0, 0, 0.0, 1}), ConfigError);
  CHECK_THROWS_AS(make_toy_domain({0, 10, 0.5, 1}), ConfigError);
}

TEST_CASE("toy IID split mixes every domain") {
  const auto clients = make_toy_iid(4, 100, 0.1, 2);
  REQUIRE(clients.size() == 4);
  std::size_t total = 0;
  for (const auto &c : clients) {
    total += c.train.size();
    bool seen_left_of_minus6 = false, seen_right_of_6 = false;
    for (std::size_t i = 0; i < c.train.size(); ++i) {
      seen_left_of_minus6 |= c.train.inputs(i, 0) < -6.0;
      seen_right_of_6 |= c.train.inputs(i, 0) > 6.0;
    }
    CHECK(seen_left_of_minus6);
    CHECK(seen_right_of_6);
  }
  CHECK(total == 4 * 200);
}

TEST_CASE("blobs") {
  SUBCASE("vanishing spread is perfectly separable") {
    const auto pool = make_blobs(7, 3, 50, 1e-6, 1);
    CHECK(nearest_center_accuracy(pool, 3) == 1.0);
  }
  SUBCASE("two classes at +-1 with spread 0.25 approach the Gaussian Bayes rate") {
    const double bayes = 1.0 - 0.5 * std::erfc(4.0 / std::sqrt(2.0));
    CHECK(bayes == doctest::Approx(0.99997).epsilon(1e-5));
    CHECK(blob_center(0, 1) == std::vector<double>{1.0});
    CHECK(blob_center(1, 1) == std::vector<double>{-1.0});
    const auto pool = make_blobs(2, 1, 5000, 0.25, 17);
    CHECK(nearest_center_accuracy(pool, 1) >= 0.995);
  }
  SUBCASE("same seed gives the same data") {
    const auto a = make_blobs(3, 4, 20, 0.5, 9);
    const auto b = make_blobs(3, 4, 20, 0.5, 9);
    CHECK(a.samples.inputs.data == b.samples.inputs.data);
    CHECK(a.samples.labels == b.samples.labels);
    CHECK(make_blobs(3, 4, 20, 0.5, 10).samples.inputs.data != a.samples.inputs.data);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(make_blobs(3, 4, 20, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(make_blobs(3, 4, 20, -1.0, 1), ConfigError);
    CHECK_THROWS_AS(make_blobs(1, 4, 20, 1.0, 1), ConfigError);
  }
  SUBCASE("centers are distinct beyond 2*dim classes") {
    for (std::size_t a = 0; a < 9; ++a) {
      for (std::size_t b = a + 1; b < 9; ++b) CHECK(blob_center(a, 2) != blob_center(b, 2));
    }
  }
}

TEST_CASE("dirichlet concentration limit gives near-uniform clients") {
  const auto pool = make_blobs(10, 2, 5000, 1.0, 3);
  const auto clients = partition_dirichlet(pool, {1e6, 4, 3, true}, 0.2);
  REQUIRE(clients.size() == 4);
  for (const auto &c : clients) {
    const double n = static_cast<double>(c.train.size());
    for (std::size_t k = 0; k < 10; ++k) {
      const double share = static_cast<double>(c.label_histogram[k]) / n;
      CHECK(std::abs(share - 0.1) < 0.01);
    }
  }
}

TEST_CASE("dirichlet(0.1) concentrates most clients on few classes") {
  // Direct-sampling check of the property on the Dirichlet draws alone.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    KeyedRng rng(seed, {1});
    std::size_t peaked = 0;
    for (int i = 0; i < 200; ++i) {
      auto p = sample_dirichlet(0.1, 10, rng);
      std::sort(p.rbegin(), p.rend());
      peaked += p[0] + p[1] > 0.5;
    }
    CHECK(peaked > 150);
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto pool = make_blobs(10, 2, 300, 1.0, seed);
    const auto clients = partition_dirichlet(pool, {0.1, 10, seed, true}, 0.2);
    std::size_t skewed = 0;
    for (const auto &c : clients) {
      auto h = c.label_histogram;
      std::sort(h.rbegin(), h.rend());
      skewed += 2 * (h[0] + h[1]) > c.train.size();
    }
    CAPTURE(seed);
    CHECK(skewed >= 5);
  }
}

TEST_CASE("partition invariants") {
  const auto pool = make_blobs(5, 3, 200, 1.0, 8);
  SUBCASE("without replacement conserves samples") {
    for (double alpha : {0.1, 1.0, 100.0}) {
      const auto clients = partition_dirichlet(pool, {alpha, 6, 8, false}, 0.25);
      std::size_t total = 0;
      for (const auto &c : clients) {
        total += c.train.size() + c.test.size();
        CHECK(c.train.size() >= 1);
        CHECK(c.test.size() >= 1);
        CHECK(std::accumulate(c.label_histogram.begin(), c.label_histogram.end(), std::size_t{0}) ==
              c.train.size());
      }
      CHECK(total == pool.samples.size());
    }
  }
  SUBCASE("with replacement draws one assignment per pool sample") {
    const auto clients = partition_dirichlet(pool, {0.5, 6, 8, true}, 0.25);
    std::size_t total = 0;
    for (const auto &c : clients) total += c.train.size() + c.test.size();
    CHECK(total == pool.samples.size());
  }
  SUBCASE("deterministic") {
    const auto a = partition_dirichlet(pool, {0.3, 5, 1, true}, 0.2);
    const auto b = partition_dirichlet(pool, {0.3, 5, 1, true}, 0.2);
    for (std::size_t u = 0; u < a.size(); ++u) {
      CHECK(a[u].train.inputs.data == b[u].train.inputs.data);
      CHECK(a[u].test.labels == b[u].test.labels);
    }
  }
  SUBCASE("starved clients are reported by id") {
    const auto tiny = make_blobs(2, 1, 2, 1.0, 1);
    try {
      partition_dirichlet(tiny, {0.1, 10, 1, false, 5}, 0.5);
      FAIL("expected an error");
    } catch (const RuntimeError &e) {
      CHECK(std::string(e.what()).find("client") != std::string::npos);
    }
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(partition_dirichlet(pool, {0.0, 4, 1, true}, 0.2), ConfigError);
    CHECK_THROWS_AS(partition_dirichlet(pool, {1.0, 4, 1, true}, 0.0), ConfigError);
    CHECK_THROWS_AS(partition_dirichlet(pool, {1.0, 4, 1, true}, 1.0), ConfigError);
    CHECK_THROWS_AS(partition_dirichlet(LabeledPool{}, {1.0, 4, 1, true}, 0.2), ConfigError);
  }
}

TEST_CASE("IDX loading") {
  const auto dir = temp_dir();
  const auto images = dir / "img.idx";
  const auto labels = dir / "lbl.idx";

  SUBCASE("pixels scale to [0, 1]") {
    write_idx(images, labels, 2, 2, {0, 255, 128, 64}, {3});
    const auto pool = load_idx(images.string(), labels.string());
    REQUIRE(pool.samples.size() == 1);
    CHECK(pool.samples.inputs.cols == 4);
    CHECK(pool.samples.inputs.data ==
          std::vector<double>{0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0});
    CHECK(pool.samples.labels == std::vector<int>{3});
  }
  SUBCASE("round trip through the test writer") {
    KeyedRng rng(4, {});
    std::vector<unsigned char> px(25 * 3 * 5);
    std::vector<unsigned char> lb(25);
    for (auto &p : px) p = static_cast<unsigned char>(rng.below(256));
    for (auto &l : lb) l = static_cast<unsigned char>(rng.below(10));
    write_idx(images, labels, 3, 5, px, lb);
    const auto pool = load_idx(images.string(), labels.string());
    REQUIRE(pool.samples.size() == 25);
    for (std::size_t i = 0; i < px.size(); ++i) {
      CHECK(std::lround(pool.samples.inputs.data[i] * 255.0) == px[i]);
    }
    for (std::size_t i = 0; i < lb.size(); ++i) CHECK(pool.samples.labels[i] == lb[i]);
  }
  SUBCASE("labels file with the image magic") {
    write_idx(images, labels, 2, 2, {0, 1, 2, 3}, {1}, 0x803, 0x803);
    try {
      load_idx(images.string(), labels.string());
      FAIL("expected an error");
    } catch (const FormatError &e) {
      CHECK(e.kind() == FormatError::Kind::kWrongMagic);
      CHECK(std::string(e.what()).find("wrong magic") != std::string::npos);
    }
  }
  SUBCASE("truncated payload") {
    write_idx(images, labels, 2, 2, {0, 1, 2, 3, 4, 5, 6, 7}, {1, 2});
    std::filesystem::resize_file(images, 16 + 6);
    try {
      load_idx(images.string(), labels.string());
      FAIL("expected an error");
    } catch (const FormatError &e) {
      CHECK(e.kind() == FormatError::Kind::kTruncated);
    }
  }
  SUBCASE("count mismatch") {
    write_idx(images, labels, 2, 2, {0, 1, 2, 3, 4, 5, 6, 7}, {1, 2, 3});
    try {
      load_idx(images.string(), labels.string());
      FAIL("expected an error");
    } catch (const FormatError &e) {
      CHECK(e.kind() == FormatError::Kind::kCountMismatch);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx((dir / "nope").string(), labels.string()), FormatError);
  }
}
