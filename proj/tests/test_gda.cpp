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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "flsim/error.hpp"
#include "flsim/gda.hpp"
#include "test_util.hpp"

using namespace flsim;
using flsim::testing::random_params;
using flsim::testing::single_layer;

namespace {

Trajectory traj(int id, std::vector<double> h) {
  return Trajectory{id, 0, single_layer(std::move(h))};
}

// Naive reference: loops over layers, pairs and coordinates, then sorts.
struct OracleReport {
  std::vector<int> gc;
  std::vector<int> selected;
};

OracleReport oracle(const std::vector<Trajectory> &t, double xi, int k) {
  const std::size_t L = t.front().delta.num_layers();
  OracleReport out;
  out.gc.assign(L, 0);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t u = 0; u < t.size(); ++u) {
      for (std::size_t v = u + 1; v < t.size(); ++v) {
        const auto a = t[u].delta.values(l);
        const auto b = t[v].delta.values(l);
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          dot += a[i] * b[i];
          na += a[i] * a[i];
          nb += b[i] * b[i];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        const double c = (na < 1e-12 || nb < 1e-12) ? 0.0 : dot / na / nb;
        if (c < xi) ++out.gc[l];
      }
    }
  }
  std::vector<int> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return out.gc[a] > out.gc[b]; });
  order.resize(std::min<std::size_t>(static_cast<std::size_t>(k), L));
  std::sort(order.begin(), order.end());
  out.selected = order;
  return out;
}

// Random trajectories with a mix of shared and opposing directions, plus the
// occasional dead layer.
std::vector<Trajectory> random_instance(std::uint64_t seed, std::size_t U, std::size_t L) {
  KeyedRng rng(seed, {0x6D});
  std::vector<std::size_t> widths(L);
  for (auto &w : widths) w = 1 + rng.below(5);
  const auto common = random_params(widths, seed * 31 + 7);
  std::vector<Trajectory> out;
  for (std::size_t u = 0; u < U; ++u) {
    auto p = random_params(widths, seed * 1000 + u);
    for (std::size_t l = 0; l < L; ++l) {
      const double mix = rng.uniform(-1.0, 1.0);
      auto vals = p.values(l);
      const auto c = common.values(l);
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.5 * vals[i] + mix * c[i];
      if (rng.below(10) == 0) std::fill(vals.begin(), vals.end(), 0.0);
    }
    out.push_back(Trajectory{static_cast<int>(u), 0, std::move(p)});
  }
  return out;
}

}  // namespace

TEST_CASE("compute_trajectory") {
  const auto t = compute_trajectory(single_layer({0, 1}), single_layer({1, 2}), 3, 7);
  CHECK(t.client_id == 3);
  CHECK(t.round == 7);
  CHECK(std::vector<double>(t.delta.values(0).begin(), t.delta.values(0).end()) ==
        std::vector<double>{1, 1});
  const auto same = random_params({3, 2}, 1);
  CHECK(compute_trajectory(same, same, 0, 0).delta == zeros_like(same));
  CHECK_THROWS_AS(compute_trajectory(single_layer({0, 1}), single_layer({1}), 0, 0), ConfigError);
}

TEST_CASE("layer_cosine") {
  const std::vector<double> e1{1, 0}, e2{0, 1}, ones{1, 1}, neg{-1, -1}, a{3, 4}, b{4, 3};
  CHECK(layer_cosine(e1, e2) == 0.0);
  CHECK(layer_cosine(ones, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(layer_cosine(a, b) == doctest::Approx(24.0 / 25.0).epsilon(1e-15));
  const std::vector<double> zero{0, 0};
  CHECK(layer_cosine(zero, a) == 0.0);
  CHECK(layer_cosine(zero, zero) == 0.0);
  const std::vector<double> big{1e150, 1e150}, tiny{1e-6, 1e-6};
  CHECK(layer_cosine(big, tiny) == doctest::Approx(1.0));
  const std::vector<double> dust{1e-13, 0};
  CHECK(layer_cosine(dust, e1) == 0.0);
  CHECK(layer_cosine(ones, ones) <= 1.0);
}

TEST_CASE("gc_score examples") {
  SUBCASE("only the antiparallel pair conflicts at xi = 0") {
    const std::vector<Trajectory> t{traj(0, {1, 0}), traj(1, {-1, 0}), traj(2, {0, 1})};
    CHECK(gc_score(t, 0, 0.0) == 1);
  }
  SUBCASE("three vectors at 120 degrees give C(3,2)") {
    const double s = std::sqrt(3.0) / 2.0;
    const std::vector<Trajectory> t{traj(0, {1, 0}), traj(1, {-0.5, s}), traj(2, {-0.5, -s})};
    CHECK(gc_score(t, 0, 0.0) == 3);
    CHECK(gc_score(t, 0, -0.4) == 3);
    CHECK(gc_score(t, 0, -0.6) == 0);
  }
  SUBCASE("identical trajectories never conflict") {
    const std::vector<Trajectory> t{traj(0, {1, 2}), traj(1, {1, 2}), traj(2, {1, 2})};
    CHECK(gc_score(t, 0, 0.0) == 0);
  }
  SUBCASE("xi range") {
    const std::vector<Trajectory> t{traj(0, {1}), traj(1, {-1})};
    CHECK_THROWS_AS(gc_score(t, 0, 0.5), ConfigError);
    CHECK_THROWS_AS(gc_score(t, 0, -1.0), ConfigError);
    CHECK_THROWS_AS(gc_score(t, 0, 1e-9), ConfigError);
    CHECK_NOTHROW(gc_score(t, 0, -0.999));
    CHECK_THROWS(gc_score(t, 5, 0.0));
  }
}

TEST_CASE("select_layers") {
  const std::vector<int> s1{5, 0, 7, 7, 1};
  CHECK(select_layers(s1, 2) == std::vector<LayerId>{2, 3});
  const std::vector<int> s2{3, 3, 3};
  CHECK(select_layers(s2, 2) == std::vector<LayerId>{0, 1});
  CHECK(select_layers(s1, 0).empty());
  CHECK(select_layers(s1, 3) == std::vector<LayerId>{0, 2, 3});
  CHECK(select_layers(s1, 99) == std::vector<LayerId>{0, 1, 2, 3, 4});
  SUBCASE("non-trainable layers are skipped") {
    const std::vector<bool> trainable{true, true, false, true, true};
    CHECK(select_layers(s1, 2, trainable) == std::vector<LayerId>{0, 3});
    CHECK(select_layers(s1, 10, trainable).size() == 4);
  }
  CHECK_THROWS_AS(select_layers(s1, -1), ConfigError);
}

TEST_CASE("run_gda examples") {
  SUBCASE("identical received models") {
    const auto b = random_params({2, 3, 1}, 1);
    const auto r = random_params({2, 3, 1}, 2);
    const auto rep = run_gda(ModelMap{{0, b}, {1, b}}, ModelMap{{0, r}, {1, r}}, -0.1, 2, 4, true);
    CHECK(rep.round == 4);
    CHECK(rep.client_ids == std::vector<int>{0, 1});
    CHECK(rep.gc_scores == std::vector<int>{0, 0, 0});
    CHECK(rep.selected == std::vector<LayerId>{0, 1});
    for (const auto &m : rep.cosines) {
      for (double c : m) CHECK(c == doctest::Approx(1.0));
    }
  }
  SUBCASE("dead bias layers never conflict at xi < 0") {
    std::vector<Trajectory> t{Trajectory{0, 0, random_params({2, 2}, 1)},
                              Trajectory{1, 0, random_params({2, 2}, 2)}};
    for (auto &x : t) {
      auto v = x.delta.values(1);
      std::fill(v.begin(), v.end(), 0.0);
    }
    const auto rep = run_gda(t, -0.01, 1, 0, true);
    CHECK(rep.gc_scores[1] == 0);
    CHECK(rep.cosines[1] == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  }
  SUBCASE("mismatched client sets") {
    const auto b = random_params({2}, 1);
    CHECK_THROWS_AS(run_gda(ModelMap{{0, b}, {1, b}}, ModelMap{{0, b}, {2, b}}, 0.0, 1, 0),
                    ConfigError);
  }
  SUBCASE("cosine matrices are symmetric with unit diagonal") {
    const auto t = random_instance(3, 4, 3);
    const auto rep = run_gda(t, 0.0, 1, 0, true);
    REQUIRE(rep.cosines.size() == 3);
    for (std::size_t l = 0; l < 3; ++l) {
      const auto &m = rep.cosines[l];
      for (std::size_t u = 0; u < 4; ++u) {
        const bool dead = layer_cosine(t[u].delta.values(l), t[u].delta.values(l)) == 0.0;
        if (!dead) CHECK(m[u * 4 + u] == doctest::Approx(1.0));
        for (std::size_t v = 0; v < 4; ++v) CHECK(m[u * 4 + v] == m[v * 4 + u]);
      }
    }
  }
}

TEST_CASE("run_gda matches the brute-force oracle") {
  int instances = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    KeyedRng rng(seed, {0x0A});
    const std::size_t U = 2 + rng.below(5);
    const std::size_t L = 1 + rng.below(8);
    const double xi = -0.3 * rng.uniform();
    const int k = static_cast<int>(rng.below(L + 2));
    const auto t = random_instance(seed, U, L);
    const auto rep = run_gda(t, xi, k, 0);
    const auto ref = oracle(t, xi, k);
    CAPTURE(seed);
    CHECK(rep.gc_scores == ref.gc);
    CHECK(rep.selected == ref.selected);
    ++instances;
  }
  CHECK(instances == 150);
}

TEST_CASE("GDA properties") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t U = 3 + seed % 4, L = 1 + seed % 8;
    auto t = random_instance(seed + 500, U, L);
    const auto base = run_gda(t, -0.1, 2, 0, true);
    CAPTURE(seed);

    for (int g : base.gc_scores) {
      CHECK(g >= 0);
      CHECK(static_cast<std::size_t>(g) <= U * (U - 1) / 2);
    }
    CHECK(base.selected.size() == std::min<std::size_t>(2, L));

    // Positive rescaling of one client.
    auto scaled = t;
    for (std::size_t l = 0; l < L; ++l) {
      for (auto &v : scaled[1].delta.values(l)) v *= 37.5;
    }
    const auto s = run_gda(scaled, -0.1, 2, 0, true);
    CHECK(s.gc_scores == base.gc_scores);
    CHECK(s.selected == base.selected);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < base.cosines[l].size(); ++i) {
        CHECK(s.cosines[l][i] == doctest::Approx(base.cosines[l][i]).epsilon(1e-12));
      }
    }

    // Client permutation.
    auto perm = t;
    std::reverse(perm.begin(), perm.end());
    const auto p = run_gda(perm, -0.1, 2, 0);
    CHECK(p.gc_scores == base.gc_scores);
    CHECK(p.selected == base.selected);

    // Monotone in xi.
    std::vector<int> prev(L, 0);
    for (double xi : {-0.9, -0.5, -0.3, -0.2, -0.1, 0.0}) {
      const auto r = run_gda(t, xi, 0, 0);
      for (std::size_t l = 0; l < L; ++l) CHECK(r.gc_scores[l] >= prev[l]);
      prev = r.gc_scores;
    }
  }
}

TEST_CASE("non-trainable layers are skipped by run_gda") {
  std::vector<LayerSlot> slots(2);
  for (int l = 0; l < 2; ++l) {
    slots[l].layer_id = l;
    slots[l].shape = {1};
    slots[l].values = {1.0};
  }
  slots[1].trainable = false;
  auto a = LayeredParams(slots);
  slots[0].values = {-1.0};
  slots[1].values = {-1.0};
  auto b = LayeredParams(slots);
  const std::vector<Trajectory> t{Trajectory{0, 0, a}, Trajectory{1, 0, b}};
  const auto rep = run_gda(t, 0.0, 2, 0);
  CHECK(rep.gc_scores[0] == 1);
  CHECK(rep.gc_scores[1] == 0);
  CHECK(rep.selected == std::vector<LayerId>{0});
}

TEST_CASE("conflict report JSON") {
  const std::vector<Trajectory> t{traj(0, {1, 0}), traj(1, {-1, 0}), traj(2, {0, 1})};
  const auto rep = run_gda(t, 0.0, 1, 12, true);
  const auto j = to_json(rep, false);
  CHECK(j["round"] == 12);
  CHECK(j["xi"] == 0.0);
  CHECK(j["k"] == 1);
  REQUIRE(j["layers"].size() == 1);
  CHECK(j["layers"][0]["layer_id"] == 0);
  CHECK(j["layers"][0]["gc"] == 1);
  CHECK(j["layers"][0]["selected"] == true);
  CHECK_FALSE(j.contains("cosines"));
  const auto jc = to_json(rep, true);
  REQUIRE(jc.contains("cosines"));
  CHECK(jc["cosines"][0].size() == 9);
}
