// Copyright 2026 The tnad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cmath>
#include <random>
#include <utility>

#include "doctest.h"
#include "oracles.hpp"
#include "tnad/contraction.hpp"
#include "tnad/embedding.hpp"
#include "tnad/errors.hpp"
#include "tnad/model.hpp"

using namespace tnad;

namespace {

void audit(const SmpoLayer& layer) {
  REQUIRE(layer.sites.size() == layer.n_sites);
  for (std::size_t s = 0; s < layer.n_sites; ++s) {
    const auto& sh = layer.sites[s].shape();
    REQUIRE(sh.size() == 4);
    CHECK(sh[0] == layer.phys_in);
    CHECK(sh[1] == (layer.is_output(s) ? layer.phys_out : 1));
    CHECK(sh[2] == (s == 0 ? 1 : layer.bond));
    CHECK(sh[3] == (s + 1 == layer.n_sites ? 1 : layer.bond));
  }
}

TnModel random_cascade(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dim(1, 3);
  std::vector<std::size_t> outs;
  for (std::size_t s = 0; s < n; ++s)
    if (std::uniform_int_distribution<int>(0, 1)(rng)) outs.push_back(s);
  if (outs.empty()) outs.push_back(n / 2);
  const std::size_t pmid = dim(rng);
  TnModel m;
  m.layers.push_back(new_smpo(n, outs, dim(rng), dim(rng), pmid, rng()));
  const std::size_t m2 = outs.size();
  m.layers.push_back(new_smpo(m2, {std::uniform_int_distribution<std::size_t>(0, m2 - 1)(rng)}, dim(rng), pmid,
                              dim(rng), rng()));
  m.ordering = identity_ordering(n);
  oracle::randomize(m, rng);
  return m;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("reference SMPO dimensions") {
  const auto layer = new_smpo(19, {9}, 4, 3, 3, 1);
  audit(layer);
  CHECK(param_count(layer) == 936);
  CHECK(param_count(new_reference_model(Architecture::Smpo19to1, 1)) == 936);
}

TEST_CASE("single-site layer") {
  const auto layer = new_smpo(1, {0}, 7, 3, 3, 1);
  CHECK(layer.sites[0].shape() == DenseTensor::Shape{3, 3, 1, 1});
  CHECK(param_count(layer) == 9);
}

TEST_CASE("three-site layer parameter count") {
  const auto layer = new_smpo(3, {1}, 2, 3, 3, 1);
  CHECK(param_count(layer) == 3 * 1 * 1 * 2 + 3 * 3 * 2 * 2 + 3 * 1 * 2 * 1);
}

TEST_CASE("layer construction errors") {
  CHECK_THROWS_AS(new_smpo(5, {}, 2, 3, 3, 1), Error);
  CHECK_THROWS_AS(new_smpo(5, {5}, 2, 3, 3, 1), Error);
  CHECK_THROWS_AS(new_smpo(5, {1}, 0, 3, 3, 1), Error);
  auto layer = new_smpo(4, {1}, 2, 3, 3, 1);
  layer.sites[2] = DenseTensor({3, 3, 2, 2});
  CHECK_THROWS_AS(layer.validate(), Error);
}

TEST_CASE("shape audit over random architectures") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> n(1, 9), dim(1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t sites = n(rng);
    std::vector<std::size_t> outs{std::uniform_int_distribution<std::size_t>(0, sites - 1)(rng)};
    if (sites > 2) outs.push_back(sites - 1);
    audit(new_smpo(sites, outs, dim(rng), dim(rng), dim(rng), rng()));
  }
}

TEST_CASE("cascade architectures") {
  const auto m7 = new_reference_model(Architecture::Csmpo19to7to1, 3);
  REQUIRE(m7.layers.size() == 2);
  CHECK(m7.layers[0].output_sites == std::vector<std::size_t>{0, 3, 6, 9, 12, 15, 18});
  CHECK(m7.layers[1].output_sites == std::vector<std::size_t>{3});
  CHECK(param_count(m7) == 456);
  CHECK(m7.label == "19→7→1");
  const auto m2 = new_reference_model(Architecture::Csmpo19to2to1, 3);
  CHECK(m2.layers[0].output_sites == std::vector<std::size_t>{0, 18});
  CHECK(m2.layers[1].output_sites == std::vector<std::size_t>{0});
  CHECK(param_count(m2) == 264);
  for (const auto& l : m7.layers) audit(l);
  for (const auto& l : m2.layers) audit(l);
  CHECK_THROWS_AS(new_csmpo(Architecture::Smpo19to1, 2, 2, 3, 1), Error);
  CHECK_THROWS_AS(new_reference_model(Architecture::Custom, 1), Error);
}

TEST_CASE("architecture tags") {
  CHECK(architecture_tag(Architecture::Smpo19to1) == "19→1");
  CHECK(parse_architecture("19-7-1") == Architecture::Csmpo19to7to1);
  CHECK(parse_architecture("19→2→1") == Architecture::Csmpo19to2to1);
  CHECK(parse_architecture("19-1") == Architecture::Smpo19to1);
  CHECK_THROWS_AS(parse_architecture("19-5-1"), Error);
}

TEST_CASE("cascade consistency is validated") {
  auto m = new_reference_model(Architecture::Csmpo19to7to1, 1);
  m.layers[1] = new_smpo(6, {3}, 2, 3, 3, 1);
  CHECK_THROWS_AS(m.validate(), Error);
  auto p = new_reference_model(Architecture::Csmpo19to7to1, 1);
  p.layers[1] = new_smpo(7, {3}, 2, 2, 3, 1);
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_THROWS_AS(flatten_cascade(new_reference_model(Architecture::Smpo19to1, 1)), Error);
}

TEST_CASE("initialization is deterministic per seed") {
  const auto a = new_smpo(19, {9}, 4, 3, 3, 5);
  const auto b = new_smpo(19, {9}, 4, 3, 3, 5);
  const auto c = new_smpo(19, {9}, 4, 3, 3, 6);
  CHECK(a.sites == b.sites);
  CHECK_FALSE(a.sites == c.sites);
  for (const auto& t : a.sites) CHECK(t.all_finite());
}

TEST_CASE("initial norm is positive on events") {
  std::mt19937_64 rng(42);
  const auto model = new_reference_model(Architecture::Smpo19to1, 1);
  for (int i = 0; i < 20; ++i) {
    const auto mps = embed(oracle::random_event(rng), model.ordering);
    const double n = execute_plan(plan_model(model), model, mps);
    CHECK(n > 0.0);
    CHECK(std::isfinite(n));
  }
}

TEST_CASE("flattened reference cascades have the composite bond") {
  for (auto arch : {Architecture::Csmpo19to7to1, Architecture::Csmpo19to2to1}) {
    const auto m = new_reference_model(arch, 2);
    const auto flat = flatten_cascade(m);
    CHECK(flat.bond == 4);
    CHECK(flat.output_sites.size() == 1);
    audit(flat);
    CHECK(param_count(flat) >= param_count(m));
  }
  CHECK(param_count(flatten_cascade(new_reference_model(Architecture::Csmpo19to7to1, 2))) == 936);
}

TEST_CASE("flattening an identity second layer reproduces the first layer") {
  std::mt19937_64 rng(43);
  const auto l1 = new_smpo(6, {0, 2, 5}, 2, 3, 3, 9);
  SmpoLayer l2 = zero_smpo(3, {0, 1, 2}, 1, 3, 3);
  for (auto& t : l2.sites)
    for (std::size_t p = 0; p < 3; ++p) t.at({p, p, 0, 0}) = 1.0;
  TnModel m;
  m.layers = {l1, l2};
  m.ordering = identity_ordering(6);
  const auto flat = flatten_cascade(m);
  REQUIRE(flat.bond == 2);
  for (std::size_t s = 0; s < 6; ++s) CHECK(max_abs_diff(flat.sites[s], l1.sites[s]) == 0.0);
}

TEST_CASE("flattened random cascades act like the sequential layers") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const auto m = random_cascade(rng, n);
    const auto flat = flatten_cascade(m);
    const auto mps = oracle::random_mps(n, m.layers[0].phys_in, rng);
    const auto psi = oracle::dense_state(mps);
    const auto seq = oracle::apply_layer(oracle::apply_layer(psi, m.layers[0]), m.layers[1]);
    const auto one = oracle::apply_layer(psi, flat);
    CHECK(max_abs_diff(seq, one) < 1e-10);
  }
}

TEST_CASE("model files round-trip bit-exactly") {
  std::mt19937_64 rng(45);
  for (auto arch : {Architecture::Smpo19to1, Architecture::Csmpo19to7to1, Architecture::Csmpo19to2to1}) {
    auto m = new_reference_model(arch, 7);
    oracle::randomize(m, rng);
    m.ordering = identity_ordering(19);
    std::shuffle(m.ordering.begin(), m.ordering.end(), rng);
    const auto bytes = serialize_model(m, ScoreCalibration{42.125});
    const auto back = deserialize_model(bytes);
    CHECK(back.model.label == m.label);
    CHECK(back.model.seed == m.seed);
    CHECK(back.model.ordering == m.ordering);
    REQUIRE(back.model.layers.size() == m.layers.size());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      CHECK(back.model.layers[l].output_sites == m.layers[l].output_sites);
      for (std::size_t s = 0; s < m.layers[l].n_sites; ++s) {
        const auto& ta = m.layers[l].sites[s];
        const auto& tb = back.model.layers[l].sites[s];
        const auto a = std::as_const(ta).data();
        const auto b = std::as_const(tb).data();
        CHECK(std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
          return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
        }));
      }
    }
    REQUIRE(back.calibration.has_value());
    CHECK(back.calibration->median_bkg == 42.125);
    CHECK(serialize_model(back.model, back.calibration) == bytes);
  }
  CHECK_FALSE(deserialize_model(serialize_model(new_reference_model(Architecture::Smpo19to1, 1))).calibration);
}

TEST_CASE("corrupt model files are rejected") {
  const auto bytes = serialize_model(new_reference_model(Architecture::Smpo19to1, 1));
  auto expect_format = [](const std::string& b) {
    try {
      deserialize_model(b);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  };
  expect_format(bytes.substr(0, bytes.size() - 8));
  expect_format("not a model");
  std::string wrong = bytes;
  wrong.replace(wrong.find("tnad-model"), 10, "xxxx-model");
  expect_format(wrong);
}
