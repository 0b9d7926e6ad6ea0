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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tnad/embedding.hpp"
#include "tnad/errors.hpp"

using namespace tnad;

namespace {

EventRecord single(std::size_t index, Particle p) {
  std::array<Particle, kNumParticles> parts{};
  parts[index] = p;
  return EventRecord(parts);
}

double site_norm(const SiteVector& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

}  // namespace

TEST_CASE("particle layout") {
  CHECK(particle_kind(0) == ParticleKind::Met);
  CHECK(particle_kind(1) == ParticleKind::Electron);
  CHECK(particle_kind(5) == ParticleKind::Muon);
  CHECK(particle_kind(9) == ParticleKind::Jet);
  CHECK(particle_kind(18) == ParticleKind::Jet);
  CHECK(pt_reference(ParticleKind::Jet) == 2500.0);
  CHECK(pt_reference(ParticleKind::Muon) == 800.0);
  CHECK(pt_reference(ParticleKind::Electron) == 1200.0);
  CHECK(pt_reference(ParticleKind::Met) == 1200.0);
  CHECK_THROWS_AS(particle_kind(19), Error);
}

TEST_CASE("preprocess examples") {
  const auto jet = preprocess(single(9, {2500.0, 0.0, std::numbers::pi}))[9];
  CHECK(jet[0] == 1.0);
  CHECK(jet[1] == 0.5);
  CHECK(jet[2] == 1.0);
  const auto pad = preprocess(single(9, {2500.0, 0.0, 0.0}))[3];
  CHECK(pad == SiteVector{0.0, 0.5, 0.5});
  const auto mu = preprocess(single(5, {400.0, -2.5, -std::numbers::pi}))[5];
  CHECK(mu[0] == 0.5);
  CHECK(mu[1] == 0.25);
  CHECK(mu[2] == 0.0);
  const auto met = preprocess(single(0, {600.0, 3.0, 0.0}))[0];
  CHECK(met[0] == 0.5);
  CHECK(met[1] == 0.5);
}

TEST_CASE("event range validation") {
  CHECK_THROWS_AS(single(3, {10.0, 0.0, 3.5}), Error);
  CHECK_THROWS_AS(single(3, {10.0, 5.5, 0.0}), Error);
  CHECK_THROWS_AS(single(3, {-1.0, 0.0, 0.0}), Error);
  CHECK_NOTHROW(single(3, {10.0, -5.0, -std::numbers::pi}));
  std::array<double, kNumFeatures> f{};
  f[0] = 100.0;
  const auto e = EventRecord::from_features(f);
  CHECK(e[0] == Particle{100.0, 0.0, 0.0});
  CHECK(e.features() == f);
  std::vector<double> shortf(56, 0.0);
  CHECK_THROWS_AS(EventRecord::from_features(shortf), Error);
}

TEST_CASE("gamma of unit-norm sites is one") {
  std::vector<std::vector<double>> sites(19, {0.6, 0.8, 0.0});
  const auto mps = embed_sites(sites, identity_ordering(19));
  CHECK(mps.gamma == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t s = 0; s < 19; ++s) {
    CHECK(mps.site(s)[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(mps.site(s)[1] == doctest::Approx(0.8).epsilon(1e-15));
  }
}

TEST_CASE("gamma with one site of norm two") {
  std::vector<std::vector<double>> sites(19, {1.0, 0.0, 0.0});
  sites[0] = {2.0, 0.0, 0.0};
  const auto mps = embed_sites(sites, identity_ordering(19));
  CHECK(mps.gamma == doctest::Approx(std::pow(2.0, 1.0 / 19.0)).epsilon(1e-14));
}

TEST_CASE("zero site norm is degenerate") {
  std::vector<std::vector<double>> sites(3, {1.0, 0.0, 0.0});
  sites[1] = {0.0, 0.0, 0.0};
  try {
    embed_sites(sites, identity_ordering(3));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("random events: gamma property and unit product norm") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto event = oracle::random_event(rng);
    const auto mps = embed(event, identity_ordering(19));
    const auto raw = preprocess(event);
    double prod = 1.0;
    for (const auto& v : raw) prod *= site_norm(v);
    CHECK(std::abs(std::pow(mps.gamma, 19) - prod) <= 1e-12 * prod);
    CHECK(std::abs(mps.product_norm_sq() - 1.0) < 1e-9);
  }
}

TEST_CASE("embedding depends on storage order only through the permutation") {
  std::mt19937_64 rng(22);
  const auto event = oracle::random_event(rng);
  const auto raw = preprocess(event);
  Ordering perm = identity_ordering(19);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto mps = embed(event, perm);
  for (std::size_t k = 0; k < 19; ++k)
    for (std::size_t c = 0; c < 3; ++c) CHECK(mps.site(k)[c] == raw[perm[k]][c] / mps.gamma);

  // store the sites in a shuffled canonical order and compensate
  Ordering storage = identity_ordering(19);
  std::shuffle(storage.begin(), storage.end(), rng);
  std::vector<std::vector<double>> stored(19);
  Ordering where(19);
  for (std::size_t i = 0; i < 19; ++i) {
    stored[i] = {raw[storage[i]][0], raw[storage[i]][1], raw[storage[i]][2]};
    where[storage[i]] = i;
  }
  Ordering compensated(19);
  for (std::size_t k = 0; k < 19; ++k) compensated[k] = where[perm[k]];
  const auto again = embed_sites(stored, compensated);
  CHECK(again.values == mps.values);
  CHECK(again.gamma == mps.gamma);
}

TEST_CASE("ordering validation") {
  CHECK_THROWS_AS(validate_ordering(Ordering{0, 1, 1}, 3), Error);
  CHECK_THROWS_AS(validate_ordering(Ordering{0, 1}, 3), Error);
  CHECK_THROWS_AS(validate_ordering(Ordering{0, 1, 3}, 3), Error);
  CHECK_NOTHROW(validate_ordering(Ordering{2, 0, 1}, 3));
}

TEST_CASE("entropy matches the Jacobi oracle") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + trial % 7;
    std::vector<double> b(n * n), m(n * n, 0.0);
    for (auto& v : b) v = u(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) m[i * n + j] += b[i * n + k] * b[j * n + k];
    CHECK(von_neumann_entropy(m, n) == doctest::Approx(oracle::entropy(m, n)).epsilon(1e-10));
  }
  CHECK(von_neumann_entropy(std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0, 0}, 3) == 0.0);
  CHECK(von_neumann_entropy(std::vector<double>{2, 0, 0, 0, 2, 0, 0, 0, 2}, 3) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("QMI of a repeated event vanishes") {
  std::mt19937_64 rng(24);
  const auto event = oracle::random_event(rng);
  std::vector<EventRecord> events(50, event);
  const auto qmi = compute_qmi(events);
  for (std::size_t i = 0; i < 19; ++i)
    for (std::size_t j = 0; j < 19; ++j)
      if (i != j) CHECK(std::abs(qmi(i, j)) < 1e-9);
}

TEST_CASE("QMI is symmetric on random events") {
  std::mt19937_64 rng(25);
  std::vector<EventRecord> events;
  for (int i = 0; i < 300; ++i) events.push_back(oracle::random_event(rng));
  const auto qmi = compute_qmi(events);
  for (std::size_t i = 0; i < 19; ++i)
    for (std::size_t j = 0; j < 19; ++j) CHECK(std::abs(qmi(i, j) - qmi(j, i)) < 1e-10);
}

TEST_CASE("QMI is nonnegative when site vectors have unit norm") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<SiteVector>> events;
  for (int e = 0; e < 400; ++e) {
    std::vector<SiteVector> sites;
    const double shared = u(rng);
    for (int s = 0; s < 6; ++s) {
      SiteVector v{shared + 0.3 * u(rng), u(rng), 0.2 + u(rng)};
      const double n = site_norm(v);
      for (auto& c : v) c /= n;
      sites.push_back(v);
    }
    events.push_back(sites);
  }
  const auto qmi = compute_qmi_sites(events);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) CHECK(qmi(i, j) >= -1e-9);
}

TEST_CASE("raw-vector QMI can be negative and the ordering ignores negative couplings") {
  // The partial trace of the two-site matrix is weighted by the partner norm,
  // so subadditivity does not apply to raw preprocessed vectors.
  std::mt19937_64 rng(25);
  std::vector<EventRecord> events;
  for (int i = 0; i < 300; ++i) events.push_back(oracle::random_event(rng));
  auto qmi = compute_qmi(events);
  double lowest = 0.0;
  for (double v : qmi.values()) lowest = std::min(lowest, v);
  CHECK(lowest < 0.0);
  auto clamped = qmi;
  for (std::size_t i = 0; i < 19; ++i)
    for (std::size_t j = 0; j < 19; ++j) clamped(i, j) = std::max(0.0, qmi(i, j));
  CHECK(spectral_order(clamped).ordering == spectral_order(qmi).ordering);
}

TEST_CASE("QMI of independent sites is near zero") {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n_events = 10000;
  std::vector<std::vector<SiteVector>> events;
  for (std::size_t e = 0; e < n_events; ++e)
    events.push_back({SiteVector{u(rng), u(rng), u(rng)}, SiteVector{u(rng), u(rng), u(rng)}});
  const auto qmi = compute_qmi_sites(events);
  CHECK(std::abs(qmi(0, 1)) < 3.0 / std::sqrt(static_cast<double>(n_events)));
}

TEST_CASE("QMI of copied sites against explicit density matrices") {
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<SiteVector>> events;
  std::vector<double> rho1(9, 0.0), rho2(81, 0.0);
  for (int e = 0; e < 500; ++e) {
    const SiteVector x{u(rng), u(rng), u(rng)};
    events.push_back({x, x});
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) rho1[a * 3 + b] += x[a] * x[b];
    std::array<double, 9> xx{};
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) xx[a * 3 + b] = x[a] * x[b];
    for (std::size_t a = 0; a < 9; ++a)
      for (std::size_t b = 0; b < 9; ++b) rho2[a * 9 + b] += xx[a] * xx[b];
  }
  const double s1 = oracle::entropy(rho1, 3), s12 = oracle::entropy(rho2, 9);
  const auto qmi = compute_qmi_sites(events);
  CHECK(qmi(0, 1) == doctest::Approx(2.0 * s1 - s12).epsilon(1e-9));
  CHECK(qmi(0, 0) == 0.0);
}

TEST_CASE("QMI of copied orthogonal states equals the single-site entropy") {
  std::mt19937_64 rng(28);
  std::discrete_distribution<int> pick({0.5, 0.3, 0.2});
  std::vector<std::vector<SiteVector>> events;
  for (int e = 0; e < 2000; ++e) {
    SiteVector x{};
    x[static_cast<std::size_t>(pick(rng))] = 1.0;
    events.push_back({x, x});
  }
  const auto qmi = compute_qmi_sites(events);
  std::vector<double> counts(3, 0.0);
  for (const auto& ev : events)
    for (std::size_t k = 0; k < 3; ++k) counts[k] += ev[0][k];
  double s = 0.0;
  for (double c : counts) s -= c / 2000.0 * std::log(c / 2000.0);
  CHECK(qmi(0, 1) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("QMI input errors") {
  std::vector<std::vector<SiteVector>> one(1, std::vector<SiteVector>(2, SiteVector{1, 0, 0}));
  CHECK_THROWS_AS(compute_qmi_sites(one), Error);
  std::vector<std::vector<SiteVector>> ragged{{SiteVector{1, 0, 0}}, {SiteVector{1, 0, 0}, SiteVector{0, 1, 0}}};
  CHECK_THROWS_AS(compute_qmi_sites(ragged), Error);
}

TEST_CASE("spectral order: all-equal couplings give the identity") {
  QmiMatrix q(19);
  for (std::size_t i = 0; i < 19; ++i)
    for (std::size_t j = 0; j < 19; ++j)
      if (i != j) q(i, j) = 0.3;
  const auto so = spectral_order(q);
  CHECK(so.ordering == identity_ordering(19));
  CHECK(so.degenerate);
}

TEST_CASE("spectral order: uncoupled sites give the identity") {
  const auto so = spectral_order(QmiMatrix(19));
  CHECK(so.ordering == identity_ordering(19));
  CHECK(so.disconnected);
}

namespace {

std::size_t position(const Ordering& order, std::size_t site) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), site) - order.begin());
}

bool contiguous(const Ordering& order, std::size_t base) {
  std::vector<std::size_t> pos;
  for (std::size_t s = base; s < base + 3; ++s) pos.push_back(position(order, s));
  std::sort(pos.begin(), pos.end());
  return pos[2] - pos[0] == 2;
}

void couple_triplets(QmiMatrix& q) {
  for (std::size_t base : {0u, 10u})
    for (std::size_t i = base; i < base + 3; ++i)
      for (std::size_t j = base; j < base + 3; ++j)
        if (i != j) q(i, j) = 1.0;
}

}  // namespace

TEST_CASE("spectral order of a block-diagonal QMI keeps the triplets contiguous") {
  QmiMatrix q(19);
  couple_triplets(q);
  const auto so = spectral_order(q);
  CHECK(so.disconnected);
  CHECK(contiguous(so.ordering, 0));
  CHECK(contiguous(so.ordering, 10));
}

TEST_CASE("spectral seriation keeps coupled triplets contiguous on a connected background") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> noise(0.0, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    QmiMatrix q(19);
    for (std::size_t i = 0; i < 19; ++i)
      for (std::size_t j = i + 1; j < 19; ++j)
        q(i, j) = q(j, i) = 0.05 * std::exp(-static_cast<double>(j - i)) + noise(rng);
    couple_triplets(q);
    const auto so = spectral_order(q);
    REQUIRE_FALSE(so.disconnected);
    REQUIRE_FALSE(so.degenerate);
    Ordering seriation = identity_ordering(19);
    std::stable_sort(seriation.begin(), seriation.end(),
                     [&](std::size_t a, std::size_t b) { return so.fiedler[a] < so.fiedler[b]; });
    CHECK(contiguous(seriation, 0));
    CHECK(contiguous(seriation, 10));
    // the final ordering is that seriation rotated cyclically
    const std::size_t shift = position(so.ordering, seriation[0]);
    for (std::size_t k = 0; k < 19; ++k) CHECK(so.ordering[(k + shift) % 19] == seriation[k]);
  }
}

TEST_CASE("spectral order on a three-site chain minimizes weighted distance") {
  QmiMatrix q(3);
  q(0, 1) = q(1, 0) = 1.0;
  q(1, 2) = q(2, 1) = 1.0;
  const auto so = spectral_order(q);
  // brute force over all permutations
  Ordering perm{0, 1, 2};
  double best = 1e300;
  std::vector<Ordering> minimizers;
  do {
    double cost = 0.0;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b) {
        const auto pa = std::find(perm.begin(), perm.end(), a) - perm.begin();
        const auto pb = std::find(perm.begin(), perm.end(), b) - perm.begin();
        cost += q(a, b) * static_cast<double>(std::abs(pa - pb));
      }
    if (cost < best - 1e-12) {
      best = cost;
      minimizers.clear();
    }
    if (cost < best + 1e-12) minimizers.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(std::find(minimizers.begin(), minimizers.end(), so.ordering) != minimizers.end());
  CHECK(so.ordering[1] == 1);
}

TEST_CASE("spectral order centers the most coupled site and is deterministic") {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    QmiMatrix q(19);
    for (std::size_t i = 0; i < 19; ++i)
      for (std::size_t j = i + 1; j < 19; ++j) q(i, j) = q(j, i) = u(rng);
    const auto so = spectral_order(q);
    validate_ordering(so.ordering, 19);
    std::size_t hub = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < 19; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < 19; ++j) r += i == j ? 0.0 : q(i, j);
      if (r > best) {
        best = r;
        hub = i;
      }
    }
    CHECK(so.ordering[9] == hub);
    CHECK(spectral_order(q).ordering == so.ordering);
  }
}
