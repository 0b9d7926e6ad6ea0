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

#include "tnad/embedding.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {
namespace {

constexpr double kEigenClamp = 1e-12;

bool in_range(const Particle& p) {
  return std::isfinite(p.pt) && std::isfinite(p.eta) && std::isfinite(p.phi) && p.pt >= 0.0 && p.eta >= -5.0 &&
         p.eta <= 5.0 && p.phi >= -std::numbers::pi && p.phi <= std::numbers::pi;
}

}  // namespace

ParticleKind particle_kind(std::size_t canonical_index) {
  if (canonical_index == 0) return ParticleKind::Met;
  if (canonical_index <= 4) return ParticleKind::Electron;
  if (canonical_index <= 8) return ParticleKind::Muon;
  if (canonical_index < kNumParticles) return ParticleKind::Jet;
  raise(ErrorKind::Index, "particle index " + std::to_string(canonical_index) + " out of range");
}

const char* particle_name(std::size_t canonical_index) {
  static constexpr std::array<const char*, kNumParticles> names = {
      "MET", "e1", "e2", "e3", "e4", "mu1", "mu2", "mu3", "mu4", "j1",
      "j2",  "j3", "j4", "j5", "j6", "j7",  "j8",  "j9",  "j10"};
  if (canonical_index >= kNumParticles) raise(ErrorKind::Index, "particle index out of range");
  return names[canonical_index];
}

double pt_reference(ParticleKind kind) {
  switch (kind) {
    case ParticleKind::Jet: return 2500.0;
    case ParticleKind::Muon: return 800.0;
    case ParticleKind::Electron:
    case ParticleKind::Met: return 1200.0;
  }
  return 1.0;
}

EventRecord::EventRecord(const std::array<Particle, kNumParticles>& particles) : particles_(particles) {
  for (std::size_t i = 0; i < kNumParticles; ++i) {
    if (!in_range(particles_[i]))
      raise(ErrorKind::Parse, std::string("particle ") + particle_name(i) + " out of range (pt=" +
                                  std::to_string(particles_[i].pt) + ", eta=" + std::to_string(particles_[i].eta) +
                                  ", phi=" + std::to_string(particles_[i].phi) + ")");
  }
}

EventRecord EventRecord::from_features(std::span<const double> features) {
  if (features.size() != kNumFeatures)
    raise(ErrorKind::Dimension, "expected 57 features, got " + std::to_string(features.size()));
  std::array<Particle, kNumParticles> particles{};
  for (std::size_t i = 0; i < kNumParticles; ++i)
    particles[i] = {features[3 * i], features[3 * i + 1], features[3 * i + 2]};
  return EventRecord(particles);
}

std::array<double, kNumFeatures> EventRecord::features() const {
  std::array<double, kNumFeatures> out{};
  for (std::size_t i = 0; i < kNumParticles; ++i) {
    out[3 * i] = particles_[i].pt;
    out[3 * i + 1] = particles_[i].eta;
    out[3 * i + 2] = particles_[i].phi;
  }
  return out;
}

EventSites preprocess(const EventRecord& event) {
  EventSites sites{};
  for (std::size_t i = 0; i < kNumParticles; ++i) {
    const Particle& p = event[i];
    const ParticleKind kind = particle_kind(i);
    const double eta = kind == ParticleKind::Met ? 0.0 : p.eta;
    sites[i] = {p.pt / pt_reference(kind), (eta + 5.0) / 10.0, (p.phi + std::numbers::pi) / (2.0 * std::numbers::pi)};
  }
  return sites;
}

Ordering identity_ordering(std::size_t n) {
  Ordering out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

void validate_ordering(std::span<const std::size_t> ordering, std::size_t n) {
  if (ordering.size() != n)
    raise(ErrorKind::Config, "ordering has " + std::to_string(ordering.size()) + " entries, expected " +
                                 std::to_string(n));
  std::vector<bool> seen(n, false);
  for (auto site : ordering) {
    if (site >= n || seen[site]) raise(ErrorKind::Config, "ordering is not a permutation of 0.." + std::to_string(n - 1));
    seen[site] = true;
  }
}

double EmbeddedMps::product_norm_sq() const {
  double prod = 1.0;
  for (std::size_t i = 0; i < n_sites; ++i) {
    double s = 0.0;
    for (double v : site(i)) s += v * v;
    prod *= s;
  }
  return prod;
}

EmbeddedMps product_state(std::span<const std::vector<double>> sites) {
  EmbeddedMps mps;
  mps.n_sites = sites.size();
  mps.phys_dim = sites.empty() ? 0 : sites.front().size();
  mps.ordering = identity_ordering(sites.size());
  for (const auto& s : sites) {
    if (s.size() != mps.phys_dim) raise(ErrorKind::Dimension, "site vectors differ in length");
    mps.values.insert(mps.values.end(), s.begin(), s.end());
  }
  return mps;
}

EmbeddedMps embed_sites(std::span<const std::vector<double>> canonical_sites, std::span<const std::size_t> ordering) {
  const std::size_t n = canonical_sites.size();
  validate_ordering(ordering, n);
  if (n == 0) raise(ErrorKind::Config, "cannot embed zero sites");

  std::vector<std::vector<double>> placed;
  placed.reserve(n);
  for (auto canonical : ordering) placed.push_back(canonical_sites[canonical]);
  EmbeddedMps mps = product_state(placed);
  mps.ordering.assign(ordering.begin(), ordering.end());

  // Norms are multiplied in sorted order so gamma does not depend on storage order.
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : placed[i]) s += v * v;
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0))
      raise(ErrorKind::Degenerate, "site " + std::to_string(ordering[i]) + " has zero norm");
  }
  std::sort(norms.begin(), norms.end());
  double prod = 1.0;
  for (double v : norms) prod *= v;
  mps.gamma = std::pow(prod, 1.0 / static_cast<double>(n));
  for (double& v : mps.values) v /= mps.gamma;
  return mps;
}

EmbeddedMps embed(const EventRecord& event, std::span<const std::size_t> ordering) {
  const EventSites sites = preprocess(event);
  std::vector<std::vector<double>> canonical;
  canonical.reserve(kNumParticles);
  for (const auto& s : sites) canonical.emplace_back(s.begin(), s.end());
  return embed_sites(canonical, ordering);
}

double von_neumann_entropy(std::span<const double> matrix, std::size_t dim) {
  if (matrix.size() != dim * dim) raise(ErrorKind::Dimension, "entropy input is not square");
  Eigen::MatrixXd rho(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) rho(i, j) = 0.5 * (matrix[i * dim + j] + matrix[j * dim + i]);
  const double trace = rho.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) raise(ErrorKind::Numeric, "density matrix has non-positive trace");
  rho /= trace;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) raise(ErrorKind::Numeric, "eigendecomposition failed");
  double entropy = 0.0;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    const double lambda = solver.eigenvalues()(k);
    if (lambda < -kEigenClamp)
      raise(ErrorKind::Numeric, "density matrix has eigenvalue " + std::to_string(lambda));
    if (lambda > 0.0) entropy -= lambda * std::log(lambda);
  }
  return entropy;
}

QmiMatrix compute_qmi_sites(std::span<const std::vector<SiteVector>> events) {
  if (events.size() < 2) raise(ErrorKind::Config, "QMI needs at least two events");
  const std::size_t n = events.front().size();
  for (const auto& e : events)
    if (e.size() != n) raise(ErrorKind::Dimension, "events carry different numbers of sites");
  const double inv_n = 1.0 / static_cast<double>(events.size());
  constexpr std::size_t d = kFeaturesPerParticle;

  // Single-site second moments.
  std::vector<std::array<double, d * d>> rho1(n);
  for (auto& r : rho1) r.fill(0.0);
  for (const auto& e : events)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) rho1[i][a * d + b] += e[i][a] * e[i][b] * inv_n;

  std::vector<double> s1(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      s1[i] = von_neumann_entropy(rho1[i], d);
    } catch (const Error& err) {
      raise(ErrorKind::Numeric, "site " + std::to_string(i) + ": " + err.what());
    }
  }

  QmiMatrix qmi(n);
  std::array<double, d * d> y{};
  std::vector<double> rho2(d * d * d * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::fill(rho2.begin(), rho2.end(), 0.0);
      for (const auto& e : events) {
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) y[a * d + b] = e[i][a] * e[j][b];
        for (std::size_t u = 0; u < d * d; ++u) {
          const double yu = y[u] * inv_n;
          if (yu == 0.0) continue;
          for (std::size_t v = 0; v < d * d; ++v) rho2[u * d * d + v] += yu * y[v];
        }
      }
      double s2 = 0.0;
      try {
        s2 = von_neumann_entropy(rho2, d * d);
      } catch (const Error& err) {
        raise(ErrorKind::Numeric, "site pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + err.what());
      }
      qmi(i, j) = qmi(j, i) = s1[i] + s1[j] - s2;
    }
  }
  return qmi;
}

QmiMatrix compute_qmi(std::span<const EventRecord> events) {
  std::vector<std::vector<SiteVector>> sites;
  sites.reserve(events.size());
  for (const auto& e : events) {
    const EventSites s = preprocess(e);
    sites.emplace_back(s.begin(), s.end());
  }
  return compute_qmi_sites(sites);
}

SpectralOrdering spectral_order(const QmiMatrix& qmi) {
  const std::size_t n = qmi.size();
  SpectralOrdering result;
  result.ordering = identity_ordering(n);
  result.fiedler.assign(n, 0.0);
  if (n < 3) return result;

  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> row_sum(n, 0.0);
  double max_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = std::max(0.0, 0.5 * (qmi(i, j) + qmi(j, i)));
      laplacian(i, j) = -w;
      row_sum[i] += w;
      max_weight = std::max(max_weight, w);
    }
    laplacian(i, i) = row_sum[i];
  }
  if (max_weight <= 1e-12) {
    result.disconnected = true;
    return result;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian);
  if (solver.info() != Eigen::Success) raise(ErrorKind::Numeric, "Laplacian eigendecomposition failed");
  const auto& lambda = solver.eigenvalues();
  const double scale = std::max(lambda(n - 1), 1e-300);
  if (lambda(1) <= 1e-10 * scale) {
    result.disconnected = true;
    return result;
  }
  if (lambda(2) - lambda(1) <= 1e-9 * scale) {
    result.degenerate = true;
    return result;
  }

  Eigen::VectorXd fiedler = solver.eigenvectors().col(1);
  const double vmax = fiedler.cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(fiedler(i)) > 1e-9 * vmax) {
      if (fiedler(i) > 0.0) fiedler = -fiedler;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) result.fiedler[i] = fiedler(i);

  Ordering sorted = identity_ordering(n);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return result.fiedler[a] < result.fiedler[b]; });

  std::size_t hub = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row_sum[i] > row_sum[hub]) hub = i;
  const std::size_t hub_pos = static_cast<std::size_t>(std::find(sorted.begin(), sorted.end(), hub) - sorted.begin());
  const std::size_t center = n / 2;
  const std::size_t shift = (center + n - hub_pos) % n;
  for (std::size_t k = 0; k < n; ++k) result.ordering[(k + shift) % n] = sorted[k];
  return result;
}

}  // namespace tnad
