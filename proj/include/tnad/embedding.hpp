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

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace tnad {

inline constexpr std::size_t kNumParticles = 19;
inline constexpr std::size_t kFeaturesPerParticle = 3;
inline constexpr std::size_t kNumFeatures = kNumParticles * kFeaturesPerParticle;

/// Canonical slots: 0 = MET, 1-4 electrons, 5-8 muons, 9-18 jets.
enum class ParticleKind { Met, Electron, Muon, Jet };

ParticleKind particle_kind(std::size_t canonical_index);
const char* particle_name(std::size_t canonical_index);

/// pT scale dividing the first site component.
double pt_reference(ParticleKind kind);

struct Particle {
  double pt = 0.0;
  double eta = 0.0;
  double phi = 0.0;
  friend bool operator==(const Particle&, const Particle&) = default;
};

/// One collision event: 19 (pt, eta, phi) triples in canonical order.
///
/// Construction validates ranges; absent particles are exact zero triples.
class EventRecord {
 public:
  EventRecord() = default;
  explicit EventRecord(const std::array<Particle, kNumParticles>& particles);

  static EventRecord from_features(std::span<const double> features);
  std::array<double, kNumFeatures> features() const;

  const std::array<Particle, kNumParticles>& particles() const noexcept { return particles_; }
  const Particle& operator[](std::size_t i) const noexcept { return particles_[i]; }

  friend bool operator==(const EventRecord&, const EventRecord&) = default;

 private:
  std::array<Particle, kNumParticles> particles_{};
};

using SiteVector = std::array<double, kFeaturesPerParticle>;
using EventSites = std::array<SiteVector, kNumParticles>;

/// Maps every particle to (pt / pt_ref, (eta + 5) / 10, (phi + pi) / 2pi).
/// MET pseudorapidity is forced to zero first.
EventSites preprocess(const EventRecord& event);

/// ordering[k] is the canonical site placed at chain position k.
using Ordering = std::vector<std::size_t>;

Ordering identity_ordering(std::size_t n);
void validate_ordering(std::span<const std::size_t> ordering, std::size_t n);

/// Product-state MPS: one physical vector per site, bond dimension 1.
///
/// `values` holds n_sites * phys_dim entries, site-major. Sites have already
/// been divided by `gamma`.
struct EmbeddedMps {
  std::size_t n_sites = 0;
  std::size_t phys_dim = 0;
  std::vector<double> values;
  double gamma = 1.0;
  Ordering ordering;

  std::span<const double> site(std::size_t i) const { return {values.data() + i * phys_dim, phys_dim}; }
  std::span<double> site(std::size_t i) { return {values.data() + i * phys_dim, phys_dim}; }

  /// Squared norm of the product state, i.e. the product of site norms squared.
  double product_norm_sq() const;
};

/// Reorders and normalizes arbitrary site vectors (all of equal length).
///
/// gamma is the geometric mean of the raw site norms and every stored site is
/// divided by it, so the product state has unit norm.
EmbeddedMps embed_sites(std::span<const std::vector<double>> canonical_sites, std::span<const std::size_t> ordering);

EmbeddedMps embed(const EventRecord& event, std::span<const std::size_t> ordering);

/// Raw product state without the gamma normalization; used by tests and tools
/// that want to feed custom vectors to a model.
EmbeddedMps product_state(std::span<const std::vector<double>> sites);

class QmiMatrix {
 public:
  explicit QmiMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

/// Von Neumann entropy -Tr(rho ln rho) of a symmetric matrix after trace
/// normalization. Eigenvalues below zero (numerical noise) count as zero.
double von_neumann_entropy(std::span<const double> matrix, std::size_t dim);

/// Pairwise mutual information from per-event site vectors (each event holds
/// the same number of 3-vectors). Density matrices are built from the raw
/// vectors and trace-normalized before the entropy.
QmiMatrix compute_qmi_sites(std::span<const std::vector<SiteVector>> events);

QmiMatrix compute_qmi(std::span<const EventRecord> events);

struct SpectralOrdering {
  Ordering ordering;
  std::vector<double> fiedler;  // indexed by canonical site
  bool disconnected = false;    // no usable coupling; identity returned
  bool degenerate = false;      // Fiedler eigenvalue not simple; identity returned
};

/// Spectral seriation of the QMI graph.
///
/// Sites are sorted by their Fiedler-vector entry (Laplacian D - W of the
/// off-diagonal QMI), then the sequence is rotated so that the site with the
/// largest QMI row sum sits at position n / 2.
SpectralOrdering spectral_order(const QmiMatrix& qmi);

}  // namespace tnad
