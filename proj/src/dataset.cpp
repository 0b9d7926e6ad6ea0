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

#include "tnad/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "tnad/errors.hpp"

namespace tnad {
namespace {

constexpr char kMagic[4] = {'T', 'N', '1', '9'};
constexpr std::array<const char*, 5> kReferenceLabels = {kBackgroundLabel, "A_4l", "h0_taunu", "hpm_taunu",
                                                         "LQ_btau"};
constexpr std::uint8_t kUnlabeled = 255;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
    while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
  }
  return cells;
}

// float32 storage never rounds a coordinate past the +-pi / +-5 range limits.
float storage_float(double x) {
  float f = static_cast<float>(x);
  if (static_cast<double>(f) > x && x >= 0.0 && (x <= std::numbers::pi && static_cast<double>(f) > std::numbers::pi))
    f = std::nextafter(f, 0.0f);
  if (static_cast<double>(f) < x && x <= 0.0 && (x >= -std::numbers::pi && static_cast<double>(f) < -std::numbers::pi))
    f = std::nextafter(f, 0.0f);
  return f;
}

}  // namespace

void Dataset::validate() const {
  if (labels && labels->size() != events.size())
    raise(ErrorKind::Dimension, "dataset has " + std::to_string(labels->size()) + " labels for " +
                                    std::to_string(events.size()) + " events");
}

std::vector<std::string> Dataset::signal_labels() const {
  std::vector<std::string> out;
  if (!labels) return out;
  for (const auto& l : *labels)
    if (l != kBackgroundLabel && std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  return out;
}

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  end = std::min(end, events.size());
  begin = std::min(begin, end);
  Dataset out;
  out.events.assign(events.begin() + static_cast<std::ptrdiff_t>(begin), events.begin() + static_cast<std::ptrdiff_t>(end));
  if (labels)
    out.labels = std::vector<std::string>(labels->begin() + static_cast<std::ptrdiff_t>(begin),
                                          labels->begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

DataFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::Csv : DataFormat::RawBin;
}

std::uint8_t label_code(const std::string& label) {
  for (std::size_t i = 0; i < kReferenceLabels.size(); ++i)
    if (label == kReferenceLabels[i]) return static_cast<std::uint8_t>(i);
  if (label.rfind("signal_", 0) == 0) {
    int code = 0;
    const auto* first = label.data() + 7;
    const auto* last = label.data() + label.size();
    auto [ptr, ec] = std::from_chars(first, last, code);
    if (ec == std::errc() && ptr == last && code >= 5 && code < kUnlabeled) return static_cast<std::uint8_t>(code);
  }
  raise(ErrorKind::Format, "label '" + label + "' has no raw-binary code");
}

std::string label_name(std::uint8_t code) {
  if (code < kReferenceLabels.size()) return kReferenceLabels[code];
  if (code == kUnlabeled) raise(ErrorKind::Format, "unlabeled code has no name");
  return "signal_" + std::to_string(code);
}

std::vector<std::string> csv_header(bool with_label) {
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < kNumParticles; ++i)
    for (const char* var : {"pt", "eta", "phi"}) cols.push_back(std::string(particle_name(i)) + "_" + var);
  if (with_label) cols.emplace_back("label");
  return cols;
}

Dataset parse_csv(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool with_label = false;
  std::vector<std::string> labels;
  std::array<double, kNumFeatures> features{};
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() == kNumFeatures + 1 && cells.back() == "label")
        with_label = true;
      else if (cells.size() != kNumFeatures)
        raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": header has " + std::to_string(cells.size()) +
                                    " columns, expected 57 features and an optional label");
      continue;
    }
    if (cells.size() != kNumFeatures + (with_label ? 1 : 0))
      raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(kNumFeatures + (with_label ? 1 : 0)) + " columns, found " +
                                  std::to_string(cells.size()));
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      const auto cell = cells[k];
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, features[k]);
      if (ec != std::errc() || ptr != last || cell.empty())
        raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ", column " + std::to_string(k + 1) +
                                    ": not a number '" + std::string(cell) + "'");
    }
    try {
      data.events.push_back(EventRecord::from_features(features));
    } catch (const Error& err) {
      raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + err.what());
    }
    if (with_label) labels.emplace_back(cells.back());
  }
  if (!header_seen) raise(ErrorKind::Parse, "CSV has no header row");
  if (with_label) data.labels = std::move(labels);
  return data;
}

std::string to_csv(const Dataset& data) {
  data.validate();
  std::string out;
  const auto header = csv_header(data.labels.has_value());
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  char buf[64];
  for (std::size_t e = 0; e < data.events.size(); ++e) {
    const auto f = data.events[e].features();
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (k) out += ',';
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), f[k]);
      out.append(buf, ptr);
    }
    if (data.labels) out += ',' + (*data.labels)[e];
    out += '\n';
  }
  return out;
}

Dataset parse_rawbin(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    raise(ErrorKind::Format, "missing TN19 magic");
  std::uint32_t count = 0;
  for (int i = 0; i < 4; ++i) count |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  constexpr std::size_t record = kNumFeatures * 4 + 1;
  if (bytes.size() != 8 + record * count)
    raise(ErrorKind::Format, "file holds " + std::to_string(bytes.size()) + " bytes, header promises " +
                                 std::to_string(count) + " events");
  Dataset data;
  data.events.reserve(count);
  std::vector<std::string> labels;
  bool any_label = false, any_unlabeled = false;
  std::array<double, kNumFeatures> features{};
  std::size_t offset = 8;
  for (std::uint32_t e = 0; e < count; ++e) {
    for (std::size_t k = 0; k < kNumFeatures; ++k, offset += 4) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
      features[k] = static_cast<double>(std::bit_cast<float>(bits));
    }
    const auto code = static_cast<std::uint8_t>(bytes[offset++]);
    try {
      data.events.push_back(EventRecord::from_features(features));
    } catch (const Error& err) {
      raise(ErrorKind::Parse, "event " + std::to_string(e) + ": " + err.what());
    }
    if (code == kUnlabeled) {
      any_unlabeled = true;
      labels.emplace_back();
    } else {
      any_label = true;
      labels.push_back(label_name(code));
    }
  }
  if (any_label && any_unlabeled) raise(ErrorKind::Format, "file mixes labeled and unlabeled events");
  if (any_label) data.labels = std::move(labels);
  return data;
}

std::string to_rawbin(const Dataset& data) {
  data.validate();
  if (data.events.size() > 0xffffffffULL) raise(ErrorKind::Format, "too many events for a u32 count");
  std::string out(kMagic, 4);
  const auto count = static_cast<std::uint32_t>(data.events.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((count >> (8 * i)) & 0xffU));
  out.reserve(8 + (kNumFeatures * 4 + 1) * count);
  for (std::size_t e = 0; e < data.events.size(); ++e) {
    for (double v : data.events[e].features()) {
      const auto bits = std::bit_cast<std::uint32_t>(storage_float(v));
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
    }
    out.push_back(static_cast<char>(data.labels ? label_code((*data.labels)[e]) : kUnlabeled));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
  const std::string bytes = read_file(path);
  return format == DataFormat::Csv ? parse_csv(bytes) : parse_rawbin(bytes);
}

Dataset load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_for_path(path)); }

void save_dataset(const std::filesystem::path& path, const Dataset& data, DataFormat format) {
  write_file(path, format == DataFormat::Csv ? to_csv(data) : to_rawbin(data));
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  save_dataset(path, data, format_for_path(path));
}

namespace {

struct Candidate {
  ParticleKind kind;
  Particle p;
};

double wrap_phi(double phi) {
  while (phi > std::numbers::pi) phi -= 2.0 * std::numbers::pi;
  while (phi < -std::numbers::pi) phi += 2.0 * std::numbers::pi;
  return phi;
}

class EventSampler {
 public:
  EventSampler(const SyntheticConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  EventRecord background() {
    std::vector<Candidate> parts;
    const Particle lead = lepton(cfg_.lepton_filter_pt + exponential(cfg_.lepton_pt_mean));
    parts.push_back({flavour(), lead});
    for (int k = 0; k < 3 && uniform() < cfg_.extra_lepton_prob; ++k)
      parts.push_back({flavour(), lepton(10.0 + exponential(15.0))});
    add_jets(parts, cfg_.jet_multiplicity);
    Particle met{0.6 * lead.pt + exponential(20.0), 0.0, wrap_phi(lead.phi + std::numbers::pi + normal(0.5))};
    return assemble(met, parts);
  }

  EventRecord anomaly() {
    std::vector<Candidate> parts;
    const double shift = cfg_.anomaly_shift_sigma * cfg_.lepton_pt_mean;
    for (int k = 0; k < 4; ++k)
      parts.push_back({flavour(), lepton(cfg_.lepton_filter_pt + shift + exponential(cfg_.lepton_pt_mean))});
    add_jets(parts, cfg_.anomaly_jet_multiplicity);
    Particle met{exponential(20.0), 0.0, phi()};
    return assemble(met, parts);
  }

 private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double exponential(double mean) { return std::exponential_distribution<double>(1.0 / mean)(rng_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  double phi() { return std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng_); }
  double eta(double sigma, double limit) { return std::clamp(normal(sigma), -limit, limit); }
  ParticleKind flavour() { return uniform() < 0.5 ? ParticleKind::Electron : ParticleKind::Muon; }
  Particle lepton(double pt) { return {pt, eta(1.0, 2.5), phi()}; }

  void add_jets(std::vector<Candidate>& parts, double mean) {
    const int n = std::min(10, std::poisson_distribution<int>(mean)(rng_));
    for (int k = 0; k < n; ++k)
      parts.push_back({ParticleKind::Jet, {cfg_.jet_pt_min + exponential(cfg_.jet_pt_mean), eta(1.6, 4.5), phi()}});
  }

  static EventRecord assemble(const Particle& met, std::vector<Candidate>& parts) {
    std::stable_sort(parts.begin(), parts.end(), [](const Candidate& a, const Candidate& b) { return a.p.pt > b.p.pt; });
    std::array<Particle, kNumParticles> slots{};
    slots[0] = met;
    std::size_t n_e = 0, n_mu = 0, n_j = 0;
    for (const auto& c : parts) {
      if (c.kind == ParticleKind::Electron && n_e < 4)
        slots[1 + n_e++] = c.p;
      else if (c.kind == ParticleKind::Muon && n_mu < 4)
        slots[5 + n_mu++] = c.p;
      else if (c.kind == ParticleKind::Jet && n_j < 10)
        slots[9 + n_j++] = c.p;
    }
    return EventRecord(slots);
  }

  const SyntheticConfig& cfg_;
  std::mt19937_64 rng_;
};

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.lepton_pt_mean <= 0.0 || cfg.jet_pt_mean <= 0.0 || cfg.jet_multiplicity < 0.0 ||
      cfg.anomaly_jet_multiplicity < 0.0 || cfg.extra_lepton_prob < 0.0 || cfg.extra_lepton_prob > 1.0)
    raise(ErrorKind::Config, "invalid synthetic configuration");
  if (cfg.anomaly_label == kBackgroundLabel) raise(ErrorKind::Config, "anomaly label must differ from background");
  EventSampler sampler(cfg, seed);
  Dataset data;
  std::vector<std::string> labels;
  data.events.reserve(cfg.n_background + cfg.n_anomaly);
  for (std::size_t i = 0; i < cfg.n_background; ++i) {
    data.events.push_back(sampler.background());
    labels.emplace_back(kBackgroundLabel);
  }
  for (std::size_t i = 0; i < cfg.n_anomaly; ++i) {
    data.events.push_back(sampler.anomaly());
    labels.push_back(cfg.anomaly_label);
  }
  if (cfg.shuffle) {
    std::mt19937_64 shuffler(seed ^ 0x5bd1e995ULL);
    std::vector<std::size_t> perm(data.events.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), shuffler);
    Dataset shuffled;
    std::vector<std::string> shuffled_labels;
    for (auto i : perm) {
      shuffled.events.push_back(data.events[i]);
      shuffled_labels.push_back(labels[i]);
    }
    shuffled.labels = std::move(shuffled_labels);
    return shuffled;
  }
  data.labels = std::move(labels);
  return data;
}

}  // namespace tnad
