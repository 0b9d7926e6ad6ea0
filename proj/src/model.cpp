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

#include "tnad/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include "json.hpp"
#include <random>
#include <sstream>

#include "tnad/errors.hpp"

namespace tnad {
namespace {

constexpr double kInitNoise = 0.1;
constexpr const char* kModelMagic = "tnad-model";

void normalize_outputs(std::vector<std::size_t>& outputs, std::size_t n_sites) {
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  if (outputs.empty()) raise(ErrorKind::Config, "an SMPO layer needs at least one output site");
  if (outputs.back() >= n_sites)
    raise(ErrorKind::Config, "output site " + std::to_string(outputs.back()) + " outside a " +
                                 std::to_string(n_sites) + "-site layer");
}

std::string shape_string(const DenseTensor::Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

}  // namespace

bool SmpoLayer::is_output(std::size_t site) const {
  return std::binary_search(output_sites.begin(), output_sites.end(), site);
}

DenseTensor::Shape SmpoLayer::site_shape(std::size_t site) const {
  return {phys_in, out_extent(site), left_bond(site), right_bond(site)};
}

void SmpoLayer::validate() const {
  if (n_sites == 0) raise(ErrorKind::Config, "layer has no sites");
  if (bond == 0 || phys_in == 0 || phys_out == 0) raise(ErrorKind::Config, "layer dimensions must be positive");
  if (output_sites.empty()) raise(ErrorKind::Config, "layer has no output sites");
  if (!std::is_sorted(output_sites.begin(), output_sites.end()) || output_sites.back() >= n_sites)
    raise(ErrorKind::Config, "output sites must be sorted and inside the layer");
  if (sites.size() != n_sites)
    raise(ErrorKind::Dimension, "layer declares " + std::to_string(n_sites) + " sites but holds " +
                                    std::to_string(sites.size()));
  for (std::size_t s = 0; s < n_sites; ++s) {
    if (sites[s].shape() != site_shape(s))
      raise(ErrorKind::Dimension, "site " + std::to_string(s) + " has shape " + shape_string(sites[s].shape()) +
                                      ", expected " + shape_string(site_shape(s)));
  }
}

SmpoLayer zero_smpo(std::size_t n_sites, std::vector<std::size_t> output_sites, std::size_t bond,
                    std::size_t phys_in, std::size_t phys_out) {
  if (n_sites == 0) raise(ErrorKind::Config, "layer needs at least one site");
  if (bond == 0 || phys_in == 0 || phys_out == 0) raise(ErrorKind::Config, "layer dimensions must be positive");
  normalize_outputs(output_sites, n_sites);
  SmpoLayer layer;
  layer.n_sites = n_sites;
  layer.bond = bond;
  layer.phys_in = phys_in;
  layer.phys_out = phys_out;
  layer.output_sites = std::move(output_sites);
  layer.sites.reserve(n_sites);
  for (std::size_t s = 0; s < n_sites; ++s) layer.sites.emplace_back(layer.site_shape(s));
  return layer;
}

SmpoLayer new_smpo(std::size_t n_sites, std::vector<std::size_t> output_sites, std::size_t bond,
                   std::size_t phys_in, std::size_t phys_out, std::uint64_t seed) {
  SmpoLayer layer = zero_smpo(n_sites, std::move(output_sites), bond, phys_in, phys_out);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-kInitNoise, kInitNoise);
  const double noise_scale = 1.0 / std::sqrt(static_cast<double>(bond));
  for (std::size_t s = 0; s < n_sites; ++s) {
    DenseTensor& t = layer.sites[s];
    const auto& sh = t.shape();
    const std::size_t pout = sh[1];
    // A site that collapses the physical leg maps every input slice onto the
    // single output with weight 1/sqrt(phys_in), i.e. unit operator norm.
    const double collapse = 1.0 / std::sqrt(static_cast<double>(phys_in));
    std::size_t flat = 0;
    for (std::size_t pi = 0; pi < sh[0]; ++pi)
      for (std::size_t po = 0; po < sh[1]; ++po)
        for (std::size_t l = 0; l < sh[2]; ++l)
          for (std::size_t r = 0; r < sh[3]; ++r, ++flat) {
            double v = noise(rng) * noise_scale;
            if (l == r) {
              if (pout == 1 && phys_in > 1)
                v += collapse;
              else if (pi == po)
                v += 1.0;
            }
            t[flat] = v;
          }
  }
  return layer;
}

std::string architecture_tag(Architecture arch) {
  switch (arch) {
    case Architecture::Smpo19to1: return "19→1";
    case Architecture::Csmpo19to7to1: return "19→7→1";
    case Architecture::Csmpo19to2to1: return "19→2→1";
    case Architecture::Custom: return "custom";
  }
  return "custom";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "19→1" || text == "19-1" || text == "smpo") return Architecture::Smpo19to1;
  if (text == "19→7→1" || text == "19-7-1" || text == "csmpo") return Architecture::Csmpo19to7to1;
  if (text == "19→2→1" || text == "19-2-1") return Architecture::Csmpo19to2to1;
  if (text == "custom") return Architecture::Custom;
  raise(ErrorKind::Config, "unknown architecture '" + text + "'");
}

void TnModel::validate() const {
  if (layers.empty() || layers.size() > 2) raise(ErrorKind::Structural, "a model has one or two layers");
  for (const auto& layer : layers) layer.validate();
  if (layers.size() == 2) {
    const SmpoLayer& l1 = layers[0];
    const SmpoLayer& l2 = layers[1];
    if (l2.n_sites != l1.output_sites.size())
      raise(ErrorKind::Structural, "layer 2 has " + std::to_string(l2.n_sites) + " sites but layer 1 emits " +
                                       std::to_string(l1.output_sites.size()));
    if (l2.phys_in != l1.phys_out)
      raise(ErrorKind::Structural, "layer 2 phys_in " + std::to_string(l2.phys_in) + " != layer 1 phys_out " +
                                       std::to_string(l1.phys_out));
  }
  validate_ordering(ordering, input_sites());
}

TnModel single_layer_model(SmpoLayer layer, Ordering ordering, std::string label) {
  TnModel model;
  model.ordering = ordering.empty() ? identity_ordering(layer.n_sites) : std::move(ordering);
  model.layers.push_back(std::move(layer));
  model.label = std::move(label);
  model.validate();
  return model;
}

TnModel new_smpo_model(std::size_t bond, std::size_t phys_out, std::uint64_t seed) {
  TnModel model = single_layer_model(new_smpo(kNumParticles, {9}, bond, kFeaturesPerParticle, phys_out, seed), {},
                                     architecture_tag(Architecture::Smpo19to1));
  model.seed = seed;
  return model;
}

TnModel new_csmpo(Architecture arch, std::size_t bond1, std::size_t bond2, std::size_t phys_mid,
                  std::uint64_t seed) {
  std::vector<std::size_t> l1_outputs;
  std::size_t l2_output = 0;
  switch (arch) {
    case Architecture::Csmpo19to7to1:
      l1_outputs = {0, 3, 6, 9, 12, 15, 18};
      l2_output = 3;
      break;
    case Architecture::Csmpo19to2to1:
      l1_outputs = {0, 18};
      l2_output = 0;
      break;
    default: raise(ErrorKind::Config, "'" + architecture_tag(arch) + "' is not a cascade architecture");
  }
  TnModel model;
  const std::size_t m = l1_outputs.size();
  model.layers.push_back(new_smpo(kNumParticles, std::move(l1_outputs), bond1, kFeaturesPerParticle, phys_mid, seed));
  model.layers.push_back(new_smpo(m, {l2_output}, bond2, phys_mid, kFeaturesPerParticle, seed + 0x9e3779b97f4a7c15ULL));
  model.ordering = identity_ordering(kNumParticles);
  model.label = architecture_tag(arch);
  model.seed = seed;
  model.validate();
  return model;
}

TnModel new_reference_model(Architecture arch, std::uint64_t seed) {
  switch (arch) {
    case Architecture::Smpo19to1: return new_smpo_model(4, 3, seed);
    case Architecture::Csmpo19to7to1:
    case Architecture::Csmpo19to2to1: return new_csmpo(arch, 2, 2, 3, seed);
    case Architecture::Custom: break;
  }
  raise(ErrorKind::Config, "no reference dimensions for a custom architecture");
}

std::size_t param_count(const SmpoLayer& layer) {
  std::size_t total = 0;
  for (const auto& t : layer.sites) total += t.size();
  return total;
}

std::size_t param_count(const TnModel& model) {
  std::size_t total = 0;
  for (const auto& layer : model.layers) total += param_count(layer);
  return total;
}

SmpoLayer flatten_cascade(const TnModel& model) {
  if (model.layers.size() != 2) raise(ErrorKind::Structural, "flatten_cascade needs a two-layer model");
  model.validate();
  const SmpoLayer& l1 = model.layers[0];
  const SmpoLayer& l2 = model.layers[1];
  const std::size_t composite = l1.bond * l2.bond;
  std::vector<std::size_t> outputs;
  for (auto k : l2.output_sites) outputs.push_back(l1.output_sites[k]);
  SmpoLayer flat = zero_smpo(l1.n_sites, outputs, composite, l1.phys_in, l2.phys_out);

  // Layer-2 bond carried on the link right of layer-1 site s; it is the link
  // between layer-2 sites k-1 and k, where k counts layer-1 outputs <= s.
  auto l2_link = [&](std::size_t s) -> std::size_t {
    const auto k = static_cast<std::size_t>(
        std::upper_bound(l1.output_sites.begin(), l1.output_sites.end(), s) - l1.output_sites.begin());
    if (k == 0 || k == l2.n_sites) return 1;
    return l2.right_bond(k - 1);
  };

  for (std::size_t s = 0; s < l1.n_sites; ++s) {
    const DenseTensor& w1 = l1.sites[s];
    DenseTensor& out = flat.sites[s];
    const std::size_t a1_dim = l1.left_bond(s), c1_dim = l1.right_bond(s);
    const std::size_t a2_dim = s == 0 ? 1 : l2_link(s - 1);
    const std::size_t c2_dim = l2_link(s);
    const std::size_t pin = l1.phys_in;
    const auto& osh = out.shape();
    auto out_index = [&](std::size_t pi, std::size_t po, std::size_t a1, std::size_t a2, std::size_t c1,
                         std::size_t c2) {
      const std::size_t l = a1 * a2_dim + a2, r = c1 * c2_dim + c2;
      return ((pi * osh[1] + po) * osh[2] + l) * osh[3] + r;
    };
    if (!l1.is_output(s)) {
      for (std::size_t pi = 0; pi < pin; ++pi)
        for (std::size_t a1 = 0; a1 < a1_dim; ++a1)
          for (std::size_t c1 = 0; c1 < c1_dim; ++c1) {
            const double w = w1.at({pi, 0, a1, c1});
            for (std::size_t k = 0; k < a2_dim; ++k) out[out_index(pi, 0, a1, k, c1, k)] = w;
          }
      continue;
    }
    const auto k = static_cast<std::size_t>(
        std::lower_bound(l1.output_sites.begin(), l1.output_sites.end(), s) - l1.output_sites.begin());
    const DenseTensor& w2 = l2.sites[k];
    const auto& sh2 = w2.shape();
    if (sh2[2] != a2_dim || sh2[3] != c2_dim)
      raise(ErrorKind::Structural, "layer-2 site " + std::to_string(k) + " bonds do not match the cascade links");
    for (std::size_t pi = 0; pi < pin; ++pi)
      for (std::size_t po = 0; po < sh2[1]; ++po)
        for (std::size_t a1 = 0; a1 < a1_dim; ++a1)
          for (std::size_t c1 = 0; c1 < c1_dim; ++c1)
            for (std::size_t a2 = 0; a2 < a2_dim; ++a2)
              for (std::size_t c2 = 0; c2 < c2_dim; ++c2) {
                double acc = 0.0;
                for (std::size_t pm = 0; pm < l1.phys_out; ++pm)
                  acc += w1.at({pi, pm, a1, c1}) * w2.at({pm, po, a2, c2});
                out[out_index(pi, po, a1, a2, c1, c2)] = acc;
              }
  }
  flat.validate();
  return flat;
}

namespace {

void append_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

double read_f64(const std::string& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string serialize_model(const TnModel& model, const std::optional<ScoreCalibration>& calibration) {
  model.validate();
  nlohmann::json header;
  header["format"] = kModelMagic;
  header["version"] = 1;
  header["architecture"] = model.label;
  header["seed"] = model.seed;
  header["ordering"] = model.ordering;
  nlohmann::json layers = nlohmann::json::array();
  std::size_t n_weights = 0;
  for (const auto& layer : model.layers) {
    layers.push_back({{"n_sites", layer.n_sites},
                      {"bond", layer.bond},
                      {"phys_in", layer.phys_in},
                      {"phys_out", layer.phys_out},
                      {"output_sites", layer.output_sites}});
    n_weights += param_count(layer);
  }
  header["layers"] = layers;
  if (calibration) header["calibration"] = {{"median_bkg", calibration->median_bkg}};
  header["blob_bytes"] = n_weights * 8;

  std::string out = header.dump() + "\n";
  out.reserve(out.size() + n_weights * 8);
  for (const auto& layer : model.layers)
    for (const auto& t : layer.sites)
      for (double v : t.data()) append_f64(out, v);
  return out;
}

ModelFile deserialize_model(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) raise(ErrorKind::Format, "model file has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::Format, std::string("model header is not JSON: ") + e.what());
  }
  if (header.value("format", "") != kModelMagic) raise(ErrorKind::Format, "not a tnad model file");

  ModelFile file;
  try {
    TnModel& model = file.model;
    model.label = header.at("architecture").get<std::string>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.ordering = header.at("ordering").get<Ordering>();
    std::size_t offset = newline + 1;
    const auto blob_bytes = header.at("blob_bytes").get<std::size_t>();
    if (bytes.size() - offset != blob_bytes)
      raise(ErrorKind::Format, "weight blob has " + std::to_string(bytes.size() - offset) + " bytes, header says " +
                                   std::to_string(blob_bytes));
    for (const auto& entry : header.at("layers")) {
      SmpoLayer layer = zero_smpo(entry.at("n_sites").get<std::size_t>(),
                                  entry.at("output_sites").get<std::vector<std::size_t>>(),
                                  entry.at("bond").get<std::size_t>(), entry.at("phys_in").get<std::size_t>(),
                                  entry.at("phys_out").get<std::size_t>());
      for (auto& t : layer.sites) {
        if (offset + 8 * t.size() > bytes.size()) raise(ErrorKind::Format, "weight blob is truncated");
        for (double& v : t.data()) {
          v = read_f64(bytes, offset);
          offset += 8;
        }
      }
      model.layers.push_back(std::move(layer));
    }
    if (offset != bytes.size()) raise(ErrorKind::Format, "trailing bytes after weight blob");
    model.validate();
    if (header.contains("calibration"))
      file.calibration = ScoreCalibration{header["calibration"].at("median_bkg").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::Format, std::string("bad model header: ") + e.what());
  }
  return file;
}

void save_model(const std::filesystem::path& path, const TnModel& model,
                const std::optional<ScoreCalibration>& calibration) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  const std::string bytes = serialize_model(model, calibration);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace tnad
