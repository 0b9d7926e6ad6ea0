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

#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tnad/dataset.hpp"
#include "tnad/errors.hpp"

using namespace tnad;

namespace {

std::string csv_line(const std::vector<double>& values, const std::string& label = "") {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  if (!label.empty()) out += "," + label;
  return out + "\n";
}

std::string header(bool label) {
  std::string out;
  for (const auto& h : csv_header(label)) out += (out.empty() ? "" : ",") + h;
  return out + "\n";
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Config;
}

}  // namespace

TEST_CASE("header layout") {
  const auto h = csv_header(true);
  REQUIRE(h.size() == 58);
  CHECK(h[0] == "MET_pt");
  CHECK(h.back() == "label");
  CHECK(csv_header(false).size() == 57);
}

TEST_CASE("one-event CSV") {
  std::vector<double> row(57, 0.0);
  row[0] = 100.0;
  const auto d = parse_csv(header(false) + csv_line(row));
  REQUIRE(d.size() == 1);
  CHECK_FALSE(d.labels.has_value());
  CHECK(d.events[0][0] == Particle{100.0, 0.0, 0.0});
  for (std::size_t i = 1; i < 19; ++i) CHECK(d.events[0][i] == Particle{});
}

TEST_CASE("CSV range violation names the line") {
  std::vector<double> ok(57, 0.0), bad(57, 0.0);
  bad[2] = 3.5;
  try {
    parse_csv(header(true) + csv_line(ok, "background") + csv_line(bad, "background"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("malformed CSV") {
  std::vector<double> row(57, 0.0);
  CHECK(kind_of([&] { parse_csv(""); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_csv("a,b,c\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse_csv(header(false) + "1,2,3\n"); }) == ErrorKind::Parse);
  auto text = header(false) + csv_line(row);
  text[text.rfind("0.000000")] = 'x';
  try {
    parse_csv(text);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2, column 57") != std::string::npos);
  }
}

TEST_CASE("CSV round-trip is exact") {
  SyntheticConfig c;
  c.n_background = 300;
  c.n_anomaly = 30;
  const auto d = generate_synthetic(c, 3);
  const auto back = parse_csv(to_csv(d));
  CHECK(back.events == d.events);
  CHECK(back.labels == d.labels);
}

TEST_CASE("raw binary round-trip is bitwise") {
  std::mt19937_64 rng(51);
  Dataset d;
  d.labels.emplace();
  const char* names[] = {"background", "A_4l", "h0_taunu", "hpm_taunu", "LQ_btau", "signal_9"};
  for (int i = 0; i < 1000; ++i) {
    d.events.push_back(oracle::random_event(rng));
    d.labels->push_back(names[i % 6]);
  }
  const auto bytes = to_rawbin(d);
  CHECK(bytes.size() == 8 + 1000 * (57 * 4 + 1));
  CHECK(bytes.substr(0, 4) == "TN19");
  const auto back = parse_rawbin(bytes);
  CHECK(back.labels == d.labels);
  REQUIRE(back.size() == d.size());
  for (std::size_t e = 0; e < d.size(); ++e) {
    const auto a = d.events[e].features(), b = back.events[e].features();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(static_cast<float>(a[k]) == doctest::Approx(b[k]).epsilon(1e-6));
  }
  CHECK(to_rawbin(back) == bytes);
  CHECK(parse_rawbin(to_rawbin(back)).events == back.events);
}

TEST_CASE("raw binary rejects bad files") {
  Dataset d;
  d.events.resize(2);
  auto bytes = to_rawbin(d);
  CHECK(parse_rawbin(bytes).size() == 2);
  CHECK_FALSE(parse_rawbin(bytes).labels.has_value());
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { parse_rawbin(bad); }) == ErrorKind::Format);
  CHECK(kind_of([&] { parse_rawbin(bytes.substr(0, bytes.size() - 1)); }) == ErrorKind::Format);
  CHECK(kind_of([&] { parse_rawbin("TN"); }) == ErrorKind::Format);
  bad = bytes;
  bad.back() = 0;
  CHECK(kind_of([&] { parse_rawbin(bad); }) == ErrorKind::Format);
}

TEST_CASE("label codes") {
  CHECK(label_code("background") == 0);
  CHECK(label_code("A_4l") == 1);
  CHECK(label_code("LQ_btau") == 4);
  CHECK(label_code("signal_77") == 77);
  CHECK(label_name(3) == "hpm_taunu");
  CHECK(label_name(200) == "signal_200");
  CHECK(kind_of([] { label_code("something"); }) == ErrorKind::Format);
  CHECK(kind_of([] { label_name(255); }) == ErrorKind::Format);
}

TEST_CASE("file helpers pick the format from the extension") {
  CHECK(format_for_path("x.csv") == DataFormat::Csv);
  CHECK(format_for_path("x.bin") == DataFormat::RawBin);
  SyntheticConfig c;
  c.n_background = 40;
  c.n_anomaly = 4;
  const auto d = generate_synthetic(c, 8);
  const auto dir = std::filesystem::temp_directory_path() / "tnad_test_dataset";
  std::filesystem::create_directories(dir);
  save_dataset(dir / "d.csv", d);
  save_dataset(dir / "d.bin", d);
  CHECK(load_dataset(dir / "d.csv").events == d.events);
  CHECK(load_dataset(dir / "d.bin").labels == d.labels);
  CHECK(kind_of([&] { load_dataset(dir / "missing.bin"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic data is reproducible") {
  SyntheticConfig c;
  c.n_background = 500;
  c.n_anomaly = 50;
  const auto a = generate_synthetic(c, 9);
  CHECK(a.events == generate_synthetic(c, 9).events);
  CHECK(a.labels == generate_synthetic(c, 9).labels);
  CHECK_FALSE(a.events == generate_synthetic(c, 10).events);
  CHECK(to_rawbin(a) == to_rawbin(generate_synthetic(c, 9)));
}

TEST_CASE("synthetic background passes the lepton filter") {
  SyntheticConfig c;
  c.n_background = 2000;
  const auto d = generate_synthetic(c, 11);
  REQUIRE(d.labels);
  for (const auto& l : *d.labels) CHECK(l == "background");
  CHECK(d.signal_labels().empty());
  for (const auto& e : d.events) {
    double lead = 0.0;
    for (std::size_t i = 1; i <= 8; ++i) lead = std::max(lead, e[i].pt);
    CHECK(lead >= c.lepton_filter_pt);
  }
}

TEST_CASE("synthetic anomalies carry four leptons") {
  SyntheticConfig c;
  c.n_background = 0;
  c.n_anomaly = 200;
  const auto d = generate_synthetic(c, 12);
  CHECK(d.signal_labels() == std::vector<std::string>{"A_4l"});
  for (const auto& e : d.events) {
    int leptons = 0;
    for (std::size_t i = 1; i <= 8; ++i) leptons += e[i].pt > 0.0;
    CHECK(leptons == 4);
  }
}

TEST_CASE("subsets and validation") {
  SyntheticConfig c;
  c.n_background = 10;
  c.n_anomaly = 5;
  c.shuffle = false;
  const auto d = generate_synthetic(c, 13);
  const auto tail = d.subset(10, 15);
  CHECK(tail.size() == 5);
  CHECK(tail.signal_labels() == std::vector<std::string>{"A_4l"});
  CHECK_FALSE(tail.is_background(0));
  Dataset broken = d;
  broken.labels->pop_back();
  CHECK(kind_of([&] { broken.validate(); }) == ErrorKind::Dimension);
  c.anomaly_label = "background";
  CHECK(kind_of([&] { generate_synthetic(c, 1); }) == ErrorKind::Config);
}
