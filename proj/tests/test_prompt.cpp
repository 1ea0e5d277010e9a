// Copyright 2026 The binauralforge Authors
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "binauralforge/prompt.hpp"
#include "binauralforge/toydata.hpp"

using namespace bf;

namespace {
EventVocab vocab() { return EventVocab::from_labels(toy_event_labels()); }
}  // namespace

TEST_CASE("DOA and clock prompts invert exactly") {
  auto v = vocab();
  for (const auto& ev : v.labels)
    for (int c = 0; c < AzimuthGrid::kClasses; ++c) {
      for (auto kind : {DescriptorKind::DOA, DescriptorKind::CLOCK}) {
        auto p = render_prompt(ev, c, kind);
        auto cond = parse_prompt(p.text, v);
        CHECK(cond.event_id == v.lookup(ev));
        CHECK(cond.azimuth_class == c);
        CHECK(cond.kind == kind);
      }
    }
}

TEST_CASE("general prompts map to their sector's canonical class") {
  auto v = vocab();
  for (const auto& ev : v.labels)
    for (int c = 0; c < AzimuthGrid::kClasses; ++c)
      for (uint64_t seed = 0; seed < 3; ++seed) {
        auto p = render_prompt(ev, c, DescriptorKind::GENERAL, seed);
        auto cond = parse_prompt(p.text, v);
        CHECK(cond.event_id == v.lookup(ev));
        CHECK(cond.kind == DescriptorKind::GENERAL);
        // Sector width is 45 degrees; the canonical grid class sits within
        // half a sector of the original angle (with wraparound).
        const int orig = AzimuthGrid::to_degrees(c);
        const int got = AzimuthGrid::to_degrees(cond.azimuth_class);
        const int d = std::abs(orig - got);
        CHECK(std::min(d, 360 - d) <= 30);
      }
}

TEST_CASE("clock rendering uses the 12-hour dial") {
  auto p0 = render_prompt("x", 0, DescriptorKind::CLOCK);
  auto p3 = render_prompt("x", 3, DescriptorKind::CLOCK);
  auto p6 = render_prompt("x", 6, DescriptorKind::CLOCK);
  auto p9 = render_prompt("x", 9, DescriptorKind::CLOCK);
  CHECK(p0.text.find("12 o'clock") != std::string::npos);
  CHECK(p3.text.find("3 o'clock") != std::string::npos);
  CHECK(p6.text.find("6 o'clock") != std::string::npos);
  CHECK(p9.text.find("9 o'clock") != std::string::npos);
}

TEST_CASE("malformed prompts raise structured errors") {
  auto v = vocab();
  const std::vector<std::string> bad = {
      "",
      "EVENT: tone_low",
      "LOCATION: 90 degrees",
      "EVENT: tone_low & LOCATION:",
      "EVENT: tone_low & LOCATION: 45 degrees",     // off-grid angle
      "EVENT: tone_low & LOCATION: 361 degrees",
      "EVENT: tone_low & LOCATION: -30 degrees",
      "EVENT: tone_low & LOCATION: 13 o'clock",
      "EVENT: tone_low & LOCATION: 0 o'clock",
      "EVENT: tone_low & LOCATION: noon",
      "EVENT: nosuchevent & LOCATION: 90 degrees",
      "EVENT: & LOCATION: 90 degrees",
      "event: tone_low & location: 90 degrees",
      "EVENT tone_low & LOCATION 90 degrees",
      "EVENT: tone_low LOCATION: 90 degrees",
      "EVENT: tone_low & LOCATION: degrees",
      "EVENT: tone_low & LOCATION: o'clock",
      "EVENT: tone_low & LOCATION: somewhere weird",
      "EVENT: tone_low & LOCATION: 90",
      "EVENT: tone_low & LOCATION: 90 degrees extra",
  };
  for (const auto& text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_prompt(text, v), RuntimeError);
  }
}
