// Copyright 2026 The BinauralForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BINAURALFORGE_PROMPT_HPP
#define BINAURALFORGE_PROMPT_HPP

#include <array>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "binauralforge/common.hpp"
#include "binauralforge/spatial.hpp"

namespace bf {

enum class DescriptorKind : int { DOA = 0, CLOCK = 1, GENERAL = 2 };

inline const char* descriptor_kind_name(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::DOA: return "doa";
    case DescriptorKind::CLOCK: return "clock";
    case DescriptorKind::GENERAL: return "general";
  }
  return "?";
}

struct Prompt {
  std::string text;
  DescriptorKind kind = DescriptorKind::DOA;
};

struct Conditioning {
  int event_id = 0;
  int azimuth_class = 0;
  DescriptorKind kind = DescriptorKind::DOA;
};

// Event vocabulary: one label per line, index = line number.
struct EventVocab {
  std::vector<std::string> labels;
  std::map<std::string, int> index;

  static EventVocab from_labels(std::vector<std::string> labels) {
    EventVocab v;
    v.labels = std::move(labels);
    for (size_t i = 0; i < v.labels.size(); ++i)
      v.index[v.labels[i]] = static_cast<int>(i);
    return v;
  }
  static EventVocab load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw RuntimeError("EventVocab: cannot read " + path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) labels.push_back(line);
    return from_labels(std::move(labels));
  }
  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw RuntimeError("EventVocab: cannot write " + path);
    for (const auto& l : labels) f << l << "\n";
  }
  int lookup(const std::string& label) const {
    auto it = index.find(label);
    if (it == index.end())
      throw RuntimeError("prompt: unknown event \"" + label + "\"");
    return it->second;
  }
  int size() const { return static_cast<int>(labels.size()); }
};

namespace prompt_detail {

// 8 sectors at 45-degree centers, clockwise from front. Diagonal sectors map
// to the clockwise-earlier 30-degree grid class.
struct Sector {
  int center_deg;
  int canonical_class;
  std::vector<const char*> phrases;  // first entry is canonical
};

inline const std::array<Sector, 8>& sectors() {
  static const std::array<Sector, 8> s = {{
      {0, 0, {"in front", "straight ahead"}},
      {45, 1, {"to the front-right"}},
      {90, 3, {"to the right", "on the right"}},
      {135, 4, {"to the back-right"}},
      {180, 6, {"behind", "directly behind"}},
      {225, 7, {"to the back-left"}},
      {270, 9, {"to the left", "on the left"}},
      {315, 10, {"to the front-left"}},
  }};
  return s;
}

inline int nearest_sector(int deg) {
  int best = 0, best_dist = 1000;
  for (int i = 0; i < 8; ++i) {
    int d = std::abs(deg - sectors()[i].center_deg);
    d = std::min(d, 360 - d);
    // Ties break toward the smaller angle, i.e. the earlier sector.
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

}  // namespace prompt_detail

// Renders "EVENT: <event> & LOCATION: <location>". The GENERAL descriptor is
// deliberately coarser than the 12-class grid (8 sectors); the seed picks
// among phrase synonyms.
inline Prompt render_prompt(const std::string& event, int azimuth_class,
                            DescriptorKind kind, uint64_t seed = 0) {
  const int deg = AzimuthGrid::to_degrees(azimuth_class);
  std::string loc;
  switch (kind) {
    case DescriptorKind::DOA:
      loc = std::to_string(deg) + " degrees";
      break;
    case DescriptorKind::CLOCK: {
      const int h = ((deg / 30 + 11) % 12) + 1;  // 0->12, 90->3, 180->6, 270->9
      loc = std::to_string(h) + " o'clock";
      break;
    }
    case DescriptorKind::GENERAL: {
      const auto& sec =
          prompt_detail::sectors()[prompt_detail::nearest_sector(deg)];
      Rng rng(seed ^ 0x70726f6d70ull);
      loc = sec.phrases[rng.uniform_int(sec.phrases.size())];
      break;
    }
  }
  return Prompt{"EVENT: " + event + " & LOCATION: " + loc, kind};
}

// Inverse of render_prompt on its range. GENERAL phrases map to the sector's
// canonical grid class. Throws RuntimeError with a reason for every
// non-matching string.
inline Conditioning parse_prompt(const std::string& text,
                                 const EventVocab& vocab) {
  const std::string event_tag = "EVENT: ";
  const std::string loc_tag = " & LOCATION: ";
  if (text.rfind(event_tag, 0) != 0)
    throw RuntimeError("prompt: malformed template (missing \"EVENT: \"): " +
                       text);
  const size_t loc_pos = text.find(loc_tag);
  if (loc_pos == std::string::npos)
    throw RuntimeError(
        "prompt: malformed template (missing \" & LOCATION: \"): " + text);
  const std::string event = text.substr(event_tag.size(),
                                        loc_pos - event_tag.size());
  if (event.empty())
    throw RuntimeError("prompt: malformed template (empty event): " + text);
  const std::string loc = text.substr(loc_pos + loc_tag.size());
  if (loc.empty())
    throw RuntimeError("prompt: malformed template (empty location): " + text);

  Conditioning cond;
  cond.event_id = vocab.lookup(event);

  const std::string deg_suffix = " degrees";
  const std::string clock_suffix = " o'clock";
  auto ends_with = [](const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() &&
           s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  };
  auto parse_int = [&](const std::string& s) {
    if (s.empty()) throw RuntimeError("prompt: unparsable location: " + loc);
    size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw RuntimeError("prompt: unparsable location: " + loc);
    }
    if (used != s.size())
      throw RuntimeError("prompt: unparsable location: " + loc);
    return v;
  };

  if (ends_with(loc, deg_suffix)) {
    const int deg = parse_int(loc.substr(0, loc.size() - deg_suffix.size()));
    if (deg < 0 || deg >= 360 || deg % AzimuthGrid::kStepDeg != 0)
      throw RuntimeError(
          "prompt: unparsable location (degrees not on the 30-degree grid): " +
          loc);
    cond.azimuth_class = AzimuthGrid::to_class(deg);
    cond.kind = DescriptorKind::DOA;
    return cond;
  }
  if (ends_with(loc, clock_suffix)) {
    const int h = parse_int(loc.substr(0, loc.size() - clock_suffix.size()));
    if (h < 1 || h > 12)
      throw RuntimeError("prompt: unparsable location (hour out of range): " +
                         loc);
    cond.azimuth_class = h % 12;
    cond.kind = DescriptorKind::CLOCK;
    return cond;
  }
  for (const auto& sec : prompt_detail::sectors()) {
    for (const char* phrase : sec.phrases) {
      if (loc == phrase) {
        cond.azimuth_class = sec.canonical_class;
        cond.kind = DescriptorKind::GENERAL;
        return cond;
      }
    }
  }
  throw RuntimeError("prompt: unparsable location: " + loc);
}

}  // namespace bf

#endif  // BINAURALFORGE_PROMPT_HPP
