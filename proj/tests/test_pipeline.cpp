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

#include <filesystem>
#include <fstream>

#include "binauralforge/config.hpp"
#include "binauralforge/pipeline.hpp"
#include "binauralforge/spatial.hpp"
#include "binauralforge/toydata.hpp"
#include "test_util.hpp"

using namespace bf;

namespace {

DatasetManifest tiny_dataset(const std::string& dir) {
  const std::string src = dir + "/src";
  for (const auto& ev : {"tone_low", "chirp_up"}) {
    std::filesystem::create_directories(src + "/" + std::string(ev));
    write_wav(make_toy_clip(ev, 0),
              src + "/" + std::string(ev) + "/" + std::string(ev) + "_000.wav");
  }
  auto bank = synth_spherical_hrir();
  auto m = build_dataset(src, bank, ClipSpec{}, dir + "/out");
  m.save(dir + "/manifest.json");
  return m;
}

}  // namespace

TEST_CASE("run config parses, validates, and rejects unknown keys") {
  auto cfg = parse_run_config(nlohmann::json{{"workspace", "/tmp/ws"},
                                             {"seed", 7},
                                             {"variant", "stft_base"},
                                             {"inference_steps", 25}});
  CHECK(cfg.workspace == "/tmp/ws");
  CHECK(cfg.seed == 7);
  CHECK(cfg.inference_steps == 25);
  CHECK(cfg.features.stft.n_fft == 512);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json{{"wrkspace", "x"}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json{{"variant", "nope"}}),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(nlohmann::json{{"beta_start", 0.5}, {"beta_end", 0.1}}),
      ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json{{"seed", "soup"}}),
                  ConfigError);
}

TEST_CASE("variant layouts share one latent cell count per branch") {
  for (auto v : {Variant::MEL_BASE, Variant::STFT_BASE, Variant::DUALSPEC,
                 Variant::DUALSPEC_D}) {
    auto lay = variant_layout(v);
    lay.validate();
    CHECK(variant_from_name(variant_name(v)) == v);
  }
  auto dual = variant_layout(Variant::DUALSPEC);
  // Both branches cover the same padded grid cell count (80x16 == 40x32).
  CHECK(dual.H * dual.W == dual.Hs * dual.Ws);
  CHECK(variant_layout(Variant::MEL_BASE).channels() == 8);
  CHECK(variant_layout(Variant::DUALSPEC).channels() == 16);
}

TEST_CASE("descriptor kind picks are stable and cover all kinds") {
  bool saw[3] = {false, false, false};
  for (int i = 0; i < 30; ++i) {
    auto k = pick_descriptor_kind("clip_" + std::to_string(i) + ".wav", 1);
    CHECK(k == pick_descriptor_kind("clip_" + std::to_string(i) + ".wav", 1));
    saw[static_cast<int>(k)] = true;
  }
  CHECK(saw[0]);
  CHECK(saw[1]);
  CHECK(saw[2]);
}

TEST_CASE("feature cache recomputes only when entries are missing or stale") {
  auto dir = bft::scratch_dir("pipe_cache");
  auto manifest = tiny_dataset(dir);
  FeatureConfigs cfgs;
  auto first = cache_features(manifest, cfgs, dir + "/cache");
  CHECK(first.misses == static_cast<int>(manifest.records.size()));
  CHECK(first.hits == 0);
  auto second = cache_features(manifest, cfgs, dir + "/cache");
  CHECK(second.hits == static_cast<int>(manifest.records.size()));
  CHECK(second.misses == 0);
  CHECK(second.pairs[0].mel_path == first.pairs[0].mel_path);
  // Corrupting a cached file invalidates that entry.
  {
    std::ofstream f(first.pairs[0].mel_path,
                    std::ios::binary | std::ios::app);
    f << "tail garbage";
  }
  auto third = cache_features(manifest, cfgs, dir + "/cache");
  CHECK(third.misses == 1);
  CHECK(third.hits == static_cast<int>(manifest.records.size()) - 1);
  // Cached features carry the canonical frame geometry.
  auto mel = read_feature(first.pairs[0].mel_path);
  CHECK(mel.valid_frames == canonical_valid_frames(cfgs.stft));
  CHECK(mel.frames % kPadMultiple == 0);
}

TEST_CASE("latent dataset, short training, and generation stay deterministic") {
  auto dir = bft::scratch_dir("pipe_gen");
  auto manifest = tiny_dataset(dir);
  FeatureConfigs cfgs;
  auto cache = cache_features(manifest, cfgs, dir + "/cache");
  auto vocab = EventVocab::from_labels(manifest.events);

  Rng vrng(1);
  Vae<float> mel_vae(VaeConfig::mel({6, 8}), vrng);

  nn::UnetConfig ucfg;
  ucfg.widths = {8, 8, 16};
  ucfg.res_blocks = 1;
  auto sched = linear_schedule(100, 1e-4, 0.02);
  Rng mrng(2);
  VariantModel<float> model(Variant::MEL_BASE, vocab.size(), ucfg, sched,
                            mrng);
  auto data = build_latent_dataset<float>(manifest, cache, model, &mel_vae,
                                          nullptr, nullptr, vocab, 0);
  CHECK(data.size() ==
        manifest.records.size() - manifest.split_counts["val"]);
  for (const auto& s : data) {
    CHECK(s.pair.mel.size() == model.layout.cells() * 8u);
    CHECK(s.pair.stft.empty());
  }
  // Standardization produced roughly zero-mean unit-variance latents.
  double sum = 0, sq = 0;
  size_t n = 0;
  for (const auto& s : data)
    for (float v : s.pair.mel) {
      sum += v;
      sq += double(v) * v;
      ++n;
    }
  CHECK(std::abs(sum / n) < 1e-3);
  CHECK(std::abs(sq / n - 1.0) < 1e-2);

  nn::OptimizerConfig oc;
  oc.lr = 1e-4;
  Rng trng(3);
  auto losses = train_variant(model, data, oc, 4, 0.1, trng);
  CHECK(losses.size() == 4);

  const auto prompt = render_prompt("tone_low", 3, DescriptorKind::DOA).text;
  auto a = generate<float>(model, &mel_vae, nullptr, nullptr, prompt, vocab,
                    cfgs.stft, 4, 2.0, 99);
  auto b = generate<float>(model, &mel_vae, nullptr, nullptr, prompt, vocab,
                    cfgs.stft, 4, 2.0, 99);
  CHECK(a.clip.channels() == 2);
  CHECK(a.clip.length() == ClipSpec{}.target_samples());
  CHECK(a.cond.azimuth_class == 3);
  CHECK(a.clip.samples == b.clip.samples);  // same seed, same bytes
  auto c = generate<float>(model, &mel_vae, nullptr, nullptr, prompt, vocab,
                    cfgs.stft, 4, 2.0, 100);
  CHECK(a.clip.samples != c.clip.samples);  // different seed differs
}
