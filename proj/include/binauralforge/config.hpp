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

// Run configuration: one JSON document describing every stage of the
// pipeline (data synthesis, VAE / LDM / localizer training, generation
// and evaluation).  Unknown keys are rejected so that typos fail loudly.

#ifndef BINAURALFORGE_CONFIG_HPP_
#define BINAURALFORGE_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "binauralforge/common.hpp"
#include "binauralforge/dsp.hpp"
#include "binauralforge/nn/optim.hpp"
#include "binauralforge/nn/unet.hpp"
#include "binauralforge/pipeline.hpp"

namespace bf {

struct TrainStageConfig {
  int64_t steps = 5000;
  int64_t batch_size = 4;
  double lr = 1e-3;
  double weight_decay = 0.0;

  nn::OptimizerConfig optimizer() const {
    nn::OptimizerConfig oc;
    oc.lr = lr;
    oc.weight_decay = weight_decay;
    oc.total_steps = steps;
    return oc;
  }
};

struct RunConfig {
  // Paths.  source_dir empty means "synthesize the built-in toy corpus".
  std::string source_dir;
  std::string hrir_dir;  // empty => synthetic spherical-head HRIRs
  std::string workspace;

  // Data synthesis.
  int clips_per_event = 12;
  double val_fraction = 0.2;

  // Features.
  FeatureConfigs features;

  // Models.
  std::vector<int> mel_vae_widths = {16, 32};
  std::vector<int> stft_vae_widths = {16, 32, 48};
  std::vector<int> unet_widths = {32, 64, 128};
  int unet_res_blocks = 2;
  int unet_heads = 4;

  // Diffusion schedule.
  int64_t schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double cond_drop_p = 0.1;

  // Sampling defaults.
  int64_t inference_steps = 200;
  double guidance = 3.0;

  // Training stages.
  TrainStageConfig vae_stage{5000, 4, 1e-3, 0.0};
  TrainStageConfig ldm_stage{10000, 4, 2e-4, 1e-4};
  int loc_epochs = 30;
  int64_t loc_batch_size = 8;
  double loc_lr = 1e-3;

  uint64_t seed = 0;
  std::string variant = "dualspec";

  nn::UnetConfig unet_config() const {
    nn::UnetConfig uc;
    uc.widths = unet_widths;
    uc.res_blocks = unet_res_blocks;
    uc.heads = unet_heads;
    return uc;
  }

  void validate() const {
    check(clips_per_event > 0, "config: clips_per_event must be positive");
    check(val_fraction >= 0.0 && val_fraction < 1.0,
          "config: val_fraction must be in [0, 1)");
    check(schedule_steps > 0, "config: schedule_steps must be positive");
    check(beta_start > 0.0 && beta_end > beta_start && beta_end < 1.0,
          "config: betas must satisfy 0 < beta_start < beta_end < 1");
    check(cond_drop_p >= 0.0 && cond_drop_p <= 1.0,
          "config: cond_drop_p must be in [0, 1]");
    check(inference_steps > 0 && inference_steps <= schedule_steps,
          "config: inference_steps must be in [1, schedule_steps]");
    check(!unet_widths.empty(), "config: unet_widths must be non-empty");
    check(!mel_vae_widths.empty() && !stft_vae_widths.empty(),
          "config: VAE widths must be non-empty");
    check(vae_stage.steps > 0 && ldm_stage.steps > 0,
          "config: training step counts must be positive");
    check(loc_epochs > 0, "config: loc_epochs must be positive");
    variant_from_name(variant);  // throws on unknown name
  }
};

namespace config_detail {

template <typename T>
void fetch(nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " +
                      e.what());
  }
  j.erase(key);
}

inline void fetch_stage(nlohmann::json& j, const char* key,
                        TrainStageConfig& out) {
  if (!j.contains(key)) return;
  nlohmann::json s = j.at(key);
  check(s.is_object(), std::string("config: '") + key + "' must be an object");
  fetch(s, "steps", out.steps);
  fetch(s, "batch_size", out.batch_size);
  fetch(s, "lr", out.lr);
  fetch(s, "weight_decay", out.weight_decay);
  if (!s.empty())
    throw ConfigError(std::string("config: unknown key in '") + key + "': " +
                      s.begin().key());
  j.erase(key);
}

}  // namespace config_detail

inline RunConfig parse_run_config(nlohmann::json j) {
  using config_detail::fetch;
  check(j.is_object(), "config: document root must be a JSON object");
  RunConfig c;
  fetch(j, "source_dir", c.source_dir);
  fetch(j, "hrir_dir", c.hrir_dir);
  fetch(j, "workspace", c.workspace);
  fetch(j, "clips_per_event", c.clips_per_event);
  fetch(j, "val_fraction", c.val_fraction);
  fetch(j, "n_fft", c.features.stft.n_fft);
  fetch(j, "hop_length", c.features.stft.hop_length);
  fetch(j, "n_mels", c.features.n_mels);
  fetch(j, "mel_vae_widths", c.mel_vae_widths);
  fetch(j, "stft_vae_widths", c.stft_vae_widths);
  fetch(j, "unet_widths", c.unet_widths);
  fetch(j, "unet_res_blocks", c.unet_res_blocks);
  fetch(j, "unet_heads", c.unet_heads);
  fetch(j, "schedule_steps", c.schedule_steps);
  fetch(j, "beta_start", c.beta_start);
  fetch(j, "beta_end", c.beta_end);
  fetch(j, "cond_drop_p", c.cond_drop_p);
  fetch(j, "inference_steps", c.inference_steps);
  fetch(j, "guidance", c.guidance);
  config_detail::fetch_stage(j, "vae_stage", c.vae_stage);
  config_detail::fetch_stage(j, "ldm_stage", c.ldm_stage);
  fetch(j, "loc_epochs", c.loc_epochs);
  fetch(j, "loc_batch_size", c.loc_batch_size);
  fetch(j, "loc_lr", c.loc_lr);
  fetch(j, "seed", c.seed);
  fetch(j, "variant", c.variant);
  c.features.stft.win_length = c.features.stft.n_fft;
  if (!j.empty())
    throw ConfigError("config: unknown key '" + j.begin().key() + "'");
  try {
    c.validate();
  } catch (const RuntimeError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_run_config(std::move(j));
}

}  // namespace bf

#endif  // BINAURALFORGE_CONFIG_HPP_
