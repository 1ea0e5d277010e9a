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

// Command-line front end for the text-to-spatial-audio pipeline.
//
//   binauralforge <command> [--config run.json] [--workspace DIR] ...
//
// Commands: synth-data, train-vae, train-ldm, train-loc, generate,
// evaluate, report.  All state lives under the workspace directory
// (flag > config > $BINAURALFORGE_WORKSPACE).  Every command is
// deterministic given the same config, seed, and inputs.  Exit codes:
// 0 success, 2 configuration error, 3 runtime failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "binauralforge/audio_io.hpp"
#include "binauralforge/common.hpp"
#include "binauralforge/config.hpp"
#include "binauralforge/diffusion.hpp"
#include "binauralforge/dsp.hpp"
#include "binauralforge/localizer.hpp"
#include "binauralforge/metrics.hpp"
#include "binauralforge/nn/checkpoint.hpp"
#include "binauralforge/pipeline.hpp"
#include "binauralforge/prompt.hpp"
#include "binauralforge/spatial.hpp"
#include "binauralforge/toydata.hpp"
#include "binauralforge/vae.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using Scalar = float;

namespace {

// Line-delimited JSON event log on stdout.  No wall-clock fields: command
// output is part of the reproducibility contract.
void log_line(const std::string& event, json fields = json::object()) {
  fields["event"] = event;
  std::cout << fields.dump() << "\n";
}

struct Paths {
  fs::path ws;
  fs::path data() const { return ws / "data"; }
  fs::path features() const { return ws / "features"; }
  fs::path checkpoints() const { return ws / "checkpoints"; }
  fs::path generated() const { return ws / "generated"; }
  fs::path reports() const { return ws / "reports"; }
  fs::path manifest() const { return data() / "manifest.json"; }
  fs::path vocab() const { return data() / "vocab.txt"; }

  void prepare() const {
    for (const auto& d :
         {data(), features(), checkpoints(), generated(), reports()})
      fs::create_directories(d);
  }
};

struct Cli {
  std::string config_path;
  std::string workspace;
  std::string variant;
  std::string prompt;
  uint64_t seed = 0;
  bool seed_set = false;
  int64_t n = 12;
  int64_t steps = 0;  // 0 = config default
  double guidance = -1.0;  // <0 = config default
};

bf::RunConfig resolve_config(const Cli& cli) {
  bf::RunConfig cfg;
  if (!cli.config_path.empty()) cfg = bf::load_run_config(cli.config_path);
  if (!cli.workspace.empty()) cfg.workspace = cli.workspace;
  if (cfg.workspace.empty())
    if (const char* env = std::getenv("BINAURALFORGE_WORKSPACE"))
      cfg.workspace = env;
  if (cfg.workspace.empty())
    throw bf::ConfigError(
        "no workspace: pass --workspace, set it in the config, or export "
        "BINAURALFORGE_WORKSPACE");
  if (!cli.variant.empty()) {
    bf::variant_from_name(cli.variant);
    cfg.variant = cli.variant;
  }
  if (cli.seed_set) cfg.seed = cli.seed;
  if (cli.steps > 0) cfg.inference_steps = cli.steps;
  if (cli.guidance >= 0.0) cfg.guidance = cli.guidance;
  return cfg;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  bf::check(static_cast<bool>(f), "cannot write " + path.string());
  f << j.dump(1) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  bf::check(static_cast<bool>(f), "cannot read " + path.string());
  json j;
  f >> j;
  return j;
}

std::string file_hash(const fs::path& path) {
  return bf::pipeline_detail::hex64(bf::pipeline_detail::file_fnv1a(path.string()));
}

// --- Model persistence -----------------------------------------------------

json scale_json(const bf::LatentScale& s) {
  return json{{"mean", s.mean}, {"std", s.std}};
}

bf::LatentScale scale_from_json(const json& j) {
  return bf::LatentScale{j.at("mean").get<double>(), j.at("std").get<double>()};
}

bf::VaeConfig vae_config_for(bf::VaeKind kind, const bf::RunConfig& cfg) {
  switch (kind) {
    case bf::VaeKind::MEL: return bf::VaeConfig::mel(cfg.mel_vae_widths);
    case bf::VaeKind::STFT: return bf::VaeConfig::stft(cfg.stft_vae_widths);
    case bf::VaeKind::DUAL: return bf::VaeConfig::dual(cfg.stft_vae_widths);
  }
  throw bf::ConfigError("bad VAE kind");
}

const char* vae_kind_name(bf::VaeKind kind) {
  switch (kind) {
    case bf::VaeKind::MEL: return "mel";
    case bf::VaeKind::STFT: return "stft";
    case bf::VaeKind::DUAL: return "dual";
  }
  return "?";
}

fs::path vae_ckpt_path(const Paths& p, bf::VaeKind kind) {
  return p.checkpoints() / (std::string(vae_kind_name(kind)) + "_vae.ckpt");
}

void save_vae(const bf::Vae<Scalar>& vae, const fs::path& path) {
  bf::nn::save_checkpoint(vae.params(), path.string());
  write_json(json{{"kind", vae_kind_name(vae.config().kind)},
                  {"widths", vae.config().widths},
                  {"latent_channels", vae.config().latent_channels},
                  {"compression", vae.config().compression}},
             fs::path(path).replace_extension(".json"));
}

bf::Vae<Scalar> load_vae(bf::VaeKind kind, const bf::RunConfig& cfg,
                         const fs::path& path) {
  bf::check(fs::exists(path), "missing VAE checkpoint: " + path.string() +
                                  " (run train-vae first)");
  bf::Rng rng(0);
  bf::Vae<Scalar> vae(vae_config_for(kind, cfg), rng);
  bf::nn::load_checkpoint(vae.params(), path.string());
  return vae;
}

fs::path ldm_ckpt_path(const Paths& p, bf::Variant v) {
  return p.checkpoints() / (std::string("ldm_") + bf::variant_name(v) + ".ckpt");
}

void save_ldm(const bf::VariantModel<Scalar>& m, int n_events,
              const bf::RunConfig& cfg, const fs::path& path) {
  bf::nn::save_checkpoint(m.reg, path.string());
  write_json(json{{"variant", bf::variant_name(m.variant)},
                  {"n_events", n_events},
                  {"unet_widths", m.unet_cfg.widths},
                  {"unet_res_blocks", m.unet_cfg.res_blocks},
                  {"unet_heads", m.unet_cfg.heads},
                  {"schedule_steps", cfg.schedule_steps},
                  {"beta_start", cfg.beta_start},
                  {"beta_end", cfg.beta_end},
                  {"scale_mel", scale_json(m.scale_mel)},
                  {"scale_stft", scale_json(m.scale_stft)}},
             fs::path(path).replace_extension(".json"));
}

bf::VariantModel<Scalar> load_ldm(bf::Variant v, const fs::path& path) {
  bf::check(fs::exists(path), "missing model checkpoint: " + path.string() +
                                  " (run train-ldm first)");
  const json meta = read_json(fs::path(path).replace_extension(".json"));
  bf::check(meta.at("variant").get<std::string>() == bf::variant_name(v),
            "checkpoint variant mismatch: " + path.string());
  bf::nn::UnetConfig ucfg;
  ucfg.widths = meta.at("unet_widths").get<std::vector<int>>();
  ucfg.res_blocks = meta.at("unet_res_blocks").get<int>();
  ucfg.heads = meta.at("unet_heads").get<int>();
  auto sched = bf::linear_schedule(meta.at("schedule_steps").get<int64_t>(),
                                   meta.at("beta_start").get<double>(),
                                   meta.at("beta_end").get<double>());
  bf::Rng rng(0);
  bf::VariantModel<Scalar> m(v, meta.at("n_events").get<int>(), ucfg, sched,
                             rng);
  bf::nn::load_checkpoint(m.reg, path.string());
  m.scale_mel = scale_from_json(meta.at("scale_mel"));
  m.scale_stft = scale_from_json(meta.at("scale_stft"));
  return m;
}

fs::path judge_ckpt_path(const Paths& p) {
  return p.checkpoints() / "localizer.ckpt";
}
fs::path embedder_ckpt_path(const Paths& p) {
  return p.checkpoints() / "embedder.ckpt";
}

bf::LocalizerNet<Scalar> load_judge(const fs::path& path) {
  bf::check(fs::exists(path), "missing judge checkpoint: " + path.string() +
                                  " (run train-loc first)");
  bf::Rng rng(0);
  bf::LocalizerNet<Scalar> net(bf::LocalizerConfig{}, rng);
  bf::nn::load_checkpoint(net.params(), path.string());
  return net;
}

bf::EventClassifier<Scalar> load_embedder(const fs::path& path, int classes) {
  bf::check(fs::exists(path), "missing embedder checkpoint: " + path.string() +
                                  " (run train-loc first)");
  bf::EventClassifier<Scalar>::Config ec;
  ec.classes = classes;
  bf::Rng rng(0);
  bf::EventClassifier<Scalar> net(ec, rng);
  bf::nn::load_checkpoint(net.params(), path.string());
  return net;
}

// VAE kinds required by a variant.
std::vector<bf::VaeKind> needed_vaes(bf::Variant v) {
  switch (v) {
    case bf::Variant::MEL_BASE: return {bf::VaeKind::MEL};
    case bf::Variant::STFT_BASE: return {bf::VaeKind::STFT};
    case bf::Variant::DUALSPEC: return {bf::VaeKind::MEL, bf::VaeKind::STFT};
    case bf::Variant::DUALSPEC_D: return {bf::VaeKind::DUAL};
  }
  return {};
}

struct LoadedVaes {
  std::map<bf::VaeKind, bf::Vae<Scalar>> by_kind;
  const bf::Vae<Scalar>* get(bf::VaeKind k) const {
    auto it = by_kind.find(k);
    return it == by_kind.end() ? nullptr : &it->second;
  }
};

LoadedVaes load_needed_vaes(bf::Variant v, const bf::RunConfig& cfg,
                            const Paths& p) {
  LoadedVaes out;
  for (bf::VaeKind k : needed_vaes(v))
    out.by_kind.emplace(k, load_vae(k, cfg, vae_ckpt_path(p, k)));
  return out;
}

// --- Commands --------------------------------------------------------------

int cmd_synth_data(const bf::RunConfig& cfg, const Paths& p) {
  p.prepare();
  std::string src = cfg.source_dir;
  if (src.empty()) {
    src = (p.data() / "source").string();
    auto labels = bf::make_toy_corpus(src, cfg.clips_per_event);
    log_line("toy_corpus", {{"dir", src},
                            {"events", labels.size()},
                            {"clips_per_event", cfg.clips_per_event}});
  }
  bf::HrirBank bank = cfg.hrir_dir.empty()
                          ? bf::synth_spherical_hrir()
                          : bf::load_hrir_bank(cfg.hrir_dir);
  auto manifest = bf::build_dataset(src, bank, bf::ClipSpec{},
                                    (p.data() / "spatial").string());
  manifest.save(p.manifest().string());
  bf::EventVocab::from_labels(manifest.events).save(p.vocab().string());
  log_line("synth_data", {{"records", manifest.records.size()},
                          {"events", manifest.events.size()},
                          {"skipped", manifest.skipped.size()},
                          {"clipped_outputs", manifest.clipped_outputs},
                          {"manifest", p.manifest().string()}});
  return 0;
}

int cmd_train_vae(const bf::RunConfig& cfg, const Paths& p) {
  auto manifest = bf::DatasetManifest::load(p.manifest().string());
  auto cache =
      bf::cache_features(manifest, cfg.features, p.features().string());
  log_line("feature_cache", {{"hits", cache.hits}, {"misses", cache.misses}});

  const auto v = bf::variant_from_name(cfg.variant);
  for (bf::VaeKind kind : needed_vaes(v)) {
    std::vector<std::vector<Scalar>> data;
    int64_t H = 0, W = 0;
    for (size_t i = 0; i < manifest.records.size(); ++i) {
      if (manifest.records[i].split == "val") continue;
      switch (kind) {
        case bf::VaeKind::MEL: {
          auto f = bf::read_feature(cache.pairs[i].mel_path);
          H = f.frames;
          W = f.bins;
          data.push_back(bf::pack_feature<Scalar>(f));
          break;
        }
        case bf::VaeKind::STFT: {
          auto f = bf::read_feature(cache.pairs[i].stft_path);
          H = f.frames;
          W = f.bins;
          data.push_back(bf::pack_feature<Scalar>(f));
          break;
        }
        case bf::VaeKind::DUAL: {
          auto m = bf::read_feature(cache.pairs[i].mel_path);
          auto s = bf::read_feature(cache.pairs[i].stft_path);
          H = m.frames;
          W = bf::kDualFreqBins;
          data.push_back(bf::pack_dual<Scalar>(m, s));
          break;
        }
      }
    }
    bf::Rng rng(cfg.seed ^ (0x76616500ull + static_cast<uint64_t>(kind)));
    bf::Vae<Scalar> vae(vae_config_for(kind, cfg), rng);
    auto tlog = bf::train_vae(vae, data, H, W, cfg.vae_stage.optimizer(),
                              static_cast<int>(cfg.vae_stage.steps),
                              static_cast<int>(cfg.vae_stage.batch_size), rng);
    save_vae(vae, vae_ckpt_path(p, kind));
    log_line("train_vae", {{"kind", vae_kind_name(kind)},
                           {"samples", data.size()},
                           {"steps", cfg.vae_stage.steps},
                           {"final_loss", tlog.loss.empty() ? 0.0
                                                            : tlog.loss.back()},
                           {"checkpoint", vae_ckpt_path(p, kind).string()}});
  }
  return 0;
}

int cmd_train_ldm(const bf::RunConfig& cfg, const Paths& p) {
  auto manifest = bf::DatasetManifest::load(p.manifest().string());
  auto vocab = bf::EventVocab::load(p.vocab().string());
  auto cache =
      bf::cache_features(manifest, cfg.features, p.features().string());
  const auto v = bf::variant_from_name(cfg.variant);
  auto vaes = load_needed_vaes(v, cfg, p);

  auto sched =
      bf::linear_schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end);
  bf::Rng rng(cfg.seed ^ 0x6c646d00ull);
  bf::VariantModel<Scalar> model(v, static_cast<int>(vocab.labels.size()),
                                 cfg.unet_config(), sched, rng);
  auto data = bf::build_latent_dataset(
      manifest, cache, model, vaes.get(bf::VaeKind::MEL),
      vaes.get(bf::VaeKind::STFT), vaes.get(bf::VaeKind::DUAL), vocab,
      cfg.seed);
  auto losses = bf::train_variant(model, data, cfg.ldm_stage.optimizer(),
                                  static_cast<int>(cfg.ldm_stage.steps),
                                  cfg.cond_drop_p, rng);
  const auto path = ldm_ckpt_path(p, v);
  save_ldm(model, static_cast<int>(vocab.labels.size()), cfg, path);
  log_line("train_ldm",
           {{"variant", bf::variant_name(v)},
            {"latents", data.size()},
            {"steps", cfg.ldm_stage.steps},
            {"final_loss", losses.empty() ? 0.0 : losses.back()},
            {"checkpoint", path.string()}});
  return 0;
}

int cmd_train_loc(const bf::RunConfig& cfg, const Paths& p) {
  auto manifest = bf::DatasetManifest::load(p.manifest().string());
  auto vocab = bf::EventVocab::load(p.vocab().string());

  bf::nn::OptimizerConfig oc;
  oc.lr = cfg.loc_lr;
  oc.total_steps = 0;

  // Azimuth judge.
  bf::Rng rng(cfg.seed ^ 0x6c6f6300ull);
  bf::LocalizerNet<Scalar> judge(bf::LocalizerConfig{}, rng);
  auto res = bf::train_localizer(judge, manifest, cfg.features.stft, oc,
                                 cfg.loc_epochs,
                                 static_cast<int>(cfg.loc_batch_size), rng);
  bf::nn::save_checkpoint(judge.params(), judge_ckpt_path(p).string());
  bf::write_confusion_csv(res.confusion,
                          (p.reports() / "judge_confusion.csv").string());
  log_line("train_loc", {{"val_acc", res.val_acc},
                         {"val_mae_deg", res.val_mae_deg},
                         {"checkpoint", judge_ckpt_path(p).string()}});

  // Event embedder used for the distribution metrics (FD / KL / IS).
  auto cache =
      bf::cache_features(manifest, cfg.features, p.features().string());
  bf::EventClassifier<Scalar>::Config ec;
  ec.classes = static_cast<int>(vocab.labels.size());
  bf::Rng erng(cfg.seed ^ 0x656d6200ull);
  bf::EventClassifier<Scalar> embedder(ec, erng);
  std::vector<std::vector<Scalar>> planes;
  std::vector<int> labels;
  std::vector<std::vector<Scalar>> val_planes;
  std::vector<int> val_labels;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    auto plane = embedder.pack(bf::read_feature(cache.pairs[i].mel_path));
    const int label = vocab.lookup(manifest.records[i].event);
    if (manifest.records[i].split == "val") {
      val_planes.push_back(std::move(plane));
      val_labels.push_back(label);
    } else {
      planes.push_back(std::move(plane));
      labels.push_back(label);
    }
  }
  bf::train_classifier(
      embedder.params(),
      [&](const bf::nn::Tensor<Scalar>& x) { return embedder.logits(x); },
      planes, labels,
      bf::nn::Shape{1, ec.in_channels, ec.time_frames, ec.freq_bins}, oc,
      cfg.loc_epochs, static_cast<int>(cfg.loc_batch_size), erng);
  int correct = 0;
  for (size_t i = 0; i < val_planes.size(); ++i) {
    auto probs = embedder.class_probs(val_planes[i]);
    int best = 0;
    for (size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = static_cast<int>(k);
    if (best == val_labels[i]) ++correct;
  }
  bf::nn::save_checkpoint(embedder.params(), embedder_ckpt_path(p).string());
  log_line("train_embedder",
           {{"val_acc", val_planes.empty()
                            ? 0.0
                            : static_cast<double>(correct) / val_planes.size()},
            {"checkpoint", embedder_ckpt_path(p).string()}});
  return 0;
}

int cmd_generate(const bf::RunConfig& cfg, const Paths& p, const Cli& cli) {
  auto vocab = bf::EventVocab::load(p.vocab().string());
  const auto v = bf::variant_from_name(cfg.variant);
  auto model = load_ldm(v, ldm_ckpt_path(p, v));
  auto vaes = load_needed_vaes(v, cfg, p);

  json ckpt_hashes;
  ckpt_hashes["ldm"] = file_hash(ldm_ckpt_path(p, v));
  for (bf::VaeKind k : needed_vaes(v))
    ckpt_hashes[std::string(vae_kind_name(k)) + "_vae"] =
        file_hash(vae_ckpt_path(p, k));

  const fs::path out_dir = p.generated() / bf::variant_name(v);
  fs::create_directories(out_dir);
  const int64_t count = cli.prompt.empty() ? cli.n : std::max<int64_t>(cli.n, 1);
  for (int64_t i = 0; i < count; ++i) {
    std::string prompt = cli.prompt;
    if (prompt.empty()) {
      // Deterministic sweep over events x azimuth classes.
      const int event_idx = static_cast<int>(i % vocab.labels.size());
      const int az = static_cast<int>((i / vocab.labels.size()) %
                                      bf::AzimuthGrid::kClasses);
      prompt = bf::render_prompt(vocab.labels[event_idx], az,
                                 bf::DescriptorKind::DOA)
                   .text;
    }
    const uint64_t seed = cfg.seed + static_cast<uint64_t>(i);
    auto res = bf::generate(model, vaes.get(bf::VaeKind::MEL),
                            vaes.get(bf::VaeKind::STFT),
                            vaes.get(bf::VaeKind::DUAL), prompt, vocab,
                            cfg.features.stft,
                            static_cast<int>(cfg.inference_steps),
                            cfg.guidance, seed);
    char name[32];
    std::snprintf(name, sizeof(name), "gen_%04d.wav", static_cast<int>(i));
    const fs::path wav = out_dir / name;
    bf::write_wav(res.clip, wav.string());
    write_json(json{{"prompt", prompt},
                    {"seed", seed},
                    {"variant", bf::variant_name(v)},
                    {"steps", cfg.inference_steps},
                    {"guidance", cfg.guidance},
                    {"event_id", res.cond.event_id},
                    {"azimuth_class", res.cond.azimuth_class},
                    {"kind", static_cast<int>(res.cond.kind)},
                    {"peak_rescale", res.peak_rescale},
                    {"checkpoints", ckpt_hashes}},
               fs::path(wav).replace_extension(".json"));
    log_line("generate", {{"output", wav.string()},
                          {"prompt", prompt},
                          {"seed", seed}});
  }
  return 0;
}

int cmd_evaluate(const bf::RunConfig& cfg, const Paths& p) {
  auto manifest = bf::DatasetManifest::load(p.manifest().string());
  auto vocab = bf::EventVocab::load(p.vocab().string());
  const auto v = bf::variant_from_name(cfg.variant);
  const fs::path gen_dir = p.generated() / bf::variant_name(v);
  bf::check(fs::is_directory(gen_dir),
            "no generated clips for variant " + cfg.variant +
                " (run generate first)");

  bf::EvalInputs<Scalar> in;
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(gen_dir))
    if (e.path().extension() == ".wav") wavs.push_back(e.path());
  std::sort(wavs.begin(), wavs.end());
  bf::check(!wavs.empty(), "generated directory is empty: " + gen_dir.string());
  for (const auto& wav : wavs) {
    const json side = read_json(fs::path(wav).replace_extension(".json"));
    in.clips.push_back(bf::read_wav(wav.string()));
    bf::Conditioning c;
    c.event_id = side.at("event_id").get<int>();
    c.azimuth_class = side.at("azimuth_class").get<int>();
    c.kind = static_cast<bf::DescriptorKind>(side.at("kind").get<int>());
    in.truth.push_back(c);
  }
  for (const auto& rec : manifest.records)
    if (rec.split == "val") in.references.push_back(bf::read_wav(rec.output));

  auto judge = load_judge(judge_ckpt_path(p));
  auto embedder = load_embedder(embedder_ckpt_path(p),
                                static_cast<int>(vocab.labels.size()));
  auto rep = bf::evaluate(in, judge, embedder, cfg.features.stft);
  json out = rep.to_json();
  out["variant"] = bf::variant_name(v);
  const fs::path path =
      p.reports() / (std::string("eval_") + bf::variant_name(v) + ".json");
  write_json(out, path);
  log_line("evaluate", {{"variant", bf::variant_name(v)},
                        {"n", in.clips.size()},
                        {"report", path.string()},
                        {"fd", rep.fd},
                        {"is", rep.is},
                        {"mae_deg", rep.mae_deg},
                        {"acc", rep.acc_frac}});
  return 0;
}

int cmd_report(const Paths& p) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p.reports()))
    if (e.path().extension() == ".json" &&
        e.path().filename().string().rfind("eval_", 0) == 0)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  bf::check(!files.empty(), "no evaluation reports under " +
                                p.reports().string() + " (run evaluate first)");
  const fs::path out = p.reports() / "summary.csv";
  std::ofstream f(out);
  bf::check(static_cast<bool>(f), "cannot write " + out.string());
  f << "variant,n,fd,kl,is,mae_deg,acc\n";
  for (const auto& path : files) {
    const json j = read_json(path);
    f << j.at("variant").get<std::string>() << ","
      << j.at("n_samples").get<int64_t>() << "," << j.at("fd").get<double>()
      << "," << j.at("kl").get<double>() << "," << j.at("is").get<double>()
      << "," << j.at("mae").get<double>() << ","
      << j.at("acc").get<double>() << "\n";
  }
  f.close();
  log_line("report", {{"rows", files.size()}, {"csv", out.string()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binauralforge: text-to-spatial-audio pipeline"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--workspace", cli.workspace, "workspace directory");
  auto* seed_opt = app.add_option("--seed", cli.seed, "base RNG seed");
  app.add_option("--variant", cli.variant,
                 "model variant: mel_base | stft_base | dualspec | dualspec_d");

  auto* synth = app.add_subcommand("synth-data",
                                   "synthesize and spatialize the corpus");
  auto* tvae = app.add_subcommand("train-vae", "train the feature VAEs");
  auto* tldm = app.add_subcommand("train-ldm", "train the latent diffusion model");
  auto* tloc = app.add_subcommand("train-loc",
                                  "train the azimuth judge and event embedder");
  auto* gen = app.add_subcommand("generate", "sample clips from prompts");
  gen->add_option("--prompt", cli.prompt, "prompt text (default: DOA sweep)");
  gen->add_option("--n", cli.n, "number of clips");
  gen->add_option("--steps", cli.steps, "inference steps");
  gen->add_option("--guidance", cli.guidance, "classifier-free guidance weight");
  auto* eval = app.add_subcommand("evaluate", "score generated clips");
  auto* rep = app.add_subcommand("report", "aggregate reports to CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  cli.seed_set = seed_opt->count() > 0;

  try {
    const bf::RunConfig cfg = resolve_config(cli);
    Paths paths{fs::path(cfg.workspace)};
    paths.prepare();
    if (synth->parsed()) return cmd_synth_data(cfg, paths);
    if (tvae->parsed()) return cmd_train_vae(cfg, paths);
    if (tldm->parsed()) return cmd_train_ldm(cfg, paths);
    if (tloc->parsed()) return cmd_train_loc(cfg, paths);
    if (gen->parsed()) return cmd_generate(cfg, paths, cli);
    if (eval->parsed()) return cmd_evaluate(cfg, paths);
    if (rep->parsed()) return cmd_report(paths);
    throw bf::ConfigError("no command");
  } catch (const bf::ConfigError& e) {
    log_line("error", {{"type", "config"}, {"message", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    log_line("error", {{"type", "runtime"}, {"message", e.what()}});
    return 3;
  }
}
