// src/corpus.cc

// Copyright 2026  The mtsv Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "mtsv/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mtsv/error.h"
#include "mtsv/runtime.h"

namespace mtsv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPeak = 0.95;

double MeanPower(const double *x, std::size_t n) {
  double p = 0.0;
  for (std::size_t i = 0; i < n; ++i) p += x[i] * x[i];
  return p / static_cast<double>(n);
}

// JSON has no infinity; store it as a string so noiseless configs survive.
json RealToJson(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double RealFromJson(const json &j) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("corpus manifest: bad real '" + s + "'");
  }
  return j.get<double>();
}

std::string SpeakerFile(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%04d.f64", id);
  return buf;
}

void WriteLe(std::ofstream &out, const double *x, std::size_t n) {
  static_assert(sizeof(double) == 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &x[i], 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char *>(b), 8);
  }
}

void ReadLe(std::ifstream &in, double *x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    in.read(reinterpret_cast<char *>(b), 8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    std::memcpy(&x[i], &bits, 8);
  }
}

}  // namespace

void CorpusConfig::Validate() const {
  if (n_train_speakers < 1) throw ContractError("corpus: n_train_speakers < 1");
  if (utterances_per_speaker < 1)
    throw ContractError("corpus: utterances_per_speaker < 1");
  if (sample_len < 2) throw ContractError("corpus: sample_len < 2");
  if (eval_sample_len < 2) throw ContractError("corpus: eval_sample_len < 2");
  if (std::isnan(snr_db)) throw ContractError("corpus: snr_db is NaN");
  if (!(jitter_hz >= 0.0) || !std::isfinite(jitter_hz))
    throw ContractError("corpus: jitter_hz must be finite and >= 0");
  if (!(sample_rate > 0.0)) throw ContractError("corpus: sample_rate <= 0");
}

void NoiseConfig::Validate() const {
  if (std::isnan(snr_db_min) || std::isnan(snr_db_max) ||
      snr_db_min > snr_db_max)
    throw ContractError("noise: need snr_db_min <= snr_db_max");
  if (!(gain_min > 0.0) || gain_min > gain_max || !std::isfinite(gain_max))
    throw ContractError("noise: need 0 < gain_min <= gain_max");
}

std::vector<int> Corpus::TrainSpeakerIds() const {
  std::vector<int> ids;
  for (const auto &s : speakers)
    if (!s.held_out) ids.push_back(s.id);
  return ids;
}

std::vector<int> Corpus::EvalSpeakerIds() const {
  std::vector<int> ids;
  for (const auto &s : speakers)
    if (s.held_out) ids.push_back(s.id);
  return ids;
}

const Tensor &Corpus::Waveform(int speaker, std::size_t utterance) const {
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= waveforms.size() ||
      utterance >= waveforms[speaker].size())
    throw ContractError("corpus: no utterance " + std::to_string(utterance) +
                        " for speaker " + std::to_string(speaker));
  return waveforms[speaker][utterance];
}

std::vector<SyntheticSpeaker> DrawSpeakers(std::size_t count,
                                           std::uint64_t seed,
                                           double jitter_hz,
                                           double min_separation_hz,
                                           int max_attempts) {
  std::mt19937_64 rng(MixSeed(seed, 0x5be4a6e7ULL));
  std::uniform_real_distribution<double> freq(kMinFormantHz, kMaxFormantHz);
  std::uniform_real_distribution<double> amp(0.3, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jit(0.5, 1.5);

  std::vector<SyntheticSpeaker> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSpeaker spk;
    spk.id = static_cast<int>(i);
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      for (auto &f : spk.formant_freqs) {
        do {
          f = freq(rng);
        } while (f <= kMinFormantHz);  // open interval
      }
      std::sort(spk.formant_freqs.begin(), spk.formant_freqs.end());
      placed = true;
      for (const auto &other : out) {
        double gap = 0.0;
        for (std::size_t k = 0; k < kFormants; ++k)
          gap = std::max(gap, std::abs(spk.formant_freqs[k] -
                                       other.formant_freqs[k]));
        if (gap < min_separation_hz) {
          placed = false;
          break;
        }
      }
    }
    if (!placed)
      throw Error("corpus: could not place speaker " + std::to_string(i) +
                  " at least " + std::to_string(min_separation_hz) +
                  " Hz from the others after " + std::to_string(max_attempts) +
                  " attempts");
    for (auto &a : spk.formant_amps) a = amp(rng);
    for (auto &p : spk.phases) p = phase(rng);
    spk.base_jitter = jitter_hz * jit(rng);
    out.push_back(spk);
  }
  return out;
}

Tensor SynthesizeUtterance(const SyntheticSpeaker &spk,
                           const CorpusConfig &cfg, std::size_t utterance,
                           std::size_t length) {
  std::mt19937_64 rng(
      MixSeed(cfg.seed, static_cast<std::uint64_t>(spk.id), utterance));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::array<double, kFormants> freq;
  for (std::size_t k = 0; k < kFormants; ++k)
    freq[k] = spk.formant_freqs[k] + spk.base_jitter * gauss(rng);

  Tensor w({length});
  double *x = w.ptr();
  const double omega = 2.0 * std::numbers::pi / cfg.sample_rate;
  for (std::size_t t = 0; t < length; ++t) {
    double v = 0.0;
    for (std::size_t k = 0; k < kFormants; ++k)
      v += spk.formant_amps[k] *
           std::sin(omega * freq[k] * static_cast<double>(t) + spk.phases[k]);
    x[t] = v;
  }
  if (std::isfinite(cfg.snr_db)) {
    double sigma =
        std::sqrt(MeanPower(x, length) / std::pow(10.0, cfg.snr_db / 10.0));
    for (std::size_t t = 0; t < length; ++t) x[t] += sigma * gauss(rng);
  }
  double peak = 0.0;
  for (std::size_t t = 0; t < length; ++t) peak = std::max(peak, std::abs(x[t]));
  if (peak > 0.0) {
    double s = kPeak / peak;
    for (std::size_t t = 0; t < length; ++t) x[t] *= s;
  }
  return w;
}

Corpus GenerateCorpus(const CorpusConfig &cfg, std::size_t threads) {
  cfg.Validate();
  Corpus c;
  c.config = cfg;
  std::size_t total = cfg.n_train_speakers + cfg.n_eval_speakers;
  c.speakers = DrawSpeakers(total, cfg.seed, cfg.jitter_hz);
  for (auto &s : c.speakers)
    s.held_out = static_cast<std::size_t>(s.id) >= cfg.n_train_speakers;

  const std::size_t utts = cfg.utterances_per_speaker;
  c.waveforms.assign(total, std::vector<Tensor>(utts));
  ParallelFor(total * utts, threads, [&](std::size_t job) {
    std::size_t s = job / utts, u = job % utts;
    const auto &spk = c.speakers[s];
    std::size_t len = spk.held_out ? cfg.eval_sample_len : cfg.sample_len;
    c.waveforms[s][u] = SynthesizeUtterance(spk, cfg, u, len);
  });
  return c;
}

void SaveCorpus(const Corpus &corpus, const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("corpus: cannot create '" + dir + "': " + ec.message());

  const auto &cfg = corpus.config;
  json m;
  m["format"] = "mtsv-corpus";
  m["version"] = 1;
  m["config"] = {{"n_train_speakers", cfg.n_train_speakers},
                 {"n_eval_speakers", cfg.n_eval_speakers},
                 {"utterances_per_speaker", cfg.utterances_per_speaker},
                 {"sample_len", cfg.sample_len},
                 {"eval_sample_len", cfg.eval_sample_len},
                 {"snr_db", RealToJson(cfg.snr_db)},
                 {"jitter_hz", cfg.jitter_hz},
                 {"sample_rate", cfg.sample_rate},
                 {"seed", cfg.seed}};
  json spks = json::array();
  for (const auto &s : corpus.speakers) {
    const auto &utts = corpus.waveforms.at(s.id);
    std::size_t len = utts.empty() ? 0 : utts.front().size();
    spks.push_back({{"id", s.id},
                    {"held_out", s.held_out},
                    {"formant_freqs", s.formant_freqs},
                    {"formant_amps", s.formant_amps},
                    {"phases", s.phases},
                    {"base_jitter", s.base_jitter},
                    {"utterances", utts.size()},
                    {"length", len},
                    {"file", SpeakerFile(s.id)}});
    std::ofstream out(fs::path(dir) / SpeakerFile(s.id), std::ios::binary);
    if (!out) throw IoError("corpus: cannot write " + SpeakerFile(s.id));
    for (const auto &w : utts) {
      if (w.size() != len)
        throw ContractError("corpus: ragged utterances for speaker " +
                            std::to_string(s.id));
      WriteLe(out, w.ptr(), w.size());
    }
    if (!out) throw IoError("corpus: write failed for " + SpeakerFile(s.id));
  }
  m["speakers"] = spks;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("corpus: cannot write manifest in '" + dir + "'");
  out << m.dump(2) << "\n";
  if (!out) throw IoError("corpus: manifest write failed");
}

Corpus LoadCorpus(const std::string &dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("corpus: no manifest.json in '" + dir + "'");
  json m;
  try {
    in >> m;
  } catch (const json::exception &e) {
    throw FormatError(std::string("corpus manifest: ") + e.what());
  }
  Corpus c;
  try {
    if (m.at("format") != "mtsv-corpus" || m.at("version") != 1)
      throw FormatError("corpus manifest: unsupported format");
    const json &jc = m.at("config");
    auto &cfg = c.config;
    cfg.n_train_speakers = jc.at("n_train_speakers");
    cfg.n_eval_speakers = jc.at("n_eval_speakers");
    cfg.utterances_per_speaker = jc.at("utterances_per_speaker");
    cfg.sample_len = jc.at("sample_len");
    cfg.eval_sample_len = jc.at("eval_sample_len");
    cfg.snr_db = RealFromJson(jc.at("snr_db"));
    cfg.jitter_hz = jc.at("jitter_hz");
    cfg.sample_rate = jc.at("sample_rate");
    cfg.seed = jc.at("seed");
    cfg.Validate();

    for (const auto &js : m.at("speakers")) {
      SyntheticSpeaker s;
      s.id = js.at("id");
      s.held_out = js.at("held_out");
      s.formant_freqs = js.at("formant_freqs");
      s.formant_amps = js.at("formant_amps");
      s.phases = js.at("phases");
      s.base_jitter = js.at("base_jitter");
      if (s.id != static_cast<int>(c.speakers.size()))
        throw FormatError("corpus manifest: speaker ids must be 0..N-1");
      c.speakers.push_back(s);

      std::size_t n = js.at("utterances"), len = js.at("length");
      fs::path file = fs::path(dir) / js.at("file").get<std::string>();
      std::error_code ec;
      auto bytes = fs::file_size(file, ec);
      if (ec) throw IoError("corpus: cannot stat " + file.string());
      if (len == 0 || bytes != n * len * 8)
        throw FormatError("corpus: " + file.string() + " has " +
                          std::to_string(bytes) + " bytes, expected " +
                          std::to_string(n * len * 8));
      std::ifstream bin(file, std::ios::binary);
      std::vector<Tensor> utts;
      for (std::size_t u = 0; u < n; ++u) {
        Tensor w({len});
        ReadLe(bin, w.ptr(), len);
        if (!bin) throw IoError("corpus: short read in " + file.string());
        if (!w.AllFinite())
          throw FormatError("corpus: non-finite sample in " + file.string());
        utts.push_back(std::move(w));
      }
      c.waveforms.push_back(std::move(utts));
    }
  } catch (const json::exception &e) {
    throw FormatError(std::string("corpus manifest: ") + e.what());
  }
  return c;
}

Tensor Augment(const Tensor &waveform, const NoiseConfig &cfg,
               std::uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  double snr = cfg.snr_db_min;
  if (cfg.snr_db_max > cfg.snr_db_min && std::isfinite(cfg.snr_db_max))
    snr = std::uniform_real_distribution<double>(cfg.snr_db_min,
                                                 cfg.snr_db_max)(rng);
  double gain = cfg.gain_min;
  if (cfg.gain_max > cfg.gain_min)
    gain = std::uniform_real_distribution<double>(cfg.gain_min,
                                                  cfg.gain_max)(rng);
  Tensor out = waveform;
  double *x = out.ptr();
  const std::size_t n = out.size();
  if (std::isfinite(snr)) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double sigma = std::sqrt(MeanPower(x, n) / std::pow(10.0, snr / 10.0));
    for (std::size_t i = 0; i < n; ++i) x[i] += sigma * gauss(rng);
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(gain * x[i], -1.0, 1.0);
  return out;
}

std::string ToString(BatchMode mode) {
  return mode == BatchMode::kSameNoised ? "S" : "D";
}

BatchMode ParseBatchMode(const std::string &s) {
  if (s == "S" || s == "s" || s == "same" || s == "same_noised")
    return BatchMode::kSameNoised;
  if (s == "D" || s == "d" || s == "different") return BatchMode::kDifferent;
  throw ContractError("unknown batch mode '" + s + "' (expected S or D)");
}

std::vector<int> MiniBatchPair::RowLabels() const {
  std::vector<int> labels;
  for (int id : speaker_ids)
    for (std::size_t j = 0; j < per_half(); ++j) labels.push_back(id);
  return labels;
}

MiniBatchPair MiniBatchPair::Swapped() const {
  MiniBatchPair b = *this;
  std::swap(b.m, b.m_prime);
  std::swap(b.m_sources, b.m_prime_sources);
  return b;
}

MiniBatchPair SampleMiniBatch(const Corpus &corpus, std::size_t speakers,
                              std::size_t utterances, BatchMode mode,
                              std::uint64_t seed, const NoiseConfig &noise) {
  if (utterances < 2 || utterances % 2 != 0)
    throw ContractError("minibatch: utterances per speaker must be even and "
                        ">= 2, got " + std::to_string(utterances));
  if (speakers < 1) throw ContractError("minibatch: speakers must be >= 1");
  std::vector<int> pool = corpus.TrainSpeakerIds();
  if (pool.size() < speakers)
    throw ContractError("minibatch: need " + std::to_string(speakers) +
                        " training speakers, corpus has " +
                        std::to_string(pool.size()));
  const std::size_t half = utterances / 2;
  const std::size_t need = mode == BatchMode::kDifferent ? utterances : half;
  const std::size_t T = corpus.config.sample_len;

  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(speakers);

  MiniBatchPair b;
  b.mode = mode;
  b.speaker_ids = pool;
  b.m = Tensor({speakers, half, T});
  b.m_prime = Tensor({speakers, half, T});
  for (std::size_t s = 0; s < speakers; ++s) {
    int id = pool[s];
    const auto &utts = corpus.waveforms.at(id);
    if (utts.size() < need)
      throw ContractError("minibatch: speaker " + std::to_string(id) +
                          " has " + std::to_string(utts.size()) +
                          " utterances, need " + std::to_string(need));
    std::vector<std::size_t> idx(utts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < half; ++j) {
      std::size_t row = s * half + j;
      const Tensor &a = utts[idx[j]];
      if (a.size() != T)
        throw ShapeError("minibatch: utterance length " +
                         std::to_string(a.size()) + " != sample_len " +
                         std::to_string(T));
      std::copy_n(a.ptr(), T, b.m.ptr() + row * T);
      b.m_sources.emplace_back(id, idx[j]);
      if (mode == BatchMode::kDifferent) {
        const Tensor &p = utts[idx[half + j]];
        std::copy_n(p.ptr(), T, b.m_prime.ptr() + row * T);
        b.m_prime_sources.emplace_back(id, idx[half + j]);
      } else {
        Tensor p = Augment(a, noise, MixSeed(seed, 0xa06ULL, row));
        std::copy_n(p.ptr(), T, b.m_prime.ptr() + row * T);
        b.m_prime_sources.emplace_back(id, idx[j]);
      }
    }
  }
  return b;
}

}  // namespace mtsv
