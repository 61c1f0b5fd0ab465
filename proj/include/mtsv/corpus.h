// include/mtsv/corpus.h

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

#ifndef MTSV_CORPUS_H_
#define MTSV_CORPUS_H_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtsv/rng.h"
#include "mtsv/tensor.h"

namespace mtsv {

struct CorpusConfig {
  std::size_t n_train_speakers = 20;
  std::size_t n_eval_speakers = 8;
  std::size_t utterances_per_speaker = 12;
  /// Training utterance length (must equal the encoder input length).
  std::size_t sample_len = 6561;
  /// Held-out utterance length; longer than sample_len so that test-time
  /// crops see different windows.
  std::size_t eval_sample_len = 13122;
  /// Additive white noise level; +inf disables noise.
  double snr_db = 20.0;
  /// Scale of per-utterance formant frequency perturbation, in Hz.
  double jitter_hz = 8.0;
  double sample_rate = 16000.0;
  std::uint64_t seed = 20210901;

  void Validate() const;
};

inline constexpr std::size_t kFormants = 4;
inline constexpr double kMinFormantHz = 50.0;
inline constexpr double kMaxFormantHz = 4000.0;
inline constexpr double kMinFormantSeparationHz = 40.0;

struct SyntheticSpeaker {
  int id = 0;
  bool held_out = false;
  std::array<double, kFormants> formant_freqs{};
  std::array<double, kFormants> formant_amps{};
  std::array<double, kFormants> phases{};
  double base_jitter = 0.0;
};

/// Speakers are numbered 0..N-1: training speakers first, then held-out.
/// Training speaker ids double as classifier targets.
struct Corpus {
  CorpusConfig config;
  std::vector<SyntheticSpeaker> speakers;
  /// waveforms[speaker][utterance], each of shape [T].
  std::vector<std::vector<Tensor>> waveforms;

  std::vector<int> TrainSpeakerIds() const;
  std::vector<int> EvalSpeakerIds() const;
  const Tensor &Waveform(int speaker, std::size_t utterance) const;
};

/// Draws `count` speakers with sorted formants, rejecting any draw that lies
/// within `min_separation_hz` of an earlier speaker in every formant.
/// Throws Error when a speaker cannot be placed in `max_attempts` draws.
std::vector<SyntheticSpeaker> DrawSpeakers(std::size_t count,
                                           std::uint64_t seed,
                                           double jitter_hz,
                                           double min_separation_hz =
                                               kMinFormantSeparationHz,
                                           int max_attempts = 100);

/// Fully determined by the config; utterance (s, u) depends only on
/// (seed, s, u), so `threads` never changes the output bits.
Corpus GenerateCorpus(const CorpusConfig &cfg, std::size_t threads = 1);

/// Single utterance of a speaker at the given length.
Tensor SynthesizeUtterance(const SyntheticSpeaker &spk, const CorpusConfig &cfg,
                           std::size_t utterance, std::size_t length);

/// Writes manifest.json plus one little-endian float64 file per speaker.
void SaveCorpus(const Corpus &corpus, const std::string &dir);
Corpus LoadCorpus(const std::string &dir);

struct NoiseConfig {
  double snr_db_min = 5.0;
  double snr_db_max = 20.0;
  double gain_min = 0.8;
  double gain_max = 1.2;

  void Validate() const;
};

/// White noise at an SNR drawn from the range, a random gain, then clamping
/// to [-1, 1].  An infinite SNR adds no noise.
Tensor Augment(const Tensor &waveform, const NoiseConfig &cfg,
               std::uint64_t seed);

enum class BatchMode {
  kSameNoised,  // m' is a noised copy of m
  kDifferent,   // m and m' hold disjoint utterances of the same speakers
};

std::string ToString(BatchMode mode);
BatchMode ParseBatchMode(const std::string &s);

struct MiniBatchPair {
  Tensor m;        // [S x U/2 x T]
  Tensor m_prime;  // [S x U/2 x T]
  std::vector<int> speaker_ids;
  BatchMode mode = BatchMode::kDifferent;
  /// (speaker, utterance index) of every row, in batch order.
  std::vector<std::pair<int, std::size_t>> m_sources, m_prime_sources;

  std::size_t speakers() const { return speaker_ids.size(); }
  std::size_t per_half() const { return m.dim(1); }
  /// One class label per utterance row, speaker-major.
  std::vector<int> RowLabels() const;
  /// The same batch with m and m' exchanged.
  MiniBatchPair Swapped() const;
};

/// Draws S training speakers and U utterances each, uniformly without
/// replacement, and splits them into halves.
MiniBatchPair SampleMiniBatch(const Corpus &corpus, std::size_t speakers,
                              std::size_t utterances, BatchMode mode,
                              std::uint64_t seed,
                              const NoiseConfig &noise = {});

}  // namespace mtsv

#endif  // MTSV_CORPUS_H_
