// tests/test_data.cc

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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "doctest.h"
#include "mtsv/corpus.h"
#include "mtsv/error.h"
#include "oracles.h"

using namespace mtsv;
namespace fs = std::filesystem;

namespace {

CorpusConfig Small() {
  CorpusConfig c;
  c.n_train_speakers = 6;
  c.n_eval_speakers = 3;
  c.utterances_per_speaker = 6;
  c.sample_len = 729;
  c.eval_sample_len = 1458;
  return c;
}

double Correlation(const Tensor &a, const Tensor &b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

fs::path TempDir(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("mtsv_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("generation is deterministic and thread independent") {
  CorpusConfig c = Small();
  Corpus a = GenerateCorpus(c, 1), b = GenerateCorpus(c, 1), p = GenerateCorpus(c, 4);
  REQUIRE(a.waveforms.size() == 9);
  for (std::size_t s = 0; s < a.waveforms.size(); ++s)
    for (std::size_t u = 0; u < a.waveforms[s].size(); ++u) {
      CHECK(BitwiseEqual(a.waveforms[s][u], b.waveforms[s][u]));
      CHECK(BitwiseEqual(a.waveforms[s][u], p.waveforms[s][u]));
    }
}

TEST_CASE("speaker formants respect range and separation") {
  Corpus c = GenerateCorpus(CorpusConfig{});
  REQUIRE(c.speakers.size() == 28);
  for (const auto &s : c.speakers) {
    for (double f : s.formant_freqs) {
      CHECK(f > kMinFormantHz);
      CHECK(f < kMaxFormantHz);
    }
    for (double a : s.formant_amps) CHECK(a > 0.0);
  }
  for (std::size_t i = 0; i < c.speakers.size(); ++i)
    for (std::size_t j = i + 1; j < c.speakers.size(); ++j) {
      double gap = 0.0;
      for (std::size_t k = 0; k < kFormants; ++k)
        gap = std::max(gap, std::abs(c.speakers[i].formant_freqs[k] -
                                     c.speakers[j].formant_freqs[k]));
      CHECK(gap >= kMinFormantSeparationHz);
    }
}

TEST_CASE("impossible separation fails after bounded attempts") {
  CHECK_THROWS_AS(DrawSpeakers(3, 1, 8.0, 5000.0, 100), Error);
}

TEST_CASE("train and held-out speakers are disjoint with the right lengths") {
  Corpus c = GenerateCorpus(Small());
  auto tr = c.TrainSpeakerIds(), ev = c.EvalSpeakerIds();
  CHECK(tr.size() == 6);
  CHECK(ev.size() == 3);
  std::set<int> all(tr.begin(), tr.end());
  for (int e : ev) CHECK(all.count(e) == 0);
  CHECK(c.Waveform(tr[0], 0).size() == 729);
  CHECK(c.Waveform(ev[0], 0).size() == 1458);
  CHECK(c.Waveform(ev[0], 0).MaxAbs() == doctest::Approx(0.95));
}

TEST_CASE("noiseless jitter-free utterances of a speaker are identical") {
  CorpusConfig c = Small();
  c.snr_db = std::numeric_limits<double>::infinity();
  c.jitter_hz = 0.0;
  Corpus corpus = GenerateCorpus(c);
  CHECK(BitwiseEqual(corpus.Waveform(0, 0), corpus.Waveform(0, 1)));
}

TEST_CASE("default corpus: within-speaker correlation beats cross-speaker") {
  Corpus c = GenerateCorpus(CorpusConfig{});
  double within = 0, cross = 0;
  std::size_t nw = 0, nc = 0;
  const std::size_t n = c.waveforms.size(), u = c.config.utterances_per_speaker;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < u; ++a) {
      for (std::size_t b = a + 1; b < u; ++b) {
        within += Correlation(c.waveforms[s][a], c.waveforms[s][b]);
        ++nw;
      }
      // One cross pair per utterance keeps the test fast.
      std::size_t t = (s + 1 + a) % n;
      if (t == s) t = (t + 1) % n;
      cross += Correlation(c.waveforms[s][a], c.waveforms[t][a]);
      ++nc;
    }
  within /= nw;
  cross /= nc;
  MESSAGE("within " << within << " cross " << cross);
  CHECK(within > cross);
}

TEST_CASE("augment identity, power and independence") {
  std::mt19937_64 rng(7);
  Tensor x = oracle::Random({4000}, rng, -0.3, 0.3);
  NoiseConfig id;
  id.snr_db_min = id.snr_db_max = std::numeric_limits<double>::infinity();
  id.gain_min = id.gain_max = 1.0;
  CHECK(BitwiseEqual(Augment(x, id, 1), x));

  NoiseConfig zero_db;
  zero_db.snr_db_min = zero_db.snr_db_max = 0.0;
  zero_db.gain_min = zero_db.gain_max = 1.0;
  Tensor y = Augment(x, zero_db, 3);
  double ps = 0, pn = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ps += x[i] * x[i];
    pn += (y[i] - x[i]) * (y[i] - x[i]);
  }
  CHECK(std::abs(pn / ps - 1.0) < 0.05);

  NoiseConfig dflt;
  CHECK_FALSE(BitwiseEqual(Augment(x, dflt, 1), Augment(x, dflt, 2)));
  Tensor loud = Augment(Tensor({100}, 0.99), dflt, 4);
  CHECK(loud.MaxAbs() <= 1.0);
}

TEST_CASE("minibatch split contract") {
  Corpus c = GenerateCorpus(Small());
  MiniBatchPair b = SampleMiniBatch(c, 2, 4, BatchMode::kDifferent, 9);
  CHECK(b.m.shape() == Shape{2, 2, 729});
  CHECK(b.m_prime.shape() == Shape{2, 2, 729});
  CHECK(b.speaker_ids.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    std::set<std::size_t> used;
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(used.insert(b.m_sources[s * 2 + j].second).second);
      CHECK(used.insert(b.m_prime_sources[s * 2 + j].second).second);
      CHECK(b.m_sources[s * 2 + j].first == b.speaker_ids[s]);
      CHECK(b.m_prime_sources[s * 2 + j].first == b.speaker_ids[s]);
    }
  }
  MiniBatchPair again = SampleMiniBatch(c, 2, 4, BatchMode::kDifferent, 9);
  CHECK(BitwiseEqual(b.m, again.m));
  CHECK(BitwiseEqual(b.m_prime, again.m_prime));
  CHECK(b.RowLabels() == std::vector<int>{b.speaker_ids[0], b.speaker_ids[0],
                                          b.speaker_ids[1], b.speaker_ids[1]});
}

TEST_CASE("same-batch mode pairs each utterance with a noised copy") {
  Corpus c = GenerateCorpus(Small());
  MiniBatchPair b = SampleMiniBatch(c, 3, 4, BatchMode::kSameNoised, 11);
  CHECK(b.m_sources == b.m_prime_sources);
  CHECK_FALSE(BitwiseEqual(b.m, b.m_prime));
  // Rows of m are raw corpus utterances.
  auto [spk, utt] = b.m_sources[0];
  const Tensor &w = c.Waveform(spk, utt);
  for (std::size_t t = 0; t < 729; ++t) CHECK(b.m[t] == w[t]);
}

TEST_CASE("minibatch preconditions") {
  Corpus c = GenerateCorpus(Small());
  CHECK_THROWS_AS(SampleMiniBatch(c, 2, 3, BatchMode::kDifferent, 1), ContractError);
  CHECK_THROWS_AS(SampleMiniBatch(c, 7, 2, BatchMode::kDifferent, 1), ContractError);
  CHECK_THROWS_AS(SampleMiniBatch(c, 2, 8, BatchMode::kDifferent, 1), ContractError);
  // Same-batch mode needs only U/2 utterances per speaker.
  CHECK_NOTHROW(SampleMiniBatch(c, 2, 8, BatchMode::kSameNoised, 1));
  CHECK_THROWS_AS(SampleMiniBatch(c, 2, 14, BatchMode::kSameNoised, 1), ContractError);
}

TEST_CASE("full-scale batch geometry") {
  // 480 speakers x 4 utterances per speaker.
  const std::size_t speakers = 480, utterances = 4;
  CHECK(speakers * utterances == 1920);
}

TEST_CASE("sampling covers every training speaker and never a held-out one") {
  Corpus c = GenerateCorpus(Small());
  std::set<int> seen;
  auto eval = c.EvalSpeakerIds();
  for (std::uint64_t d = 0; d < 60; ++d) {
    MiniBatchPair b = SampleMiniBatch(c, 2, 2, BatchMode::kDifferent, d);
    for (int s : b.speaker_ids) {
      seen.insert(s);
      CHECK(std::find(eval.begin(), eval.end(), s) == eval.end());
    }
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("corpus round-trips through disk") {
  Corpus c = GenerateCorpus(Small());
  fs::path dir = TempDir("corpus");
  SaveCorpus(c, dir.string());
  Corpus d = LoadCorpus(dir.string());
  REQUIRE(d.speakers.size() == c.speakers.size());
  for (std::size_t s = 0; s < c.waveforms.size(); ++s)
    for (std::size_t u = 0; u < c.waveforms[s].size(); ++u)
      CHECK(BitwiseEqual(c.waveforms[s][u], d.waveforms[s][u]));
  CHECK(d.config.seed == c.config.seed);
  CHECK(d.speakers[7].held_out);

  std::ifstream m1(dir / "manifest.json");
  std::string first((std::istreambuf_iterator<char>(m1)), {});
  SaveCorpus(GenerateCorpus(Small()), dir.string());
  std::ifstream m2(dir / "manifest.json");
  std::string second((std::istreambuf_iterator<char>(m2)), {});
  CHECK(first == second);

  fs::resize_file(dir / "spk0000.f64", 100);
  CHECK_THROWS_AS(LoadCorpus(dir.string()), FormatError);
  CHECK_THROWS_AS(LoadCorpus((dir / "nope").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("infinite snr survives the manifest") {
  CorpusConfig cfg = Small();
  cfg.snr_db = std::numeric_limits<double>::infinity();
  fs::path dir = TempDir("corpus_inf");
  SaveCorpus(GenerateCorpus(cfg), dir.string());
  CHECK(std::isinf(LoadCorpus(dir.string()).config.snr_db));
  fs::remove_all(dir);
}
