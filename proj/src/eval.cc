// src/eval.cc

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

#include "mtsv/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mtsv/error.h"
#include "mtsv/runtime.h"

namespace mtsv {

std::vector<std::size_t> CropOffsets(std::size_t total, std::size_t n,
                                     std::size_t crop_len) {
  if (n < 1) throw ContractError("crops: n must be >= 1");
  if (crop_len < 1) throw ContractError("crops: crop_len must be >= 1");
  if (total < crop_len)
    throw ContractError("crops: waveform has " + std::to_string(total) +
                        " samples, shorter than crop_len " +
                        std::to_string(crop_len));
  const std::size_t slack = total - crop_len;
  std::vector<std::size_t> off(n);
  if (n == 1) {
    off[0] = slack / 2;
    return off;
  }
  // round(k * slack / (n - 1)) in integer arithmetic, halves rounded up.
  const std::size_t den = n - 1;
  for (std::size_t k = 0; k < n; ++k)
    off[k] = (2 * k * slack + den) / (2 * den);
  return off;
}

Tensor Crops(const Tensor &waveform, std::size_t n, std::size_t crop_len) {
  if (waveform.rank() != 1)
    throw ShapeError("crops: expected a 1-D waveform, got " +
                     ShapeToString(waveform.shape()));
  auto off = CropOffsets(waveform.size(), n, crop_len);
  Tensor out({n, crop_len});
  for (std::size_t k = 0; k < n; ++k)
    std::copy_n(waveform.ptr() + off[k], crop_len, out.ptr() + k * crop_len);
  return out;
}

double ScoreTrial(const Tensor &a, const Tensor &b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ShapeError("score_trial: need [n x D] and [m x D], got " +
                     ShapeToString(a.shape()) + " and " +
                     ShapeToString(b.shape()));
  const std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
  auto unit = [d](const Tensor &t, std::size_t rows) {
    std::vector<double> u(t.values());
    for (std::size_t r = 0; r < rows; ++r) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) n2 += u[r * d + k] * u[r * d + k];
      if (!(n2 > 0.0)) throw ContractError("score_trial: zero-norm embedding");
      double inv = 1.0 / std::sqrt(n2);
      for (std::size_t k = 0; k < d; ++k) u[r * d + k] *= inv;
    }
    return u;
  };
  auto ua = unit(a, na), ub = unit(b, nb);
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += ua[i * d + k] * ub[j * d + k];
      total += dot;
    }
  return total / static_cast<double>(na * nb);
}

EerResult ComputeEer(const std::vector<double> &scores,
                     const std::vector<bool> &targets) {
  if (scores.size() != targets.size())
    throw ContractError("eer: scores and targets differ in length");
  std::size_t nt = 0;
  for (bool t : targets) nt += t;
  const std::size_t nn = targets.size() - nt;
  if (nt == 0 || nn == 0)
    throw ContractError("eer: need both target and non-target trials");
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("eer: non-finite score");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Threshold index i sits just above the i-th distinct score group, so
  // everything in groups < i is rejected.  Track miss/false-alarm counts.
  struct Point {
    double theta;
    std::size_t misses, false_alarms;
  };
  std::vector<Point> pts;
  const double lo = scores[order.front()], hi = scores[order.back()];
  pts.push_back({lo - 1.0, 0, nn});
  std::size_t misses = 0, fa = nn;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double v = scores[order[i]];
    while (j < order.size() && scores[order[j]] == v) {
      if (targets[order[j]])
        ++misses;
      else
        --fa;
      ++j;
    }
    double theta = j < order.size() ? 0.5 * (v + scores[order[j]]) : hi + 1.0;
    pts.push_back({theta, misses, fa});
    i = j;
  }

  // d = FRR - FAR rises from -1 to +1; find the first point with d >= 0.
  auto frr = [&](const Point &p) { return double(p.misses) / double(nt); };
  auto far = [&](const Point &p) { return double(p.false_alarms) / double(nn); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = frr(pts[i]) - far(pts[i]);
    if (d < 0.0) continue;
    if (d == 0.0 || i == 0) return {frr(pts[i]), pts[i].theta};
    const Point &p = pts[i - 1], &q = pts[i];
    double dp = frr(p) - far(p);
    double f = -dp / (d - dp);
    return {frr(p) + f * (frr(q) - frr(p)),
            p.theta + f * (q.theta - p.theta)};
  }
  throw NumericError("eer: no FAR/FRR crossing found");
}

std::string UtteranceId(int speaker, std::size_t utterance) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%04d-utt%03zu", speaker, utterance);
  return buf;
}

std::pair<int, std::size_t> ParseUtteranceId(const std::string &id) {
  int spk = -1;
  std::size_t utt = 0;
  int consumed = 0;
  if (std::sscanf(id.c_str(), "spk%d-utt%zu%n", &spk, &utt, &consumed) != 2 ||
      consumed != static_cast<int>(id.size()) || spk < 0)
    throw FormatError("bad utterance id '" + id + "'");
  return {spk, utt};
}

std::size_t TrialList::CountTargets() const {
  std::size_t n = 0;
  for (const auto &t : trials) n += t.target;
  return n;
}

void TrialList::Validate() const {
  std::size_t nt = CountTargets();
  if (nt == 0 || nt == trials.size())
    throw ContractError("trial list needs both target and non-target trials");
  for (const auto &t : trials) {
    if (t.utt_a == t.utt_b)
      throw ContractError("trial pairs " + t.utt_a + " with itself");
    auto a = ParseUtteranceId(t.utt_a), b = ParseUtteranceId(t.utt_b);
    if ((a.first == b.first) != t.target)
      throw ContractError("trial " + t.utt_a + " " + t.utt_b +
                          " has a label inconsistent with its speakers");
  }
}

TrialList BuildTrialList(const Corpus &corpus, std::uint64_t seed) {
  std::vector<int> ids = corpus.EvalSpeakerIds();
  if (ids.size() < 2)
    throw ContractError("trial list: need at least two held-out speakers");
  std::vector<std::pair<int, std::size_t>> utts;
  for (int s : ids)
    for (std::size_t u = 0; u < corpus.waveforms.at(s).size(); ++u)
      utts.emplace_back(s, u);

  TrialList list;
  std::vector<std::pair<std::size_t, std::size_t>> cross;
  for (std::size_t i = 0; i < utts.size(); ++i)
    for (std::size_t j = i + 1; j < utts.size(); ++j) {
      if (utts[i].first == utts[j].first)
        list.trials.push_back({UtteranceId(utts[i].first, utts[i].second),
                               UtteranceId(utts[j].first, utts[j].second),
                               true});
      else
        cross.emplace_back(i, j);
    }
  std::size_t n_targets = list.trials.size();
  if (n_targets == 0)
    throw ContractError("trial list: held-out speakers need >= 2 utterances");
  std::mt19937_64 rng(seed);
  std::shuffle(cross.begin(), cross.end(), rng);
  cross.resize(std::min(cross.size(), n_targets));
  std::sort(cross.begin(), cross.end());
  for (auto [i, j] : cross)
    list.trials.push_back({UtteranceId(utts[i].first, utts[i].second),
                           UtteranceId(utts[j].first, utts[j].second), false});
  list.Validate();
  return list;
}

void WriteTrialList(const TrialList &list, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trial list '" + path + "'");
  for (const auto &t : list.trials)
    out << t.utt_a << ' ' << t.utt_b << ' ' << (t.target ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

TrialList ReadTrialList(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trial list '" + path + "'");
  TrialList list;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Trial t;
    int label = -1;
    if (!(ss >> t.utt_a >> t.utt_b >> label) || (label != 0 && label != 1))
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected '<utt_a> <utt_b> <0|1>'");
    t.target = label == 1;
    list.trials.push_back(std::move(t));
  }
  list.Validate();
  return list;
}

void WriteScores(const TrialList &list, const std::vector<double> &scores,
                 const std::string &path) {
  if (scores.size() != list.size())
    throw ContractError("score count does not match trial count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores '" + path + "'");
  char buf[64];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto &t = list.trials[i];
    std::snprintf(buf, sizeof(buf), "%.17g", scores[i]);
    out << t.utt_a << ' ' << t.utt_b << ' ' << (t.target ? 1 : 0) << ' '
        << buf << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

void EvalConfig::Validate() const {
  if (n_crops < 1) throw ContractError("eval: n_crops must be >= 1");
  if (chunk < 1) throw ContractError("eval: chunk must be >= 1");
}

EvalResult EvaluateModel(const EmbeddingFn &embed, const Corpus &corpus,
                         const TrialList &trials, const EvalConfig &cfg) {
  cfg.Validate();
  trials.Validate();
  const std::size_t crop_len =
      cfg.crop_len ? cfg.crop_len : corpus.config.sample_len;

  // Unique utterances in first-appearance order.
  std::map<std::string, std::size_t> slot;
  std::vector<std::string> order;
  for (const auto &t : trials.trials)
    for (const auto *id : {&t.utt_a, &t.utt_b})
      if (slot.emplace(*id, order.size()).second) order.push_back(*id);

  const std::size_t n = cfg.n_crops, rows = order.size() * n;
  std::vector<Tensor> crops;
  crops.reserve(order.size());
  for (const auto &id : order) {
    auto [spk, utt] = ParseUtteranceId(id);
    crops.push_back(Crops(corpus.Waveform(spk, utt), n, crop_len));
  }

  const std::size_t chunks = (rows + cfg.chunk - 1) / cfg.chunk;
  std::vector<Tensor> parts(chunks);
  ParallelFor(chunks, cfg.threads, [&](std::size_t c) {
    std::size_t begin = c * cfg.chunk, end = std::min(rows, begin + cfg.chunk);
    Tensor batch({end - begin, crop_len});
    for (std::size_t r = begin; r < end; ++r)
      std::copy_n(crops[r / n].ptr() + (r % n) * crop_len, crop_len,
                  batch.ptr() + (r - begin) * crop_len);
    parts[c] = embed(batch);
    if (parts[c].rank() != 2 || parts[c].dim(0) != end - begin)
      throw ShapeError("eval: embedding function returned " +
                       ShapeToString(parts[c].shape()));
  });
  const std::size_t d = parts.front().dim(1);
  std::vector<double> all;
  all.reserve(rows * d);
  for (const auto &p : parts) {
    if (p.dim(1) != d) throw ShapeError("eval: inconsistent embedding width");
    all.insert(all.end(), p.data().begin(), p.data().end());
  }

  auto utt_emb = [&](const std::string &id) {
    std::size_t s = slot.at(id);
    return Tensor({n, d}, std::vector<double>(all.begin() + s * n * d,
                                              all.begin() + (s + 1) * n * d));
  };
  EvalResult res;
  res.scores.resize(trials.size());
  std::vector<bool> labels(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto &t = trials.trials[i];
    res.scores[i] = ScoreTrial(utt_emb(t.utt_a), utt_emb(t.utt_b));
    labels[i] = t.target;
  }
  res.eer = ComputeEer(res.scores, labels);
  return res;
}

EvalResult EvaluateModel(const ParamSet &params, const ModelConfig &model,
                         EmbeddingPath path, const Corpus &corpus,
                         const TrialList &trials, const EvalConfig &cfg) {
  EvalConfig c = cfg;
  if (c.crop_len == 0) c.crop_len = model.input_samples;
  return EvaluateModel(
      [&](const Tensor &w) { return Embed(params, model, w, path); }, corpus,
      trials, c);
}

}  // namespace mtsv
