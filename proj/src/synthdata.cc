#include "ftm/synthdata.h"

#include <cmath>
#include <random>

#include "ftm/errors.h"

namespace ftm {

std::string to_string(Invocation inv) { return inv == Invocation::kVt ? "vt" : "tb"; }
std::string to_string(Split split) { return split == Split::kTrain ? "train" : "eval"; }

Invocation parse_invocation(const std::string& s) {
  if (s == "vt" || s == "VT") return Invocation::kVt;
  if (s == "tb" || s == "TB") return Invocation::kTb;
  throw DataError("unknown invocation '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "eval") return Split::kEval;
  throw DataError("unknown split '" + s + "'");
}

FeatureSequence Utterance::features() const {
  return stack_and_subsample(raw, kDefaultContext, kDefaultSubsample);
}

void CorpusSpec::validate() const {
  auto non_negative = [](int v, const std::string& name) {
    if (v < 0) throw ConfigError("corpus." + name + " must be >= 0");
  };
  for (auto [cell, prefix] : {std::pair{train, "train"}, std::pair{eval, "eval"}}) {
    const std::string p = prefix;
    non_negative(cell.vt_directed, p + "_vt_directed");
    non_negative(cell.vt_undirected, p + "_vt_undirected");
    non_negative(cell.tb_directed, p + "_tb_directed");
    non_negative(cell.tb_undirected, p + "_tb_undirected");
  }
  if (train.total() + eval.total() == 0) throw ConfigError("corpus: total utterance count is zero");
  if (!(vt_mean_s > 0) || !(tb_mean_s > 0)) throw ConfigError("corpus.*_mean_s must be positive");
  if (vt_std_s < 0 || tb_std_s < 0) throw ConfigError("corpus.*_std_s must be >= 0");
  if (!(min_s > 0) || !(max_s >= min_s)) throw ConfigError("corpus.min_s/max_s: need 0 < min_s <= max_s");
  if (base_dim < 1) throw ConfigError("corpus.base_dim must be positive");
  if (n_command < 2) throw ConfigError("corpus.n_command must be at least 2");
  if (n_distractor < 1 || n_distractor > n_command)
    throw ConfigError("corpus.n_distractor must be in [1, n_command]");
  if (min_phone_frames < 1 || max_phone_frames < min_phone_frames)
    throw ConfigError("corpus.min_phone_frames/max_phone_frames out of order");
  if (!(noise_std >= 0) || !(channel_std >= 0) || !(mean_scale > 0) || !(distractor_shift >= 0))
    throw ConfigError("corpus: noise_std, channel_std, distractor_shift must be >= 0 and mean_scale > 0");
  if (!(distractor_rate >= 0 && distractor_rate <= 1))
    throw ConfigError("corpus.distractor_rate must be in [0, 1]");
  if (!(confusable_rate >= 0 && confusable_rate <= 1))
    throw ConfigError("corpus.confusable_rate must be in [0, 1]");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kMeansStream = 0x6d65616e73ULL;

struct Inventory {
  int command0, background0, chatter0;  // first id of each group
};

Inventory inventory(const CorpusSpec& s) {
  return {kKeywordPhones + 1, kKeywordPhones + 1 + s.n_command,
          kKeywordPhones + 1 + s.n_command + s.n_distractor};
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

Tensor<float> phone_means(const CorpusSpec& spec) {
  std::mt19937_64 rng(mix_seed(spec.seed, kMeansStream, 0));
  std::normal_distribution<double> n01(0.0, 1.0);
  const int dim = spec.base_dim, alphabet = spec.phone_alphabet();
  const Inventory inv = inventory(spec);
  Tensor<float> means(alphabet, dim);
  auto draw = [&](int id) {
    for (int c = 0; c < dim; ++c) means.at(id - 1, c) = static_cast<float>(spec.mean_scale * n01(rng));
  };
  for (int id = 1; id < inv.background0; ++id) draw(id);
  // Distractors sit at a fixed distance from their command phone along a
  // random unit direction.
  for (int group : {inv.background0, inv.chatter0}) {
    for (int j = 0; j < spec.n_distractor; ++j) {
      std::vector<double> dir(dim);
      double norm = 0;
      for (double& v : dir) {
        v = n01(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      const double len = spec.distractor_shift * spec.mean_scale * std::sqrt(static_cast<double>(dim));
      for (int c = 0; c < dim; ++c)
        means.at(group + j - 1, c) =
            means.at(inv.command0 + j - 1, c) + static_cast<float>(len * dir[c] / norm);
    }
  }
  return means;
}

namespace {

struct CellPlan {
  Invocation inv;
  bool directed;
  int count;
};

Utterance make_utterance(const CorpusSpec& spec, const Tensor<float>& means, const CellPlan& cell,
                         Split split, int index, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> phone_len(spec.min_phone_frames, spec.max_phone_frames);
  const Inventory inv = inventory(spec);
  std::uniform_int_distribution<int> command(inv.command0, inv.command0 + spec.n_command - 1);
  std::uniform_int_distribution<int> distractor(0, spec.n_distractor - 1);

  const bool vt = cell.inv == Invocation::kVt;
  const double mean_s = vt ? spec.vt_mean_s : spec.tb_mean_s;
  const double std_s = vt ? spec.vt_std_s : spec.tb_std_s;
  double secs;
  do {
    secs = mean_s + std_s * n01(rng);
  } while (secs < spec.min_s || secs > spec.max_s);
  const int target = static_cast<int>(std::lround(secs * 100.0));

  Utterance u;
  u.invocation = cell.inv;
  u.directed = cell.directed;
  u.split = split;
  u.id = to_string(split) + "-" + to_string(cell.inv) + "-" + (cell.directed ? "dir" : "und") +
         "-" + std::to_string(index);

  std::vector<int> phones;
  if (vt && cell.directed) {
    for (int k = 1; k <= kKeywordPhones; ++k) phones.push_back(k);
  } else if (vt && u01(rng) < spec.confusable_rate) {
    std::uniform_int_distribution<int> slot(0, kKeywordPhones - 1);
    const int swap = slot(rng);
    for (int k = 1; k <= kKeywordPhones; ++k) phones.push_back(k == swap + 1 ? command(rng) : k);
  }
  const int prefix = static_cast<int>(phones.size());
  std::vector<int> durations;
  int total = 0;
  for (int i = 0; i < prefix; ++i) {
    durations.push_back(phone_len(rng));
    total += durations.back();
  }
  const int distractor0 = vt ? inv.background0 : inv.chatter0;
  while (total < target) {
    int p;
    do {
      p = (!cell.directed && u01(rng) < spec.distractor_rate) ? distractor0 + distractor(rng)
                                                              : command(rng);
    } while (!phones.empty() && p == phones.back());
    phones.push_back(p);
    durations.push_back(phone_len(rng));
    total += durations.back();
  }
  // The keyword always survives intact; only the trailing phone is clipped.
  if (total > target && static_cast<int>(phones.size()) > prefix + 1) {
    const int excess = total - target;
    if (durations.back() - excess >= spec.min_phone_frames) {
      durations.back() -= excess;
      total = target;
    }
  }
  if (vt && cell.directed)
    for (int i = 0; i < kKeywordPhones; ++i) u.keyword_frames += durations[i];

  const int dim = spec.base_dim;
  std::vector<double> channel(dim);
  for (double& c : channel) c = spec.channel_std * n01(rng);
  u.raw = Tensor<float>(total, dim);
  int row = 0;
  for (std::size_t i = 0; i < phones.size(); ++i)
    for (int f = 0; f < durations[i]; ++f, ++row)
      for (int c = 0; c < dim; ++c)
        u.raw.at(row, c) = static_cast<float>(means.at(phones[i] - 1, c) + channel[c] +
                                              spec.noise_std * n01(rng));
  u.phones = std::move(phones);
  u.durations = std::move(durations);
  return u;
}

}  // namespace

std::vector<Utterance> generate(const CorpusSpec& spec) {
  spec.validate();
  const Tensor<float> means = phone_means(spec);
  std::vector<Utterance> out;
  out.reserve(spec.train.total() + spec.eval.total());
  for (Split split : {Split::kTrain, Split::kEval}) {
    const CellCounts& c = split == Split::kTrain ? spec.train : spec.eval;
    const CellPlan cells[] = {{Invocation::kVt, true, c.vt_directed},
                              {Invocation::kVt, false, c.vt_undirected},
                              {Invocation::kTb, true, c.tb_directed},
                              {Invocation::kTb, false, c.tb_undirected}};
    int index = 0;
    for (const auto& cell : cells)
      for (int i = 0; i < cell.count; ++i, ++index)
        out.push_back(make_utterance(spec, means, cell, split, i,
                                     mix_seed(spec.seed, static_cast<std::uint64_t>(split) + 1,
                                              static_cast<std::uint64_t>(index))));
  }
  return out;
}

Utterance segment_payload(const Utterance& u) {
  if (u.invocation != Invocation::kVt || !u.directed)
    throw DataError("segment_payload: " + u.id + " is not a VT-directed utterance");
  if (u.keyword_frames <= 0 || u.keyword_frames >= u.frames() ||
      static_cast<int>(u.phones.size()) <= kKeywordPhones)
    throw DataError("segment_payload: " + u.id + " has no payload after the keyword");
  Utterance p;
  p.id = u.id + "-payload";
  p.directed = true;
  p.invocation = Invocation::kTb;
  p.split = u.split;
  p.phones.assign(u.phones.begin() + kKeywordPhones, u.phones.end());
  p.durations.assign(u.durations.begin() + kKeywordPhones, u.durations.end());
  const int rows = u.frames() - u.keyword_frames;
  p.raw = Tensor<float>(rows, u.raw.cols());
  std::copy(u.raw.data() + static_cast<std::size_t>(u.keyword_frames) * u.raw.cols(),
            u.raw.data() + u.raw.size(), p.raw.data());
  return p;
}

int augment_with_payloads(std::vector<Utterance>& corpus, int max_payloads) {
  std::vector<Utterance> extra;
  for (const auto& u : corpus) {
    if (static_cast<int>(extra.size()) >= max_payloads) break;
    if (u.invocation == Invocation::kVt && u.directed) extra.push_back(segment_payload(u));
  }
  const int added = static_cast<int>(extra.size());
  for (auto& p : extra) corpus.push_back(std::move(p));
  return added;
}

}  // namespace ftm
