#include "ftm/eval.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>

#include "ftm/errors.h"

namespace ftm {
namespace {

struct SplitScores {
  std::vector<double> pos, neg;  // sorted ascending
};

SplitScores split_scores(const ScoredSet& set) {
  SplitScores s;
  for (const auto& u : set) {
    if (!(u.final_score >= 0.0 && u.final_score <= 1.0))
      throw DataError("score of " + u.id + " is outside [0, 1]: " +
                      std::to_string(u.final_score));
    (u.directed ? s.pos : s.neg).push_back(u.final_score);
  }
  if (s.pos.empty() || s.neg.empty())
    throw DataError("metrics need both directed and undirected utterances (got " +
                    std::to_string(s.pos.size()) + " directed, " +
                    std::to_string(s.neg.size()) + " undirected)");
  std::sort(s.pos.begin(), s.pos.end());
  std::sort(s.neg.begin(), s.neg.end());
  return s;
}

DetPoint point_at(const SplitScores& s, double threshold) {
  const auto below = [](const std::vector<double>& v, double t) {
    return static_cast<double>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
  };
  return {threshold, below(s.pos, threshold) / s.pos.size(),
          (s.neg.size() - below(s.neg, threshold)) / s.neg.size()};
}

}  // namespace

std::vector<DetPoint> det_curve(const ScoredSet& set) {
  const SplitScores s = split_scores(set);
  std::vector<double> thresholds;
  thresholds.reserve(set.size() + 1);
  for (const auto& u : set) thresholds.push_back(u.final_score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::nextafter(thresholds.back(), 2.0));
  std::vector<DetPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) out.push_back(point_at(s, t));
  return out;
}

OperatingPoint far_at_frr(const ScoredSet& set, double frr_target) {
  if (!(frr_target > 0 && frr_target < 1))
    throw ConfigError("FRR target must be in (0, 1), got " + std::to_string(frr_target));
  const auto det = det_curve(set);
  OperatingPoint op;
  op.frr_target = frr_target;
  // FRR grows with the threshold, and the lowest threshold has FRR 0.
  for (const auto& p : det) {
    if (p.frr > frr_target) break;
    op.threshold = p.threshold;
    op.far = p.far;
    op.frr = p.frr;
  }
  std::size_t n_pos = 0;
  for (const auto& u : set) n_pos += u.directed ? 1 : 0;
  op.attainable = n_pos * frr_target >= 1.0;
  return op;
}

double operating_frr(const std::string& name) {
  if (name == "vt") return 0.01;
  if (name == "tb") return 0.03;
  throw ConfigError("unknown operating point '" + name + "' (expected vt or tb)");
}

double eer(const ScoredSet& set) {
  const auto det = det_curve(set);
  // far - frr starts at 1 and ends at -1 and never increases.
  for (std::size_t i = 0; i < det.size(); ++i) {
    const double d = det[i].far - det[i].frr;
    if (d == 0) return det[i].frr;
    if (d < 0) {
      const DetPoint& a = det[i - 1];
      const DetPoint& b = det[i];
      const double da = a.far - a.frr;
      return a.frr + (b.frr - a.frr) * da / (da - d);
    }
  }
  return det.back().frr;
}

std::vector<MitigationPoint> early_mitigation_curve(const ScoredSet& set, double threshold,
                                                    double frame_period_ms) {
  std::set<int> times;
  std::vector<int> decided;
  for (const auto& u : set) {
    if (u.directed) continue;
    if (u.trajectory.times.empty())
      throw DataError("early mitigation needs a score trajectory for " + u.id);
    times.insert(u.trajectory.times.begin(), u.trajectory.times.end());
    auto d = early_decision(u.trajectory, threshold);
    decided.push_back(d ? *d : std::numeric_limits<int>::max());
  }
  if (decided.empty()) throw DataError("early mitigation needs undirected utterances");
  std::sort(decided.begin(), decided.end());
  std::vector<MitigationPoint> out;
  for (int t : times) {
    const auto n = std::upper_bound(decided.begin(), decided.end(), t) - decided.begin();
    out.push_back({t, t * frame_period_ms / 1000.0,
                   static_cast<double>(n) / decided.size()});
  }
  return out;
}

double curve_value_at(const std::vector<MitigationPoint>& curve, int frames) {
  double v = 0;
  for (const auto& p : curve) {
    if (p.frames > frames) break;
    v = p.fraction;
  }
  return v;
}

double threshold_for_far(const ScoredSet& set, double far) {
  if (!(far >= 0 && far <= 1)) throw ConfigError("FAR must be in [0, 1]");
  std::vector<double> neg;
  for (const auto& u : set)
    if (!u.directed) neg.push_back(u.final_score);
  if (neg.empty()) throw DataError("no undirected utterances to set a threshold on");
  std::sort(neg.begin(), neg.end());
  const auto accepted = static_cast<std::size_t>(std::floor(far * neg.size() + 1e-9));
  if (accepted == 0) return std::nextafter(neg.back(), 2.0);
  // Accept the top `accepted` scores; ties at the cut are accepted too.
  return neg[neg.size() - accepted];
}

ScoredSet filter(const ScoredSet& set, Invocation invocation) {
  ScoredSet out;
  for (const auto& u : set)
    if (u.invocation == invocation) out.push_back(u);
  return out;
}

template <typename T>
ScoredSet score_corpus(const FtmModel<T>& model, const std::vector<Utterance>& utts,
                       bool streaming) {
  ScoredSet out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    Tensor<T> x = cast_tensor<T>(u.features().frames);
    ScoredUtterance s;
    s.id = u.id;
    s.directed = u.directed;
    s.invocation = u.invocation;
    s.trajectory = streaming ? model.score_streaming(x) : model.score(x);
    s.final_score = s.trajectory.final_score;
    out.push_back(std::move(s));
  }
  return out;
}

void write_det_csv(std::ostream& out, const std::vector<DetPoint>& det) {
  out << "threshold,frr,far\n" << std::setprecision(10);
  for (const auto& p : det) out << p.threshold << ',' << p.frr << ',' << p.far << '\n';
}

void write_mitigation_csv(std::ostream& out, const std::vector<MitigationPoint>& curve) {
  out << "frames,seconds,fraction\n" << std::setprecision(10);
  for (const auto& p : curve) out << p.frames << ',' << p.seconds << ',' << p.fraction << '\n';
}

template ScoredSet score_corpus(const FtmModel<float>&, const std::vector<Utterance>&, bool);
template ScoredSet score_corpus(const FtmModel<double>&, const std::vector<Utterance>&, bool);

}  // namespace ftm
