// Detection metrics over scored utterances.
//
// Scores are P(directed). An utterance is accepted when score >= threshold and
// rejected (mitigated) otherwise, so FRR counts directed utterances below the
// threshold and FAR counts undirected utterances at or above it.

#ifndef FTM_EVAL_H_
#define FTM_EVAL_H_

#include <ostream>
#include <string>
#include <vector>

#include "ftm/model.h"
#include "ftm/summary.h"
#include "ftm/synthdata.h"

namespace ftm {

struct ScoredUtterance {
  std::string id;
  double final_score = 0;
  bool directed = false;
  Invocation invocation = Invocation::kVt;
  ScoreTrajectory trajectory;
};

using ScoredSet = std::vector<ScoredUtterance>;

struct DetPoint {
  double threshold;
  double frr;
  double far;
};

// One point per distinct score plus one just above the maximum (everything
// rejected), sorted by increasing threshold. Throws DataError when either
// class is missing or a score is outside [0, 1].
std::vector<DetPoint> det_curve(const ScoredSet& set);

struct OperatingPoint {
  double threshold = 0;
  double far = 0;
  double frr = 0;  // achieved, <= target
  double frr_target = 0;
  // False when there are too few directed utterances to resolve the target;
  // the point is then the nearest attainable one below it.
  bool attainable = true;
};

// FAR at the largest threshold whose FRR does not exceed the target.
OperatingPoint far_at_frr(const ScoredSet& set, double frr_target);

// Named presets: "vt" is FRR 1%, "tb" is FRR 3%.
double operating_frr(const std::string& name);

// FRR = FAR crossing, interpolated linearly between adjacent DET points.
double eer(const ScoredSet& set);

struct MitigationPoint {
  int frames;
  double seconds;
  double fraction;  // undirected utterances mitigated at or before this time
};

// Evaluated at every distinct emission time of the undirected utterances.
// An utterance counts from its first emission scoring below the threshold.
std::vector<MitigationPoint> early_mitigation_curve(const ScoredSet& set, double threshold,
                                                    double frame_period_ms);

// Step-function value of a curve at an arbitrary time (0 before the first
// point).
double curve_value_at(const std::vector<MitigationPoint>& curve, int frames);

// Threshold at which exactly `far` of the undirected final scores are
// accepted, rounding the count down.
double threshold_for_far(const ScoredSet& set, double far);

ScoredSet filter(const ScoredSet& set, Invocation invocation);

template <typename T>
ScoredSet score_corpus(const FtmModel<T>& model, const std::vector<Utterance>& utts,
                       bool streaming);

void write_det_csv(std::ostream& out, const std::vector<DetPoint>& det);
void write_mitigation_csv(std::ostream& out, const std::vector<MitigationPoint>& curve);

}  // namespace ftm

#endif  // FTM_EVAL_H_
