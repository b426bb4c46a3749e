// Training objectives: frame-wise cross-entropy for the discriminative branch
// and CTC for the phonetic branch.

#ifndef FTM_LOSSES_H_
#define FTM_LOSSES_H_

#include <vector>

#include "ftm/autodiff.h"

namespace ftm {

// Mean over rows of -log softmax(logits)[label]; logits is T x 2. Optional
// per-row weights are normalised by their sum.
template <typename T>
Var<T> frame_xe(const Var<T>& logits, int label, const std::vector<T>& weights = {});

// Negative log-likelihood of labels (symbols in 1..alphabet, 0 is blank)
// summed over all CTC alignments. log_probs is T x (alphabet + 1) with
// normalised rows. Computed with the forward-backward recursions in log space.
template <typename T>
Var<T> ctc_loss(const Var<T>& log_probs, const std::vector<int>& labels);

// Shortest input that can emit labels: one frame per symbol plus a blank
// between equal neighbours.
int ctc_min_frames(const std::vector<int>& labels);

template <typename T>
Var<T> multitask_loss(const Var<T>& xe, const Var<T>& ctc, T lambda_ctc);

}  // namespace ftm

#endif  // FTM_LOSSES_H_
