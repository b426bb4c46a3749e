#include "ftm/train.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>

#include "ftm/errors.h"
#include "ftm/losses.h"
#include "ftm/ops.h"
#include "ftm/optim.h"

namespace ftm {

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train.lr must be positive");
  if (!(clip_norm > 0)) throw ConfigError("train.clip_norm must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (pretrain_steps < 0) throw ConfigError("train.pretrain_steps must be >= 0");
  if (finetune_steps < 0) throw ConfigError("train.finetune_steps must be >= 0");
  if (!(lambda_ctc >= 0)) throw ConfigError("train.lambda_ctc must be >= 0");
  if (train_sets.empty()) throw ConfigError("train.train_sets selects no invocation type");
  if (!(holdout_fraction > 0 && holdout_fraction < 1))
    throw ConfigError("train.holdout_fraction must be in (0, 1)");
  if (eval_every < 1) throw ConfigError("train.eval_every must be positive");
}

std::string train_sets_tag(const std::vector<Invocation>& sets) {
  const bool vt = std::count(sets.begin(), sets.end(), Invocation::kVt) > 0;
  const bool tb = std::count(sets.begin(), sets.end(), Invocation::kTb) > 0;
  return vt && tb ? "vt+tb" : vt ? "vt" : tb ? "tb" : "";
}

std::vector<Invocation> parse_train_sets(const std::string& tag) {
  if (tag == "vt") return {Invocation::kVt};
  if (tag == "tb") return {Invocation::kTb};
  if (tag == "vt+tb" || tag == "tb+vt" || tag == "vt,tb" || tag == "tb,vt" || tag == "both")
    return {Invocation::kVt, Invocation::kTb};
  throw ConfigError("train.train_sets: expected vt, tb or vt+tb, got '" + tag + "'");
}

std::vector<Utterance> select_training_data(const std::vector<Utterance>& corpus,
                                            const TrainConfig& cfg, bool phonetic_only) {
  std::vector<Utterance> out;
  const bool vt = std::count(cfg.train_sets.begin(), cfg.train_sets.end(), Invocation::kVt) > 0;
  for (const auto& u : corpus) {
    if (u.split != Split::kTrain) continue;
    if (phonetic_only ||
        std::count(cfg.train_sets.begin(), cfg.train_sets.end(), u.invocation) > 0)
      out.push_back(u);
  }
  if (!phonetic_only && vt && cfg.payload_augmentation) {
    int cap = cfg.max_payloads;
    if (cap < 0) cap = static_cast<int>(out.size());
    augment_with_payloads(out, cap);
  }
  return out;
}

namespace {

struct Losses {
  Var<float> total;
  double xe = 0, ctc = 0;
};

Losses utterance_loss(const FtmModel<float>& model, const Utterance& u, bool phonetic_only,
                      double lambda_ctc, bool train, std::mt19937_64* rng) {
  Var<float> x = constant(u.features().frames);
  ModelOutput<float> out = model.forward(x, train, rng, !phonetic_only);
  Losses l;
  Var<float> ctc = ctc_loss(log_softmax_rows(out.phone_logits), u.phones);
  l.ctc = ctc.value()[0];
  if (phonetic_only) {
    l.total = ctc;
  } else {
    Var<float> xe = frame_xe(out.head.logits, u.directed ? 1 : 0);
    l.xe = xe.value()[0];
    l.total = multitask_loss(xe, ctc, static_cast<float>(lambda_ctc));
  }
  return l;
}

std::vector<Tensor<float>> snapshot(const ParamSet<float>& ps) {
  std::vector<Tensor<float>> s;
  for (const auto& item : ps.items()) s.push_back(item.second.value().clone());
  return s;
}

void restore(ParamSet<float>& ps, const std::vector<Tensor<float>>& s) {
  for (std::size_t i = 0; i < ps.items().size(); ++i) {
    Var<float> v = ps.items()[i].second;
    std::copy(s[i].data(), s[i].data() + s[i].size(), v.mutable_value().data());
  }
}

TrainResult run(FtmModel<float>& model, const TrainConfig& cfg,
                const std::vector<Utterance>& corpus, bool phonetic_only) {
  cfg.validate();
  const std::string phase = phonetic_only ? "pretrain" : "finetune";
  const int steps = phonetic_only ? cfg.pretrain_steps : cfg.finetune_steps;
  std::vector<Utterance> data = select_training_data(corpus, cfg, phonetic_only);
  if (data.size() < 2) throw DataError(phase + ": fewer than two training utterances selected");

  std::mt19937_64 rng(cfg.seed * 2 + (phonetic_only ? 0 : 1));
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_hold = std::max(1, static_cast<int>(std::ceil(cfg.holdout_fraction * data.size())));
  std::vector<const Utterance*> holdout, train;
  for (int i = 0; i < static_cast<int>(order.size()); ++i)
    (i < n_hold ? holdout : train).push_back(&data[order[i]]);
  if (train.empty()) throw DataError(phase + ": holdout leaves no training utterances");

  ParamSet<float>& ps = model.params();
  std::vector<bool> skip(ps.items().size(), false);
  if (cfg.freeze_encoder && !phonetic_only)
    for (std::size_t i = 0; i < skip.size(); ++i)
      skip[i] = ps.items()[i].first.rfind("enc.", 0) == 0;

  TrainResult res;
  res.train_utterances = static_cast<int>(train.size());
  res.holdout_utterances = static_cast<int>(holdout.size());
  res.initial_holdout = mean_loss(model, holdout, phonetic_only, cfg.lambda_ctc);
  res.best_holdout = res.initial_holdout;
  auto best = snapshot(ps);

  Adam<float> adam(AdamOptions{cfg.lr});
  std::size_t cursor = train.size();
  std::vector<int> epoch(train.size());
  std::iota(epoch.begin(), epoch.end(), 0);
  for (int step = 1; step <= steps; ++step) {
    ps.zero_grad();
    TrainLogRow row;
    row.step = step;
    row.phase = phase;
    row.lr = cfg.lr;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == train.size()) {
        std::shuffle(epoch.begin(), epoch.end(), rng);
        cursor = 0;
      }
      const Utterance& u = *train[epoch[cursor++]];
      Losses l = utterance_loss(model, u, phonetic_only, cfg.lambda_ctc, true, &rng);
      const double total = l.total.value()[0];
      if (!std::isfinite(total))
        throw NumericError(phase + " diverged at step " + std::to_string(step) + " on " + u.id +
                           ": loss is " + std::to_string(total));
      backward(scale(l.total, 1.0f / cfg.batch_size));
      row.xe += l.xe / cfg.batch_size;
      row.ctc += l.ctc / cfg.batch_size;
      row.total += total / cfg.batch_size;
    }
    std::vector<Tensor<float>*> grads;
    for (std::size_t i = 0; i < ps.items().size(); ++i) {
      Var<float> v = ps.items()[i].second;
      if (v.has_grad() && !skip[i]) grads.push_back(const_cast<Tensor<float>*>(&v.grad()));
    }
    grad_clip_by_global_norm(grads, cfg.clip_norm);
    row.grad_norm = global_grad_norm(grads);
    adam.step(ps, &skip);
    if (step % cfg.eval_every == 0 || step == steps) {
      row.holdout = mean_loss(model, holdout, phonetic_only, cfg.lambda_ctc);
      if (row.holdout < res.best_holdout) {
        res.best_holdout = row.holdout;
        res.best_step = step;
        best = snapshot(ps);
      }
    }
    res.log.push_back(row);
  }
  ps.zero_grad();
  if (cfg.early_stopping) restore(ps, best);
  return res;
}

}  // namespace

double mean_loss(const FtmModel<float>& model, const std::vector<const Utterance*>& utts,
                 bool phonetic_only, double lambda_ctc) {
  NoGradGuard ng;
  double sum = 0;
  for (const Utterance* u : utts)
    sum += utterance_loss(model, *u, phonetic_only, lambda_ctc, false, nullptr).total.value()[0];
  return utts.empty() ? 0.0 : sum / utts.size();
}

TrainResult pretrain_phonetic(FtmModel<float>& model, const TrainConfig& cfg,
                              const std::vector<Utterance>& corpus) {
  return run(model, cfg, corpus, true);
}

TrainResult train_discriminative(FtmModel<float>& model, const TrainConfig& cfg,
                                 const std::vector<Utterance>& corpus) {
  return run(model, cfg, corpus, false);
}

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& rows) {
  out << "step,phase,xe,ctc,total,grad_norm,lr,holdout\n" << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.step << ',' << r.phase << ',' << r.xe << ',' << r.ctc << ',' << r.total << ','
        << r.grad_norm << ',' << r.lr << ',';
    if (!std::isnan(r.holdout)) out << r.holdout;
    out << '\n';
  }
}

}  // namespace ftm
