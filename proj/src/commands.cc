#include "ftm/commands.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ftm/corpus_io.h"
#include "ftm/errors.h"
#include "ftm/featext.h"

namespace ftm {
namespace fs = std::filesystem;

namespace {

constexpr const char* kModelFile = "model.ftmc";
constexpr const char* kConfigFile = "config.ini";
constexpr const char* kTrainLogFile = "train_log.csv";
constexpr double kFramePeriodMs = kRawFramePeriodMs * kDefaultSubsample;

std::string join(const fs::path& a, const std::string& b) { return (a / b).string(); }

// File, then environment, then explicit overrides. With a section filter only
// environment variables of that section are read.
KeyValues layered(const std::string& path, const std::vector<std::string>& overrides,
                  const std::string& env_section = "") {
  KeyValues kv = path.empty() ? KeyValues{} : read_ini(path);
  KeyValues env;
  apply_env(env, [](const char* name) { return std::getenv(name); });
  for (const auto& [k, v] : env)
    if (env_section.empty() || k.rfind(env_section + ".", 0) == 0) kv[k] = v;
  apply_overrides(kv, overrides);
  return kv;
}

void require_command(const RunManifest& m, const std::string& command) {
  if (m.command != command)
    throw ConfigError("manifest was written by '" + m.command + "', not '" + command + "'");
}

void verify_input(const ManifestInput& in, const std::string& path, const std::string& actual) {
  if (actual != in.hash)
    throw DataError(in.role + " at " + path + " has hash " + actual + ", manifest expects " +
                    in.hash);
}

std::string out_file(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return join(dir, name);
}

template <typename Fn>
void write_csv(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  fn(out);
}

std::vector<Utterance> take(const std::vector<Utterance>& utts, Split split,
                            std::optional<Invocation> inv = std::nullopt) {
  std::vector<Utterance> out;
  for (const auto& u : utts)
    if (u.split == split && (!inv || u.invocation == *inv)) out.push_back(u);
  return out;
}

void check_corpus_fits(const ModelConfig& m, const CorpusSpec& c) {
  const int dim = c.base_dim * (2 * kDefaultContext + 1);
  if (m.input_dim != dim || m.phone_alphabet != c.phone_alphabet())
    throw DataError("corpus features (input_dim " + std::to_string(dim) + ", phone_alphabet " +
                    std::to_string(c.phone_alphabet()) + ") do not fit the model (input_dim " +
                    std::to_string(m.input_dim) + ", phone_alphabet " +
                    std::to_string(m.phone_alphabet) + ")");
}

void log_phase(std::ostream& log, const std::string& phase, const TrainResult& r) {
  log << phase << ": " << r.log.size() << " steps on " << r.train_utterances
      << " utterances, held-out loss " << r.initial_holdout << " -> " << r.best_holdout
      << " (best at step " << r.best_step << ")\n";
}

}  // namespace

std::string cmd_gen_data(const GenDataOptions& opt, std::ostream& log) {
  if (opt.out_dir.empty()) throw ConfigError("gen-data needs an output directory");
  KeyValues kv;
  RunManifest m;
  m.command = "gen-data";
  if (!opt.from_manifest.empty()) {
    if (!opt.spec_path.empty() || !opt.overrides.empty())
      throw ConfigError("--from-manifest cannot be combined with a spec or --set");
    const RunManifest prev = RunManifest::load(opt.from_manifest);
    require_command(prev, m.command);
    kv = prev.config;
  } else {
    kv = layered(opt.spec_path, opt.overrides, "corpus");
    if (!opt.spec_path.empty()) m.add_input("spec", opt.spec_path, file_hash(opt.spec_path));
  }
  const CorpusSpec spec = resolve_corpus(kv);
  prepare_output_dir(opt.out_dir, opt.force,
                     {"corpus.ini", "manifest.jsonl", "feats", kRunManifestFile});
  const auto utts = generate(spec);
  const std::string hash = write_corpus(opt.out_dir, spec, utts);
  m.config = corpus_to_kv(spec);
  m.seed = spec.seed;
  m.outputs = {"corpus.ini", "manifest.jsonl", "feats"};
  m.save(join(opt.out_dir, kRunManifestFile));
  log << "wrote " << utts.size() << " utterances to " << opt.out_dir << "\ncontent hash "
      << hash << '\n';
  return hash;
}

TrainSummary cmd_train(const TrainOptions& opt, std::ostream& log) {
  if (opt.out_dir.empty()) throw ConfigError("train needs an output directory");
  KeyValues kv;
  std::string corpus_dir = opt.corpus_dir;
  std::string init_dir = opt.init_dir;
  std::optional<RunManifest> prev;
  if (!opt.from_manifest.empty()) {
    if (!opt.config_path.empty() || !opt.overrides.empty())
      throw ConfigError("--from-manifest cannot be combined with --config or --set");
    prev = RunManifest::load(opt.from_manifest);
    require_command(*prev, "train");
    kv = prev->config;
    const ManifestInput* c = prev->input("corpus");
    if (!c) throw ConfigError("manifest lists no corpus input");
    if (corpus_dir.empty()) corpus_dir = c->path;
    const ManifestInput* i = prev->input("init");
    if (i && init_dir.empty()) init_dir = fs::path(i->path).parent_path().string();
    if (!i && !init_dir.empty()) throw ConfigError("manifest was trained without --init");
  } else {
    kv = layered(opt.config_path, opt.overrides);
  }
  if (corpus_dir.empty()) throw ConfigError("train needs --corpus");

  const CorpusOnDisk corpus = read_corpus(corpus_dir);
  if (prev) verify_input(*prev->input("corpus"), corpus_dir, corpus.hash);

  // The corpus directory fixes the [corpus] section; the config may only
  // restate it.
  const KeyValues generated = corpus_to_kv(corpus.spec);
  KeyValues merged = generated;
  for (const auto& [k, v] : kv) merged[k] = v;
  const RunConfig cfg = resolve_run_config(merged);
  const KeyValues requested = corpus_to_kv(cfg.corpus);
  for (const auto& [k, v] : generated)
    if (requested.at(k) != v)
      throw ConfigError(k + " = " + requested.at(k) + " in the configuration, but the corpus at " +
                        corpus_dir + " was generated with " + v);
  const KeyValues resolved = to_kv(cfg);

  prepare_output_dir(opt.out_dir, opt.force,
                     {kModelFile, kConfigFile, kTrainLogFile, kRunManifestFile});
  RunManifest m;
  m.command = "train";
  m.config = resolved;
  m.seed = cfg.train.seed;
  m.add_input("corpus", corpus_dir, corpus.hash);

  TrainSummary summary;
  summary.config = cfg;
  FtmModel<float> model(cfg.model, cfg.train.seed);
  log << "model " << to_string(cfg.model.summary_kind) << ": " << model.params().num_scalars()
      << " parameters, train sets " << train_sets_tag(cfg.train.train_sets) << '\n';
  if (!init_dir.empty()) {
    const std::string init_model = join(init_dir, kModelFile);
    const std::string hash = file_hash(init_model);
    if (prev) verify_input(*prev->input("init"), init_model, hash);
    const Checkpoint ck = Checkpoint::load(init_model);
    check_checkpoint_fits(ck, cfg.model);
    const int n = model.params().load_matching(ck, {"enc.", "phone."});
    m.add_input("init", init_model, hash);
    log << "initialized " << n << " tensors from " << init_model << '\n';
  } else if (cfg.train.pretrain_steps > 0) {
    summary.pretrain = pretrain_phonetic(model, cfg.train, corpus.utterances);
    log_phase(log, "pretrain", *summary.pretrain);
  }
  if (cfg.train.finetune_steps > 0) {
    summary.finetune = train_discriminative(model, cfg.train, corpus.utterances);
    log_phase(log, "finetune", *summary.finetune);
  }

  Checkpoint ck;
  model.params().save_to(ck);
  ck.save(join(opt.out_dir, kModelFile));
  write_file(join(opt.out_dir, kConfigFile), write_ini(resolved));
  std::vector<TrainLogRow> rows;
  for (const auto* r : {&summary.pretrain, &summary.finetune})
    if (*r) rows.insert(rows.end(), (*r)->log.begin(), (*r)->log.end());
  write_csv(join(opt.out_dir, kTrainLogFile), [&](std::ostream& out) {
    write_train_log_csv(out, rows);
  });
  m.outputs = {kModelFile, kConfigFile, kTrainLogFile};
  m.save(join(opt.out_dir, kRunManifestFile));
  log << "checkpoint written to " << opt.out_dir << '\n';
  return summary;
}

void check_checkpoint_fits(const Checkpoint& ck, const ModelConfig& cfg) {
  int layers = 0, d_model = -1, input_dim = -1;
  std::set<std::string> layer_ids;
  for (const auto& e : ck.entries()) {
    if (e.name == "enc.in.w" && e.dims.size() == 2) {
      input_dim = static_cast<int>(e.dims[0]);
      d_model = static_cast<int>(e.dims[1]);
    }
    const auto end = e.name.find(".attn.wq");
    if (e.name.rfind("enc.", 0) == 0 && end != std::string::npos)
      layer_ids.insert(e.name.substr(4, end - 4));
  }
  layers = static_cast<int>(layer_ids.size());
  if (layers != cfg.n_layers || d_model != cfg.d_model || input_dim != cfg.input_dim)
    throw ConfigError("checkpoint has n_layers=" + std::to_string(layers) +
                      ", d_model=" + std::to_string(d_model) +
                      ", input_dim=" + std::to_string(input_dim) +
                      "; configuration has n_layers=" + std::to_string(cfg.n_layers) +
                      ", d_model=" + std::to_string(cfg.d_model) +
                      ", input_dim=" + std::to_string(cfg.input_dim));
}

LoadedModel load_checkpoint_dir(const std::string& dir,
                                const std::vector<std::string>& overrides) {
  const std::string config_path = join(dir, kConfigFile);
  if (!fs::exists(config_path)) throw DataError(dir + " is not a checkpoint directory");
  KeyValues kv = read_ini(config_path);
  apply_overrides(kv, overrides);
  LoadedModel out;
  out.config = resolve_run_config(kv);
  const Checkpoint ck = Checkpoint::load(join(dir, kModelFile));
  check_checkpoint_fits(ck, out.config.model);
  out.model = std::make_unique<FtmModel<float>>(out.config.model, out.config.train.seed);
  try {
    out.model->params().load_from(ck);
  } catch (const DataError& e) {
    throw ConfigError("checkpoint does not match summary kind " +
                      to_string(out.config.model.summary_kind) + ": " + e.what());
  }
  return out;
}

std::vector<MetricRecord> cmd_eval(const EvalOptions& opt, std::ostream& log) {
  const LoadedModel lm = load_checkpoint_dir(opt.checkpoint_dir, opt.overrides);
  const CorpusOnDisk corpus = read_corpus(opt.corpus_dir);
  check_corpus_fits(lm.config.model, corpus.spec);
  const SummaryKind kind = lm.config.model.summary_kind;
  const std::string tag =
      opt.train_tag.empty() ? train_sets_tag(lm.config.train.train_sets) : opt.train_tag;
  std::vector<MetricRecord> records;
  log << std::left << std::setw(8) << "kind" << std::setw(8) << "train" << std::setw(6)
      << "eval" << std::right << std::setw(9) << "EER%" << std::setw(10) << "FAR%"
      << std::setw(10) << "FRR%" << std::setw(12) << "threshold" << '\n'
      << std::fixed;
  for (Invocation inv : opt.eval_sets) {
    const auto utts = take(corpus.utterances, opt.split, inv);
    const ScoredSet set = score_corpus(*lm.model, utts, is_streaming(kind));
    const double target = operating_frr(opt.op.empty() ? to_string(inv) : opt.op);
    const double e = eer(set);
    const OperatingPoint op = far_at_frr(set, target);
    if (!op.attainable)
      log << "warning: " << to_string(inv) << " has too few directed utterances to resolve FRR "
          << format_number(100 * target) << "%; using the nearest attainable point\n";
    for (const auto& [metric, value] :
         {std::pair<std::string, double>{"eer", e}, {"far", op.far}, {"frr", op.frr},
          {"frr_target", target}, {"threshold", op.threshold}})
      records.push_back({metric, inv, tag, kind, value});
    log << std::left << std::setw(8) << to_string(kind) << std::setw(8) << tag << std::setw(6)
        << to_string(inv) << std::right << std::setprecision(2) << std::setw(9) << 100 * e
        << std::setw(10) << 100 * op.far << std::setw(10) << 100 * op.frr
        << std::setprecision(4) << std::setw(12) << op.threshold << '\n';
    if (opt.write_curves) {
      const std::string stem = to_string(kind) + "_" + tag + "_" + to_string(inv) + ".csv";
      write_csv(out_file(opt.results_dir, "det_" + stem),
                [&](std::ostream& out) { write_det_csv(out, det_curve(set)); });
      write_csv(out_file(opt.results_dir, "mitigation_" + stem), [&](std::ostream& out) {
        write_mitigation_csv(out, early_mitigation_curve(set, op.threshold, kFramePeriodMs));
      });
    }
  }
  log << std::defaultfloat;
  write_csv(out_file(opt.results_dir, "metrics_" + to_string(kind) + "_" + tag + ".csv"),
            [&](std::ostream& out) { write_metrics_csv(out, records); });
  return records;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& rows) {
  out << "metric,invocation,train_sets,kind,value\n" << std::setprecision(10);
  for (const auto& r : rows)
    out << r.metric << ',' << to_string(r.invocation) << ',' << r.train_sets << ','
        << to_string(r.kind) << ',' << r.value << '\n';
}

void cmd_traj(const TrajOptions& opt, std::ostream& log) {
  if (opt.out_csv.empty()) throw ConfigError("traj needs an output file");
  const LoadedModel lm = load_checkpoint_dir(opt.checkpoint_dir);
  const CorpusOnDisk corpus = read_corpus(opt.corpus_dir);
  check_corpus_fits(lm.config.model, corpus.spec);
  const auto utts = take(corpus.utterances, opt.split);
  const ScoredSet set =
      score_corpus(*lm.model, utts, is_streaming(lm.config.model.summary_kind));
  std::vector<TrajectoryRow> rows;
  for (const auto& s : set) rows.push_back({s.id, &s.trajectory});
  const fs::path out(opt.out_csv);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_csv(opt.out_csv,
            [&](std::ostream& o) { write_trajectory_csv(o, rows, kFramePeriodMs); });
  log << "wrote trajectories of " << set.size() << " utterances to " << opt.out_csv << '\n';
}

std::vector<BenchRow> cmd_bench(const BenchOptions& opt, std::ostream& log) {
  KeyValues kv;
  apply_overrides(kv, opt.overrides);
  for (const auto& [k, v] : kv)
    if (k.rfind("model.", 0) != 0) throw ConfigError(k + ": bench accepts model.* keys only");
  ModelConfig base = resolve_run_config(kv).model;
  std::vector<BenchRow> rows;
  for (SummaryKind kind : opt.kinds) {
    ModelConfig cfg = base;
    cfg.summary_kind = kind;
    cfg.validate();
    FtmModel<float> model(cfg, opt.seed);
    for (int t : opt.lengths) {
      const Tensor<float> x = bench_input(t, cfg.input_dim, mix_seed(opt.seed, 7, t));
      rows.push_back(bench_inference(model, x, opt.repeats));
    }
  }
  fill_reductions(rows);
  print_bench_table(log, rows);
  write_csv(out_file(opt.results_dir, "bench.csv"),
            [&](std::ostream& out) { write_bench_csv(out, rows); });
  if (std::set<int>(opt.lengths.begin(), opt.lengths.end()).size() >= 4) {
    const auto fit = scaling_fit(rows);
    write_csv(out_file(opt.results_dir, "bench_scaling.csv"), [&](std::ostream& out) {
      out << "kind,slope\n";
      for (const auto& [kind, slope] : fit) out << to_string(kind) << ',' << slope << '\n';
    });
    for (const auto& [kind, slope] : fit)
      log << "time ~ T^" << std::setprecision(3) << slope << " for " << to_string(kind) << '\n';
  }
  return rows;
}

std::vector<MatrixRow> cmd_matrix(const MatrixOptions& opt, std::ostream& log) {
  if (opt.out_dir.empty()) throw ConfigError("matrix needs an output directory");
  for (const auto& tag : opt.train_tags) parse_train_sets(tag);
  prepare_output_dir(opt.out_dir, opt.force, {"pretrain", "cells", "results"});
  const fs::path root(opt.out_dir);

  TrainOptions pre;
  pre.config_path = opt.config_path;
  pre.overrides = opt.overrides;
  pre.overrides.push_back("train.finetune_steps=0");
  pre.corpus_dir = opt.corpus_dir;
  pre.out_dir = join(root, "pretrain");
  log << "== pretrain\n";
  cmd_train(pre, log);

  std::vector<MatrixRow> rows;
  for (SummaryKind kind : opt.kinds) {
    for (const auto& tag : opt.train_tags) {
      TrainOptions cell;
      cell.config_path = opt.config_path;
      cell.overrides = opt.overrides;
      cell.overrides.push_back("model.summary_kind=" + to_string(kind));
      cell.overrides.push_back("train.train_sets=" + tag);
      cell.corpus_dir = opt.corpus_dir;
      cell.init_dir = pre.out_dir;
      cell.out_dir = join(root / "cells", to_string(kind) + "_" + tag);
      log << "== " << to_string(kind) << " trained on " << tag << '\n';
      cmd_train(cell, log);

      EvalOptions ev;
      ev.checkpoint_dir = cell.out_dir;
      ev.corpus_dir = opt.corpus_dir;
      ev.results_dir = join(root, "results");
      const auto records = cmd_eval(ev, log);
      for (Invocation inv : ev.eval_sets) {
        MatrixRow row{kind, tag, inv, 0, 0, 0, 0, 0};
        for (const auto& r : records) {
          if (r.invocation != inv) continue;
          if (r.metric == "eer") row.eer = r.value;
          if (r.metric == "far") row.far = r.value;
          if (r.metric == "frr") row.frr = r.value;
          if (r.metric == "frr_target") row.frr_target = r.value;
          if (r.metric == "threshold") row.threshold = r.value;
        }
        rows.push_back(row);
      }
    }
  }
  write_csv(out_file(join(root, "results"), "matrix.csv"),
            [&](std::ostream& out) { write_matrix_csv(out, rows); });
  log << "wrote " << rows.size() << " rows to " << join(root / "results", "matrix.csv") << '\n';
  return rows;
}

void write_matrix_csv(std::ostream& out, const std::vector<MatrixRow>& rows) {
  out << "kind,train_sets,eval_set,eer,far,frr,frr_target,threshold\n" << std::setprecision(10);
  for (const auto& r : rows)
    out << to_string(r.kind) << ',' << r.train_sets << ',' << to_string(r.eval_set) << ','
        << r.eer << ',' << r.far << ',' << r.frr << ',' << r.frr_target << ',' << r.threshold
        << '\n';
}

}  // namespace ftm
