// Copyright 2026 The narp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "narp/beam.h"
#include "narp/eval_metrics.h"
#include "narp/model.h"
#include "narp/synth_data.h"
#include "narp/training.h"

#ifndef NARP_VERSION
#define NARP_VERSION "unknown"
#endif
#ifndef NARP_GIT_REVISION
#define NARP_GIT_REVISION "unknown"
#endif

namespace narp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  // gen
  std::string spec;
  uint64_t seed = 0;
  int size = 10000;
  std::string out;
  // train
  std::string model;
  std::string preset = "desk";
  std::string form = "span";
  std::string data;
  int epochs = 20;
  int batch_size = 32;
  int64_t max_steps = 0;
  int dev_limit = 0;
  int max_frame_len = 50;
  double lr = 0.0;
  int64_t warmup = -1;
  double decay_rate = 0.0;
  int64_t decay_interval = 0;
  double lambda_len = TrainConfig::Desk().lambda_len;
  double lambda_int = TrainConfig::Desk().lambda_int;
  double epsilon = 0.1;
  double p_tf = 0.5;
  double clip_norm = 0.0;
  bool strict = false;
  // decoding
  int k = 3;
  int k1 = 3;
  int k2 = 1;
  std::string score = "s3";
  double alpha = 3.0;
  double ar_alpha = 1.0;
  std::string penalty_length = "frame";
  bool drop_invalid = false;
  std::string mode = "greedy";
  int limit = 1000;
  // eval
  std::string predictions;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Flags named by a --config JSON object become defaults of the selected
// subcommand, so explicit flags still win.
void ApplyConfig(CLI::App* sub, const std::string& path) {
  json config;
  try {
    config = json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!config.is_object()) throw UsageError("config " + path + " must hold a JSON object");
  for (const auto& [key, value] : config.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + name);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("config key '" + key + "' is not an option of '" + sub->get_name() + "'");
    }
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->default_val(text);
    opt->required(false);
  }
}

json Manifest(const std::string& command, const std::vector<std::string>& args,
              const CLI::App& sub, uint64_t seed) {
  return json{{"command", command},
              {"args", args},
              {"seed", seed},
              {"options", sub.config_to_str(true, false)},
              {"version", NARP_VERSION},
              {"revision", NARP_GIT_REVISION}};
}

fs::path DataFile(const std::string& data, const char* default_name) {
  fs::path p(data);
  if (fs::is_directory(p)) p /= default_name;
  if (!fs::exists(p)) throw std::runtime_error("data file " + p.string() + " does not exist");
  return p;
}

std::vector<Example> LoadExamples(const fs::path& path, bool strict, std::ostream& err) {
  LoadResult loaded = LoadTsv(path, strict);
  for (const auto& s : loaded.skipped) {
    err << path.string() << ":" << s.line_number << ": skipped: " << s.reason << '\n';
  }
  return std::move(loaded.examples);
}

DecodeSettings Settings(const Options& o) {
  DecodeSettings s;
  s.mode = o.mode == "beam" ? DecodeMode::kBeam : DecodeMode::kGreedy;
  s.k = o.k;
  s.k1 = o.k1;
  s.k2 = o.k2;
  s.score.method = ParseScoreMethod(o.score);
  s.score.alpha = o.alpha;
  s.score.penalty_length =
      o.penalty_length == "source" ? PenaltyLength::kSource : PenaltyLength::kFrame;
  s.ar_alpha = o.ar_alpha;
  s.drop_invalid = o.drop_invalid;
  return s;
}

int RunGen(const Options& o, const json& manifest, std::ostream& out) {
  const GrammarSpec spec = o.spec.empty() ? DefaultGrammar() : GrammarSpec::FromFile(o.spec);
  const std::vector<Example> examples = GenerateDataset(spec, o.seed, o.size);
  const DatasetSplits splits = SplitDataset(examples, o.seed);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  SaveTsv(dir / "train.tsv", splits.train);
  SaveTsv(dir / "dev.tsv", splits.dev);
  SaveTsv(dir / "test.tsv", splits.test);
  WriteFile(dir / "grammar.json", spec.ToJson());
  WriteFile(dir / "manifest.json", manifest.dump(2));
  out << "wrote " << splits.train.size() << " train, " << splits.dev.size() << " dev, "
      << splits.test.size() << " test examples to " << dir.string() << '\n';
  return kExitOk;
}

int RunTrain(const Options& o, const json& manifest, std::ostream& out, std::ostream& err) {
  const std::vector<Example> train = LoadExamples(DataFile(o.data, "train.tsv"), o.strict, err);
  std::vector<Example> dev;
  if (fs::is_directory(o.data) && fs::exists(fs::path(o.data) / "dev.tsv")) {
    dev = LoadExamples(fs::path(o.data) / "dev.tsv", o.strict, err);
  }
  if (train.empty()) throw std::runtime_error("no usable training examples");

  ModelConfig mc = ModelConfig::Preset(o.preset, ParseModelKind(o.model));
  mc.frame_form = ParseFrameForm(o.form);
  mc.max_frame_len = o.max_frame_len;
  mc.Validate();
  TrainConfig tc = TrainConfig::Desk();
  tc.seed = o.seed;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.max_steps = o.max_steps;
  tc.dev_limit = o.dev_limit;
  tc.lambda_len = static_cast<float>(o.lambda_len);
  tc.lambda_int = static_cast<float>(o.lambda_int);
  tc.epsilon = static_cast<float>(o.epsilon);
  tc.p_tf = static_cast<float>(o.p_tf);
  tc.clip_norm = o.clip_norm;
  if (o.lr > 0.0) tc.adam.base_lr = static_cast<float>(o.lr);
  if (o.warmup >= 0) tc.adam.warmup_steps = o.warmup;
  if (o.decay_rate > 0.0) tc.adam.decay_rate = static_cast<float>(o.decay_rate);
  if (o.decay_interval > 0) tc.adam.decay_interval = o.decay_interval;
  tc.Validate();

  Model model(mc, BuildVocabs(train), o.seed);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  WriteFile(dir / "model.json", mc.ToJson());
  WriteFile(dir / "vocab.json", model.vocab().ToJson());
  WriteFile(dir / "config.json",
            json{{"model", json::parse(mc.ToJson())}, {"train", json::parse(tc.ToJson())}}.dump(2));
  WriteFile(dir / "manifest.json", manifest.dump(2));

  TrainOutputs outputs;
  outputs.checkpoint = dir / "checkpoint.narp";
  outputs.metrics = dir / "metrics.jsonl";
  outputs.on_epoch = [&out](const EpochMetrics& m) { out << m.ToJson() << '\n' << std::flush; };
  const TrainResult result = Train(model, train, dev, tc, outputs);
  out << "best dev EM " << result.best_dev_em << " at epoch " << result.best_epoch << " after "
      << result.steps << " steps; run written to " << dir.string() << '\n';
  return kExitOk;
}

int RunDecode(const Options& o, std::ostream& out, std::ostream& err) {
  const std::unique_ptr<Model> model = LoadModelDir(o.model);
  const std::vector<Example> examples = LoadExamples(DataFile(o.data, "test.tsv"), o.strict, err);
  const DecodeSettings settings = Settings(o);
  std::ofstream file;
  std::ostream* sink = &out;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw std::runtime_error("cannot write " + o.out);
    sink = &file;
  }
  std::vector<std::vector<Hypothesis>> predictions;
  std::vector<FrameSeq> golds;
  for (const Example& ex : examples) {
    BeamRecord record;
    record.query = ex.QueryText();
    const FrameSeq gold = TreeToFrame(ex.tree, FrameForm::kSpan);
    record.gold = gold.ToString();
    record.hypotheses = DecodeQuery(*model, model->Encode(ex.query), settings);
    *sink << BeamRecordJson(record) << '\n';
    predictions.push_back(std::move(record.hypotheses));
    golds.push_back(gold);
  }
  if (!o.out.empty()) {
    const ExactMatchReport em = ExactMatch(predictions, golds);
    out << "decoded " << examples.size() << " queries; top-1 EM " << em.em[0] << ", top-3 EM "
        << em.em[2] << "; records in " << o.out << '\n';
  }
  return kExitOk;
}

int RunEval(const Options& o, std::ostream& out) {
  std::ifstream in(o.predictions);
  if (!in) throw std::runtime_error("cannot read " + o.predictions);
  std::vector<BeamRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(ParseBeamRecord(line));
  }
  const EvalReport report = Evaluate(records);
  out << report.ToTable();
  if (!o.out.empty()) WriteFile(o.out, report.ToJson());
  return kExitOk;
}

int RunOracle(const Options& o, std::ostream& out, std::ostream& err) {
  const std::unique_ptr<Model> model = LoadModelDir(o.model);
  const std::vector<Example> examples = LoadExamples(DataFile(o.data, "test.tsv"), o.strict, err);
  OracleMode mode;
  switch (model->kind()) {
    case ModelKind::kProposedNar: mode = OracleMode::kGoldIntent; break;
    case ModelKind::kBaselineNar: mode = OracleMode::kGoldLength; break;
    default: throw std::runtime_error("oracle evaluation needs a NAR model");
  }
  const OracleResult r = OracleEval(*model, examples, mode);
  json j{{"examples", r.examples},
         {"oracle", mode == OracleMode::kGoldIntent ? "gold_intent" : "gold_length"},
         {"greedy_em", r.greedy_em},
         {"oracle_em", r.oracle_em},
         {"counterexamples", r.counterexamples}};
  out << j.dump(2) << '\n';
  if (!o.out.empty()) WriteFile(o.out, j.dump(2));
  return kExitOk;
}

int RunBench(const Options& o, std::ostream& out, std::ostream& err) {
  const std::unique_ptr<Model> model = LoadModelDir(o.model);
  const std::vector<Example> examples = LoadExamples(DataFile(o.data, "test.tsv"), o.strict, err);
  const LatencyReport r = MeasureLatency(*model, examples, Settings(o), o.limit);
  json j{{"model", ModelKindName(model->kind())},
         {"examples", r.examples},
         {"encoder_passes", r.encoder_passes},
         {"decoder_passes", r.decoder_passes},
         {"ar_steps", r.ar_steps},
         {"mean_millis", r.mean_millis}};
  try {
    j["steps_per_token"] = r.StepSlope();
    j["millis_per_token"] = r.MillisSlope();
  } catch (const std::invalid_argument&) {
    // All sampled outputs had one length; no slope exists.
  }
  out << j.dump(2) << '\n';
  if (!o.out.empty()) WriteFile(o.out, j.dump(2));
  return kExitOk;
}

void AddDecodeFlags(CLI::App* sub, Options& o) {
  sub->add_option("--k", o.k, "Autoregressive beam width")->check(CLI::PositiveNumber);
  sub->add_option("--k1", o.k1, "Top-level intents kept by the proposed NAR")
      ->check(CLI::PositiveNumber);
  sub->add_option("--k2", o.k2, "Frame lengths kept per intent (NAR)")->check(CLI::PositiveNumber);
  sub->add_option("--score", o.score, "Hypothesis scoring method")
      ->check(CLI::IsMember({"s1", "s2", "s3"}));
  sub->add_option("--alpha", o.alpha, "Length-penalty exponent for S3");
  sub->add_option("--ar-alpha", o.ar_alpha, "Length-penalty exponent of the AR beam");
  sub->add_option("--penalty-length", o.penalty_length, "Length used by the penalty")
      ->check(CLI::IsMember({"frame", "source"}));
  sub->add_flag("--drop-invalid", o.drop_invalid, "Remove hypotheses that fail validation");
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"narp: intent-conditioned non-autoregressive semantic parsing"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", NARP_VERSION);

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic corpus as train/dev/test TSV");
  gen->add_option("--spec", o.spec, "Grammar JSON (default: built-in grammar)")
      ->check(CLI::ExistingFile);
  gen->add_option("--seed", o.seed, "Generator seed")->required();
  gen->add_option("--size", o.size, "Number of examples")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", o.out, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model into a run directory");
  train->add_option("--model", o.model, "Model kind")
      ->required()
      ->check(CLI::IsMember({"proposed-nar", "baseline-nar", "ar"}));
  train->add_option("--preset", o.preset, "Model size preset")
      ->check(CLI::IsMember({"desk", "table8-ratio"}));
  train->add_option("--form", o.form, "Target form of the AR model")
      ->check(CLI::IsMember({"span", "index"}));
  train->add_option("--data", o.data, "Directory with train.tsv and dev.tsv, or one TSV")
      ->required()
      ->check(CLI::ExistingPath);
  train->add_option("--seed", o.seed, "Initialization and shuffling seed")->required();
  train->add_option("--out", o.out, "Run directory")->required();
  train->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", o.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--max-steps", o.max_steps, "Stop after this many updates (0: no limit)");
  train->add_option("--dev-limit", o.dev_limit, "Dev examples scored per epoch (0: all)");
  train->add_option("--max-frame-len", o.max_frame_len);
  train->add_option("--lr", o.lr, "Base learning rate");
  train->add_option("--warmup", o.warmup, "Warmup steps");
  train->add_option("--decay-rate", o.decay_rate);
  train->add_option("--decay-interval", o.decay_interval);
  train->add_option("--lambda-len", o.lambda_len);
  train->add_option("--lambda-int", o.lambda_int);
  train->add_option("--epsilon", o.epsilon, "Label smoothing");
  train->add_option("--p-tf", o.p_tf, "Teacher-logit probability");
  train->add_option("--clip-norm", o.clip_norm, "Global gradient-norm clip (0: off)");
  train->add_flag("--strict", o.strict, "Fail on malformed data lines");

  CLI::App* greedy = app.add_subcommand("greedy", "Greedy decoding to JSONL records");
  CLI::App* beam = app.add_subcommand("beam", "Beam decoding to JSONL records");
  CLI::App* oracle = app.add_subcommand("oracle", "Greedy vs oracle exact match");
  CLI::App* bench = app.add_subcommand("bench", "Decoder-pass and latency accounting");
  for (CLI::App* sub : {greedy, beam, oracle, bench}) {
    sub->add_option("--model", o.model, "Run directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--data", o.data, "TSV file, or a directory holding test.tsv")
        ->required()
        ->check(CLI::ExistingPath);
    sub->add_option("--out", o.out, "Output file");
    sub->add_flag("--strict", o.strict, "Fail on malformed data lines");
  }
  AddDecodeFlags(beam, o);
  AddDecodeFlags(bench, o);
  bench->add_option("--mode", o.mode)->check(CLI::IsMember({"greedy", "beam"}));
  bench->add_option("--limit", o.limit, "Examples to time (0: all)");

  CLI::App* eval = app.add_subcommand("eval", "Exact-match and diversity report");
  eval->add_option("--predictions", o.predictions, "JSONL records from greedy or beam")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", o.out, "Report JSON");

  for (CLI::App* sub : app.get_subcommands({})) {
    sub->add_option("--config", o.config, "JSON object of flag defaults")
        ->check(CLI::ExistingFile);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    const auto name = std::find_if(args.begin(), args.end(),
                                   [](const std::string& a) { return !a.starts_with("-"); });
    auto config = std::find(args.begin(), args.end(), "--config");
    if (name != args.end() && config != args.end() && config + 1 != args.end()) {
      CLI::App* sub = app.get_subcommand_ptr(*name).get();
      ApplyConfig(sub, *(config + 1));
    }
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << NARP_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const json manifest = Manifest(sub->get_name(), args, *sub, o.seed);
    if (sub == gen) return RunGen(o, manifest, out);
    if (sub == train) return RunTrain(o, manifest, out, err);
    if (sub == greedy) {
      o.mode = "greedy";
      return RunDecode(o, out, err);
    }
    if (sub == beam) {
      o.mode = "beam";
      return RunDecode(o, out, err);
    }
    if (sub == eval) return RunEval(o, out);
    if (sub == oracle) return RunOracle(o, out, err);
    if (sub == bench) return RunBench(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace narp
