// fatigue_cli: generate, encode, train, eval, stream-infer, bench-gap-fc.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fatigue/fatigue.hpp"

using namespace fatigue;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::size_t env_threads() {
  const char* v = std::getenv("FATIGUE_SEQ_THREADS");
  if (!v || !*v) return 1;
  try {
    const long n = std::stol(v);
    return n > 0 ? static_cast<std::size_t>(n) : 1;
  } catch (...) {
    return 1;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_report(const Report& r, const std::string& path) {
  if (path.empty() || path == "-") {
    r.write(std::cout);
  } else {
    auto os = open_out(path);
    r.write(os);
  }
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  double duration = 600.0;
  double fps = 30.0;
  double prior = ScenarioConfig{}.fatigue_prior;
  std::uint64_t seed = 1;
  bool features = false;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  ScenarioConfig cfg;
  cfg.duration = a.duration;
  cfg.fps = a.fps;
  cfg.fatigue_prior = a.prior;
  cfg.seed = a.seed;
  cfg.validate();
  const auto data = generate_scenario(cfg);
  std::vector<StreamRecord> recs;
  recs.reserve(data.frames.size());
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    StreamRecord r{data.frames[i], true, std::nullopt};
    if (a.features) r.features = data.features[i];
    recs.push_back(std::move(r));
  }
  auto os = open_out(a.out);
  write_stream(os, recs);
  std::size_t fatigue_frames = 0;
  for (int l : data.labels) fatigue_frames += static_cast<std::size_t>(l);
  std::cerr << "wrote " << recs.size() << " frames (" << fatigue_frames << " fatigue) to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EncodeArgs {
  std::vector<std::string> inputs;
  std::size_t window = 150;
  std::size_t skip = 0;
  std::size_t stride = kDefaultStride;
  double threshold = kDefaultLabelThreshold;
  double fps = 30.0;
  std::string out;
};

int run_encode(const EncodeArgs& a) {
  Dataset d;
  d.header = {a.window, a.skip, a.stride, a.fps};
  std::size_t fatigue = 0;
  for (std::size_t s = 0; s < a.inputs.size(); ++s) {
    auto is = open_in(a.inputs[s]);
    const auto recs = read_stream(is);
    std::vector<FatigueFeatureVector> feats;
    std::vector<int> labels;
    feats.reserve(recs.size());
    for (const auto& r : recs) {
      if (!r.frame.label) throw FormatError(a.inputs[s] + ": every record needs a label to build a dataset");
      feats.push_back(record_features(r));
      labels.push_back(*r.frame.label);
    }
    auto slid = slide_dataset(feats, labels, {a.window, a.skip, a.stride, a.threshold});
    if (!slid.warning.empty()) std::cerr << "warning: " << a.inputs[s] << ": " << slid.warning << '\n';
    for (auto& smp : slid.samples) {
      fatigue += static_cast<std::size_t>(smp.label);
      d.samples.push_back(std::move(smp));
      d.stream.push_back(s);
    }
  }
  auto os = open_out(a.out);
  write_dataset(os, d);
  std::cerr << "wrote " << d.samples.size() << " samples (" << fatigue << " fatigue, "
            << d.samples.size() - fatigue << " normal), " << d.header.cols() << " columns each\n";
  return 0;
}

// ---------------------------------------------------------------------------

// Held-out tail: the last streams when the dataset spans several, otherwise
// the last samples with overlapping training windows purged.
void split_tail(const Dataset& d, double test_fraction, std::vector<SequenceSample>& train_set,
                std::vector<SequenceSample>& test_set) {
  const std::size_t n = d.samples.size();
  std::size_t n_streams = 0;
  for (auto s : d.stream) n_streams = std::max(n_streams, s + 1);
  if (n_streams >= 2) {
    auto held = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n_streams)));
    held = std::clamp<std::size_t>(held, 1, n_streams - 1);
    for (std::size_t i = 0; i < n; ++i) {
      (d.stream[i] >= n_streams - held ? test_set : train_set).push_back(d.samples[i]);
    }
    return;
  }
  auto held = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n)));
  held = std::clamp<std::size_t>(held, 1, n - 1);
  const std::size_t first_test = n - held;
  const std::size_t test_start = d.samples[first_test].start;
  for (std::size_t i = 0; i < first_test; ++i) {
    if (d.samples[i].start + d.samples[i].window_len <= test_start) train_set.push_back(d.samples[i]);
  }
  test_set.assign(d.samples.begin() + static_cast<std::ptrdiff_t>(first_test), d.samples.end());
}

void add_eval(Report& r, const std::string& prefix, const EvalResult& e) {
  r.add(prefix + "samples", e.total);
  r.add(prefix + "accuracy", e.accuracy());
  r.add(prefix + "true_positive", e.true_positive);
  r.add(prefix + "true_negative", e.true_negative);
  r.add(prefix + "false_positive", e.false_positive);
  r.add(prefix + "false_negative", e.false_negative);
  r.add(prefix + "mean_loss", e.mean_loss);
}

struct TrainArgs {
  std::string input;
  std::size_t epochs = 30;
  double lr = 0.05;
  std::size_t hidden = kDefaultHidden;
  std::size_t batch = 32;
  std::uint64_t seed = 1;
  double test_fraction = 0.2;
  double threshold = kDecisionThreshold;
  std::string checkpoint;
  std::string out;
};

int run_train(const TrainArgs& a) {
  auto is = open_in(a.input);
  const Dataset d = read_dataset(is);
  if (d.samples.size() < 2) throw InputError("dataset needs at least 2 samples to train and evaluate");
  std::vector<SequenceSample> train_set, test_set;
  split_tail(d, a.test_fraction, train_set, test_set);

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.hidden_size = a.hidden;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.threads = env_threads();
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train(train_set, cfg);
  const double train_time = seconds_since(t0);
  const auto eval = evaluate(result.model, test_set, a.threshold);

  if (!a.checkpoint.empty()) {
    auto os = open_out(a.checkpoint);
    write_checkpoint(os, result.model);
  }
  Report r;
  r.add("command", std::string("train"));
  r.add("dataset", a.input);
  r.add("window", d.header.window_len);
  r.add("skip", d.header.skip);
  r.add("stride", d.header.stride);
  r.add("columns", d.header.cols());
  r.add("epochs", a.epochs);
  r.add("learning_rate", a.lr);
  r.add("momentum", cfg.momentum);
  r.add("batch_size", a.batch);
  r.add("hidden", a.hidden);
  r.add("seed", static_cast<std::size_t>(a.seed));
  r.add("decision_threshold", a.threshold);
  r.add("train_samples", result.train_samples);
  r.add("validation_samples", result.validation_samples);
  r.add("best_epoch", result.best_epoch);
  std::size_t pos = 0;
  for (const auto& s : train_set) pos += static_cast<std::size_t>(s.label);
  r.add("train_fatigue_samples", pos);
  r.add("train_normal_samples", train_set.size() - pos);
  add_eval(r, "test_", eval);
  for (const auto& h : result.history) {
    const std::string e = "epoch_" + std::to_string(h.epoch) + "_";
    r.add(e + "train_loss", h.train_loss);
    r.add(e + "validation_loss", h.validation_loss);
    r.add(e + "validation_accuracy", h.validation_accuracy);
  }
  r.add("time_train_seconds", train_time);
  write_report(r, a.out);
  std::cerr << "test accuracy " << eval.accuracy() << " on " << eval.total << " held-out samples\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string input;
  std::string checkpoint;
  double threshold = kDecisionThreshold;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  auto cis = open_in(a.checkpoint);
  const auto model = read_checkpoint(cis);
  auto dis = open_in(a.input);
  const auto d = read_dataset(dis);
  const auto eval = evaluate(model, d.samples, a.threshold);
  Report r;
  r.add("command", std::string("eval"));
  r.add("dataset", a.input);
  r.add("checkpoint", a.checkpoint);
  r.add("decision_threshold", a.threshold);
  add_eval(r, "", eval);
  write_report(r, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct StreamArgs {
  std::string input;
  std::string checkpoint;
  std::size_t window = 150;
  std::size_t skip = 0;
  double threshold = kDecisionThreshold;
  std::string out;
};

int run_stream(const StreamArgs& a) {
  auto cis = open_in(a.checkpoint);
  StreamInferer inf(read_checkpoint(cis), a.window, a.skip);
  auto is = open_in(a.input);
  const auto recs = read_stream(is);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!a.out.empty() && a.out != "-") {
    file = open_out(a.out);
    os = &file;
  }
  *os << "t,probability,fatigue\n";
  std::size_t emitted = 0;
  for (const auto& r : recs) {
    const auto p = inf.push(record_features(r));
    if (!p) continue;
    ++emitted;
    *os << format_double(r.frame.timestamp) << ',' << format_double(*p) << ',' << (*p >= a.threshold ? 1 : 0)
        << '\n';
  }
  if (emitted == 0) std::cerr << "warning: stream shorter than the window; no probabilities emitted\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::size_t height = 3, width = 3, channels = 32, units = 128;
  std::size_t iterations = 10000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_bench(const BenchArgs& a) {
  HeadConfig cfg{{a.height, a.width, a.channels}, a.units};
  const auto cmp = compare_heads(cfg);
  std::mt19937_64 rng(a.seed);
  FeatureMap<double> input(cfg.feature_map, glorot_uniform<double>(cfg.feature_map.size(), 1, 1, rng));
  const std::size_t flat = cfg.feature_map.size();
  auto fc = FullyConnected<double>::glorot(flat, a.units, rng);
  auto dense = FullyConnected<double>::glorot(a.channels, a.units, rng);

  // Accumulate outputs so the loops cannot be optimized away.
  double sink = 0.0;
  auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < a.iterations; ++i) sink += fc.forward(input.data())[i % a.units];
  const double fc_time = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < a.iterations; ++i) {
    sink += dense.forward(global_average_pool(input))[i % a.units];
  }
  const double gap_time = seconds_since(t0);

  const auto gap_path = cmp.gap_path();
  auto ratio = [](std::size_t num, std::size_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  Report r;
  r.add("command", std::string("bench-gap-fc"));
  r.add("feature_map", std::to_string(a.height) + "x" + std::to_string(a.width) + "x" + std::to_string(a.channels));
  r.add("units", a.units);
  r.add("fc_head_params", cmp.fc_head.param_count);
  r.add("fc_head_flops", cmp.fc_head.flop_count);
  r.add("gap_params", cmp.gap.param_count);
  r.add("gap_flops", cmp.gap.flop_count);
  r.add("gap_dense_params", cmp.gap_dense.param_count);
  r.add("gap_dense_flops", cmp.gap_dense.flop_count);
  r.add("gap_path_params", gap_path.param_count);
  r.add("gap_path_flops", gap_path.flop_count);
  r.add("param_ratio_gap_path_over_fc", ratio(gap_path.param_count, cmp.fc_head.param_count));
  r.add("flop_ratio_gap_path_over_fc", ratio(gap_path.flop_count, cmp.fc_head.flop_count));
  r.add("iterations", a.iterations);
  r.add("time_fc_forward_seconds", fc_time);
  r.add("time_gap_path_forward_seconds", gap_time);
  r.add("time_ratio_gap_path_over_fc", fc_time > 0 ? gap_time / fc_time : 0.0);
  write_report(r, a.out);
  if (sink == 42.4242) std::cerr << "";  // keeps sink observable
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driver fatigue sequence pipeline"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Render a synthetic labeled landmark stream (JSONL)");
  g->add_option("--duration", gen.duration, "Seconds of video")->check(CLI::PositiveNumber);
  g->add_option("--fps", gen.fps, "Frames per second")->check(CLI::Range(1.0, 1000.0));
  g->add_option("--prior", gen.prior, "Fraction of time in fatigue episodes")->check(CLI::Range(0.0, 0.99));
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_flag("--features", gen.features, "Also store the per-frame feature vector");
  g->add_option("--out,-o", gen.out, "Output stream path")->required();

  EncodeArgs enc;
  auto* e = app.add_subcommand("encode", "Slide windows over streams into a dataset CSV");
  e->add_option("--in,-i", enc.inputs, "Input stream(s)")->required()->expected(1, -1);
  e->add_option("--window,-N", enc.window, "Window length in frames")->check(CLI::PositiveNumber);
  e->add_option("--skip,-k", enc.skip, "Frames skipped between retained frames")->check(CLI::NonNegativeNumber);
  e->add_option("--stride", enc.stride, "Frames between window starts")->check(CLI::PositiveNumber);
  e->add_option("--threshold", enc.threshold, "Fatigue share needed to label a window")->check(CLI::Range(0.0, 1.0));
  e->add_option("--fps", enc.fps, "Frame rate recorded in the header")->check(CLI::Range(1.0, 1000.0));
  e->add_option("--out,-o", enc.out, "Output dataset path")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train on a dataset and evaluate on a held-out tail");
  t->add_option("--in,-i", tr.input, "Dataset CSV")->required();
  t->add_option("--epochs", tr.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  t->add_option("--lr", tr.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  t->add_option("--hidden", tr.hidden, "LSTM hidden size")->check(CLI::PositiveNumber);
  t->add_option("--batch", tr.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.seed, "Random seed");
  t->add_option("--test-fraction", tr.test_fraction, "Held-out share")->check(CLI::Range(0.01, 0.99));
  t->add_option("--threshold", tr.threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));
  t->add_option("--checkpoint", tr.checkpoint, "Checkpoint output path");
  t->add_option("--out,-o", tr.out, "Report CSV path (default stdout)");

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  v->add_option("--in,-i", ev.input, "Dataset CSV")->required();
  v->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  v->add_option("--threshold", ev.threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));
  v->add_option("--out,-o", ev.out, "Report CSV path (default stdout)");

  StreamArgs st;
  auto* s = app.add_subcommand("stream-infer", "Score a stream frame by frame");
  s->add_option("--in,-i", st.input, "Input stream")->required();
  s->add_option("--checkpoint", st.checkpoint, "Checkpoint path")->required();
  s->add_option("--window,-N", st.window, "Window length in frames")->check(CLI::PositiveNumber);
  s->add_option("--skip,-k", st.skip, "Frames skipped between retained frames")->check(CLI::NonNegativeNumber);
  s->add_option("--threshold", st.threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));
  s->add_option("--out,-o", st.out, "Output CSV path (default stdout)");

  BenchArgs be;
  auto* b = app.add_subcommand("bench-gap-fc", "Compare a flattened FC head with a GAP head");
  b->add_option("--height", be.height, "Feature map height")->check(CLI::PositiveNumber);
  b->add_option("--width", be.width, "Feature map width")->check(CLI::PositiveNumber);
  b->add_option("--channels", be.channels, "Feature map channels")->check(CLI::PositiveNumber);
  b->add_option("--units", be.units, "Head output units")->check(CLI::PositiveNumber);
  b->add_option("--iterations", be.iterations, "Timed forward passes")->check(CLI::Range(std::size_t{10000}, std::size_t{100000000}));
  b->add_option("--seed", be.seed, "Random seed");
  b->add_option("--out,-o", be.out, "Report CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return run_generate(gen);
    if (*e) return run_encode(enc);
    if (*t) return run_train(tr);
    if (*v) return run_eval(ev);
    if (*s) return run_stream(st);
    if (*b) return run_bench(be);
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const StateError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
