#include "ccf/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ccf/checkpoint.hpp"
#include "ccf/data.hpp"
#include "ccf/evaluation.hpp"
#include "ccf/trainer.hpp"

namespace ccf::cli {

namespace {

enum class FileKind { Dyadic, Sessions };

FileKind sniff(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto tabs = std::count(line.begin(), line.end(), '\t');
    if (tabs == 1) {
      return FileKind::Dyadic;
    }
    if (tabs == 2) {
      return FileKind::Sessions;
    }
    throw DataError(path.filename().string() + ": first record has " + std::to_string(tabs) +
                    " tabs; expected 1 (dyadic) or 2 (sessions)");
  }
  throw DataError(path.filename().string() + ": no records");
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    out.push_back(tok);
  }
  return out;
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

// key=value config overlay: values fill any option the command line left
// untouched, so flags take precedence over the file and the file over
// built-in defaults.
void apply_config_overlay(CLI::App* cmd, const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) {
    throw ConfigError("cannot open config file '" + config_path + "'");
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') {
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(config_path + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + text + "'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw ConfigError(config_path + ":" + std::to_string(line_no) + ": bad key");
    }
    CLI::Option* opt = cmd->get_option_no_throw((key.size() == 1 ? "-" : "--") + key);
    if (opt == nullptr) {
      throw ConfigError(config_path + ":" + std::to_string(line_no) + ": unknown key '" + key +
                        "' for subcommand '" + cmd->get_name() + "'");
    }
    if (opt->count() > 0) {
      continue;  // command line wins
    }
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError&) {
      throw ConfigError(config_path + ":" + std::to_string(line_no) + ": bad value '" + value +
                        "' for " + key);
    }
  }
}

void require_value(const std::string& value, const char* flag) {
  if (value.empty()) {
    throw ConfigError(std::string(flag) + " is required");
  }
}

void require_input_file(const std::string& path, const char* flag) {
  require_value(path, flag);
  if (!std::filesystem::exists(path)) {
    throw ConfigError(std::string(flag) + ": file does not exist: " + path);
  }
}

struct SimulateArgs {
  std::string input;
  std::string out;
  std::string config;
  int neg_samples = 9;
  std::uint64_t seed = 42;
};

struct SynthArgs {
  std::string out;
  std::string truth_out;
  std::string config;
  int dim = 5;
  int users = 100;
  int items = 50;
  int sessions_per_user = 10;
  int offer_size = 10;
  bool thresholds = false;
  std::optional<double> factor_sigma;
  std::uint64_t seed = 42;
};

struct TrainArgs {
  std::string input;
  std::string out;
  std::string config_file;
  std::string loss = "softmax";
  TrainConfig config;
};

struct EvaluateArgs {
  std::string model;
  std::string input;
  std::string exclude_train;
  std::string out;
  std::string config;
  std::string hist_out;
  std::string hist_transform = "sigmoid";
  int n = 5;
  bool n_given = false;
  bool online = false;
  int histogram = 0;
  int hist_samples = 10000;
  std::uint64_t seed = 42;
};

struct PredictArgs {
  std::string model;
  std::string user;
  std::string items;
  std::string config;
  bool all_items = false;
  int n = 5;
};

struct SplitArgs {
  std::string input;
  std::string ratios = "0.8,0.1,0.1";
  std::string out_prefix;
  std::string config;
  std::uint64_t seed = 42;
};

int run_simulate(const SimulateArgs& args) {
  require_input_file(args.input, "--input");
  require_value(args.out, "--out");
  const DyadicDataset dyads = parse_dyadic(args.input);
  const SessionDataset sessions = simulate_contexts(dyads, args.neg_samples, args.seed);
  write_sessions(args.out, sessions);
  std::cout << "sessions\t" << sessions.size() << '\n'
            << "users\t" << sessions.users.size() << '\n'
            << "items\t" << sessions.items.size() << '\n';
  return 0;
}

int run_synth(const SynthArgs& args) {
  require_value(args.out, "--out");
  SynthConfig config;
  config.dim = args.dim;
  config.n_users = args.users;
  config.n_items = args.items;
  config.sessions_per_user = args.sessions_per_user;
  config.offer_size = args.offer_size;
  config.thresholds = args.thresholds;
  config.factor_sigma = args.factor_sigma;
  config.seed = args.seed;
  const auto [truth, sessions] = synth_generate(config);
  write_sessions(args.out, sessions);
  if (!args.truth_out.empty()) {
    save_checkpoint(args.truth_out, truth.store);
  }
  std::cout << "sessions\t" << sessions.size() << '\n'
            << "users\t" << sessions.users.size() << '\n'
            << "items\t" << sessions.items.size() << '\n';
  return 0;
}

int run_train(TrainArgs& args) {
  require_input_file(args.input, "--input");
  require_value(args.out, "--out");
  args.config.loss = [&] {
    LossKind kind = LossKind::parse(args.loss);
    kind.tradeoff_c = args.config.loss.tradeoff_c;
    kind.smooth_slope = args.config.loss.smooth_slope;
    return kind;
  }();
  const FileKind kind = sniff(args.input);

  TrainResult result;
  if (args.config.loss.session_based()) {
    if (kind != FileKind::Sessions) {
      throw WrongLossError("loss '" + args.loss +
                           "' needs session data; simulate contexts from dyadic data first");
    }
    const SessionDataset dataset = parse_sessions(args.input);
    result = args.config.shards > 1 ? sharded_train(dataset, args.config)
                                    : train(dataset, args.config);
  } else {
    const DyadicDataset dataset = kind == FileKind::Sessions
                                      ? extract_positive_dyads(parse_sessions(args.input))
                                      : parse_dyadic(args.input);
    result = args.config.shards > 1 ? sharded_train(dataset, args.config)
                                    : train(dataset, args.config);
  }
  for (std::size_t e = 0; e < result.report.objectives.size(); ++e) {
    std::cout << "epoch\t" << e << "\tlr\t" << fmt_real(args.config.lr_at(static_cast<int>(e)))
              << "\tobjective\t" << fmt_real(result.report.objectives[e]) << '\n';
  }
  save_checkpoint(args.out, result.store);
  std::cout << "checkpoint\t" << args.out << '\n';
  return 0;
}

// Per-user positive items of either file kind.
UserItemSets positives_by_user(const std::filesystem::path& path) {
  UserItemSets truth;
  if (sniff(path) == FileKind::Dyadic) {
    for (const auto& dyad : parse_dyadic(path).records) {
      truth[dyad.user].insert(dyad.item);
    }
  } else {
    for (const auto& session : parse_sessions(path).records) {
      for (const auto& item : session.decision_set) {
        truth[session.user].insert(item);
      }
    }
  }
  return truth;
}

void emit_report(const std::vector<std::pair<std::string, std::string>>& fields,
                 const std::string& out_path) {
  for (const auto& [key, value] : fields) {
    std::cout << key << '\t' << value << '\n';
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) {
      throw DataError("cannot write report '" + out_path + "'");
    }
    for (const auto& [key, value] : fields) {
      out << key << '=' << value << '\n';
    }
  }
}

int run_evaluate(const EvaluateArgs& args) {
  require_input_file(args.model, "--model");
  require_input_file(args.input, "--input");
  const ParameterStore store = load_checkpoint(args.model);
  std::vector<std::pair<std::string, std::string>> fields;

  if (args.online) {
    if (sniff(args.input) != FileKind::Sessions) {
      throw WrongLossError("--online needs session data");
    }
    const SessionDataset sessions = parse_sessions(args.input);
    fields.emplace_back("accuracy", fmt_real(online_accuracy(store, sessions)));
    fields.emplace_back("sessions", std::to_string(sessions.size()));
  } else {
    int n = args.n;
    if (!args.n_given && sniff(args.input) == FileKind::Sessions) {
      const SessionDataset sessions = parse_sessions(args.input);
      const bool all_four = std::all_of(sessions.records.begin(), sessions.records.end(),
                                        [](const Session& s) { return s.offer_set.size() == 4; });
      if (!sessions.empty() && all_four) {
        n = 4;
      }
    }
    const UserItemSets truth = positives_by_user(args.input);
    UserItemSets excluded;
    if (!args.exclude_train.empty()) {
      require_input_file(args.exclude_train, "--exclude-train");
      excluded = positives_by_user(args.exclude_train);
    }
    const EvalReport report =
        offline_report(store, truth, n, args.exclude_train.empty() ? nullptr : &excluded);
    const std::string at = "@" + std::to_string(n);
    fields.emplace_back("ap" + at, fmt_real(report.ap));
    fields.emplace_back("ar" + at, fmt_real(report.ar));
    fields.emplace_back("ndcg" + at, fmt_real(report.ndcg));
    fields.emplace_back("users_evaluated", std::to_string(report.users_evaluated));
    fields.emplace_back("users_skipped", std::to_string(report.users_skipped));
  }

  if (args.histogram > 0) {
    if (args.hist_out.empty()) {
      throw ConfigError("--histogram needs --hist-out");
    }
    const std::vector<EntityId> users(store.users().begin(), store.users().end());
    const std::vector<EntityId> items(store.items().begin(), store.items().end());
    Rng rng(Rng::mix(args.seed, 0xC0FFEE));
    std::vector<std::pair<EntityId, EntityId>> dyads;
    dyads.reserve(args.hist_samples);
    for (int j = 0; j < args.hist_samples; ++j) {
      dyads.emplace_back(users[rng.index(users.size())], items[rng.index(items.size())]);
    }
    const ScoreTransform transform =
        args.hist_transform == "raw" ? ScoreTransform::Raw : ScoreTransform::Sigmoid;
    const Histogram hist = score_histogram(store, dyads, transform, args.histogram);
    std::ofstream out(args.hist_out);
    if (!out) {
      throw DataError("cannot write histogram '" + args.hist_out + "'");
    }
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
      out << fmt_real(hist.lower_bounds[b]) << ',' << hist.counts[b] << '\n';
    }
  }

  emit_report(fields, args.out);
  return 0;
}

int run_predict(const PredictArgs& args) {
  require_input_file(args.model, "--model");
  require_value(args.user, "--user");
  const ParameterStore store = load_checkpoint(args.model);
  std::vector<EntityId> candidates;
  if (args.all_items) {
    candidates.assign(store.items().begin(), store.items().end());
  } else {
    for (auto& token : split_commas(args.items)) {
      candidates.push_back(token);
    }
  }
  if (candidates.empty()) {
    throw ConfigError("predict: give --items or --all-items");
  }
  for (const auto& item : rank_top_n(store, args.user, candidates, args.n)) {
    std::cout << item << '\t' << fmt_real(store.utility(args.user, item)) << '\n';
  }
  return 0;
}

int run_split(const SplitArgs& args) {
  require_input_file(args.input, "--input");
  require_value(args.out_prefix, "--out-prefix");
  const auto parts = split_commas(args.ratios);
  if (parts.size() != 3) {
    throw ConfigError("--ratios wants three comma-separated values");
  }
  std::array<double, 3> ratios{};
  for (int p = 0; p < 3; ++p) {
    try {
      ratios[p] = std::stod(parts[p]);
    } catch (const std::exception&) {
      throw ConfigError("--ratios: bad number '" + parts[p] + "'");
    }
  }
  static const char* kSuffix[3] = {".train.tsv", ".valid.tsv", ".test.tsv"};
  if (sniff(args.input) == FileKind::Sessions) {
    const auto pieces = split(parse_sessions(args.input), ratios, args.seed);
    for (int p = 0; p < 3; ++p) {
      write_sessions(args.out_prefix + kSuffix[p], pieces[p]);
      std::cout << kSuffix[p] + 1 << '\t' << pieces[p].size() << '\n';
    }
  } else {
    const auto pieces = split(parse_dyadic(args.input), ratios, args.seed);
    for (int p = 0; p < 3; ++p) {
      write_dyadic(args.out_prefix + kSuffix[p], pieces[p]);
      std::cout << kSuffix[p] + 1 << '\t' << pieces[p].size() << '\n';
    }
  }
  return 0;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"ccf: session-based recommender learning"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "build pseudo offer sets from dyadic data");
  sim_cmd->add_option("--input", sim.input, "dyadic file");
  sim_cmd->add_option("--neg-samples", sim.neg_samples, "pseudo non-choices per dyad")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "session file to write");
  sim_cmd->add_option("--config", sim.config, "key=value defaults");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a ground-truth logit world");
  synth_cmd->add_option("--dim", synth.dim)->capture_default_str();
  synth_cmd->add_option("--users", synth.users)->capture_default_str();
  synth_cmd->add_option("--items", synth.items)->capture_default_str();
  synth_cmd->add_option("--sessions-per-user", synth.sessions_per_user)->capture_default_str();
  synth_cmd->add_option("--offer-size", synth.offer_size)->capture_default_str();
  synth_cmd->add_flag("--thresholds", synth.thresholds, "sample no-response outcomes too");
  synth_cmd->add_option("--factor-sigma", synth.factor_sigma,
                        "per-component stddev of true factors");
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "session file to write");
  synth_cmd->add_option("--truth-out", synth.truth_out, "checkpoint of the true factors");
  synth_cmd->add_option("--config", synth.config, "key=value defaults");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "fit a model with SGD");
  train_cmd->add_option("--input", tr.input, "session or dyadic file");
  train_cmd->add_option("--loss", tr.loss, "softmax|hinge|softmax-ext|hinge-ext|l2|logistic")
      ->capture_default_str();
  train_cmd->add_option("--dim", tr.config.dim)->capture_default_str();
  train_cmd->add_option("--reg-user", tr.config.reg_user)->capture_default_str();
  train_cmd->add_option("--reg-item", tr.config.reg_item)->capture_default_str();
  train_cmd->add_option("--lr", tr.config.lr0)->capture_default_str();
  train_cmd->add_option("--anneal", tr.config.anneal)->capture_default_str();
  train_cmd->add_option("--epochs", tr.config.epochs)->capture_default_str();
  train_cmd->add_option("--shards", tr.config.shards)->capture_default_str();
  train_cmd->add_option("--hash-bits", tr.config.hash_bits, "hashed parameter table size");
  train_cmd->add_option("--seed", tr.config.seed)->capture_default_str();
  train_cmd->add_option("--init-scale", tr.config.init_scale)->capture_default_str();
  train_cmd->add_option("--tradeoff-c", tr.config.loss.tradeoff_c,
                        "non-response slack weight (hinge-ext)")
      ->capture_default_str();
  train_cmd->add_option("--smooth-slope", tr.config.loss.smooth_slope)->capture_default_str();
  train_cmd->add_option("--out", tr.out, "checkpoint to write");
  train_cmd->add_option("--config", tr.config_file, "key=value defaults");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "offline top-k or online click prediction");
  eval_cmd->add_option("--model", ev.model, "checkpoint");
  eval_cmd->add_option("--input", ev.input, "test data");
  auto* n_opt = eval_cmd->add_option("-n", ev.n, "ranking cutoff")->capture_default_str();
  eval_cmd->add_flag("--online", ev.online, "predict the clicked offer instead of ranking");
  eval_cmd->add_option("--exclude-train", ev.exclude_train,
                       "training file whose positives leave the candidate set");
  eval_cmd->add_option("--histogram", ev.histogram, "bucket count for a score histogram");
  eval_cmd->add_option("--hist-transform", ev.hist_transform, "sigmoid|raw")
      ->capture_default_str();
  eval_cmd->add_option("--hist-samples", ev.hist_samples)->capture_default_str();
  eval_cmd->add_option("--hist-out", ev.hist_out, "histogram CSV path");
  eval_cmd->add_option("--seed", ev.seed, "histogram sampling seed")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "report file (key=value lines)");
  eval_cmd->add_option("--config", ev.config, "key=value defaults");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "rank candidates for one user");
  predict_cmd->add_option("--model", pr.model);
  predict_cmd->add_option("--user", pr.user);
  predict_cmd->add_option("--items", pr.items, "comma-separated candidates");
  predict_cmd->add_flag("--all-items", pr.all_items, "rank the whole item universe");
  predict_cmd->add_option("-n", pr.n)->capture_default_str();
  predict_cmd->add_option("--config", pr.config, "key=value defaults");

  SplitArgs sp;
  auto* split_cmd = app.add_subcommand("split", "three-way record split");
  split_cmd->add_option("--input", sp.input);
  split_cmd->add_option("--ratios", sp.ratios, "train,valid,test")->capture_default_str();
  split_cmd->add_option("--seed", sp.seed)->capture_default_str();
  split_cmd->add_option("--out-prefix", sp.out_prefix);
  split_cmd->add_option("--config", sp.config, "key=value defaults");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    const std::vector<std::pair<CLI::App*, std::string*>> overlays{
        {sim_cmd, &sim.config},       {synth_cmd, &synth.config}, {train_cmd, &tr.config_file},
        {eval_cmd, &ev.config},       {predict_cmd, &pr.config},  {split_cmd, &sp.config},
    };
    for (const auto& [cmd, config_path] : overlays) {
      if (cmd->parsed() && !config_path->empty()) {
        apply_config_overlay(cmd, *config_path);
      }
    }
    ev.n_given = n_opt->count() > 0;

    if (sim_cmd->parsed()) return run_simulate(sim);
    if (synth_cmd->parsed()) return run_synth(synth);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_evaluate(ev);
    if (predict_cmd->parsed()) return run_predict(pr);
    if (split_cmd->parsed()) return run_split(sp);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const WrongLossError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;  // no subcommand
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int j = 1; j < argc; ++j) {
    args.emplace_back(argv[j]);
  }
  return run(std::move(args));
}

}  // namespace ccf::cli
