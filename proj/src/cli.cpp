#include "recown/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "recown/checkpoint.hpp"
#include "recown/config.hpp"
#include "recown/error.hpp"
#include "recown/evaluation.hpp"
#include "recown/training.hpp"

namespace recown::cli {

namespace {

using json = nlohmann::json;

struct Flags {
  std::string config_file;
  std::string preset;
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::string quantile;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  bool has_seed = false;
  bool has_horizon = false;
};

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig c;
  c.command = command;
  apply_preset(c, f.preset.empty() ? "small" : f.preset);
  // a --preset flag replaces the file's preset line; the file's other keys still apply
  if (!f.config_file.empty()) apply_config_file(c, f.config_file, f.preset.empty());
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.checkpoint.empty()) c.checkpoint = f.checkpoint;
  if (!f.out.empty()) c.out = f.out;
  if (!f.quantile.empty()) set_config_value(c, "quantile", f.quantile);
  if (f.has_seed) c.seed = f.seed;
  if (f.has_horizon) c.horizon = f.horizon;
  c.propagate();
  c.validate();
  return c;
}

void ensure_out(const RunConfig& c) { std::filesystem::create_directories(c.out); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << std::setprecision(17);
  return f;
}

void check_shapes(const RunConfig& c, const Recown& m) {
  const SrnnConfig& a = c.model.srnn;
  const SrnnConfig& b = m.config.srnn;
  if (a.context_len != b.context_len || a.forecast_len != b.forecast_len) {
    throw DimensionError("dataset windows (context " + std::to_string(a.context_len) + ", forecast " +
                         std::to_string(a.forecast_len) + ") do not match the checkpoint (context " +
                         std::to_string(b.context_len) + ", forecast " + std::to_string(b.forecast_len) + ")");
  }
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  ensure_out(c);
  const Dataset ds = load_dataset(c);
  auto f = open_out(c.out / "dataset.csv");
  f << "split,id,flagged,t,value\n";
  auto dump = [&](const char* split, const std::vector<WindowPair>& pairs) {
    for (const auto& p : pairs) {
      const long tc = static_cast<long>(p.context.size());
      for (std::size_t t = 0; t < p.context.size(); ++t) {
        f << split << ',' << p.id << ',' << p.flagged << ',' << static_cast<long>(t) - tc << ',' << p.context[t] << '\n';
      }
      for (std::size_t t = 0; t < p.target.size(); ++t) {
        f << split << ',' << p.id << ',' << p.flagged << ',' << t << ',' << p.target[t] << '\n';
      }
    }
  };
  dump("train", ds.train);
  dump("validation", ds.validation);
  dump("test", ds.test);
  out << "wrote " << (c.out / "dataset.csv").string() << " (" << ds.train.size() << " train, "
      << ds.validation.size() << " validation, " << ds.test.size() << " test sequences)\n";
  return kExitOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  ensure_out(c);
  const Dataset ds = load_dataset(c);
  auto log = open_out(c.out / "train_log.jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(ds, c.model, c.train, &log);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint(r.model, c.checkpoint_path());
  auto stats = open_out(c.out / "train_likelihood.json");
  stats << json{{"ll_min", r.model.likelihood.ll_min},
                {"ll_max", r.model.likelihood.ll_max},
                {"lr_max", r.model.likelihood.lr_max()}}
               .dump(2)
        << '\n';
  out << "trained " << c.train.epochs << " epochs in " << std::fixed << std::setprecision(1) << secs
      << " s; val mse " << std::setprecision(5) << r.epochs.front().val_mse << " -> "
      << r.epochs[r.best_epoch].val_mse << " (best epoch " << r.best_epoch << ")\n"
      << "checkpoint " << c.checkpoint_path().string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  ensure_out(c);
  Recown m = load_checkpoint(c.checkpoint_path());
  check_shapes(c, m);
  Dataset ds = load_dataset(c);
  renormalize(ds, m.norm);
  if (ds.test.size() < 2) throw InputError("evaluation needs at least two test sequences");
  std::vector<std::vector<double>> contexts;
  for (const auto& p : ds.test) contexts.push_back(p.context);
  const std::vector<Prediction> preds = predict(m, contexts);
  std::vector<ForecastRecord> records(ds.test.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].id = ds.test[i].id;
    records[i].flagged = ds.test[i].flagged;
    records[i].se = mse_loss(preds[i].series, ds.test[i].target);
    records[i].cwll = preds[i].cwll;
  }
  const double ce = correlation_error(records);
  const double random_ce = random_baseline(records, c.seed);
  std::vector<double> sp;
  for (const auto& r : records) sp.push_back(r.s_pred);
  const double expected = random_baseline_expectation(sp);
  json summary = {{"sequences", records.size()},
                  {"mean_ce", ce},
                  {"random_ce", random_ce},
                  {"random_ce_expected", expected}};
  for (double q : c.quantiles) {
    const RiskSelection r = risk_selection(records, q, c.worst_fraction);
    summary["risk_selection"].push_back({{"quantile", q},
                                         {"worst_fraction", c.worst_fraction},
                                         {"selected", r.selected},
                                         {"worst", r.worst},
                                         {"captured", r.captured},
                                         {"coverage", r.coverage},
                                         {"random_coverage", r.expected_random}});
  }
  {
    auto f = open_out(c.out / "records.csv");
    write_records(f, records);
  }
  {
    // sequences in test order with smoothed columns for plotting
    std::vector<double> se, ll;
    for (const auto& r : records) {
      se.push_back(r.se);
      ll.push_back(r.cwll);
    }
    const auto se_s = moving_average(se, c.smooth);
    const auto ll_s = moving_average(ll, c.smooth);
    auto f = open_out(c.out / "records_plot.csv");
    f << "id,se,cwll,se_smoothed,cwll_smoothed\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      f << records[i].id << ',' << se[i] << ',' << ll[i] << ',' << se_s[i] << ',' << ll_s[i] << '\n';
    }
  }
  {
    auto f = open_out(c.out / "summary.json");
    f << summary.dump(2) << '\n';
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_forecast(RunConfig c, std::ostream& out) {
  ensure_out(c);
  Recown m = load_checkpoint(c.checkpoint_path());
  check_shapes(c, m);
  if (!m.likelihood.valid) throw ContractError("checkpoint carries no training likelihood statistics");
  const std::size_t horizon = c.horizon ? c.horizon : m.config.srnn.forecast_len;
  c.synth.forecast_len = horizon;
  c.csv.forecast_len = horizon;
  Dataset ds = load_dataset(c);
  renormalize(ds, m.norm);
  if (ds.test.empty()) throw InputError("no test sequences long enough for the requested horizon");
  const std::size_t count = std::min(c.forecast_count, ds.test.size());
  auto f = open_out(c.out / "forecast.csv");
  f << "seq,t,observed,pred,llrs,lower,upper\n";
  double within = 0.0, beyond = 0.0;
  std::size_t n_within = 0, n_beyond = 0;
  for (std::size_t s = 0; s < count; ++s) {
    const WindowPair& p = ds.test[s];
    const UncertainForecast fc = forecast_with_uncertainty(m, p.context, horizon, c.band_scale, c.conditioning);
    const long tc = static_cast<long>(p.context.size());
    for (std::size_t t = 0; t < p.context.size(); ++t) {
      f << p.id << ',' << static_cast<long>(t) - tc << ',' << p.context[t] << ",,,,\n";
    }
    for (std::size_t t = 0; t < horizon; ++t) {
      f << p.id << ',' << t << ',' << p.target[t] << ',' << fc.series[t] << ',' << fc.llrs[t] << ','
        << fc.band.lower[t] << ',' << fc.band.upper[t] << '\n';
      if (t < m.config.srnn.forecast_len) {
        within += fc.llrs[t];
        ++n_within;
      } else {
        beyond += fc.llrs[t];
        ++n_beyond;
      }
    }
  }
  json summary = {{"sequences", count}, {"horizon", horizon}, {"mean_llrs_within", within / static_cast<double>(n_within)}};
  if (n_beyond) summary["mean_llrs_beyond"] = beyond / static_cast<double>(n_beyond);
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_inspect(const RunConfig& c, std::ostream& out) {
  out << checkpoint_manifest(c.checkpoint_path()) << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral forecasting with conditional Whittle likelihoods", "recown"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_file, "key = value configuration file");
    sub->add_option("--preset", flags.preset, "model size preset")->check(CLI::IsMember(preset_names()));
    sub->add_option("--seed", flags.seed, "random seed")->each([&](const std::string&) { flags.has_seed = true; });
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--dataset", flags.dataset, "synth:<kind> or csv:<path>");
    sub->add_option("--set", flags.sets, "extra key=value override (repeatable)");
  };
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* eval_cmd = app.add_subcommand("evaluate", "correlation error and risk selection on the test split");
  auto* fc_cmd = app.add_subcommand("forecast", "long-horizon forecast with LLRS band");
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  auto* inspect_cmd = app.add_subcommand("inspect", "print checkpoint metadata");
  for (auto* sub : {train_cmd, eval_cmd, fc_cmd, synth_cmd, inspect_cmd}) add_common(sub);
  for (auto* sub : {train_cmd, eval_cmd, fc_cmd, inspect_cmd}) {
    sub->add_option("--checkpoint", flags.checkpoint, "checkpoint file (default <out>/model.ckpt)");
  }
  eval_cmd->add_option("--quantile", flags.quantile, "comma separated risk-selection fractions");
  fc_cmd->add_option("--horizon", flags.horizon, "forecast steps, a multiple of the hop")
      ->each([&](const std::string&) { flags.has_horizon = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "recown: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    std::string command;
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    const RunConfig config = resolve(command, flags);
    if (command == "train") return cmd_train(config, out);
    if (command == "evaluate") return cmd_evaluate(config, out);
    if (command == "forecast") return cmd_forecast(config, out);
    if (command == "synth") return cmd_synth(config, out);
    return cmd_inspect(config, out);
  } catch (const ConfigError& e) {
    err << "recown: configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "recown: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace recown::cli
