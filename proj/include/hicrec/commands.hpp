#pragma once

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "hicrec/config.hpp"
#include "hicrec/errors.hpp"
#include "hicrec/eval.hpp"
#include "hicrec/model.hpp"
#include "hicrec/params.hpp"
#include "hicrec/pipeline.hpp"
#include "hicrec/sweep.hpp"
#include "hicrec/synthetic.hpp"
#include "hicrec/training.hpp"

namespace hicrec {

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::string> model;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> kind;
};

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_data = 2, exit_numeric = 3 };

/// Exit code for an exception escaping a command.
inline int exit_code_for(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return exit_config;
  } catch (const NumericError&) {
    return exit_numeric;
  } catch (const std::exception&) {
    return exit_data;
  }
}

inline RunConfig resolve_config(const CommandOptions& opt) {
  RunConfig c = load_run_config(opt.config);
  if (opt.model) c.model.kind = parse_model_kind(*opt.model);
  if (opt.seed) c.set_seed(*opt.seed);
  return c;
}

inline std::filesystem::path run_dir(const RunConfig& c) { return c.output_dir / to_string(c.model.kind); }

namespace command_detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

inline HicRecModel make_model(const RunConfig& c, const PreparedData& data) {
  std::vector<const Aspect*> aspects;
  if (c.model.kind != ModelKind::mf_bpr) aspects = data.aspect_ptrs();
  return HicRecModel(c.model, aspects, data.split.num_users, data.split.num_items);
}

/// Rejects a checkpoint whose tensors do not match the model layout.
inline void check_layout(const ParamStore& expected, const ParamStore& got, const std::filesystem::path& path) {
  if (expected.size() != got.size()) {
    throw ConfigError(path.string() + ": checkpoint has " + std::to_string(got.size()) + " tensors, model expects " +
                      std::to_string(expected.size()) + " (wrong --model or config?)");
  }
  auto a = expected.begin();
  for (auto b = got.begin(); b != got.end(); ++a, ++b) {
    if (a->name != b->name || a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols()) {
      throw ConfigError(path.string() + ": tensor '" + b->name + "' does not match model tensor '" + a->name + "'");
    }
  }
}

}  // namespace command_detail

inline int cmd_prepare(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const RunConfig c = resolve_config(opt);
  const PreparedData d = prepare(c, err);
  out << "dataset " << d.hash.substr(0, 16) << (d.cache_hit ? " (cache hit)" : " (built)") << '\n';
  out << "users " << d.split.num_users << ", items " << d.split.num_items << ", train pairs " << d.split.train_pairs.size()
      << ", test users " << d.split.test_pairs.size() << ", skipped users " << d.split.skipped_users << '\n';
  for (const auto& a : d.aspects) {
    out << "aspect " << a.name << ": " << a.user_path.text << " nnz " << a.user_adj.nnz() << ", " << a.item_path.text
        << " nnz " << a.item_adj.nnz() << '\n';
  }
  return exit_ok;
}

inline int cmd_train(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const RunConfig c = resolve_config(opt);
  const PreparedData d = load_prepared(c);
  const HicRecModel model = command_detail::make_model(c, d);
  const auto dir = run_dir(c);
  FitOptions fo;
  fo.protocol = c.eval;
  fo.checkpoint_dir = dir;
  fo.on_epoch = [&err](const EpochRecord& r) {
    err << "epoch " << r.epoch << " loss " << r.loss;
    if (r.hr10) err << " val HR@10 " << format_metric(*r.hr10);
    err << '\n';
  };
  const FitResult fr = fit(model, d.split, c.train, fo);

  std::ostringstream log;
  write_train_log_csv(fr.log, log);
  command_detail::write_text(dir / "train_log.csv", log.str());

  std::ostringstream manifest;
  write_run_config(c, manifest);
  manifest << "\n[run]\n";
  manifest << "command = \"train\"\n";
  manifest << "model = " << toml_quote(to_string(c.model.kind)) << "\n";
  manifest << "parameter_count = " << fr.params.parameter_count() << "\n";
  manifest << "best_epoch = " << fr.best_epoch << "\n";
  command_detail::write_text(dir / "manifest.toml", manifest.str());

  out << to_string(c.model.kind) << ": " << fr.log.epochs.size() << " epochs, final loss "
      << (fr.log.epochs.empty() ? 0.0 : fr.log.epochs.back().loss) << ", best epoch " << fr.best_epoch << ", "
      << fr.params.parameter_count() << " parameters\n";
  out << "checkpoint " << (dir / "ckpt-best.bin").string() << '\n';
  return exit_ok;
}

inline int cmd_evaluate(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& = std::cerr) {
  const RunConfig c = resolve_config(opt);
  const PreparedData d = load_prepared(c);
  const HicRecModel model = command_detail::make_model(c, d);
  const auto dir = run_dir(c);
  const auto path = opt.checkpoint.value_or(dir / "ckpt-best.bin");
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("checkpoint not found: " + path.string() + " (run `hicrec train` or pass --checkpoint)");
  }
  const ParamStore params = load_checkpoint(path);
  command_detail::check_layout(model.init_params(c.seed), params, path);
  const RankingReport report = evaluate_model(model, params, d.split, c.eval);

  std::ostringstream csv;
  write_report_csv(report, csv);
  command_detail::write_text(dir / "report.csv", csv.str());
  print_report_table(report, out);
  return exit_ok;
}

inline int cmd_sweep(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const RunConfig c = resolve_config(opt);
  const SweepKind kind = parse_sweep_kind(opt.kind.value_or("aspects"));
  const PreparedData d = load_prepared(c);
  const auto aspects = d.aspect_ptrs();
  const auto grid = kind == SweepKind::aspects ? aspect_grid(aspects, c.sweep.base_aspect, c.model)
                                               : dimension_grid(aspects, c.sweep.dimensions, c.model);
  const auto rows = run_sweep(grid, d.split, c.train, c.eval, &err);
  std::ostringstream csv;
  write_sweep_csv(rows, csv);
  const auto path = c.output_dir / ("sweep-" + to_string(kind) + ".csv");
  command_detail::write_text(path, csv.str());
  out << csv.str();
  return exit_ok;
}

inline int cmd_gen_synthetic(const CommandOptions& opt, std::ostream& out = std::cout, std::ostream& = std::cerr) {
  RunConfig c = resolve_config(opt);
  if (c.edges.empty() || c.interactions.empty()) {
    throw ConfigError("gen-synthetic writes to data.edges and data.interactions; both are required");
  }
  SyntheticConfig s = c.synthetic.value_or(SyntheticConfig{});
  s.seed = c.seed;
  const SyntheticData data = generate_synthetic(s);
  write_synthetic(data, c.edges, c.interactions);
  out << "wrote " << data.interactions.size() << " interactions for " << s.users << " users and " << s.items
      << " items to " << c.interactions.string() << '\n';
  return exit_ok;
}

/// Runs a named subcommand, reporting errors on `err` and returning the exit code.
inline int run_command(const std::string& name, const CommandOptions& opt, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  try {
    if (name == "prepare") return cmd_prepare(opt, out, err);
    if (name == "train") return cmd_train(opt, out, err);
    if (name == "evaluate") return cmd_evaluate(opt, out, err);
    if (name == "sweep") return cmd_sweep(opt, out, err);
    if (name == "gen-synthetic") return cmd_gen_synthetic(opt, out, err);
    throw ConfigError("unknown command '" + name + "'");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(std::current_exception());
  }
}

}  // namespace hicrec
