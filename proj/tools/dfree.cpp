// dfree: generate data, train, evaluate and report disturbance-free
// mobile-manipulation agents.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dfree/app/commands.hpp"
#include "dfree/checks/gradcheck_suite.hpp"
#include "dfree/errors.hpp"

namespace fs = std::filesystem;
using namespace dfree;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

app::RunConfig load(const Common& c) {
  app::RunConfig cfg = app::load_run_config(c.config);
  app::apply_env_overrides(cfg);
  // Flags beat the environment.
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void add_common(CLI::App* sub, Common& c, bool with_seed) {
  sub->add_option("--config", c.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
  if (with_seed) sub->add_option("--seed", c.seed, "train/evaluate this seed only");
  sub->add_option("--out", c.out, "output root (overrides output_dir)");
}

int run_gradcheck(std::uint64_t seed) {
  int failed = 0;
  auto show = [&](const checks::GradcheckCase& c) {
    std::printf("%-4s %-32s max_rel_err %.3e  tol %.0e  (%zu coords)\n", c.passed() ? "ok" : "FAIL", c.name.c_str(),
                c.result.max_relative_error, c.tolerance, c.result.coordinates);
    if (!c.passed()) {
      ++failed;
      std::printf("     worst %s[%lld]: analytic %.9g numeric %.9g\n", c.result.worst_param.c_str(),
                  static_cast<long long>(c.result.worst_index), c.result.analytic, c.result.numeric);
    }
  };
  for (const auto& c : checks::primitive_gradchecks(seed)) show(c);
  show(checks::composite_gradcheck(seed, "disturb"));
  show(checks::composite_gradcheck(seed, "invdyn"));
  std::printf("%s\n", failed ? "gradcheck: FAILED" : "gradcheck: all passed");
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"dfree: disturbance-free mobile manipulation experiments"};
  cli.require_subcommand(1);

  Common gen_c;
  auto* gen = cli.add_subcommand("gen-data", "generate (or reuse) the dataset of a config");
  add_common(gen, gen_c, false);

  Common train_c;
  std::string resume;
  auto* train = cli.add_subcommand("train", "train every configured seed (or --seed)");
  add_common(train, train_c, true);
  train->add_option("--resume", resume, "continue from a checkpoint's .state.json sidecar")->check(CLI::ExistingFile);

  Common eval_c;
  std::string checkpoint;
  std::string split_s = "val";
  auto* ev = cli.add_subcommand("eval", "greedy evaluation on a split");
  add_common(ev, eval_c, true);
  ev->add_option("--checkpoint", checkpoint, "checkpoint file (default: final.json of each seed)");
  ev->add_option("--split", split_s, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  std::vector<std::string> report_dirs;
  std::string report_split = "val";
  std::string report_out;
  auto* rep = cli.add_subcommand("report", "merge evaluations into mean/IQM rows");
  rep->add_option("dirs", report_dirs, "run, seed or eval directories")->required();
  rep->add_option("--split", report_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  rep->add_option("--out", report_out, "also write the merged report JSON here");

  std::uint64_t gc_seed = 0;
  auto* gc = cli.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gc->add_option("--seed", gc_seed, "seed for the random inputs");

  Common trace_c;
  std::string trace_ckpt;
  std::string trace_split = "val";
  int trace_episode = 0;
  std::string trace_file;
  auto* tr = cli.add_subcommand("trace", "JSONL step trace of one greedy episode");
  add_common(tr, trace_c, false);
  tr->add_option("--checkpoint", trace_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  tr->add_option("--split", trace_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  tr->add_option("--episode", trace_episode, "episode index within the split");
  tr->add_option("--file", trace_file, "write here instead of stdout");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*gen) {
      const auto cfg = load(gen_c);
      std::cout << app::gen_data(cfg).string() << "\n";
    } else if (*train) {
      const auto cfg = load(train_c);
      if (!resume.empty() && cfg.seeds.size() != 1) throw ConfigError("--resume needs exactly one seed (use --seed)");
      for (auto seed : cfg.seeds) {
        std::cerr << "training seed " << seed << " -> " << app::seed_dir(cfg, seed).string() << "\n";
        const auto r = app::train_seed(cfg, seed, &std::cerr, resume);
        std::cout << r.final_checkpoint.string() << "\n";
        if (r.aborted_updates) std::cerr << r.aborted_updates << " updates rolled back (non-finite loss)\n";
      }
    } else if (*ev) {
      const auto cfg = load(eval_c);
      const auto split = sim::parse_split(split_s);
      std::vector<fs::path> ckpts;
      if (!checkpoint.empty()) {
        ckpts.push_back(checkpoint);
      } else {
        for (auto seed : cfg.seeds) ckpts.push_back(app::seed_dir(cfg, seed) / "final.json");
      }
      for (const auto& c : ckpts) {
        const auto out = app::eval_checkpoint(cfg, c, split);
        std::printf("%s  SR %.1f  SRwoD %.1f  episodes %d  -> %s\n", c.string().c_str(), 100.0 * out.report.sr_mean,
                    100.0 * out.report.srwod_mean, out.report.seeds.front().episodes, out.dir.string().c_str());
      }
    } else if (*rep) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      const auto merged = app::merge_reports(dirs, sim::parse_split(report_split));
      std::cout << app::format_table(merged.rows);
      if (!report_out.empty()) {
        std::ofstream os(report_out);
        os << merged.json.dump(2) << "\n";
        if (!os) throw IOFailure("cannot write " + report_out);
      }
    } else if (*gc) {
      return run_gradcheck(gc_seed);
    } else if (*tr) {
      const auto cfg = load(trace_c);
      const auto split = sim::parse_split(trace_split);
      if (trace_file.empty()) {
        app::trace_episode(cfg, trace_ckpt, split, trace_episode, std::cout);
      } else {
        std::ofstream os(trace_file);
        app::trace_episode(cfg, trace_ckpt, split, trace_episode, os);
        if (!os) throw IOFailure("cannot write " + trace_file);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
