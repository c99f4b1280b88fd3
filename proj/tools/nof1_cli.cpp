// nof1: run the synthetic N-of-1 experiment end to end.
//
//   nof1 run --config cfg.json --seed 2025 --out runs --ablation No_specialist
//   nof1 multi --seeds 10
//   nof1 validate --config cfg.json

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nof1/harness.hpp"
#include "nof1/parallel.hpp"
#include "nof1/textio.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> bootstrap;
  std::string abstention;
  std::string ablation;
  unsigned threads = 0;
  bool save_models = false;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Config file (or defaults) with command-line overrides applied and recorded.
std::optional<nof1::ExperimentConfig> load(const Common& c) {
  const auto v = nof1::validate_config(c.config_path.empty() ? "" : slurp(c.config_path));
  for (const auto& w : v.warnings) std::cerr << "warning: " << w << "\n";
  if (!v.config) {
    for (const auto& e : v.errors) std::cerr << "error: " << e << "\n";
    return std::nullopt;
  }
  nof1::ExperimentConfig cfg = *v.config;
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.overrides.push_back("cli:--seed");
  }
  if (!c.out.empty()) {
    cfg.output_dir = c.out;
    cfg.overrides.push_back("cli:--out");
  }
  if (c.bootstrap) {
    cfg.evaluation.bootstrap = *c.bootstrap;
    cfg.overrides.push_back("cli:--bootstrap");
  }
  if (!c.abstention.empty()) {
    cfg.pipeline.policy.abstention_enabled = c.abstention == "on";
    cfg.overrides.push_back("cli:--abstention");
  }
  if (!c.ablation.empty()) {
    const auto v2 = nof1::parse_variant(c.ablation);
    cfg.ablations = {nof1::Variant::Monolith};
    if (*v2 != nof1::Variant::Monolith) cfg.ablations.push_back(*v2);
    cfg.overrides.push_back("cli:--ablation");
  }
  if (auto errs = nof1::check_config(cfg); !errs.empty()) {
    for (const auto& e : errs) std::cerr << "error: " << e << "\n";
    return std::nullopt;
  }
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config; absent fields take the defaults")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--bootstrap", c.bootstrap, "paired bootstrap resamples (0 skips)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--abstention", c.abstention, "abstention policy")->check(CLI::IsMember({"on", "off"}));
  app->add_option("--ablation", c.ablation,
                  "restrict the ablation table to Monolith plus this variant")
      ->check([](const std::string& s) {
        return nof1::parse_variant(s) ? std::string{}
                                      : "unknown variant (Monolith, Multi_full, No_specialist, "
                                        "No_stacking, Agents_only)";
      });
  app->add_option("--threads", c.threads, "worker threads (0 = all cores); outputs do not depend on it");
  app->add_flag("--save-models", c.save_models, "also write the full forests under models/");
}

void print_headline(const nof1::RunMetrics& m) {
  using nof1::format_number;
  auto line = [](const std::string& what, double mono, double multi) {
    std::cout << "  " << what << ": monolith " << format_number(mono, 4) << ", multi-agent "
              << format_number(multi, 4) << " (delta " << format_number(multi - mono, 3) << ")\n";
  };
  line("overall AUC", m.auc_overall_mono, m.auc_overall_multi);
  line("overall acc", m.acc_overall_mono, m.acc_overall_multi);
  line("tail AUC", m.auc_tail_mono, m.auc_tail_multi);
  line("tail acc", m.acc_tail_mono, m.acc_tail_multi);
  line("cluster D AUC", m.auc_d_mono, m.auc_d_multi);
  if (m.abstained) std::cout << "  abstained: " << m.abstained << " of " << m.test_rows << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic N-of-1 multi-agent decision experiment"};
  app.require_subcommand(1);

  Common run_opts, multi_opts;
  std::string validate_path;
  int n_seeds = 10;

  auto* run = app.add_subcommand("run", "one seeded end-to-end experiment");
  add_common(run, run_opts);
  auto* multi = app.add_subcommand("multi", "replicate over consecutive seeds");
  add_common(multi, multi_opts);
  multi->add_option("--seeds", n_seeds, "number of seeds")->check(CLI::PositiveNumber);
  auto* validate = app.add_subcommand("validate", "check a config file and print the resolved config");
  validate->add_option("--config", validate_path, "JSON config")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto v = nof1::validate_config(slurp(validate_path));
      for (const auto& w : v.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& e : v.errors) std::cerr << "error: " << e << "\n";
      if (!v.config) return 2;
      std::cout << nof1::config_to_json(*v.config).dump(2) << "\n";
      return 0;
    }
    if (*run) {
      nof1::set_thread_count(run_opts.threads);
      auto cfg = load(run_opts);
      if (!cfg) return 2;
      nof1::RunOptions ro;
      ro.save_models = run_opts.save_models;
      const auto r = nof1::run_experiment(*cfg, ro);
      std::cout << "run directory: " << r.run_dir.string() << "\n";
      print_headline(r.metrics);
      return 0;
    }
    if (*multi) {
      nof1::set_thread_count(multi_opts.threads);
      auto cfg = load(multi_opts);
      if (!cfg) return 2;
      nof1::RunOptions ro;
      ro.save_models = multi_opts.save_models;
      const auto r = nof1::run_multi_seed(*cfg, n_seeds, ro);
      std::cout << "output directory: " << r.dir.string() << "\n";
      int failed = 0;
      for (const auto& s : r.seeds) {
        if (s.metrics) continue;
        ++failed;
        std::cerr << "seed " << s.seed << " failed: " << s.error << "\n";
      }
      for (const auto& s : r.summary)
        if (s.metric.rfind("delta_", 0) == 0)
          std::cout << "  " << s.metric << ": median " << nof1::format_number(s.median, 4) << " [IQR "
                    << nof1::format_number(s.q1, 4) << ", " << nof1::format_number(s.q3, 4) << "]\n";
      return failed ? 1 : 0;
    }
  } catch (const nof1::StageError& e) {
    std::cerr << "failed at stage " << e.stage() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
