// Experiment driver: run one policy, sweep the suite, or resume from
// checkpoints. Exit codes name the error class so scripts can branch.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "leadq/config.hpp"
#include "leadq/errors.hpp"
#include "leadq/experiment.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string policy;
  std::vector<uint64_t> seeds;
  std::string out;
  std::vector<std::string> sets;
};

leadq::ExperimentConfig build_config(const CliOptions& opt) {
  leadq::ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = leadq::parse_config_file(opt.config_path);
  }
  for (const std::string& kv : opt.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw leadq::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    leadq::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opt.policy.empty()) cfg.policy = leadq::policy_from_string(opt.policy);
  if (!opt.seeds.empty()) cfg.seeds = opt.seeds;
  if (!opt.out.empty()) cfg.out_dir = opt.out;
  return cfg;
}

void print_results(const std::vector<leadq::SeedRunResult>& results,
                   const std::string& out_dir) {
  for (const auto& r : results) {
    std::cout << "seed " << r.seed << ": rounds=" << r.rounds_done;
    if (!r.records.empty()) {
      const auto& last = r.records.back();
      std::cout << " final_test_acc=" << last.test_accuracy
                << " labels=" << last.labels_total;
    }
    if (!r.completed) {
      std::cout << (r.stopped_on_request ? " [stopped]" : " [partial]");
    }
    std::cout << "\n";
  }
  std::cout << "outputs: " << out_dir << "\n";
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Stream-based federated active learning simulator"};
  app.require_subcommand(1);

  CliOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "key=value config file");
    sub->add_option("--seed", opt.seeds, "seed list override");
    sub->add_option("--out", opt.out, "output directory override");
    sub->add_option("--set", opt.sets, "config override key=value")
        ->take_all();
  };

  CLI::App* run = app.add_subcommand("run", "run one policy");
  add_common(run);
  run->add_option("--policy", opt.policy,
                  "random|uncertainty|coreset-local|coreset-global|warmup|"
                  "leadq");

  CLI::App* sweep =
      app.add_subcommand("sweep", "run the policy suite on shared seeds");
  add_common(sweep);

  std::string resume_dir;
  CLI::App* resume = app.add_subcommand("resume", "continue from checkpoints");
  resume->add_option("dir", resume_dir, "output directory of the interrupted run")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    auto cfg = build_config(opt);
    auto results = leadq::run_experiment(cfg);
    print_results(results, cfg.out_dir);
  } else if (sweep->parsed()) {
    auto cfg = build_config(opt);
    leadq::run_sweep(cfg);
    std::cout << "outputs: " << cfg.out_dir << "\n";
  } else if (resume->parsed()) {
    auto results = leadq::resume_experiment(resume_dir);
    print_results(results, resume_dir);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const leadq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const leadq::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const leadq::PartitionError& e) {
    std::cerr << "partition error: " << e.what() << "\n";
    return 4;
  } catch (const leadq::BudgetError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return 5;
  } catch (const leadq::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 6;
  } catch (const leadq::AuditViolation& e) {
    std::cerr << "audit violation: " << e.what() << "\n";
    return 7;
  } catch (const leadq::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 8;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
