#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qtrain/config.hpp"
#include "qtrain/errors.hpp"
#include "qtrain/trainer.hpp"
#include "qtrain/verify.hpp"

namespace {

std::vector<std::string> build_overrides(const std::vector<std::string>& sets,
                                         const std::string& data_dir, const std::string& seed,
                                         const std::string& output_dir) {
    std::vector<std::string> overrides = sets;
    if (!data_dir.empty())
        overrides.push_back("dataset.data_dir=\"" + data_dir + "\"");
    if (!seed.empty())
        overrides.push_back("run.seed=" + seed);
    if (!output_dir.empty())
        overrides.push_back("run.output_dir=\"" + output_dir + "\"");
    return overrides;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    const qtrain::TrainConfig cfg = qtrain::parse_config_file(config_path, overrides);
    const qtrain::RunSummary summary = qtrain::run_experiment(cfg);
    std::cout << "done: steps=" << summary.steps << " loss=" << summary.final_loss
              << " train_acc=" << summary.final_train_acc;
    if (summary.final_test_acc)
        std::cout << " test_acc=" << *summary.final_test_acc;
    std::cout << " wall_ms=" << summary.wall_ms << "\n"
              << "metrics: " << summary.metrics_path << "\n"
              << "checkpoint: " << summary.checkpoint_path << std::endl;
    return 0;
}

int cmd_count_params(const std::string& config_path, const std::vector<std::string>& overrides) {
    const qtrain::TrainConfig cfg = qtrain::parse_config_file(config_path, overrides);
    qtrain::TrainState state = qtrain::init_train_state(cfg);
    const qtrain::ParamBreakdown b = qtrain::count_trainable_params(state);

    // Cross-check the closed forms against the enumerated entries.
    const std::size_t enumerated = qtrain::collect_theta_params(state.theta).size() +
                                   qtrain::collect_mapping_params(state.mapping).size();
    if (enumerated != b.total)
        throw qtrain::ConfigError("parameter accounting mismatch: counted " +
                                  std::to_string(b.total) + ", enumerated " +
                                  std::to_string(enumerated));

    std::printf("%-12s %12s\n", "component", "params");
    std::printf("%-12s %12zu\n", "theta", b.theta);
    std::printf("%-12s %12zu\n", "mapping", b.mapping);
    std::printf("%-12s %12zu\n", "total", b.total);
    std::printf("%-12s %12zu\n", "target (m)", b.m);
    std::printf("%-12s %12.6f\n", "ratio", b.ratio);
    std::printf("count-params theta=%zu mapping=%zu total=%zu m=%zu ratio=%.6f\n", b.theta,
                b.mapping, b.total, b.m, b.ratio);
    return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, int trials, bool inject_failure) {
    qtrain::SuiteOptions options;
    options.seed = seed;
    options.trials = trials;
    options.inject_failure = inject_failure;
    const auto results = qtrain::run_verify_suite(suite, options);
    for (const auto& r : results) {
        std::printf("[%s] %s: max dev %.3g (tol %.3g)%s%s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.max_dev, r.tolerance, r.detail.empty() ? "" : " — ",
                    r.detail.c_str());
    }
    const bool ok = qtrain::all_passed(results);
    std::printf("%zu checks, %s\n", results.size(), ok ? "all passed" : "FAILURES present");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum-Train with a tensor-network mapping model and distributed ansatz"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string data_dir, seed_override, output_dir;

    auto add_config_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file (JSON)")->required();
        cmd->add_option("--set", sets, "override a config key, e.g. --set run.seed=42");
        cmd->add_option("--data-dir", data_dir, "override dataset.data_dir");
        cmd->add_option("--seed", seed_override, "override run.seed");
        cmd->add_option("--output-dir", output_dir, "override run.output_dir");
    };

    CLI::App* train = app.add_subcommand("train", "run an experiment and emit metrics/checkpoint");
    add_config_flags(train);

    CLI::App* count = app.add_subcommand("count-params", "print the trainable parameter breakdown");
    add_config_flags(count);

    std::string suite = "all";
    std::uint64_t verify_seed = 0;
    int trials = 0;
    bool inject_failure = false;
    CLI::App* verify = app.add_subcommand("verify", "run property suites");
    verify->add_option("--suite", suite, "gradients | distributed | mps-oracle | all");
    verify->add_option("--seed", verify_seed, "suite RNG seed");
    verify->add_option("--trials", trials, "override per-check trial counts");
    verify->add_flag("--inject-failure", inject_failure,
                     "corrupt one comparison to exercise failure reporting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, build_overrides(sets, data_dir, seed_override, output_dir));
        if (count->parsed())
            return cmd_count_params(config_path,
                                    build_overrides(sets, data_dir, seed_override, output_dir));
        return cmd_verify(suite, verify_seed, trials, inject_failure);
    } catch (const qtrain::DivergenceError& err) {
        std::cerr << "error: " << err.what() << std::endl;
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << std::endl;
        return 2;
    }
}
