// excusum: command-line driver for the exploding-CUSUM toolkit.
//
//   excusum <demo|verify|arl|cadd|tradeoff|simulate> --config cfg.json [--seed N]
//           [--out DIR] [--threads N] [--format csv|json] [--error-json]
//
// Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on errors.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "excusum/cli/commands.hpp"

namespace {

using excusum::cli::CommandOptions;
using excusum::cli::CommandResult;
using excusum::cli::ExperimentConfig;

int report_error(bool as_json, const std::string& kind, const std::string& message, const std::string& path = {}) {
    if (as_json) {
        nlohmann::json err = {{"error", {{"kind", kind}, {"message", message}}}};
        if (!path.empty()) err["error"]["path"] = path;
        std::cout << err.dump() << std::endl;
    } else {
        std::cerr << "error (" << kind << "): " << message << std::endl;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quickest detection of changes to exploding processes"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    unsigned threads = 0;
    std::string format;
    bool error_json = false;

    std::map<std::string, CommandResult (*)(const ExperimentConfig&, const CommandOptions&)> commands{
        {"demo", &excusum::cli::cmd_demo},         {"verify", &excusum::cli::cmd_verify},
        {"arl", &excusum::cli::cmd_arl},           {"cadd", &excusum::cli::cmd_cadd},
        {"tradeoff", &excusum::cli::cmd_tradeoff}, {"simulate", &excusum::cli::cmd_simulate},
    };
    const std::map<std::string, std::string> descriptions{
        {"demo", "simulate the nu = 80 arctangent example and plot the statistic"},
        {"verify", "check the sufficient optimality conditions for the configured model"},
        {"arl", "estimate the mean time to false alarm"},
        {"cadd", "estimate conditional detection delay over a grid of change points"},
        {"tradeoff", "false-alarm / delay tradeoff over a list of gammas"},
        {"simulate", "run the detector over one simulated path"},
    };

    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, descriptions.at(name));
        sub->add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
        sub->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");
        sub->add_option("--format", format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--error-json", error_json, "print errors as a JSON document on stdout");
        subs[name] = sub;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = excusum::cli::load_config(config_path);

        for (const auto& [name, sub] : subs) {
            if (!sub->parsed()) continue;
            CommandOptions opts;
            if (sub->count("--seed")) opts.seed = seed;
            if (!out_dir.empty()) opts.out_dir = out_dir;
            if (!format.empty()) opts.format = format;
            opts.threads = threads;
            const CommandResult result = commands.at(name)(cfg, opts);
            std::cout << result.summary << std::endl;
            for (const auto& f : result.files) std::cout << "  wrote " << f.string() << std::endl;
            return result.exit_code;
        }
    } catch (const excusum::ConfigError& e) {
        return report_error(error_json, "config", e.what(), e.path());
    } catch (const excusum::cli::IoError& e) {
        return report_error(error_json, "io", e.what());
    } catch (const excusum::NumericError& e) {
        return report_error(error_json, "numeric", e.what());
    } catch (const excusum::EstimationError& e) {
        return report_error(error_json, "estimation", e.what());
    } catch (const excusum::DomainError& e) {
        return report_error(error_json, "domain", e.what());
    } catch (const std::exception& e) {
        return report_error(error_json, "internal", e.what());
    }
    return 2;
}
