#include <CLI11.hpp>

#include <hessian_lab/runner.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <utility>

using namespace hessian_lab;

int main(int argc, char** argv)
{
    CLI::App app{"hessian-lab: solver and estimate lab for Hessian-type equations on flat tori"};
    app.require_subcommand(1, 1);
    std::string config, out;
    std::uint64_t seed = 0;
    int threads = 1;
    const std::pair<const char*, const char*> subcommands[] = {
        {"solve", "solve for (phi, b), with a convergence study when convergence.sizes is set"},
        {"verify-conditions", "sample the operator conditions on random symmetric matrices"},
        {"experiment", "run the experiment named in experiment.name"},
    };
    for (const auto& [name, help] : subcommands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "run configuration (.json or .yaml)")->required();
        sub->add_option("--out", out, "output directory (default: output key of the config)");
        sub->add_option("--seed", seed, "seed for the mt19937_64 generator");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const auto cfg = RunConfig::load(config);
        RunOptions opts{out.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(out), seed, threads};
        const auto report = run_command(command, cfg, opts);
        for (const auto& r : report.results) std::cout << r.name << ": " << (r.pass ? "pass" : "FAIL") << "\n";
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "report: " << (opts.out / "report.json").string() << "\n";
        return exit_code(report);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NonConvergence& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 2;
    } catch (const ConeViolation& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 2;
    } catch (const EstimateViolation& e) {
        std::cerr << "estimate violated: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
