#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pelab/cli.hpp"

int main(int argc, char** argv) {
    using namespace pelab::cli;
    CLI::App app{"pelab: finite-difference laboratory for radial diffusion and strongly coupled systems"};
    app.require_subcommand(1);

    Options opt;
    std::string out = opt.out.string();
    std::uint64_t seed = 0;
    app.add_option("--out", out, "output directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "override the seed of the initial data or suite");
    app.add_option("--threads", opt.threads, "worker threads for sweeps (0 = all)")->capture_default_str();

    std::string path;
    auto* run = app.add_subcommand("run", "integrate one config and write snapshots");
    run->add_option("config", path, "run config (JSON)")->required();

    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("suite", path, "suite file (JSON)")->required();

    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    sweep->add_option("sweep", path, "sweep file (JSON)")->required();

    std::string potential;
    double r_max = 1.0;
    auto* entropy = app.add_subcommand("entropy", "certify a potential and tabulate its entropy");
    entropy->add_option("potential", potential, "built-in id or potential table (JSON)")->required();
    entropy->add_option("--r-max", r_max, "certification range")->capture_default_str();

    auto* report = app.add_subcommand("report", "summarise manifests below a directory");
    report->add_option("dir", path, "directory to scan")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }
    opt.out = out;
    if (*seed_opt) opt.seed = seed;

    if (*run) return cmd_run(path, opt, std::cout, std::cerr);
    if (*verify) return cmd_verify(path, opt, std::cout, std::cerr);
    if (*sweep) return cmd_sweep(path, opt, std::cout, std::cerr);
    if (*entropy) return cmd_entropy(potential, r_max, opt, std::cout, std::cerr);
    if (*report) return cmd_report(path, opt, std::cout, std::cerr);
    return kUsage;
}
