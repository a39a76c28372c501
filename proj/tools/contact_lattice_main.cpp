#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "contact/harness.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
    using namespace contact;

    CLI::App app{
        "contact-lattice: simulate and analyze 3-state contact processes on "
        "2-D lattices"};
    app.require_subcommand(1);

    std::string run_spec, run_out;
    std::uint64_t run_seed = 0;
    CLI::App* run = app.add_subcommand("run", "Run the experiment a JSON spec describes");
    run->add_option("spec", run_spec, "Path to the experiment spec (JSON)")->required();
    CLI::Option* seed_opt =
        run->add_option("--seed", run_seed, "Override the spec's master seed");
    CLI::Option* out_opt =
        run->add_option("--out", run_out, "Override the spec's output directory");

    std::string val_spec;
    CLI::App* val =
        app.add_subcommand("validate", "Parse a spec and report whether it is valid");
    val->add_option("spec", val_spec, "Path to the experiment spec (JSON)")->required();

    app.add_subcommand("oracle-check",
                       "Run the exact-solver invariant battery on small lattices");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) {
            ExperimentSpec spec;
            try {
                spec = load_spec(run_spec);
            } catch (const std::invalid_argument& e) {
                const json err = {{"valid", false}, {"error", e.what()}};
                std::cout << err.dump(2) << "\n";
                return 1;
            }
            if (*seed_opt) spec.master_seed = run_seed;
            if (*out_opt) spec.out_dir = run_out;
            for (const std::string& w : spec.warnings)
                std::cerr << "warning: " << w << "\n";
            const RunOutcome out = run_experiment(spec);
            if (!out.message.empty()) std::cout << out.message << "\n";
            for (const std::string& f : out.files) std::cout << "wrote " << f << "\n";
            if (out.exit_code == 2) std::cerr << "run failed\n";
            return out.exit_code;
        }
        if (val->parsed()) {
            try {
                const ExperimentSpec spec = load_spec(val_spec);
                const json ok = {{"valid", true},
                                 {"spec_hash", spec_hash(spec)},
                                 {"experiment", experiment_name(spec.experiment)},
                                 {"warnings", spec.warnings}};
                std::cout << ok.dump(2) << "\n";
                return 0;
            } catch (const std::invalid_argument& e) {
                const json err = {{"valid", false}, {"error", e.what()}};
                std::cout << err.dump(2) << "\n";
                return 1;
            }
        }
        std::vector<std::string> lines;
        const bool ok = oracle_check_battery(lines);
        for (const std::string& l : lines) std::cout << l << "\n";
        std::cout << (ok ? "all checks passed" : "FAILURES detected") << "\n";
        return ok ? 0 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
