#include <CLI11.hpp>

#include "perispec/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"peripheral spectral analysis of sub-Markov kernels"};
    app.require_subcommand(1);

    perispec::RunConfig config;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--model", config.model_path, "model JSON file")->required();
        cmd->add_option("--out", config.out_dir, "output directory")->required();
        cmd->add_option("--tol", config.tol, "numerical tolerance");
    };

    CLI::App* decompose = app.add_subcommand("decompose", "peripheral decomposition + error curve");
    add_common(decompose);
    decompose->add_option("--horizon", config.horizon, "alpha curve length (multiples of d)");

    CLI::App* certify = app.add_subcommand("certify", "quasi-compactness certificate");
    add_common(certify);
    certify->add_option("--ek", config.ek, "comma-separated window states");
    certify->add_option("--kind", config.kind,
                        "lyapunov | domination | lazy | lower | density-restricted | "
                        "density-truncated");
    certify->add_flag("--strict", config.strict, "exit 1 when the certificate is invalid");

    CLI::App* qsd = app.add_subcommand("qsd", "quasi-stationary distributions");
    add_common(qsd);
    qsd->add_option("--horizon", config.horizon, "conditioned-evolution horizon");

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo of the absorbed chain");
    add_common(simulate);
    simulate->add_option("--horizon", config.horizon, "path horizon");
    simulate->add_option("--paths", config.paths, "number of paths");
    simulate->add_option("--seed", config.seed, "master seed");

    CLI::App* semigroup = app.add_subcommand("semigroup", "continuous-time decomposition");
    add_common(semigroup);
    semigroup->add_option("--horizon", config.horizon, "time horizon T");

    CLI11_PARSE(app, argc, argv);

    config.command = app.get_subcommands().front()->get_name();
    return perispec::run(config);
}
