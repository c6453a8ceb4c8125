#include "perispec/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "perispec/io.hpp"

namespace perispec {

namespace {

using nlohmann::json;

std::vector<int> parse_ek(const std::string& list) {
    std::vector<int> out;
    if (list.empty()) return out;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) throw error("cli: empty entry in --ek list");
        size_t pos = 0;
        int v;
        try {
            v = std::stoi(tok, &pos);
        } catch (const std::exception&) {
            throw error("cli: --ek entry '" + tok + "' is not an integer");
        }
        if (pos != tok.size()) throw error("cli: --ek entry '" + tok + "' is not an integer");
        out.push_back(v);
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cli: cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw error("cli: short write on '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_file(path, j.dump(2) + "\n");
}

std::filesystem::path prepare_out(const RunConfig& config) {
    if (config.out_dir.empty()) throw error("cli: --out directory is required");
    std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

const AbsorbedModel& absorbed_of(const LoadedModel& loaded, const char* cmd) {
    if (!std::holds_alternative<AbsorbedModel>(loaded.payload))
        throw error(std::string("cli: ") + cmd +
                    " expects an absorbed-chain model; generators go through 'semigroup'");
    return std::get<AbsorbedModel>(loaded.payload);
}

std::string law_csv(const Kernel& p, const Eigen::VectorXd& mu0, int horizon,
                    json& diagnostics) {
    std::string csv = "n,state,mass,survival\n";
    for (int n = 0; n <= horizon; ++n) {
        ConditionedLaw law;
        try {
            law = conditioned_law(mu0, p, n);
        } catch (const error& e) {
            diagnostics["extinct_at"] = n;
            diagnostics["note"] = e.what();
            break;
        }
        for (Eigen::Index s = 0; s < law.masses.size(); ++s)
            csv += std::to_string(n) + "," + std::to_string(s) + "," +
                   format_double(law.masses[s]) + "," + format_double(law.survival) + "\n";
    }
    return csv;
}

int cmd_decompose(const RunConfig& config) {
    LoadedModel loaded = load_model(config.model_path);
    Kernel p = compile(absorbed_of(loaded, "decompose"));
    if (config.horizon < 1) throw error("cli: --horizon must be >= 1");
    PeripheralDecomposition dec = peel_decomposition(p);
    verify_decomposition(p, dec, config.horizon);

    std::filesystem::path dir = prepare_out(config);
    json report;
    report["decomposition"] = decomposition_to_json(dec);
    report["norm"] = weighted_norm(p);
    report["totally_irreducible"] = is_totally_irreducible(p);
    report["second_modulus_ratio"] = second_modulus_ratio(p);
    write_json(dir / "decomposition.json", report);

    std::string csv = "n,k,alpha\n";
    for (const AlphaEntry& e : dec.alpha)
        csv += std::to_string(e.n) + "," + std::to_string(e.k) + "," +
               format_double(e.alpha) + "\n";
    write_file(dir / "alpha.csv", csv);
    return 0;
}

int cmd_certify(const RunConfig& config) {
    LoadedModel loaded = load_model(config.model_path);
    const AbsorbedModel& model = absorbed_of(loaded, "certify");
    Kernel p = compile(model);
    std::vector<int> ek = parse_ek(config.ek);
    const Eigen::Index n = p.size();

    std::string kind = config.kind.empty() ? "lyapunov" : config.kind;
    Certificate cert;
    if (kind == "lyapunov" || kind == "domination") {
        // window rows of P as the compact part
        Eigen::MatrixXd k_entries = Eigen::MatrixXd::Zero(n, n);
        for (int x : ek) {
            if (x < 0 || x >= n)
                throw error("cli: --ek state " + std::to_string(x) + " out of range");
            k_entries.row(x) = p.entries().row(x);
        }
        Kernel k(p.space(), k_entries);
        if (kind == "lyapunov") {
            cert = lyapunov_certificate(p, ek, k);
        } else {
            Kernel s(p.space(), p.entries() - k_entries);
            cert = check_domination(p, k, s);
        }
    } else if (kind == "lazy") {
        if (!std::holds_alternative<LazyChain>(model.variant))
            throw error("cli: --kind lazy needs a lazy_chain model");
        if (loaded.mu.size() == 0)
            throw error("cli: --kind lazy needs the 'mu' and 'a' fields in the model file");
        cert = lazy_chain_certificate(std::get<LazyChain>(model.variant), loaded.mu, loaded.a);
    } else if (kind == "lower") {
        cert = spectral_lower_bound(p, Eigen::VectorXd::Ones(n));
    } else if (kind == "density-restricted" || kind == "density-truncated") {
        if (!std::holds_alternative<DensityModel>(model.variant))
            throw error("cli: density certificates need a density model");
        const DensityModel& dm = std::get<DensityModel>(model.variant);
        double r_p = spectral_radius(p);
        double theta1 = check_global_drift(p, ek);
        double norm_p = weighted_norm(p);
        // auto target: half the spare drift margin, spread over one iterate
        double target = (r_p * r_p / std::max(norm_p, 1e-300) - theta1) / 2.0;
        if (!(target > 0.0)) target = 1e-6;
        if (kind == "density-restricted") {
            cert = density_certificate(p, dm.p, dm.nu, ek, DensityVariant::RestrictedColumns,
                                       target);
        } else {
            double level_a = 0.0;
            for (int x : ek) {
                if (x < 0 || x >= n)
                    throw error("cli: --ek state " + std::to_string(x) + " out of range");
                level_a = std::max(level_a, p.space().weights[x]);
            }
            if (level_a <= 0.0)
                throw error("cli: --kind density-truncated needs a nonempty --ek window");
            cert = density_certificate(p, dm.p, dm.nu, ek, DensityVariant::TruncatedColumns,
                                       target, level_a);
        }
    } else {
        throw error("cli: unknown certificate kind '" + kind +
                    "' (expected lyapunov, domination, lazy, lower, density-restricted, "
                    "density-truncated)");
    }

    std::filesystem::path dir = prepare_out(config);
    write_json(dir / "certificate.json", certificate_to_json(cert));

    // Human-readable verdict table on stdout; the JSON file is the artifact.
    std::ostringstream table;
    table << "certificate  " << to_string(cert.kind) << "\n"
          << "verdict      " << (cert.valid ? "valid" : "invalid") << "\n"
          << "margin       " << format_double(cert.margin) << "\n";
    for (const auto& [key, value] : cert.parameters)
        table << "  " << key << std::string(key.size() < 11 ? 11 - key.size() : 1, ' ')
              << format_double(value) << "\n";
    if (!cert.note.empty()) table << "note         " << cert.note << "\n";
    std::cout << table.str();
    return (!cert.valid && config.strict) ? 1 : 0;
}

int cmd_qsd(const RunConfig& config) {
    LoadedModel loaded = load_model(config.model_path);
    Kernel p = compile(absorbed_of(loaded, "qsd"));
    if (config.horizon < 0) throw error("cli: --horizon must be >= 0");
    PeripheralDecomposition dec = peel_decomposition(p);
    std::vector<Eigen::VectorXd> qsds = qsd_from_decomposition(p, dec);

    json report;
    report["r"] = dec.r;
    report["d"] = dec.d;
    json list = json::array();
    json residuals = json::array();
    for (const Eigen::VectorXd& q : qsds) {
        json masses = json::array();
        for (Eigen::Index s = 0; s < q.size(); ++s) masses.push_back(q[s]);
        list.push_back(std::move(masses));
        Eigen::VectorXd pushed = p.entries().transpose() * q;
        residuals.push_back((pushed - dec.r * q).cwiseAbs().sum());
    }
    report["qsd"] = std::move(list);
    report["residuals"] = std::move(residuals);

    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p.size());
    mu0[0] = 1.0;
    try {
        RateFit fit = convergence_rate(p, dec, mu0);
        json rate;
        rate["rate"] = fit.rate;
        rate["spectral_prediction"] = fit.spectral_prediction;
        rate["below_resolution"] = fit.below_resolution;
        rate["window"] = {fit.window_lo, fit.window_hi};
        report["rate"] = std::move(rate);
    } catch (const error& e) {
        report["rate_error"] = e.what();
    }

    std::filesystem::path dir = prepare_out(config);
    json diagnostics = json::object();
    std::string csv = law_csv(p, mu0, config.horizon, diagnostics);
    if (!diagnostics.empty()) report["evolution"] = diagnostics;
    write_json(dir / "qsd.json", report);
    write_file(dir / "qsd.csv", csv);
    return 0;
}

int cmd_simulate(const RunConfig& config) {
    LoadedModel loaded = load_model(config.model_path);
    const AbsorbedModel& model = absorbed_of(loaded, "simulate");
    Kernel p = compile(model);
    if (config.paths < 1) throw error("cli: --paths must be >= 1");
    SimResult sim = simulate_absorbed(model, 0, config.horizon, config.paths, config.seed);

    std::string csv = "n,state,mass,survival\n";
    json report;
    report["paths"] = config.paths;
    report["seed"] = config.seed;
    report["horizon"] = config.horizon;
    report["all_extinct_before_first"] = sim.all_extinct_before_first;
    json checkpoints = json::array();
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p.size());
    mu0[0] = 1.0;
    for (const SimCheckpoint& cp : sim.checkpoints) {
        for (Eigen::Index s = 0; s < cp.masses.size(); ++s)
            csv += std::to_string(cp.n) + "," + std::to_string(s) + "," +
                   format_double(cp.masses[s]) + "," + format_double(cp.survival) + "\n";
        json entry;
        entry["n"] = cp.n;
        entry["survivors"] = cp.survivors;
        entry["survival"] = cp.survival;
        try {
            ConditionedLaw law = conditioned_law(mu0, p, cp.n);
            entry["tv_exact"] = cp.survivors > 0
                                    ? 0.5 * (cp.masses - law.masses).cwiseAbs().sum()
                                    : 1.0;
        } catch (const error&) {
            entry["tv_exact"] = nullptr;  // exact law extinct
        }
        checkpoints.push_back(std::move(entry));
    }
    report["checkpoints"] = std::move(checkpoints);

    std::filesystem::path dir = prepare_out(config);
    write_json(dir / "simulate.json", report);
    write_file(dir / "simulate.csv", csv);
    return 0;
}

int cmd_semigroup(const RunConfig& config) {
    LoadedModel loaded = load_model(config.model_path);
    if (!std::holds_alternative<SubMarkovGenerator>(loaded.payload))
        throw error("cli: semigroup expects a generator model (variant \"generator\")");
    const SubMarkovGenerator& gen = std::get<SubMarkovGenerator>(loaded.payload);
    if (config.horizon < 1) throw error("cli: --horizon must be >= 1");
    double t_horizon = static_cast<double>(config.horizon);
    SemigroupReport report = continuous_decomposition(gen, t_horizon);

    json j;
    j["t_horizon"] = report.t_horizon;
    j["r1"] = report.r1;
    j["c_t"] = report.c_t;
    j["decomposition"] = decomposition_to_json(report.dec);
    json flow = json::array();
    for (const auto& [h, res] : report.flow_residuals) flow.push_back({h, res});
    j["flow_residuals"] = std::move(flow);
    json alpha = json::array();
    for (const auto& [t, a] : report.alpha_t) alpha.push_back({t, a});
    j["alpha_t"] = std::move(alpha);

    std::filesystem::path dir = prepare_out(config);
    write_json(dir / "semigroup.json", j);

    std::string csv = "t,alpha\n";
    for (const auto& [t, a] : report.alpha_t)
        csv += format_double(t) + "," + format_double(a) + "\n";
    write_file(dir / "alpha_t.csv", csv);

    std::string flow_csv = "h,flow_residual\n";
    for (const auto& [h, res] : report.flow_residuals)
        flow_csv += format_double(h) + "," + format_double(res) + "\n";
    write_file(dir / "flow_residuals.csv", flow_csv);
    return 0;
}

}  // namespace

int run(const RunConfig& config) {
    try {
        if (config.model_path.empty()) throw error("cli: --model is required");
        if (config.command == "decompose") return cmd_decompose(config);
        if (config.command == "certify") return cmd_certify(config);
        if (config.command == "qsd") return cmd_qsd(config);
        if (config.command == "simulate") return cmd_simulate(config);
        if (config.command == "semigroup") return cmd_semigroup(config);
        throw error("cli: unknown command '" + config.command +
                    "' (expected decompose, certify, qsd, simulate, semigroup)");
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        err["command"] = config.command;
        std::cerr << err.dump() << "\n";
        return 2;
    }
}

}  // namespace perispec
