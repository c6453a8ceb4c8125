#include "perispec/io.hpp"

#include <cstdio>
#include <fstream>

namespace perispec {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw error("model: " + msg); }

double number_at(const json& cell, const std::string& where) {
    if (!cell.is_number()) fail(where + " is not a number");
    double v = cell.get<double>();
    if (!std::isfinite(v)) fail(where + " is not finite");
    return v;
}

Eigen::VectorXd vector_field(const json& j, const std::string& field) {
    if (!j.contains(field)) fail("missing field '" + field + "'");
    const json& arr = j.at(field);
    if (!arr.is_array()) fail("field '" + field + "' must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (size_t i = 0; i < arr.size(); ++i)
        v[static_cast<Eigen::Index>(i)] =
            number_at(arr[i], "'" + field + "' entry " + std::to_string(i));
    return v;
}

Eigen::MatrixXd matrix_field(const json& j, const std::string& field) {
    if (!j.contains(field)) fail("missing field '" + field + "'");
    const json& arr = j.at(field);
    if (!arr.is_array() || arr.empty()) fail("field '" + field + "' must be a nonempty array of rows");
    const size_t rows = arr.size();
    if (!arr[0].is_array()) fail("field '" + field + "' row 0 must be an array");
    const size_t cols = arr[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t x = 0; x < rows; ++x) {
        if (!arr[x].is_array() || arr[x].size() != cols)
            fail("field '" + field + "' row " + std::to_string(x) +
                 " has wrong length (expected " + std::to_string(cols) + ")");
        for (size_t y = 0; y < cols; ++y)
            m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) =
                number_at(arr[x][y],
                          "'" + field + "' entry (" + std::to_string(x) + "," + std::to_string(y) + ")");
    }
    return m;
}

json to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index x = 0; x < m.rows(); ++x) {
        json row = json::array();
        for (Eigen::Index y = 0; y < m.cols(); ++y) row.push_back(m(x, y));
        rows.push_back(std::move(row));
    }
    return rows;
}

void read_common(const json& j, AbsorbedModel& model) {
    if (j.contains("weights")) model.weights = vector_field(j, "weights");
    if (j.contains("labels")) {
        const json& arr = j.at("labels");
        if (!arr.is_array()) fail("field 'labels' must be an array of strings");
        for (size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string()) fail("label " + std::to_string(i) + " is not a string");
            model.labels.push_back(arr[i].get<std::string>());
        }
    }
}

}  // namespace

LoadedModel parse_model(const json& j) {
    if (!j.is_object()) fail("top level must be an object");
    if (!j.contains("variant") || !j.at("variant").is_string())
        fail("missing string field 'variant'");
    const std::string variant = j.at("variant").get<std::string>();

    LoadedModel loaded;
    if (variant == "generator") {
        Eigen::MatrixXd rates = matrix_field(j, "rates");
        Eigen::VectorXd v = j.contains("weights") ? vector_field(j, "weights")
                                                  : Eigen::VectorXd::Ones(rates.rows());
        WeightedSpace space;
        if (j.contains("labels")) {
            AbsorbedModel tmp;
            read_common(j, tmp);
            space = WeightedSpace(tmp.labels, v);
        } else {
            space = WeightedSpace::dense(v);
        }
        loaded.payload = SubMarkovGenerator(space, rates);
        return loaded;
    }

    AbsorbedModel model;
    read_common(j, model);
    if (variant == "explicit") {
        Eigen::MatrixXd entries = matrix_field(j, "entries");
        Eigen::VectorXd v = model.weights.size() > 0 ? model.weights
                                                     : Eigen::VectorXd::Ones(entries.rows());
        WeightedSpace space = model.labels.empty() ? WeightedSpace::dense(v)
                                                   : WeightedSpace(model.labels, v);
        model.variant = Kernel(space, entries);
    } else if (variant == "lazy_chain") {
        LazyChain chain;
        chain.r_matrix = matrix_field(j, "r_matrix");
        chain.rho_r = vector_field(j, "rho_r");
        chain.rho_stay = vector_field(j, "rho_stay");
        chain.rho_kill = vector_field(j, "rho_kill");
        model.variant = std::move(chain);
        if (j.contains("mu") != j.contains("a"))
            fail("fields 'mu' and 'a' must be given together");
        if (j.contains("mu")) {
            loaded.mu = vector_field(j, "mu");
            loaded.a = number_at(j.at("a"), "'a'");
        }
    } else if (variant == "birth_death") {
        BirthDeathKilling bd;
        bd.p_up = vector_field(j, "p_up");
        bd.p_down = vector_field(j, "p_down");
        bd.p_kill = vector_field(j, "p_kill");
        model.variant = std::move(bd);
    } else if (variant == "density") {
        DensityModel dm;
        dm.p = matrix_field(j, "p");
        dm.nu = vector_field(j, "nu");
        model.variant = std::move(dm);
    } else {
        fail("unknown variant '" + variant +
             "' (expected explicit, lazy_chain, birth_death, density, or generator)");
    }
    loaded.payload = std::move(model);
    return loaded;
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("model: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw error("model: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_model(j);
}

json serialize_model(const AbsorbedModel& model) {
    json j;
    if (std::holds_alternative<Kernel>(model.variant)) {
        const Kernel& k = std::get<Kernel>(model.variant);
        j["variant"] = "explicit";
        j["entries"] = to_json(k.entries());
        j["weights"] = to_json(k.space().weights);
        j["labels"] = k.space().labels;
        return j;
    }
    if (std::holds_alternative<LazyChain>(model.variant)) {
        const LazyChain& c = std::get<LazyChain>(model.variant);
        j["variant"] = "lazy_chain";
        j["r_matrix"] = to_json(c.r_matrix);
        j["rho_r"] = to_json(c.rho_r);
        j["rho_stay"] = to_json(c.rho_stay);
        j["rho_kill"] = to_json(c.rho_kill);
    } else if (std::holds_alternative<BirthDeathKilling>(model.variant)) {
        const BirthDeathKilling& c = std::get<BirthDeathKilling>(model.variant);
        j["variant"] = "birth_death";
        j["p_up"] = to_json(c.p_up);
        j["p_down"] = to_json(c.p_down);
        j["p_kill"] = to_json(c.p_kill);
    } else {
        const DensityModel& c = std::get<DensityModel>(model.variant);
        j["variant"] = "density";
        j["p"] = to_json(c.p);
        j["nu"] = to_json(c.nu);
    }
    if (model.weights.size() > 0) j["weights"] = to_json(model.weights);
    if (!model.labels.empty()) j["labels"] = model.labels;
    return j;
}

json serialize_model(const SubMarkovGenerator& gen) {
    json j;
    j["variant"] = "generator";
    j["rates"] = to_json(gen.rates);
    j["weights"] = to_json(gen.space.weights);
    j["labels"] = gen.space.labels;
    return j;
}

json certificate_to_json(const Certificate& cert) {
    json j;
    j["kind"] = to_string(cert.kind);
    j["valid"] = cert.valid;
    j["margin"] = cert.margin;
    j["parameters"] = json::object();
    for (const auto& [key, value] : cert.parameters) j["parameters"][key] = value;
    j["witness"] = json::object();
    for (const auto& [key, value] : cert.witness) j["witness"][key] = value;
    j["note"] = cert.note;
    return j;
}

json decomposition_to_json(const PeripheralDecomposition& dec) {
    json j;
    j["r"] = dec.r;
    j["d"] = dec.d;
    j["j"] = dec.j;
    json items = json::array();
    for (const DecompositionItem& item : dec.items) {
        json it;
        it["eta"] = to_json(item.eta);
        it["nu"] = to_json(item.nu);
        it["E"] = item.E;
        it["F"] = item.F;
        items.push_back(std::move(it));
    }
    j["items"] = std::move(items);
    json alpha = json::array();
    for (const AlphaEntry& entry : dec.alpha) {
        json row;
        row["n"] = entry.n;
        row["k"] = entry.k;
        row["alpha"] = entry.alpha;
        alpha.push_back(std::move(row));
    }
    j["alpha"] = std::move(alpha);
    return j;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

}  // namespace perispec
