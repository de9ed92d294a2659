#pragma once

// Run configuration read from an INI file. Units are fixed by the key
// (µm, min, °C, g/kg); unknown sections or keys are rejected.
//
//   [simulation] t_max | t_max_h, temperature, c0, courant, output_samples, kernel
//   [grid]       L1_max, L2_max, dL1, dL2
//   [seed]       shape, mean_L1, mean_L2, sigma_11, sigma_22, m0
//   [material]   rho_c, k_v, solubility_a, solubility_b
//   [growth]     law, kg11..kg13, kg21..kg23, coefficients | coefficients_L1 + coefficients_L2
//   [moments]    steps
//   [verify]     tolerance
//   [benchmark]  growth_ratios, bin_sizes, repeats, kernels
//   [estimation] t_max, bin_width, n_samples, mom_steps, k, backends, iterations,
//                learning_rate, beta1, beta2, adam_eps, theta0, independent_dimensions,
//                penalty, temperatures, supersaturations

#include "popbal/core.hpp"
#include "popbal/error.hpp"
#include "popbal/estimation.hpp"
#include "popbal/fvm.hpp"
#include "popbal/kinetics.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace popbal {

struct BenchmarkSettings {
    std::vector<double> growth_ratios{0.5, 1.0, 2.0, 4.0};
    std::vector<double> bin_sizes{10.0, 7.0, 5.0};
    std::size_t repeats = 10;
    std::vector<Kernel> kernels{Kernel::serial, Kernel::parallel};
};

struct EstimationSettings {
    EstimationSetup setup;
    std::vector<std::size_t> k_values{1, 4, 16};
    std::vector<Backend> backends{Backend::ad, Backend::nd_batched, Backend::nd_naive};
};

struct RunConfig {
    SimulationConfig sim;
    std::size_t mom_steps = 10000;
    double tolerance = 0.01;
    BenchmarkSettings benchmark;
    EstimationSettings estimation;
};

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + text + "' is not a number");
    }
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos != text.size() || !std::isfinite(v)) throw ConfigError("key '" + key + "': '" + text + "' is not a number");
    return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v < 0.0 || v != std::floor(v) || v > 1e15) throw ConfigError("key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::string s = text;
    for (char& ch : s)
        if (ch == ',') ch = ' ';
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Tracks which keys of a section were read so leftovers can be reported.
class Section {
public:
    Section(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    std::optional<std::string> raw(const std::string& key) {
        if (tree_ == nullptr) return std::nullopt;
        const auto child = tree_->get_child_optional(key);
        if (!child) return std::nullopt;
        used_.insert(key);
        return trim(child->data());
    }
    void number(const std::string& key, double& out) {
        if (auto v = raw(key)) out = parse_number(qualified(key), *v);
    }
    void count(const std::string& key, std::size_t& out) {
        if (auto v = raw(key)) out = parse_count(qualified(key), *v);
    }
    void numbers(const std::string& key, std::vector<double>& out, bool allow_empty = false) {
        if (auto v = raw(key)) {
            out.clear();
            for (const auto& tok : split_list(*v)) out.push_back(parse_number(qualified(key), tok));
            if (out.empty() && !allow_empty) throw ConfigError("key '" + qualified(key) + "' is an empty list");
        }
    }
    void flag(const std::string& key, bool& out) {
        if (auto v = raw(key)) {
            if (*v == "true" || *v == "1") out = true;
            else if (*v == "false" || *v == "0") out = false;
            else throw ConfigError("key '" + qualified(key) + "' must be true or false");
        }
    }
    std::string qualified(const std::string& key) const { return "[" + name_ + "] " + key; }

    void reject_unknown() const {
        if (tree_ == nullptr) return;
        for (const auto& kv : *tree_) {
            if (!used_.count(kv.first)) throw ConfigError("unknown key '" + qualified(kv.first) + "'");
        }
    }

private:
    std::string name_;
    const boost::property_tree::ptree* tree_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Parses INI text. Absent keys keep their defaults.
inline RunConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree root;
    try {
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    static const std::set<std::string> known{"simulation", "grid",    "seed",      "material",  "growth",
                                             "moments",    "verify",  "benchmark", "estimation"};
    std::map<std::string, const pt::ptree*> sections;
    for (const auto& kv : root) {
        if (!known.count(kv.first)) throw ConfigError("unknown section or top-level key '" + kv.first + "'");
        if (kv.second.empty()) throw ConfigError("'" + kv.first + "' must be a section");
        sections[kv.first] = &kv.second;
    }
    auto section = [&](const std::string& name) {
        const auto it = sections.find(name);
        return detail::Section(name, it == sections.end() ? nullptr : it->second);
    };

    RunConfig rc;
    SimulationConfig& sim = rc.sim;

    auto grid = section("grid");
    double L1 = 1200.0, L2 = 600.0, dL1 = 1.0, dL2 = 1.0;
    grid.number("L1_max", L1);
    grid.number("L2_max", L2);
    grid.number("dL1", dL1);
    grid.number("dL2", dL2);
    sim.grid = build_grid(L1, L2, dL1, dL2);

    auto simsec = section("simulation");
    const auto t_min = simsec.raw("t_max");
    const auto t_h = simsec.raw("t_max_h");
    if (t_min && t_h) throw ConfigError("give either t_max (min) or t_max_h (h), not both");
    if (t_min) sim.t_max = detail::parse_number("[simulation] t_max", *t_min);
    if (t_h) sim.t_max = 60.0 * detail::parse_number("[simulation] t_max_h", *t_h);
    simsec.number("temperature", sim.temperature);
    simsec.number("c0", sim.c0);
    simsec.number("courant", sim.courant);
    simsec.count("output_samples", sim.output_samples);
    if (auto k = simsec.raw("kernel")) sim.kernel = parse_kernel(*k);

    auto seed = section("seed");
    if (auto s = seed.raw("shape")) {
        if (*s == "normal") sim.seed.shape = SeedShape::normal;
        else if (*s == "log-normal" || *s == "lognormal") sim.seed.shape = SeedShape::log_normal;
        else throw ConfigError("[seed] shape must be normal or log-normal");
    }
    seed.number("mean_L1", sim.seed.mean_L1);
    seed.number("mean_L2", sim.seed.mean_L2);
    seed.number("sigma_11", sim.seed.sigma_11);
    seed.number("sigma_22", sim.seed.sigma_22);
    seed.number("m0", sim.seed.m0);

    auto mat = section("material");
    mat.number("rho_c", sim.material.rho_c);
    mat.number("k_v", sim.material.k_v);
    mat.number("solubility_a", sim.material.solubility_a);
    mat.number("solubility_b", sim.material.solubility_b);

    auto growth = section("growth");
    std::string law = "arrhenius";
    if (auto l = growth.raw("law")) law = *l;
    if (law == "arrhenius") {
        Arrhenius<double> a = std::get<Arrhenius<double>>(default_arrhenius().model);
        growth.number("kg11", a.dim[0].k1);
        growth.number("kg12", a.dim[0].k2);
        growth.number("kg13", a.dim[0].k3);
        growth.number("kg21", a.dim[1].k1);
        growth.number("kg22", a.dim[1].k2);
        growth.number("kg23", a.dim[1].k3);
        sim.growth = {a};
    } else if (law == "polynomial") {
        std::vector<double> shared, a1, a2;
        growth.numbers("coefficients", shared);
        growth.numbers("coefficients_L1", a1);
        growth.numbers("coefficients_L2", a2);
        if (!shared.empty() && (!a1.empty() || !a2.empty())) {
            throw ConfigError("[growth] give either coefficients or coefficients_L1/coefficients_L2");
        }
        if (!shared.empty()) sim.growth = polynomial_law(shared);
        else if (!a1.empty() && !a2.empty()) sim.growth = polynomial_law(a1, a2);
        else throw ConfigError("[growth] polynomial law needs coefficients");
    } else {
        throw ConfigError("[growth] law must be arrhenius or polynomial");
    }

    auto mom = section("moments");
    mom.count("steps", rc.mom_steps);
    if (rc.mom_steps < 1) throw ConfigError("[moments] steps must be at least 1");

    auto ver = section("verify");
    ver.number("tolerance", rc.tolerance);
    if (!(rc.tolerance >= 0.0)) throw ConfigError("[verify] tolerance must be non-negative");

    auto bench = section("benchmark");
    // an empty list switches that sweep off
    bench.numbers("growth_ratios", rc.benchmark.growth_ratios, true);
    bench.numbers("bin_sizes", rc.benchmark.bin_sizes, true);
    bench.count("repeats", rc.benchmark.repeats);
    if (auto ks = bench.raw("kernels")) {
        rc.benchmark.kernels.clear();
        for (const auto& tok : detail::split_list(*ks)) rc.benchmark.kernels.push_back(parse_kernel(tok));
    }
    if (rc.benchmark.growth_ratios.empty() && rc.benchmark.bin_sizes.empty()) {
        throw ConfigError("[benchmark] both sweeps are empty");
    }
    if (rc.benchmark.kernels.empty()) throw ConfigError("[benchmark] kernels is an empty list");
    if (rc.benchmark.repeats < 1) throw ConfigError("[benchmark] repeats must be at least 1");
    for (double r : rc.benchmark.growth_ratios)
        if (!(r > 0.0)) throw ConfigError("[benchmark] growth ratios must be positive");
    for (double b : rc.benchmark.bin_sizes)
        if (!(b > 0.0)) throw ConfigError("[benchmark] bin sizes must be positive");

    auto est = section("estimation");
    EstimationSetup& es = rc.estimation.setup;
    double bin_width = 5.0;
    est.number("bin_width", bin_width);
    es.grid = build_grid(sim.grid.L1_max, sim.grid.L2_max, bin_width, bin_width);
    es.seed = sim.seed;
    es.material = sim.material;
    es.courant = sim.courant;
    est.number("t_max", es.t_max);
    est.count("n_samples", es.n_samples);
    est.count("mom_steps", es.mom_steps);
    est.count("iterations", es.iterations);
    est.number("learning_rate", es.learning_rate);
    est.number("beta1", es.beta1);
    est.number("beta2", es.beta2);
    est.number("adam_eps", es.adam_eps);
    est.number("theta0", es.theta0);
    est.flag("independent_dimensions", es.independent_dimensions);
    est.number("penalty", es.penalty);
    est.numbers("temperatures", es.temperatures);
    est.numbers("supersaturations", es.supersaturations);
    if (auto ks = est.raw("k")) {
        rc.estimation.k_values.clear();
        for (const auto& tok : detail::split_list(*ks)) {
            const std::size_t k = detail::parse_count("[estimation] k", tok);
            if (k < 1) throw ConfigError("[estimation] k values must be at least 1");
            if (es.independent_dimensions && k % 2 != 0) {
                throw ConfigError("[estimation] k must be even with independent dimensions");
            }
            rc.estimation.k_values.push_back(k);
        }
    }
    if (auto bs = est.raw("backends")) {
        rc.estimation.backends.clear();
        for (const auto& tok : detail::split_list(*bs)) rc.estimation.backends.push_back(parse_backend(tok));
    }
    if (rc.estimation.k_values.empty() || rc.estimation.backends.empty()) {
        throw ConfigError("[estimation] k and backends must not be empty");
    }

    for (const auto* s : {&grid, &simsec, &seed, &mat, &growth, &mom, &ver, &bench, &est}) s->reject_unknown();
    sim.validate();
    es.validate();
    return rc;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(in);
}

}  // namespace popbal
