/// @file io.hpp
/// @brief SPE10 permeability ingestion, experiment configuration, problem
/// builders, suite runners, and CSV reporting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrcmos/driver.hpp"
#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"

namespace mrcmos {

enum class Spe10Component { Kx, Ky, Kz };

/// One horizontal permeability slice mapped onto the 220x60 solver grid:
/// the 220-cell benchmark axis is horizontal, index x + 220 y.
struct Spe10Layer {
    static constexpr int nx = 220;
    static constexpr int ny = 60;
    int layer = 0;  // 1-based
    Spe10Component component = Spe10Component::Kx;
    std::vector<double> values;

    double at(int x, int y) const { return values[static_cast<size_t>(y) * nx + x]; }
};

namespace detail {

constexpr int kSpe10Nx = 60;      // benchmark x extent (fastest index)
constexpr int kSpe10Ny = 220;     // benchmark y extent
constexpr int kSpe10Nz = 85;      // layers
constexpr long kSpe10Block = static_cast<long>(kSpe10Nx) * kSpe10Ny * kSpe10Nz;
constexpr long kSpe10Total = 3 * kSpe10Block;

inline double parse_double(const std::string& s) {
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("unparsable number: '" + s + "'");
    }
    if (used != s.size()) {
        throw std::invalid_argument("unparsable number: '" + s + "'");
    }
    return v;
}

inline int parse_int(const std::string& s) {
    size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("unparsable integer: '" + s + "'");
    }
    if (used != s.size()) {
        throw std::invalid_argument("unparsable integer: '" + s + "'");
    }
    return v;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(trim(cur));
    }
    return out;
}

/// A decade value must be an exact power of ten to expand a range.
inline int decade_of(double v) {
    if (!(v > 0.0)) {
        throw std::invalid_argument("range endpoints must be positive powers of ten");
    }
    const int e = static_cast<int>(std::lround(std::log10(v)));
    if (std::abs(std::pow(10.0, e) - v) > 1e-9 * v) {
        throw std::invalid_argument("range endpoints must be powers of ten");
    }
    return e;
}

}  // namespace detail

/// Reads the standard SPE10 model-2 ASCII dump (whitespace-separated, three
/// component blocks of 60x220x85 values each, x fastest) and extracts one
/// layer of one component onto the solver orientation.
inline Spe10Layer load_spe10(const std::string& path, int layer,
                             Spe10Component component = Spe10Component::Kx) {
    if (layer < 1 || layer > detail::kSpe10Nz) {
        throw std::invalid_argument("load_spe10: layer index out of [1, 85]");
    }
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_spe10: cannot open '" + path + "'");
    }
    std::vector<double> all;
    all.reserve(static_cast<size_t>(detail::kSpe10Total));
    double v = 0.0;
    while (in >> v) {
        all.push_back(v);
        if (all.size() > static_cast<size_t>(detail::kSpe10Total)) {
            throw std::runtime_error("load_spe10: more values than the 60x220x85x3 layout");
        }
    }
    if (!in.eof()) {
        throw std::runtime_error("load_spe10: non-numeric token in '" + path + "'");
    }
    if (all.size() != static_cast<size_t>(detail::kSpe10Total)) {
        throw std::runtime_error("load_spe10: expected 3366000 values, got " +
                                 std::to_string(all.size()));
    }
    Spe10Layer out;
    out.layer = layer;
    out.component = component;
    out.values.resize(static_cast<size_t>(Spe10Layer::nx) * Spe10Layer::ny);
    const long offset = static_cast<long>(component) * detail::kSpe10Block +
                        static_cast<long>(layer - 1) * detail::kSpe10Nx * detail::kSpe10Ny;
    for (int y = 0; y < Spe10Layer::ny; ++y) {
        for (int x = 0; x < Spe10Layer::nx; ++x) {
            // benchmark cell (i, j) = (solver y, solver x) within the layer
            const long idx = offset + y + static_cast<long>(detail::kSpe10Nx) * x;
            const double k = all[static_cast<size_t>(idx)];
            if (!(k > 0.0)) {
                throw std::runtime_error("load_spe10: nonpositive permeability in layer " +
                                         std::to_string(layer));
            }
            out.values[static_cast<size_t>(y) * Spe10Layer::nx + x] = k;
        }
    }
    return out;
}

/// Writes one extracted layer, full precision, one value per line.
inline void write_layer(const Spe10Layer& layer, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_layer: cannot open '" + path + "'");
    }
    char buf[40];
    for (const double v : layer.values) {
        std::snprintf(buf, sizeof buf, "%.17e\n", v);
        out << buf;
    }
    if (!out) {
        throw std::runtime_error("write_layer: write failed for '" + path + "'");
    }
}

/// Reads a 220x60 layer file (13200 positive values in solver order).
inline std::vector<double> read_layer(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_layer: cannot open '" + path + "'");
    }
    std::vector<double> values;
    values.reserve(static_cast<size_t>(Spe10Layer::nx) * Spe10Layer::ny);
    double v = 0.0;
    while (in >> v) {
        values.push_back(v);
    }
    if (!in.eof()) {
        throw std::runtime_error("read_layer: non-numeric token in '" + path + "'");
    }
    if (values.size() != static_cast<size_t>(Spe10Layer::nx) * Spe10Layer::ny) {
        throw std::runtime_error("read_layer: expected 13200 values, got " +
                                 std::to_string(values.size()));
    }
    for (const double k : values) {
        if (!(k > 0.0)) {
            throw std::runtime_error("read_layer: nonpositive permeability");
        }
    }
    return values;
}

/// Experiment knobs shared by the CLI subcommands. Lists hold sweep values;
/// single runs use the first entry.
struct ExperimentConfig {
    std::string problem = "spe10-layer";  // spe10-layer | homogeneous-dipole | custom
    std::vector<double> alphas = {10.0};
    std::vector<int> oversamplings = {2};
    std::vector<int> smoothing_steps = {4};
    std::string method = "both";  // rm | em | both
    double threshold = 1e-7;
    int max_iterations = 100;
    int layer = 42;
    std::string perm_file;
    std::string metric = "l2-flux";
    std::string out = "report.csv";

    void validate() const {
        if (alphas.empty() || oversamplings.empty() || smoothing_steps.empty()) {
            throw std::invalid_argument("config: empty sweep list");
        }
        if (!(threshold > 0.0)) {
            throw std::invalid_argument("config: threshold must be positive");
        }
        if (max_iterations < 0) {
            throw std::invalid_argument("config: negative iteration cap");
        }
        if (problem != "spe10-layer" && problem != "homogeneous-dipole" && problem != "custom") {
            throw std::invalid_argument("config: unknown problem '" + problem + "'");
        }
        if (method != "rm" && method != "em" && method != "both") {
            throw std::invalid_argument("config: unknown method '" + method + "'");
        }
        parse_metric(metric);
    }

    static Metric parse_metric(const std::string& name) {
        if (name == "l2-pressure") return Metric::L2Pressure;
        if (name == "l2-flux") return Metric::L2Flux;
        if (name == "linf-pressure") return Metric::LinfPressure;
        if (name == "coefficient-change") return Metric::CoefficientChange;
        throw std::invalid_argument("config: unknown metric '" + name + "'");
    }
};

/// Parses a comma-separated value list where each token is a number or a
/// decade range "1e-8..1e8" expanding to every power of ten in between.
inline std::vector<double> parse_alpha_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& tok : detail::split(text, ',')) {
        if (tok.empty()) {
            throw std::invalid_argument("empty list entry in '" + text + "'");
        }
        const auto dots = tok.find("..");
        if (dots == std::string::npos) {
            out.push_back(detail::parse_double(tok));
            continue;
        }
        const int lo = detail::decade_of(detail::parse_double(detail::trim(tok.substr(0, dots))));
        const int hi =
            detail::decade_of(detail::parse_double(detail::trim(tok.substr(dots + 2))));
        if (lo > hi) {
            throw std::invalid_argument("descending range '" + tok + "'");
        }
        for (int e = lo; e <= hi; ++e) {
            out.push_back(std::pow(10.0, e));
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("empty value list");
    }
    return out;
}

inline std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const std::string& tok : detail::split(text, ',')) {
        if (tok.empty()) {
            throw std::invalid_argument("empty list entry in '" + text + "'");
        }
        out.push_back(detail::parse_int(tok));
    }
    if (out.empty()) {
        throw std::invalid_argument("empty value list");
    }
    return out;
}

/// Applies one "key = value" setting; keys match the CLI flag names.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key,
                          const std::string& value) {
    if (key == "problem") {
        cfg.problem = value;
    } else if (key == "alpha") {
        cfg.alphas = parse_alpha_list(value);
    } else if (key == "oversampling") {
        cfg.oversamplings = parse_int_list(value);
    } else if (key == "smoothing-steps") {
        cfg.smoothing_steps = parse_int_list(value);
    } else if (key == "method") {
        cfg.method = value;
    } else if (key == "threshold") {
        cfg.threshold = detail::parse_double(value);
    } else if (key == "max-iters") {
        cfg.max_iterations = detail::parse_int(value);
    } else if (key == "layer") {
        cfg.layer = detail::parse_int(value);
    } else if (key == "perm-file") {
        cfg.perm_file = value;
    } else if (key == "metric") {
        cfg.metric = value;
    } else if (key == "out") {
        cfg.out = value;
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

/// Loads a configuration from an optional "key = value" file plus explicit
/// overrides (CLI flags); overrides win over file values.
inline ExperimentConfig load_config(
    const std::string& file,
    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    ExperimentConfig cfg;
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) {
            throw std::runtime_error("config: cannot open '" + file + "'");
        }
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line = line.substr(0, hash);
            }
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("config: missing '=' on line " +
                                            std::to_string(lineno));
            }
            apply_setting(cfg, detail::trim(line.substr(0, eq)),
                          detail::trim(line.substr(eq + 1)));
        }
    }
    for (const auto& [key, value] : overrides) {
        apply_setting(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

/// One driver run plus the knobs that produced it, for reporting.
struct LabeledRun {
    Method method = Method::Reduced;
    double alpha = 10.0;
    int oversampling = 2;
    int smoothing_steps = 4;
    IterationReport report;
};

/// Writes runs as CSV, one row per iteration, full-precision scientific.
inline void write_report(const std::vector<LabeledRun>& runs, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_report: cannot open '" + path + "'");
    }
    out << "method,alpha,l,k,iteration,l2_pressure,l2_flux,linf_pressure,status\n";
    char buf[128];
    for (const LabeledRun& run : runs) {
        for (const IterationRecord& r : run.report.records) {
            std::snprintf(buf, sizeof buf, "%s,%.17e,%d,%d,%d,%.17e,%.17e,%.17e,%s\n",
                          to_string(run.method), run.alpha, run.oversampling,
                          run.smoothing_steps, r.iteration, r.l2_pressure, r.l2_flux,
                          r.linf_pressure, to_string(run.report.status));
            out << buf;
        }
    }
    if (!out) {
        throw std::runtime_error("write_report: write failed for '" + path + "'");
    }
}

/// The built-in 64x64 homogeneous dipole problem (4x4 subdomains): unit
/// sources of opposite sign in cells (13,13) and (32,32) (1-based), unit
/// pressure drop left to right, no-flow top and bottom.
inline ProblemSpec make_dipole_spec() {
    const Grid g(64, 64, 1.0, 1.0);
    const double scale = 1.0 / (g.hx() * g.hy());
    SourceField f(g);
    f.at({12, 12}) = scale;
    f.at({31, 31}) = -scale;
    BoundarySpec bc(g);
    bc.set_side(Side::West, FaceBC::dirichlet(1.0));
    bc.set_side(Side::East, FaceBC::dirichlet(0.0));
    bc.set_side(Side::South, FaceBC::neumann(0.0));
    bc.set_side(Side::North, FaceBC::neumann(0.0));
    ProblemSpec spec{g, PermField(g, 1.0), bc, f};
    spec.mx = 4;
    spec.my = 4;
    return spec;
}

/// A 220x60 slab-flow problem (11x3 subdomains) over a given permeability
/// layer: unit pressure drop left to right, no-flow top and bottom, no source.
inline ProblemSpec make_layer_spec(std::vector<double> perm) {
    const Grid g(Spe10Layer::nx, Spe10Layer::ny, 11.0 / 3.0, 1.0);
    BoundarySpec bc(g);
    bc.set_side(Side::West, FaceBC::dirichlet(1.0));
    bc.set_side(Side::East, FaceBC::dirichlet(0.0));
    bc.set_side(Side::South, FaceBC::neumann(0.0));
    bc.set_side(Side::North, FaceBC::neumann(0.0));
    ProblemSpec spec{g, PermField(g, std::move(perm)), bc, SourceField(g)};
    spec.mx = 11;
    spec.my = 3;
    return spec;
}

/// Builds the fine problem selected by the config (decomposition layout
/// included); iteration knobs are applied by the suite runner per run.
inline ProblemSpec build_problem(const ExperimentConfig& cfg) {
    if (cfg.problem == "homogeneous-dipole") {
        return make_dipole_spec();
    }
    if (cfg.perm_file.empty()) {
        throw std::invalid_argument("problem '" + cfg.problem +
                                    "' needs a permeability file (perm-file)");
    }
    if (cfg.problem == "spe10-layer") {
        return make_layer_spec(load_spe10(cfg.perm_file, cfg.layer).values);
    }
    return make_layer_spec(read_layer(cfg.perm_file));
}

namespace detail {

inline std::vector<Method> methods_of(const ExperimentConfig& cfg) {
    if (cfg.method == "rm") return {Method::Reduced};
    if (cfg.method == "em") return {Method::Extended};
    return {Method::Reduced, Method::Extended};
}

}  // namespace detail

/// Runs one experiment suite. `suite` is the subcommand name:
///  - "run" / "converge": first alpha/l/k ("converge" disables the threshold
///    so the full history to the iteration cap is recorded);
///  - "alpha-sweep": all alphas, first l/k;
///  - "oversampling-study": all l, first alpha/k;
///  - "smoothing-study": all k, first alpha/l;
///  - "compare-imsfv": the built-in dipole, first alpha/l/k.
inline std::vector<LabeledRun> run_suite(const ExperimentConfig& config,
                                         const std::string& suite) {
    ExperimentConfig cfg = config;
    if (suite == "compare-imsfv") {
        cfg.problem = "homogeneous-dipole";
    }
    cfg.validate();
    ProblemSpec base = build_problem(cfg);
    base.threshold = suite == "converge" ? 1e-300 : cfg.threshold;
    base.max_iterations = cfg.max_iterations;
    base.metric = ExperimentConfig::parse_metric(cfg.metric);

    std::vector<double> alphas = {cfg.alphas.front()};
    std::vector<int> ls = {cfg.oversamplings.front()};
    std::vector<int> ks = {cfg.smoothing_steps.front()};
    if (suite == "alpha-sweep") {
        alphas = cfg.alphas;
    } else if (suite == "oversampling-study") {
        ls = cfg.oversamplings;
    } else if (suite == "smoothing-study") {
        ks = cfg.smoothing_steps;
    } else if (suite != "run" && suite != "converge" && suite != "compare-imsfv") {
        throw std::invalid_argument("unknown suite '" + suite + "'");
    }

    std::vector<LabeledRun> runs;
    for (const double alpha : alphas) {
        for (const int l : ls) {
            for (const int k : ks) {
                for (const Method m : detail::methods_of(cfg)) {
                    ProblemSpec spec = base;
                    spec.alpha = alpha;
                    spec.oversampling = l;
                    spec.smoothing_steps = k;
                    runs.push_back(LabeledRun{m, alpha, l, k, run_method(spec, m)});
                }
            }
        }
    }
    return runs;
}

}  // namespace mrcmos
