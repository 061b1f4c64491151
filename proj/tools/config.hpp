#pragma once

// JSON configuration and CSV output for the nsumkit command-line tool.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsumkit/design.hpp"
#include "nsumkit/errors.hpp"
#include "nsumkit/generators.hpp"
#include "nsumkit/montecarlo.hpp"

namespace nsumkit::cli {

using nlohmann::json;

/// Bad flags, unreadable or malformed configs, unwritable outputs. Exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string fmt(double x) {
    if (std::isnan(x)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string fmt_precise(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

/// A manifest is accepted in place of a config: its embedded config is used.
inline json unwrap_manifest(const json& j) {
    if (j.is_object() && j.contains("manifest_version") && j.contains("config"))
        return j.at("config");
    return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

template <typename T>
T get_required(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config is missing field '") + key + "'");
    return get_or<T>(j, key, T{});
}

/// A list of reals, or {"from", "to", "step"} with an inclusive upper end.
inline std::vector<double> real_grid(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config is missing field '") + key + "'");
    const json& v = j.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) {
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(std::string("'") + key + "' must hold numbers");
            out.push_back(x.get<double>());
        }
        if (out.empty()) throw ConfigError(std::string("'") + key + "' is empty");
        return out;
    }
    if (v.is_object()) {
        const double from = get_required<double>(v, "from");
        const double to = get_required<double>(v, "to");
        const double step = get_required<double>(v, "step");
        if (!(step > 0.0) || to < from) throw ConfigError(std::string("bad range for '") + key + "'");
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((to - from) / step + 1e-9));
        for (long k = 0; k <= count; ++k) {
            // Round to 12 significant digits so 0.01 + 25 * 0.02 prints as 0.51.
            const double x = std::stod(fmt_precise(from + static_cast<double>(k) * step));
            out.push_back(x);
        }
        return out;
    }
    throw ConfigError(std::string("'") + key + "' must be a number, list or range");
}

inline std::vector<std::size_t> count_grid(const json& j, const char* key) {
    std::vector<std::size_t> out;
    for (double x : real_grid(j, key)) {
        if (x < 2 || x != std::floor(x)) throw ConfigError(std::string("'") + key + "' needs integers >= 2");
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

// ---- enums -----------------------------------------------------------------------------

inline ZConvention parse_z(const json& j) {
    const auto z = get_or<std::string>(j, "z", "exact");
    if (z == "exact") return ZConvention::ExactQuantile;
    if (z == "two" || z == "2") return ZConvention::ZEqualsTwo;
    throw ConfigError("'z' must be \"exact\" or \"two\"");
}

inline SimOptions parse_options(const json& j) {
    SimOptions o;
    o.epsilon = get_or<double>(j, "epsilon", 0.1);
    o.replicates = get_or<std::size_t>(j, "replicates", o.replicates);
    o.design_effect = get_or<double>(j, "deff", 1.0);
    o.z_convention = parse_z(j);
    const auto pool = get_or<std::string>(j, "pool", "all");
    if (pool == "all") o.pool = RespondentPool::All;
    else if (pool == "non-hidden") o.pool = RespondentPool::NonHidden;
    else throw ConfigError("'pool' must be \"all\" or \"non-hidden\"");
    const auto ci = get_or<std::string>(j, "interval", "plug-in");
    if (ci == "plug-in") o.interval = IntervalMethod::PlugIn;
    else if (ci == "true-parameter") o.interval = IntervalMethod::TrueParameter;
    else throw ConfigError("'interval' must be \"plug-in\" or \"true-parameter\"");
    o.shared_graph_stream = get_or<bool>(j, "shared_graph_stream", false);
    return o;
}

// ---- graph models ---------------------------------------------------------------------------

inline std::optional<double> opt_real(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get_required<double>(j, key);
}

inline GraphModelSpec parse_model(const json& j) {
    if (j.is_string()) return parse_model(json{{"type", j.get<std::string>()}});
    if (!j.is_object()) throw ConfigError("model entries must be objects or names");
    const auto type = get_required<std::string>(j, "type");
    if (type == "ER") return ErSpec{get_or<double>(j, "p", 0.1)};
    if (type == "ERGM") {
        ErgmSpec s;
        s.theta_edge = opt_real(j, "theta_edge");
        s.theta_triangle = get_or<double>(j, "theta_triangle", s.theta_triangle);
        s.triangle_scale = opt_real(j, "triangle_scale");
        if (j.contains("proposals")) s.proposals = get_required<std::uint64_t>(j, "proposals");
        s.start_p = get_or<double>(j, "start_p", s.start_p);
        s.target_density = get_or<double>(j, "target_density", s.target_density);
        return s;
    }
    if (type == "PA") {
        PaSpec s;
        s.power = get_or<double>(j, "power", s.power);
        if (j.contains("m_per_step")) s.m_per_step = get_required<std::size_t>(j, "m_per_step");
        s.core_nodes = get_or<std::size_t>(j, "core_nodes", 0);
        s.core_p = get_or<double>(j, "core_p", s.core_p);
        return s;
    }
    if (type == "SBM") {
        if (!j.contains("block_matrix")) return default_sbm();
        SbmSpec s;
        s.block_fractions = get_required<std::vector<double>>(j, "block_fractions");
        s.block_matrix = get_required<std::vector<std::vector<double>>>(j, "block_matrix");
        return s;
    }
    if (type == "SmallWorld") {
        SmallWorldSpec s;
        s.nei = get_or<std::size_t>(j, "nei", s.nei);
        s.p_rewire = get_or<double>(j, "p_rewire", s.p_rewire);
        return s;
    }
    if (const auto family = parse_family(type))
        return DeviationSpec{*family, get_required<double>(j, "delta"), get_or<double>(j, "base_p", 0.1)};
    throw ConfigError("unknown model type '" + type + "'");
}

inline SimConfig parse_sim_config(const json& j) {
    SimConfig c;
    c.M_grid = count_grid(j, "M");
    c.q_grid = real_grid(j, "q");
    c.alpha_grid = real_grid(j, "alpha");
    if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
        throw ConfigError("config needs a non-empty 'models' list");
    for (const auto& m : j.at("models")) c.models.push_back(parse_model(m));
    c.options = parse_options(j);
    if (c.options.replicates < 1) throw ConfigError("'replicates' must be at least 1");
    return c;
}

inline SweepConfig parse_sweep_config(const json& j) {
    SweepConfig c;
    if (j.contains("families")) {
        c.families.clear();
        for (const auto& f : j.at("families")) {
            if (!f.is_string()) throw ConfigError("'families' must hold names");
            const auto fam = parse_family(f.get<std::string>());
            if (!fam) throw ConfigError("unknown family '" + f.get<std::string>() + "'");
            c.families.push_back(*fam);
        }
    }
    if (j.contains("delta")) c.delta_grid = real_grid(j, "delta");
    c.M = get_or<std::size_t>(j, "M", c.M);
    c.q = get_or<double>(j, "q", c.q);
    c.alpha = get_or<double>(j, "alpha", c.alpha);
    c.base_p = get_or<double>(j, "base_p", c.base_p);
    c.er_baseline = get_or<bool>(j, "er_baseline", true);
    c.options = parse_options(j);
    c.options.shared_graph_stream = get_or<bool>(j, "shared_graph_stream", true);
    return c;
}

struct RetroConfig {
    double epsilon = 0.1;
    double alpha = 0.05;
    std::size_t replicates = 10000;
    std::vector<CaseStudy> cases;
};

inline RetroConfig parse_retro_config(const json& j) {
    RetroConfig c;
    c.epsilon = get_or<double>(j, "epsilon", c.epsilon);
    c.alpha = get_or<double>(j, "alpha", c.alpha);
    c.replicates = get_or<std::size_t>(j, "replicates", c.replicates);
    if (!j.contains("cases")) {
        c.cases = case_studies();
        return c;
    }
    for (const auto& row : j.at("cases")) {
        CaseStudy cs;
        cs.name = get_required<std::string>(row, "name");
        cs.n_study = get_required<std::int64_t>(row, "n_study");
        cs.M = get_required<std::int64_t>(row, "M");
        cs.N_hat = get_required<std::int64_t>(row, "N_hat");
        cs.d_bar = get_required<double>(row, "d_bar");
        cs.d_bar_u = get_required<double>(row, "d_bar_u");
        c.cases.push_back(cs);
    }
    if (c.cases.empty()) throw ConfigError("'cases' is empty");
    return c;
}

struct GridConfig {
    StudyDesign design;
    std::int64_t M = 10000;
    std::vector<double> q;
    std::vector<double> d_bar;
};

inline GridConfig parse_grid_config(const json& j) {
    GridConfig c;
    c.design.epsilon = get_or<double>(j, "epsilon", 0.1);
    c.design.alpha = get_or<double>(j, "alpha", 0.05);
    c.design.design_effect = get_or<double>(j, "deff", 1.0);
    c.design.z_convention = parse_z(j);
    c.M = get_or<std::int64_t>(j, "M", c.M);
    c.q = real_grid(j, "q");
    c.d_bar = real_grid(j, "d_bar");
    return c;
}

// ---- CSV tables -------------------------------------------------------------------------------

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string simulate_csv(const std::vector<SimResult>& rows) {
    std::ostringstream os;
    os << "model,M,q,alpha,epsilon,n_used,mean_rel_err,sd_rel_err,coverage,replicates,degenerate,"
          "infeasible\n";
    for (const auto& r : rows) {
        os << quote(r.model) << ',' << r.M << ',' << fmt(r.q) << ',' << fmt(r.alpha) << ','
           << fmt(r.epsilon) << ',';
        if (r.infeasible) os << ",,,,,,1\n";
        else
            os << r.n_used << ',' << fmt(r.mean_rel_err) << ',' << fmt(r.sd_rel_err) << ','
               << fmt(r.coverage) << ',' << r.replicates_run << ',' << r.degenerate << ",0\n";
    }
    return os.str();
}

inline std::string sweep_csv(const std::vector<SimResult>& rows) {
    std::ostringstream os;
    os << "family,delta,M,q,alpha,epsilon,n_used,mean_rel_err,sd_rel_err,sem_rel_err,coverage,"
          "replicates,degenerate,infeasible\n";
    for (const auto& r : rows) {
        os << quote(r.model) << ',' << (r.delta ? fmt(*r.delta) : "") << ',' << r.M << ','
           << fmt(r.q) << ',' << fmt(r.alpha) << ',' << fmt(r.epsilon) << ',';
        if (r.infeasible) os << ",,,,,,,1\n";
        else
            os << r.n_used << ',' << fmt(r.mean_rel_err) << ',' << fmt(r.sd_rel_err) << ','
               << fmt(r.rel_err_sem()) << ',' << fmt(r.coverage) << ',' << r.replicates_run << ','
               << r.degenerate << ",0\n";
    }
    return os.str();
}

inline std::string retro_csv(const std::vector<CaseStudy>& cases, const std::vector<RetroResult>& res) {
    std::ostringstream os;
    os << "name,n_study,M,N_hat,d_bar,d_bar_u,rel_err,n_min\n";
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        os << quote(c.name) << ',' << c.n_study << ',' << c.M << ',' << c.N_hat << ','
           << fmt(c.d_bar) << ',' << fmt(c.d_bar_u) << ',' << fmt(res[i].rel_err) << ','
           << res[i].n_min << '\n';
    }
    return os.str();
}

inline std::string grid_csv(const SampleSizeGrid& g) {
    std::ostringstream os;
    os << "q,d_bar,n\n";
    for (std::size_t i = 0; i < g.q.size(); ++i)
        for (std::size_t k = 0; k < g.d_bar.size(); ++k)
            os << fmt(g.q[i]) << ',' << fmt(g.d_bar[k]) << ',' << g.at(i, k) << '\n';
    return os.str();
}

// ---- output files ------------------------------------------------------------------------------

/// Writes via a sibling temporary and rename, so a failed run leaves no partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw ConfigError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot rename " + tmp.string() + ": " + ec.message());
}

/// UTC timestamp, taken from SOURCE_DATE_EPOCH when set.
inline std::string timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::atoll(epoch));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json make_manifest(const std::string& command, const json& config, std::uint64_t seed,
                          const std::string& version, const std::string& output,
                          const json& notes) {
    return json{{"manifest_version", 1}, {"command", command}, {"config", config},
                {"seed", seed},          {"tool_version", version}, {"timestamp", timestamp()},
                {"output", output},      {"notes", notes}};
}

} // namespace nsumkit::cli
