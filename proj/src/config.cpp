#include "tcmot/config.hpp"

#include "tcmot/core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tcmot {
namespace {

// Calls f(name, field&) for every serializable field. Keys match the field names.
template <class C, class F>
void visit_fields(C& c, F&& f) {
    f("lambda0", c.lambda0);
    f("lambda", c.lambda);
    f("eta", c.eta);
    f("c_weight", c.c_weight);
    f("margin_b", c.margin_b);
    f("learning_rate_beta", c.learning_rate_beta);
    f("kappa", c.kappa);
    f("sigma_motion", c.sigma_motion);
    f("omega", c.omega);
    f("column_norm", c.column_norm);
    f("segment_length", c.segment_length);
    f("max_gap", c.max_gap);
    f("motion_gate", c.motion_gate);
    f("d_in", c.d_in);
    f("d_hidden", c.d_hidden);
    f("d_emb", c.d_emb);
    f("pairs_per_segment", c.pairs_per_segment);
    f("metric_epochs", c.metric_epochs);
    f("finetune_epochs", c.finetune_epochs);
    f("batch_size", c.batch_size);
    f("warmup_epochs", c.warmup_epochs);
    f("use_segment_metrics", c.use_segment_metrics);
    f("theta_link", c.trackgen.theta_link);
    f("theta_margin", c.trackgen.theta_margin);
    f("w_pos", c.trackgen.w_pos);
    f("w_size", c.trackgen.w_size);
    f("w_app", c.trackgen.w_app);
    f("pos_scale", c.trackgen.pos_scale);
    f("size_scale", c.trackgen.size_scale);
    f("app_scale", c.trackgen.app_scale);
    f("min_tracklet_len", c.trackgen.min_tracklet_len);
    f("beta0", c.solver.beta0);
    f("beta_max", c.solver.beta_max);
    f("beta_growth", c.solver.beta_growth);
    f("sinkhorn_iters", c.solver.sinkhorn_iters);
    f("convergence_tol", c.solver.convergence_tol);
    f("binarize_threshold", c.solver.binarize_threshold);
    f("rng_seed", c.rng_seed);
}

std::string format_value(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(ColumnNorm v) { return v == ColumnNorm::Max ? "max" : "sum"; }
std::string format_value(const std::array<double, 2>& v) {
    return format_value(v[0]) + "," + format_value(v[1]);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text) {
    throw InputError("config key '" + key + "': cannot parse '" + text + "'");
}

void parse_value(const std::string& key, const std::string& text, double& out) {
    std::size_t used = 0;
    try {
        out = std::stod(text, &used);
    } catch (const std::exception&) {
        bad_value(key, text);
    }
    if (used != text.size()) bad_value(key, text);
}

template <class Int>
void parse_integer(const std::string& key, const std::string& text, Int& out) {
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, text);
}

void parse_value(const std::string& key, const std::string& text, int& out) {
    parse_integer(key, text, out);
}
void parse_value(const std::string& key, const std::string& text, std::uint64_t& out) {
    parse_integer(key, text, out);
}
void parse_value(const std::string& key, const std::string& text, bool& out) {
    if (text == "true" || text == "1") {
        out = true;
    } else if (text == "false" || text == "0") {
        out = false;
    } else {
        bad_value(key, text);
    }
}
void parse_value(const std::string& key, const std::string& text, ColumnNorm& out) {
    if (text == "max") {
        out = ColumnNorm::Max;
    } else if (text == "sum") {
        out = ColumnNorm::Sum;
    } else {
        bad_value(key, text);
    }
}
void parse_value(const std::string& key, const std::string& text, std::array<double, 2>& out) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) bad_value(key, text);
    parse_value(key, text.substr(0, comma), out[0]);
    parse_value(key, text.substr(comma + 1), out[1]);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void invalid(const std::string& what) { throw InputError(what); }

}  // namespace

Config validate_config(const Config& cfg) {
    auto positive = [](const char* name, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) invalid(std::string(name) + " must be > 0");
    };
    positive("lambda0", cfg.lambda0);
    positive("lambda", cfg.lambda);
    positive("eta", cfg.eta);
    positive("c_weight", cfg.c_weight);
    if (!(cfg.margin_b >= 0.0 && cfg.margin_b <= 1.0)) invalid("margin_b out of [0,1]");
    positive("learning_rate_beta", cfg.learning_rate_beta);
    if (cfg.kappa < 2) invalid("kappa >= 2 required");
    positive("sigma_motion[0]", cfg.sigma_motion[0]);
    positive("sigma_motion[1]", cfg.sigma_motion[1]);
    if (!(cfg.omega >= 0.0 && cfg.omega <= 1.0)) invalid("omega out of [0,1]");
    if (!(cfg.motion_gate >= 0.0 && cfg.motion_gate < 1.0)) invalid("motion_gate out of [0,1)");
    if (cfg.segment_length < 1) invalid("segment_length must be >= 1");
    if (cfg.max_gap < 0) invalid("max_gap must be >= 0");
    if (cfg.d_in < 1 || cfg.d_hidden < 0 || cfg.d_emb < 1) invalid("d_in, d_emb must be >= 1 and d_hidden >= 0");
    if (cfg.pairs_per_segment < 1) invalid("pairs_per_segment must be >= 1");
    if (cfg.metric_epochs < 0 || cfg.finetune_epochs < 0 || cfg.warmup_epochs < 0) {
        invalid("epoch counts must be >= 0");
    }
    if (cfg.batch_size < 1) invalid("batch_size must be >= 1");

    const auto& tg = cfg.trackgen;
    if (!(tg.theta_link > 0.0 && tg.theta_link < 1.0)) invalid("theta_link out of (0,1)");
    if (!(tg.theta_margin >= 0.0)) invalid("theta_margin must be >= 0");
    if (tg.w_pos < 0.0 || tg.w_size < 0.0 || tg.w_app < 0.0) invalid("trackgen weights must be >= 0");
    if (std::abs(tg.w_pos + tg.w_size + tg.w_app - 1.0) > 1e-9) invalid("trackgen weights must sum to 1");
    positive("pos_scale", tg.pos_scale);
    positive("size_scale", tg.size_scale);
    positive("app_scale", tg.app_scale);
    if (tg.min_tracklet_len < 1) invalid("min_tracklet_len must be >= 1");

    const auto& sa = cfg.solver;
    positive("beta0", sa.beta0);
    if (!(sa.beta_growth > 1.0)) invalid("beta_growth must be > 1");
    if (!(sa.beta_max >= sa.beta0)) invalid("beta_max must be >= beta0");
    if (sa.sinkhorn_iters < 1) invalid("sinkhorn_iters must be >= 1");
    positive("convergence_tol", sa.convergence_tol);
    if (!(sa.binarize_threshold > 0.5 && sa.binarize_threshold <= 1.0)) {
        invalid("binarize_threshold out of (0.5,1]");
    }
    return cfg;
}

std::map<std::string, std::string> config_to_map(const Config& cfg) {
    std::map<std::string, std::string> out;
    visit_fields(cfg, [&](const char* name, const auto& field) { out[name] = format_value(field); });
    return out;
}

Config apply_config_values(Config base, const std::map<std::string, std::string>& values) {
    for (const auto& [key, text] : values) {
        bool found = false;
        visit_fields(base, [&](const char* name, auto& field) {
            if (key == name) {
                parse_value(key, text, field);
                found = true;
            }
        });
        if (!found) throw InputError("unknown config key '" + key + "'");
    }
    return base;
}

void write_config(std::ostream& os, const Config& cfg) {
    visit_fields(cfg, [&](const char* name, const auto& field) {
        os << name << '=' << format_value(field) << '\n';
    });
}

Config read_config(std::istream& is, const Config& base) {
    std::map<std::string, std::string> values;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return apply_config_values(base, values);
}

Config load_config_file(const std::string& path, const Config& base) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    return read_config(in, base);
}

void save_config_file(const std::string& path, const Config& cfg) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write config file " + path);
    write_config(out, cfg);
}

}  // namespace tcmot
