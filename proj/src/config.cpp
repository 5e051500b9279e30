#include "qpde/config.hpp"

#include "qpde/network.hpp"
#include "qpde/oracles.hpp"
#include "qpde/truncation.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

namespace qpde {

namespace {

// Seeds and counts share one parser.
static_assert(std::is_same_v<std::uint64_t, std::size_t>, "64-bit size_t expected");

std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

// Parsers throw std::invalid_argument with a short reason; the caller adds
// the field name and line number.
double parse_value(const std::string& s, double*) {
    if (s.empty()) throw std::invalid_argument("expected a number");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw std::invalid_argument("expected a number, got '" + s + "'");
    return v;
}

template <class U>
U parse_unsigned(const std::string& s) {
    U v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
    return v;
}

std::size_t parse_value(const std::string& s, std::size_t*) { return parse_unsigned<std::size_t>(s); }

int parse_value(const std::string& s, int*) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected an integer, got '" + s + "'");
    return v;
}

bool parse_value(const std::string& s, bool*) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::string parse_value(const std::string& s, std::string*) { return s; }

template <class T>
std::vector<T> parse_value(const std::string& s, std::vector<T>*) {
    std::vector<T> out;
    for (const std::string& item : split_list(s)) out.push_back(parse_value(item, static_cast<T*>(nullptr)));
    return out;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(const std::string& v) { return v; }

template <class T>
std::string format_value(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_value(v[i]);
    }
    return out;
}

struct Field {
    std::string section;
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class Sub, class T>
Field field(std::string section, std::string key, Sub ExperimentConfig::*sub, T Sub::*member) {
    return Field{std::move(section), std::move(key),
                 [sub, member](ExperimentConfig& c, const std::string& s) {
                     (c.*sub).*member = parse_value(s, static_cast<T*>(nullptr));
                 },
                 [sub, member](const ExperimentConfig& c) { return format_value((c.*sub).*member); }};
}

const std::vector<Field>& fields() {
    using C = ExperimentConfig;
    static const std::vector<Field> table = {
        field("problem", "tag", &C::problem, &C::Problem::tag),
        field("problem", "operator", &C::problem, &C::Problem::op),
        field("problem", "gamma", &C::problem, &C::Problem::gamma),
        field("problem", "drift_scale", &C::problem, &C::Problem::drift_scale),
        field("problem", "diffusion", &C::problem, &C::Problem::diffusion),
        field("problem", "source", &C::problem, &C::Problem::source),

        field("network", "width", &C::network, &C::Network::width),
        field("network", "beta", &C::network, &C::Network::beta),
        field("network", "activation", &C::network, &C::Network::activation),
        field("network", "c_bound", &C::network, &C::Network::c_bound),
        field("network", "w_std", &C::network, &C::Network::w_std),
        field("network", "b_std", &C::network, &C::Network::b_std),
        field("network", "allow_nontheoretical_beta", &C::network, &C::Network::allow_nontheoretical_beta),

        field("trainer", "alpha", &C::trainer, &C::Trainer::alpha),
        field("trainer", "step_size", &C::trainer, &C::Trainer::step_size),
        field("trainer", "batch", &C::trainer, &C::Trainer::batch),
        field("trainer", "max_steps", &C::trainer, &C::Trainer::max_steps),
        field("trainer", "tolerance", &C::trainer, &C::Trainer::tolerance),
        field("trainer", "resample_each_step", &C::trainer, &C::Trainer::resample_each_step),
        field("trainer", "telemetry_every", &C::trainer, &C::Trainer::telemetry_every),
        field("trainer", "checkpoint_every", &C::trainer, &C::Trainer::checkpoint_every),
        field("trainer", "discretized_form_factor", &C::trainer, &C::Trainer::discretized_form_factor),

        field("truncation", "mode", &C::truncation, &C::Truncation::mode),
        field("truncation", "delta", &C::truncation, &C::Truncation::delta),

        field("limit", "features", &C::limit, &C::Limit::features),
        field("limit", "quad_points", &C::limit, &C::Limit::quad_points),
        field("limit", "h", &C::limit, &C::Limit::h),
        field("limit", "steps", &C::limit, &C::Limit::steps),
        field("limit", "diagnostics_every", &C::limit, &C::Limit::diagnostics_every),
        field("limit", "compare_with_solve", &C::limit, &C::Limit::compare_with_solve),
        field("limit", "compare_widths", &C::limit, &C::Limit::compare_widths),
        field("limit", "compare_seeds", &C::limit, &C::Limit::compare_seeds),
        field("limit", "compare_test_points", &C::limit, &C::Limit::compare_test_points),

        field("diagnostics", "grid", &C::diagnostics, &C::Diagnostics::grid),
        field("diagnostics", "grid_points", &C::diagnostics, &C::Diagnostics::grid_points),
        field("diagnostics", "grid_lo", &C::diagnostics, &C::Diagnostics::grid_lo),
        field("diagnostics", "grid_hi", &C::diagnostics, &C::Diagnostics::grid_hi),
        field("diagnostics", "shells", &C::diagnostics, &C::Diagnostics::shells),
        field("diagnostics", "shell_points", &C::diagnostics, &C::Diagnostics::shell_points),
        field("diagnostics", "kernel_points", &C::diagnostics, &C::Diagnostics::kernel_points),
        field("diagnostics", "drift_widths", &C::diagnostics, &C::Diagnostics::drift_widths),
        field("diagnostics", "drift_seeds", &C::diagnostics, &C::Diagnostics::drift_seeds),
        field("diagnostics", "drift_steps", &C::diagnostics, &C::Diagnostics::drift_steps),
        field("diagnostics", "drift_alpha", &C::diagnostics, &C::Diagnostics::drift_alpha),
        field("diagnostics", "limit_kernel_features", &C::diagnostics, &C::Diagnostics::limit_kernel_features),
        field("diagnostics", "checkpoints", &C::diagnostics, &C::Diagnostics::checkpoints),

        field("run", "seed", &C::run, &C::Run::seed),
        field("run", "out", &C::run, &C::Run::out),
        field("run", "threads", &C::run, &C::Run::threads),
        field("run", "timing", &C::run, &C::Run::timing),
    };
    return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(const std::string& tag) {
    ExperimentConfig c;
    c.problem.tag = tag;
    c.run.out = "runs/" + tag;
    if (tag == "bm1d") {
        c.diagnostics.grid = "uniform_1d";
    } else if (tag == "bm2d") {
        c.trainer.max_steps = 30000;
        c.diagnostics.grid = "random";
        c.diagnostics.grid_points = 1000;
    } else if (tag == "bm6d") {
        c.trainer.max_steps = 30000;
        c.diagnostics.grid = "radial";
    } else {
        throw ConfigError("problem.tag: unknown problem '" + tag + "' (expected bm1d, bm2d or bm6d)");
    }
    return c;
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig base) {
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    std::set<std::string> seen;
    std::vector<std::string> errors;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (body.front() == '[') {
            if (body.back() != ']') {
                errors.push_back(where + "unterminated section header");
                continue;
            }
            section = trim(std::string_view(body).substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            errors.push_back(where + "expected 'key = value'");
            continue;
        }
        std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        std::string sec = section;
        if (const auto dot = key.find('.'); dot != std::string::npos) {
            sec = key.substr(0, dot);
            key = key.substr(dot + 1);
        }
        const std::string name = sec + "." + key;
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(),
                                     [&](const Field& f) { return f.section == sec && f.key == key; });
        if (it == table.end()) {
            errors.push_back(where + "unknown key " + name);
            continue;
        }
        if (!seen.insert(name).second) {
            errors.push_back(where + name + " given twice");
            continue;
        }
        try {
            it->set(base, value);
        } catch (const std::exception& e) {
            errors.push_back(where + name + ": " + e.what());
        }
    }
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    try {
        return parse_config(is);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
    std::string section;
    for (const Field& f : fields()) {
        if (f.section != section) {
            if (!section.empty()) os << '\n';
            section = f.section;
            os << '[' << section << "]\n";
        }
        os << f.key << " = " << f.get(cfg) << '\n';
    }
}

std::string config_to_string(const ExperimentConfig& cfg) {
    std::ostringstream os;
    write_config(os, cfg);
    return os.str();
}

double resolved_delta(const ExperimentConfig& cfg) {
    return cfg.truncation.delta > 0.0 ? cfg.truncation.delta : Truncation::default_delta(cfg.network.beta);
}

void validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> errors;
    auto check = [&](const std::string& field, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            errors.push_back(field + ": " + e.what());
        }
    };
    auto require = [&](bool ok, const std::string& field, const std::string& msg) {
        if (!ok) errors.push_back(field + ": " + msg);
    };

    check("problem.tag", [&] { (void)parse_problem(cfg.problem.tag); });
    require(cfg.problem.op == "model_bm" || cfg.problem.op == "linear_generator", "problem.operator",
            "unknown operator '" + cfg.problem.op + "' (expected model_bm or linear_generator)");
    require(cfg.problem.gamma > 0.0, "problem.gamma", "must be positive");
    require(cfg.problem.diffusion > 0.0, "problem.diffusion", "must be positive (uniform ellipticity)");
    if (cfg.problem.tag == "bm6d" && cfg.problem.op == "model_bm")
        require(cfg.problem.gamma == 1.0, "problem.gamma", "the bm6d reference solution is only available for gamma = 1");

    require(cfg.network.width >= 1, "network.width", "must be >= 1");
    check("network.beta", [&] { validate_beta(cfg.network.beta, cfg.network.allow_nontheoretical_beta); });
    check("network.activation", [&] {
        const ActivationKind k = parse_activation(cfg.network.activation);
        if (k == ActivationKind::corrupted_sigmoid) throw std::invalid_argument("test-only activation");
    });
    require(cfg.network.c_bound > 0.0, "network.c_bound", "must be positive");
    require(cfg.network.w_std > 0.0, "network.w_std", "must be positive");
    require(cfg.network.b_std >= 0.0, "network.b_std", "must be >= 0");

    require(cfg.trainer.alpha > 0.0, "trainer.alpha", "must be positive");
    require(cfg.trainer.step_size > 0.0, "trainer.step_size", "must be positive");
    require(cfg.trainer.batch >= 1, "trainer.batch", "must be >= 1");
    require(cfg.trainer.max_steps >= 1, "trainer.max_steps", "must be >= 1");
    require(cfg.trainer.tolerance >= 0.0, "trainer.tolerance", "must be >= 0");
    require(cfg.trainer.telemetry_every >= 1, "trainer.telemetry_every", "must be >= 1");
    if (cfg.trainer.discretized_form_factor)
        require(cfg.problem.op == "model_bm", "trainer.discretized_form_factor", "needs the model_bm operator");

    check("truncation.mode", [&] {
        if (parse_truncation_mode(cfg.truncation.mode) == TruncationMode::smooth)
            validate_delta(resolved_delta(cfg), cfg.network.beta);
    });

    require(cfg.limit.features >= 1, "limit.features", "must be >= 1");
    require(cfg.limit.quad_points >= 1, "limit.quad_points", "must be >= 1");
    require(cfg.limit.h > 0.0, "limit.h", "must be positive");
    require(cfg.limit.diagnostics_every >= 1, "limit.diagnostics_every", "must be >= 1");
    require(cfg.limit.compare_test_points >= 1, "limit.compare_test_points", "must be >= 1");
    if (cfg.limit.compare_with_solve) {
        require(!cfg.limit.compare_widths.empty(), "limit.compare_widths", "needs at least one width");
        require(!cfg.limit.compare_seeds.empty(), "limit.compare_seeds", "needs at least one seed");
    }

    const std::string& g = cfg.diagnostics.grid;
    require(g == "auto" || g == "uniform_1d" || g == "random" || g == "radial", "diagnostics.grid",
            "unknown grid '" + g + "' (expected auto, uniform_1d, random or radial)");
    if (g == "uniform_1d") require(cfg.problem.tag == "bm1d", "diagnostics.grid", "uniform_1d needs a 1-d problem");
    require(cfg.diagnostics.grid_points >= 1, "diagnostics.grid_points", "must be >= 1");
    require(cfg.diagnostics.grid_lo < cfg.diagnostics.grid_hi, "diagnostics.grid_lo", "must be below grid_hi");
    require(cfg.diagnostics.grid_lo > -1.0 && cfg.diagnostics.grid_hi < 1.0, "diagnostics.grid_hi",
            "the uniform grid must lie inside the open interval (-1, 1)");
    for (double r : cfg.diagnostics.shells)
        require(r >= 0.0 && r <= 1.0, "diagnostics.shells", "radius " + format_value(r) + " outside [0, 1]");
    require(cfg.diagnostics.shell_points >= 1, "diagnostics.shell_points", "must be >= 1");
    require(cfg.diagnostics.kernel_points >= 1, "diagnostics.kernel_points", "must be >= 1");
    require(cfg.diagnostics.drift_alpha > 0.0, "diagnostics.drift_alpha", "must be positive");
    for (std::size_t w : cfg.diagnostics.drift_widths) require(w >= 1, "diagnostics.drift_widths", "widths must be >= 1");
    for (std::size_t p : cfg.diagnostics.limit_kernel_features)
        require(p >= 1, "diagnostics.limit_kernel_features", "feature counts must be >= 1");

    require(cfg.run.threads >= 1, "run.threads", "must be >= 1");
    require(cfg.run.timing == "measured" || cfg.run.timing == "off", "run.timing", "expected measured or off");
    require(!cfg.run.out.empty(), "run.out", "must not be empty");

    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

}  // namespace qpde
