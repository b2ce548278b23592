#include "ksmf/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace ksmf {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Numbers with an optional "pi" suffix: "4pi" = 4 * pi, "pi" = pi.
double parse_number(const std::string& raw, const std::string& key) {
    std::string text = trim(raw);
    double factor = 1.0;
    if (text.size() >= 2 && text.substr(text.size() - 2) == "pi") {
        factor = M_PI;
        text = trim(text.substr(0, text.size() - 2));
        if (text.empty()) text = "1";
    }
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has non-numeric value '" +
                          raw + "'");
    }
    if (used != text.size())
        throw ConfigError("config: trailing characters in value '" + raw +
                          "' for key '" + key + "'");
    return value * factor;
}

long parse_integer(const std::string& raw, const std::string& key) {
    const double v = parse_number(raw, key);
    const long n = std::lround(v);
    if (std::abs(v - static_cast<double>(n)) > 1e-9)
        throw ConfigError("config: key '" + key + "' expects an integer, got '" +
                          raw + "'");
    return n;
}

bool parse_bool(const std::string& raw, const std::string& key) {
    const std::string v = trim(raw);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" +
                      raw + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    if (!parts.empty() && parts.back().empty()) parts.pop_back();
    return parts;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void ExperimentConfig::validate() const {
    if (n_list.empty() || chi_list.empty() || alpha_list.empty())
        throw ConfigError("config: sweep lists must be non-empty");
    for (int n : n_list)
        if (n < 1) throw ConfigError("config: n_list entries must be positive");
    for (double chi : chi_list) {
        if (chi < 0.0)
            throw ConfigError("config: chi must be non-negative");
        if (chi >= 8.0 * M_PI)
            std::fprintf(stderr,
                         "config: warning: chi = %.6g is at or beyond the "
                         "subcritical threshold 8 pi; expect aggregation-"
                         "dominated dynamics\n",
                         chi);
    }
    for (double a : alpha_list)
        if (!(a > 0.0 && a < 0.5))
            throw ConfigError("config: alpha must lie in (0, 1/2)");
    if (!(horizon >= 0.0)) throw ConfigError("config: horizon must be >= 0");
    if (replicas < 1) throw ConfigError("config: replicas must be >= 1");
    if (step < 0.0) throw ConfigError("config: step must be >= 0");
    if (grid_n < 8) throw ConfigError("config: grid_n too small");
    if (!(box_half_width > 0.0))
        throw ConfigError("config: box_half_width must be positive");
    if (w1_samples < 2 || w1_samples > 2048)
        throw ConfigError("config: w1_samples must lie in [2, 2048]");
    if (w1_repeats < 1) throw ConfigError("config: w1_repeats must be >= 1");
    if (w1_control_repeats < 1)
        throw ConfigError("config: w1_control_repeats must be >= 1");
    if (loln_redraws < 1) throw ConfigError("config: loln_redraws must be >= 1");
    if (z_grid_points < 2 || z_grid_points > 32)
        throw ConfigError("config: z_grid_points must lie in [2, 32]");
    if (energy_every < 1) throw ConfigError("config: energy_every must be >= 1");
    if (field_snapshots < 0)
        throw ConfigError("config: field_snapshots must be >= 0");
    if (nu2 < 0.0) throw ConfigError("config: nu2 must be >= 0");
    initial_density();  // validates the density block
}

InitialDensitySpec ExperimentConfig::initial_density() const {
    const Vec2 center{init_center_x, init_center_y};
    if (init_kind == "gaussian")
        return InitialDensitySpec::gaussian(center, init_sigma);
    if (init_kind == "disc")
        return InitialDensitySpec::uniform_disc(center, init_radius);
    if (init_kind == "mixture") {
        std::vector<InitialDensitySpec::Component> components;
        for (const std::string& chunk : split(init_components, ';')) {
            const auto fields = split(chunk, ',');
            if (fields.size() != 4)
                throw ConfigError(
                    "config: mixture components need 'x,y,sigma,weight'");
            InitialDensitySpec::Component c;
            c.mean = {parse_number(fields[0], "init_components"),
                      parse_number(fields[1], "init_components")};
            c.sigma = parse_number(fields[2], "init_components");
            c.weight = parse_number(fields[3], "init_components");
            components.push_back(c);
        }
        try {
            return InitialDensitySpec::mixture(components);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    throw ConfigError("config: unknown init_kind '" + init_kind +
                      "' (gaussian | disc | mixture)");
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream out;
    auto list_int = [&](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    auto list_num = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + fmt(v[i]);
        return s;
    };
    out << "n_list = " << list_int(n_list) << "\n";
    out << "chi_list = " << list_num(chi_list) << "\n";
    out << "alpha_list = " << list_num(alpha_list) << "\n";
    out << "horizon = " << fmt(horizon) << "\n";
    out << "replicas = " << replicas << "\n";
    out << "step = " << fmt(step) << "\n";
    out << "seed = " << seed << "\n";
    out << "box_half_width = " << fmt(box_half_width) << "\n";
    out << "grid_n = " << grid_n << "\n";
    out << "init_kind = " << init_kind << "\n";
    out << "init_sigma = " << fmt(init_sigma) << "\n";
    out << "init_radius = " << fmt(init_radius) << "\n";
    out << "init_center_x = " << fmt(init_center_x) << "\n";
    out << "init_center_y = " << fmt(init_center_y) << "\n";
    out << "init_components = " << init_components << "\n";
    out << "metric_w1 = " << (metric_w1 ? "true" : "false") << "\n";
    out << "w1_samples = " << w1_samples << "\n";
    out << "w1_repeats = " << w1_repeats << "\n";
    out << "w1_control = " << (w1_control ? "true" : "false") << "\n";
    out << "w1_control_repeats = " << w1_control_repeats << "\n";
    out << "metric_loln = " << (metric_loln ? "true" : "false") << "\n";
    out << "loln_redraws = " << loln_redraws << "\n";
    out << "split_diagnostics = " << (split_diagnostics ? "true" : "false")
        << "\n";
    out << "nu2 = " << fmt(nu2) << "\n";
    out << "z_diagnostics = " << (z_diagnostics ? "true" : "false") << "\n";
    out << "z_grid_points = " << z_grid_points << "\n";
    out << "energy_every = " << energy_every << "\n";
    out << "field_snapshots = " << field_snapshots << "\n";
    // out_dir is deliberately not part of the canonical identity: the same
    // experiment written elsewhere is the same experiment.
    return out.str();
}

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin) {
    ExperimentConfig config;
    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, Setter> schema = {
        {"n_list",
         [&](const std::string& v) {
             config.n_list.clear();
             for (const auto& item : split(v, ','))
                 config.n_list.push_back(
                     static_cast<int>(parse_integer(item, "n_list")));
         }},
        {"chi_list",
         [&](const std::string& v) {
             config.chi_list.clear();
             for (const auto& item : split(v, ','))
                 config.chi_list.push_back(parse_number(item, "chi_list"));
         }},
        {"alpha_list",
         [&](const std::string& v) {
             config.alpha_list.clear();
             for (const auto& item : split(v, ','))
                 config.alpha_list.push_back(parse_number(item, "alpha_list"));
         }},
        {"horizon",
         [&](const std::string& v) { config.horizon = parse_number(v, "horizon"); }},
        {"replicas",
         [&](const std::string& v) {
             config.replicas = static_cast<int>(parse_integer(v, "replicas"));
         }},
        {"step",
         [&](const std::string& v) { config.step = parse_number(v, "step"); }},
        {"seed",
         [&](const std::string& v) {
             config.seed = static_cast<std::uint64_t>(std::stoull(trim(v)));
         }},
        {"box_half_width",
         [&](const std::string& v) {
             config.box_half_width = parse_number(v, "box_half_width");
         }},
        {"grid_n",
         [&](const std::string& v) {
             config.grid_n = static_cast<int>(parse_integer(v, "grid_n"));
         }},
        {"init_kind",
         [&](const std::string& v) { config.init_kind = trim(v); }},
        {"init_sigma",
         [&](const std::string& v) {
             config.init_sigma = parse_number(v, "init_sigma");
         }},
        {"init_radius",
         [&](const std::string& v) {
             config.init_radius = parse_number(v, "init_radius");
         }},
        {"init_center_x",
         [&](const std::string& v) {
             config.init_center_x = parse_number(v, "init_center_x");
         }},
        {"init_center_y",
         [&](const std::string& v) {
             config.init_center_y = parse_number(v, "init_center_y");
         }},
        {"init_components",
         [&](const std::string& v) { config.init_components = trim(v); }},
        {"metric_w1",
         [&](const std::string& v) { config.metric_w1 = parse_bool(v, "metric_w1"); }},
        {"w1_samples",
         [&](const std::string& v) {
             config.w1_samples = static_cast<int>(parse_integer(v, "w1_samples"));
         }},
        {"w1_repeats",
         [&](const std::string& v) {
             config.w1_repeats = static_cast<int>(parse_integer(v, "w1_repeats"));
         }},
        {"w1_control",
         [&](const std::string& v) { config.w1_control = parse_bool(v, "w1_control"); }},
        {"w1_control_repeats",
         [&](const std::string& v) {
             config.w1_control_repeats =
                 static_cast<int>(parse_integer(v, "w1_control_repeats"));
         }},
        {"metric_loln",
         [&](const std::string& v) {
             config.metric_loln = parse_bool(v, "metric_loln");
         }},
        {"loln_redraws",
         [&](const std::string& v) {
             config.loln_redraws =
                 static_cast<int>(parse_integer(v, "loln_redraws"));
         }},
        {"split_diagnostics",
         [&](const std::string& v) {
             config.split_diagnostics = parse_bool(v, "split_diagnostics");
         }},
        {"nu2",
         [&](const std::string& v) { config.nu2 = parse_number(v, "nu2"); }},
        {"z_diagnostics",
         [&](const std::string& v) {
             config.z_diagnostics = parse_bool(v, "z_diagnostics");
         }},
        {"z_grid_points",
         [&](const std::string& v) {
             config.z_grid_points =
                 static_cast<int>(parse_integer(v, "z_grid_points"));
         }},
        {"energy_every",
         [&](const std::string& v) {
             config.energy_every =
                 static_cast<int>(parse_integer(v, "energy_every"));
         }},
        {"field_snapshots",
         [&](const std::string& v) {
             config.field_snapshots =
                 static_cast<int>(parse_integer(v, "field_snapshots"));
         }},
        {"out_dir", [&](const std::string& v) { config.out_dir = trim(v); }},
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = schema.find(key);
        if (it == schema.end())
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": unknown key '" + key + "'");
        it->second(value);
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path);
}

void print_default_config(std::ostream& out) {
    const ExperimentConfig defaults;
    out << "# Sweep axes: every (n, chi, alpha) combination is one cell.\n"
        << "# Numeric values accept a 'pi' suffix (4pi = 4 * pi).\n"
        << "n_list = 1024\n"
        << "chi_list = 4pi\n"
        << "alpha_list = 0.25\n"
        << "\n"
        << "# Time horizon, replicas per cell, Euler step (0 = automatic\n"
        << "# min(1e-3, 0.1 nu^-2)), master seed.\n"
        << "horizon = 0.5\n"
        << "replicas = " << defaults.replicas << "\n"
        << "step = 0\n"
        << "seed = 1\n"
        << "\n"
        << "# Density grid: box [-L, L]^2 and resolution.\n"
        << "box_half_width = 20\n"
        << "grid_n = 256\n"
        << "\n"
        << "# Initial density: gaussian | disc | mixture.\n"
        << "# mixture: init_components = x,y,sigma,weight; x,y,sigma,weight\n"
        << "init_kind = gaussian\n"
        << "init_sigma = 1\n"
        << "init_radius = 1\n"
        << "init_center_x = 0\n"
        << "init_center_y = 0\n"
        << "init_components =\n"
        << "\n"
        << "# Metric selection.\n"
        << "metric_w1 = true\n"
        << "w1_samples = 512\n"
        << "w1_repeats = 3\n"
        << "w1_control = true\n"
        << "w1_control_repeats = 25\n"
        << "metric_loln = true\n"
        << "loln_redraws = 50\n"
        << "split_diagnostics = false\n"
        << "nu2 = 0\n"
        << "z_diagnostics = false\n"
        << "z_grid_points = 32\n"
        << "\n"
        << "# Output cadence and location.\n"
        << "energy_every = 10\n"
        << "field_snapshots = 0\n"
        << "out_dir = out\n";
}

} // namespace ksmf
