#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ksmf/initial.hpp"

namespace ksmf {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration: sweep axes, run sizes, metric selection and
/// output location. Parsed from a flat key = value file; unknown keys are
/// errors so sweep definitions cannot be silently mistyped.
struct ExperimentConfig {
    std::vector<int> n_list{1024};
    std::vector<double> chi_list{4.0 * 3.14159265358979323846};
    std::vector<double> alpha_list{0.25};
    double horizon = 0.5;
    int replicas = 8;
    double step = 0.0;  ///< 0: per-cell default min(1e-3, 0.1 nu^-2)
    std::uint64_t seed = 1;

    double box_half_width = 20.0;
    int grid_n = 256;

    std::string init_kind = "gaussian";  ///< gaussian | disc | mixture
    double init_sigma = 1.0;
    double init_radius = 1.0;
    double init_center_x = 0.0;
    double init_center_y = 0.0;
    /// mixture components "x,y,sigma,weight" joined with ';'
    std::string init_components;

    bool metric_w1 = true;
    int w1_samples = 512;
    int w1_repeats = 3;
    bool w1_control = true;
    int w1_control_repeats = 25;
    bool metric_loln = true;
    int loln_redraws = 50;
    bool split_diagnostics = false;
    double nu2 = 0.0;  ///< 0: (log N)^(3/2) where valid
    bool z_diagnostics = false;
    int z_grid_points = 32;

    int energy_every = 10;     ///< macro-steps between energy reports
    int field_snapshots = 0;   ///< binary field exports per cell
    std::string out_dir = "out";

    void validate() const;  ///< throws ConfigError
    InitialDensitySpec initial_density() const;

    /// Canonical text form: every key, fixed order. Feeding it back
    /// through the parser reproduces the configuration; it is also the
    /// hashed content for manifests.
    std::string canonical_text() const;
};

/// Parse a config file; errors name the offending path / key / value.
ExperimentConfig load_config(const std::string& path);

/// Parse from in-memory text (tests, defaults round-trip).
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin = "<memory>");

/// The default configuration with commentary, suitable for --print-defaults.
void print_default_config(std::ostream& out);

} // namespace ksmf
