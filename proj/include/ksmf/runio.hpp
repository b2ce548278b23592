#pragma once

#include <string>
#include <vector>

#include "ksmf/field.hpp"
#include "ksmf/pde.hpp"
#include "ksmf/sde.hpp"

namespace ksmf {

/// Round-trip decimal formatting; the same value always prints the same
/// bytes, which is what the byte-identical output contract rests on.
std::string format_double(double v);

std::string sha256_hex(const std::string& payload);

/// Per-replica series: t, sup_dist, mean_sq_radius, n_pairs_in_cutoff.
void write_run_csv(const std::string& path, const RunRecord& record);

/// Companion manifest for one run: parameters, seed, failure state, and a
/// content hash over the series CSV bytes.
void write_run_manifest(const std::string& path, const RunRecord& record,
                        const std::string& csv_path);

/// Z diagnostic triples: tau, s, dist (recorded pairs only).
void write_zdiag_csv(const std::string& path, const RunRecord& record);

/// Energy series: t, mass, m2, entropy, interaction, free_energy.
void write_energy_csv(const std::string& path,
                      const std::vector<EnergyReport>& reports);

struct MetricRow {
    std::string metric;
    int n = 0;
    double chi = 0.0;
    double alpha = 0.0;
    int replica = 0;
    double t = 0.0;
    double value = 0.0;
};

/// Tidy metric rows: metric, n, chi, alpha, replica, t, value.
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

/// Flat little-endian snapshot: f64 box half-width, i64 grid size, f64
/// time stamp, then row-major f64 cell values.
void write_field_binary(const std::string& path, const DensityField& field);
DensityField read_field_binary(const std::string& path);

} // namespace ksmf
