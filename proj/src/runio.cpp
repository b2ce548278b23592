#include "ksmf/runio.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace ksmf {

static_assert(std::endian::native == std::endian::little,
              "field snapshots are defined little-endian");

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string sha256_hex(const std::string& payload) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, payload.data(), payload.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256: digest failure");
    }
    EVP_MD_CTX_free(ctx);
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace {

std::ofstream open_text(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // no platform newline games
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

} // namespace

void write_run_csv(const std::string& path, const RunRecord& record) {
    auto out = open_text(path);
    out << "t,sup_dist,mean_sq_radius,n_pairs_in_cutoff\n";
    for (std::size_t k = 0; k < record.times.size(); ++k) {
        out << format_double(record.times[k]) << ','
            << format_double(record.sup_dist[k]) << ','
            << format_double(record.mean_sq_radius[k]) << ','
            << record.pairs_in_cutoff[k] << '\n';
    }
}

void write_run_manifest(const std::string& path, const RunRecord& record,
                        const std::string& csv_path) {
    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot hash '" + csv_path + "'");
    std::ostringstream buffer;
    buffer << csv.rdbuf();
    auto out = open_text(path);
    out << "{\n"
        << "  \"schema_version\": 1,\n"
        << "  \"seed\": " << record.seed << ",\n"
        << "  \"replica\": " << record.replica << ",\n"
        << "  \"n\": " << record.n << ",\n"
        << "  \"chi\": " << format_double(record.chi) << ",\n"
        << "  \"alpha\": " << format_double(record.alpha) << ",\n"
        << "  \"step\": " << format_double(record.step) << ",\n"
        << "  \"rows\": " << record.times.size() << ",\n"
        << "  \"failed\": " << (record.failed ? "true" : "false") << ",\n"
        << "  \"error\": \"" << record.error << "\",\n"
        << "  \"series_sha256\": \"" << sha256_hex(buffer.str()) << "\"\n"
        << "}\n";
}

void write_zdiag_csv(const std::string& path, const RunRecord& record) {
    auto out = open_text(path);
    out << "tau,s,dist\n";
    for (std::size_t si = 0; si < record.z_times.size(); ++si) {
        for (std::size_t ti = 0; ti < record.z_dist[si].size(); ++ti) {
            const double d = record.z_dist[si][ti];
            if (std::isnan(d)) continue;
            out << format_double(record.z_times[ti]) << ','
                << format_double(record.z_times[si]) << ','
                << format_double(d) << '\n';
        }
    }
}

void write_energy_csv(const std::string& path,
                      const std::vector<EnergyReport>& reports) {
    auto out = open_text(path);
    out << "t,mass,m2,entropy,interaction,free_energy\n";
    for (const auto& r : reports) {
        out << format_double(r.time) << ',' << format_double(r.mass) << ','
            << format_double(r.second_moment) << ','
            << format_double(r.entropy) << ',' << format_double(r.interaction)
            << ',' << format_double(r.free_energy) << '\n';
    }
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
    auto out = open_text(path);
    out << "metric,n,chi,alpha,replica,t,value\n";
    for (const auto& r : rows) {
        out << r.metric << ',' << r.n << ',' << format_double(r.chi) << ','
            << format_double(r.alpha) << ',' << r.replica << ','
            << format_double(r.t) << ',' << format_double(r.value) << '\n';
    }
}

void write_field_binary(const std::string& path, const DensityField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    const double L = field.box_half_width;
    const std::int64_t n = field.grid_n;
    const double t = field.time;
    out.write(reinterpret_cast<const char*>(&L), sizeof L);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&t), sizeof t);
    out.write(reinterpret_cast<const char*>(field.rho.data()),
              static_cast<std::streamsize>(field.rho.size() * sizeof(double)));
}

DensityField read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    DensityField field;
    std::int64_t n = 0;
    in.read(reinterpret_cast<char*>(&field.box_half_width),
            sizeof field.box_half_width);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&field.time), sizeof field.time);
    if (!in || n <= 0) throw std::runtime_error("malformed field snapshot");
    field.grid_n = static_cast<int>(n);
    field.rho.resize(static_cast<std::size_t>(n) * n);
    in.read(reinterpret_cast<char*>(field.rho.data()),
            static_cast<std::streamsize>(field.rho.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated field snapshot");
    return field;
}

} // namespace ksmf
