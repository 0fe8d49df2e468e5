#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "extraction.hpp"
#include "iv_curve.hpp"
#include "mesh.hpp"
#include "solver.hpp"
#include "sweep.hpp"

namespace jlfet {

class IoError : public std::runtime_error {
public:
    IoError(const std::string& msg, const std::filesystem::path& path)
        : std::runtime_error(msg + ": " + path.string()) {}
};

namespace detail {

// Shortest representation that parses back to the identical double;
// locale-independent by construction.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory", path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);   // binary: byte-stable newlines
    if (!out) throw IoError("cannot open for writing", path);
    return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed", path);
}

inline double parse_double(const std::string& s, const std::filesystem::path& path) {
    double v = 0;
    const char* b = s.data();
    const auto r = std::from_chars(b, b + s.size(), v);
    if (r.ec != std::errc() || r.ptr != b + s.size()) {
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw IoError("bad number '" + s + "'", path);
    }
    return v;
}

}  // namespace detail

inline void write_iv_csv(const IVCurve& curve, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "sweep_V,I_d_A,converged\n";
    for (const auto& p : curve.points)
        out << detail::fmt(p.sweep_V) << ',' << detail::fmt(p.I_d_A) << ','
            << (p.converged ? '1' : '0') << '\n';
    detail::close_out(out, path);
}

inline std::vector<IVPoint> read_iv_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading", path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("sweep_V,I_d_A,converged", 0) != 0)
        throw IoError("missing IV CSV header", path);
    std::vector<IVPoint> pts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw IoError("malformed IV CSV row '" + line + "'", path);
        pts.push_back({detail::parse_double(a, path), detail::parse_double(b, path),
                       c == "1"});
    }
    return pts;
}

// JSON keys mirror the metrics fields; numeric units live in the sibling
// "units" object so every figure stays unit-tagged.
inline nlohmann::ordered_json metrics_to_json(const DeviceMetrics& m) {
    nlohmann::ordered_json j;
    j["V_th"] = m.V_th_V;
    j["V_th_method"] = m.V_th_method;
    j["SS"] = m.SS_mV_dec;
    j["I_on"] = m.I_on_A;
    j["I_off"] = m.I_off_A;
    j["on_off_ratio"] = m.on_off_ratio;
    j["I_off_floored"] = m.I_off_floored;
    j["gm_max"] = m.gm_max_S;
    auto samples = nlohmann::ordered_json::array();
    for (const auto& s : m.C_gg_samples) {
        nlohmann::ordered_json e;
        e["V_g"] = s.V_g_V;
        e["C_gg"] = s.C_F;
        samples.push_back(e);
    }
    j["C_gg_samples"] = samples;
    j["units"] = {{"V_th", "V"},       {"SS", "mV/decade"}, {"I_on", "A"},
                  {"I_off", "A"},      {"gm_max", "S"},     {"C_gg_samples.V_g", "V"},
                  {"C_gg_samples.C_gg", "F"}};
    return j;
}

inline void write_metrics_json(const DeviceMetrics& m, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << metrics_to_json(m).dump(2) << '\n';
    detail::close_out(out, path);
}

namespace detail {

// A node touching several material blocks reports the most specific one:
// transport regions first, then the meshed gate, then dielectric.
inline Region node_region(const StructuredMesh& m, int i, int j) {
    int best = -1;
    constexpr int rank[] = {3, 2, 0, 1};   // channel, sd, dielectric, electrode
    for (int dj = -1; dj <= 0; ++dj)
        for (int di = -1; di <= 0; ++di) {
            const int ci = i + di, cj = j + dj;
            if (ci < 0 || cj < 0 || ci >= m.nx - 1 || cj >= m.ny - 1) continue;
            const int r = static_cast<int>(m.region[m.cell(ci, cj)]);
            if (best < 0 || rank[r] > rank[best]) best = r;
        }
    return static_cast<Region>(best);
}

}  // namespace detail

inline void export_field_grid(const FieldSolution& sol, const StructuredMesh& mesh,
                              const std::filesystem::path& path) {
    if (sol.psi_V.size() != static_cast<std::size_t>(mesh.node_count()))
        throw std::invalid_argument("field grid: solution does not match mesh");
    auto out = detail::open_out(path);
    out << "x_nm,y_nm,psi_V,n_cm3,region\n";
    for (int j = 0; j < mesh.ny; ++j)
        for (int i = 0; i < mesh.nx; ++i) {
            const int p = mesh.node(i, j);
            out << detail::fmt(mesh.x_nm[i]) << ',' << detail::fmt(mesh.y_nm[j]) << ','
                << detail::fmt(sol.psi_V[p]) << ',' << detail::fmt(sol.n_cm3[p]) << ','
                << region_name(detail::node_region(mesh, i, j)) << '\n';
        }
    detail::close_out(out, path);
}

inline void write_mesh_csv(const StructuredMesh& mesh, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << "x_nm,y_nm,region\n";
    for (int j = 0; j < mesh.ny; ++j)
        for (int i = 0; i < mesh.nx; ++i)
            out << detail::fmt(mesh.x_nm[i]) << ',' << detail::fmt(mesh.y_nm[j]) << ','
                << region_name(detail::node_region(mesh, i, j)) << '\n';
    detail::close_out(out, path);
}

namespace detail {

inline bool tuple_less(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<SweepAxis>& axes) {
    // Lexicographic by axis-list position, not by value: axis values need not
    // be sorted, and the contract is "ordered as given".
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& vals = axes[k].values;
        std::size_t ia = 0, ib = 0;
        for (std::size_t v = 0; v < vals.size(); ++v) {
            if (vals[v] == a[k]) ia = v;
            if (vals[v] == b[k]) ib = v;
        }
        if (ia != ib) return ia < ib;
    }
    return false;
}

}  // namespace detail

// One row per cartesian tuple, successes and failures interleaved in sweep
// order; failures carry the error text in the last column.
inline void write_sweep_csv(const SweepResult& res, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    for (const auto& a : res.axes) out << sweep_parameter_name(a.parameter) << ',';
    out << "V_th_V,SS_mV_dec,I_on_A,I_off_A,on_off_ratio,I_off_floored,gm_max_S,"
           "converged_points,requested_points,error\n";

    std::size_t ri = 0, fi = 0;
    auto emit_row = [&](const SweepRow& r) {
        for (double v : r.values) out << detail::fmt(v) << ',';
        out << detail::fmt(r.metrics.V_th_V) << ',' << detail::fmt(r.metrics.SS_mV_dec)
            << ',' << detail::fmt(r.metrics.I_on_A) << ',' << detail::fmt(r.metrics.I_off_A)
            << ',' << detail::fmt(r.metrics.on_off_ratio) << ','
            << (r.metrics.I_off_floored ? '1' : '0') << ',' << detail::fmt(r.metrics.gm_max_S)
            << ',' << r.diagnostics.converged_points << ',' << r.diagnostics.requested_points
            << ",\n";
    };
    auto emit_failure = [&](const SweepFailure& f) {
        for (double v : f.values) out << detail::fmt(v) << ',';
        std::string msg = f.error;
        for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
        out << ",,,,,,,,," << msg << '\n';
    };
    while (ri < res.rows.size() || fi < res.failures.size()) {
        if (fi >= res.failures.size() ||
            (ri < res.rows.size() &&
             detail::tuple_less(res.rows[ri].values, res.failures[fi].values, res.axes)))
            emit_row(res.rows[ri++]);
        else
            emit_failure(res.failures[fi++]);
    }
    detail::close_out(out, path);
}

inline nlohmann::ordered_json sweep_to_json(const SweepResult& res) {
    nlohmann::ordered_json j;
    auto axes = nlohmann::ordered_json::array();
    for (const auto& a : res.axes) {
        nlohmann::ordered_json ax;
        ax["parameter"] = sweep_parameter_name(a.parameter);
        ax["values"] = a.values;
        axes.push_back(ax);
    }
    j["axes"] = axes;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : res.rows) {
        nlohmann::ordered_json row;
        row["values"] = r.values;
        row["metrics"] = metrics_to_json(r.metrics);
        row["converged_points"] = r.diagnostics.converged_points;
        row["requested_points"] = r.diagnostics.requested_points;
        rows.push_back(row);
    }
    j["rows"] = rows;
    auto fails = nlohmann::ordered_json::array();
    for (const auto& f : res.failures) {
        nlohmann::ordered_json e;
        e["values"] = f.values;
        e["error"] = f.error;
        fails.push_back(e);
    }
    j["failures"] = fails;
    return j;
}

inline void write_sweep_json(const SweepResult& res, const std::filesystem::path& path,
                             const nlohmann::ordered_json& trends = {}) {
    nlohmann::ordered_json j = sweep_to_json(res);
    if (!trends.empty()) j["trends"] = trends;
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
    detail::close_out(out, path);
}

inline void write_text_file(const std::string& text, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << text;
    detail::close_out(out, path);
}

}  // namespace jlfet
