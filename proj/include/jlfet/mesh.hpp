#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "device.hpp"

namespace jlfet {

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Region : std::uint8_t {
    channel_semiconductor,
    sd_semiconductor,
    gate_dielectric,
    gate_electrode,   // doped poly; metal gates stay a boundary condition
};

inline const char* region_name(Region r) {
    switch (r) {
        case Region::channel_semiconductor: return "channel_semiconductor";
        case Region::sd_semiconductor: return "sd_semiconductor";
        case Region::gate_dielectric: return "gate_dielectric";
        case Region::gate_electrode: return "gate_electrode";
    }
    return "?";
}

struct MeshResolution {
    enum class Kind { coarse, standard, fine, explicit_spacing };
    Kind kind = Kind::standard;
    double dx_nm = 0, dy_nm = 0;   // explicit_spacing only

    static MeshResolution coarse() { return {Kind::coarse, 0, 0}; }
    static MeshResolution standard() { return {Kind::standard, 0, 0}; }
    static MeshResolution fine() { return {Kind::fine, 0, 0}; }
    static MeshResolution explicit_spacing(double dx, double dy) {
        if (!(dx > 0) || !(dy > 0))
            throw std::invalid_argument("explicit spacing must be positive");
        return {Kind::explicit_spacing, dx, dy};
    }
    static MeshResolution parse(const std::string& s) {
        if (s == "coarse") return coarse();
        if (s == "default") return standard();
        if (s == "fine") return fine();
        throw std::invalid_argument("unknown resolution '" + s +
                                    "' (expected coarse|default|fine)");
    }
};

struct Contacts {
    std::vector<int> source, drain;            // node indices
    std::vector<int> gate_top, gate_bottom;    // the two gate faces, tied electrically
};

// Node-index extents of the material blocks, for solvers and extraction.
struct Layout {
    int j_si_lo = 0, j_si_hi = 0;     // silicon rows, inclusive
    int i_gate_lo = 0, i_gate_hi = 0; // columns spanned by the gate, inclusive
    bool has_poly = false;
    double gate_x0_nm = 0, gate_x1_nm = 0;
    double si_y0_nm = 0, si_y1_nm = 0;
};

// Tensor-product grid. Nodes carry the unknowns; cells carry material.
// Node (i, j) -> index j*nx + i; cell (ci, cj) -> cj*(nx-1) + ci.
struct StructuredMesh {
    std::vector<double> x_nm, y_nm;    // node coordinates, strictly increasing
    std::vector<double> hx_cm, hy_cm;  // cell spacings
    std::vector<Region> region;        // per cell
    std::vector<double> eps_Fcm;       // absolute permittivity per cell
    std::vector<double> doping_cm3;    // signed net doping per cell (0 in dielectric)
    std::vector<double> mu_n;          // electron mobility per cell (0 in dielectric)
    Contacts contacts;
    Layout layout;
    int nx = 0, ny = 0;

    int node(int i, int j) const { return j * nx + i; }
    int node_count() const { return nx * ny; }
    int cell(int ci, int cj) const { return cj * (nx - 1) + ci; }
    int cell_count() const { return (nx - 1) * (ny - 1); }
};

namespace detail {

inline constexpr double grading_ratio = 1.3;

// Spacings growing from both ends toward the middle, scaled to sum exactly
// to `length`. Growth ratio is preserved by the uniform scale.
inline std::vector<double> symmetric_graded(double length, double h_edge, double h_max) {
    const double half = length / 2.0;
    std::vector<double> hs;
    double pos = 0.0, h = std::min(h_edge, half);
    while (pos < half) {
        hs.push_back(h);
        pos += h;
        h = std::min(h * grading_ratio, h_max);
    }
    const double scale = half / pos;
    for (double& v : hs) v *= scale;
    std::vector<double> out(hs);
    out.insert(out.end(), hs.rbegin(), hs.rend());
    return out;
}

// Spacings growing away from the `fine_first` end.
inline std::vector<double> one_sided_graded(double length, double h_first, double h_max,
                                            bool fine_first) {
    std::vector<double> hs;
    double pos = 0.0, h = std::min(h_first, length);
    while (pos < length) {
        hs.push_back(h);
        pos += h;
        h = std::min(h * grading_ratio, h_max);
    }
    const double scale = length / pos;
    for (double& v : hs) v *= scale;
    if (!fine_first) std::reverse(hs.begin(), hs.end());
    return hs;
}

inline std::vector<double> uniform_cells(double length, int n) {
    return std::vector<double>(static_cast<std::size_t>(n), length / n);
}

// Concatenate per-segment spacings into node coordinates, snapping each
// segment boundary to its exact position so interfaces land on nodes.
inline std::vector<double> nodes_from_segments(const std::vector<std::vector<double>>& segs,
                                               const std::vector<double>& seg_lengths) {
    std::vector<double> nodes{0.0};
    double base = 0.0;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        double pos = 0.0;
        for (std::size_t k = 0; k < segs[s].size(); ++k) {
            pos += segs[s][k];
            nodes.push_back(k + 1 == segs[s].size() ? base + seg_lengths[s] : base + pos);
        }
        base += seg_lengths[s];
    }
    return nodes;
}

}  // namespace detail

inline constexpr double poly_gate_thickness_nm = 10.0;

struct AssembleOptions {
    bool with_sd_contacts = true;
    bool enforce_floors = true;
};

// Tag cells and build contact sets on given axes. The axes must place nodes
// exactly on every material interface; build_mesh() guarantees that, the
// low-level caller (1-D column tests) is on their own.
inline StructuredMesh assemble_mesh(const DeviceSpec& spec, std::vector<double> x_nm,
                                    std::vector<double> y_nm,
                                    const AssembleOptions& opt = {}) {
    if (auto bad = validate(spec); !bad.empty())
        throw MeshError("invalid device spec: " + bad.front());
    for (auto* ax : {&x_nm, &y_nm})
        for (std::size_t k = 1; k < ax->size(); ++k)
            if (!((*ax)[k] > (*ax)[k - 1]))
                throw MeshError("axis nodes must be strictly increasing");
    if (x_nm.size() < 2 || y_nm.size() < 2) throw MeshError("mesh needs at least one cell");

    const bool poly = spec.gate.kind == GateKind::doped_poly;
    const double t_ox = spec.dielectric_thickness_nm;
    const double t_poly = poly ? poly_gate_thickness_nm : 0.0;
    const double H = spec.channel_height_nm;
    const double ext = spec.sd_extension_nm;
    const double L = spec.channel_length_nm;

    const double x_end = ext + L + ext;
    const double y_end = t_poly + t_ox + H + t_ox + t_poly;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    if (!near(x_nm.back(), x_end) || !near(y_nm.back(), y_end) || x_nm.front() != 0 ||
        y_nm.front() != 0)
        throw MeshError("axis extents do not match the device geometry");

    StructuredMesh m;
    m.x_nm = std::move(x_nm);
    m.y_nm = std::move(y_nm);
    m.nx = static_cast<int>(m.x_nm.size());
    m.ny = static_cast<int>(m.y_nm.size());
    m.hx_cm.resize(m.nx - 1);
    m.hy_cm.resize(m.ny - 1);
    for (int i = 0; i + 1 < m.nx; ++i) m.hx_cm[i] = (m.x_nm[i + 1] - m.x_nm[i]) * nm_to_cm;
    for (int j = 0; j + 1 < m.ny; ++j) m.hy_cm[j] = (m.y_nm[j + 1] - m.y_nm[j]) * nm_to_cm;

    m.layout.gate_x0_nm = ext;
    m.layout.gate_x1_nm = ext + L;
    m.layout.si_y0_nm = t_poly + t_ox;
    m.layout.si_y1_nm = t_poly + t_ox + H;
    m.layout.has_poly = poly;

    const double eps0 = PhysicalConstants::eps_0;
    const double eps_si = spec.channel_material.relative_permittivity * eps0;
    const double eps_ox = spec.dielectric.relative_permittivity * eps0;
    const double mu_ch = spec.channel_material.electron_mobility(spec.channel_doping_cm3);
    const double mu_sd = spec.channel_material.electron_mobility(spec.sd_doping_cm3);

    m.region.resize(m.cell_count());
    m.eps_Fcm.resize(m.cell_count());
    m.doping_cm3.resize(m.cell_count());
    m.mu_n.resize(m.cell_count());
    for (int cj = 0; cj + 1 < m.ny; ++cj) {
        const double yc = 0.5 * (m.y_nm[cj] + m.y_nm[cj + 1]);
        for (int ci = 0; ci + 1 < m.nx; ++ci) {
            const double xc = 0.5 * (m.x_nm[ci] + m.x_nm[ci + 1]);
            const bool under_gate = xc > m.layout.gate_x0_nm && xc < m.layout.gate_x1_nm;
            Region r;
            if (yc > m.layout.si_y0_nm && yc < m.layout.si_y1_nm)
                r = under_gate ? Region::channel_semiconductor : Region::sd_semiconductor;
            else if (poly && (yc < t_poly || yc > y_end - t_poly))
                r = under_gate ? Region::gate_electrode : Region::gate_dielectric;
            else
                r = Region::gate_dielectric;
            const int c = m.cell(ci, cj);
            m.region[c] = r;
            switch (r) {
                case Region::channel_semiconductor:
                    m.eps_Fcm[c] = eps_si;
                    m.doping_cm3[c] = spec.channel_doping_cm3;
                    m.mu_n[c] = mu_ch;
                    break;
                case Region::sd_semiconductor:
                    m.eps_Fcm[c] = eps_si;
                    m.doping_cm3[c] = spec.sd_doping_cm3;
                    m.mu_n[c] = mu_sd;
                    break;
                case Region::gate_dielectric:
                    m.eps_Fcm[c] = eps_ox;
                    m.doping_cm3[c] = 0;
                    m.mu_n[c] = 0;
                    break;
                case Region::gate_electrode:
                    m.eps_Fcm[c] = eps_si;
                    m.doping_cm3[c] = spec.gate.poly_doping_cm3;
                    m.mu_n[c] = 0;
                    break;
            }
        }
    }

    auto j_of = [&](double y) {
        for (int j = 0; j < m.ny; ++j)
            if (near(m.y_nm[j], y)) return j;
        throw MeshError("no node on material interface y=" + std::to_string(y));
    };
    m.layout.j_si_lo = j_of(m.layout.si_y0_nm);
    m.layout.j_si_hi = j_of(m.layout.si_y1_nm);
    m.layout.i_gate_lo = 0;
    m.layout.i_gate_hi = m.nx - 1;
    for (int i = 0; i < m.nx; ++i) {
        if (m.x_nm[i] < m.layout.gate_x0_nm - 1e-9) m.layout.i_gate_lo = i + 1;
        if (m.x_nm[i] <= m.layout.gate_x1_nm + 1e-9) m.layout.i_gate_hi = i;
    }

    if (opt.with_sd_contacts) {
        for (int j = m.layout.j_si_lo; j <= m.layout.j_si_hi; ++j) {
            m.contacts.source.push_back(m.node(0, j));
            m.contacts.drain.push_back(m.node(m.nx - 1, j));
        }
    }
    for (int i = m.layout.i_gate_lo; i <= m.layout.i_gate_hi; ++i) {
        m.contacts.gate_bottom.push_back(m.node(i, 0));
        m.contacts.gate_top.push_back(m.node(i, m.ny - 1));
    }
    if (m.contacts.gate_top.empty() || m.contacts.gate_bottom.empty())
        throw MeshError("gate contact is empty");
    if (opt.with_sd_contacts && (m.contacts.source.empty() || m.contacts.drain.empty()))
        throw MeshError("source/drain contact is empty");
    if (opt.with_sd_contacts && m.layout.i_gate_lo == 0)
        for (auto* face : {&m.contacts.gate_top, &m.contacts.gate_bottom})
            for (int n : *face)
                for (int s : m.contacts.source)
                    if (n == s) throw MeshError("gate and source contacts overlap");

    if (opt.enforce_floors) {
        int si_cells_y = 0;
        for (int cj = 0; cj + 1 < m.ny; ++cj) {
            const double yc = 0.5 * (m.y_nm[cj] + m.y_nm[cj + 1]);
            if (yc > m.layout.si_y0_nm && yc < m.layout.si_y1_nm) ++si_cells_y;
        }
        int ch_cells_x = 0;
        for (int ci = 0; ci + 1 < m.nx; ++ci) {
            const double xc = 0.5 * (m.x_nm[ci] + m.x_nm[ci + 1]);
            if (xc > m.layout.gate_x0_nm && xc < m.layout.gate_x1_nm) ++ch_cells_x;
        }
        int ox_cells_low = 0;
        for (int cj = 0; cj + 1 < m.ny; ++cj) {
            const double yc = 0.5 * (m.y_nm[cj] + m.y_nm[cj + 1]);
            if (yc > t_poly && yc < t_poly + t_ox) ++ox_cells_low;
        }
        if (si_cells_y < 10)
            throw MeshError("body must be spanned by >= 10 cells across (got " +
                            std::to_string(si_cells_y) + ")");
        if (ch_cells_x < 10)
            throw MeshError("channel must be spanned by >= 10 cells along x (got " +
                            std::to_string(ch_cells_x) + ")");
        if (ox_cells_low < 4)
            throw MeshError("dielectric must be spanned by >= 4 cells (got " +
                            std::to_string(ox_cells_low) + ")");
    }
    return m;
}

// Graded tensor-product mesh for the full device. Fine cells hug the
// dielectric interfaces and contacts; spacing grows by <= 1.3x per step.
inline StructuredMesh build_mesh(const DeviceSpec& spec,
                                 const MeshResolution& res = MeshResolution::standard()) {
    if (auto bad = validate(spec); !bad.empty())
        throw MeshError("invalid device spec: " + bad.front());

    using detail::one_sided_graded;
    using detail::symmetric_graded;
    using detail::uniform_cells;

    struct Grade { double h_edge, h_max, h_ox; };
    Grade gx, gy;
    switch (res.kind) {
        case MeshResolution::Kind::coarse:
            gx = {0.8, 2.0, 1.0};
            gy = {0.4, 2.0, 1.0};
            break;
        case MeshResolution::Kind::fine:
            gx = {0.2, 0.5, 0.25};
            gy = {0.1, 0.5, 0.25};
            break;
        default:
            gx = {0.4, 1.0, 0.5};
            gy = {0.2, 1.0, 0.5};
            break;
    }

    const double t_ox = spec.dielectric_thickness_nm;
    const double H = spec.channel_height_nm;
    const double ext = spec.sd_extension_nm;
    const double L = spec.channel_length_nm;
    const bool poly = spec.gate.kind == GateKind::doped_poly;
    const double t_poly = poly ? poly_gate_thickness_nm : 0.0;

    std::vector<std::vector<double>> xsegs;
    std::vector<double> xlens;
    std::vector<std::vector<double>> ysegs;
    std::vector<double> ylens;

    if (res.kind == MeshResolution::Kind::explicit_spacing) {
        auto uni = [](double len, double d) {
            return uniform_cells(len, std::max(1, static_cast<int>(std::round(len / d))));
        };
        if (ext > 0) { xsegs.push_back(uni(ext, res.dx_nm)); xlens.push_back(ext); }
        xsegs.push_back(uni(L, res.dx_nm));
        xlens.push_back(L);
        if (ext > 0) { xsegs.push_back(uni(ext, res.dx_nm)); xlens.push_back(ext); }
        if (poly) { ysegs.push_back(uni(t_poly, res.dy_nm)); ylens.push_back(t_poly); }
        ysegs.push_back(uni(t_ox, res.dy_nm));
        ylens.push_back(t_ox);
        ysegs.push_back(uni(H, res.dy_nm));
        ylens.push_back(H);
        ysegs.push_back(uni(t_ox, res.dy_nm));
        ylens.push_back(t_ox);
        if (poly) { ysegs.push_back(uni(t_poly, res.dy_nm)); ylens.push_back(t_poly); }
    } else {
        if (ext > 0) {
            xsegs.push_back(symmetric_graded(ext, gx.h_edge, gx.h_max));
            xlens.push_back(ext);
        }
        xsegs.push_back(symmetric_graded(L, gx.h_edge, gx.h_max));
        xlens.push_back(L);
        if (ext > 0) {
            xsegs.push_back(symmetric_graded(ext, gx.h_edge, gx.h_max));
            xlens.push_back(ext);
        }
        auto ox_layer = uniform_cells(t_ox, std::max(4, static_cast<int>(std::round(t_ox / gx.h_ox))));
        if (poly) {
            ysegs.push_back(one_sided_graded(t_poly, gy.h_edge, 4.0 * gy.h_edge, false));
            ylens.push_back(t_poly);
        }
        ysegs.push_back(ox_layer);
        ylens.push_back(t_ox);
        ysegs.push_back(symmetric_graded(H, gy.h_edge, gy.h_max));
        ylens.push_back(H);
        ysegs.push_back(ox_layer);
        ylens.push_back(t_ox);
        if (poly) {
            ysegs.push_back(one_sided_graded(t_poly, gy.h_edge, 4.0 * gy.h_edge, true));
            ylens.push_back(t_poly);
        }
    }

    return assemble_mesh(spec, detail::nodes_from_segments(xsegs, xlens),
                         detail::nodes_from_segments(ysegs, ylens));
}

}  // namespace jlfet
