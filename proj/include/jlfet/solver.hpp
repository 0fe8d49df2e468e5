#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bernoulli.hpp"
#include "iv_curve.hpp"
#include "mesh.hpp"

namespace jlfet {

struct SolverSettings {
    double tol_psi_V = 1e-6;        // Newton/Gummel potential update, max-norm
    double tol_I_rel = 1e-4;        // terminal current imbalance, relative
    int max_gummel_iterations = 200;
    int max_newton_iterations = 50;
    double damping_clamp_vt = 2.0;  // Newton update clamp, units of V_T
    double bias_ramp_step_V = 0.1;  // drain-bias continuation step on cold starts
};

class SolverError : public std::runtime_error {
public:
    SolverError(std::string msg, BiasPoint bias, double residual, int iterations,
                std::vector<double> trace = {})
        : std::runtime_error(std::move(msg)),
          bias(bias),
          residual(residual),
          iterations(iterations),
          trace(std::move(trace)) {}
    BiasPoint bias;
    double residual;           // last update max-norm [V]
    int iterations;
    std::vector<double> trace; // recent per-iteration residuals
};

struct FieldSolution {
    std::vector<double> psi_V;    // per node, referenced to channel intrinsic level
    std::vector<double> n_cm3;    // per node; 0 in dielectric
    std::vector<double> phi_n_V;  // electron quasi-Fermi; meaningful in transport region
    BiasPoint bias;
    bool converged = false;
    double poisson_residual_V = std::numeric_limits<double>::infinity();
    double continuity_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

struct EdgeGeometry {
    double dist_cm = 0;   // node-to-node distance
    double area_cm2 = 0;  // face area the flux crosses
};

// Scharfetter-Gummel electron flux from node i to node j (conventional
// current, positive toward j). Exact for Boltzmann carriers on the edge.
inline double sg_edge_flux(double psi_i_V, double psi_j_V, double n_i_cm3, double n_j_cm3,
                           double mu_cm2_Vs, const EdgeGeometry& g,
                           double V_T = PhysicalConstants::thermal_voltage(300.0)) {
    if (!(n_i_cm3 > 0) || !(n_j_cm3 > 0))
        throw std::invalid_argument("sg_edge_flux: densities must be positive");
    const double t = (psi_j_V - psi_i_V) / V_T;
    const double J = PhysicalConstants::q * mu_cm2_Vs * V_T / g.dist_cm *
                     (bernoulli(t) * n_j_cm3 - bernoulli(-t) * n_i_cm3);
    return J * g.area_cm2;
}

enum class OperatingRegime {
    fully_depleted,
    subthreshold_channel,
    partial_accumulation,
    flat_band_or_accumulated,
};

inline const char* regime_name(OperatingRegime r) {
    switch (r) {
        case OperatingRegime::fully_depleted: return "fully_depleted";
        case OperatingRegime::subthreshold_channel: return "subthreshold_channel";
        case OperatingRegime::partial_accumulation: return "partial_accumulation";
        case OperatingRegime::flat_band_or_accumulated: return "flat_band_or_accumulated";
    }
    return "?";
}

struct RegimeReport {
    OperatingRegime regime;
    double min_carrier_ratio;   // min n/N_d over the mid-channel cross-section
};

// Box-method drift-diffusion on one mesh. Damped-Newton nonlinear Poisson,
// linear Scharfetter-Gummel electron continuity, Gummel outer loop. One
// instance per thread; mesh and spec are shared read-only.
class DriftDiffusionSolver {
public:
    DriftDiffusionSolver(const StructuredMesh& mesh, const DeviceSpec& spec,
                         const SolverSettings& settings = {})
        : m_(mesh), spec_(spec), set_(settings) {
        if (auto bad = validate(spec); !bad.empty())
            throw std::invalid_argument("invalid device spec: " + bad.front());
        if (!(spec.channel_doping_cm3 > 0) || !(spec.sd_doping_cm3 > 0))
            throw std::invalid_argument("electron-only solver requires an n-type device");
        VT_ = spec.thermal_voltage();
        ni_ = spec.intrinsic_density();
        psi_ref_ch_ = VT_ * std::log(spec.channel_doping_cm3 / ni_);
        psi_ref_sd_ = VT_ * std::log(spec.sd_doping_cm3 / ni_);
        if (spec.gate.kind == GateKind::metal)
            phi_ms_ = spec.gate.workfunction_eV - spec.channel_phi_s_eV();
        else
            poly_neutral_ = VT_ * std::asinh(spec.gate.poly_doping_cm3 / (2.0 * ni_));
        build_topology();
    }

    const StructuredMesh& mesh() const { return m_; }
    const DeviceSpec& spec() const { return spec_; }
    double thermal_voltage() const { return VT_; }

    // Dirichlet potential on the gate contact for a given gate bias.
    double gate_boundary_psi(double V_g) const {
        if (spec_.gate.kind == GateKind::metal) return V_g - phi_ms_ + psi_ref_ch_;
        return V_g + poly_neutral_;
    }

    // Nonlinear Poisson with a frozen flat quasi-Fermi level (no transport).
    // Valid only when source and drain sit at the same potential.
    FieldSolution solve_poisson(const BiasPoint& bias) {
        check_bias(bias);
        if (bias.V_d != bias.V_s)
            throw std::invalid_argument("solve_poisson requires V_d == V_s (no current path)");
        FieldSolution s = initial_state(bias);
        std::fill(s.phi_n_V.begin(), s.phi_n_V.end(), bias.V_s);
        auto r = newton_poisson(s.psi_V, s.phi_n_V, bias);
        s.bias = bias;
        s.poisson_residual_V = r.residual;
        s.continuity_residual = 0.0;
        s.iterations = r.iterations;
        s.converged = r.residual <= set_.tol_psi_V;
        fill_carriers_boltzmann(s, bias);
        return s;
    }

    FieldSolution solve_equilibrium() { return solve_poisson(BiasPoint{0, 0, 0}); }

    // Full Gummel solve. Cold starts ramp V_d from V_s in steps of at most
    // bias_ramp_step_V; warm starts continue from the guess.
    FieldSolution solve_bias(const BiasPoint& bias,
                             const FieldSolution* initial_guess = nullptr) {
        FieldSolution s = solve_bias_lenient(bias, initial_guess);
        if (!s.converged)
            throw SolverError(
                bias_msg("Gummel loop did not converge", bias, s.poisson_residual_V,
                         s.iterations),
                bias, s.poisson_residual_V, s.iterations);
        return s;
    }

    // Same, but returns the best-effort state with converged=false instead of
    // throwing; iv_sweep uses this to record flagged points.
    FieldSolution solve_bias_lenient(const BiasPoint& bias,
                                     const FieldSolution* initial_guess = nullptr) {
        check_bias(bias);
        if (m_.contacts.source.empty() || m_.contacts.drain.empty())
            throw std::invalid_argument("solve_bias needs source and drain contacts");

        FieldSolution s;
        double vd_from;
        if (initial_guess) {
            if (initial_guess->psi_V.size() != static_cast<std::size_t>(m_.node_count()))
                throw std::invalid_argument("initial guess built on a different mesh");
            s = *initial_guess;
            vd_from = initial_guess->bias.V_d;
        } else {
            BiasPoint eq = bias;
            eq.V_d = bias.V_s;
            s = initial_state(eq);
            std::fill(s.phi_n_V.begin(), s.phi_n_V.end(), bias.V_s);
            newton_poisson(s.psi_V, s.phi_n_V, eq);
            vd_from = bias.V_s;
        }

        const double dv = bias.V_d - vd_from;
        const int steps = std::max(1, static_cast<int>(std::ceil(
                                          std::abs(dv) / set_.bias_ramp_step_V - 1e-12)));
        for (int k = 1; k <= steps; ++k) {
            BiasPoint b = bias;
            b.V_d = vd_from + dv * k / steps;
            if (k == steps) b.V_d = bias.V_d;
            s = gummel(b, s);
            if (!s.converged) break;
        }
        return s;
    }

    // Conventional current into the named terminal from the external circuit.
    double terminal_current(const FieldSolution& sol, const std::string& contact) const {
        const std::vector<int>* nodes = nullptr;
        Bc self = Bc::free_node;
        if (contact == "source") {
            nodes = &m_.contacts.source;
            self = Bc::source;
        } else if (contact == "drain") {
            nodes = &m_.contacts.drain;
            self = Bc::drain;
        } else if (contact == "gate" || contact == "gate_top" || contact == "gate_bottom") {
            return 0.0;   // ideal insulator / DC: no gate current
        } else {
            throw std::invalid_argument("unknown contact '" + contact + "'");
        }
        double I = 0.0;
        for (int p : *nodes) {
            const int i = p % m_.nx, j = p / m_.nx;
            auto add = [&](int nb, double k) {
                if (k <= 0 || bc_[nb] == self) return;   // edges internal to the contact
                const double t = (sol.psi_V[nb] - sol.psi_V[p]) / VT_;
                I += k * (bernoulli(t) * sol.n_cm3[nb] - bernoulli(-t) * sol.n_cm3[p]);
            };
            if (i > 0) add(p - 1, mu_x(i - 1, j));
            if (i + 1 < m_.nx) add(p + 1, mu_x(i, j));
            if (j > 0) add(p - m_.nx, mu_y(i, j - 1));
            if (j + 1 < m_.ny) add(p + m_.nx, mu_y(i, j));
        }
        return I * spec_.effective_width_cm();
    }

    // Mobile-minus-fixed charge over the transport region [C], for C_gg.
    double semiconductor_charge(const FieldSolution& sol) const {
        double Q = 0.0;
        for (int p = 0; p < m_.node_count(); ++p)
            if (semi_area_[p] > 0)
                Q += sol.n_cm3[p] * semi_area_[p] - dop_area_semi_[p];
        return Q * PhysicalConstants::q * spec_.effective_width_cm();
    }

    // Discrete Gauss law on the control-volume union of nodes
    // [i0,i1]x[j0,j1]: boundary flux of eps*grad(psi) vs enclosed charge.
    // Exact up to solver tolerance when the box contains no Dirichlet node.
    double gauss_box_error(const FieldSolution& sol, int i0, int i1, int j0, int j1) const {
        double flux = 0.0, charge = 0.0, scale = 0.0;
        auto inside = [&](int i, int j) { return i >= i0 && i <= i1 && j >= j0 && j <= j1; };
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const int p = m_.node(i, j);
                auto face = [&](int ni, int nj, double c) {
                    if (c <= 0 || inside(ni, nj)) return;
                    const double f = c * (sol.psi_V[m_.node(ni, nj)] - sol.psi_V[p]);
                    flux += f;
                    scale = std::max(scale, std::abs(f));
                };
                if (i > 0) face(i - 1, j, eps_x(i - 1, j));
                if (i + 1 < m_.nx) face(i + 1, j, eps_x(i, j));
                if (j > 0) face(i, j - 1, eps_y(i, j - 1));
                if (j + 1 < m_.ny) face(i, j + 1, eps_y(i, j));
                charge += node_charge(p, sol.psi_V[p], sol.phi_n_V[p], sol.bias.V_g).first;
            }
        charge *= PhysicalConstants::q;
        const double denom = std::max({std::abs(charge), scale, 1e-30});
        return std::abs(flux + charge) / denom;
    }

    // Max node-wise SG flux divergence over interior transport nodes,
    // relative to the largest edge flux.
    double max_divergence_rel(const FieldSolution& sol) const {
        double max_div = 0.0, max_flux = 0.0;
        for (int p = 0; p < m_.node_count(); ++p) {
            if (cont_idx_[p] < 0) continue;
            const int i = p % m_.nx, j = p / m_.nx;
            double div = 0.0;
            auto add = [&](int nb, double k) {
                if (k <= 0) return;
                const double t = (sol.psi_V[nb] - sol.psi_V[p]) / VT_;
                const double f = k * (bernoulli(t) * sol.n_cm3[nb] - bernoulli(-t) * sol.n_cm3[p]);
                div += f;
                max_flux = std::max(max_flux, std::abs(f));
            };
            if (i > 0) add(p - 1, mu_x(i - 1, j));
            if (i + 1 < m_.nx) add(p + 1, mu_x(i, j));
            if (j > 0) add(p - m_.nx, mu_y(i, j - 1));
            if (j + 1 < m_.ny) add(p + m_.nx, mu_y(i, j));
            max_div = std::max(max_div, std::abs(div));
        }
        return max_flux > 0 ? max_div / max_flux : 0.0;
    }

private:
    enum class Bc : std::uint8_t { free_node, source, drain, gate };

    struct NewtonReport {
        double residual;
        int iterations;
    };

    const StructuredMesh& m_;
    DeviceSpec spec_;
    SolverSettings set_;
    double VT_ = 0, ni_ = 0, psi_ref_ch_ = 0, psi_ref_sd_ = 0;
    double phi_ms_ = 0;        // metal gates
    double poly_neutral_ = 0;  // poly gates

    std::vector<Bc> bc_;
    std::vector<double> semi_area_;       // [cm^2] transport quadrant area per node
    std::vector<double> poly_area_;       // [cm^2]
    std::vector<double> dop_area_all_;    // [cm^-1] sum dop*area, all carrier regions
    std::vector<double> dop_area_semi_;   // [cm^-1] transport region only
    std::vector<double> cx_, cy_;         // Poisson edge coefficients [F]
    std::vector<double> mx_, my_;         // q*V_T*mu face coefficients [A*cm^2 per n]
    std::vector<int> pois_idx_, cont_idx_;
    int n_pois_ = 0, n_cont_ = 0;

    Eigen::SparseMatrix<double> Ap_, Ac_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    bool pois_analyzed_ = false, cont_analyzed_ = false;

    double eps_x(int ci, int j) const { return cx_[j * (m_.nx - 1) + ci]; }
    double eps_y(int i, int cj) const { return cy_[cj * m_.nx + i]; }
    double mu_x(int ci, int j) const { return mx_[j * (m_.nx - 1) + ci]; }
    double mu_y(int i, int cj) const { return my_[cj * m_.nx + i]; }

    void check_bias(const BiasPoint& b) const {
        for (double v : {b.V_g, b.V_d, b.V_s})
            if (!(std::abs(v) <= 5.0))
                throw std::invalid_argument("bias magnitude exceeds 5 V");
    }

    static std::string bias_msg(const char* what, const BiasPoint& b, double r, int it) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s at V_g=%.4g V_d=%.4g V_s=%.4g (residual %.3e V, %d iterations)",
                      what, b.V_g, b.V_d, b.V_s, r, it);
        return buf;
    }

    void build_topology() {
        const int N = m_.node_count();
        bc_.assign(N, Bc::free_node);
        for (int p : m_.contacts.source) bc_[p] = Bc::source;
        for (int p : m_.contacts.drain) bc_[p] = Bc::drain;
        for (auto* face : {&m_.contacts.gate_top, &m_.contacts.gate_bottom})
            for (int p : *face) {
                if (bc_[p] != Bc::free_node) throw MeshError("contact node sets overlap");
                bc_[p] = Bc::gate;
            }

        semi_area_.assign(N, 0.0);
        poly_area_.assign(N, 0.0);
        dop_area_all_.assign(N, 0.0);
        dop_area_semi_.assign(N, 0.0);
        for (int j = 0; j < m_.ny; ++j)
            for (int i = 0; i < m_.nx; ++i) {
                const int p = m_.node(i, j);
                for (int dj = -1; dj <= 0; ++dj)
                    for (int di = -1; di <= 0; ++di) {
                        const int ci = i + di, cj = j + dj;
                        if (ci < 0 || cj < 0 || ci >= m_.nx - 1 || cj >= m_.ny - 1) continue;
                        const int c = m_.cell(ci, cj);
                        const double A = 0.25 * m_.hx_cm[ci] * m_.hy_cm[cj];
                        const Region r = m_.region[c];
                        if (r == Region::channel_semiconductor || r == Region::sd_semiconductor) {
                            semi_area_[p] += A;
                            dop_area_semi_[p] += m_.doping_cm3[c] * A;
                            dop_area_all_[p] += m_.doping_cm3[c] * A;
                        } else if (r == Region::gate_electrode) {
                            poly_area_[p] += A;
                            dop_area_all_[p] += m_.doping_cm3[c] * A;
                        }
                    }
            }

        const double q = PhysicalConstants::q;
        cx_.assign((m_.nx - 1) * m_.ny, 0.0);
        mx_.assign((m_.nx - 1) * m_.ny, 0.0);
        for (int j = 0; j < m_.ny; ++j)
            for (int ci = 0; ci + 1 < m_.nx; ++ci) {
                double e = 0, mu = 0;
                if (j > 0) {
                    const int c = m_.cell(ci, j - 1);
                    e += m_.eps_Fcm[c] * 0.5 * m_.hy_cm[j - 1];
                    mu += m_.mu_n[c] * 0.5 * m_.hy_cm[j - 1];
                }
                if (j < m_.ny - 1) {
                    const int c = m_.cell(ci, j);
                    e += m_.eps_Fcm[c] * 0.5 * m_.hy_cm[j];
                    mu += m_.mu_n[c] * 0.5 * m_.hy_cm[j];
                }
                cx_[j * (m_.nx - 1) + ci] = e / m_.hx_cm[ci];
                mx_[j * (m_.nx - 1) + ci] = q * VT_ * mu / m_.hx_cm[ci];
            }
        cy_.assign(m_.nx * (m_.ny - 1), 0.0);
        my_.assign(m_.nx * (m_.ny - 1), 0.0);
        for (int cj = 0; cj + 1 < m_.ny; ++cj)
            for (int i = 0; i < m_.nx; ++i) {
                double e = 0, mu = 0;
                if (i > 0) {
                    const int c = m_.cell(i - 1, cj);
                    e += m_.eps_Fcm[c] * 0.5 * m_.hx_cm[i - 1];
                    mu += m_.mu_n[c] * 0.5 * m_.hx_cm[i - 1];
                }
                if (i < m_.nx - 1) {
                    const int c = m_.cell(i, cj);
                    e += m_.eps_Fcm[c] * 0.5 * m_.hx_cm[i];
                    mu += m_.mu_n[c] * 0.5 * m_.hx_cm[i];
                }
                cy_[cj * m_.nx + i] = e / m_.hy_cm[cj];
                my_[cj * m_.nx + i] = q * VT_ * mu / m_.hy_cm[cj];
            }

        pois_idx_.assign(N, -1);
        cont_idx_.assign(N, -1);
        for (int p = 0; p < N; ++p) {
            if (bc_[p] == Bc::free_node) pois_idx_[p] = n_pois_++;
            if (bc_[p] == Bc::free_node && semi_area_[p] > 0) cont_idx_[p] = n_cont_++;
        }
        Ap_.resize(n_pois_, n_pois_);
        Ac_.resize(n_cont_, n_cont_);
    }

    double dirichlet_psi(int p, const BiasPoint& b) const {
        switch (bc_[p]) {
            case Bc::source: return b.V_s + psi_ref_sd_;
            case Bc::drain: return b.V_d + psi_ref_sd_;
            case Bc::gate: return gate_boundary_psi(b.V_g);
            default: return 0;
        }
    }

    // Clamped Boltzmann exponential: physical densities stay untouched,
    // Newton transients can't overflow.
    double boltz(double e) const { return ni_ * std::exp(std::clamp(e, -120.0, 45.0)); }

    // Net charge number (without q) and its d/dpsi at a node.
    std::pair<double, double> node_charge(int p, double psi, double phi_n, double V_g) const {
        double Q = dop_area_all_[p], dQ = 0.0;
        if (semi_area_[p] > 0) {
            const double n = boltz((psi - phi_n) / VT_);
            Q -= n * semi_area_[p];
            dQ -= n / VT_ * semi_area_[p];
        }
        if (poly_area_[p] > 0) {
            const double n = boltz((psi - V_g) / VT_);
            const double h = boltz((V_g - psi) / VT_);
            Q += (h - n) * poly_area_[p];
            dQ -= (h + n) / VT_ * poly_area_[p];
        }
        return {Q, dQ};
    }

    FieldSolution initial_state(const BiasPoint& bias) const {
        FieldSolution s;
        const int N = m_.node_count();
        s.psi_V.assign(N, 0.0);
        s.n_cm3.assign(N, 0.0);
        s.phi_n_V.assign(N, 0.0);
        s.bias = bias;
        const double psi_outer = spec_.gate.kind == GateKind::metal
                                     ? gate_boundary_psi(bias.V_g)
                                     : bias.V_g + poly_neutral_;
        for (int p = 0; p < N; ++p) {
            const int i = p % m_.nx, j = p / m_.nx;
            if (bc_[p] != Bc::free_node) {
                s.psi_V[p] = dirichlet_psi(p, bias);
            } else if (poly_area_[p] > 0) {
                s.psi_V[p] = bias.V_g + poly_neutral_;
            } else if (semi_area_[p] > 0) {
                s.psi_V[p] = VT_ * std::asinh(dop_area_semi_[p] / (2.0 * ni_ * semi_area_[p]));
            } else if (i >= m_.layout.i_gate_lo && i <= m_.layout.i_gate_hi) {
                // dielectric under the gate: linear profile across the layer
                const double y = m_.y_nm[j];
                const double f =
                    y < m_.layout.si_y0_nm
                        ? (m_.layout.si_y0_nm - y) / spec_.dielectric_thickness_nm
                        : (y - m_.layout.si_y1_nm) / spec_.dielectric_thickness_nm;
                s.psi_V[p] = psi_ref_ch_ + std::clamp(f, 0.0, 1.0) * (psi_outer - psi_ref_ch_);
            } else {
                s.psi_V[p] = psi_ref_ch_;   // spacer dielectric; Newton sorts it out
            }
        }
        return s;
    }

    NewtonReport newton_poisson(std::vector<double>& psi, const std::vector<double>& phi_n,
                                const BiasPoint& bias) {
        for (int p = 0; p < m_.node_count(); ++p)
            if (bc_[p] != Bc::free_node) psi[p] = dirichlet_psi(p, bias);

        const double q = PhysicalConstants::q;
        const double clamp_V = set_.damping_clamp_vt * VT_;
        Eigen::VectorXd F(n_pois_), delta;
        std::vector<Eigen::Triplet<double>> trips;
        std::vector<double> trace;
        double dmax = std::numeric_limits<double>::infinity();

        for (int it = 1; it <= set_.max_newton_iterations; ++it) {
            trips.clear();
            for (int j = 0; j < m_.ny; ++j)
                for (int i = 0; i < m_.nx; ++i) {
                    const int p = m_.node(i, j);
                    const int row = pois_idx_[p];
                    if (row < 0) continue;
                    double f = 0.0, diag = 0.0;
                    auto edge = [&](int nb, double c) {
                        if (c <= 0) return;
                        f += c * (psi[nb] - psi[p]);
                        diag += c;
                        const int col = pois_idx_[nb];
                        if (col >= 0) trips.emplace_back(row, col, -c);
                    };
                    if (i > 0) edge(p - 1, eps_x(i - 1, j));
                    if (i + 1 < m_.nx) edge(p + 1, eps_x(i, j));
                    if (j > 0) edge(p - m_.nx, eps_y(i, j - 1));
                    if (j + 1 < m_.ny) edge(p + m_.nx, eps_y(i, j));
                    auto [Q, dQ] = node_charge(p, psi[p], phi_n[p], bias.V_g);
                    f += q * Q;
                    diag -= q * dQ;
                    F(row) = f;
                    trips.emplace_back(row, row, diag);
                }
            Ap_.setFromTriplets(trips.begin(), trips.end());
            if (!pois_analyzed_) {
                ldlt_.analyzePattern(Ap_);
                pois_analyzed_ = true;
            }
            ldlt_.factorize(Ap_);
            if (ldlt_.info() != Eigen::Success)
                throw SolverError(bias_msg("Poisson Jacobian factorization failed", bias,
                                           dmax, it),
                                  bias, dmax, it, trace);
            delta = ldlt_.solve(F);
            dmax = 0.0;
            for (int p = 0; p < m_.node_count(); ++p) {
                const int row = pois_idx_[p];
                if (row < 0) continue;
                const double d = delta(row);
                dmax = std::max(dmax, std::abs(d));
                psi[p] += std::clamp(d, -clamp_V, clamp_V);
            }
            trace.push_back(dmax);
            if (trace.size() > 8) trace.erase(trace.begin());
            if (!std::isfinite(dmax))
                throw SolverError(bias_msg("Poisson Newton diverged", bias, dmax, it), bias,
                                  dmax, it, trace);
            if (dmax <= set_.tol_psi_V) return {dmax, it};
        }
        throw SolverError(bias_msg("Poisson Newton did not converge", bias, dmax,
                                   set_.max_newton_iterations),
                          bias, dmax, set_.max_newton_iterations, trace);
    }

    // Linear SG continuity solve for the electron density at the given psi.
    void continuity_solve(const std::vector<double>& psi, const BiasPoint& bias,
                          std::vector<double>& n, std::vector<double>& phi_n) {
        std::vector<Eigen::Triplet<double>> trips;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_cont_);
        for (int j = 0; j < m_.ny; ++j)
            for (int i = 0; i < m_.nx; ++i) {
                const int p = m_.node(i, j);
                const int row = cont_idx_[p];
                if (row < 0) continue;
                double diag = 0.0;
                auto edge = [&](int nb, double k) {
                    if (k <= 0) return;
                    const double t = (psi[nb] - psi[p]) / VT_;
                    diag += k * bernoulli(-t);
                    const double a = k * bernoulli(t);
                    const int col = cont_idx_[nb];
                    if (col >= 0)
                        trips.emplace_back(row, col, -a);
                    else
                        rhs(row) += a * dirichlet_n(nb, bias);
                };
                if (i > 0) edge(p - 1, mu_x(i - 1, j));
                if (i + 1 < m_.nx) edge(p + 1, mu_x(i, j));
                if (j > 0) edge(p - m_.nx, mu_y(i, j - 1));
                if (j + 1 < m_.ny) edge(p + m_.nx, mu_y(i, j));
                trips.emplace_back(row, row, diag);
            }
        Ac_.setFromTriplets(trips.begin(), trips.end());
        if (!cont_analyzed_) {
            lu_.analyzePattern(Ac_);
            cont_analyzed_ = true;
        }
        lu_.factorize(Ac_);
        if (lu_.info() != Eigen::Success)
            throw SolverError(bias_msg("continuity factorization failed", bias, 0, 0), bias,
                              0, 0);
        Eigen::VectorXd x = lu_.solve(rhs);

        for (int p = 0; p < m_.node_count(); ++p) {
            if (semi_area_[p] <= 0) continue;
            double v;
            if (cont_idx_[p] >= 0)
                v = x(cont_idx_[p]);
            else if (bc_[p] == Bc::source || bc_[p] == Bc::drain)
                v = dirichlet_n(p, bias);
            else   // gate node with gate==0 extent overlap: not a transport node
                v = n[p];
            n[p] = std::max(v, 1e-25);
            phi_n[p] = psi[p] - VT_ * std::log(n[p] / ni_);
        }
    }

    double dirichlet_n(int p, const BiasPoint&) const {
        (void)p;
        return spec_.sd_doping_cm3;   // ideal ohmic: neutral density pinned
    }

    FieldSolution gummel(const BiasPoint& bias, FieldSolution start) {
        FieldSolution s = std::move(start);
        s.bias = bias;
        s.converged = false;
        std::vector<double> psi_prev;
        double delta_cycle = std::numeric_limits<double>::infinity();
        for (int cycle = 1; cycle <= set_.max_gummel_iterations; ++cycle) {
            auto nr = newton_poisson(s.psi_V, s.phi_n_V, bias);
            s.poisson_residual_V = nr.residual;
            if (cycle > 1) {
                delta_cycle = 0.0;
                for (std::size_t k = 0; k < psi_prev.size(); ++k)
                    delta_cycle = std::max(delta_cycle, std::abs(s.psi_V[k] - psi_prev[k]));
            }
            psi_prev = s.psi_V;
            continuity_solve(s.psi_V, bias, s.n_cm3, s.phi_n_V);
            fill_nontransport_carriers(s, bias);
            const double Is = terminal_current(s, "source");
            const double Id = terminal_current(s, "drain");
            const double denom = std::max(std::abs(Is), std::abs(Id));
            // Below the absolute noise floor (equilibrium points) the relative
            // imbalance is meaningless; conservation holds trivially.
            s.continuity_residual = denom < 1e-16 ? 0.0 : std::abs(Is + Id) / denom;
            s.iterations = cycle;
            if (cycle > 1 && delta_cycle <= set_.tol_psi_V &&
                s.continuity_residual <= set_.tol_I_rel) {
                s.converged = true;
                s.poisson_residual_V = std::max(nr.residual, delta_cycle);
                break;
            }
        }
        return s;
    }

    void fill_carriers_boltzmann(FieldSolution& s, const BiasPoint& bias) const {
        for (int p = 0; p < m_.node_count(); ++p) {
            if (semi_area_[p] > 0)
                s.n_cm3[p] = boltz((s.psi_V[p] - s.phi_n_V[p]) / VT_);
            else if (poly_area_[p] > 0) {
                s.n_cm3[p] = boltz((s.psi_V[p] - bias.V_g) / VT_);
                s.phi_n_V[p] = bias.V_g;
            } else
                s.n_cm3[p] = 0.0;
        }
    }

    void fill_nontransport_carriers(FieldSolution& s, const BiasPoint& bias) const {
        for (int p = 0; p < m_.node_count(); ++p) {
            if (semi_area_[p] > 0) continue;
            if (poly_area_[p] > 0) {
                s.n_cm3[p] = boltz((s.psi_V[p] - bias.V_g) / VT_);
                s.phi_n_V[p] = bias.V_g;
            } else {
                s.n_cm3[p] = 0.0;
                s.phi_n_V[p] = 0.0;
            }
        }
    }
};

inline FieldSolution solve_equilibrium(const StructuredMesh& mesh, const DeviceSpec& spec,
                                       const SolverSettings& settings = {}) {
    return DriftDiffusionSolver(mesh, spec, settings).solve_equilibrium();
}

inline FieldSolution solve_bias(const StructuredMesh& mesh, const DeviceSpec& spec,
                                const BiasPoint& bias, const SolverSettings& settings = {},
                                const FieldSolution* initial_guess = nullptr) {
    return DriftDiffusionSolver(mesh, spec, settings).solve_bias(bias, initial_guess);
}

inline double terminal_current(const FieldSolution& sol, const StructuredMesh& mesh,
                               const DeviceSpec& spec, const std::string& contact) {
    return DriftDiffusionSolver(mesh, spec).terminal_current(sol, contact);
}

inline RegimeReport classify_regime(const FieldSolution& sol, const StructuredMesh& mesh,
                                    const DeviceSpec& spec) {
    if (!sol.converged)
        throw std::invalid_argument("classify_regime needs a converged solution");
    const double x_mid = 0.5 * (mesh.layout.gate_x0_nm + mesh.layout.gate_x1_nm);
    int i_mid = 0;
    for (int i = 1; i < mesh.nx; ++i)
        if (std::abs(mesh.x_nm[i] - x_mid) < std::abs(mesh.x_nm[i_mid] - x_mid)) i_mid = i;
    double r = std::numeric_limits<double>::infinity();
    for (int j = mesh.layout.j_si_lo; j <= mesh.layout.j_si_hi; ++j)
        r = std::min(r, sol.n_cm3[mesh.node(i_mid, j)] / spec.channel_doping_cm3);
    OperatingRegime reg;
    if (r < 1e-3) reg = OperatingRegime::fully_depleted;
    else if (r < 0.5) reg = OperatingRegime::subthreshold_channel;
    else if (r < 0.95) reg = OperatingRegime::partial_accumulation;
    else reg = OperatingRegime::flat_band_or_accumulated;
    return {reg, r};
}

struct SweepRequest {
    enum class Vary { V_g, V_d } vary = Vary::V_g;
    BiasPoint fixed;
    std::vector<double> points;
};

// Continuation sweep: each point warm-starts from the last converged one.
inline IVCurve iv_sweep(const DeviceSpec& spec, const SolverSettings& settings,
                        const SweepRequest& req,
                        const MeshResolution& resolution = MeshResolution::standard()) {
    if (req.points.size() < 2)
        throw std::invalid_argument("iv_sweep needs at least two points");
    const bool increasing = req.points[1] > req.points[0];
    for (std::size_t k = 1; k < req.points.size(); ++k)
        if ((req.points[k] > req.points[k - 1]) != increasing ||
            req.points[k] == req.points[k - 1])
            throw std::invalid_argument("sweep points must be strictly monotone");

    StructuredMesh mesh = build_mesh(spec, resolution);
    DriftDiffusionSolver solver(mesh, spec, settings);

    IVCurve curve;
    curve.kind = req.vary == SweepRequest::Vary::V_g ? CurveKind::transfer : CurveKind::output;
    curve.fixed_bias = req.fixed;
    curve.spec_fingerprint = spec_fingerprint(spec);

    FieldSolution last;
    bool have_anchor = false;
    for (std::size_t k = 0; k < req.points.size(); ++k) {
        BiasPoint b = req.fixed;
        (req.vary == SweepRequest::Vary::V_g ? b.V_g : b.V_d) = req.points[k];
        FieldSolution s;
        try {
            s = solver.solve_bias_lenient(b, have_anchor ? &last : nullptr);
        } catch (const SolverError& e) {
            if (k == 0) throw SolverError(std::string("no continuation anchor: ") + e.what(),
                                          e.bias, e.residual, e.iterations, e.trace);
            curve.points.push_back({req.points[k], std::numeric_limits<double>::quiet_NaN(),
                                    false});
            continue;
        }
        if (k == 0 && !s.converged)
            throw SolverError("no continuation anchor: first sweep point did not converge",
                              b, s.poisson_residual_V, s.iterations);
        curve.points.push_back({req.points[k], solver.terminal_current(s, "drain"),
                                s.converged});
        if (s.converged) {
            last = std::move(s);
            have_anchor = true;
        }
    }
    return curve;
}

}  // namespace jlfet
