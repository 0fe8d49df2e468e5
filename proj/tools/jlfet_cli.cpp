// Command-line front end: single-device runs, parameter sweeps, gate
// classification, field exports, and the metal-vs-poly comparison.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <jlfet/jlfet.hpp>

namespace fs = std::filesystem;
using namespace jlfet;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_solver = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string resolution;
    int parallelism = 0;
    bool emit_fields = false;
    bool emit_plots = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_config = true) {
    if (with_config)
        cmd->add_option("--config", a.config_path, "JSON run configuration");
    cmd->add_option("--out", a.out_dir, "output directory (overrides config)");
    cmd->add_option("--resolution", a.resolution, "mesh resolution: coarse|default|fine")
        ->check(CLI::IsMember({"coarse", "default", "fine"}));
    cmd->add_option("--parallelism", a.parallelism, "max concurrent solves")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--emit-fields", a.emit_fields, "export potential/carrier grids");
    cmd->add_flag("--emit-plots", a.emit_plots, "render SVG charts");
}

std::string g_diag_dir = "out";   // resolved output dir, for solver diagnostics

RunConfig load_config(const CommonArgs& a) {
    RunConfig c;
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file", 0, 0, a.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            c = parse_config(ss.str());
        } catch (ConfigError& e) {
            throw ConfigError(a.config_path + ":" + e.what(), 0, 0, e.path);
        }
    }
    if (!a.out_dir.empty()) c.output_dir = a.out_dir;
    if (!a.resolution.empty()) c.resolution = a.resolution;
    if (a.parallelism > 0) c.parallelism = a.parallelism;
    c.emit_fields = c.emit_fields || a.emit_fields;
    c.emit_plots = c.emit_plots || a.emit_plots;
    g_diag_dir = c.output_dir;
    return c;
}

MeasureOptions measure_options(const RunConfig& c) {
    MeasureOptions opt;
    opt.protocol = c.bias;
    opt.resolution = MeshResolution::parse(c.resolution);
    opt.capacitance_biases = c.capacitance_biases;
    opt.settings = c.solver;
    return opt;
}

// Solver failures land in a diagnostics file next to the outputs so exit
// code 3 always has something inspectable behind it.
void write_solver_diagnostics(const fs::path& out_dir, const SolverError& e) {
    nlohmann::ordered_json j;
    j["error"] = e.what();
    j["bias"] = {{"V_g", e.bias.V_g}, {"V_d", e.bias.V_d}, {"V_s", e.bias.V_s}};
    j["residual"] = e.residual;
    j["iterations"] = e.iterations;
    j["residual_trace"] = e.trace;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream out(out_dir / "solver_diagnostics.json", std::ios::binary);
    out << j.dump(2) << '\n';
    std::cerr << "solver diagnostics written to "
              << (out_dir / "solver_diagnostics.json").string() << "\n";
}

nlohmann::ordered_json trend_json(const LinearTrend& t) {
    return {{"slope", t.slope}, {"intercept", t.intercept}, {"r_squared", t.r_squared}};
}

int cmd_simulate(const CommonArgs& args) {
    const RunConfig c = load_config(args);
    const fs::path out = c.output_dir;
    const MeasureOptions opt = measure_options(c);

    const StructuredMesh mesh = build_mesh(c.device, opt.resolution);
    DriftDiffusionSolver solver(mesh, c.device, c.solver);
    const FieldSolution eq = solver.solve_equilibrium();

    MeasureResult r = measure_device(c.device, opt);
    write_iv_csv(r.transfer_low, out / "transfer_vdlin.csv");
    write_iv_csv(r.transfer_dd, out / "transfer_vdd.csv");

    SweepRequest outreq;
    outreq.vary = SweepRequest::Vary::V_d;
    outreq.fixed = {c.bias.V_dd, 0.0, 0.0};   // V_g = V_dd, sweep V_d
    outreq.points = detail::step_grid(0.0, c.bias.V_dd, c.bias.on_off_step_V);
    IVCurve output = iv_sweep(c.device, c.solver, outreq, opt.resolution);
    write_iv_csv(output, out / "output_vg_vdd.csv");

    write_metrics_json(r.metrics, out / "metrics.json");

    const RegimeReport regime = classify_regime(eq, mesh, c.device);
    nlohmann::ordered_json rj;
    rj["regime_at_equilibrium"] = regime_name(regime.regime);
    rj["min_carrier_ratio"] = regime.min_carrier_ratio;
    rj["converged_points"] = r.diagnostics.converged_points;
    rj["requested_points"] = r.diagnostics.requested_points;
    write_text_file(rj.dump(2) + "\n", out / "run_summary.json");

    if (c.emit_fields) {
        export_field_grid(eq, mesh, out / "fields_equilibrium.csv");
        write_mesh_csv(mesh, out / "mesh.csv");
    }
    if (c.emit_plots) {
        render_iv_svg(r.transfer_low, out / "transfer_vdlin.svg");
        render_iv_svg(r.transfer_dd, out / "transfer_vdd.svg");
        render_iv_svg(output, out / "output_vg_vdd.svg");
    }
    std::cout << "V_th = " << r.metrics.V_th_V << " V, SS = " << r.metrics.SS_mV_dec
              << " mV/dec, I_on = " << r.metrics.I_on_A
              << " A, on/off = " << r.metrics.on_off_ratio << "\n";
    return exit_ok;
}

int cmd_sweep(const CommonArgs& args) {
    const RunConfig c = load_config(args);
    if (!c.has_sweep || c.sweep_axes.empty())
        throw ConfigError("sweep command needs a config with a sweep section", 0, 0,
                          "/sweep");
    const fs::path out = c.output_dir;
    SweepPlan plan = c.sweep_plan();
    const SweepResult res = run_sweep(plan);

    write_sweep_csv(res, out / "sweep.csv");

    nlohmann::ordered_json trends;
    if (res.axes.size() == 1 && res.rows.size() >= 3) {
        const SweepParameter p = res.axes[0].parameter;
        for (MetricField f : {MetricField::V_th, MetricField::I_on, MetricField::on_off_ratio,
                              MetricField::SS}) {
            try {
                const LinearTrend t = fit_linear_trend(res, p, f);
                trends[metric_field_name(f)] = trend_json(t);
                if (c.emit_plots) {
                    std::vector<double> xs, ys;
                    for (const auto& row : res.rows) {
                        xs.push_back(row.values[0]);
                        ys.push_back(metric_value(row.metrics, f));
                    }
                    render_trend_svg(xs, ys, t, sweep_parameter_name(p),
                                     metric_field_name(f),
                                     out / (std::string("trend_") + metric_field_name(f) +
                                            ".svg"));
                }
            } catch (const ExtractionError&) {
                // metric missing on too many rows; skip its trend
            }
        }
    }
    write_sweep_json(res, out / "sweep.json", trends);

    std::cout << res.rows.size() << " points succeeded, " << res.failures.size()
              << " failed; results in " << (out / "sweep.csv").string() << "\n";
    if (!trends.empty()) std::cout << "trends: " << trends.dump() << "\n";
    return exit_ok;
}

int cmd_classify(const CommonArgs& args) {
    const RunConfig c = load_config(args);
    const fs::path out = c.output_dir;
    const double phi_s = c.device.channel_phi_s_eV();
    const ChannelType ch =
        c.device.channel_doping_cm3 > 0 ? ChannelType::n_type : ChannelType::p_type;

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::cout << "channel workfunction phi_s = " << phi_s << " eV\n";
    for (const auto& metal : builtin_metal_table()) {
        const GateClassification g = classify_gate(metal.phi_m_eV, phi_s, ch);
        nlohmann::ordered_json row;
        row["metal"] = metal.name;
        row["workfunction_eV"] = metal.phi_m_eV;
        row["class"] = gate_class_name(g.cls);
        row["phi_ms_eV"] = g.phi_ms_eV;
        row["accumulates_channel"] = g.warning;
        DeviceSpec d = c.device;
        if (d.gate.kind == GateKind::metal) {
            d.gate.workfunction_eV = metal.phi_m_eV;
            const AnalyticVth vth = threshold_voltage_analytic(d);
            row["V_th_analytic_V"] = vth.V_th_V;
            row["normally_on"] = vth.normally_on;
        }
        rows.push_back(row);
        std::cout << "  " << metal.name << " (" << metal.phi_m_eV
                  << " eV): " << gate_class_name(g.cls)
                  << (g.warning ? "  [accumulates this channel: normally-on]" : "")
                  << "\n";
    }
    nlohmann::ordered_json j;
    j["channel_type"] = ch == ChannelType::n_type ? "n" : "p";
    j["channel_phi_s_eV"] = phi_s;
    j["metals"] = rows;
    write_text_file(j.dump(2) + "\n", out / "gate_classification.json");
    return exit_ok;
}

int cmd_fields(const CommonArgs& args, const std::vector<double>& vg_list, double vd) {
    const RunConfig c = load_config(args);
    const fs::path out = c.output_dir;
    const MeshResolution res = MeshResolution::parse(c.resolution);
    const StructuredMesh mesh = build_mesh(c.device, res);
    DriftDiffusionSolver solver(mesh, c.device, c.solver);

    std::vector<double> biases = vg_list;
    if (biases.empty()) {
        biases.push_back(0.0);
        if (c.device.gate.kind == GateKind::metal)
            biases.push_back(flat_band_voltage(c.device));
    }
    for (double vg : biases) {
        const BiasPoint b{vg, vd, 0.0};
        const FieldSolution sol =
            vd == 0.0 ? solver.solve_poisson(b) : solver.solve_bias(b);
        if (!sol.converged)
            throw SolverError("field solve did not converge", b, sol.poisson_residual_V,
                              sol.iterations);
        char name[96];
        std::snprintf(name, sizeof name, "fields_vg_%+.3f_vd_%+.3f.csv", vg, vd);
        export_field_grid(sol, mesh, out / name);
        const RegimeReport regime = classify_regime(sol, mesh, c.device);
        std::cout << "V_g = " << vg << " V, V_d = " << vd << " V -> "
                  << regime_name(regime.regime)
                  << " (min n/N_d = " << regime.min_carrier_ratio << "), " << name << "\n";
    }
    write_mesh_csv(mesh, out / "mesh.csv");
    return exit_ok;
}

int cmd_compare_poly(const CommonArgs& args, double poly_doping, double v_dd) {
    const RunConfig c = load_config(args);
    const fs::path out = c.output_dir;

    DeviceSpec metal = c.device;
    if (metal.gate.kind != GateKind::metal)
        metal.gate = GateMaterial::metal(4.63);
    DeviceSpec poly = c.device;
    poly.gate = GateMaterial::poly(poly_doping);

    MeasureOptions opt = measure_options(c);
    const GateStackComparison cmp = compare_gate_stacks(metal, poly, v_dd, opt);

    nlohmann::ordered_json j;
    j["V_dd"] = v_dd;
    j["poly_doping_cm3"] = poly_doping;
    j["metal"] = metrics_to_json(cmp.metal);
    j["poly"] = metrics_to_json(cmp.poly);
    j["metal_matched"] = metrics_to_json(cmp.metal_matched);
    j["matched_phi_m_eV"] = cmp.matched_phi_m_eV;
    j["vth_mismatch_V"] = cmp.vth_mismatch_V;
    j["on_off_ratio_quotient"] = cmp.ratio_quotient;
    write_text_file(j.dump(2) + "\n", out / "gate_stack_comparison.json");

    std::cout << "matched phi_m = " << cmp.matched_phi_m_eV
              << " eV (V_th mismatch " << cmp.vth_mismatch_V << " V)\n"
              << "metal on/off = " << cmp.metal_matched.on_off_ratio
              << ", poly on/off = " << cmp.poly.on_off_ratio
              << ", quotient = " << cmp.ratio_quotient << "\n"
              << "metal SS = " << cmp.metal_matched.SS_mV_dec
              << " mV/dec, poly SS = " << cmp.poly.SS_mV_dec << " mV/dec\n";
    return exit_ok;
}

int cmd_preset_paper(const std::string& path) {
    RunConfig c;
    c.device = default_device();
    c.has_sweep = true;
    SweepAxis axis;
    axis.parameter = SweepParameter::gate_workfunction_eV;
    axis.values = {4.63, 4.714, 4.799, 4.883, 4.967, 5.051, 5.136, 5.22};
    c.sweep_axes.push_back(axis);
    const std::string text = serialize_config(c).dump(2) + "\n";
    if (path == "-") {
        std::cout << text;
    } else {
        write_text_file(text, path);
        std::cout << "wrote " << path << "\n";
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2-D drift-diffusion simulator for metal-gated junctionless nanowire FETs"};
    app.require_subcommand(1);

    CommonArgs sim_args, sweep_args, cls_args, f_args, cmp_args;
    std::vector<double> vg_list;
    double fields_vd = 0.0;
    double poly_doping = 1e20;
    double cmp_vdd = 1.0;
    std::string preset_path = "paper_device.json";

    CLI::App* sim = app.add_subcommand("simulate", "single-device curves and metrics");
    add_common(sim, sim_args);
    CLI::App* sw = app.add_subcommand("sweep", "run the sweep section of the config");
    add_common(sw, sweep_args);
    CLI::App* cls = app.add_subcommand(
        "classify", "classify the metal workfunction table against the channel");
    add_common(cls, cls_args);
    CLI::App* flds =
        app.add_subcommand("fields", "export potential/carrier grids at given biases");
    add_common(flds, f_args);
    flds->add_option("--vg", vg_list, "gate biases [V] (default: 0 and V_FB)");
    flds->add_option("--vd", fields_vd, "drain bias [V]");
    CLI::App* cmp = app.add_subcommand("compare-poly",
                                       "metal vs doped-poly gate at matched V_th");
    add_common(cmp, cmp_args);
    cmp->add_option("--poly-doping", poly_doping, "poly gate doping [cm^-3], signed");
    cmp->add_option("--vdd", cmp_vdd, "supply voltage [V]");
    CLI::App* preset = app.add_subcommand("preset-paper",
                                          "write the reference device configuration");
    preset->add_option("path", preset_path, "output path, or - for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_args);
        if (sw->parsed()) return cmd_sweep(sweep_args);
        if (cls->parsed()) return cmd_classify(cls_args);
        if (flds->parsed()) return cmd_fields(f_args, vg_list, fields_vd);
        if (cmp->parsed()) return cmd_compare_poly(cmp_args, poly_doping, cmp_vdd);
        if (preset->parsed()) return cmd_preset_paper(preset_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        write_solver_diagnostics(g_diag_dir, e);
        return exit_solver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_ok;
}
