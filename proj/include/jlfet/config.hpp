#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "device.hpp"
#include "extraction.hpp"
#include "solver.hpp"
#include "sweep.hpp"

namespace jlfet {

using ordered_json = nlohmann::ordered_json;

// Parse/validation failure with best-effort source location. line/col are
// 1-based; 0 means the location could not be attributed.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line, int col, std::string path)
        : std::runtime_error(format(msg, line, col, path)),
          line(line),
          col(col),
          path(std::move(path)) {}

    int line, col;
    std::string path;   // JSON pointer of the offending element

private:
    static std::string format(const std::string& msg, int line, int col,
                              const std::string& path) {
        std::string s;
        if (line > 0) s += std::to_string(line) + ":" + std::to_string(col) + ": ";
        s += msg;
        if (!path.empty()) s += " (at " + path + ")";
        return s;
    }
};

// Everything a CLI run needs. `sweep` is optional; `device` doubles as the
// sweep's base spec.
struct RunConfig {
    DeviceSpec device = default_device();
    SolverSettings solver;
    BiasProtocol bias;
    bool has_sweep = false;
    std::vector<SweepAxis> sweep_axes;
    std::vector<double> capacitance_biases;
    std::string output_dir = "out";
    bool emit_fields = false;
    bool emit_plots = false;
    std::string resolution = "default";
    int parallelism = 1;

    SweepPlan sweep_plan() const {
        SweepPlan p;
        p.base_spec = device;
        p.axes = sweep_axes;
        p.bias_protocol = bias;
        p.resolution = MeshResolution::parse(resolution);
        p.parallelism = parallelism;
        p.capacitance_biases = capacitance_biases;
        return p;
    }
};

namespace detail {

struct KeyPos {
    int line = 0, col = 0;
};

// Maps JSON-pointer paths of object keys to source positions. Runs after a
// successful nlohmann parse, so the text is known to be well-formed JSON.
class KeyLocator {
public:
    explicit KeyLocator(const std::string& text) : t_(text) { value(""); }

    KeyPos at(const std::string& path) const {
        auto it = pos_.find(path);
        return it == pos_.end() ? KeyPos{} : it->second;
    }

private:
    const std::string& t_;
    std::size_t i_ = 0;
    int line_ = 1, col_ = 1;
    std::map<std::string, KeyPos> pos_;

    bool eof() const { return i_ >= t_.size(); }
    char peek() const { return t_[i_]; }
    char take() {
        const char c = t_[i_++];
        if (c == '\n') ++line_, col_ = 1;
        else ++col_;
        return c;
    }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
            take();
    }

    std::string string_token() {
        take();   // opening quote
        std::string s;
        while (!eof()) {
            const char c = take();
            if (c == '\\' && !eof()) {
                s += take();   // keep escapes verbatim; keys in configs are plain
                continue;
            }
            if (c == '"') break;
            s += c;
        }
        return s;
    }

    void value(const std::string& path) {
        skip_ws();
        if (eof()) return;
        const char c = peek();
        if (c == '{') {
            take();
            for (;;) {
                skip_ws();
                if (eof()) return;
                if (peek() == '}') {
                    take();
                    return;
                }
                const KeyPos kp{line_, col_};
                const std::string key = string_token();
                pos_.emplace(path + "/" + key, kp);
                skip_ws();
                if (!eof() && peek() == ':') take();
                value(path + "/" + key);
                skip_ws();
                if (!eof() && peek() == ',') take();
            }
        } else if (c == '[') {
            take();
            int idx = 0;
            for (;;) {
                skip_ws();
                if (eof()) return;
                if (peek() == ']') {
                    take();
                    return;
                }
                value(path + "/" + std::to_string(idx++));
                skip_ws();
                if (!eof() && peek() == ',') take();
            }
        } else if (c == '"') {
            string_token();
        } else {
            while (!eof() && peek() != ',' && peek() != '}' && peek() != ']') take();
        }
    }
};

// Strict object reader: every key must be consumed, leftovers are errors.
class ObjectReader {
public:
    ObjectReader(const ordered_json& j, std::string path, const KeyLocator& loc)
        : j_(j), path_(std::move(path)), loc_(loc) {
        if (!j.is_object())
            throw ConfigError("expected an object", loc_.at(path_).line, loc_.at(path_).col,
                              path_);
    }

    bool has(const char* key) const { return j_.contains(key); }

    const ordered_json* child(const char* key) {
        if (!j_.contains(key)) return nullptr;
        seen_.insert(key);
        return &j_.at(key);
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        read(j_.at(key), key, out);
    }

    template <typename T>
    void require(const char* key, T& out) {
        if (!j_.contains(key)) {
            const auto p = loc_.at(path_);
            throw ConfigError(std::string("missing required key '") + key + "'", p.line,
                              p.col, path_);
        }
        get(key, out);
    }

    void finish() {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) {
                const std::string kp = path_ + "/" + it.key();
                const auto p = loc_.at(kp);
                throw ConfigError("unknown key '" + it.key() + "'", p.line, p.col, kp);
            }
    }

    std::string child_path(const char* key) const { return path_ + "/" + key; }
    const KeyLocator& locator() const { return loc_; }

private:
    const ordered_json& j_;
    std::string path_;
    const KeyLocator& loc_;
    std::set<std::string> seen_;

    void fail_type(const char* key, const char* want) const {
        const std::string kp = path_ + "/" + std::string(key);
        const auto p = loc_.at(kp);
        throw ConfigError(std::string("expected ") + want + " for '" + key + "'", p.line,
                          p.col, kp);
    }

    void read(const ordered_json& v, const char* key, double& out) const {
        if (!v.is_number()) fail_type(key, "a number");
        out = v.get<double>();
    }
    void read(const ordered_json& v, const char* key, int& out) const {
        if (!v.is_number_integer()) fail_type(key, "an integer");
        out = v.get<int>();
    }
    void read(const ordered_json& v, const char* key, bool& out) const {
        if (!v.is_boolean()) fail_type(key, "a boolean");
        out = v.get<bool>();
    }
    void read(const ordered_json& v, const char* key, std::string& out) const {
        if (!v.is_string()) fail_type(key, "a string");
        out = v.get<std::string>();
    }
    void read(const ordered_json& v, const char* key, std::vector<double>& out) const {
        if (!v.is_array()) fail_type(key, "an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) fail_type(key, "an array of numbers");
            out.push_back(e.get<double>());
        }
    }
};

inline void read_mobility_table(ObjectReader& r, SemiconductorMaterial& m) {
    if (const ordered_json* tab = r.child("mobility_table_cm2Vs")) {
        const std::string tp = r.child_path("mobility_table_cm2Vs");
        if (!tab->is_array())
            throw ConfigError("expected an array of [doping_cm3, mu] pairs",
                              r.locator().at(tp).line, r.locator().at(tp).col, tp);
        m.mobility.clear();
        for (const auto& e : *tab) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError("expected an array of [doping_cm3, mu] pairs",
                                  r.locator().at(tp).line, r.locator().at(tp).col, tp);
            m.mobility.push_back({e[0].get<double>(), e[1].get<double>()});
        }
    }
}

inline void read_material(const ordered_json& j, const std::string& path,
                          const KeyLocator& loc, SemiconductorMaterial& m) {
    ObjectReader r(j, path, loc);
    r.get("name", m.name);
    r.get("relative_permittivity", m.relative_permittivity);
    r.get("electron_affinity_eV", m.electron_affinity_eV);
    r.get("bandgap_eV", m.bandgap_eV);
    r.get("Nc_cm3", m.Nc_cm3);
    r.get("Nv_cm3", m.Nv_cm3);
    read_mobility_table(r, m);
    r.finish();
}

inline void read_gate(const ordered_json& j, const std::string& path, const KeyLocator& loc,
                      GateMaterial& g) {
    ObjectReader r(j, path, loc);
    std::string kind = g.kind == GateKind::metal ? "metal" : "doped_poly";
    r.get("kind", kind);
    if (kind == "metal") g.kind = GateKind::metal;
    else if (kind == "doped_poly") g.kind = GateKind::doped_poly;
    else {
        const std::string kp = path + "/kind";
        throw ConfigError("gate kind must be \"metal\" or \"doped_poly\"", loc.at(kp).line,
                          loc.at(kp).col, kp);
    }
    r.get("workfunction_eV", g.workfunction_eV);
    r.get("poly_doping_cm3", g.poly_doping_cm3);
    r.finish();
}

inline void read_device(const ordered_json& j, const std::string& path,
                        const KeyLocator& loc, DeviceSpec& d) {
    ObjectReader r(j, path, loc);
    r.get("channel_length_nm", d.channel_length_nm);
    r.get("channel_width_nm", d.channel_width_nm);
    r.get("channel_height_nm", d.channel_height_nm);
    r.get("sd_extension_nm", d.sd_extension_nm);
    r.get("channel_doping_cm3", d.channel_doping_cm3);
    r.get("sd_doping_cm3", d.sd_doping_cm3);
    r.get("dielectric_thickness_nm", d.dielectric_thickness_nm);
    if (const ordered_json* mat = r.child("channel_material"))
        read_material(*mat, path + "/channel_material", loc, d.channel_material);
    if (const ordered_json* die = r.child("dielectric")) {
        ObjectReader dr(*die, path + "/dielectric", loc);
        dr.get("name", d.dielectric.name);
        dr.get("relative_permittivity", d.dielectric.relative_permittivity);
        dr.finish();
    }
    bool explicit_factor = false;
    std::string coverage = d.gate_coverage == GateCoverage::tri_gate ? "tri_gate"
                                                                     : "double_gate";
    r.get("gate_coverage", coverage);
    if (coverage == "tri_gate") d.gate_coverage = GateCoverage::tri_gate;
    else if (coverage == "double_gate") d.gate_coverage = GateCoverage::double_gate;
    else {
        const std::string kp = path + "/gate_coverage";
        throw ConfigError("gate_coverage must be \"tri_gate\" or \"double_gate\"",
                          loc.at(kp).line, loc.at(kp).col, kp);
    }
    if (r.has("effective_width_factor")) {
        explicit_factor = true;
        r.get("effective_width_factor", d.effective_width_factor);
    }
    if (const ordered_json* gate = r.child("gate"))
        read_gate(*gate, path + "/gate", loc, d.gate);
    r.get("temperature_K", d.temperature_K);
    r.finish();
    if (!explicit_factor)
        d.effective_width_factor = default_width_factor(d.gate_coverage, d.channel_width_nm,
                                                        d.channel_height_nm);
}

inline void read_solver(const ordered_json& j, const std::string& path,
                        const KeyLocator& loc, SolverSettings& s) {
    ObjectReader r(j, path, loc);
    r.get("tol_psi_V", s.tol_psi_V);
    r.get("tol_I_rel", s.tol_I_rel);
    r.get("max_gummel_iterations", s.max_gummel_iterations);
    r.get("max_newton_iterations", s.max_newton_iterations);
    r.get("damping_clamp_vt", s.damping_clamp_vt);
    r.get("bias_ramp_step_V", s.bias_ramp_step_V);
    r.finish();
}

inline void read_bias(const ordered_json& j, const std::string& path, const KeyLocator& loc,
                      BiasProtocol& b) {
    ObjectReader r(j, path, loc);
    r.get("V_dd", b.V_dd);
    r.get("vth_drain_bias_V", b.vth_drain_bias_V);
    r.get("vth_step_V", b.vth_step_V);
    r.get("on_off_step_V", b.on_off_step_V);
    r.get("margin_below_V", b.margin_below_V);
    r.get("margin_above_V", b.margin_above_V);
    r.finish();
}

inline void read_sweep(const ordered_json& j, const std::string& path, const KeyLocator& loc,
                       RunConfig& c) {
    ObjectReader r(j, path, loc);
    c.has_sweep = true;
    if (const ordered_json* axes = r.child("axes")) {
        const std::string ap = path + "/axes";
        if (!axes->is_array())
            throw ConfigError("expected an array of axes", loc.at(ap).line, loc.at(ap).col,
                              ap);
        int idx = 0;
        for (const auto& a : *axes) {
            const std::string axp = ap + "/" + std::to_string(idx++);
            ObjectReader ar(a, axp, loc);
            SweepAxis axis;
            std::string pname;
            ar.require("parameter", pname);
            try {
                axis.parameter = parse_sweep_parameter(pname);
            } catch (const std::invalid_argument& e) {
                const std::string kp = axp + "/parameter";
                throw ConfigError(e.what(), loc.at(kp).line, loc.at(kp).col, kp);
            }
            ar.require("values", axis.values);
            ar.finish();
            c.sweep_axes.push_back(std::move(axis));
        }
    }
    r.get("capacitance_biases_V", c.capacitance_biases);
    r.finish();
}

inline KeyPos line_col_of_offset(const std::string& text, std::size_t byte) {
    KeyPos p{1, 1};
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') ++p.line, p.col = 1;
        else ++p.col;
    }
    return p;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // e.byte points one past the offending character
        const auto p = detail::line_col_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(e.what(), p.line, p.col, "");
    }
    detail::KeyLocator loc(text);

    RunConfig c;
    detail::ObjectReader r(j, "", loc);
    if (const ordered_json* dev = r.child("device"))
        detail::read_device(*dev, "/device", loc, c.device);
    if (const ordered_json* sol = r.child("solver"))
        detail::read_solver(*sol, "/solver", loc, c.solver);
    if (const ordered_json* bias = r.child("bias"))
        detail::read_bias(*bias, "/bias", loc, c.bias);
    if (const ordered_json* sw = r.child("sweep"))
        detail::read_sweep(*sw, "/sweep", loc, c);
    r.get("output_dir", c.output_dir);
    r.get("emit_fields", c.emit_fields);
    r.get("emit_plots", c.emit_plots);
    r.get("resolution", c.resolution);
    r.get("parallelism", c.parallelism);
    r.finish();

    if (auto bad = validate(c.device); !bad.empty())
        throw ConfigError("invalid device: " + bad.front(), 0, 0, "/device");
    try {
        MeshResolution::parse(c.resolution);
    } catch (const std::invalid_argument& e) {
        const auto p = loc.at("/resolution");
        throw ConfigError(e.what(), p.line, p.col, "/resolution");
    }
    if (c.parallelism < 1) {
        const auto p = loc.at("/parallelism");
        throw ConfigError("parallelism must be >= 1", p.line, p.col, "/parallelism");
    }
    if (c.has_sweep) {
        SweepPlan plan = c.sweep_plan();
        if (auto bad = validate(plan); !bad.empty())
            throw ConfigError("invalid sweep: " + bad.front(), 0, 0, "/sweep");
    }
    return c;
}

inline ordered_json serialize_config(const RunConfig& c) {
    ordered_json j;
    ordered_json dev;
    dev["channel_length_nm"] = c.device.channel_length_nm;
    dev["channel_width_nm"] = c.device.channel_width_nm;
    dev["channel_height_nm"] = c.device.channel_height_nm;
    dev["sd_extension_nm"] = c.device.sd_extension_nm;
    dev["channel_doping_cm3"] = c.device.channel_doping_cm3;
    dev["sd_doping_cm3"] = c.device.sd_doping_cm3;
    ordered_json mat;
    mat["name"] = c.device.channel_material.name;
    mat["relative_permittivity"] = c.device.channel_material.relative_permittivity;
    mat["electron_affinity_eV"] = c.device.channel_material.electron_affinity_eV;
    mat["bandgap_eV"] = c.device.channel_material.bandgap_eV;
    mat["Nc_cm3"] = c.device.channel_material.Nc_cm3;
    mat["Nv_cm3"] = c.device.channel_material.Nv_cm3;
    ordered_json tab = ordered_json::array();
    for (const auto& e : c.device.channel_material.mobility)
        tab.push_back(ordered_json::array({e.doping_cm3, e.mu_cm2_Vs}));
    mat["mobility_table_cm2Vs"] = tab;
    dev["channel_material"] = mat;
    ordered_json die;
    die["name"] = c.device.dielectric.name;
    die["relative_permittivity"] = c.device.dielectric.relative_permittivity;
    dev["dielectric"] = die;
    dev["dielectric_thickness_nm"] = c.device.dielectric_thickness_nm;
    ordered_json gate;
    if (c.device.gate.kind == GateKind::metal) {
        gate["kind"] = "metal";
        gate["workfunction_eV"] = c.device.gate.workfunction_eV;
    } else {
        gate["kind"] = "doped_poly";
        gate["poly_doping_cm3"] = c.device.gate.poly_doping_cm3;
    }
    dev["gate"] = gate;
    dev["gate_coverage"] =
        c.device.gate_coverage == GateCoverage::tri_gate ? "tri_gate" : "double_gate";
    dev["effective_width_factor"] = c.device.effective_width_factor;
    dev["temperature_K"] = c.device.temperature_K;
    j["device"] = dev;

    ordered_json sol;
    sol["tol_psi_V"] = c.solver.tol_psi_V;
    sol["tol_I_rel"] = c.solver.tol_I_rel;
    sol["max_gummel_iterations"] = c.solver.max_gummel_iterations;
    sol["max_newton_iterations"] = c.solver.max_newton_iterations;
    sol["damping_clamp_vt"] = c.solver.damping_clamp_vt;
    sol["bias_ramp_step_V"] = c.solver.bias_ramp_step_V;
    j["solver"] = sol;

    ordered_json bias;
    bias["V_dd"] = c.bias.V_dd;
    bias["vth_drain_bias_V"] = c.bias.vth_drain_bias_V;
    bias["vth_step_V"] = c.bias.vth_step_V;
    bias["on_off_step_V"] = c.bias.on_off_step_V;
    bias["margin_below_V"] = c.bias.margin_below_V;
    bias["margin_above_V"] = c.bias.margin_above_V;
    j["bias"] = bias;

    if (c.has_sweep) {
        ordered_json sw;
        ordered_json axes = ordered_json::array();
        for (const auto& a : c.sweep_axes) {
            ordered_json ax;
            ax["parameter"] = sweep_parameter_name(a.parameter);
            ax["values"] = a.values;
            axes.push_back(ax);
        }
        sw["axes"] = axes;
        if (!c.capacitance_biases.empty())
            sw["capacitance_biases_V"] = c.capacitance_biases;
        j["sweep"] = sw;
    }
    j["output_dir"] = c.output_dir;
    j["emit_fields"] = c.emit_fields;
    j["emit_plots"] = c.emit_plots;
    j["resolution"] = c.resolution;
    j["parallelism"] = c.parallelism;
    return j;
}

}  // namespace jlfet
