// Serialization round-trips: CSV writers/readers, metrics and sweep JSON,
// config parsing with line:col diagnostics, and SVG rendering.
#include <catch2/catch_amalgamated.hpp>

#include <jlfet/config.hpp>
#include <jlfet/io.hpp>
#include <jlfet/svg.hpp>

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace jlfet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "jlfet_io_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

bool same_bits(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// Minimal XML well-formedness scan: balanced tags, legal entities only.
bool xml_well_formed(const std::string& s) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '&') {
            static const char* ents[] = {"&amp;", "&lt;", "&gt;", "&quot;", "&apos;", "&#"};
            bool ok = false;
            for (const char* e : ents)
                if (s.compare(i, std::string(e).size(), e) == 0) ok = true;
            if (!ok) return false;
            ++i;
            continue;
        }
        if (s[i] != '<') {
            ++i;
            continue;
        }
        const auto close = s.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = s.substr(i + 1, close - i - 1);
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') {
            // prolog / comment, ignore
        } else if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
        } else if (tag.back() != '/') {
            stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
        }
        i = close + 1;
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("IV CSV round-trips doubles bit-exactly") {
    IVCurve curve;
    curve.kind = CurveKind::transfer;
    curve.fixed_bias = {0.0, 0.05, 0.0};
    const double vals[][2] = {
        {1.0 / 3.0, 6.02214076e23},
        {-0.0, 1e-300},
        {1.2345678901234567e-7, -4.9406564584124654e-324},
        {0.1, std::numeric_limits<double>::quiet_NaN()},
    };
    for (auto& v : vals) curve.points.push_back({v[0], v[1], v[1] > 0});

    const auto path = temp_dir() / "roundtrip.csv";
    write_iv_csv(curve, path);
    const auto pts = read_iv_csv(path);

    REQUIRE(pts.size() == curve.points.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        CAPTURE(k);
        CHECK(same_bits(pts[k].sweep_V, curve.points[k].sweep_V));
        CHECK(same_bits(pts[k].I_d_A, curve.points[k].I_d_A));
        CHECK(pts[k].converged == curve.points[k].converged);
    }

    const auto text = slurp(path);
    CHECK(text.rfind("sweep_V,I_d_A,converged\n", 0) == 0);
    CHECK(text.find("nan") != std::string::npos);
    CHECK(text.find("-0,") != std::string::npos);
}

TEST_CASE("IV CSV reader rejects damaged files") {
    SECTION("missing header") {
        const auto path = temp_dir() / "noheader.csv";
        spit(path, "bogus\n0.1,2e-6,1\n");
        CHECK_THROWS_AS(read_iv_csv(path), IoError);
        CHECK_THROWS_WITH(read_iv_csv(path), Catch::Matchers::ContainsSubstring("header"));
    }
    SECTION("malformed row") {
        const auto path = temp_dir() / "badrow.csv";
        spit(path, "sweep_V,I_d_A,converged\n0.1\n");
        CHECK_THROWS_AS(read_iv_csv(path), IoError);
    }
    SECTION("non-numeric field") {
        const auto path = temp_dir() / "badnum.csv";
        spit(path, "sweep_V,I_d_A,converged\n0.1,abc,1\n");
        CHECK_THROWS_WITH(read_iv_csv(path), Catch::Matchers::ContainsSubstring("bad number"));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(read_iv_csv(temp_dir() / "absent.csv"), IoError);
    }
}

TEST_CASE("metrics JSON carries every figure with units") {
    DeviceMetrics m;
    m.V_th_V = 0.25;
    m.V_th_method = "constant_current";
    m.SS_mV_dec = 68.5;
    m.I_on_A = 2.5e-6;
    m.I_off_A = 3e-13;
    m.on_off_ratio = m.I_on_A / m.I_off_A;
    m.I_off_floored = false;
    m.gm_max_S = 8e-6;
    m.C_gg_samples.push_back({0.9, 6.1e-17});

    const auto j = metrics_to_json(m);
    CHECK(j.at("V_th").get<double>() == 0.25);
    CHECK(j.at("V_th_method").get<std::string>() == "constant_current");
    CHECK(j.at("SS").get<double>() == 68.5);
    CHECK(j.at("I_on").get<double>() == 2.5e-6);
    CHECK(j.at("I_off").get<double>() == 3e-13);
    CHECK(j.at("I_off_floored").get<bool>() == false);
    CHECK(j.at("gm_max").get<double>() == 8e-6);
    REQUIRE(j.at("C_gg_samples").size() == 1);
    CHECK(j.at("C_gg_samples")[0].at("V_g").get<double>() == 0.9);
    CHECK(j.at("C_gg_samples")[0].at("C_gg").get<double>() == 6.1e-17);
    CHECK(j.at("units").at("V_th").get<std::string>() == "V");
    CHECK(j.at("units").at("SS").get<std::string>() == "mV/decade");
    CHECK(j.at("units").at("gm_max").get<std::string>() == "S");

    // Key order is part of the format: derived fields first, units last.
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    const std::vector<std::string> expect = {"V_th",  "V_th_method",  "SS",
                                             "I_on",  "I_off",        "on_off_ratio",
                                             "I_off_floored", "gm_max", "C_gg_samples",
                                             "units"};
    CHECK(keys == expect);

    // Serialization is deterministic, file output byte-stable.
    CHECK(j.dump(2) == metrics_to_json(m).dump(2));
    const auto p1 = temp_dir() / "metrics_a.json";
    const auto p2 = temp_dir() / "metrics_b.json";
    write_metrics_json(m, p1);
    write_metrics_json(m, p2);
    const auto t1 = slurp(p1);
    CHECK(t1 == slurp(p2));
    CHECK(!t1.empty());
    CHECK(t1.back() == '\n');

    // Unset metrics (NaN) still serialize: JSON has no NaN, so dumps emit null.
    DeviceMetrics blank;
    const auto jb = metrics_to_json(blank);
    const auto dumped = jb.dump(2);
    CHECK(dumped.find("\"V_th\": null") != std::string::npos);
    CHECK(dumped.find("nan") == std::string::npos);
}

TEST_CASE("field grid export covers every node") {
    const auto spec = refs::stock_device();
    const auto mesh = build_mesh(spec, MeshResolution::coarse());

    FieldSolution sol;
    sol.psi_V.assign(static_cast<std::size_t>(mesh.node_count()), 0.25);
    sol.n_cm3.assign(static_cast<std::size_t>(mesh.node_count()), 1e18);
    sol.bias = {0, 0, 0};
    sol.converged = true;

    const auto path = temp_dir() / "fields.csv";
    export_field_grid(sol, mesh, path);
    const auto text = slurp(path);
    CHECK(text.rfind("x_nm,y_nm,psi_V,n_cm3,region", 0) == 0);
    CHECK(count_lines(text) == static_cast<std::size_t>(mesh.node_count()) + 1);
    // Metal-gate slice: transport and dielectric regions, no meshed electrode.
    for (const char* r : {"channel_semiconductor", "sd_semiconductor", "gate_dielectric"})
        CHECK(text.find(r) != std::string::npos);
    CHECK(text.find("gate_electrode") == std::string::npos);

    SECTION("size mismatch is rejected") {
        sol.psi_V.pop_back();
        CHECK_THROWS_AS(export_field_grid(sol, mesh, temp_dir() / "bad.csv"),
                        std::invalid_argument);
    }
}

TEST_CASE("mesh CSV lists node coordinates with regions") {
    const auto mesh = build_mesh(refs::stock_device(), MeshResolution::coarse());
    const auto path = temp_dir() / "mesh.csv";
    write_mesh_csv(mesh, path);
    const auto text = slurp(path);
    CHECK(text.rfind("x_nm,y_nm,region", 0) == 0);
    CHECK(count_lines(text) == static_cast<std::size_t>(mesh.node_count()) + 1);
}

TEST_CASE("sweep CSV interleaves failures in sweep order") {
    SweepResult res;
    SweepAxis ax;
    ax.parameter = SweepParameter::gate_workfunction_eV;
    ax.values = {4.63, 5.0, 5.22};
    res.axes.push_back(ax);

    SweepRow row;                      // middle tuple succeeded
    row.values = {5.0};
    row.metrics.V_th_V = 0.39;
    row.metrics.V_th_method = "constant_current";
    row.metrics.SS_mV_dec = 66.0;
    row.metrics.I_on_A = 4e-6;
    row.metrics.I_off_A = 1e-12;
    row.metrics.on_off_ratio = 4e6;
    row.metrics.gm_max_S = 9e-6;
    row.diagnostics.requested_points = 40;
    row.diagnostics.converged_points = 40;
    res.rows.push_back(row);

    res.failures.push_back({{4.63}, "solver blew up, badly\nat V_g=0.2"});
    res.failures.push_back({{5.22}, "did not converge"});

    const auto path = temp_dir() / "sweep.csv";
    write_sweep_csv(res, path);
    const auto text = slurp(path);

    std::istringstream lines(text);
    std::string header, l1, l2, l3;
    REQUIRE(std::getline(lines, header));
    REQUIRE(std::getline(lines, l1));
    REQUIRE(std::getline(lines, l2));
    REQUIRE(std::getline(lines, l3));

    CHECK(header ==
          "gate_workfunction_eV,V_th_V,SS_mV_dec,I_on_A,I_off_A,on_off_ratio,"
          "I_off_floored,gm_max_S,converged_points,requested_points,error");
    // Axis order 4.63 (failed), 5.0 (row), 5.22 (failed).
    CHECK(l1.rfind("4.63,", 0) == 0);
    CHECK(l2.rfind("5,", 0) == 0);
    CHECK(l3.rfind("5.22,", 0) == 0);
    // Error text is sanitized: carries no raw separators.
    CHECK(l1.find("solver blew up; badly;at V_g=0.2") != std::string::npos);
    CHECK(l2.find("66") != std::string::npos);
    CHECK(l2.back() == ',');          // empty error column on success rows

    // Every line splits into the same number of fields as the header.
    auto fields = [](const std::string& s) {
        std::size_t n = 1;
        for (char c : s)
            if (c == ',') ++n;
        return n;
    };
    CHECK(fields(l1) == fields(header));
    CHECK(fields(l2) == fields(header));
    CHECK(fields(l3) == fields(header));
}

TEST_CASE("sweep JSON mirrors rows, failures, and trends") {
    SweepResult res;
    SweepAxis ax;
    ax.parameter = SweepParameter::dielectric_thickness_nm;
    ax.values = {2.0, 3.0};
    res.axes.push_back(ax);
    SweepRow row;
    row.values = {2.0};
    row.metrics.V_th_V = 0.4;
    row.diagnostics.requested_points = 10;
    row.diagnostics.converged_points = 10;
    res.rows.push_back(row);
    res.failures.push_back({{3.0}, "boom"});

    const auto j = sweep_to_json(res);
    REQUIRE(j.at("axes").size() == 1);
    CHECK(j.at("axes")[0].at("parameter").get<std::string>() == "dielectric_thickness_nm");
    REQUIRE(j.at("rows").size() == 1);
    CHECK(j.at("rows")[0].at("values")[0].get<double>() == 2.0);
    CHECK(j.at("rows")[0].at("metrics").at("V_th").get<double>() == 0.4);
    CHECK(j.at("rows")[0].at("converged_points").get<int>() == 10);
    REQUIRE(j.at("failures").size() == 1);
    CHECK(j.at("failures")[0].at("error").get<std::string>() == "boom");

    const auto path = temp_dir() / "sweep.json";
    nlohmann::ordered_json trends;
    trends["V_th_V"] = {{"slope", 1.0}, {"intercept", -4.6}, {"r_squared", 0.999}};
    write_sweep_json(res, path, trends);
    const auto parsed = nlohmann::ordered_json::parse(slurp(path));
    CHECK(parsed.at("trends").at("V_th_V").at("slope").get<double>() == 1.0);
    // NaN metrics become null on the wire, so compare serialized forms
    CHECK(parsed.at("rows").dump() == j.at("rows").dump());
}

TEST_CASE("empty config text yields stock settings") {
    const auto cfg = parse_config("{}");
    CHECK(cfg.output_dir == "out");
    CHECK(cfg.resolution == "default");
    CHECK(cfg.parallelism == 1);
    CHECK(!cfg.has_sweep);
    CHECK(!cfg.emit_fields);
    CHECK(!cfg.emit_plots);
    CHECK(cfg.capacitance_biases.empty());
    CHECK(spec_fingerprint(cfg.device) == spec_fingerprint(default_device()));
    CHECK(cfg.bias.V_dd == 1.0);
    CHECK(cfg.solver.tol_psi_V == 1e-6);
}

TEST_CASE("config errors carry line and column") {
    SECTION("unknown key") {
        try {
            parse_config("{\n  \"devicee\": {}\n}");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.line == 2);
            CHECK(e.col == 3);
            CHECK(e.path == "/devicee");
            CHECK(std::string(e.what()).find("2:3:") != std::string::npos);
            CHECK(std::string(e.what()).find("devicee") != std::string::npos);
        }
    }
    SECTION("syntax error") {
        try {
            parse_config("{\n  \"parallelism\": \n}");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.line >= 2);
            CHECK(e.col >= 1);
        }
    }
    SECTION("type error names the key") {
        try {
            parse_config("{\"parallelism\": \"four\"}");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("parallelism") != std::string::npos);
            CHECK(e.line == 1);
        }
    }
    SECTION("bad gate kind") {
        const std::string text = R"({"device": {"gate": {"kind": "steel"}}})";
        CHECK_THROWS_WITH(parse_config(text),
                          Catch::Matchers::ContainsSubstring("metal") &&
                              Catch::Matchers::ContainsSubstring("doped_poly"));
    }
    SECTION("bad resolution name") {
        try {
            parse_config(R"({"resolution": "ultra"})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.path == "/resolution");
        }
    }
    SECTION("device validation failures point at /device") {
        try {
            parse_config(R"({"device": {"dielectric_thickness_nm": 25}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.path == "/device");
            CHECK(e.line == 0);
            CHECK(std::string(e.what()).find("invalid device") != std::string::npos);
        }
    }
    SECTION("bad sweep parameter names its array slot") {
        const std::string text =
            R"({"sweep": {"axes": [{"parameter": "banana", "values": [1, 2]}]}})";
        try {
            parse_config(text);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.path == "/sweep/axes/0/parameter");
        }
    }
}

TEST_CASE("config serialization round-trips") {
    RunConfig cfg;
    cfg.device = refs::stock_device(5.0);
    cfg.solver.max_gummel_iterations = 77;
    cfg.bias.V_dd = 0.9;
    cfg.bias.vth_step_V = 0.02;
    cfg.has_sweep = true;
    SweepAxis ax;
    ax.parameter = SweepParameter::gate_workfunction_eV;
    ax.values = {4.63, 4.9, 5.22};
    cfg.sweep_axes.push_back(ax);
    cfg.capacitance_biases = {0.0, 0.6, 1.2};
    cfg.output_dir = "results/runA";
    cfg.emit_fields = true;
    cfg.resolution = "coarse";
    cfg.parallelism = 4;

    const auto s1 = serialize_config(cfg).dump(2);
    const auto cfg2 = parse_config(s1);
    const auto s2 = serialize_config(cfg2).dump(2);
    CHECK(s1 == s2);
    CHECK(spec_fingerprint(cfg2.device) == spec_fingerprint(cfg.device));
    CHECK(cfg2.solver.max_gummel_iterations == 77);
    CHECK(cfg2.bias.V_dd == 0.9);
    REQUIRE(cfg2.sweep_axes.size() == 1);
    CHECK(cfg2.sweep_axes[0].values == ax.values);
    CHECK(cfg2.capacitance_biases == cfg.capacitance_biases);
    CHECK(cfg2.parallelism == 4);
    CHECK(cfg2.emit_fields);

    // Poly-gate devices round-trip the doping instead of a workfunction.
    RunConfig pc;
    pc.device.gate = GateMaterial::poly(-1e20);
    const auto ps = serialize_config(pc).dump(2);
    const auto pc2 = parse_config(ps);
    CHECK(pc2.device.gate.kind == GateKind::doped_poly);
    CHECK(pc2.device.gate.poly_doping_cm3 == -1e20);
}

TEST_CASE("transfer curves render as self-contained SVG") {
    IVCurve curve;
    curve.kind = CurveKind::transfer;
    curve.fixed_bias = {0.0, 0.05, 0.0};
    for (double v = -0.2; v <= 1.0 + 1e-9; v += 0.05)
        curve.points.push_back({v, 1e-9 * std::pow(10.0, v / 0.065), true});

    const auto path = temp_dir() / "transfer.svg";
    render_iv_svg(curve, path);
    const auto text = slurp(path);
    CHECK(text.rfind("<svg", 0) == 0);
    CHECK(text.find("</svg>") != std::string::npos);
    CHECK(xml_well_formed(text));
    CHECK(text.find("V_g [V]") != std::string::npos);

    SECTION("output curves use a linear microamp axis") {
        IVCurve out;
        out.kind = CurveKind::output;
        out.fixed_bias = {1.0, 0.0, 0.0};
        for (double v = 0.0; v <= 1.0 + 1e-9; v += 0.1)
            out.points.push_back({v, 5e-6 * std::min(v / 0.4, 1.0), true});
        const auto p2 = temp_dir() / "output.svg";
        render_iv_svg(out, p2);
        const auto t2 = slurp(p2);
        CHECK(t2.find("I_d [uA]") != std::string::npos);
        CHECK(xml_well_formed(t2));
    }
    SECTION("a curve with no converged points is rejected") {
        IVCurve dead = curve;
        for (auto& p : dead.points) p.converged = false;
        CHECK_THROWS_AS(render_iv_svg(dead, temp_dir() / "dead.svg"),
                        std::invalid_argument);
    }
}

TEST_CASE("trend charts annotate the fitted line") {
    const std::vector<double> xs = {4.63, 4.8, 5.0, 5.22};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(x - 4.6);
    LinearTrend trend;
    trend.slope = 1.0;
    trend.intercept = -4.6;
    trend.r_squared = 0.9995;

    const auto path = temp_dir() / "trend.svg";
    render_trend_svg(xs, ys, trend, "workfunction [eV]", "V_th [V]", path);
    const auto text = slurp(path);
    CHECK(text.rfind("<svg", 0) == 0);
    CHECK(xml_well_formed(text));
    CHECK(text.find("slope = ") != std::string::npos);
    CHECK(text.find("R^2 = ") != std::string::npos);
    CHECK(text.find("workfunction [eV]") != std::string::npos);

    CHECK_THROWS_AS(render_trend_svg({}, {}, trend, "x", "y", temp_dir() / "e.svg"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        render_trend_svg(xs, {1.0}, trend, "x", "y", temp_dir() / "m.svg"),
        std::invalid_argument);
}
