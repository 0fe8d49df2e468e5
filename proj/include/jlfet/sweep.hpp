#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "device.hpp"
#include "extraction.hpp"

namespace jlfet {

// Closed set of sweepable knobs; a small enum keeps configs checkable and the
// CSV schema fixed.
enum class SweepParameter {
    gate_workfunction_eV,
    channel_doping_cm3,
    dielectric_thickness_nm,
    channel_length_nm,
    channel_width_nm,
    channel_height_nm,
};

inline const char* sweep_parameter_name(SweepParameter p) {
    switch (p) {
        case SweepParameter::gate_workfunction_eV: return "gate_workfunction_eV";
        case SweepParameter::channel_doping_cm3: return "channel_doping_cm3";
        case SweepParameter::dielectric_thickness_nm: return "dielectric_thickness_nm";
        case SweepParameter::channel_length_nm: return "channel_length_nm";
        case SweepParameter::channel_width_nm: return "channel_width_nm";
        case SweepParameter::channel_height_nm: return "channel_height_nm";
    }
    return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& s) {
    for (SweepParameter p : {SweepParameter::gate_workfunction_eV,
                             SweepParameter::channel_doping_cm3,
                             SweepParameter::dielectric_thickness_nm,
                             SweepParameter::channel_length_nm,
                             SweepParameter::channel_width_nm,
                             SweepParameter::channel_height_nm})
        if (s == sweep_parameter_name(p)) return p;
    throw std::invalid_argument("unknown sweep parameter '" + s + "'");
}

// Junctionless devices are uniformly doped, so the doping axis moves channel
// and source/drain together. Geometry axes refresh the width factor when the
// device uses the default coverage-derived value.
inline void apply_sweep_parameter(DeviceSpec& d, SweepParameter p, double value) {
    switch (p) {
        case SweepParameter::gate_workfunction_eV:
            if (d.gate.kind != GateKind::metal)
                throw std::invalid_argument(
                    "gate_workfunction_eV axis needs a metal-gate base spec");
            d.gate.workfunction_eV = value;
            return;
        case SweepParameter::channel_doping_cm3:
            d.channel_doping_cm3 = value;
            d.sd_doping_cm3 = value;
            return;
        case SweepParameter::dielectric_thickness_nm:
            d.dielectric_thickness_nm = value;
            return;
        case SweepParameter::channel_length_nm:
            d.channel_length_nm = value;
            return;
        case SweepParameter::channel_width_nm:
        case SweepParameter::channel_height_nm: {
            const bool was_default =
                d.effective_width_factor ==
                default_width_factor(d.gate_coverage, d.channel_width_nm,
                                     d.channel_height_nm);
            (p == SweepParameter::channel_width_nm ? d.channel_width_nm
                                                   : d.channel_height_nm) = value;
            if (was_default)
                d.effective_width_factor = default_width_factor(
                    d.gate_coverage, d.channel_width_nm, d.channel_height_nm);
            return;
        }
    }
    throw std::invalid_argument("unhandled sweep parameter");
}

struct SweepAxis {
    SweepParameter parameter = SweepParameter::gate_workfunction_eV;
    std::vector<double> values;
};

struct SweepPlan {
    DeviceSpec base_spec = default_device();
    std::vector<SweepAxis> axes;
    BiasProtocol bias_protocol;
    MeshResolution resolution = MeshResolution::standard();
    int parallelism = 1;
    std::vector<double> capacitance_biases;   // forwarded to measure_device

    std::size_t cartesian_size() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.values.size();
        return n;
    }
};

inline std::vector<std::string> validate(const SweepPlan& plan) {
    std::vector<std::string> bad = validate(plan.base_spec);
    if (plan.axes.empty()) bad.push_back("sweep needs at least one axis");
    for (const auto& a : plan.axes)
        if (a.values.empty())
            bad.push_back(std::string("axis ") + sweep_parameter_name(a.parameter) +
                          " has no values");
    if (!plan.axes.empty() && plan.cartesian_size() > 10000)
        bad.push_back("cartesian sweep size exceeds the 10^4 guard");
    if (plan.parallelism < 1) bad.push_back("parallelism must be >= 1");
    return bad;
}

struct SweepRow {
    std::vector<double> values;   // one per axis, in axis order
    DeviceMetrics metrics;
    SolveDiagnostics diagnostics;
};

struct SweepFailure {
    std::vector<double> values;
    std::string error;
};

struct SweepResult {
    std::vector<SweepAxis> axes;
    std::vector<SweepRow> rows;
    std::vector<SweepFailure> failures;
};

namespace detail {

// Tuple for lexicographic task index k: first axis slowest, last axis fastest.
inline std::vector<double> tuple_at(const std::vector<SweepAxis>& axes, std::size_t k) {
    std::vector<double> t(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
        const std::size_t n = axes[a].values.size();
        t[a] = axes[a].values[k % n];
        k /= n;
    }
    return t;
}

}  // namespace detail

// Embarrassingly parallel map over the cartesian product. Every task writes
// only its own pre-allocated slot, so result contents and order are identical
// for any parallelism level. Per-point failures are recorded, never fatal.
inline SweepResult run_sweep(const SweepPlan& plan) {
    if (auto bad = validate(plan); !bad.empty())
        throw std::invalid_argument("invalid sweep plan: " + bad.front());

    const std::size_t total = plan.cartesian_size();
    struct Slot {
        bool ok = false;
        SweepRow row;
        SweepFailure failure;
    };
    std::vector<Slot> slots(total);

    MeasureOptions opt;
    opt.protocol = plan.bias_protocol;
    opt.resolution = plan.resolution;
    opt.capacitance_biases = plan.capacitance_biases;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < total;) {
            Slot& slot = slots[k];
            const std::vector<double> tup = detail::tuple_at(plan.axes, k);
            try {
                DeviceSpec d = plan.base_spec;
                for (std::size_t a = 0; a < plan.axes.size(); ++a)
                    apply_sweep_parameter(d, plan.axes[a].parameter, tup[a]);
                MeasureResult r = measure_device(d, opt);
                slot.ok = true;
                slot.row = {tup, std::move(r.metrics), r.diagnostics};
            } catch (const std::exception& e) {
                slot.ok = false;
                slot.failure = {tup, e.what()};
            }
        }
    };

    const int threads = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(plan.parallelism), total));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SweepResult result;
    result.axes = plan.axes;
    for (auto& slot : slots) {
        if (slot.ok) result.rows.push_back(std::move(slot.row));
        else result.failures.push_back(std::move(slot.failure));
    }
    return result;
}

enum class MetricField { V_th, SS, I_on, I_off, on_off_ratio, gm_max };

inline const char* metric_field_name(MetricField f) {
    switch (f) {
        case MetricField::V_th: return "V_th_V";
        case MetricField::SS: return "SS_mV_dec";
        case MetricField::I_on: return "I_on_A";
        case MetricField::I_off: return "I_off_A";
        case MetricField::on_off_ratio: return "on_off_ratio";
        case MetricField::gm_max: return "gm_max_S";
    }
    return "?";
}

inline double metric_value(const DeviceMetrics& m, MetricField f) {
    switch (f) {
        case MetricField::V_th: return m.V_th_V;
        case MetricField::SS: return m.SS_mV_dec;
        case MetricField::I_on: return m.I_on_A;
        case MetricField::I_off: return m.I_off_A;
        case MetricField::on_off_ratio: return m.on_off_ratio;
        case MetricField::gm_max: return m.gm_max_S;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct LinearTrend {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
};

// Ordinary least squares of a metric against one sweep axis; every other axis
// must be held at a single value.
inline LinearTrend fit_linear_trend(const SweepResult& result, SweepParameter x,
                                    MetricField y) {
    std::size_t xi = result.axes.size();
    for (std::size_t a = 0; a < result.axes.size(); ++a) {
        if (result.axes[a].parameter == x) xi = a;
        else if (result.axes[a].values.size() != 1)
            throw ExtractionError(
                std::string("trend fit needs all axes except ") + sweep_parameter_name(x) +
                " pinned to a single value");
    }
    if (xi == result.axes.size())
        throw ExtractionError(std::string("sweep has no ") + sweep_parameter_name(x) +
                              " axis");
    std::vector<double> xs, ys;
    for (const auto& row : result.rows) {
        const double v = metric_value(row.metrics, y);
        if (std::isfinite(v)) {
            xs.push_back(row.values[xi]);
            ys.push_back(v);
        }
    }
    if (xs.size() < 3)
        throw ExtractionError("trend fit needs at least 3 successful rows, have " +
                              std::to_string(xs.size()));
    const auto f = detail::ols(xs, ys);
    return {f.slope, f.intercept, f.r_squared};
}

}  // namespace jlfet
