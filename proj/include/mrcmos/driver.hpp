/// @file driver.hpp
/// @brief Offline-online iteration drivers: Reduced and Extended methods,
/// error metrics against a fine reference, and stopping logic.

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mrcmos/basis.hpp"
#include "mrcmos/decomp.hpp"
#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"
#include "mrcmos/mrcm.hpp"
#include "mrcmos/smooth.hpp"

namespace mrcmos {

enum class Method { Reduced, Extended };
enum class Metric { L2Pressure, L2Flux, LinfPressure, CoefficientChange };
enum class RunStatus { Converged, MaxIterations, SingularSystem, Diverged };

inline const char* to_string(Method m) {
    return m == Method::Reduced ? "reduced" : "extended";
}

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::L2Pressure: return "l2-pressure";
        case Metric::L2Flux: return "l2-flux";
        case Metric::LinfPressure: return "linf-pressure";
        case Metric::CoefficientChange: return "coefficient-change";
    }
    return "unknown";
}

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Converged: return "converged";
        case RunStatus::MaxIterations: return "max-iterations";
        case RunStatus::SingularSystem: return "singular-system";
        case RunStatus::Diverged: return "diverged";
    }
    return "unknown";
}

/// Full description of one experiment: the fine problem, the decomposition,
/// and the iteration knobs.
struct ProblemSpec {
    Grid grid;
    PermField perm;
    BoundarySpec physical_bc;
    SourceField source;
    int mx = 1;
    int my = 1;
    int oversampling = 2;
    double alpha = 10.0;
    int smoothing_steps = 4;
    int max_iterations = 100;
    double threshold = 1e-7;
    Metric metric = Metric::L2Flux;
    /// Informed data are extracted on the window boundary by default; the
    /// alternative extends interface traces outward instead.
    bool informed_on_window = true;

    void validate() const {
        if (!(threshold > 0.0)) {
            throw std::invalid_argument("ProblemSpec: threshold must be positive");
        }
        if (max_iterations < 0) {
            throw std::invalid_argument("ProblemSpec: negative iteration cap");
        }
        if (smoothing_steps < 0) {
            throw std::invalid_argument("ProblemSpec: negative smoothing steps");
        }
        const RobinSpec check(alpha);  // validates alpha
        (void)check;
    }
};

struct IterationRecord {
    int iteration = 0;
    double l2_pressure = std::numeric_limits<double>::quiet_NaN();
    double l2_flux = std::numeric_limits<double>::quiet_NaN();
    double linf_pressure = std::numeric_limits<double>::quiet_NaN();
    /// Relative change of the interface coefficient vector; infinite when no
    /// comparable previous vector exists (iteration 0, or a size change).
    double coefficient_change = std::numeric_limits<double>::infinity();
    int system_size = 0;
    double wall_ms = 0.0;
};

struct IterationReport {
    Method method = Method::Reduced;
    std::vector<IterationRecord> records;
    RunStatus status = RunStatus::MaxIterations;
    FlowField field;  // final smoothed field (empty if the offline solve failed)
};

/// Global fine-grid solve of the given problem.
inline FlowField reference_solution(const ProblemSpec& spec) {
    return solve(assemble(spec.grid, spec.perm, spec.physical_bc, spec.source));
}

/// Relative error of `field` against `reference` in the selected norm.
/// L2 norms are volume/area weighted; Linf is a plain max ratio.
inline double relative_error(const Grid& grid, const FlowField& field, const FlowField& reference,
                             Metric metric) {
    if (field.pressure.size() != reference.pressure.size() ||
        field.flux_x.size() != reference.flux_x.size() ||
        field.flux_y.size() != reference.flux_y.size()) {
        throw std::invalid_argument("relative_error: field sizes differ");
    }
    double num = 0.0;
    double den = 0.0;
    switch (metric) {
        case Metric::L2Pressure: {
            const double vol = grid.cell_volume();
            num = std::sqrt(vol * (field.pressure - reference.pressure).squaredNorm());
            den = std::sqrt(vol * reference.pressure.squaredNorm());
            break;
        }
        case Metric::L2Flux: {
            const double ax = grid.face_area(Axis::X);
            const double ay = grid.face_area(Axis::Y);
            num = std::sqrt(ax * (field.flux_x - reference.flux_x).squaredNorm() +
                            ay * (field.flux_y - reference.flux_y).squaredNorm());
            den = std::sqrt(ax * reference.flux_x.squaredNorm() +
                            ay * reference.flux_y.squaredNorm());
            break;
        }
        case Metric::LinfPressure: {
            num = (field.pressure - reference.pressure).cwiseAbs().maxCoeff();
            den = reference.pressure.cwiseAbs().maxCoeff();
            break;
        }
        case Metric::CoefficientChange:
            throw std::invalid_argument("relative_error: coefficient change is reference-free");
    }
    if (den == 0.0) {
        throw std::invalid_argument("relative_error: zero reference norm");
    }
    return num / den;
}

/// The record field selected by `metric`.
inline double metric_value(const IterationRecord& rec, Metric metric) {
    switch (metric) {
        case Metric::L2Pressure: return rec.l2_pressure;
        case Metric::L2Flux: return rec.l2_flux;
        case Metric::LinfPressure: return rec.linf_pressure;
        case Metric::CoefficientChange: return rec.coefficient_change;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct StopDecision {
    bool stop = false;
    RunStatus status = RunStatus::MaxIterations;
};

/// Stopping logic shared by both methods: divergence guard above 1e3,
/// threshold convergence, iteration cap. A non-finite error metric means the
/// field overflowed and counts as divergence; a non-finite coefficient change
/// is the expected no-previous-vector marker and never stops the run.
inline StopDecision stopping_check(const IterationRecord& last, const ProblemSpec& spec) {
    const double v = metric_value(last, spec.metric);
    if (std::isfinite(v)) {
        if (v > 1e3) {
            return {true, RunStatus::Diverged};
        }
        if (v < spec.threshold) {
            return {true, RunStatus::Converged};
        }
    } else if (spec.metric != Metric::CoefficientChange) {
        return {true, RunStatus::Diverged};
    }
    if (last.iteration >= spec.max_iterations) {
        return {true, RunStatus::MaxIterations};
    }
    return {false, RunStatus::MaxIterations};
}

namespace detail {

inline std::vector<WindowTrace> informed_data(const ProblemSpec& spec, const Decomposition& d,
                                              const RobinSpec& robin, const FlowField& field,
                                              int i) {
    if (spec.informed_on_window) {
        return informed_window_data(d, spec.perm, robin, field, i);
    }
    std::vector<WindowTrace> out;
    for (const TraceFunction& t : informed_lambdas(d, spec.perm, robin, field, i)) {
        out.push_back(extend_trace(d, t, i));
    }
    return out;
}

}  // namespace detail

inline IterationReport run_method(const ProblemSpec& spec, Method method) {
    using Clock = std::chrono::steady_clock;
    spec.validate();
    const Decomposition d = build_decomposition(spec.grid, spec.mx, spec.my, spec.oversampling);
    const RobinSpec robin(spec.alpha);
    const Smoother smoother(d, spec.perm, spec.physical_bc, spec.source);
    std::optional<FlowField> reference;
    if (spec.metric != Metric::CoefficientChange) {
        reference = reference_solution(spec);
    }

    IterationReport report;
    report.method = method;

    const int n = d.subdomain_count();
    std::vector<LocalSolver> solvers;
    solvers.reserve(static_cast<size_t>(n));
    std::vector<std::vector<MultiscaleBasis>> offline_sets;
    std::vector<MultiscaleBasis> particulars;
    try {
        for (int i = 0; i < n; ++i) {
            solvers.emplace_back(d, spec.perm, robin, spec.physical_bc, i);
            offline_sets.push_back(build_basis_set(d, spec.perm, robin, solvers.back(), i,
                                                   offline_window_data(d, i), BasisKind::Offline));
            particulars.push_back(
                build_particular(d, spec.perm, robin, solvers.back(), i, spec.source));
        }
    } catch (const SingularSystemError&) {
        report.status = RunStatus::SingularSystem;
        return report;
    }

    Eigen::VectorXd prev_coeffs;
    FlowField field;
    const auto run_stage =
        [&](int iteration, const CoarseSpace& coarse,
            const std::vector<std::vector<MultiscaleBasis>>& sets) -> std::optional<StopDecision> {
        const auto t0 = Clock::now();
        const InterfaceSystem sys = assemble_interface(d, spec.perm, robin, coarse, sets, particulars);
        Eigen::VectorXd coeffs = solve_interface(sys);
        const Reconstruction rec = reconstruct(d, sets, particulars, coeffs);
        field = smoother.apply(rec.field, spec.smoothing_steps);
        IterationRecord r;
        r.iteration = iteration;
        r.system_size = static_cast<int>(sys.columns());
        if (reference) {
            r.l2_pressure = relative_error(spec.grid, field, *reference, Metric::L2Pressure);
            r.l2_flux = relative_error(spec.grid, field, *reference, Metric::L2Flux);
            r.linf_pressure = relative_error(spec.grid, field, *reference, Metric::LinfPressure);
        }
        if (coeffs.size() == prev_coeffs.size() && coeffs.size() > 0) {
            const double scale = std::max(coeffs.norm(), 1e-300);
            r.coefficient_change = (coeffs - prev_coeffs).norm() / scale;
        }
        prev_coeffs = std::move(coeffs);
        r.wall_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        report.records.push_back(r);
        const StopDecision dec = stopping_check(r, spec);
        if (dec.stop) {
            report.status = dec.status;
            return dec;
        }
        return std::nullopt;
    };

    // Offline stage (iteration 0): offline data, P0 coupling. A singular or
    // numerically failed stage ends the run with the singular-system status.
    try {
        if (run_stage(0, CoarseSpace{CoarseDegree::Constant}, offline_sets)) {
            report.field = std::move(field);
            return report;
        }
    } catch (const SingularSystemError&) {
        report.status = RunStatus::SingularSystem;
        report.field = std::move(field);
        return report;
    }

    for (int it = 1; it <= spec.max_iterations; ++it) {
        try {
            std::vector<std::vector<MultiscaleBasis>> sets;
            sets.reserve(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) {
                auto informed =
                    build_basis_set(d, spec.perm, robin, solvers[static_cast<size_t>(i)], i,
                                    detail::informed_data(spec, d, robin, field, i),
                                    BasisKind::Informed);
                if (method == Method::Reduced) {
                    sets.push_back(std::move(informed));
                } else {
                    auto augmented = offline_sets[static_cast<size_t>(i)];
                    for (auto& b : informed) {
                        augmented.push_back(std::move(b));
                    }
                    sets.push_back(std::move(augmented));
                }
            }
            const CoarseSpace coarse{method == Method::Reduced ? CoarseDegree::Constant
                                                               : CoarseDegree::Linear};
            if (run_stage(it, coarse, sets)) {
                break;
            }
        } catch (const SingularSystemError&) {
            report.status = RunStatus::SingularSystem;
            break;
        }
    }
    report.field = std::move(field);
    return report;
}

inline IterationReport run_reduced(const ProblemSpec& spec) {
    return run_method(spec, Method::Reduced);
}

inline IterationReport run_extended(const ProblemSpec& spec) {
    return run_method(spec, Method::Extended);
}

}  // namespace mrcmos
