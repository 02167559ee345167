#pragma once

/// @file basis.hpp
/// @brief Multiscale basis functions: oversampled local Robin solves per
/// subdomain, driven by piecewise-constant (offline) or informed (online)
/// interface data, plus the particular solution carrying the source and
/// physical boundary data.
///
/// Each local problem is posed on the oversampled window OmegaHat_i with
/// Robin conditions -beta u.n + p = lambda on the non-physical boundary
/// (beta_e = alpha h_n / K_e, K_e the harmonic mean across the edge) and the
/// physical conditions on the part shared with the domain boundary
/// (homogeneous for basis solves, actual data for the particular solve).
/// The solution is restricted to Omega_i; its interface traces and the
/// recomputed multiplier trace phi = -beta u.n + pi on Gamma_i feed the
/// interface coupling system. Robin data for a window are stored per window
/// side; one datum per coarse face of Gamma_i (a side of Omega_i borders
/// exactly one neighbour), so offline data are side indicators and informed
/// data are per-side masks of a previous iterate's Robin trace.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mrcmos/decomp.hpp"
#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"

namespace mrcmos {

/// Dimensionless Robin weight alpha; beta values derive from it per edge.
struct RobinSpec {
    double alpha = 10.0;

    explicit RobinSpec(double a = 10.0) : alpha(a) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            throw std::invalid_argument("RobinSpec: alpha must be positive and finite");
        }
    }
};

/// Robin resistance of a fine edge interior to the global grid:
/// beta_e = alpha h_n / K_e with K_e the harmonic mean of the two adjacent
/// cell permeabilities.
inline double edge_beta(const Grid& grid, const PermField& perm, const RobinSpec& robin,
                        FaceId f) {
    if (grid.is_boundary(f)) {
        throw std::invalid_argument("edge_beta: physical boundary edges carry no Robin weight");
    }
    const auto cells = grid.face_cells(f);
    const double ka = perm.at(cells[0]);
    const double kb = perm.at(cells[1]);
    return robin.alpha * grid.normal_spacing(f.axis) * (ka + kb) / (2.0 * ka * kb);
}

/// Per-edge beta over Gamma_i, in Gamma_i order.
inline Eigen::VectorXd interface_betas(const Decomposition& decomp, const PermField& perm,
                                       const RobinSpec& robin, int i) {
    const auto& edges = decomp.subdomain(i).edges;
    Eigen::VectorXd betas(static_cast<Eigen::Index>(edges.size()));
    for (size_t k = 0; k < edges.size(); ++k) {
        betas[static_cast<Eigen::Index>(k)] = edge_beta(decomp.grid(), perm, robin, edges[k].face);
    }
    return betas;
}

/// Robin datum on the non-physical boundary of OmegaHat_i, stored per window
/// side (West/East run over the window's rows, South/North over its
/// columns). Sides lying on the domain boundary are empty.
struct WindowTrace {
    int subdomain = 0;
    std::array<Eigen::VectorXd, 4> side;
};

namespace detail {

inline bool window_side_physical(const Decomposition& decomp, const CellWindow& w, Side s) {
    switch (s) {
        case Side::West: return w.i0 == 0;
        case Side::East: return w.i0 + w.nx == decomp.grid().nx();
        case Side::South: return w.j0 == 0;
        case Side::North: return w.j0 + w.ny == decomp.grid().ny();
    }
    return false;
}

inline int window_side_length(const CellWindow& w, Side s) {
    return s == Side::West || s == Side::East ? w.ny : w.nx;
}

/// Faces of one window side in ascending order, as global FaceIds.
inline FaceId window_side_face(const CellWindow& w, Side s, int t) {
    switch (s) {
        case Side::West: return {Axis::X, w.i0, w.j0 + t};
        case Side::East: return {Axis::X, w.i0 + w.nx, w.j0 + t};
        case Side::South: return {Axis::Y, w.i0 + t, w.j0};
        case Side::North: return {Axis::Y, w.i0 + t, w.j0 + w.ny};
    }
    return {};
}

/// Window-inside cell adjacent to a window side face.
inline CellId window_side_cell(const CellWindow& w, Side s, int t) {
    switch (s) {
        case Side::West: return {w.i0, w.j0 + t};
        case Side::East: return {w.i0 + w.nx - 1, w.j0 + t};
        case Side::South: return {w.i0 + t, w.j0};
        case Side::North: return {w.i0 + t, w.j0 + w.ny - 1};
    }
    return {};
}

inline double side_outward_sign(Side s) {
    return s == Side::West || s == Side::South ? -1.0 : 1.0;
}

}  // namespace detail

/// Zero Robin datum sized for subdomain i's window.
inline WindowTrace zero_window_trace(const Decomposition& decomp, int i) {
    const CellWindow& w = decomp.subdomain(i).window;
    WindowTrace wt{i, {}};
    for (const Side s : kSides) {
        if (!detail::window_side_physical(decomp, w, s)) {
            wt.side[static_cast<int>(s)] =
                Eigen::VectorXd::Zero(detail::window_side_length(w, s));
        }
    }
    return wt;
}

/// Piecewise-constant offline data: one indicator per coarse face of
/// Gamma_i, in Gamma_i side order.
inline std::vector<TraceFunction> offline_lambdas(const Decomposition& decomp, int i) {
    const Subdomain& s = decomp.subdomain(i);
    std::vector<TraceFunction> out;
    for (const Side side : kSides) {
        const auto [b, e] = s.side_range[static_cast<int>(side)];
        if (e == b) continue;
        TraceFunction t{i, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.edges.size()))};
        t.values.segment(b, e - b).setOnes();
        out.push_back(std::move(t));
    }
    return out;
}

/// Extends a Gamma_i trace to the window boundary: each window side face
/// takes the value of the nearest Gamma_i edge along the same side (constant
/// extension outward). At l = 0 this is the identity. Throws if a Gamma_i
/// side's window side was clipped onto the domain boundary (oversampling
/// wider than the subdomain), since the datum would have no carrier.
inline WindowTrace extend_trace(const Decomposition& decomp, const TraceFunction& trace, int i) {
    const Subdomain& s = decomp.subdomain(i);
    if (trace.values.size() != static_cast<Eigen::Index>(s.edges.size())) {
        throw std::invalid_argument("extend_trace: trace length mismatch");
    }
    WindowTrace wt = zero_window_trace(decomp, i);
    for (const Side side : kSides) {
        const int sd = static_cast<int>(side);
        const auto [b, e] = s.side_range[sd];
        if (e == b) continue;
        if (detail::window_side_physical(decomp, s.window, side)) {
            throw std::invalid_argument(
                "extend_trace: oversampling clips an interface side onto the domain boundary");
        }
        const bool vertical = side == Side::West || side == Side::East;
        const int cells_start = vertical ? s.cells.j0 : s.cells.i0;
        const int cells_len = vertical ? s.cells.ny : s.cells.nx;
        const int win_start = vertical ? s.window.j0 : s.window.i0;
        Eigen::VectorXd& vals = wt.side[sd];
        for (int t = 0; t < vals.size(); ++t) {
            const int coord = std::clamp(win_start + t, cells_start, cells_start + cells_len - 1);
            vals[t] = trace.values[b + (coord - cells_start)];
        }
    }
    return wt;
}

/// Offline data extended to the window boundary: per-side indicators.
inline std::vector<WindowTrace> offline_window_data(const Decomposition& decomp, int i) {
    std::vector<WindowTrace> out;
    for (const TraceFunction& t : offline_lambdas(decomp, i)) {
        out.push_back(extend_trace(decomp, t, i));
    }
    return out;
}

/// Robin trace of a global field on the non-physical window boundary:
/// r = p_c - q_out (d / K_c + beta_e), the unique datum under which the
/// window solve reproduces the field (TPFA elimination identity; equals
/// -beta q_out + pi with the one-sided interface pressure).
inline WindowTrace window_robin_trace(const Decomposition& decomp, const PermField& perm,
                                      const RobinSpec& robin, const FlowField& field, int i) {
    const Grid& g = decomp.grid();
    if (field.pressure.size() != g.cell_count()) {
        throw std::invalid_argument("window_robin_trace: field does not cover the grid");
    }
    const CellWindow& w = decomp.subdomain(i).window;
    WindowTrace wt = zero_window_trace(decomp, i);
    for (const Side s : kSides) {
        Eigen::VectorXd& vals = wt.side[static_cast<int>(s)];
        for (int t = 0; t < vals.size(); ++t) {
            const FaceId f = detail::window_side_face(w, s, t);
            const CellId c = detail::window_side_cell(w, s, t);
            const double q_out = detail::side_outward_sign(s) * field.flux(g, f);
            const double d = 0.5 * g.normal_spacing(f.axis);
            const double beta = edge_beta(g, perm, robin, f);
            vals[t] = field.pressure[g.cell_index(c)] - q_out * (d / perm.at(c) + beta);
        }
    }
    return wt;
}

/// Informed data for the next iteration: the window Robin trace of `field`
/// masked per window side, one datum per coarse face of Gamma_i in Gamma_i
/// side order. Throws under the same clipping condition as extend_trace.
inline std::vector<WindowTrace> informed_window_data(const Decomposition& decomp,
                                                     const PermField& perm,
                                                     const RobinSpec& robin,
                                                     const FlowField& field, int i) {
    const Subdomain& s = decomp.subdomain(i);
    const WindowTrace full = window_robin_trace(decomp, perm, robin, field, i);
    std::vector<WindowTrace> out;
    for (const Side side : kSides) {
        const int sd = static_cast<int>(side);
        const auto [b, e] = s.side_range[sd];
        if (e == b) continue;
        if (detail::window_side_physical(decomp, s.window, side)) {
            throw std::invalid_argument(
                "informed_window_data: oversampling clips an interface side onto the domain "
                "boundary");
        }
        WindowTrace mask = zero_window_trace(decomp, i);
        mask.side[sd] = full.side[sd];
        out.push_back(std::move(mask));
    }
    return out;
}

/// Informed data expressed on Gamma_i itself: the Robin trace
/// r = -beta q_out + pi of the field's interface traces, masked per coarse
/// face. Coincides with the window construction at l = 0.
inline std::vector<TraceFunction> informed_lambdas(const Decomposition& decomp,
                                                   const PermField& perm, const RobinSpec& robin,
                                                   const FlowField& field, int i) {
    const auto [flux, pressure] = restrict_trace(decomp, perm, field, i);
    const Eigen::VectorXd betas = interface_betas(decomp, perm, robin, i);
    TraceFunction r{i, pressure.values - betas.cwiseProduct(flux.values)};
    std::vector<TraceFunction> out;
    for (const int f : decomp.coarse_faces_of(i)) {
        out.push_back(mask_to_coarse_face(decomp, r, f));
    }
    return out;
}

/// Same-type boundary conditions with zero data (basis solves keep the
/// physical condition types but homogeneous values).
inline BoundarySpec homogenized(const BoundarySpec& bc, const Grid& grid) {
    BoundarySpec out(grid);
    for (const Side s : kSides) {
        for (int k = 0; k < bc.side_size(s); ++k) {
            FaceBC f = bc.side(s)[static_cast<size_t>(k)];
            f.value = 0.0;
            out.side(s)[static_cast<size_t>(k)] = f;
        }
    }
    return out;
}

/// Oversampled local problem of one subdomain with a cached factorization.
/// The matrix structure (window permeability, Robin betas, physical
/// condition types) is independent of the Robin datum, the source, and the
/// physical data values, so one factorization serves the whole basis family,
/// the particular solve, and every online iteration.
class LocalSolver {
public:
    LocalSolver(const Decomposition& decomp, const PermField& perm, const RobinSpec& robin,
                const BoundarySpec& physical_bc, int i)
        : subdomain_(i),
          window_(decomp.subdomain(i).window),
          wgrid_(window_.local_grid(decomp.grid())),
          wperm_(perm.window(window_, decomp.grid())),
          template_bc_(wgrid_),
          solver_(nullptr) {
        const Grid& g = decomp.grid();
        for (const Side s : kSides) {
            const int sd = static_cast<int>(s);
            physical_side_[sd] = detail::window_side_physical(decomp, window_, s);
            const int len = detail::window_side_length(window_, s);
            for (int t = 0; t < len; ++t) {
                const FaceId f = detail::window_side_face(window_, s, t);
                template_bc_.side(s)[static_cast<size_t>(t)] =
                    physical_side_[sd] ? physical_bc.at(f)
                                       : FaceBC::robin(edge_beta(g, perm, robin, f), 0.0);
            }
        }
        solver_ = std::make_unique<WindowSolver>(wgrid_, wperm_, template_bc_);
    }

    int subdomain() const { return subdomain_; }
    const CellWindow& window() const { return window_; }
    const Grid& window_grid() const { return wgrid_; }
    const PermField& window_perm() const { return wperm_; }

    SourceField zero_source() const { return SourceField(wgrid_); }
    SourceField window_source(const SourceField& global, const Grid& parent) const {
        return global.window(window_, parent);
    }

    /// Basis-mode solve: Robin datum `lambda`, zero source, homogeneous
    /// physical conditions.
    FlowField solve_basis(const WindowTrace& lambda) const {
        return solve(lambda, zero_source(), true);
    }

    /// General window solve. `homogeneous_physical` zeroes the physical data
    /// values; the particular solve passes false with the actual source.
    FlowField solve(const WindowTrace& lambda, const SourceField& window_f,
                    bool homogeneous_physical) const {
        BoundarySpec bc = template_bc_;
        for (const Side s : kSides) {
            const int sd = static_cast<int>(s);
            auto& faces = bc.side(s);
            if (physical_side_[sd]) {
                if (homogeneous_physical) {
                    for (auto& f : faces) f.value = 0.0;
                }
                continue;
            }
            const Eigen::VectorXd& vals = lambda.side[sd];
            if (vals.size() != static_cast<Eigen::Index>(faces.size())) {
                throw std::invalid_argument("LocalSolver: Robin datum has wrong side length");
            }
            for (size_t t = 0; t < faces.size(); ++t) {
                faces[t].value = vals[static_cast<Eigen::Index>(t)];
            }
        }
        return solver_->solve(bc, window_f);
    }

private:
    int subdomain_;
    CellWindow window_;
    Grid wgrid_;
    PermField wperm_;
    BoundarySpec template_bc_;
    std::array<bool, 4> physical_side_{};
    std::unique_ptr<WindowSolver> solver_;
};

/// One local solve per spec'd signature: Gamma_i datum extended to the
/// window, caller-chosen source and physical data. Basis solves pass a zero
/// source and homogenized(physical_bc); the particular solve passes a zero
/// trace with the actual data.
inline FlowField solve_local(const Decomposition& decomp, const PermField& perm,
                             const RobinSpec& robin, int i, const TraceFunction& lambda,
                             const SourceField& f, const BoundarySpec& physical_bc) {
    const LocalSolver solver(decomp, perm, robin, physical_bc, i);
    return solver.solve(extend_trace(decomp, lambda, i),
                        solver.window_source(f, decomp.grid()), false);
}

enum class BasisKind { Offline, Informed, Particular };

/// One multiscale basis element: the local solution restricted to Omega_i
/// plus its interface traces. `phi` is the multiplier basis function
/// -beta flux + pressure on Gamma_i; `lambda` records the generating datum
/// over Gamma_i positions (zero for the particular solution).
struct MultiscaleBasis {
    int subdomain = 0;
    BasisKind kind = BasisKind::Offline;
    int index = 0;
    FlowField interior;
    TraceFunction flux_trace;
    TraceFunction pressure_trace;
    TraceFunction phi;
    TraceFunction lambda;
};

namespace detail {

/// Restriction of a window field to Omega_i's own grid, boundary faces
/// included (skeleton faces keep the window's one-sided values).
inline FlowField restrict_field(const Grid& parent, const CellWindow& window,
                                const CellWindow& cells, const FlowField& wf) {
    const Grid wgrid = window.local_grid(parent);
    const Grid sgrid = cells.local_grid(parent);
    FlowField out;
    out.pressure.resize(sgrid.cell_count());
    out.flux_x.resize(sgrid.face_count(Axis::X));
    out.flux_y.resize(sgrid.face_count(Axis::Y));
    for (int c = 0; c < sgrid.cell_count(); ++c) {
        const CellId local = sgrid.cell_at(c);
        const CellId wlocal = window.to_local(cells.to_global(local));
        out.pressure[c] = wf.pressure[wgrid.cell_index(wlocal)];
    }
    for (const Axis axis : {Axis::X, Axis::Y}) {
        for (int k = 0; k < sgrid.face_count(axis); ++k) {
            const FaceId local = sgrid.face_at(axis, k);
            const FaceId wlocal = window.to_local(cells.to_global(local));
            out.flux(sgrid, local) = wf.flux(wgrid, wlocal);
        }
    }
    return out;
}

/// Gamma_i datum implied by a per-side window datum: each edge takes the
/// window value directly across from it. Identity at l = 0.
inline TraceFunction window_datum_on_interface(const Decomposition& decomp,
                                               const WindowTrace& wt, int i) {
    const Subdomain& s = decomp.subdomain(i);
    TraceFunction out{i, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.edges.size()))};
    for (size_t k = 0; k < s.edges.size(); ++k) {
        const InterfaceEdge& e = s.edges[k];
        const Eigen::VectorXd& vals = wt.side[static_cast<int>(e.side)];
        if (vals.size() == 0) continue;
        const bool vertical = e.side == Side::West || e.side == Side::East;
        const int win_start = vertical ? s.window.j0 : s.window.i0;
        const int coord = vertical ? e.face.j : e.face.i;
        out.values[static_cast<Eigen::Index>(k)] = vals[coord - win_start];
    }
    return out;
}

inline MultiscaleBasis make_basis(const Decomposition& decomp, const PermField& perm,
                                  const RobinSpec& robin, const LocalSolver& solver, int i,
                                  const FlowField& window_field, BasisKind kind, int index,
                                  TraceFunction lambda) {
    const Subdomain& s = decomp.subdomain(i);
    MultiscaleBasis b;
    b.subdomain = i;
    b.kind = kind;
    b.index = index;
    b.interior =
        detail::restrict_field(decomp.grid(), solver.window(), s.cells, window_field);
    auto [flux, pressure] =
        restrict_trace(decomp, solver.window_perm(), window_field, i, solver.window());
    const Eigen::VectorXd betas = interface_betas(decomp, perm, robin, i);
    b.phi = TraceFunction{i, pressure.values - betas.cwiseProduct(flux.values)};
    b.flux_trace = std::move(flux);
    b.pressure_trace = std::move(pressure);
    b.lambda = std::move(lambda);
    return b;
}

}  // namespace detail

/// Solves one basis family against a shared LocalSolver. Elements are
/// indexed in the order of `lambdas` (Gamma_i side order for offline and
/// informed families).
inline std::vector<MultiscaleBasis> build_basis_set(const Decomposition& decomp,
                                                    const PermField& perm, const RobinSpec& robin,
                                                    const LocalSolver& solver, int i,
                                                    const std::vector<WindowTrace>& lambdas,
                                                    BasisKind kind) {
    if (kind == BasisKind::Particular) {
        throw std::invalid_argument("build_basis_set: use build_particular for the source part");
    }
    std::vector<MultiscaleBasis> out;
    out.reserve(lambdas.size());
    for (size_t k = 0; k < lambdas.size(); ++k) {
        const FlowField wf = solver.solve_basis(lambdas[k]);
        out.push_back(detail::make_basis(
            decomp, perm, robin, solver, i, wf, kind, static_cast<int>(k),
            detail::window_datum_on_interface(decomp, lambdas[k], i)));
    }
    return out;
}

/// Gamma_i-trace overload; constructs its own solver.
inline std::vector<MultiscaleBasis> build_basis_set(const Decomposition& decomp,
                                                    const PermField& perm, const RobinSpec& robin,
                                                    const BoundarySpec& physical_bc, int i,
                                                    const std::vector<TraceFunction>& lambdas,
                                                    BasisKind kind) {
    const LocalSolver solver(decomp, perm, robin, physical_bc, i);
    std::vector<WindowTrace> extended;
    extended.reserve(lambdas.size());
    for (const TraceFunction& t : lambdas) extended.push_back(extend_trace(decomp, t, i));
    return build_basis_set(decomp, perm, robin, solver, i, extended, kind);
}

/// Particular solution: zero Robin datum, actual source and physical data.
inline MultiscaleBasis build_particular(const Decomposition& decomp, const PermField& perm,
                                        const RobinSpec& robin, const LocalSolver& solver, int i,
                                        const SourceField& f) {
    const FlowField wf = solver.solve(zero_window_trace(decomp, i),
                                      solver.window_source(f, decomp.grid()), false);
    const auto n = static_cast<Eigen::Index>(decomp.subdomain(i).edges.size());
    return detail::make_basis(decomp, perm, robin, solver, i, wf, BasisKind::Particular, 0,
                              TraceFunction{i, Eigen::VectorXd::Zero(n)});
}

}  // namespace mrcmos
