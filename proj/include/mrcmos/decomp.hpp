#pragma once

/// @file decomp.hpp
/// @brief Non-overlapping partition of the fine grid into mx x my rectangular
/// subdomains Omega_i, their oversampled windows OmegaHat_i (expanded by l
/// fine-cell layers, clipped at the domain boundary), the interface skeleton
/// split into coarse faces Gamma_ij, and trace extraction.
///
/// Orderings are deterministic throughout: subdomains and coarse faces are
/// row-major (vertical coarse faces first, then horizontal), and each
/// per-subdomain interface Gamma_i lists its fine edges side by side in
/// West, East, South, North order, ascending along each side. Orientation
/// signs are the subdomain-outward normal dotted with the global face
/// normal.

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"

namespace mrcmos {

/// One fine edge of Gamma_i: global face, outward-orientation sign, owning
/// coarse face, side of Omega_i it lies on, and 0-based position along the
/// coarse face.
struct InterfaceEdge {
    FaceId face;
    double sign = 1.0;
    int coarse_face = -1;
    Side side = Side::West;
    int along = 0;
};

struct Subdomain {
    CellWindow cells;   // Omega_i
    CellWindow window;  // OmegaHat_i
    std::vector<InterfaceEdge> edges;  // Gamma_i
    std::array<std::pair<int, int>, 4> side_range{};  // [begin, end) into edges, per Side
};

/// Interface between two adjacent subdomains: a full shared side of fine
/// edges. `sub_lo` has the lower subdomain index (west or south owner).
struct CoarseFace {
    Axis axis = Axis::X;
    int sub_lo = 0;
    int sub_hi = 0;
    int edge_count = 0;
    std::vector<FaceId> edges;
};

/// Scalar function on Gamma_i, one value per fine edge in Gamma_i order.
struct TraceFunction {
    int subdomain = 0;
    Eigen::VectorXd values;
};

class Decomposition {
public:
    Decomposition(Grid grid, int mx, int my, int l)
        : grid_(std::move(grid)), mx_(mx), my_(my), l_(l) {
        if (mx < 1 || my < 1 || l < 0) {
            throw std::invalid_argument("Decomposition: mx, my >= 1 and l >= 0 required");
        }
        if (grid_.nx() % mx != 0 || grid_.ny() % my != 0) {
            throw std::invalid_argument("Decomposition: subdomain counts must divide cell counts");
        }
        build();
    }

    const Grid& grid() const { return grid_; }
    int mx() const { return mx_; }
    int my() const { return my_; }
    int oversampling() const { return l_; }
    int subdomain_count() const { return mx_ * my_; }
    int coarse_face_count() const { return static_cast<int>(faces_.size()); }

    const Subdomain& subdomain(int i) const { return subs_[check_sub(i)]; }
    const CoarseFace& coarse_face(int f) const { return faces_[static_cast<size_t>(f)]; }
    const std::vector<Subdomain>& subdomains() const { return subs_; }
    const std::vector<CoarseFace>& coarse_faces() const { return faces_; }

    /// Coarse faces touching subdomain i, in Gamma_i side order (W, E, S, N).
    std::vector<int> coarse_faces_of(int i) const {
        const Subdomain& s = subs_[check_sub(i)];
        std::vector<int> out;
        for (const Side side : kSides) {
            const auto [b, e] = s.side_range[static_cast<int>(side)];
            if (e > b) out.push_back(s.edges[static_cast<size_t>(b)].coarse_face);
        }
        return out;
    }

private:
    size_t check_sub(int i) const {
        if (i < 0 || i >= subdomain_count()) {
            throw std::invalid_argument("Decomposition: subdomain index out of range");
        }
        return static_cast<size_t>(i);
    }

    void build() {
        const int snx = grid_.nx() / mx_;
        const int sny = grid_.ny() / my_;
        const int nv = (mx_ - 1) * my_;  // vertical coarse faces precede horizontal

        for (int sj = 0; sj < my_; ++sj) {
            for (int si = 0; si < mx_ - 1; ++si) {
                CoarseFace f{Axis::X, sj * mx_ + si, sj * mx_ + si + 1, sny, {}};
                for (int j = sj * sny; j < (sj + 1) * sny; ++j) {
                    f.edges.push_back({Axis::X, (si + 1) * snx, j});
                }
                faces_.push_back(std::move(f));
            }
        }
        for (int sj = 0; sj < my_ - 1; ++sj) {
            for (int si = 0; si < mx_; ++si) {
                CoarseFace f{Axis::Y, sj * mx_ + si, (sj + 1) * mx_ + si, snx, {}};
                for (int i = si * snx; i < (si + 1) * snx; ++i) {
                    f.edges.push_back({Axis::Y, i, (sj + 1) * sny});
                }
                faces_.push_back(std::move(f));
            }
        }

        for (int sj = 0; sj < my_; ++sj) {
            for (int si = 0; si < mx_; ++si) {
                Subdomain s;
                s.cells = CellWindow{si * snx, sj * sny, snx, sny};
                s.window = s.cells.expanded(l_, grid_);
                // West/East vertical neighbours, then South/North horizontal.
                const int west = si > 0 ? sj * (mx_ - 1) + si - 1 : -1;
                const int east = si < mx_ - 1 ? sj * (mx_ - 1) + si : -1;
                const int south = sj > 0 ? nv + (sj - 1) * mx_ + si : -1;
                const int north = sj < my_ - 1 ? nv + sj * mx_ + si : -1;
                const std::array<int, 4> face_of_side = {west, east, south, north};
                const std::array<double, 4> sign_of_side = {-1.0, 1.0, -1.0, 1.0};
                for (const Side side : kSides) {
                    const int sd = static_cast<int>(side);
                    const int begin = static_cast<int>(s.edges.size());
                    if (face_of_side[sd] >= 0) {
                        const CoarseFace& cf = faces_[static_cast<size_t>(face_of_side[sd])];
                        for (int a = 0; a < cf.edge_count; ++a) {
                            s.edges.push_back(
                                {cf.edges[static_cast<size_t>(a)], sign_of_side[sd],
                                 face_of_side[sd], side, a});
                        }
                    }
                    s.side_range[sd] = {begin, static_cast<int>(s.edges.size())};
                }
                subs_.push_back(std::move(s));
            }
        }
    }

    Grid grid_;
    int mx_, my_, l_;
    std::vector<Subdomain> subs_;
    std::vector<CoarseFace> faces_;
};

inline Decomposition build_decomposition(const Grid& grid, int mx, int my, int l) {
    return Decomposition(grid, mx, my, l);
}

namespace detail {

/// TPFA interface pressure of an interior face: the value at which the
/// two-point half-cell fluxes balance. Equal half-widths reduce the weights
/// to the permeabilities themselves.
inline double interface_pressure(const Grid& grid, const PermField& perm,
                                 const Eigen::VectorXd& pressure, FaceId f) {
    const auto cells = grid.face_cells(f);
    const double kl = perm.at(cells[0]);
    const double kr = perm.at(cells[1]);
    return (kl * pressure[grid.cell_index(cells[0])] + kr * pressure[grid.cell_index(cells[1])]) /
           (kl + kr);
}

/// One-sided interface pressure recovered from the adjacent cell and the
/// outward flux: pi = p_c - q_out d / K_c. Coincides with the two-sided
/// value whenever both cells exist.
inline double one_sided_interface_pressure(const Grid& grid, const PermField& perm,
                                           const Eigen::VectorXd& pressure, CellId c,
                                           double q_out, Axis axis) {
    const double d = 0.5 * grid.normal_spacing(axis);
    return pressure[grid.cell_index(c)] - q_out * d / perm.at(c);
}

}  // namespace detail

/// Flux and pressure traces of a global field on Gamma_i. The flux trace
/// carries the subdomain-outward sign; the pressure trace is the TPFA
/// interface pressure.
inline std::pair<TraceFunction, TraceFunction> restrict_trace(const Decomposition& decomp,
                                                              const PermField& perm,
                                                              const FlowField& field, int i) {
    const Subdomain& s = decomp.subdomain(i);
    const Grid& g = decomp.grid();
    if (field.pressure.size() != g.cell_count()) {
        throw std::invalid_argument("restrict_trace: field does not cover the grid");
    }
    TraceFunction flux{i, Eigen::VectorXd(static_cast<Eigen::Index>(s.edges.size()))};
    TraceFunction pressure{i, Eigen::VectorXd(static_cast<Eigen::Index>(s.edges.size()))};
    for (size_t k = 0; k < s.edges.size(); ++k) {
        const InterfaceEdge& e = s.edges[k];
        flux.values[static_cast<Eigen::Index>(k)] = e.sign * field.flux(g, e.face);
        pressure.values[static_cast<Eigen::Index>(k)] =
            detail::interface_pressure(g, perm, field.pressure, e.face);
    }
    return {std::move(flux), std::move(pressure)};
}

/// Trace restriction for a field living on a window (a local solve on
/// OmegaHat_i). Interface edges interior to the window use the two-sided
/// interface pressure; edges on the window boundary (l = 0) fall back to
/// the one-sided recovery.
inline std::pair<TraceFunction, TraceFunction> restrict_trace(
    const Decomposition& decomp, const PermField& window_perm, const FlowField& field, int i,
    const CellWindow& window) {
    const Subdomain& s = decomp.subdomain(i);
    if (!window.contains(s.cells)) {
        throw std::invalid_argument("restrict_trace: window does not cover the subdomain");
    }
    const Grid local = window.local_grid(decomp.grid());
    if (field.pressure.size() != local.cell_count()) {
        throw std::invalid_argument("restrict_trace: field does not match the window");
    }
    TraceFunction flux{i, Eigen::VectorXd(static_cast<Eigen::Index>(s.edges.size()))};
    TraceFunction pressure{i, Eigen::VectorXd(static_cast<Eigen::Index>(s.edges.size()))};
    for (size_t k = 0; k < s.edges.size(); ++k) {
        const InterfaceEdge& e = s.edges[k];
        const FaceId lf = window.to_local(e.face);
        if (!local.face_in_range(lf)) {
            throw std::invalid_argument("restrict_trace: window does not cover Gamma_i");
        }
        const double q = field.flux(local, lf);
        flux.values[static_cast<Eigen::Index>(k)] = e.sign * q;
        if (local.is_boundary(lf)) {
            const CellId c = local.boundary_cell(lf);
            pressure.values[static_cast<Eigen::Index>(k)] = detail::one_sided_interface_pressure(
                local, window_perm, field.pressure, c, e.sign * q, lf.axis);
        } else {
            pressure.values[static_cast<Eigen::Index>(k)] =
                detail::interface_pressure(local, window_perm, field.pressure, lf);
        }
    }
    return {std::move(flux), std::move(pressure)};
}

/// Copies the trace values on one coarse face's edges and zeroes the rest.
inline TraceFunction mask_to_coarse_face(const Decomposition& decomp, const TraceFunction& trace,
                                         int coarse_face) {
    const Subdomain& s = decomp.subdomain(trace.subdomain);
    if (trace.values.size() != static_cast<Eigen::Index>(s.edges.size())) {
        throw std::invalid_argument("mask_to_coarse_face: trace length mismatch");
    }
    bool touched = false;
    TraceFunction out{trace.subdomain, Eigen::VectorXd::Zero(trace.values.size())};
    for (size_t k = 0; k < s.edges.size(); ++k) {
        if (s.edges[k].coarse_face == coarse_face) {
            out.values[static_cast<Eigen::Index>(k)] = trace.values[static_cast<Eigen::Index>(k)];
            touched = true;
        }
    }
    if (!touched) {
        throw std::invalid_argument("mask_to_coarse_face: coarse face does not touch Gamma_i");
    }
    return out;
}

}  // namespace mrcmos
