#pragma once

/// @file fineop.hpp
/// @brief Fine-scale discretization and solver for the Darcy system
///
///     u = -K grad(p),   div(u) = f   in a rectangular cell window,
///
/// with Dirichlet (p = g), Neumann (u.n = z), and Robin (-beta u.n + p =
/// lambda) boundary conditions. The scheme is cell-centered two-point flux
/// approximation with harmonic face transmissibilities; pressures live at
/// cell centers and normal fluxes (velocity components, per unit area) at
/// faces. Robin faces eliminate the face pressure: combining the half-cell
/// flux q = (2 K_c / h)(p_c - p_face) with p_face = lambda + beta q gives
///
///     q = (p_c - lambda) / (h / (2 K_c) + beta),
///
/// which reduces bit-for-bit to the Dirichlet case at beta = 0 (both run
/// through the same code path). Transmissibilities carry units of total
/// flow per pressure drop (face area included); FlowField fluxes are per
/// unit area.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mrcmos/grid.hpp"

namespace mrcmos {

/// Thrown when a linear system is singular or an all-Neumann problem has an
/// incompatible source.
class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-cell scalar permeability. Values must be strictly positive and finite.
class PermField {
public:
    PermField(const Grid& grid, double uniform)
        : nx_(grid.nx()), ny_(grid.ny()), k_(static_cast<size_t>(grid.cell_count()), uniform) {
        validate();
    }
    PermField(const Grid& grid, std::vector<double> values)
        : nx_(grid.nx()), ny_(grid.ny()), k_(std::move(values)) {
        if (k_.size() != static_cast<size_t>(grid.cell_count())) {
            throw std::invalid_argument("PermField: value count does not match grid");
        }
        validate();
    }

    double at(CellId c) const { return k_[static_cast<size_t>(c.j) * nx_ + c.i]; }
    double& at(CellId c) { return k_[static_cast<size_t>(c.j) * nx_ + c.i]; }
    const std::vector<double>& values() const { return k_; }

    /// Restriction to a window (row-major order of the window's own grid).
    PermField window(const CellWindow& w, const Grid& parent) const {
        std::vector<double> sub;
        sub.reserve(static_cast<size_t>(w.nx) * w.ny);
        for (int j = 0; j < w.ny; ++j) {
            for (int i = 0; i < w.nx; ++i) {
                sub.push_back(at(w.to_global(CellId{i, j})));
            }
        }
        return PermField(w.local_grid(parent), std::move(sub));
    }

private:
    void validate() const {
        for (const double k : k_) {
            if (!(k > 0.0) || !std::isfinite(k)) {
                throw std::invalid_argument("PermField: permeability must be positive and finite");
            }
        }
    }
    int nx_, ny_;
    std::vector<double> k_;
};

/// Per-cell source density f. Values must be finite.
class SourceField {
public:
    SourceField(const Grid& grid, double uniform = 0.0)
        : nx_(grid.nx()), f_(static_cast<size_t>(grid.cell_count()), uniform) {
        validate();
    }
    SourceField(const Grid& grid, std::vector<double> values)
        : nx_(grid.nx()), f_(std::move(values)) {
        if (f_.size() != static_cast<size_t>(grid.cell_count())) {
            throw std::invalid_argument("SourceField: value count does not match grid");
        }
        validate();
    }

    double at(CellId c) const { return f_[static_cast<size_t>(c.j) * nx_ + c.i]; }
    double& at(CellId c) { return f_[static_cast<size_t>(c.j) * nx_ + c.i]; }

    SourceField window(const CellWindow& w, const Grid& parent) const {
        std::vector<double> sub;
        sub.reserve(static_cast<size_t>(w.nx) * w.ny);
        for (int j = 0; j < w.ny; ++j) {
            for (int i = 0; i < w.nx; ++i) {
                sub.push_back(at(w.to_global(CellId{i, j})));
            }
        }
        return SourceField(w.local_grid(parent), std::move(sub));
    }

private:
    void validate() const {
        for (const double f : f_) {
            if (!std::isfinite(f)) {
                throw std::invalid_argument("SourceField: source must be finite");
            }
        }
    }
    int nx_;
    std::vector<double> f_;
};

enum class BcType { Dirichlet, Neumann, Robin };

/// Condition on one boundary face. `value` is g (Dirichlet), z = u.n outward
/// (Neumann), or lambda (Robin); `beta` is the Robin resistance, zero
/// otherwise.
struct FaceBC {
    BcType type = BcType::Dirichlet;
    double value = 0.0;
    double beta = 0.0;

    static FaceBC dirichlet(double g) { return {BcType::Dirichlet, g, 0.0}; }
    static FaceBC neumann(double z) { return {BcType::Neumann, z, 0.0}; }
    static FaceBC robin(double beta, double lambda) {
        if (!(beta >= 0.0) || !std::isfinite(beta)) {
            throw std::invalid_argument("FaceBC: Robin beta must be finite and >= 0");
        }
        return {BcType::Robin, lambda, beta};
    }

    bool operator==(const FaceBC&) const = default;

    /// Same type and resistance; values may differ. Systems sharing a
    /// structure share the assembled matrix.
    bool same_structure(const FaceBC& other) const {
        return type == other.type && beta == other.beta;
    }
};

enum class Side { West, East, South, North };
inline constexpr std::array<Side, 4> kSides = {Side::West, Side::East, Side::South, Side::North};

/// One condition per boundary face of a window, stored per side. West/East
/// arrays run over j = 0..ny-1, South/North over i = 0..nx-1. Every boundary
/// face always carries exactly one condition (default: homogeneous
/// Dirichlet).
class BoundarySpec {
public:
    explicit BoundarySpec(const Grid& grid) : nx_(grid.nx()), ny_(grid.ny()) {
        side_[0].resize(ny_);
        side_[1].resize(ny_);
        side_[2].resize(nx_);
        side_[3].resize(nx_);
    }

    int side_size(Side s) const { return s == Side::West || s == Side::East ? ny_ : nx_; }

    std::vector<FaceBC>& side(Side s) { return side_[static_cast<int>(s)]; }
    const std::vector<FaceBC>& side(Side s) const { return side_[static_cast<int>(s)]; }

    void set_side(Side s, const FaceBC& bc) {
        for (auto& f : side(s)) f = bc;
    }
    void set_all(const FaceBC& bc) {
        for (const Side s : kSides) set_side(s, bc);
    }

    /// Side and offset-along-side of a boundary face.
    std::pair<Side, int> locate(FaceId f) const {
        if (f.axis == Axis::X) {
            if (f.i == 0) return {Side::West, f.j};
            if (f.i == nx_) return {Side::East, f.j};
        } else {
            if (f.j == 0) return {Side::South, f.i};
            if (f.j == ny_) return {Side::North, f.i};
        }
        throw std::invalid_argument("BoundarySpec: face is not on the window boundary");
    }

    const FaceBC& at(FaceId f) const {
        const auto [s, k] = locate(f);
        return side(s)[static_cast<size_t>(k)];
    }
    FaceBC& at(FaceId f) {
        const auto [s, k] = locate(f);
        return side(s)[static_cast<size_t>(k)];
    }

    bool same_structure(const BoundarySpec& other) const {
        if (nx_ != other.nx_ || ny_ != other.ny_) return false;
        for (int s = 0; s < 4; ++s) {
            for (size_t k = 0; k < side_[s].size(); ++k) {
                if (!side_[s][k].same_structure(other.side_[s][k])) return false;
            }
        }
        return true;
    }

    bool all_neumann() const {
        for (const auto& arr : side_) {
            for (const auto& f : arr) {
                if (f.type != BcType::Neumann) return false;
            }
        }
        return true;
    }

private:
    int nx_, ny_;
    std::array<std::vector<FaceBC>, 4> side_;
};

/// Discrete Darcy state: cell pressures plus per-face normal fluxes stored
/// along the global +x / +y normals, per unit area.
struct FlowField {
    Eigen::VectorXd pressure;
    Eigen::VectorXd flux_x;
    Eigen::VectorXd flux_y;

    double flux(const Grid& grid, FaceId f) const {
        return f.axis == Axis::X ? flux_x[grid.face_index(f)] : flux_y[grid.face_index(f)];
    }
    double& flux(const Grid& grid, FaceId f) {
        return f.axis == Axis::X ? flux_x[grid.face_index(f)] : flux_y[grid.face_index(f)];
    }
};

/// Interior-face transmissibility T = A / (d1/K1 + d2/K2) with d the half
/// cell width along the face normal; boundary faces use the one-sided
/// half-cell value T = A K_c / d_c. Units: total flow per pressure drop.
inline double face_transmissibility(const Grid& grid, const PermField& perm, FaceId f) {
    if (!grid.face_in_range(f)) {
        throw std::invalid_argument("face_transmissibility: face out of range");
    }
    const double area = grid.face_area(f.axis);
    const double d = 0.5 * grid.normal_spacing(f.axis);
    if (grid.is_boundary(f)) {
        return area * perm.at(grid.boundary_cell(f)) / d;
    }
    const auto cells = grid.face_cells(f);
    return area / (d / perm.at(cells[0]) + d / perm.at(cells[1]));
}

/// Assembled cell-pressure system together with the data needed to rebuild
/// the right-hand side and reconstruct fluxes.
struct LinearSystem {
    Grid grid;
    PermField perm;
    BoundarySpec bc;
    SourceField source;
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    bool pinned = false;  // all-Neumann: cell 0 pressure fixed to 0
};

namespace detail {

/// Total-flow coefficient of a Dirichlet/Robin boundary face: the outward
/// flow is coef * (p_c - value). Dirichlet is the beta = 0 instance of the
/// same expression.
inline double boundary_coef(const Grid& grid, const PermField& perm, FaceId f, double beta) {
    const double area = grid.face_area(f.axis);
    const double d = 0.5 * grid.normal_spacing(f.axis);
    return area / (d / perm.at(grid.boundary_cell(f)) + beta);
}

inline Eigen::SparseMatrix<double> build_matrix(const Grid& grid, const PermField& perm,
                                                const BoundarySpec& bc, bool pinned) {
    const int n = grid.cell_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(n) * 5);
    for (int cc = 0; cc < n; ++cc) {
        const CellId c = grid.cell_at(cc);
        for (const auto& cf : grid.faces_of_cell(c)) {
            if (grid.is_boundary(cf.face)) {
                const FaceBC& fbc = bc.at(cf.face);
                if (fbc.type == BcType::Neumann) continue;
                trips.emplace_back(cc, cc, boundary_coef(grid, perm, cf.face, fbc.beta));
            } else {
                const double t = face_transmissibility(grid, perm, cf.face);
                const auto cells = grid.face_cells(cf.face);
                const CellId other = cells[0] == c ? cells[1] : cells[0];
                trips.emplace_back(cc, cc, t);
                trips.emplace_back(cc, grid.cell_index(other), -t);
            }
        }
    }
    if (pinned) {
        std::erase_if(trips, [](const auto& t) { return t.row() == 0 || t.col() == 0; });
        trips.emplace_back(0, 0, 1.0);
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

inline Eigen::VectorXd build_rhs(const Grid& grid, const PermField& perm, const BoundarySpec& bc,
                                 const SourceField& source, bool pinned) {
    const int n = grid.cell_count();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    double scale = 0.0;
    for (int cc = 0; cc < n; ++cc) {
        const CellId c = grid.cell_at(cc);
        b[cc] += source.at(c) * grid.cell_volume();
        scale += std::abs(b[cc]);
        for (const auto& cf : grid.faces_of_cell(c)) {
            if (!grid.is_boundary(cf.face)) continue;
            const FaceBC& fbc = bc.at(cf.face);
            if (fbc.type == BcType::Neumann) {
                const double flow = grid.face_area(cf.face.axis) * fbc.value;
                b[cc] -= flow;
                scale += std::abs(flow);
            } else {
                b[cc] += boundary_coef(grid, perm, cf.face, fbc.beta) * fbc.value;
            }
        }
    }
    if (pinned) {
        // Pure Neumann data must balance the source: sum f vol = sum A z.
        const double imbalance = b.sum();
        if (std::abs(imbalance) > 1e-12 * std::max(1.0, scale)) {
            throw SingularSystemError("all-Neumann window with incompatible source");
        }
        b[0] = 0.0;
    }
    return b;
}

/// Per-unit-area fluxes from solved pressures via the two-point formulas.
inline FlowField reconstruct_fluxes(const Grid& grid, const PermField& perm,
                                    const BoundarySpec& bc, Eigen::VectorXd pressures) {
    FlowField out;
    out.flux_x.resize(grid.face_count(Axis::X));
    out.flux_y.resize(grid.face_count(Axis::Y));
    for (const Axis axis : {Axis::X, Axis::Y}) {
        Eigen::VectorXd& fx = axis == Axis::X ? out.flux_x : out.flux_y;
        const double area = grid.face_area(axis);
        for (int k = 0; k < grid.face_count(axis); ++k) {
            const FaceId f = grid.face_at(axis, k);
            if (!grid.is_boundary(f)) {
                const auto cells = grid.face_cells(f);
                const double t = face_transmissibility(grid, perm, f);
                fx[k] = t * (pressures[grid.cell_index(cells[0])] -
                             pressures[grid.cell_index(cells[1])]) /
                        area;
                continue;
            }
            const CellId c = grid.boundary_cell(f);
            // Outward sign of the adjacent cell relative to the global normal.
            const double sign = (f.axis == Axis::X ? f.i == 0 : f.j == 0) ? -1.0 : 1.0;
            const FaceBC& fbc = bc.at(f);
            if (fbc.type == BcType::Neumann) {
                fx[k] = sign * fbc.value;
            } else {
                const double coef = boundary_coef(grid, perm, f, fbc.beta);
                fx[k] = sign * coef * (pressures[grid.cell_index(c)] - fbc.value) / area;
            }
        }
    }
    out.pressure = std::move(pressures);
    return out;
}

/// Largest absolute row sum of a sparse matrix.
inline double inf_norm(const Eigen::SparseMatrix<double>& m) {
    Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(m.rows());
    for (int col = 0; col < m.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it) {
            row_sums[it.row()] += std::abs(it.value());
        }
    }
    return row_sums.size() == 0 ? 0.0 : row_sums.maxCoeff();
}

/// Solves with a cached factorization, applying iterative refinement until
/// the backward error ||b - A x|| / (||b|| + ||A|| ||x||) is <= 1e-13. The
/// denominator keeps ill-conditioned but solvable systems (large solutions
/// from a near-Neumann boundary) from tripping the guard; genuine failures
/// still throw.
inline Eigen::VectorXd refine_solve(const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& ldlt,
                                    const Eigen::SparseMatrix<double>& matrix,
                                    const Eigen::VectorXd& rhs) {
    const double norm_a = inf_norm(matrix);
    const auto scale = [&](const Eigen::VectorXd& x) {
        return std::max(rhs.norm() + norm_a * x.norm(), 1e-300);
    };
    Eigen::VectorXd x = ldlt.solve(rhs);
    for (int pass = 0; pass < 4; ++pass) {
        const Eigen::VectorXd r = rhs - matrix * x;
        if (r.norm() <= 1e-13 * scale(x)) return x;
        x += ldlt.solve(r);
    }
    const Eigen::VectorXd r = rhs - matrix * x;
    if (r.norm() <= 1e-13 * scale(x)) return x;
    throw SingularSystemError("linear solve failed to reach residual tolerance");
}

}  // namespace detail

/// Assembles the cell-pressure system. All-Neumann windows are pinned at
/// cell 0 (symmetric identity row/column); the source-compatibility check
/// happens on the right-hand side.
inline LinearSystem assemble(const Grid& grid, const PermField& perm, const BoundarySpec& bc,
                             const SourceField& source) {
    const bool pinned = bc.all_neumann();
    LinearSystem sys{grid, perm, bc, source, {}, {}, pinned};
    sys.matrix = detail::build_matrix(grid, perm, bc, pinned);
    sys.rhs = detail::build_rhs(grid, perm, bc, source, pinned);
    return sys;
}

/// Factorizes and solves an assembled system, then reconstructs fluxes.
inline FlowField solve(const LinearSystem& sys) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.matrix);
    if (ldlt.info() != Eigen::Success) {
        throw SingularSystemError("factorization failed");
    }
    Eigen::VectorXd p = detail::refine_solve(ldlt, sys.matrix, sys.rhs);
    return detail::reconstruct_fluxes(sys.grid, sys.perm, sys.bc, std::move(p));
}

/// Maximum cell-wise conservation defect |sum_F sign A q - f vol|, relative
/// to the larger of 1 and the largest single flow term.
inline double conservation_residual(const Grid& grid, const FlowField& field,
                                    const SourceField& source) {
    double worst = 0.0;
    double scale = 1.0;
    for (int cc = 0; cc < grid.cell_count(); ++cc) {
        const CellId c = grid.cell_at(cc);
        double net = -source.at(c) * grid.cell_volume();
        for (const auto& cf : grid.faces_of_cell(c)) {
            const double flow = grid.face_area(cf.face.axis) * field.flux(grid, cf.face);
            net += cf.outward_sign * flow;
            scale = std::max(scale, std::abs(flow));
        }
        worst = std::max(worst, std::abs(net));
    }
    return worst / scale;
}

/// Repeated solves on one window that share matrix structure (same grid,
/// permeability, boundary types, and Robin resistances): the factorization
/// is computed once and only the right-hand side is rebuilt per call.
class WindowSolver {
public:
    WindowSolver(Grid grid, PermField perm, BoundarySpec structure)
        : grid_(std::move(grid)),
          perm_(std::move(perm)),
          structure_(std::move(structure)),
          pinned_(structure_.all_neumann()),
          matrix_(detail::build_matrix(grid_, perm_, structure_, pinned_)) {
        ldlt_.compute(matrix_);
        if (ldlt_.info() != Eigen::Success) {
            throw SingularSystemError("factorization failed");
        }
    }

    const Grid& grid() const { return grid_; }
    const PermField& perm() const { return perm_; }

    /// `bc` must match the constructed structure (types and betas); only its
    /// values and the source may vary between calls.
    FlowField solve(const BoundarySpec& bc, const SourceField& source) const {
        if (!bc.same_structure(structure_)) {
            throw std::invalid_argument("WindowSolver: boundary structure mismatch");
        }
        const Eigen::VectorXd b = detail::build_rhs(grid_, perm_, bc, source, pinned_);
        Eigen::VectorXd p = detail::refine_solve(ldlt_, matrix_, b);
        return detail::reconstruct_fluxes(grid_, perm_, bc, std::move(p));
    }

private:
    Grid grid_;
    PermField perm_;
    BoundarySpec structure_;
    bool pinned_;
    Eigen::SparseMatrix<double> matrix_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

}  // namespace mrcmos
