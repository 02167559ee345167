#pragma once

/// @file mrcm.hpp
/// @brief Global interface coupling: assembles the square system in the
/// multiscale-basis coefficients c_i^k from weak flux continuity
///
///     sum_i ( u_h^i . n_i, M )_{Gamma_i} = 0
///
/// and weak Robin continuity
///
///     sum_i ( beta u_h^i . n_i + lambda_i, V n_i . n )_{Gamma_i} = 0,
///
/// where the multiplier lambda_i is spanned by the recomputed basis traces
/// phi = -beta u.n + pi (so the Robin rows weakly match interface
/// pressures, and the particular solution contributes its own phi on the
/// right-hand side). Test spaces are piecewise constant (one indicator per
/// coarse face) or piecewise linear (indicator plus a zero-mean signed ramp,
/// oriented by the global axis). Inner products are edge-length-weighted
/// sums over each coarse face.
///
/// Column convention shared with reconstruction: subdomain-major, basis
/// order within each subdomain's set preserved.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mrcmos/basis.hpp"
#include "mrcmos/decomp.hpp"
#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"

namespace mrcmos {

enum class CoarseDegree { Constant, Linear };

/// Per-coarse-face interface test space: P0 (indicator) or P1 (indicator
/// plus zero-mean ramp). The two P1 functions are orthogonal under the
/// edge-sum inner product.
struct CoarseSpace {
    CoarseDegree degree = CoarseDegree::Constant;

    int functions_per_face() const { return degree == CoarseDegree::Constant ? 1 : 2; }

    /// Value of test function m at edge position `along` of a face with n
    /// edges. m = 0: indicator; m = 1: signed ramp with zero mean.
    static double test_value(int m, int along, int n) {
        return m == 0 ? 1.0 : 2.0 * (along + 0.5) / n - 1.0;
    }
};

/// Dense interface system with the subdomain-major column bookkeeping.
struct InterfaceSystem {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
    std::vector<int> column_offset;  // per subdomain; back() = total columns

    int columns() const { return column_offset.empty() ? 0 : column_offset.back(); }
};

/// Assembles flux-continuity rows (first block) and Robin-continuity rows
/// (second block), one row per (coarse face, test function). `sets` holds
/// the coefficient-carrying bases per subdomain; `particulars` one particular
/// solution per subdomain, moved to the right-hand side.
inline InterfaceSystem assemble_interface(const Decomposition& decomp, const PermField& perm,
                                          const RobinSpec& robin, const CoarseSpace& coarse,
                                          const std::vector<std::vector<MultiscaleBasis>>& sets,
                                          const std::vector<MultiscaleBasis>& particulars) {
    const int nsub = decomp.subdomain_count();
    if (static_cast<int>(sets.size()) != nsub || static_cast<int>(particulars.size()) != nsub) {
        throw std::invalid_argument("assemble_interface: one basis set and particular per subdomain");
    }
    const int fpf = coarse.functions_per_face();
    const int nfaces = decomp.coarse_face_count();
    const int rows = 2 * nfaces * fpf;

    InterfaceSystem sys;
    sys.column_offset.resize(static_cast<size_t>(nsub) + 1, 0);
    for (int i = 0; i < nsub; ++i) {
        sys.column_offset[static_cast<size_t>(i) + 1] =
            sys.column_offset[static_cast<size_t>(i)] + static_cast<int>(sets[static_cast<size_t>(i)].size());
    }
    const int cols = sys.columns();
    if (cols != rows) {
        throw std::invalid_argument("assemble_interface: system not square (basis count vs test space)");
    }
    sys.matrix = Eigen::MatrixXd::Zero(rows, cols);
    sys.rhs = Eigen::VectorXd::Zero(rows);

    const int robin_offset = nfaces * fpf;
    for (int i = 0; i < nsub; ++i) {
        const Subdomain& s = decomp.subdomain(i);
        const Eigen::VectorXd betas = interface_betas(decomp, perm, robin, i);
        const Eigen::Index nedges = static_cast<Eigen::Index>(s.edges.size());

        auto accumulate = [&](const MultiscaleBasis& b, int column) {
            if (b.flux_trace.values.size() != nedges || b.phi.values.size() != nedges) {
                throw std::invalid_argument("assemble_interface: basis trace length mismatch");
            }
            for (Eigen::Index e = 0; e < nedges; ++e) {
                const InterfaceEdge& edge = s.edges[static_cast<size_t>(e)];
                const double len = decomp.grid().face_area(edge.face.axis);
                const double flux_term = b.flux_trace.values[e] * len;
                const double robin_term =
                    (betas[e] * b.flux_trace.values[e] + b.phi.values[e]) * edge.sign * len;
                const int n = decomp.coarse_face(edge.coarse_face).edge_count;
                for (int m = 0; m < fpf; ++m) {
                    const double tv = CoarseSpace::test_value(m, edge.along, n);
                    const int frow = edge.coarse_face * fpf + m;
                    const int rrow = robin_offset + frow;
                    if (column >= 0) {
                        sys.matrix(frow, column) += flux_term * tv;
                        sys.matrix(rrow, column) += robin_term * tv;
                    } else {
                        sys.rhs(frow) -= flux_term * tv;
                        sys.rhs(rrow) -= robin_term * tv;
                    }
                }
            }
        };

        const auto& set = sets[static_cast<size_t>(i)];
        for (size_t k = 0; k < set.size(); ++k) {
            accumulate(set[k], sys.column_offset[static_cast<size_t>(i)] + static_cast<int>(k));
        }
        accumulate(particulars[static_cast<size_t>(i)], -1);
    }
    return sys;
}

/// Direct dense solve with row equilibration and a rank check. Relative
/// algebraic residual must reach 1e-12.
inline Eigen::VectorXd solve_interface(const InterfaceSystem& sys) {
    const Eigen::Index n = sys.matrix.rows();
    if (n == 0) return Eigen::VectorXd();
    if (sys.matrix.cols() != n) {
        throw std::invalid_argument("solve_interface: system not square");
    }
    Eigen::VectorXd scale(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double s = sys.matrix.row(r).cwiseAbs().maxCoeff();
        scale[r] = s > 0.0 ? s : 1.0;
    }
    const Eigen::MatrixXd a = scale.cwiseInverse().asDiagonal() * sys.matrix;
    const Eigen::VectorXd b = sys.rhs.cwiseQuotient(scale);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < n) {
        throw SingularSystemError("interface system numerically singular");
    }
    const Eigen::VectorXd x = qr.solve(b);
    // backward-error check: equilibrated rows have max-norm 1, so ||A|| ~ 1
    const double denom = std::max(b.norm() + x.norm(), 1e-300);
    if ((a * x - b).norm() > 1e-12 * denom) {
        throw SingularSystemError("interface solve failed to reach residual tolerance");
    }
    return x;
}

/// Reconstructed global field plus the largest skeleton flux jump seen when
/// averaging the two one-sided values (weak continuity diagnostic).
struct Reconstruction {
    FlowField field;
    double max_skeleton_jump = 0.0;
};

/// Combines particular + sum_k c_i^k basis_k per subdomain. Pressures and
/// faces interior to one subdomain are single-owner; skeleton faces store
/// the orientation-corrected average of the two one-sided fluxes.
inline Reconstruction reconstruct(const Decomposition& decomp,
                                  const std::vector<std::vector<MultiscaleBasis>>& sets,
                                  const std::vector<MultiscaleBasis>& particulars,
                                  const Eigen::VectorXd& coefficients) {
    const Grid& g = decomp.grid();
    const int nsub = decomp.subdomain_count();
    if (static_cast<int>(sets.size()) != nsub || static_cast<int>(particulars.size()) != nsub) {
        throw std::invalid_argument("reconstruct: one basis set and particular per subdomain");
    }
    Eigen::Index expected = 0;
    for (const auto& set : sets) expected += static_cast<Eigen::Index>(set.size());
    if (coefficients.size() != expected) {
        throw std::invalid_argument("reconstruct: coefficient count mismatch");
    }

    Reconstruction out;
    out.field.pressure = Eigen::VectorXd::Zero(g.cell_count());
    out.field.flux_x = Eigen::VectorXd::Zero(g.face_count(Axis::X));
    out.field.flux_y = Eigen::VectorXd::Zero(g.face_count(Axis::Y));
    Eigen::VectorXd count_x = Eigen::VectorXd::Zero(g.face_count(Axis::X));
    Eigen::VectorXd count_y = Eigen::VectorXd::Zero(g.face_count(Axis::Y));

    Eigen::Index column = 0;
    for (int i = 0; i < nsub; ++i) {
        const Subdomain& s = decomp.subdomain(i);
        const Grid sgrid = s.cells.local_grid(g);
        FlowField combo = particulars[static_cast<size_t>(i)].interior;
        for (const auto& b : sets[static_cast<size_t>(i)]) {
            const double c = coefficients[column++];
            combo.pressure += c * b.interior.pressure;
            combo.flux_x += c * b.interior.flux_x;
            combo.flux_y += c * b.interior.flux_y;
        }
        for (int cc = 0; cc < sgrid.cell_count(); ++cc) {
            const CellId global = s.cells.to_global(sgrid.cell_at(cc));
            out.field.pressure[g.cell_index(global)] = combo.pressure[cc];
        }
        for (const Axis axis : {Axis::X, Axis::Y}) {
            Eigen::VectorXd& acc = axis == Axis::X ? out.field.flux_x : out.field.flux_y;
            Eigen::VectorXd& cnt = axis == Axis::X ? count_x : count_y;
            for (int k = 0; k < sgrid.face_count(axis); ++k) {
                const FaceId lf = sgrid.face_at(axis, k);
                const int gf = g.face_index(s.cells.to_global(lf));
                const double v = combo.flux(sgrid, lf);
                if (cnt[gf] > 0.0) {
                    out.max_skeleton_jump = std::max(out.max_skeleton_jump, std::abs(acc[gf] - v));
                }
                acc[gf] += v;
                cnt[gf] += 1.0;
            }
        }
    }
    out.field.flux_x = out.field.flux_x.cwiseQuotient(count_x.cwiseMax(1.0));
    out.field.flux_y = out.field.flux_y.cwiseQuotient(count_y.cwiseMax(1.0));
    return out;
}

}  // namespace mrcmos
