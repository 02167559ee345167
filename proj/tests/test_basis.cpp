/// @file test_basis.cpp
/// @brief Local oversampled solves, offline/informed Robin data, and basis
/// bookkeeping, checked against closed forms and a dense window oracle.

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "mrcmos/basis.hpp"
#include "mrcmos/decomp.hpp"
#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"

namespace {

using mrcmos::BasisKind;
using mrcmos::BcType;
using mrcmos::BoundarySpec;
using mrcmos::build_basis_set;
using mrcmos::build_decomposition;
using mrcmos::build_particular;
using mrcmos::CellId;
using mrcmos::CellWindow;
using mrcmos::conservation_residual;
using mrcmos::Decomposition;
using mrcmos::edge_beta;
using mrcmos::extend_trace;
using mrcmos::FaceBC;
using mrcmos::FaceId;
using mrcmos::FlowField;
using mrcmos::Grid;
using mrcmos::informed_lambdas;
using mrcmos::informed_window_data;
using mrcmos::interface_betas;
using mrcmos::LocalSolver;
using mrcmos::MultiscaleBasis;
using mrcmos::offline_lambdas;
using mrcmos::offline_window_data;
using mrcmos::PermField;
using mrcmos::restrict_trace;
using mrcmos::RobinSpec;
using mrcmos::Side;
using mrcmos::SourceField;
using mrcmos::TraceFunction;
using mrcmos::window_robin_trace;
using mrcmos::WindowTrace;
using mrcmos::Axis;

PermField random_perm(const Grid& g, unsigned seed, double lo = 0.1, double hi = 10.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> k(static_cast<size_t>(g.cell_count()));
    for (auto& v : k) v = dist(rng);
    return PermField(g, std::move(k));
}

BoundarySpec left_right_flow_bc(const Grid& g) {
    BoundarySpec bc(g);
    bc.set_side(Side::West, FaceBC::dirichlet(1.0));
    bc.set_side(Side::East, FaceBC::dirichlet(0.0));
    bc.set_side(Side::South, FaceBC::neumann(0.0));
    bc.set_side(Side::North, FaceBC::neumann(0.0));
    return bc;
}

TEST(RobinSpec, BetaFormula) {
    const Grid g(4, 4, 1.0, 1.0);  // h = 1/4
    PermField k(g, 2.0);
    k.at({1, 1}) = 6.0;
    const RobinSpec robin(10.0);
    // Harmonic mean of 2 and 6 is 3; beta = alpha h / K_e.
    EXPECT_NEAR(edge_beta(g, k, robin, {Axis::X, 2, 1}), 10.0 * 0.25 / 3.0, 1e-15);
    EXPECT_NEAR(edge_beta(g, k, robin, {Axis::Y, 3, 2}), 10.0 * 0.25 / 2.0, 1e-15);
    EXPECT_THROW(edge_beta(g, k, robin, {Axis::X, 0, 1}), std::invalid_argument);
    EXPECT_THROW(RobinSpec(0.0), std::invalid_argument);
    EXPECT_THROW(RobinSpec(-3.0), std::invalid_argument);
}

TEST(OfflineLambdas, CountsAndPartition) {
    const Grid g(220, 60, 11.0 / 3.0, 1.0);
    const Decomposition d = build_decomposition(g, 11, 3, 2);
    // Interior subdomain has 4 neighbours, corner 2.
    const int interior = 1 * 11 + 5;
    EXPECT_EQ(offline_lambdas(d, interior).size(), 4u);
    EXPECT_EQ(offline_lambdas(d, 0).size(), 2u);
    const auto lambdas = offline_lambdas(d, interior);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(lambdas[0].values.size());
    for (const auto& l : lambdas) sum += l.values;
    EXPECT_TRUE((sum.array() == 1.0).all());
}

TEST(ExtendTrace, IdentityAtZeroOversamplingAndClampedOtherwise) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d0 = build_decomposition(g, 3, 3, 0);
    const int i = 4;  // interior
    const auto& s0 = d0.subdomain(i);
    TraceFunction t{i, Eigen::VectorXd::LinSpaced(
                           static_cast<Eigen::Index>(s0.edges.size()), 0.0,
                           static_cast<double>(s0.edges.size()) - 1.0)};
    const WindowTrace w0 = extend_trace(d0, t, i);
    for (const Side side : mrcmos::kSides) {
        const auto [b, e] = s0.side_range[static_cast<int>(side)];
        const Eigen::VectorXd& vals = w0.side[static_cast<int>(side)];
        ASSERT_EQ(vals.size(), e - b);
        for (int k = 0; k < vals.size(); ++k) {
            EXPECT_DOUBLE_EQ(vals[k], t.values[b + k]);
        }
    }
    // l = 2: window sides extend two cells past the subdomain; the extension
    // clamps to the first/last interface value along each side.
    const Decomposition d2 = build_decomposition(g, 3, 3, 2);
    const WindowTrace w2 = extend_trace(d2, t, i);
    const auto& s2 = d2.subdomain(i);
    const auto [wb, we] = s2.side_range[static_cast<int>(Side::West)];
    const Eigen::VectorXd& west = w2.side[static_cast<int>(Side::West)];
    ASSERT_EQ(west.size(), 8);  // 4 + 2 + 2
    EXPECT_DOUBLE_EQ(west[0], t.values[wb]);
    EXPECT_DOUBLE_EQ(west[1], t.values[wb]);
    EXPECT_DOUBLE_EQ(west[2], t.values[wb]);
    EXPECT_DOUBLE_EQ(west[5], t.values[wb + 3]);
    EXPECT_DOUBLE_EQ(west[7], t.values[wb + 3]);
}

TEST(ExtendTrace, RejectsOversamplingThatClipsAnInterfaceSide) {
    const Grid g(4, 4, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 2, 2, 2);  // windows swallow the grid
    const auto lambdas = offline_lambdas(d, 0);
    EXPECT_THROW(extend_trace(d, lambdas[0], 0), std::invalid_argument);
    const PermField k(g, 1.0);
    FlowField f;
    f.pressure = Eigen::VectorXd::Zero(g.cell_count());
    f.flux_x = Eigen::VectorXd::Zero(g.face_count(Axis::X));
    f.flux_y = Eigen::VectorXd::Zero(g.face_count(Axis::Y));
    EXPECT_THROW(informed_window_data(d, k, RobinSpec(10.0), f, 0), std::invalid_argument);
}

TEST(SolveLocal, ZeroDataGiveZeroField) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 3, 3, 1);
    const PermField k = random_perm(g, 2);
    const RobinSpec robin(10.0);
    const BoundarySpec physical = left_right_flow_bc(g);
    const int i = 3;  // west-edge subdomain: mixes physical and Robin sides
    const LocalSolver solver(d, k, robin, physical, i);
    const FlowField sol = solver.solve_basis(mrcmos::zero_window_trace(d, i));
    EXPECT_LT(sol.pressure.cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(sol.flux_x.cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT(sol.flux_y.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SolveLocal, ConstantDatumGivesConstantState) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 3, 3, 2);
    const PermField k = random_perm(g, 8);
    const RobinSpec robin(10.0);
    const int i = 4;  // interior: all four window sides Robin
    const LocalSolver solver(d, k, robin, BoundarySpec(g), i);
    WindowTrace wt = mrcmos::zero_window_trace(d, i);
    for (auto& side : wt.side) side.setConstant(3.7);
    const FlowField sol = solver.solve_basis(wt);
    EXPECT_LT((sol.pressure.array() - 3.7).abs().maxCoeff(), 1e-12);
    EXPECT_LT(sol.flux_x.cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LT(sol.flux_y.cwiseAbs().maxCoeff(), 1e-11);
}

TEST(SolveLocal, SingleSubdomainReproducesGlobalSolve) {
    const Grid g(10, 8, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 1, 1, 0);
    const PermField k = random_perm(g, 13);
    const RobinSpec robin(10.0);
    const BoundarySpec physical = left_right_flow_bc(g);
    SourceField f(g);
    f.at({4, 4}) = 2.0;
    const LocalSolver solver(d, k, robin, physical, 0);
    const FlowField local =
        solver.solve(mrcmos::zero_window_trace(d, 0), solver.window_source(f, g), false);
    const FlowField global = mrcmos::solve(mrcmos::assemble(g, k, physical, f));
    EXPECT_LT((local.pressure - global.pressure).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((local.flux_x - global.flux_x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildBasisSet, LinearityAndRestrictionIdentityAtL0) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 3, 3, 0);
    const PermField k = random_perm(g, 5);
    const RobinSpec robin(10.0);
    const BoundarySpec physical = left_right_flow_bc(g);
    const int i = 4;
    const LocalSolver solver(d, k, robin, physical, i);
    const auto data = offline_window_data(d, i);
    ASSERT_EQ(data.size(), 4u);
    const auto set = build_basis_set(d, k, robin, solver, i, data, BasisKind::Offline);
    // l = 0: the solve window is Omega_i, so interior == window solve.
    const FlowField raw = solver.solve_basis(data[1]);
    EXPECT_TRUE((set[1].interior.pressure.array() == raw.pressure.array()).all());
    // Linearity of the solution operator in lambda.
    WindowTrace combo = mrcmos::zero_window_trace(d, i);
    for (int s = 0; s < 4; ++s) {
        combo.side[s] = 2.0 * data[0].side[s] - 3.0 * data[2].side[s];
    }
    const FlowField direct = solver.solve_basis(combo);
    const Eigen::VectorXd expect =
        2.0 * set[0].interior.pressure - 3.0 * set[2].interior.pressure;
    EXPECT_LT((direct.pressure - expect).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(BuildBasisSet, TracesRecomputableAndConservative) {
    const Grid g(16, 16, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 2, 2, 2);
    const PermField k = random_perm(g, 17);
    const RobinSpec robin(10.0);
    const BoundarySpec physical = left_right_flow_bc(g);
    SourceField f(g);
    f.at({3, 12}) = 1.0;
    f.at({12, 3}) = -1.0;
    for (int i = 0; i < d.subdomain_count(); ++i) {
        const LocalSolver solver(d, k, robin, physical, i);
        const auto set =
            build_basis_set(d, k, robin, solver, i, offline_window_data(d, i), BasisKind::Offline);
        EXPECT_EQ(set.size(), static_cast<size_t>(d.coarse_faces_of(i).size()));
        const Grid sgrid = d.subdomain(i).cells.local_grid(g);
        const PermField sperm = k.window(d.subdomain(i).cells, g);
        for (const auto& b : set) {
            // Conservation with f = 0 on the restricted field.
            EXPECT_LT(conservation_residual(sgrid, b.interior, SourceField(sgrid)), 1e-11);
            // Traces must be recomputable from the stored interior field.
            const auto [rf, rp] =
                restrict_trace(d, sperm, b.interior, i, d.subdomain(i).cells);
            EXPECT_LT((rf.values - b.flux_trace.values).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((rp.values - b.pressure_trace.values).cwiseAbs().maxCoeff(), 1e-12);
            // phi = -beta flux + pressure.
            const Eigen::VectorXd betas = interface_betas(d, k, robin, i);
            const Eigen::VectorXd phi =
                b.pressure_trace.values - betas.cwiseProduct(b.flux_trace.values);
            EXPECT_LT((phi - b.phi.values).cwiseAbs().maxCoeff(), 1e-14);
        }
        const MultiscaleBasis part = build_particular(d, k, robin, solver, i, f);
        const SourceField sf = f.window(d.subdomain(i).cells, g);
        EXPECT_LT(conservation_residual(sgrid, part.interior, sf), 1e-11);
        EXPECT_TRUE((part.lambda.values.array() == 0.0).all());
    }
}

TEST(BuildBasisSet, SuperpositionWithParticular) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 3, 3, 1);
    const PermField k = random_perm(g, 29);
    const RobinSpec robin(10.0);
    const BoundarySpec physical = left_right_flow_bc(g);
    SourceField f(g, 0.6);
    const int i = 1;
    const LocalSolver solver(d, k, robin, physical, i);
    const auto data = offline_window_data(d, i);
    const auto set = build_basis_set(d, k, robin, solver, i, data, BasisKind::Offline);
    const MultiscaleBasis part = build_particular(d, k, robin, solver, i, f);
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> c(set.size());
    WindowTrace combo = mrcmos::zero_window_trace(d, i);
    Eigen::VectorXd expect = part.interior.pressure;
    for (size_t kk = 0; kk < set.size(); ++kk) {
        c[kk] = dist(rng);
        for (int s = 0; s < 4; ++s) {
            if (combo.side[s].size() > 0) combo.side[s] += c[kk] * data[kk].side[s];
        }
        expect += c[kk] * set[kk].interior.pressure;
    }
    const FlowField mono = solver.solve(combo, solver.window_source(f, g), false);
    const FlowField monor = mrcmos::detail::restrict_field(g, d.subdomain(i).window,
                                                           d.subdomain(i).cells, mono);
    EXPECT_LT((monor.pressure - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BuildBasisSet, FluxIntegralMatchesDenseWindowOracle) {
    // Homogeneous K, offline indicator on the east coarse face of subdomain 0.
    const Grid g(8, 8, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 2, 2, 1);
    const PermField k(g, 1.0);
    const RobinSpec robin(10.0);
    BoundarySpec physical(g);  // all Dirichlet 0
    const int i = 0;
    const LocalSolver solver(d, k, robin, physical, i);
    const auto data = offline_window_data(d, i);  // east, north
    const auto set = build_basis_set(d, k, robin, solver, i, data, BasisKind::Offline);

    // Independent dense assembly of the window problem from the flux-balance
    // definition: window cells [0,5)x[0,5), West/South Dirichlet 0 (physical),
    // East/North Robin with beta = alpha h / K and lambda = 1 east, 0 north.
    const CellWindow w = d.subdomain(i).window;
    ASSERT_EQ(w, (CellWindow{0, 0, 5, 5}));
    const int n = w.nx * w.ny;
    const double h = g.hx();
    const double beta = 10.0 * h / 1.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    auto id = [&](int x, int y) { return y * w.nx + x; };
    for (int y = 0; y < w.ny; ++y) {
        for (int x = 0; x < w.nx; ++x) {
            const int cc = id(x, y);
            // Interior couplings, T = K A / h = 1 for unit K and square cells.
            if (x > 0) { m(cc, cc) += 1.0; m(cc, id(x - 1, y)) -= 1.0; }
            if (x < w.nx - 1) { m(cc, cc) += 1.0; m(cc, id(x + 1, y)) -= 1.0; }
            if (y > 0) { m(cc, cc) += 1.0; m(cc, id(x, y - 1)) -= 1.0; }
            if (y < w.ny - 1) { m(cc, cc) += 1.0; m(cc, id(x, y + 1)) -= 1.0; }
            if (x == 0) m(cc, cc) += 2.0;  // Dirichlet 0: coef = A/(d/K) = 2
            if (y == 0) m(cc, cc) += 2.0;
            if (x == w.nx - 1) {  // Robin, lambda = 1: coef = A/(d/K + beta)
                const double coef = h / (h / 2.0 + beta);
                m(cc, cc) += coef;
                rhs[cc] += coef * 1.0;
            }
            if (y == w.ny - 1) {
                const double coef = h / (h / 2.0 + beta);
                m(cc, cc) += coef;
            }
        }
    }
    const Eigen::VectorXd p = Eigen::PartialPivLU<Eigen::MatrixXd>(m).solve(rhs);
    // Total outward flux over the east coarse face of Gamma_0 (global x = 4,
    // j = 0..3), two-point formula on window-interior faces.
    double oracle_total = 0.0;
    for (int j = 0; j < 4; ++j) {
        oracle_total += (p[id(3, j)] - p[id(4, j)]);  // T (pL - pR), T = 1; A q = flow
    }
    double lib_total = 0.0;
    const auto& s = d.subdomain(i);
    for (size_t e = 0; e < s.edges.size(); ++e) {
        if (s.edges[e].side == Side::East) {
            lib_total += set[0].flux_trace.values[static_cast<Eigen::Index>(e)] * g.hy();
        }
    }
    EXPECT_NEAR(lib_total, oracle_total, 1e-11);
}

TEST(InformedLambdas, ConstantFieldGivesMaskedConstants) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 3, 3, 1);
    const PermField k = random_perm(g, 41);
    const RobinSpec robin(10.0);
    FlowField f;
    f.pressure = Eigen::VectorXd::Constant(g.cell_count(), 1.5);
    f.flux_x = Eigen::VectorXd::Zero(g.face_count(Axis::X));
    f.flux_y = Eigen::VectorXd::Zero(g.face_count(Axis::Y));
    const int i = 4;
    const auto lambdas = informed_lambdas(d, k, robin, f, i);
    ASSERT_EQ(lambdas.size(), 4u);
    const auto& s = d.subdomain(i);
    for (size_t kk = 0; kk < lambdas.size(); ++kk) {
        const int face = d.coarse_faces_of(i)[kk];
        for (size_t e = 0; e < s.edges.size(); ++e) {
            const double expect = s.edges[e].coarse_face == face ? 1.5 : 0.0;
            EXPECT_NEAR(lambdas[kk].values[static_cast<Eigen::Index>(e)], expect, 1e-14);
        }
    }
    // Window variant: constant pressure, zero flux -> r = 1.5 on the masked side.
    const auto wdata = informed_window_data(d, k, robin, f, i);
    ASSERT_EQ(wdata.size(), 4u);
    for (size_t kk = 0; kk < wdata.size(); ++kk) {
        double sum = 0.0, count = 0.0;
        for (const auto& side : wdata[kk].side) {
            sum += side.sum();
            count += static_cast<double>((side.array() != 0.0).count());
        }
        EXPECT_NEAR(sum / count, 1.5, 1e-14);
    }
}

TEST(InformedLambdas, MatchesBruteForceRobinTraceOracle) {
    const Grid g(12, 12, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 2, 2, 1);
    const PermField k = random_perm(g, 47);
    const RobinSpec robin(3.0);
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    FlowField f;
    f.pressure.resize(g.cell_count());
    f.flux_x.resize(g.face_count(Axis::X));
    f.flux_y.resize(g.face_count(Axis::Y));
    for (auto* v : {&f.pressure, &f.flux_x, &f.flux_y}) {
        for (Eigen::Index kk = 0; kk < v->size(); ++kk) (*v)[kk] = dist(rng);
    }
    for (int i = 0; i < d.subdomain_count(); ++i) {
        const auto lambdas = informed_lambdas(d, k, robin, f, i);
        const auto& s = d.subdomain(i);
        Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.edges.size()));
        for (const auto& l : lambdas) total += l.values;
        for (size_t e = 0; e < s.edges.size(); ++e) {
            const FaceId face = s.edges[e].face;
            const auto cells = g.face_cells(face);
            const double ka = k.at(cells[0]);
            const double kb = k.at(cells[1]);
            const double pi = (ka * f.pressure[g.cell_index(cells[0])] +
                               kb * f.pressure[g.cell_index(cells[1])]) /
                              (ka + kb);
            const double q_out = s.edges[e].sign * f.flux(g, face);
            const double beta =
                3.0 * g.normal_spacing(face.axis) * (ka + kb) / (2.0 * ka * kb);
            EXPECT_NEAR(total[static_cast<Eigen::Index>(e)], -beta * q_out + pi, 1e-13);
        }
    }
}

TEST(WindowRobinTrace, ReproducesTheGeneratingField) {
    // Feeding a solved field's window Robin trace back into the local solver
    // must return the same field on the window: the informed construction's
    // fixed-point property.
    const Grid g(16, 16, 1.0, 1.0);
    const Decomposition d = build_decomposition(g, 2, 2, 2);
    const PermField k = random_perm(g, 53);
    const RobinSpec robin(10.0);
    const BoundarySpec physical = left_right_flow_bc(g);
    SourceField f(g);
    f.at({5, 10}) = 3.0;
    const FlowField fine = mrcmos::solve(mrcmos::assemble(g, k, physical, f));
    for (int i = 0; i < d.subdomain_count(); ++i) {
        const LocalSolver solver(d, k, robin, physical, i);
        const WindowTrace wt = window_robin_trace(d, k, robin, fine, i);
        const FlowField local = solver.solve(wt, solver.window_source(f, g), false);
        const Grid wgrid = solver.window_grid();
        const CellWindow w = solver.window();
        for (int c = 0; c < wgrid.cell_count(); ++c) {
            const double ref = fine.pressure[g.cell_index(w.to_global(wgrid.cell_at(c)))];
            EXPECT_NEAR(local.pressure[c], ref, 1e-11);
        }
        for (const Axis axis : {Axis::X, Axis::Y}) {
            for (int kk = 0; kk < wgrid.face_count(axis); ++kk) {
                const FaceId lf = wgrid.face_at(axis, kk);
                EXPECT_NEAR(local.flux(wgrid, lf), fine.flux(g, w.to_global(lf)), 1e-10);
            }
        }
    }
}

}  // namespace
