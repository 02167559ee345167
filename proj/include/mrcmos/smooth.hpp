/// @file smooth.hpp
/// @brief Multiplicative Schwarz smoothing of a global flow field over the
/// oversampled subdomain windows.

#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrcmos/basis.hpp"
#include "mrcmos/decomp.hpp"
#include "mrcmos/fineop.hpp"
#include "mrcmos/grid.hpp"

namespace mrcmos {

/// Sequential multiplicative Schwarz sweep over the windows of a
/// decomposition. Each subdomain solve uses Dirichlet transmission data taken
/// from the current, partially updated field; the window factorizations are
/// built once and reused across sweeps.
class Smoother {
public:
    Smoother(const Decomposition& decomp, const PermField& perm, const BoundarySpec& physical_bc,
             const SourceField& f)
        : grid_(decomp.grid()), perm_(perm) {
        locals_.reserve(static_cast<size_t>(decomp.subdomain_count()));
        for (int i = 0; i < decomp.subdomain_count(); ++i) {
            LocalProblem lp{decomp.subdomain(i).window,
                            decomp.subdomain(i).window.local_grid(grid_),
                            BoundarySpec(decomp.subdomain(i).window.local_grid(grid_)),
                            {},
                            f.window(decomp.subdomain(i).window, grid_),
                            nullptr};
            for (const Side s : kSides) {
                const int sd = static_cast<int>(s);
                lp.physical_side[sd] = detail::window_side_physical(decomp, lp.window, s);
                const int len = detail::window_side_length(lp.window, s);
                for (int t = 0; t < len; ++t) {
                    const FaceId f_g = detail::window_side_face(lp.window, s, t);
                    lp.template_bc.side(s)[static_cast<size_t>(t)] =
                        lp.physical_side[sd] ? physical_bc.at(f_g) : FaceBC::dirichlet(0.0);
                }
            }
            lp.solver = std::make_unique<WindowSolver>(
                lp.wgrid, perm_.window(lp.window, grid_), lp.template_bc);
            locals_.push_back(std::move(lp));
        }
    }

    const Grid& grid() const { return grid_; }

    /// One multiplicative sweep in subdomain index order, in place.
    void sweep(FlowField& field) const {
        for (const auto& lp : locals_) {
            BoundarySpec bc = lp.template_bc;
            for (const Side s : kSides) {
                if (lp.physical_side[static_cast<int>(s)]) continue;
                auto& faces = bc.side(s);
                for (int t = 0; t < static_cast<int>(faces.size()); ++t) {
                    const FaceId f_g = detail::window_side_face(lp.window, s, t);
                    faces[static_cast<size_t>(t)].value =
                        detail::interface_pressure(grid_, perm_, field.pressure, f_g);
                }
            }
            const FlowField wf = lp.solver->solve(bc, lp.wsource);
            write_back(lp, wf, field);
        }
    }

    /// Returns the field after `k` sweeps; `k = 0` is the identity.
    FlowField apply(FlowField field, int k) const {
        if (k < 0) {
            throw std::invalid_argument("Smoother: negative step count");
        }
        for (int s = 0; s < k; ++s) {
            sweep(field);
        }
        return field;
    }

private:
    struct LocalProblem {
        CellWindow window;
        Grid wgrid;
        BoundarySpec template_bc;
        std::array<bool, 4> physical_side;
        SourceField wsource;
        std::unique_ptr<WindowSolver> solver;
    };

    void write_back(const LocalProblem& lp, const FlowField& wf, FlowField& field) const {
        const Grid& wg = lp.wgrid;
        for (int c = 0; c < wg.cell_count(); ++c) {
            const CellId g = lp.window.to_global(wg.cell_at(c));
            field.pressure[grid_.cell_index(g)] = wf.pressure[c];
        }
        for (int j = 0; j < wg.ny(); ++j) {
            for (int i = 0; i <= wg.nx(); ++i) {
                const FaceId lf{Axis::X, i, j};
                field.flux_x[grid_.face_index(lp.window.to_global(lf))] =
                    wf.flux_x[wg.face_index(lf)];
            }
        }
        for (int j = 0; j <= wg.ny(); ++j) {
            for (int i = 0; i < wg.nx(); ++i) {
                const FaceId lf{Axis::Y, i, j};
                field.flux_y[grid_.face_index(lp.window.to_global(lf))] =
                    wf.flux_y[wg.face_index(lf)];
            }
        }
    }

    Grid grid_;
    PermField perm_;
    std::vector<LocalProblem> locals_;
};

/// One smoothing sweep of `field` (multiplicative Schwarz over the windows).
inline FlowField smooth_once(const FlowField& field, const Decomposition& decomp,
                             const PermField& perm, const BoundarySpec& physical_bc,
                             const SourceField& f) {
    const Smoother s(decomp, perm, physical_bc, f);
    FlowField out = field;
    s.sweep(out);
    return out;
}

/// `k` smoothing sweeps of `field`; `k = 0` returns the input unchanged.
inline FlowField smooth(const FlowField& field, int k, const Decomposition& decomp,
                        const PermField& perm, const BoundarySpec& physical_bc,
                        const SourceField& f) {
    const Smoother s(decomp, perm, physical_bc, f);
    return s.apply(field, k);
}

}  // namespace mrcmos
