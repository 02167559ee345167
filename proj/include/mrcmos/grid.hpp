#pragma once

/// @file grid.hpp
/// @brief Uniform Cartesian mesh of a rectangular domain with cell and face
/// enumeration shared by every other component.
///
/// Faces are classified by the axis of their (fixed, global) unit normal:
/// x-normal faces separate horizontally adjacent cells, y-normal faces
/// vertically adjacent ones. Per-cell outward normals are expressed as a
/// +/-1 sign relative to the global normal of the face.

#include <array>
#include <stdexcept>
#include <string>

namespace mrcmos {

/// Axis of a face normal (global normals point in +x / +y).
enum class Axis { X, Y };

struct CellId {
    int i = 0;
    int j = 0;
    bool operator==(const CellId&) const = default;
};

/// Lattice coordinates of a face. An x-normal face (axis X) at (i, j) sits
/// between cells (i-1, j) and (i, j); i ranges over [0, nx]. A y-normal face
/// at (i, j) sits between cells (i, j-1) and (i, j); j ranges over [0, ny].
struct FaceId {
    Axis axis = Axis::X;
    int i = 0;
    int j = 0;
    bool operator==(const FaceId&) const = default;
};

/// One face of a cell together with the sign of the cell's outward normal
/// relative to the face's global normal.
struct CellFace {
    FaceId face;
    double outward_sign = 1.0;
};

class Grid {
public:
    Grid(int nx, int ny, double lx, double ly)
        : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
        if (nx < 1 || ny < 1 || !(lx > 0.0) || !(ly > 0.0)) {
            throw std::invalid_argument("Grid: cell counts must be >= 1 and extents > 0");
        }
        hx_ = lx_ / nx_;
        hy_ = ly_ / ny_;
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double lx() const { return lx_; }
    double ly() const { return ly_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }

    int cell_count() const { return nx_ * ny_; }
    int face_count(Axis axis) const {
        return axis == Axis::X ? (nx_ + 1) * ny_ : nx_ * (ny_ + 1);
    }

    double cell_volume() const { return hx_ * hy_; }

    /// Face measure (length in 2D), constant per axis on a uniform grid.
    double face_area(Axis axis) const { return axis == Axis::X ? hy_ : hx_; }

    /// Cell-center spacing across a face, along its normal.
    double normal_spacing(Axis axis) const { return axis == Axis::X ? hx_ : hy_; }

    bool cell_in_range(CellId c) const {
        return c.i >= 0 && c.i < nx_ && c.j >= 0 && c.j < ny_;
    }
    bool face_in_range(FaceId f) const {
        if (f.axis == Axis::X) return f.i >= 0 && f.i <= nx_ && f.j >= 0 && f.j < ny_;
        return f.i >= 0 && f.i < nx_ && f.j >= 0 && f.j <= ny_;
    }

    int cell_index(CellId c) const { return c.j * nx_ + c.i; }
    CellId cell_at(int index) const { return {index % nx_, index / nx_}; }

    int face_index(FaceId f) const {
        return f.axis == Axis::X ? f.j * (nx_ + 1) + f.i : f.j * nx_ + f.i;
    }
    FaceId face_at(Axis axis, int index) const {
        if (axis == Axis::X) return {axis, index % (nx_ + 1), index / (nx_ + 1)};
        return {axis, index % nx_, index / nx_};
    }

    bool is_boundary(FaceId f) const {
        if (f.axis == Axis::X) return f.i == 0 || f.i == nx_;
        return f.j == 0 || f.j == ny_;
    }

    /// The two cells adjacent to an interior face, ordered so the global
    /// normal points from first to second.
    std::array<CellId, 2> face_cells(FaceId f) const {
        if (is_boundary(f)) throw std::invalid_argument("face_cells: boundary face");
        if (f.axis == Axis::X) return {CellId{f.i - 1, f.j}, CellId{f.i, f.j}};
        return {CellId{f.i, f.j - 1}, CellId{f.i, f.j}};
    }

    /// The single cell adjacent to a boundary face.
    CellId boundary_cell(FaceId f) const {
        if (!is_boundary(f)) throw std::invalid_argument("boundary_cell: interior face");
        if (f.axis == Axis::X) return {f.i == 0 ? 0 : nx_ - 1, f.j};
        return {f.i, f.j == 0 ? 0 : ny_ - 1};
    }

    /// West, east, south, north faces of a cell with outward-normal signs.
    std::array<CellFace, 4> faces_of_cell(CellId c) const {
        if (!cell_in_range(c)) {
            throw std::invalid_argument("faces_of_cell: cell (" + std::to_string(c.i) +
                                        ", " + std::to_string(c.j) + ") out of range");
        }
        return {CellFace{{Axis::X, c.i, c.j}, -1.0}, CellFace{{Axis::X, c.i + 1, c.j}, 1.0},
                CellFace{{Axis::Y, c.i, c.j}, -1.0}, CellFace{{Axis::Y, c.i, c.j + 1}, 1.0}};
    }

    double cell_center_x(int i) const { return (i + 0.5) * hx_; }
    double cell_center_y(int j) const { return (j + 0.5) * hy_; }

private:
    int nx_, ny_;
    double lx_, ly_;
    double hx_, hy_;
};

/// Rectangular block of cells [i0, i0+nx) x [j0, j0+ny) within a parent grid.
struct CellWindow {
    int i0 = 0;
    int j0 = 0;
    int nx = 0;
    int ny = 0;

    bool operator==(const CellWindow&) const = default;

    bool contains(CellId c) const {
        return c.i >= i0 && c.i < i0 + nx && c.j >= j0 && c.j < j0 + ny;
    }
    bool contains(const CellWindow& other) const {
        return other.i0 >= i0 && other.j0 >= j0 && other.i0 + other.nx <= i0 + nx &&
               other.j0 + other.ny <= j0 + ny;
    }

    /// Expand by `l` cells per side, clipped to the parent grid.
    CellWindow expanded(int l, const Grid& grid) const {
        const int a = std::max(0, i0 - l);
        const int b = std::min(grid.nx(), i0 + nx + l);
        const int c = std::max(0, j0 - l);
        const int d = std::min(grid.ny(), j0 + ny + l);
        return {a, c, b - a, d - c};
    }

    /// Grid describing the window itself (same spacings as the parent).
    Grid local_grid(const Grid& parent) const {
        return Grid(nx, ny, nx * parent.hx(), ny * parent.hy());
    }

    CellId to_local(CellId global) const { return {global.i - i0, global.j - j0}; }
    CellId to_global(CellId local) const { return {local.i + i0, local.j + j0}; }
    FaceId to_local(FaceId global) const { return {global.axis, global.i - i0, global.j - j0}; }
    FaceId to_global(FaceId local) const { return {local.axis, local.i + i0, local.j + j0}; }
};

}  // namespace mrcmos
