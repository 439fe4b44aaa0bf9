"""Uniform staggered grid: geometry, field containers, ghost-cell boundary rules.

Layout conventions (Arakawa-C / MAC):
  * scalars (phase, chemical potential, pressure) live at cell centers,
    stored with one ghost ring: shape (nx+2, ny+2), interior [1:-1, 1:-1]
  * x-velocity u lives on x-faces: ext shape (nx+3, ny+2)
  * y-velocity v lives on y-faces: ext shape (nx+2, ny+3)
  * the magnetic field is a cell-centered vector (two ghosted scalars)
  * node scalars (curls, stream functions) sit on cell corners,
    shape (nx+1, ny+1), no ghosts

Index [i, j] means (x, y); flattening is C-order with i outermost.

Ghost fill order is fixed: y-sides first (interior columns), then x-sides
over all rows, so corner ghosts compose x-rule after y-rule.  The sparse
resolvers in this module reproduce exactly that order; operator matrices
built from them therefore agree with `apply_boundary` to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

BoundaryDatum = float | Callable[[np.ndarray, np.ndarray, float], np.ndarray]

# rule kinds accepted per field kind
_SCALAR_KINDS = ("periodic", "neumann", "dirichlet")
_VELOCITY_KINDS = ("periodic", "noslip", "slip")
_CELLVEC_KINDS = ("periodic", "tangential")


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid on [0, lx] x [0, ly] with nx x ny cells."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 cells per direction")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("domain lengths must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    # coordinate arrays --------------------------------------------------
    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def xf(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    @property
    def yf(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.dy

    def cell_mesh(self):
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def node_mesh(self):
        return np.meshgrid(self.xf, self.yf, indexing="ij")

    def xface_mesh(self):
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def yface_mesh(self):
        return np.meshgrid(self.xc, self.yf, indexing="ij")


def _normalize_side(rule, allowed):
    if isinstance(rule, str):
        kind, data = rule, 0.0
    else:
        kind, data = rule
    if kind not in allowed:
        raise ValueError(f"boundary kind {kind!r} not in {allowed}")
    return kind, data


@dataclass(frozen=True)
class BoundaryRule:
    """Per-side boundary rules for one field.

    Scalar sides: "periodic", ("neumann", flux), ("dirichlet", value).
    Velocity sides: "periodic", "noslip", "slip".
    Cell-vector sides: "periodic", ("tangential", (g1, g2)).
    Datum entries are constants or callables (x, y, t) -> array.
    """

    left: object = "neumann"
    right: object = "neumann"
    bottom: object = "neumann"
    top: object = "neumann"
    kind: str = "scalar"  # scalar | velocity | cellvec

    def __post_init__(self):
        allowed = {
            "scalar": _SCALAR_KINDS,
            "velocity": _VELOCITY_KINDS,
            "cellvec": _CELLVEC_KINDS,
        }[self.kind]
        sides = {}
        for name in ("left", "right", "bottom", "top"):
            sides[name] = _normalize_side(getattr(self, name), allowed)
            object.__setattr__(self, name, sides[name])
        if (sides["left"][0] == "periodic") != (sides["right"][0] == "periodic"):
            raise ValueError("periodic must pair on left/right")
        if (sides["bottom"][0] == "periodic") != (sides["top"][0] == "periodic"):
            raise ValueError("periodic must pair on bottom/top")

    @property
    def periodic_x(self) -> bool:
        return self.left[0] == "periodic"

    @property
    def periodic_y(self) -> bool:
        return self.bottom[0] == "periodic"

    def signature(self) -> tuple:
        """Structural key (kinds only) for operator caching."""
        return (self.kind, self.left[0], self.right[0], self.bottom[0], self.top[0])


def periodic_scalar() -> BoundaryRule:
    return BoundaryRule("periodic", "periodic", "periodic", "periodic")


def neumann_scalar(flux: BoundaryDatum = 0.0) -> BoundaryRule:
    s = ("neumann", flux)
    return BoundaryRule(s, s, s, s)


def noslip_velocity() -> BoundaryRule:
    return BoundaryRule("noslip", "noslip", "noslip", "noslip", kind="velocity")


def tangential_cellvec(g1: BoundaryDatum = 0.0, g2: BoundaryDatum = 0.0) -> BoundaryRule:
    s = ("tangential", (g1, g2))
    return BoundaryRule(s, s, s, s, kind="cellvec")


@dataclass
class ScalarField:
    """Cell-centered scalar with one ghost ring, or bare node scalar."""

    grid: GridSpec
    data: np.ndarray
    layout: str = "cell"  # cell | node

    @classmethod
    def zeros(cls, grid: GridSpec, layout: str = "cell") -> "ScalarField":
        if layout == "cell":
            data = np.zeros((grid.nx + 2, grid.ny + 2))
        elif layout == "node":
            data = np.zeros((grid.nx + 1, grid.ny + 1))
        else:
            raise ValueError(layout)
        return cls(grid, data, layout)

    @property
    def interior(self) -> np.ndarray:
        if self.layout == "cell":
            return self.data[1:-1, 1:-1]
        return self.data


@dataclass
class VectorField:
    """MAC face velocity (u, v) or cell-centered vector (two ghosted scalars)."""

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    kind: str = "mac"  # mac | cell

    @classmethod
    def zeros(cls, grid: GridSpec, kind: str = "mac") -> "VectorField":
        if kind == "mac":
            u = np.zeros((grid.nx + 3, grid.ny + 2))
            v = np.zeros((grid.nx + 2, grid.ny + 3))
        elif kind == "cell":
            u = np.zeros((grid.nx + 2, grid.ny + 2))
            v = np.zeros((grid.nx + 2, grid.ny + 2))
        else:
            raise ValueError(kind)
        return cls(grid, u, v, kind)


def _eval_datum(datum, x, y, t):
    if callable(datum):
        return np.asarray(datum(x, y, t), dtype=float)
    return np.full(np.broadcast(x, y).shape, float(datum))


def _fill_scalar_ghosts(grid: GridSpec, data: np.ndarray, rule: BoundaryRule, t: float):
    """Ghost ring of a cell scalar, in place.  y-sides first, then x-sides."""
    nx, ny = grid.nx, grid.ny
    dx, dy = grid.dx, grid.dy
    xc = grid.xc

    def one_side(sl_ghost, sl_int, kind, datum, x, y, h, sign):
        # sign: +1 outward-normal flux adds, Dirichlet reflects
        if kind == "neumann":
            data[sl_ghost] = data[sl_int] + h * _eval_datum(datum, x, y, t)
        elif kind == "dirichlet":
            data[sl_ghost] = 2.0 * _eval_datum(datum, x, y, t) - data[sl_int]
        else:
            raise AssertionError(kind)
        del sign

    # y-sides over interior columns
    if rule.periodic_y:
        data[1:-1, 0] = data[1:-1, ny]
        data[1:-1, -1] = data[1:-1, 1]
    else:
        kb, gb = rule.bottom
        kt, gt = rule.top
        one_side((slice(1, -1), 0), (slice(1, -1), 1), kb, gb, xc, 0.0, dy, +1)
        one_side((slice(1, -1), -1), (slice(1, -1), ny), kt, gt, xc, grid.ly, dy, +1)
    # x-sides over all rows (corners compose x-rule after y-rule)
    yall = (np.arange(ny + 2) - 0.5) * dy
    if rule.periodic_x:
        data[0, :] = data[nx, :]
        data[-1, :] = data[1, :]
    else:
        kl, gl = rule.left
        kr, gr = rule.right
        one_side((0, slice(None)), (1, slice(None)), kl, gl, 0.0, yall, dx, +1)
        one_side((-1, slice(None)), (nx, slice(None)), kr, gr, grid.lx, yall, dx, +1)


def _mac_shapes(grid: GridSpec, rule: BoundaryRule):
    """Interior unknown shapes for (u, v) under the velocity rule."""
    nxu = grid.nx if rule.periodic_x else grid.nx + 1
    nyv = grid.ny if rule.periodic_y else grid.ny + 1
    return (nxu, grid.ny), (grid.nx, nyv)


def _fill_mac_ghosts(grid: GridSpec, u: np.ndarray, v: np.ndarray, rule: BoundaryRule, t: float):
    """Ghost faces of a MAC velocity, in place.

    Normal components live on wall faces (no ghost rule; unknowns pinned by
    the solver).  Tangential ghosts reflect: noslip -> -interior,
    slip -> +interior.  Off-grid normal-face columns are zeroed: periodic
    topologies wrap them, wall topologies never reference them.
    """
    nx, ny = grid.nx, grid.ny
    (nxu, _), (_, nyv) = _mac_shapes(grid, rule)

    def tang(arr, axis, n_int, kb, kt):
        sl = [slice(None)] * 2
        lo, hi, first, last = 0, -1, 1, n_int

        def s(idx):
            out = sl.copy()
            out[axis] = idx
            return tuple(out)

        for ghost, inner, kind in ((lo, first, kb), (hi, last, kt)):
            if kind == "noslip":
                arr[s(ghost)] = -arr[s(inner)]
            elif kind == "slip":
                arr[s(ghost)] = arr[s(inner)]
            else:
                raise AssertionError(kind)

    # u: y-sides tangential
    if rule.periodic_y:
        u[:, 0] = u[:, ny]
        u[:, -1] = u[:, 1]
    else:
        tang(u, 1, ny, rule.bottom[0], rule.top[0])
    # u: x-ghost columns
    if rule.periodic_x:
        u[0, :] = u[nxu, :]
        u[nxu + 1, :] = u[1, :]
        u[nxu + 2, :] = u[2, :]
    else:
        u[0, :] = 0.0
        u[-1, :] = 0.0
    # v: x-sides tangential
    if rule.periodic_x:
        v[0, :] = v[nx, :]
        v[-1, :] = v[1, :]
    else:
        tang(v, 0, nx, rule.left[0], rule.right[0])
    # v: y-ghost rows
    if rule.periodic_y:
        v[:, 0] = v[:, nyv]
        v[:, nyv + 1] = v[:, 1]
        v[:, nyv + 2] = v[:, 2]
    else:
        v[:, 0] = 0.0
        v[:, -1] = 0.0
    del t


def _cellvec_component_rules(rule: BoundaryRule):
    """Split a cell-vector rule into two scalar rules.

    Tangential walls: on x-walls the tangential component is b2 (Dirichlet)
    while b1 mirrors; on y-walls b1 is Dirichlet and b2 mirrors.
    """

    def side(r, comp, wall_axis):
        kind, data = r
        if kind == "periodic":
            return "periodic"
        g1, g2 = data if isinstance(data, tuple) else (data, data)
        tangential_comp = 2 if wall_axis == 0 else 1
        if comp == tangential_comp:
            return ("dirichlet", g2 if comp == 2 else g1)
        return ("neumann", 0.0)

    r1 = BoundaryRule(
        side(rule.left, 1, 0), side(rule.right, 1, 0),
        side(rule.bottom, 1, 1), side(rule.top, 1, 1))
    r2 = BoundaryRule(
        side(rule.left, 2, 0), side(rule.right, 2, 0),
        side(rule.bottom, 2, 1), side(rule.top, 2, 1))
    return r1, r2


def apply_boundary(field, rule: BoundaryRule, t: float = 0.0):
    """Fill the ghost layer of `field` in place according to `rule`.

    Interior values are never touched; calling twice is a no-op for the
    second call (ghosts are recomputed from the same interior).
    """
    if isinstance(field, ScalarField):
        if field.layout != "cell":
            return field  # node fields carry no ghosts
        if rule.kind != "scalar":
            raise ValueError("scalar field needs a scalar rule")
        _fill_scalar_ghosts(field.grid, field.data, rule, t)
    elif isinstance(field, VectorField):
        if field.kind == "mac":
            if rule.kind != "velocity":
                raise ValueError("MAC field needs a velocity rule")
            _fill_mac_ghosts(field.grid, field.u, field.v, rule, t)
        else:
            if rule.kind != "cellvec":
                raise ValueError("cell vector needs a cellvec rule")
            r1, r2 = _cellvec_component_rules(rule)
            _fill_scalar_ghosts(field.grid, field.u, r1, t)
            _fill_scalar_ghosts(field.grid, field.v, r2, t)
    else:
        raise TypeError(type(field))
    return field


def integrate(field) -> float | tuple:
    """Integral by the native quadrature (midpoint per cell / face)."""
    g = field.grid
    if isinstance(field, ScalarField):
        if field.layout == "cell":
            return float(field.data[1:-1, 1:-1].sum() * g.cell_volume)
        w = node_weights(g, periodic_x=False, periodic_y=False)
        return float((w * field.data).sum() * g.cell_volume)
    if isinstance(field, VectorField):
        if field.kind == "mac":
            return (float(field.u[1:-1, 1:-1].sum() * g.cell_volume),
                    float(field.v[1:-1, 1:-1].sum() * g.cell_volume))
        return (float(field.u[1:-1, 1:-1].sum() * g.cell_volume),
                float(field.v[1:-1, 1:-1].sum() * g.cell_volume))
    raise TypeError(type(field))


def node_shape(grid: GridSpec, periodic_x: bool, periodic_y: bool):
    return (grid.nx if periodic_x else grid.nx + 1,
            grid.ny if periodic_y else grid.ny + 1)


def node_weights(grid: GridSpec, periodic_x: bool, periodic_y: bool) -> np.ndarray:
    """Trapezoid node weights: 1 interior, 1/2 edges, 1/4 corners.

    These are exactly the weights under which the node curl and its
    transpose form an adjoint pair; periodic directions are uniform.
    """
    shape = node_shape(grid, periodic_x, periodic_y)
    wx = np.ones(shape[0])
    wy = np.ones(shape[1])
    if not periodic_x:
        wx[0] = wx[-1] = 0.5
    if not periodic_y:
        wy[0] = wy[-1] = 0.5
    return wx[:, None] * wy[None, :]


# --------------------------------------------------------------------------
# sparse ghost resolvers: ext_flat = R @ int_flat + affine(t)
# --------------------------------------------------------------------------

@dataclass
class GhostResolver:
    """Linear map from interior unknowns to the ghosted (extended) array."""

    grid: GridSpec
    int_shape: tuple
    ext_shape: tuple
    matrix: sp.csr_matrix
    affine: Callable[[float], np.ndarray] = field(repr=False, default=None)

    def extend(self, interior: np.ndarray, t: float = 0.0) -> np.ndarray:
        out = self.matrix @ interior.reshape(-1)
        if self.affine is not None:
            out = out + self.affine(t)
        return out.reshape(self.ext_shape)

    def has_affine(self) -> bool:
        return self.affine is not None


def _coo_from_ext(grid, ext_shape, int_shape, entries):
    rows, cols, vals = [], [], []
    for ext_idx, int_idx, coef in entries:
        rows.append(np.ravel_multi_index(ext_idx, ext_shape).ravel())
        cols.append(np.ravel_multi_index(int_idx, int_shape).ravel())
        vals.append(np.broadcast_to(coef, rows[-1].shape).ravel().astype(float))
    n_ext = int(np.prod(ext_shape))
    n_int = int(np.prod(int_shape))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_ext, n_int))
    return mat.tocsr()


def scalar_resolver(grid: GridSpec, rule: BoundaryRule) -> GhostResolver:
    """Resolver for a ghosted cell scalar."""
    nx, ny = grid.nx, grid.ny
    ext_shape = (nx + 2, ny + 2)
    int_shape = (nx, ny)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    entries = [((ii + 1, jj + 1), (ii, jj), 1.0)]

    def side_coef(kind):
        return {"neumann": 1.0, "dirichlet": -1.0}[kind]

    i_all = np.arange(nx)
    # y-sides, interior columns
    if rule.periodic_y:
        entries.append(((i_all + 1, np.zeros(nx, int)), (i_all, np.full(nx, ny - 1)), 1.0))
        entries.append(((i_all + 1, np.full(nx, ny + 1)), (i_all, np.zeros(nx, int)), 1.0))
        cb = ct = 1.0
        jb_src, jt_src = ny - 1, 0
    else:
        cb, ct = side_coef(rule.bottom[0]), side_coef(rule.top[0])
        jb_src, jt_src = 0, ny - 1
        entries.append(((i_all + 1, np.zeros(nx, int)), (i_all, np.full(nx, jb_src)), cb))
        entries.append(((i_all + 1, np.full(nx, ny + 1)), (i_all, np.full(nx, jt_src)), ct))
    # x-sides, all rows: compose through the adjacent column's resolution
    j_ext = np.arange(ny + 2)
    j_src = np.clip(j_ext - 1, 0, ny - 1)
    ycoef = np.ones(ny + 2)
    if rule.periodic_y:
        j_src = (j_ext - 1) % ny
    else:
        ycoef[0] = cb
        ycoef[-1] = ct
        j_src = j_src.copy()
        j_src[0] = jb_src
        j_src[-1] = jt_src
    if rule.periodic_x:
        entries.append(((np.zeros(ny + 2, int), j_ext), (np.full(ny + 2, nx - 1), j_src), ycoef))
        entries.append(((np.full(ny + 2, nx + 1), j_ext), (np.zeros(ny + 2, int), j_src), ycoef))
    else:
        cl, cr = side_coef(rule.left[0]), side_coef(rule.right[0])
        entries.append(((np.zeros(ny + 2, int), j_ext), (np.zeros(ny + 2, int), j_src), cl * ycoef))
        entries.append(((np.full(ny + 2, nx + 1), j_ext), (np.full(ny + 2, nx - 1), j_src), cr * ycoef))

    R = _coo_from_ext(grid, ext_shape, int_shape, entries)

    affine = None
    if _scalar_rule_has_data(rule):
        def affine_fn(t: float) -> np.ndarray:
            ext = np.zeros(ext_shape)
            _fill_scalar_ghosts(grid, ext, rule, t)  # interior zero -> pure affine part
            return ext.reshape(-1)
        affine = affine_fn
    return GhostResolver(grid, int_shape, ext_shape, R, affine)


def _scalar_rule_has_data(rule: BoundaryRule) -> bool:
    for name in ("left", "right", "bottom", "top"):
        kind, data = getattr(rule, name)
        if kind == "periodic":
            continue
        if callable(data) or float(data) != 0.0:
            return True
    return False


def mac_resolver(grid: GridSpec, rule: BoundaryRule):
    """Resolvers (Ru, Rv) for the two MAC components.

    Wall topologies keep the wall faces as interior unknowns; the
    off-grid normal-face columns resolve to zero (rows left empty).
    Velocity rules carry no inhomogeneous data, so there is no affine part.
    """
    nx, ny = grid.nx, grid.ny
    (nxu, _), (_, nyv) = _mac_shapes(grid, rule)

    def tang_coef(kind):
        return {"noslip": -1.0, "slip": 1.0}[kind]

    # u component -------------------------------------------------------
    ext_u = (nx + 3, ny + 2)
    int_u = (nxu, ny)
    iu, ju = np.meshgrid(np.arange(nxu), np.arange(ny), indexing="ij")
    entries = [((iu + 1, ju + 1), (iu, ju), 1.0)]
    i_all = np.arange(nxu)
    if rule.periodic_y:
        entries.append(((i_all + 1, np.zeros(nxu, int)), (i_all, np.full(nxu, ny - 1)), 1.0))
        entries.append(((i_all + 1, np.full(nxu, ny + 1)), (i_all, np.zeros(nxu, int)), 1.0))
        ub_coef = ut_coef = 1.0
        jb_src, jt_src = ny - 1, 0
    else:
        ub_coef, ut_coef = tang_coef(rule.bottom[0]), tang_coef(rule.top[0])
        jb_src, jt_src = 0, ny - 1
        entries.append(((i_all + 1, np.zeros(nxu, int)), (i_all, np.zeros(nxu, int)), ub_coef))
        entries.append(((i_all + 1, np.full(nxu, ny + 1)), (i_all, np.full(nxu, jt_src)), ut_coef))
    if rule.periodic_x:
        j_ext = np.arange(ny + 2)
        j_src = (j_ext - 1) % ny if rule.periodic_y else np.clip(j_ext - 1, 0, ny - 1)
        ycoef = np.ones(ny + 2)
        if not rule.periodic_y:
            ycoef[0], ycoef[-1] = ub_coef, ut_coef
            j_src = j_src.copy()
            j_src[0], j_src[-1] = jb_src, jt_src
        for ext_col, src_col in ((0, nxu - 1), (nxu + 1, 0), (nxu + 2, 1)):
            entries.append(((np.full(ny + 2, ext_col), j_ext), (np.full(ny + 2, src_col), j_src), ycoef))
    Ru = GhostResolver(grid, int_u, ext_u, _coo_from_ext(grid, ext_u, int_u, entries))

    # v component -------------------------------------------------------
    ext_v = (nx + 2, ny + 3)
    int_v = (nx, nyv)
    iv, jv = np.meshgrid(np.arange(nx), np.arange(nyv), indexing="ij")
    entries = [((iv + 1, jv + 1), (iv, jv), 1.0)]
    j_all = np.arange(nyv)
    if rule.periodic_x:
        entries.append(((np.zeros(nyv, int), j_all + 1), (np.full(nyv, nx - 1), j_all), 1.0))
        entries.append(((np.full(nyv, nx + 1), j_all + 1), (np.zeros(nyv, int), j_all), 1.0))
        vl_coef = vr_coef = 1.0
        il_src, ir_src = nx - 1, 0
    else:
        vl_coef, vr_coef = tang_coef(rule.left[0]), tang_coef(rule.right[0])
        il_src, ir_src = 0, nx - 1
        entries.append(((np.zeros(nyv, int), j_all + 1), (np.zeros(nyv, int), j_all), vl_coef))
        entries.append(((np.full(nyv, nx + 1), j_all + 1), (np.full(nyv, ir_src), j_all), vr_coef))
    if rule.periodic_y:
        i_ext = np.arange(nx + 2)
        i_src = (i_ext - 1) % nx if rule.periodic_x else np.clip(i_ext - 1, 0, nx - 1)
        xcoef = np.ones(nx + 2)
        if not rule.periodic_x:
            xcoef[0], xcoef[-1] = vl_coef, vr_coef
            i_src = i_src.copy()
            i_src[0], i_src[-1] = il_src, ir_src
        for ext_row, src_row in ((0, nyv - 1), (nyv + 1, 0), (nyv + 2, 1)):
            entries.append(((i_ext, np.full(nx + 2, ext_row)), (i_src, np.full(nx + 2, src_row)), xcoef))
    Rv = GhostResolver(grid, int_v, ext_v, _coo_from_ext(grid, ext_v, int_v, entries))
    return Ru, Rv


def cellvec_resolver(grid: GridSpec, rule: BoundaryRule):
    """Resolvers (R1, R2) for the two components of a cell-centered vector."""
    r1, r2 = _cellvec_component_rules(rule)
    return scalar_resolver(grid, r1), scalar_resolver(grid, r2)
