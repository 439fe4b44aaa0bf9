"""Second-order staggered-grid operators and their sparse assemblies.

Two routes to every operator:

  * array functions that read ghost-filled fields directly (used in tests
    and for explicit right-hand-side terms), and
  * sparse matrices acting on flattened interior unknowns, built as
    <geometric stencil on the extended array> @ <ghost resolver>, cached
    per boundary signature inside `StencilContext`.

Exactness commitments (the time schemes lean on these; tests pin them):

  * div_from_faces is the negative transpose of grad_to_faces on matching
    face sets (closed boundary / periodic wrap),
  * the node curl of a cell vector and the plain cell curl of a node scalar
    are adjoint under trapezoid node weights: P == C.T @ diag(omega),
  * advect_skew is antisymmetric as a bilinear form for any velocity,
    by construction A = (T - T.T)/2 of the conservative form.

Face vectors are stacked [x-faces; y-faces] in C-order, matching the
velocity unknown layout.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid import (
    BoundaryRule,
    GhostResolver,
    GridSpec,
    ScalarField,
    VectorField,
    _mac_shapes,
    cellvec_resolver,
    mac_resolver,
    node_shape,
    node_weights,
    scalar_resolver,
)

__all__ = [
    "StencilContext",
    "laplacian",
    "grad_to_faces",
    "div_from_faces",
    "curl_scalar",
    "curl_of_scalar",
    "advect_skew",
    "cross_lorentz",
    "cells_to_nodes",
    "faces_to_cell_centers",
]


# --------------------------------------------------------------------------
# array-path operators (ghosts must be filled beforehand)
# --------------------------------------------------------------------------

def laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian of a ghosted cell scalar; ghost ring of the result is 0."""
    g = f.grid
    a = f.data
    out = ScalarField.zeros(g)
    out.data[1:-1, 1:-1] = (
        (a[2:, 1:-1] - 2.0 * a[1:-1, 1:-1] + a[:-2, 1:-1]) / g.dx**2
        + (a[1:-1, 2:] - 2.0 * a[1:-1, 1:-1] + a[1:-1, :-2]) / g.dy**2
    )
    return out


def grad_to_faces(f: ScalarField, periodic_x: bool = False, periodic_y: bool = False):
    """Face-normal differences of a ghosted cell scalar.

    Returns (gx, gy) on the scalar's face set: gx has nx+1 columns on a
    closed x-direction (wall faces differenced against ghosts) or nx on a
    periodic one, likewise gy.
    """
    g = f.grid
    a = f.data
    nx, ny = g.nx, g.ny
    nfx = nx if periodic_x else nx + 1
    nfy = ny if periodic_y else ny + 1
    gx = (a[1:nfx + 1, 1:-1] - a[0:nfx, 1:-1]) / g.dx
    gy = (a[1:-1, 1:nfy + 1] - a[1:-1, 0:nfy]) / g.dy
    return gx, gy


def div_from_faces(grid: GridSpec, fu: np.ndarray, fv: np.ndarray) -> np.ndarray:
    """Cell divergence of face-normal data; periodicity inferred from shape."""
    nx, ny = grid.nx, grid.ny
    if fu.shape[0] == nx + 1:
        dux = (fu[1:, :] - fu[:-1, :]) / grid.dx
    elif fu.shape[0] == nx:
        dux = (np.roll(fu, -1, axis=0) - fu) / grid.dx
    else:
        raise ValueError(f"bad x-face count {fu.shape}")
    if fv.shape[1] == ny + 1:
        dvy = (fv[:, 1:] - fv[:, :-1]) / grid.dy
    elif fv.shape[1] == ny:
        dvy = (np.roll(fv, -1, axis=1) - fv) / grid.dy
    else:
        raise ValueError(f"bad y-face count {fv.shape}")
    return dux + dvy


def curl_scalar(b: VectorField, periodic_x: bool = False, periodic_y: bool = False) -> np.ndarray:
    """Scalar curl d(b2)/dx - d(b1)/dy of a ghosted cell vector, at nodes."""
    g = b.grid
    nnx, nny = node_shape(g, periodic_x, periodic_y)
    b1, b2 = b.u, b.v
    i = np.arange(nnx)[:, None]
    j = np.arange(nny)[None, :]
    east = 0.5 * (b2[i + 1, j] + b2[i + 1, j + 1])
    west = 0.5 * (b2[i, j] + b2[i, j + 1])
    north = 0.5 * (b1[i, j + 1] + b1[i + 1, j + 1])
    south = 0.5 * (b1[i, j] + b1[i + 1, j])
    return (east - west) / g.dx - (north - south) / g.dy


def curl_of_scalar(grid: GridSpec, s: np.ndarray) -> tuple:
    """Vector curl (ds/dy, -ds/dx) of a node scalar, at cell centers.

    Plain 4-corner stencil; needs no ghosts.  Periodic node layouts
    (nx, ny) wrap, closed layouts (nx+1, ny+1) use the boundary nodes.
    """
    nx, ny = grid.nx, grid.ny
    if s.shape[0] == nx:
        s = np.vstack([s, s[:1, :]])
    if s.shape[1] == ny:
        s = np.hstack([s, s[:, :1]])
    c1 = (s[:-1, 1:] + s[1:, 1:] - s[:-1, :-1] - s[1:, :-1]) / (2.0 * grid.dy)
    c2 = -(s[1:, :-1] + s[1:, 1:] - s[:-1, :-1] - s[:-1, 1:]) / (2.0 * grid.dx)
    return c1, c2


def cells_to_nodes(grid: GridSpec, a: np.ndarray, periodic_x: bool = False,
                   periodic_y: bool = False) -> np.ndarray:
    """4-cell average of a ghosted cell scalar at nodes."""
    nnx, nny = node_shape(grid, periodic_x, periodic_y)
    i = np.arange(nnx)[:, None]
    j = np.arange(nny)[None, :]
    return 0.25 * (a[i, j] + a[i + 1, j] + a[i, j + 1] + a[i + 1, j + 1])


def nodes_to_cells(grid: GridSpec, s: np.ndarray) -> np.ndarray:
    """4-node average of a node scalar at cell centers (wraps periodic layouts)."""
    nx, ny = grid.nx, grid.ny
    if s.shape[0] == nx:
        s = np.vstack([s, s[:1, :]])
    if s.shape[1] == ny:
        s = np.hstack([s, s[:, :1]])
    return 0.25 * (s[:-1, :-1] + s[1:, :-1] + s[:-1, 1:] + s[1:, 1:])


def cross_lorentz(b: VectorField, s_node: np.ndarray):
    """b x (curl b) for a ghosted cell vector b and node scalar s = curl b.

    s is first averaged to cell centers; the result (b2*s, -b1*s) sits at
    cell centers (interior layout).
    """
    g = b.grid
    sc = nodes_to_cells(g, s_node)
    return b.v[1:-1, 1:-1] * sc, -b.u[1:-1, 1:-1] * sc


def faces_to_cell_centers(grid: GridSpec, fu: np.ndarray, fv: np.ndarray):
    """2-point averages of face data at cell centers (both components)."""
    nx, ny = grid.nx, grid.ny
    if fu.shape[0] == nx + 1:
        uc = 0.5 * (fu[1:, :] + fu[:-1, :])
    else:
        uc = 0.5 * (np.roll(fu, -1, axis=0) + fu)
    if fv.shape[1] == ny + 1:
        vc = 0.5 * (fv[:, 1:] + fv[:, :-1])
    else:
        vc = 0.5 * (np.roll(fv, -1, axis=1) + fv)
    return uc, vc


# --------------------------------------------------------------------------
# sparse stencil assembly
# --------------------------------------------------------------------------

def _coo(out_shape, ext_shape, terms) -> sp.csr_matrix:
    """COO assembly: terms are (out_index_arrays, ext_index_arrays, coefs)."""
    rows, cols, vals = [], [], []
    for out_idx, ext_idx, coef in terms:
        r = np.ravel_multi_index(out_idx, out_shape)
        c = np.ravel_multi_index(ext_idx, ext_shape)
        r, c = np.broadcast_arrays(r, c)
        v = np.broadcast_to(coef, r.shape)
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.asarray(v, dtype=float).ravel())
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(int(np.prod(out_shape)), int(np.prod(ext_shape))))
    return m.tocsr()


class StencilContext:
    """Cached sparse operators for one grid and one set of field rules.

    `rules` maps field names ("phi", "w", "p", "vel", "b", ...) to their
    BoundaryRule.  The context is immutable once built; every matrix it
    hands out shares the same spacings and ghost conventions.
    """

    def __init__(self, grid: GridSpec, rules: dict):
        self.grid = grid
        self.rules = dict(rules)
        self._cache = {}

    def _memo(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    def rule(self, name: str) -> BoundaryRule:
        return self.rules[name]

    # resolvers ----------------------------------------------------------
    def resolver(self, name: str):
        rule = self.rule(name)
        if rule.kind == "scalar":
            return self._memo(("res", name), lambda: scalar_resolver(self.grid, rule))
        if rule.kind == "velocity":
            return self._memo(("res", name), lambda: mac_resolver(self.grid, rule))
        return self._memo(("res", name), lambda: cellvec_resolver(self.grid, rule))

    # face sets ------------------------------------------------------------
    def face_shapes(self, topo_rule: BoundaryRule):
        g = self.grid
        nfx = g.nx if topo_rule.periodic_x else g.nx + 1
        nfy = g.ny if topo_rule.periodic_y else g.ny + 1
        return (nfx, g.ny), (g.nx, nfy)

    def n_faces(self, topo_rule: BoundaryRule) -> int:
        (a, b), (c, d) = self.face_shapes(topo_rule)
        return a * b + c * d

    def split_faces(self, topo_rule: BoundaryRule, vec: np.ndarray):
        shx, shy = self.face_shapes(topo_rule)
        nx_ = shx[0] * shx[1]
        return vec[:nx_].reshape(shx), vec[nx_:].reshape(shy)

    def join_faces(self, fu: np.ndarray, fv: np.ndarray) -> np.ndarray:
        return np.concatenate([fu.ravel(), fv.ravel()])

    # gradient / average / divergence --------------------------------------
    def _grad_stencil(self, topo_rule: BoundaryRule) -> sp.csr_matrix:
        def build():
            g = self.grid
            shx, shy = self.face_shapes(topo_rule)
            ext = (g.nx + 2, g.ny + 2)
            i, j = np.meshgrid(np.arange(shx[0]), np.arange(shx[1]), indexing="ij")
            termsx = [((i, j), (i + 1, j + 1), 1.0 / g.dx),
                      ((i, j), (i, j + 1), -1.0 / g.dx)]
            gx = _coo(shx, ext, termsx)
            i, j = np.meshgrid(np.arange(shy[0]), np.arange(shy[1]), indexing="ij")
            termsy = [((i, j), (i + 1, j + 1), 1.0 / g.dy),
                      ((i, j), (i + 1, j), -1.0 / g.dy)]
            gy = _coo(shy, ext, termsy)
            return sp.vstack([gx, gy]).tocsr()
        return self._memo(("grad_st", topo_rule.signature()), build)

    def _avg_stencil(self, topo_rule: BoundaryRule) -> sp.csr_matrix:
        def build():
            g = self.grid
            shx, shy = self.face_shapes(topo_rule)
            ext = (g.nx + 2, g.ny + 2)
            i, j = np.meshgrid(np.arange(shx[0]), np.arange(shx[1]), indexing="ij")
            ax = _coo(shx, ext, [((i, j), (i + 1, j + 1), 0.5), ((i, j), (i, j + 1), 0.5)])
            i, j = np.meshgrid(np.arange(shy[0]), np.arange(shy[1]), indexing="ij")
            ay = _coo(shy, ext, [((i, j), (i + 1, j + 1), 0.5), ((i, j), (i + 1, j), 0.5)])
            return sp.vstack([ax, ay]).tocsr()
        return self._memo(("avg_st", topo_rule.signature()), build)

    def grad_mat(self, name: str, topo: str | None = None) -> sp.csr_matrix:
        """Cells -> stacked faces; face set from `topo` (default: own rule)."""
        topo_rule = self.rule(topo or name)
        key = ("grad", name, topo_rule.signature())
        return self._memo(key, lambda: (self._grad_stencil(topo_rule)
                                        @ self.resolver(name).matrix).tocsr())

    def grad_affine(self, name: str, t: float, topo: str | None = None) -> np.ndarray:
        """Affine face contribution from inhomogeneous ghost data (or zeros)."""
        res = self.resolver(name)
        topo_rule = self.rule(topo or name)
        if not res.has_affine():
            return np.zeros(self.n_faces(topo_rule))
        return self._grad_stencil(topo_rule) @ res.affine(t)

    def avg_mat(self, name: str, topo: str | None = None) -> sp.csr_matrix:
        topo_rule = self.rule(topo or name)
        key = ("avg", name, topo_rule.signature())
        return self._memo(key, lambda: (self._avg_stencil(topo_rule)
                                        @ self.resolver(name).matrix).tocsr())

    def div_mat(self, topo_name: str) -> sp.csr_matrix:
        """Stacked faces -> cells; transpose-negative of the matching gradient."""
        topo_rule = self.rule(topo_name)

        def build():
            g = self.grid
            shx, shy = self.face_shapes(topo_rule)
            nfx = shx[0] * shx[1]
            cells = (g.nx, g.ny)
            i, j = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")

            def fid_x(ii, jj):
                return (ii % shx[0]) * shx[1] + jj

            def fid_y(ii, jj):
                return nfx + ii * shy[1] + (jj % shy[1])

            rows = np.ravel_multi_index((i, j), cells).ravel()
            data = []
            for fid, coef in (
                (fid_x(i + 1, j), 1.0 / g.dx), (fid_x(i, j), -1.0 / g.dx),
                (fid_y(i, j + 1), 1.0 / g.dy), (fid_y(i, j), -1.0 / g.dy),
            ):
                data.append((rows, fid.ravel(), np.full(rows.shape, coef)))
            m = sp.coo_matrix(
                (np.concatenate([d[2] for d in data]),
                 (np.concatenate([d[0] for d in data]),
                  np.concatenate([d[1] for d in data]))),
                shape=(g.n_cells, self.n_faces(topo_rule)))
            return m.tocsr()

        return self._memo(("div", topo_rule.signature()), build)

    def lap_mat(self, name: str) -> sp.csr_matrix:
        key = ("lap", name)
        return self._memo(key, lambda: (self.div_mat(name) @ self.grad_mat(name)).tocsr())

    def lap_affine(self, name: str, t: float) -> np.ndarray:
        if not self.resolver(name).has_affine():
            return np.zeros(self.grid.n_cells)
        return self.div_mat(name) @ self.grad_affine(name, t)

    # curl pair ------------------------------------------------------------
    def node_topo(self, name: str = "b"):
        rule = self.rule(name)
        return rule.periodic_x, rule.periodic_y

    def omega(self, name: str = "b") -> np.ndarray:
        px, py = self.node_topo(name)
        return self._memo(("omega", name),
                          lambda: node_weights(self.grid, px, py).ravel())

    def _curl_stencil(self, name: str = "b") -> sp.csr_matrix:
        def build():
            g = self.grid
            px, py = self.node_topo(name)
            nsh = node_shape(g, px, py)
            ext = (g.nx + 2, g.ny + 2)
            n_ext = (g.nx + 2) * (g.ny + 2)
            i, j = np.meshgrid(np.arange(nsh[0]), np.arange(nsh[1]), indexing="ij")
            # d(b2)/dx part (second ext block), -d(b1)/dy part (first block)
            cx, cy = 0.5 / g.dx, 0.5 / g.dy
            terms = []
            for di, dj, c1, c2 in (
                (0, 0, cy, -cx), (1, 0, cy, cx), (0, 1, -cy, -cx), (1, 1, -cy, cx),
            ):
                eid = np.ravel_multi_index((i + di, j + dj), ext)
                nid = np.ravel_multi_index((i, j), nsh)
                terms.append((nid.ravel(), eid.ravel(), np.full(nid.size, c1)))
                terms.append((nid.ravel(), eid.ravel() + n_ext, np.full(nid.size, c2)))
            m = sp.coo_matrix(
                (np.concatenate([t[2] for t in terms]),
                 (np.concatenate([t[0] for t in terms]),
                  np.concatenate([t[1] for t in terms]))),
                shape=(nsh[0] * nsh[1], 2 * n_ext))
            return m.tocsr()
        return self._memo(("curl_st", name), build)

    def curl_mat(self, name: str = "b") -> sp.csr_matrix:
        """Node curl of the interior cell-vector unknowns [b1; b2]."""
        def build():
            r1, r2 = self.resolver(name)
            R = sp.block_diag([r1.matrix, r2.matrix]).tocsr()
            return (self._curl_stencil(name) @ R).tocsr()
        return self._memo(("curl", name), build)

    def curl_affine(self, name: str, t: float) -> np.ndarray:
        r1, r2 = self.resolver(name)
        if not (r1.has_affine() or r2.has_affine()):
            px, py = self.node_topo(name)
            nsh = node_shape(self.grid, px, py)
            return np.zeros(nsh[0] * nsh[1])
        a1 = r1.affine(t) if r1.has_affine() else np.zeros(r1.matrix.shape[0])
        a2 = r2.affine(t) if r2.has_affine() else np.zeros(r2.matrix.shape[0])
        return self._curl_stencil(name) @ np.concatenate([a1, a2])

    def curl_of_mat(self, name: str = "b") -> sp.csr_matrix:
        """Plain 4-corner curl of a node scalar -> stacked [c1; c2] cells.

        Equals curl_mat(name).T @ diag(omega) exactly (adjoint pair).
        """
        def build():
            g = self.grid
            px, py = self.node_topo(name)
            nsh = node_shape(g, px, py)
            cells = (g.nx, g.ny)
            n = g.n_cells
            i, j = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")

            def nid(ii, jj):
                return (ii % nsh[0]) * nsh[1] + (jj % nsh[1])

            cid = np.ravel_multi_index((i, j), cells).ravel()
            cx, cy = 0.5 / g.dx, 0.5 / g.dy
            terms = []
            for di, dj, c1, c2 in (
                (0, 0, -cy, cx), (1, 0, -cy, -cx), (0, 1, cy, cx), (1, 1, cy, -cx),
            ):
                nn = nid(i + di, j + dj).ravel()
                terms.append((cid, nn, np.full(cid.size, c1)))
                terms.append((cid + n, nn, np.full(cid.size, c2)))
            m = sp.coo_matrix(
                (np.concatenate([t[2] for t in terms]),
                 (np.concatenate([t[0] for t in terms]),
                  np.concatenate([t[1] for t in terms]))),
                shape=(2 * n, nsh[0] * nsh[1]))
            return m.tocsr()
        return self._memo(("curl_of", name), build)

    # velocity face <-> node transfer ---------------------------------------
    def wall_face_mask(self, vel: str = "vel") -> np.ndarray:
        """Boolean mask of wall-normal boundary faces in the stacked layout."""
        rule = self.rule(vel)

        def build():
            (nxu, nyu), (nxv, nyv) = _mac_shapes(self.grid, rule)
            mu = np.zeros((nxu, nyu), dtype=bool)
            mv = np.zeros((nxv, nyv), dtype=bool)
            if not rule.periodic_x:
                mu[0, :] = True
                mu[-1, :] = True
            if not rule.periodic_y:
                mv[:, 0] = True
                mv[:, -1] = True
            return np.concatenate([mu.ravel(), mv.ravel()])
        return self._memo(("wallmask", vel), build)

    def mfn_mat(self, vel: str = "vel", nodes_of: str = "b") -> sp.csr_matrix:
        """Faces -> node velocity vector [u_n; v_n], wall-face columns zeroed.

        Node set must match the cell-vector field named by `nodes_of`.
        """
        rule = self.rule(vel)
        px, py = self.node_topo(nodes_of)
        if (rule.periodic_x, rule.periodic_y) != (px, py):
            raise ValueError("velocity and cell-vector topologies differ")

        def build():
            g = self.grid
            nsh = node_shape(g, px, py)
            n_nodes = nsh[0] * nsh[1]
            ru, rv = self.resolver(vel)
            ext_u, ext_v = ru.ext_shape, rv.ext_shape
            i, j = np.meshgrid(np.arange(nsh[0]), np.arange(nsh[1]), indexing="ij")
            mu = _coo(nsh, ext_u, [((i, j), (i + 1, j), 0.5), ((i, j), (i + 1, j + 1), 0.5)])
            mv = _coo(nsh, ext_v, [((i, j), (i, j + 1), 0.5), ((i, j), (i + 1, j + 1), 0.5)])
            m = sp.bmat([[mu @ ru.matrix, None], [None, mv @ rv.matrix]]).tocsr()
            mask = self.wall_face_mask(vel)
            keep = sp.diags((~mask).astype(float))
            return (m @ keep).tocsr()
        return self._memo(("mfn", vel, nodes_of), build)

    # MAC laplacian ----------------------------------------------------------
    def maclap_mat(self, vel: str = "vel") -> sp.csr_matrix:
        rule = self.rule(vel)

        def build():
            g = self.grid
            ru, rv = self.resolver(vel)
            (nxu, nyu), (nxv, nyv) = _mac_shapes(g, rule)
            i, j = np.meshgrid(np.arange(nxu), np.arange(nyu), indexing="ij")
            I, J = i + 1, j + 1
            termsu = [((i, j), (I + 1, J), 1.0 / g.dx**2), ((i, j), (I - 1, J), 1.0 / g.dx**2),
                      ((i, j), (I, J + 1), 1.0 / g.dy**2), ((i, j), (I, J - 1), 1.0 / g.dy**2),
                      ((i, j), (I, J), -2.0 / g.dx**2 - 2.0 / g.dy**2)]
            lu = _coo((nxu, nyu), ru.ext_shape, termsu) @ ru.matrix
            i, j = np.meshgrid(np.arange(nxv), np.arange(nyv), indexing="ij")
            I, J = i + 1, j + 1
            termsv = [((i, j), (I + 1, J), 1.0 / g.dx**2), ((i, j), (I - 1, J), 1.0 / g.dx**2),
                      ((i, j), (I, J + 1), 1.0 / g.dy**2), ((i, j), (I, J - 1), 1.0 / g.dy**2),
                      ((i, j), (I, J), -2.0 / g.dx**2 - 2.0 / g.dy**2)]
            lv = _coo((nxv, nyv), rv.ext_shape, termsv) @ rv.matrix
            return sp.block_diag([lu, lv]).tocsr()
        return self._memo(("maclap", vel), build)

    # skew advection ----------------------------------------------------------
    def adv_skew_mat(self, uext: np.ndarray, vext: np.ndarray, vel: str = "vel") -> sp.csr_matrix:
        """(T - T^T)/2 with T the centered conservative advection by (uext, vext).

        Rebuilt per call (the advecting velocity changes every step); the
        ghost resolvers and shapes come from the cache.  Wall-face rows of
        T are zeroed before antisymmetrization.
        """
        g = self.grid
        rule = self.rule(vel)
        ru, rv = self.resolver(vel)
        (nxu, nyu), (nxv, nyv) = _mac_shapes(g, rule)
        nx, ny = g.nx, g.ny
        dx, dy = g.dx, g.dy

        # advecting velocity at cells and nodes
        ub_c = 0.5 * (uext[1:nx + 1, 1:ny + 1] + uext[2:nx + 2, 1:ny + 1])   # (nx, ny)
        vb_c = 0.5 * (vext[1:nx + 1, 1:ny + 1] + vext[1:nx + 1, 2:ny + 2])   # (nx, ny)
        vb_n = 0.5 * (vext[:-1, :] + vext[1:, :])    # [u-face col, v ext row]
        ub_n = 0.5 * (uext[:, :-1] + uext[:, 1:])    # [u ext col, node row]

        def cellx(ii):
            return ii % nx if rule.periodic_x else np.clip(ii, 0, nx - 1)

        def celly(jj):
            return jj % ny if rule.periodic_y else np.clip(jj, 0, ny - 1)

        # u-component rows
        i, j = np.meshgrid(np.arange(nxu), np.arange(nyu), indexing="ij")
        interior = np.ones((nxu, nyu))
        if not rule.periodic_x:
            interior[0, :] = 0.0
            interior[-1, :] = 0.0
        ul = ub_c[cellx(i - 1), j] * interior
        ur = ub_c[cellx(i), j] * interior
        vs = vb_n[i, j + 1] * interior      # node below face: ext row j+1 is node j
        vn = vb_n[i, j + 2] * interior
        termsu = [
            ((i, j), (i + 2, j + 1), ur / (2 * dx)),
            ((i, j), (i + 1, j + 1), (ur - ul) / (2 * dx) + (vn - vs) / (2 * dy)),
            ((i, j), (i, j + 1), -ul / (2 * dx)),
            ((i, j), (i + 1, j + 2), vn / (2 * dy)),
            ((i, j), (i + 1, j), -vs / (2 * dy)),
        ]
        tu = _coo((nxu, nyu), ru.ext_shape, termsu) @ ru.matrix

        # v-component rows
        i, j = np.meshgrid(np.arange(nxv), np.arange(nyv), indexing="ij")
        interior = np.ones((nxv, nyv))
        if not rule.periodic_y:
            interior[:, 0] = 0.0
            interior[:, -1] = 0.0
        vs_ = vb_c[i, celly(j - 1)] * interior
        vn_ = vb_c[i, celly(j)] * interior
        uw = ub_n[i + 1, j] * interior      # node left of face: ext col i+1 is node i
        ue = ub_n[i + 2, j] * interior
        termsv = [
            ((i, j), (i + 1, j + 2), vn_ / (2 * dy)),
            ((i, j), (i + 1, j + 1), (vn_ - vs_) / (2 * dy) + (ue - uw) / (2 * dx)),
            ((i, j), (i + 1, j), -vs_ / (2 * dy)),
            ((i, j), (i + 2, j + 1), ue / (2 * dx)),
            ((i, j), (i, j + 1), -uw / (2 * dx)),
        ]
        tv = _coo((nxv, nyv), rv.ext_shape, termsv) @ rv.matrix

        T = sp.block_diag([tu, tv]).tocsr()
        return (0.5 * (T - T.T)).tocsr()


def advect_skew(ctx: StencilContext, vel: VectorField, target: VectorField, vel_name: str = "vel"):
    """Skew-symmetric advection of a MAC `target` by MAC `vel` (both ghosted).

    Returns (au, av) on the interior face layout.  <advect(vel, q), q> = 0
    exactly for any vel, by construction.
    """
    rule = ctx.rule(vel_name)
    (nxu, nyu), (nxv, nyv) = _mac_shapes(ctx.grid, rule)
    A = ctx.adv_skew_mat(vel.u, vel.v, vel_name)
    q = np.concatenate([
        target.u[1:nxu + 1, 1:nyu + 1].ravel(),
        target.v[1:nxv + 1, 1:nyv + 1].ravel(),
    ])
    out = A @ q
    nu = nxu * nyu
    return out[:nu].reshape(nxu, nyu), out[nu:].reshape(nxv, nyv)
