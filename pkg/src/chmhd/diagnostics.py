"""Error norms, convergence-rate tables, and per-step time series.

L2 norms use midpoint quadrature at each field's native staggering; H1
seminorms difference the pointwise error between adjacent sample sites,
so no boundary closure enters the measurement.  Pressure errors compare
zero-mean projections because the field is only defined up to a constant.
"""

from dataclasses import dataclass, fields

import numpy as np

from .grid import GridSpec
from .schemes import State

NORM_FIELDS = ("l2_phi", "h1semi_phi", "l2_v", "h1semi_v",
               "l2_b", "h1semi_b", "l2_p")


@dataclass(frozen=True)
class ErrorNorms:
    l2_phi: float
    h1semi_phi: float
    l2_v: float
    h1semi_v: float
    l2_b: float
    h1semi_b: float
    l2_p: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{f.name} must be finite and nonnegative")


@dataclass(frozen=True)
class RateRow:
    h: float
    norms: ErrorNorms
    rates: dict | None    # per-norm log2 ratio; None on the coarsest row


def _l2(err: np.ndarray, dv: float) -> float:
    return float(np.sqrt(np.sum(err * err) * dv))


def _h1semi_cell(err: np.ndarray, g: GridSpec) -> float:
    dx_part = np.diff(err, axis=0) / g.dx
    dy_part = np.diff(err, axis=1) / g.dy
    return float(np.sqrt((np.sum(dx_part**2) + np.sum(dy_part**2))
                         * g.cell_volume))


def _h1semi_face(u_err: np.ndarray, v_err: np.ndarray, g: GridSpec) -> float:
    acc = 0.0
    for arr in (u_err, v_err):
        acc += np.sum((np.diff(arr, axis=0) / g.dx)**2)
        acc += np.sum((np.diff(arr, axis=1) / g.dy)**2)
    return float(np.sqrt(acc * g.cell_volume))


def error_norms(state: State, exact: dict, t: float | None = None) -> ErrorNorms:
    """Discrete error norms of a state against exact closures.

    ``exact`` maps field names (phi, u, v, p, b1, b2) to callables of
    (x, y, t).  Velocities are compared at their own face sites.
    """
    g = state.grid
    if t is None:
        t = state.t
    dv = g.cell_volume
    xc, yc = g.cell_mesh()

    e_phi = state.phi - exact["phi"](xc, yc, t)

    xu, yu = g.xface_mesh()
    xu, yu = xu[:state.u.shape[0], :], yu[:state.u.shape[0], :]
    xv, yv = g.yface_mesh()
    xv, yv = xv[:, :state.v.shape[1]], yv[:, :state.v.shape[1]]
    e_u = state.u - exact["u"](xu, yu, t)
    e_v = state.v - exact["v"](xv, yv, t)

    e_b1 = state.b1 - exact["b1"](xc, yc, t)
    e_b2 = state.b2 - exact["b2"](xc, yc, t)

    p_ex = exact["p"](xc, yc, t)
    e_p = (state.p - state.p.mean()) - (p_ex - p_ex.mean())

    return ErrorNorms(
        l2_phi=_l2(e_phi, dv),
        h1semi_phi=_h1semi_cell(e_phi, g),
        l2_v=float(np.sqrt(_l2(e_u, dv)**2 + _l2(e_v, dv)**2)),
        h1semi_v=_h1semi_face(e_u, e_v, g),
        l2_b=float(np.sqrt(_l2(e_b1, dv)**2 + _l2(e_b2, dv)**2)),
        h1semi_b=float(np.sqrt(_h1semi_cell(e_b1, g)**2
                               + _h1semi_cell(e_b2, g)**2)),
        l2_p=_l2(e_p, dv),
    )


def rate_table(rows) -> list:
    """log2 error ratios between successive h levels.

    ``rows`` is a list of (h, ErrorNorms) with h halving between entries.
    """
    if len(rows) < 2:
        raise ValueError("need at least two refinement levels")
    hs = [r[0] for r in rows]
    for coarse, fine in zip(hs, hs[1:]):
        if abs(coarse - 2.0 * fine) > 1e-9 * coarse:
            raise ValueError("h sequence must halve between rows")
    out = [RateRow(h=rows[0][0], norms=rows[0][1], rates=None)]
    for (_, prev), (h, cur) in zip(rows, rows[1:]):
        rates = {}
        for name in NORM_FIELDS:
            e0, e1 = getattr(prev, name), getattr(cur, name)
            rates[name] = float(np.log2(e0 / e1)) if e0 > 0 and e1 > 0 else np.nan
        out.append(RateRow(h=h, norms=cur, rates=rates))
    return out


def format_rate_table(table: list) -> str:
    """Fixed-width text rendering of a rate table."""
    cols = []
    for name in NORM_FIELDS:
        cols.append(name)
        cols.append("rate")
    lines = ["    h      " + "  ".join(f"{c:>10s}" for c in cols)]
    for row in table:
        cells = []
        for name in NORM_FIELDS:
            cells.append(f"{getattr(row.norms, name):10.3e}")
            if row.rates is None:
                cells.append(f"{'-':>10s}")
            else:
                cells.append(f"{row.rates[name]:10.2f}")
        lines.append(f"{row.h:10.5f} " + "  ".join(cells))
    return "\n".join(lines)


CSV_HEADER = ("k,t,E_total,E_kin,E_mag,E_interf,E_pot,E_pgrad,"
              "mass,div_inf,iters_ch,iters_b,iters_v,iters_p")


class DiagnosticsRecord:
    """Append-only per-step series matching the CSV schema."""

    def __init__(self):
        self.rows = []

    def append(self, k: int, t: float, energy: dict, mass: float,
               div_inf: float, iters: dict):
        self.rows.append((int(k), float(t), float(energy["total"]),
                          float(energy["kin"]), float(energy["mag"]),
                          float(energy["interf"]), float(energy["pot"]),
                          float(energy["pgrad"]), float(mass),
                          float(div_inf), int(iters["ch"]), int(iters["b"]),
                          int(iters["v"]), int(iters["p"])))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        idx = CSV_HEADER.split(",").index(name)
        return np.array([r[idx] for r in self.rows])

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            cells = [str(r[0])]
            cells += [f"{x:.17g}" for x in r[1:10]]
            cells += [str(x) for x in r[10:]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsRecord":
        rec = cls()
        with open(path) as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError("unrecognized diagnostics header")
            for line in fh:
                parts = line.strip().split(",")
                if not parts or parts == [""]:
                    continue
                rec.rows.append(tuple([int(parts[0])]
                                      + [float(x) for x in parts[1:10]]
                                      + [int(x) for x in parts[10:]]))
        return rec
