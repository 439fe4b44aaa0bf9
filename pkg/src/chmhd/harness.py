"""Experiment drivers: run configuration, snapshot files, and the three
benchmark problems (manufactured-solution sweep, spinodal decomposition,
magnetically damped rising bubble).
"""

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import mms
from .diagnostics import DiagnosticsRecord, error_norms, rate_table
from .grid import (BoundaryRule, GridSpec, neumann_scalar, noslip_velocity,
                   periodic_scalar, tangential_cellvec)
from .linalg import SolverConfig, SolverError
from .potential import ModelParams
from .schemes import SchemeConfig, State, Stepper

__all__ = ["ConfigError", "RunConfig", "Snapshot", "parse_config_text",
           "load_config", "run_mms", "run_spinodal", "run_boussinesq",
           "write_snapshot", "read_snapshot", "bubble_centroid"]


class ConfigError(ValueError):
    """Bad run configuration or config file."""


class SnapshotError(ValueError):
    """Missing or corrupt snapshot file."""


_SCHEME_ALIASES = {
    "i": "stab", "1": "stab", "stab": "stab",
    "ii": "ieq", "2": "ieq", "ieq": "ieq",
    "iii": "iieq", "3": "iieq", "iieq": "iieq",
}


def canonical_scheme(name: str) -> str:
    key = str(name).strip().lower()
    if key not in _SCHEME_ALIASES:
        raise ConfigError(f"unknown scheme {name!r} (want I, II, or III)")
    return _SCHEME_ALIASES[key]


# configuration ----------------------------------------------------------------

def parse_config_text(text: str, where: str = "config") -> dict:
    """Flat ``key = value`` lines with dotted section prefixes.

    Blank lines and ``#`` comments are skipped; values are kept as strings
    for the consumer to coerce.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, val = line.split("=", 1)
        key, val = key.strip(), val.strip().strip('"').strip("'")
        if not key:
            raise ConfigError(f"{where}:{lineno}: empty key")
        out[key] = val
    return out


def load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config_text(fh.read(), where=path)


_FLOAT_KEYS = {"dt", "t_end", "grid.lx", "grid.ly", "stab", "stab2", "c0",
               "params.epsilon", "params.lam", "params.mobility", "params.nu",
               "params.rho0", "params.mu"}
_INT_KEYS = {"grid.nx", "grid.ny", "steps", "seed", "snap_every"}


@dataclass
class RunConfig:
    """One experiment invocation; unset fields take experiment defaults."""

    experiment: str
    scheme: str = "stab"
    nx: int | None = None
    ny: int | None = None
    lx: float | None = None
    ly: float | None = None
    dt: float | None = None
    t_end: float | None = None
    steps: int | None = None
    seed: int | None = None
    out_dir: str | None = None
    snap_every: int = 0
    levels: tuple = (8, 16, 32, 64)
    dts: tuple = (1.0, 0.1, 0.01, 0.001, 0.0001)
    stab: float | None = None
    stab2: float | None = None
    c0: float = 1.0
    param_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in ("mms", "spinodal", "boussinesq"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        self.scheme = canonical_scheme(self.scheme)
        for name in ("nx", "ny", "steps", "snap_every"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be nonnegative")
        for name in ("lx", "ly", "dt", "t_end"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.experiment == "spinodal":
            if self.seed is None:
                self.seed = 1234
        elif self.seed is not None:
            raise ConfigError("seed applies only to the spinodal experiment")
        if len(self.levels) < 1 or any(n < 2 for n in self.levels):
            raise ConfigError("mms levels must be grid sizes >= 2")
        if any(dt <= 0 for dt in self.dts):
            raise ConfigError("time steps must be positive")

    @classmethod
    def from_mapping(cls, experiment: str, mapping: dict) -> "RunConfig":
        kw = {"experiment": experiment}
        params = {}
        for key, val in mapping.items():
            try:
                if key == "scheme":
                    kw["scheme"] = val
                elif key in _INT_KEYS:
                    name = key.split(".")[-1]
                    kw[{"nx": "nx", "ny": "ny", "steps": "steps",
                        "seed": "seed", "snap_every": "snap_every"}[name]] = int(val)
                elif key in _FLOAT_KEYS and key.startswith("params."):
                    params[key.split(".", 1)[1]] = float(val)
                elif key in _FLOAT_KEYS and key.startswith("grid."):
                    kw[key.split(".", 1)[1]] = float(val)
                elif key in _FLOAT_KEYS:
                    kw[key] = float(val)
                elif key == "params.sigma":
                    parts = [float(x) for x in val.split(",")]
                    params["sigma"] = parts[0] if len(parts) == 1 \
                        else (parts[0], parts[1])
                elif key == "out":
                    kw["out_dir"] = val
                elif key == "mms.levels":
                    kw["levels"] = tuple(int(x) for x in val.split(","))
                elif key == "spinodal.dts":
                    kw["dts"] = tuple(float(x) for x in val.split(","))
                else:
                    raise ConfigError(f"unknown config key {key!r}")
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key!r}: {val!r}") from exc
        if params:
            kw["param_overrides"] = params
        return cls(**kw)

    def grid(self, nx_default, ny_default, lx_default=1.0, ly_default=1.0):
        return GridSpec(self.nx or nx_default, self.ny or ny_default,
                        self.lx or lx_default, self.ly or ly_default)

    def scheme_config(self, stab_default=None, stab2_default=0.0):
        stab = self.stab if self.stab is not None else stab_default
        stab2 = self.stab2 if self.stab2 is not None else stab2_default
        return SchemeConfig(scheme=self.scheme, stab=stab, stab2=stab2,
                            c0=self.c0)

    def model_params(self, **defaults) -> ModelParams:
        merged = dict(defaults)
        merged.update(self.param_overrides)
        return ModelParams(**merged)


# snapshots --------------------------------------------------------------------

_MAGIC = b"CHMHD1\x00\x00"
_TAGS = ("cell", "xface", "yface")


@dataclass
class Snapshot:
    """All state arrays of one step, tagged with their staggering."""

    k: int
    t: float
    nx: int
    ny: int
    lx: float
    ly: float
    fields: dict    # name -> (tag, float64 array)


def snapshot_of(state: State, k: int) -> Snapshot:
    g = state.grid
    fields = {
        "phi": ("cell", state.phi), "w": ("cell", state.w),
        "u": ("xface", state.u), "v": ("yface", state.v),
        "p": ("cell", state.p), "b1": ("cell", state.b1),
        "b2": ("cell", state.b2),
    }
    if state.naux is not None:
        fields["naux"] = ("cell", state.naux)
    return Snapshot(k, state.t, g.nx, g.ny, g.lx, g.ly, fields)


def state_of(snapshot: Snapshot, grid: GridSpec) -> State:
    if (grid.nx, grid.ny) != (snapshot.nx, snapshot.ny):
        raise SnapshotError("snapshot grid does not match the run grid")
    f = snapshot.fields
    naux = f["naux"][1] if "naux" in f else None
    return State(grid, snapshot.t, f["phi"][1], f["w"][1], f["u"][1],
                 f["v"][1], f["p"][1], f["b1"][1], f["b2"][1], naux)


def write_snapshot(base_path: str, snap: Snapshot) -> tuple:
    """Writes <base>.chm (bit-exact binary) and <base>.vtk (viewer ASCII)."""
    bin_path, vtk_path = base_path + ".chm", base_path + ".vtk"
    with open(bin_path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qd", snap.k, snap.t))
        fh.write(struct.pack("<qqdd", snap.nx, snap.ny, snap.lx, snap.ly))
        fh.write(struct.pack("<i", len(snap.fields)))
        for name, (tag, arr) in snap.fields.items():
            if tag not in _TAGS:
                raise SnapshotError(f"unknown staggering tag {tag!r}")
            fh.write(struct.pack("<16s8sqq", name.encode(), tag.encode(),
                                 arr.shape[0], arr.shape[1]))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    _write_vtk(vtk_path, snap)
    return bin_path, vtk_path


def read_snapshot(path: str) -> Snapshot:
    if not os.path.exists(path):
        raise SnapshotError(f"snapshot not found: {path}")
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise SnapshotError(f"{path}: bad magic, not a CHMHD1 snapshot")
        try:
            k, t = struct.unpack("<qd", fh.read(16))
            nx, ny, lx, ly = struct.unpack("<qqdd", fh.read(32))
            (nf,) = struct.unpack("<i", fh.read(4))
            fields = {}
            for _ in range(nf):
                name_b, tag_b, d0, d1 = struct.unpack("<16s8sqq", fh.read(40))
                name = name_b.rstrip(b"\x00").decode()
                tag = tag_b.rstrip(b"\x00").decode()
                if tag not in _TAGS:
                    raise SnapshotError(f"{path}: unknown tag {tag!r}")
                raw = fh.read(8 * d0 * d1)
                if len(raw) != 8 * d0 * d1:
                    raise SnapshotError(f"{path}: truncated field {name!r}")
                fields[name] = (tag, np.frombuffer(raw, dtype="<f8")
                                .reshape(d0, d1).copy())
        except struct.error as exc:
            raise SnapshotError(f"{path}: truncated header") from exc
    return Snapshot(k, t, nx, ny, lx, ly, fields)


def _write_vtk(path: str, snap: Snapshot):
    g = GridSpec(snap.nx, snap.ny, snap.lx, snap.ly)
    lines = ["# vtk DataFile Version 3.0",
             f"chmhd step {snap.k} t {snap.t:.17g}",
             "ASCII",
             "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {snap.nx} {snap.ny} 1",
             f"ORIGIN {g.dx / 2:.17g} {g.dy / 2:.17g} 0",
             f"SPACING {g.dx:.17g} {g.dy:.17g} 1",
             f"POINT_DATA {snap.nx * snap.ny}"]
    for name, (tag, arr) in snap.fields.items():
        if tag != "cell":
            continue
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        # VTK orders x fastest; arrays are indexed [ix, iy]
        lines.extend(f"{val:.17g}" for val in arr.T.ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# shared driver plumbing ---------------------------------------------------------

def _iters(bd):
    return {name: bd.reports[name].n_iter for name in ("ch", "b", "v", "p")}


def _ensure_out(cfg) -> str:
    out = cfg.out_dir or os.path.join("chmhd-out", cfg.experiment)
    os.makedirs(out, exist_ok=True)
    return out


_LU_PRESSURE = {"p": SolverConfig(method="lu", rel_tol=1e-10, abs_tol=1e-13,
                                  nullspace="constants")}


def _advance_recorded(stepper, state, n_steps, record, snap_writer=None):
    """Advance n_steps, appending diagnostics; returns (state, worst ratio of
    measured velocity divergence to the projection solve's own bound)."""
    worst = 0.0
    for k in range(1, n_steps + 1):
        state, bd = stepper.advance(state)
        record.append(k, state.t, stepper.energy(state), stepper.mass(state),
                      bd.div_inf, _iters(bd))
        if bd.div_target > 0.0:
            worst = max(worst, bd.div_inf / bd.div_target)
        if snap_writer is not None:
            snap_writer(k, state)
    return state, worst


# manufactured-solution sweep ----------------------------------------------------

MMS_SOURCES = {
    "phase": mms.source_phase,
    "momentum_x": mms.source_momentum_x,
    "momentum_y": mms.source_momentum_y,
    "induction_x": mms.source_induction_x,
    "induction_y": mms.source_induction_y,
}

MMS_EXACT = {
    "phi": mms.exact_phi, "u": mms.exact_u, "v": mms.exact_v,
    "p": mms.exact_p, "b1": mms.exact_b1, "b2": mms.exact_b2,
}


def mms_stepper(nx: int, scheme_cfg: SchemeConfig, dt: float) -> Stepper:
    g = GridSpec(nx, nx, 1.0, 1.0)
    # with unit mobility and epsilon the phase Schur system is a raw
    # fourth-order operator (condition ~1e8 at this resolution): Krylov
    # diverges unpreconditioned and no solver can certify residuals below
    # the kappa*eps floor, so solve it directly with a reachable target
    overrides = dict(_LU_PRESSURE)
    overrides["ch"] = SolverConfig(method="lu", rel_tol=1e-9, abs_tol=1e-13)
    return Stepper(g, mms.rules(), mms.params(), scheme_cfg, dt,
                   sources=MMS_SOURCES, solver_overrides=overrides)


def mms_initial_state(stepper: Stepper, t: float = 0.0) -> State:
    g = stepper.grid
    return stepper.make_state(
        t,
        phi=mms.at_cells(mms.exact_phi, g, t),
        w=mms.at_cells(mms.exact_w, g, t),
        u=mms.at_xfaces(mms.exact_u, g, t),
        v=mms.at_yfaces(mms.exact_v, g, t),
        p=mms.at_cells(mms.exact_p, g, t),
        b1=mms.at_cells(mms.exact_b1, g, t),
        b2=mms.at_cells(mms.exact_b2, g, t),
    )


def run_mms(cfg: RunConfig) -> dict:
    """Space-time sweep: each level runs to t_end with dt = h^2.

    Returns level errors, the rate table (when >= 2 levels finished), and
    the paths of the per-level series CSVs.  A solver failure stops the
    sweep and returns the partial table with the failure message.
    """
    out = _ensure_out(cfg)
    scheme_cfg = cfg.scheme_config(stab_default=1.0, stab2_default=0.0)
    t_end = cfg.t_end if cfg.t_end is not None else 1.0
    rows, paths, failure, div_ratio = [], [], None, 0.0
    for nx in cfg.levels:
        g1 = GridSpec(nx, nx, 1.0, 1.0)
        dt = cfg.dt if cfg.dt is not None else g1.dx**2
        stepper = mms_stepper(nx, scheme_cfg, dt)
        state = mms_initial_state(stepper)
        record = DiagnosticsRecord()
        n_steps = int(round(t_end / dt))
        try:
            state, ratio = _advance_recorded(stepper, state, n_steps, record)
        except SolverError as exc:
            failure = f"level nx={nx}: {exc}"
            break
        div_ratio = max(div_ratio, ratio)
        norms = error_norms(state, MMS_EXACT)
        rows.append((g1.dx, norms))
        path = os.path.join(out, f"mms_{cfg.scheme}_nx{nx}.csv")
        record.write_csv(path)
        paths.append(path)
    table = rate_table(rows) if len(rows) >= 2 else None
    return {"scheme": cfg.scheme, "rows": rows, "table": table,
            "csv_paths": paths, "failure": failure,
            "max_div_ratio": div_ratio}


# spinodal decomposition ---------------------------------------------------------

def spinodal_rules() -> dict:
    return {
        "phi": periodic_scalar(),
        "w": periodic_scalar(),
        "p": neumann_scalar(),
        "vel": noslip_velocity(),
        "b": tangential_cellvec(),
    }


def spinodal_phi0(grid: GridSpec, seed: int, mean: float = -0.05) -> np.ndarray:
    # row-major noise stream over cells so a seed names one exact field
    rng = np.random.default_rng(seed)
    return mean + 0.001 * rng.uniform(-1.0, 1.0, size=(grid.nx, grid.ny))


def spinodal_stepper(cfg: RunConfig, grid: GridSpec, dt: float) -> Stepper:
    par = cfg.model_params(epsilon=0.01, lam=0.01, mobility=1.0, nu=1.0,
                           rho0=1.0, mu=1.0, sigma=1.0)
    eps = par.epsilon
    scheme_cfg = cfg.scheme_config(stab_default=1.0 / eps,
                                   stab2_default=1.0 / eps)
    return Stepper(grid, spinodal_rules(), par, scheme_cfg, dt,
                   solver_overrides=dict(_LU_PRESSURE))


def run_spinodal(cfg: RunConfig) -> dict:
    """Seeded decay runs, one per requested dt, 50 steps each by default."""
    out = _ensure_out(cfg)
    g = cfg.grid(64, 64)
    steps = cfg.steps if cfg.steps is not None else 50
    dts = (cfg.dt,) if cfg.dt is not None else cfg.dts
    phi0 = spinodal_phi0(g, cfg.seed)
    results = {}
    for dt in dts:
        stepper = spinodal_stepper(cfg, g, dt)
        state = stepper.make_state(phi=phi0)
        record = DiagnosticsRecord()
        e0 = stepper.energy(state)["total"]
        m0 = stepper.mass(state)

        writer = None
        if cfg.snap_every:
            tag = f"{dt:g}".replace(".", "p")

            def writer(k, st, tag=tag):
                if k % cfg.snap_every == 0:
                    write_snapshot(os.path.join(out, f"spinodal_dt{tag}_k{k:06d}"),
                                   snapshot_of(st, k))

        state, ratio = _advance_recorded(stepper, state, steps, record, writer)
        path = os.path.join(out, f"spinodal_dt{f'{dt:g}'.replace('.', 'p')}.csv")
        record.write_csv(path)
        results[dt] = {"record": record, "csv_path": path,
                       "e0": e0, "mass0": m0, "final": state,
                       "max_div_ratio": ratio}
    return results


# rising bubble under a magnetic field --------------------------------------------

def bubble_centroid(grid: GridSpec, phi: np.ndarray) -> tuple:
    """Center of mass of the light-phase indicator (1 + phi) / 2."""
    xc, yc = grid.cell_mesh()
    m = (1.0 + phi) / 2.0
    tot = float(m.sum())
    return float((xc * m).sum() / tot), float((yc * m).sum() / tot)


def boussinesq_rules() -> dict:
    return {
        "phi": neumann_scalar(),
        "w": neumann_scalar(),
        "p": neumann_scalar(),
        # moving walls top/bottom are closed; side walls let fluid slide
        "vel": BoundaryRule("slip", "slip", "noslip", "noslip",
                            kind="velocity"),
        "b": tangential_cellvec(g1=0.0, g2=1.0),
    }


def boussinesq_phi0(grid: GridSpec, epsilon: float, radius: float = 0.25,
                    center=(0.5, 0.3)) -> np.ndarray:
    xc, yc = grid.cell_mesh()
    r = np.sqrt((xc - center[0])**2 + (yc - center[1])**2)
    return np.tanh((radius - r) / (np.sqrt(2.0) * epsilon))


def boussinesq_stepper(cfg: RunConfig, grid: GridSpec, dt: float,
                       lorentz: bool) -> Stepper:
    par = cfg.model_params(epsilon=0.01, lam=5.0, mobility=1e-4, nu=1.0,
                           rho0=5.0, mu=0.001, sigma=(300.0, 400.0))
    scheme_cfg = cfg.scheme_config(stab_default=1.0, stab2_default=0.0)
    # Boussinesq buoyancy: with rho0 midway between the phases the constant
    # part cancels and the force is g * (rho2 - rho1) * phi on y-faces
    rho1, rho2, gy = 1.0, 9.0, 10.0
    force = (0.0, gy * (rho2 - rho1))
    return Stepper(grid, boussinesq_rules(), par, scheme_cfg, dt,
                   phase_force=force, lorentz=lorentz,
                   solver_overrides=dict(_LU_PRESSURE))


def run_boussinesq(cfg: RunConfig, snap_times=(0.01, 0.5, 1.0, 2.0, 3.0)) -> dict:
    """The rising-bubble pair: with the magnetic back-reaction and without."""
    out = _ensure_out(cfg)
    g = cfg.grid(100, 150, 1.0, 1.5)
    dt = cfg.dt if cfg.dt is not None else 1e-3
    t_end = cfg.t_end if cfg.t_end is not None else 1.0
    n_steps = int(round(t_end / dt))
    snap_steps = {int(round(ts / dt)): ts for ts in snap_times
                  if ts <= t_end + 1e-12}

    results = {}
    for label, lorentz in (("lorentz", True), ("no_lorentz", False)):
        stepper = boussinesq_stepper(cfg, g, dt, lorentz)
        state = stepper.make_state(
            phi=boussinesq_phi0(g, stepper.params.epsilon),
            b1=np.zeros((g.nx, g.ny)), b2=np.ones((g.nx, g.ny)))
        record = DiagnosticsRecord()
        m0 = stepper.mass(state)
        centroids = [(0.0, *bubble_centroid(g, state.phi))]

        def writer(k, st, label=label, centroids=centroids):
            if k in snap_steps:
                centroids.append((st.t, *bubble_centroid(g, st.phi)))
                write_snapshot(os.path.join(out, f"bubble_{label}_k{k:06d}"),
                               snapshot_of(st, k))

        state, ratio = _advance_recorded(stepper, state, n_steps, record, writer)
        path = os.path.join(out, f"bubble_{label}.csv")
        record.write_csv(path)
        results[label] = {"record": record, "csv_path": path, "mass0": m0,
                          "centroids": centroids, "final": state,
                          "final_centroid": bubble_centroid(g, state.phi),
                          "max_div_ratio": ratio}
    return results
