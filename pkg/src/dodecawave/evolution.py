"""Explicit two-level time stepping of the semi-discrete wave equation.

The scheme is::

    M (U+ - 2U + U-) + (3/2)(a'/a) dt M (U+ - U-) + dt^2 a^-2 (K + D) U = 0

with ``a`` and ``a'/a`` evaluated at the current level.  It is advanced in
increment form: with ``Z = M^-1 (K + D) U`` and ``c = (3/2)(a'/a) dt``::

    D+ = ((1 - c) D - dt^2 a^-2 Z) / (1 + c),    U+ = U + D+

which is algebraically identical but keeps the small increments ``D = U - U-``
free of cancellation.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import group, kernels
from ._jit import JIT_ENABLED
from .fem import Locator, SystemMatrices, TetDiagnostics
from .mesh import TetMeshP2
from .models import ScaleFactorModel

log = logging.getLogger(__name__)

DEFAULT_DT = 1.5e-4
CFL_FACTOR = 0.5
CG_TOL = 1e-12
CG_MAXITER = 500


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Bump:
    """``amplitude * exp(d^2 / (d^2 - radius^2))`` for geodesic distance ``d < radius``."""

    center: tuple
    radius: float
    amplitude: float = 100.0

    def __post_init__(self):
        if not 0 < self.radius < group.D_MAX:
            raise ValueError("bump radius must lie in (0, d_max)")


@dataclass
class InitSpec:
    bumps: list = field(default_factory=list)
    constant: float = 0.0
    velocity: float = 0.0
    seed: int | None = None
    label: str = ""


def init_preset(name: str, seed: int = 0, count: int = 100) -> InitSpec:
    """Named initial data: ``init1``, ``init2``, ``init3`` or ``init4`` (random)."""
    name = name.lower()
    if name == "init1":
        return InitSpec([Bump((0.0, 0.0, 0.0), 0.1)], label=name)
    if name == "init2":
        return InitSpec([Bump((0.0, 0.0, 0.0), 0.05)], label=name)
    if name == "init3":
        return InitSpec(
            [
                Bump((0.0, 0.0, 0.0), 0.05),
                Bump((0.1, 0.1, 0.1), 0.1),
                Bump((-0.15, 0.0, -0.1), 0.05),
            ],
            label=name,
        )
    if name == "init4":
        return random_init(seed, count)
    raise ValueError(f"unknown initial data preset {name!r}")


def random_init(seed: int, count: int = 100) -> InitSpec:
    """``count`` bumps with amplitudes in [-100, 100], radii in (0, 0.1] and
    centers uniform in the ball ``|X| <= 0.25`` intersected with the domain."""
    rng = np.random.default_rng(seed)
    bumps = []
    while len(bumps) < count:
        p = rng.uniform(-0.25, 0.25, 3)
        if p @ p > 0.25**2:
            continue
        if group.contains(group.lift(p)).kind == "outside":
            continue
        radius = 0.1 * (1.0 - rng.random())  # (0, 0.1]
        bumps.append(Bump(tuple(p), float(radius), float(rng.uniform(-100.0, 100.0))))
    return InitSpec(bumps, seed=seed, label=f"init4 seed={seed}")


def quotient_distance(points, center) -> np.ndarray:
    """Geodesic distance on the quotient from projected ``points`` to ``center``."""
    x = group.lift(np.atleast_2d(points))
    c = group.lift(np.asarray(center, dtype=float))
    images = group.quat_mul(group.group_quaternions(), c[None, :])
    return np.arccos(np.clip((x @ images.T).max(axis=1), -1.0, 1.0))


def bump_values(points, bump: Bump) -> np.ndarray:
    d = quotient_distance(points, bump.center)
    out = np.zeros(len(d))
    inside = d < bump.radius
    d2 = d[inside] ** 2
    out[inside] = bump.amplitude * np.exp(d2 / (d2 - bump.radius**2))
    return out


def init_bump(mesh: TetMeshP2, spec: InitSpec) -> np.ndarray:
    """Class vector interpolating the initial displacement of ``spec``."""
    nodes = mesh.nodes
    first = np.full(mesh.n_classes, -1)
    first[mesh.node_class[::-1]] = np.arange(mesh.n_nodes)[::-1]
    pts = nodes[first]
    U = np.full(mesh.n_classes, float(spec.constant))
    for b in spec.bumps:
        U += bump_values(pts, b)
    return U


def velocity_vector(mesh: TetMeshP2, spec: InitSpec) -> np.ndarray:
    v = spec.velocity
    if callable(v):
        first = np.full(mesh.n_classes, -1)
        first[mesh.node_class[::-1]] = np.arange(mesh.n_nodes)[::-1]
        return np.asarray(v(mesh.nodes[first]), dtype=float)
    v = np.asarray(v, dtype=float)
    return np.broadcast_to(v, (mesh.n_classes,)).copy()


@dataclass
class FieldState:
    """Two time levels ``U_prev = U - D`` and ``U_curr = U`` at ``t_curr = t0 + n dt``."""

    U: np.ndarray
    D: np.ndarray
    n: int
    t0: float
    dt: float
    model: ScaleFactorModel
    Z: np.ndarray | None = None
    n_hist: int = 0
    cg_iterations: int = 0

    @property
    def t_curr(self) -> float:
        return self.t0 + self.n * self.dt

    @property
    def U_curr(self) -> np.ndarray:
        return self.U

    @property
    def U_prev(self) -> np.ndarray:
        return self.U - self.D

    @property
    def velocity(self) -> np.ndarray:
        return self.D / self.dt


class Stepper:
    """Holds matrices in the layout needed by the compiled or numpy time loop."""

    def __init__(self, matrices: SystemMatrices, use_jit: bool | None = None,
                 tol: float = CG_TOL, maxiter: int = CG_MAXITER):
        self.matrices = matrices
        self.M = matrices.M.tocsr()
        self.A = matrices.A.tocsr()
        self.abs_A = abs(self.A)
        self.inv_diag = 1.0 / self.M.diagonal()
        self.use_jit = JIT_ENABLED if use_jit is None else use_jit
        self.tol = tol
        self.maxiter = maxiter

    def solve_mass(self, b, x0=None, atol: float = 0.0) -> np.ndarray:
        x = np.zeros_like(b) if x0 is None else x0.copy()
        if kernels.pcg_np(self.M, self.inv_diag, b, x, self.tol, self.maxiter, atol) < 0:
            raise kernels.SolverError("mass solve did not converge")
        return x

    def advance(self, state: FieldState, n_steps: int) -> FieldState:
        if n_steps <= 0:
            return state
        if state.Z is None:
            state.Z = np.zeros((kernels.HISTORY, len(state.U)))
            state.n_hist = 0
        model = state.model
        if self.use_jit and model.code >= 0:
            it, state.n_hist = kernels.advance_nb(
                self.M.indptr, self.M.indices, self.M.data,
                self.A.indptr, self.A.indices, self.A.data, self.inv_diag,
                state.U, state.D, state.Z, state.n_hist, state.n, n_steps, state.t0, state.dt,
                model.code, float(model.H), self.tol, self.maxiter,
            )
        else:
            it, state.n_hist = kernels.advance_np(
                self.M, self.A, self.abs_A, self.inv_diag, state.U, state.D, state.Z, state.n_hist,
                state.n, n_steps, state.t0, state.dt, model, self.tol, self.maxiter,
            )
        if it < 0:
            raise kernels.SolverError(
                f"CG did not converge at step {state.n - it - 1} (t = {state.t0 + (state.n - it - 1) * state.dt:g})"
            )
        state.n += n_steps
        state.cg_iterations += it
        return state


def start_state(
    matrices: SystemMatrices, model: ScaleFactorModel, U0, U1, t_star: float, dt: float,
    start_order: int = 1, stepper: Stepper | None = None,
) -> FieldState:
    """Levels ``U^0 = u0`` and ``U^1 = u0 + dt u1`` (plus ``dt^2/2 u''`` if ``start_order == 2``)."""
    U0 = np.asarray(U0, dtype=float)
    D = dt * np.asarray(U1, dtype=float)
    if start_order == 2:
        stepper = stepper or Stepper(matrices)
        a = float(model.a(t_star))
        rhs, floor = kernels.rhs_with_floor_np(stepper.A, stepper.abs_A, U0)
        accel = -3.0 * float(model.hubble(t_star)) * U1 - stepper.solve_mass(rhs, atol=floor) / a**2
        D = D + 0.5 * dt * dt * accel
    elif start_order != 1:
        raise ValueError("start_order must be 1 or 2")
    return FieldState(U0 + D, D, 1, float(t_star), float(dt), model)


def step(state: FieldState, matrices: SystemMatrices | Stepper) -> FieldState:
    """Advance one time step (in place) and return the state."""
    stepper = matrices if isinstance(matrices, Stepper) else Stepper(matrices)
    return stepper.advance(state, 1)


def discrete_energy(state: FieldState, matrices: SystemMatrices) -> float:
    """``|D/dt|_M^2 + a^-2 <(K+D) U_prev, U_curr>`` at the current level."""
    a = float(state.model.a(state.t_curr))
    W = matrices.A @ state.U
    kinetic = state.D @ (matrices.M @ state.D) / state.dt**2
    # <A U_prev, U> = <A U, U> - <A U, D>
    potential = (W @ state.U - W @ state.D) / (a * a)
    return float(kinetic + potential)


def norm_diagnostic(state: FieldState, diagnostics: TetDiagnostics) -> float:
    """Weighted L2 distance between ``Delta u_h`` and ``A(t) d_t u_h`` sampled at centroids."""
    weight = state.model.norm_weight(state.t_curr)
    lap = diagnostics.laplacian_at_centroids(state.U)
    vel = diagnostics.values_at_centroids(state.D) / state.dt
    r = lap - weight * vel
    return float(math.sqrt(np.sum(diagnostics.weighted_volumes * r * r)))


def cfl_limit(mesh: TetMeshP2, model: ScaleFactorModel, t_star: float) -> float:
    return CFL_FACTOR * mesh.h_min() * float(model.a(t_star))


@dataclass
class Trajectory:
    times: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    probes: np.ndarray  # (n_log, n_probes)
    probe_points: np.ndarray
    snapshots: dict
    state: FieldState
    dt: float

    @property
    def final(self) -> np.ndarray:
        return self.state.U


def _fmt(v) -> str:
    return f"{v:.17g}"


def _snapshot_name(t: float) -> str:
    return f"state_t{t:.6f}.tsv"


def write_outputs(traj: Trajectory, out_dir, header: str = "") -> None:
    os.makedirs(out_dir, exist_ok=True)
    head = f"# {header}\n" if header else ""

    def dump(name, cols, rows):
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(head + "# " + "\t".join(cols) + "\n")
            for row in rows:
                fh.write("\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")

    t = [float(v) for v in traj.times]
    dump("energy.tsv", ["t", "E_d"], zip(t, map(float, traj.energy)))
    if np.any(np.isfinite(traj.norm)):
        dump("norm.tsv", ["t", "Norm"], zip(t, map(float, traj.norm)))
    for k in range(traj.probes.shape[1]):
        dump(f"probe_{k}.tsv", ["t", "value"], zip(t, map(float, traj.probes[:, k])))
    for ts, U in traj.snapshots.items():
        dump(_snapshot_name(ts), ["class_id", "value"], ((i, float(v)) for i, v in enumerate(U)))


def read_state(path) -> np.ndarray:
    """Read a ``class_id value`` snapshot file."""
    ids, vals = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'class_id value'")
            ids.append(int(parts[0]))
            vals.append(float(parts[1]))
    U = np.empty(len(ids))
    U[np.array(ids)] = vals
    return U


def run(
    mesh: TetMeshP2,
    matrices: SystemMatrices,
    init,
    t_star: float,
    t_end: float,
    dt: float = DEFAULT_DT,
    model: ScaleFactorModel | None = None,
    probes=(),
    snapshot_times=(),
    log_interval: float = 0.05,
    start_order: int = 1,
    out_dir=None,
    stepper: Stepper | None = None,
    diagnostics: TetDiagnostics | None = None,
    with_norm: bool = True,
    callback=None,
) -> Trajectory:
    """Integrate from ``t_star`` to ``t_end`` logging energy, Norm and probes.

    ``init`` is an :class:`InitSpec` or a pair ``(U0, U1)`` of class vectors.
    ``callback(state)`` is called at every log record.
    """
    if model is None:
        raise ValueError("a scale-factor model is required")
    if not t_end > t_star:
        raise ValueError("t_end must exceed t_star")
    if not dt > 0:
        raise ValueError("dt must be positive")
    cap = cfl_limit(mesh, model, t_star)
    if dt > cap:
        log.warning("dt=%g exceeds the CFL cap %g; using the cap", dt, cap)
        dt = cap
    if isinstance(init, InitSpec):
        U0, U1 = init_bump(mesh, init), velocity_vector(mesh, init)
        header = f"init={init.label}" + (f" seed={init.seed}" if init.seed is not None else "")
    else:
        U0, U1 = (np.asarray(v, dtype=float) for v in init)
        header = "init=vector"
    header += f" model={model.kind} H={model.H:g} t_star={t_star:g} dt={dt:g} level={mesh.level}"

    stepper = stepper or Stepper(matrices)
    state = start_state(matrices, model, U0, U1, t_star, dt, start_order, stepper)
    n_total = int(round((t_end - t_star) / dt))
    every = max(1, int(round(log_interval / dt)))
    probe_points = np.asarray(probes, dtype=float).reshape(-1, 3)
    if len(probe_points):
        loc = Locator(mesh)
        p_tets, p_lam = loc.locate(probe_points)
        from .mesh import LOCAL_EDGES

        p_phi = np.concatenate(
            [p_lam * (2 * p_lam - 1), 4 * p_lam[:, LOCAL_EDGES[:, 0]] * p_lam[:, LOCAL_EDGES[:, 1]]], axis=1
        )
        p_cls = mesh.tet_classes[p_tets]
    norm_ok = with_norm and model.code >= 0
    if norm_ok and diagnostics is None:
        diagnostics = TetDiagnostics(mesh)

    snaps = sorted(float(s) for s in snapshot_times)
    snap_steps = {}
    for s in snaps:
        n = int(round((s - t_star) / dt))
        if 0 <= n <= n_total:
            snap_steps.setdefault(n, []).append(s)
    snapshots = {}
    if 0 in snap_steps:
        for s in snap_steps[0]:
            snapshots[s] = U0.copy()

    times, energy, norm, probe_vals = [], [], [], []

    def record():
        times.append(state.t_curr)
        energy.append(discrete_energy(state, matrices))
        norm.append(norm_diagnostic(state, diagnostics) if norm_ok else float("nan"))
        if len(probe_points):
            probe_vals.append(np.einsum("ni,ni->n", p_phi, state.U[p_cls]))
        if callback is not None:
            callback(state)

    stops = sorted(set(list(range(1 + every, n_total + 1, every)) + [n_total] + [n for n in snap_steps if n > 1]))
    stops = [n for n in stops if n > state.n]
    if 1 in snap_steps:
        for s in snap_steps[1]:
            snapshots[s] = state.U.copy()
    record()
    for stop in stops:
        stepper.advance(state, stop - state.n)
        if stop in snap_steps:
            for s in snap_steps[stop]:
                snapshots[s] = state.U.copy()
        if (stop - 1) % every == 0 or stop == n_total:
            record()

    traj = Trajectory(
        np.array(times),
        np.array(energy),
        np.array(norm),
        np.array(probe_vals).reshape(len(times), len(probe_points)),
        probe_points,
        snapshots,
        state,
        dt,
    )
    if out_dir is not None:
        write_outputs(traj, out_dir, header)
    return traj
