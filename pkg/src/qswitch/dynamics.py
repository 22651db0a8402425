"""Lindblad master-equation right-hand side, time integration, steady states.

The direct right-hand side (`lindblad_rhs`, sparse H and L against a dense
state) is the reference implementation.  For propagation the generator is
compiled once into a sparse Liouvillian acting on the row-major vectorized
state; the compiled form is validated against the direct form on random
states every time it is built, so the two routes can never drift apart
silently.  A dense Liouvillian is only ever materialized for the exact
steady-state solve on small spaces (dim <= 16).

The integrator never renormalizes the trace: trace drift, Hermiticity
defect and negativity are monitored and breaching the configured tolerances
fails the run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .opalg import DensityMatrix, HilbertSpace, Operator
from .slh import SLHModel, generator

__all__ = [
    "IntegrationConfig",
    "Diagnostics",
    "Trajectory",
    "IntegrationError",
    "ToleranceError",
    "InstabilityError",
    "SteadyStateTimeout",
    "lindblad_rhs",
    "LindbladPropagator",
    "integrate",
    "steady_state",
    "steady_state_exact",
    "trajectory_distance",
]

GeneratorLike = Union[SLHModel, tuple]


class IntegrationError(RuntimeError):
    """An integration run failed; carries the diagnostics gathered so far."""

    def __init__(self, message: str, diagnostics: "Diagnostics | None" = None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ToleranceError(IntegrationError):
    """Trace drift or negativity went beyond the configured tolerance."""


class InstabilityError(IntegrationError):
    """The state norm diverged (step size too large for the fastest rate)."""


class SteadyStateTimeout(IntegrationError):
    """No steady state reached by t_max; carries the last residual."""

    def __init__(self, message: str, residual: float,
                 diagnostics: "Diagnostics | None" = None):
        super().__init__(message, diagnostics)
        self.residual = residual


@dataclass(frozen=True)
class IntegrationConfig:
    """Knobs for one integration run.

    method is "rk4" (fixed-step classical 4th order, the default used by all
    acceptance runs) or "rk45" (adaptive Dormand-Prince via scipy, used as a
    cross-check).  record_stride is in integrator steps.
    """

    method: str = "rk4"
    dt: float = 2e-3
    t_final: float = 600.0
    record_stride: int = 250
    trace_tol: float = 1e-8
    positivity_floor: float = -1e-8
    hermiticity_tol: float = 1e-10
    rtol: float = 1e-8
    atol: float = 1e-10
    truncation_check: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Diagnostics:
    max_trace_drift: float = 0.0
    min_eigenvalue: float = 1.0
    max_hermiticity_defect: float = 0.0
    n_steps: int = 0
    dt: float = 0.0
    method: str = "rk4"
    settle_residual: float | None = None
    truncation_delta: float | None = None


@dataclass
class Trajectory:
    """Recorded observables over time plus the final state.

    All channel arrays share the length of `times`.  `reduced_states`, when
    recorded, holds the reduced state on the requested factor at every
    sample (shape (n_samples, d, d)).
    """

    times: np.ndarray
    channels: dict[str, np.ndarray]
    final_state: DensityMatrix
    diagnostics: Diagnostics
    reduced_states: np.ndarray | None = None


def _as_generator(g: GeneratorLike) -> tuple[Operator, tuple[Operator, ...]]:
    if isinstance(g, SLHModel):
        return generator(g)
    h, ls = g
    return h, tuple(ls)


def lindblad_rhs(rho: Union[DensityMatrix, np.ndarray], H: Operator,
                 L: Sequence[Operator]) -> np.ndarray:
    """d(rho)/dt = -i[H, rho] + sum_i (L_i rho L_i+ - (1/2){L_i+ L_i, rho}).

    Reference implementation by direct matrix products.  The trace of the
    result is zero and the result is Hermitian whenever rho is.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    space = H.space
    if m.shape != (space.dim, space.dim):
        raise ValueError(f"state shape {m.shape} does not match space dim {space.dim}")
    for op in L:
        if op.space != space:
            raise ValueError("H and every L must live on the same space")
    hs = H.csr()
    out = -1j * (hs @ m - m @ hs)
    for op in L:
        ls = op.csr()
        ld = ls.conj().T.tocsr()
        ldl = (ld @ ls).tocsr()
        out += ls @ m @ ld - 0.5 * (ldl @ m + m @ ldl)
    return np.asarray(out)


class LindbladPropagator:
    """A generator compiled to a sparse Liouvillian on vec(rho), row-major.

    vec(A rho B) = (A kron B^T) vec(rho), so

        Liou = -i (H kron I - I kron H^T)
               + sum_i [ L kron conj(L) - (1/2)(L+L kron I + I kron (L+L)^T) ]

    Construction cross-validates the compiled matrix against the direct
    `lindblad_rhs` on random Hermitian states and refuses to return a
    Liouvillian that disagrees with it.
    """

    def __init__(self, H: Operator, L: Sequence[Operator], validate: bool = True):
        self.space = H.space
        self.dim = H.space.dim
        d = self.dim
        eye = sp.identity(d, dtype=complex, format="csr")
        hs = H.csr()
        liou = -1j * (sp.kron(hs, eye, format="csr") - sp.kron(eye, hs.T, format="csr"))
        for op in L:
            if op.space != self.space:
                raise ValueError("H and every L must live on the same space")
            ls = op.csr()
            ldl = (ls.conj().T @ ls).tocsr()
            liou = liou + sp.kron(ls, ls.conj(), format="csr") \
                - 0.5 * (sp.kron(ldl, eye, format="csr")
                         + sp.kron(eye, ldl.T, format="csr"))
        self.matrix = liou.tocsr()
        self.matrix.sort_indices()
        self._H = H
        self._L = tuple(L)
        if validate:
            self._validate()

    def _validate(self):
        rng = np.random.default_rng(0)
        d = self.dim
        scale = max(self.scale(), 1.0)
        for _ in range(3):
            r = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            r = r @ r.conj().T
            r /= np.trace(r).real
            direct = lindblad_rhs(r, self._H, self._L)
            compiled = (self.matrix @ r.reshape(-1)).reshape(d, d)
            if np.abs(direct - compiled).max() > 1e-10 * scale:
                raise AssertionError(
                    "compiled Liouvillian disagrees with the direct right-hand side")

    def scale(self) -> float:
        """A crude magnitude of the fastest rate (max |entry| of the Liouvillian)."""
        return 0.0 if self.matrix.nnz == 0 else float(np.abs(self.matrix.data).max())

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def rk4_step(self, v: np.ndarray, h: float) -> np.ndarray:
        # Horner form of classical RK4 for a linear autonomous system;
        # identical to the four-stage scheme in exact arithmetic.
        m = self.matrix
        w = v + (h / 4.0) * (m @ v)
        w = v + (h / 3.0) * (m @ w)
        w = v + (h / 2.0) * (m @ w)
        return v + h * (m @ w)

    def residual(self, v: np.ndarray) -> float:
        """Frobenius norm of the right-hand side at vec state v."""
        return float(np.linalg.norm(self.matrix @ v))


def _trace_dual(op: Operator) -> sp.csr_matrix:
    """Row vector w with w @ vec(rho) = Tr(rho op)."""
    return sp.csr_matrix(op.csr().T.reshape(1, -1))


def _reduced_axes(space: HilbertSpace, label: str):
    return space.axis(label), space.dims


def _reduce_state(m: np.ndarray, dims, axis: int) -> np.ndarray:
    t = m.reshape(tuple(dims) + tuple(dims))
    n = len(dims)
    for ax in reversed([k for k in range(n) if k != axis]):
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    return t


def integrate(model: GeneratorLike, rho0: DensityMatrix, config: IntegrationConfig,
              observables: Mapping[str, Operator] | None = None,
              record_reduced: str | None = None) -> Trajectory:
    """Propagate rho0 under the model's master equation, recording observables.

    `model` is an SLHModel (drive already applied via displace) or a bare
    (H, L-list) generator pair.  Raises ToleranceError on trace drift or
    negativity beyond the configured tolerances and InstabilityError on a
    diverging state norm.
    """
    H, Ls = _as_generator(model)
    space = H.space
    if rho0.space != space:
        raise ValueError(f"state space {rho0.space} != model space {space}")
    observables = dict(observables or {})
    for name, op in observables.items():
        if op.space != space:
            raise ValueError(f"observable {name!r} lives on the wrong space")

    prop = LindbladPropagator(H, Ls)
    d = space.dim
    duals = {name: _trace_dual(op) for name, op in observables.items()}

    n_steps = max(1, int(round(config.t_final / config.dt)))
    stride = min(config.record_stride, n_steps)
    if record_reduced is not None:
        red_axis, dims = _reduced_axes(space, record_reduced)

    diag = Diagnostics(dt=config.dt, method=config.method)

    samples: list[np.ndarray] = []      # channel values per sample
    reduced: list[np.ndarray] = []
    times: list[float] = []

    def record(t: float, v: np.ndarray):
        m = v.reshape(d, d)
        nrm = float(np.linalg.norm(v))
        # a physical state has Frobenius norm <= 1
        if not np.isfinite(nrm) or nrm > 100.0:
            raise InstabilityError(
                f"state norm diverged at t={t:.4g} (|rho| = {nrm:.3g}); "
                "reduce dt", diag)
        tr = np.trace(m)
        drift = abs(tr - 1.0)
        herm = float(np.abs(m - m.conj().T).max())
        low = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
        diag.max_trace_drift = max(diag.max_trace_drift, drift)
        diag.max_hermiticity_defect = max(diag.max_hermiticity_defect, herm)
        diag.min_eigenvalue = min(diag.min_eigenvalue, low)
        if drift > config.trace_tol:
            raise ToleranceError(
                f"trace drift {drift:.3e} > {config.trace_tol:.1e} at t={t:.4g}", diag)
        if herm > config.hermiticity_tol:
            raise ToleranceError(
                f"hermiticity defect {herm:.3e} > {config.hermiticity_tol:.1e} "
                f"at t={t:.4g}", diag)
        if low < config.positivity_floor:
            raise ToleranceError(
                f"eigenvalue {low:.3e} below floor {config.positivity_floor:.1e} "
                f"at t={t:.4g}", diag)
        times.append(t)
        samples.append(np.array([(duals[k] @ v)[0] for k in observables], dtype=complex))
        if record_reduced is not None:
            reduced.append(_reduce_state(m, dims, red_axis))

    v = rho0.matrix.reshape(-1).astype(complex)
    record(0.0, v)

    if config.method == "rk4":
        h = config.dt
        for k in range(n_steps):
            v = prop.rk4_step(v, h)
            if (k + 1) % stride == 0 or k + 1 == n_steps:
                record((k + 1) * h, v)
        diag.n_steps = n_steps
    else:
        from scipy.integrate import solve_ivp

        t_eval = np.arange(0, n_steps + 1, stride, dtype=float) * config.dt
        if t_eval[-1] != config.t_final:
            t_eval = np.append(t_eval, config.t_final)
        sol = solve_ivp(lambda _t, y: prop.apply(y), (0.0, config.t_final), v,
                        method="RK45", t_eval=t_eval, rtol=config.rtol,
                        atol=config.atol)
        if not sol.success:
            raise IntegrationError(f"rk45 failed: {sol.message}", diag)
        times.clear(); samples.clear(); reduced.clear()
        diag.max_trace_drift = 0.0
        diag.min_eigenvalue = 1.0
        diag.max_hermiticity_defect = 0.0
        for t, y in zip(sol.t, sol.y.T):
            record(float(t), y)
        v = sol.y[:, -1]
        diag.n_steps = sol.nfev

    final = DensityMatrix(space, v.reshape(d, d), validate=False)
    block = np.array(samples)
    channel_arrays = {name: block[:, i] for i, name in enumerate(observables)}
    traj = Trajectory(
        times=np.array(times),
        channels=channel_arrays,
        final_state=final,
        diagnostics=diag,
        reduced_states=np.array(reduced) if reduced else None,
    )
    return traj


def steady_state(model: GeneratorLike, rho0: DensityMatrix,
                 config: IntegrationConfig | None = None,
                 settle_tol: float | None = None,
                 t_max: float | None = None) -> DensityMatrix:
    """Integrate until the Frobenius norm of the right-hand side settles.

    Default criterion is 1e-9 * dim; t_max defaults to 10 * config.t_final.
    On spaces of dim <= 16 with a unique steady state the result is
    cross-checked against the exact null-space solve and must agree within
    1e-6 in trace distance.
    """
    H, Ls = _as_generator(model)
    space = H.space
    config = config or IntegrationConfig()
    tol = settle_tol if settle_tol is not None else 1e-9 * space.dim
    t_max = t_max if t_max is not None else 10.0 * config.t_final

    prop = LindbladPropagator(H, Ls)
    d = space.dim
    v = rho0.matrix.reshape(-1).astype(complex)
    diag = Diagnostics(dt=config.dt, method="rk4")

    t = 0.0
    chunk = min(config.t_final, max(config.dt * 100, 1.0))
    residual = prop.residual(v)
    while residual > tol:
        if t >= t_max:
            diag.settle_residual = residual
            raise SteadyStateTimeout(
                f"no steady state by t={t_max:.4g}; residual {residual:.3e} > "
                f"{tol:.1e}", residual, diag)
        n = int(round(chunk / config.dt))
        for _ in range(n):
            v = prop.rk4_step(v, config.dt)
        t += n * config.dt
        tr = np.trace(v.reshape(d, d))
        if not np.isfinite(tr.real) or abs(tr) > 10.0:
            raise InstabilityError(f"diverged during settle at t={t:.4g}", diag)
        residual = prop.residual(v)
    diag.settle_residual = residual

    m = v.reshape(d, d)
    drift = abs(np.trace(m) - 1.0)
    if drift > config.trace_tol:
        raise ToleranceError(
            f"trace drift {drift:.3e} during settle (> {config.trace_tol:.1e})",
            diag)
    out = DensityMatrix(space, 0.5 * (m + m.conj().T), validate=False)

    if d <= 16:
        try:
            exact = steady_state_exact((H, Ls))
        except ValueError:
            exact = None  # degenerate null space; integration picks one member
        if exact is not None:
            dist = trace_distance(out.matrix, exact.matrix)
            if dist > 1e-6:
                raise IntegrationError(
                    f"integrated steady state disagrees with exact null-space "
                    f"solve: trace distance {dist:.3e}", diag)
    return out


def steady_state_exact(model: GeneratorLike) -> DensityMatrix:
    """Null space of the dense Liouvillian; only for spaces of dim <= 16.

    Raises ValueError if the null space is degenerate (no unique steady
    state, e.g. a hold condition with several invariant states).
    """
    H, Ls = _as_generator(model)
    space = H.space
    d = space.dim
    if d > 16:
        raise ValueError(f"exact solve limited to dim <= 16, got {d}")
    liou = LindbladPropagator(H, Ls, validate=False).matrix.toarray()
    scale = max(np.abs(liou).max(), 1.0)
    _, s, vh = np.linalg.svd(liou)
    if s[-2] <= 1e-10 * scale:
        raise ValueError("degenerate steady state (null space dimension > 1)")
    m = vh[-1].conj().reshape(d, d)
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr) < 1e-14:
        raise ValueError("null vector is traceless; no density-matrix steady state")
    m = m / tr
    return DensityMatrix(space, m, validate=False)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) ||a - b||_1 for Hermitian matrices."""
    delta = a - b
    delta = 0.5 * (delta + delta.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(delta)).sum())


_SHARED_BASIS_INDEX = {
    # canonical atomic orders: 4 = (g,h,e,s), 3 = (g,h,s), 2 = (g,h)
    (4, 3): ([0, 1, 3], [0, 1, 2]),
    (3, 4): ([0, 1, 2], [0, 1, 3]),
    (4, 2): ([0, 1], [0, 1]),
    (2, 4): ([0, 1], [0, 1]),
    (3, 2): ([0, 1], [0, 1]),
    (2, 3): ([0, 1], [0, 1]),
}


def _project_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    da, db = a.shape[0], b.shape[0]
    if da == db:
        return a, b
    try:
        ia, ib = _SHARED_BASIS_INDEX[(da, db)]
    except KeyError:
        raise ValueError(f"incompatible reduced dimensions {da} and {db}") from None
    return a[np.ix_(ia, ia)], b[np.ix_(ib, ib)]


def trajectory_distance(a: Trajectory, b: Trajectory) -> float:
    """Max over the common grid of the trace distance of reduced atomic states.

    Both trajectories must carry reduced states.  `b` is resampled onto
    `a`'s grid by taking the nearest earlier sample; states of different
    atomic dimension are projected onto the shared (g,h,s) or (g,h) block
    (not renormalized, so leaked population counts as distance).
    """
    if a.reduced_states is None or b.reduced_states is None:
        raise ValueError("both trajectories must record reduced states")
    tb = b.times
    # tolerance for "same instant" scaled to the grid spacing, so samples a
    # few ulps apart are not resampled against a stale state
    eps = 1e-6 * (tb[1] - tb[0]) if len(tb) > 1 else 1e-12
    worst = 0.0
    for t, ra in zip(a.times, a.reduced_states):
        j = int(np.searchsorted(tb, t + eps)) - 1
        if j < 0:
            j = 0
        pa, pb = _project_pair(ra, b.reduced_states[j])
        worst = max(worst, trace_distance(pa, pb))
    return worst
