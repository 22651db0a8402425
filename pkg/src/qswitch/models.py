"""Builders for the three nested switch models and the two-level limit ODE.

Canonical atomic basis orders, used everywhere and never permuted:

* 4-level relay:   (g, h, e, s)  -> indices 0, 1, 2, 3
* 3-level reduced: (g, h, s)     -> indices 0, 1, 2
* 2-level limit:   (g, h)        -> indices 0, 1

Port order of every model: 1/2 POWER in/out, 3/4 SET, 5/6 RESET, then pure
atomic decay channels.  Coherent drives displace the odd (input) ports:
d1 = beta, d3 = alpha_s, d5 = alpha_r.

Drive-phase gauge: the sign convention of the displaced drive Hamiltonian
follows from the displacement rule L -> L + S d, H -> H + Im{L+ S d} with
Im{X} = (X - X.dag())/2i.  Replacing (alpha_s, alpha_r) by their negatives
is a gauge change that leaves every population, every |coherence| and the
whole limit ODE invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .opalg import (DensityMatrix, HilbertSpace, Operator, annihilation,
                    embed, expectation, projector, transition)
from .slh import SLHModel
from .dynamics import Diagnostics, IntegrationConfig, Trajectory

__all__ = [
    "SwitchParameters",
    "DriveAmplitudes",
    "LimitState",
    "NoUniqueEquilibriumError",
    "NoSwitchError",
    "ATOM4",
    "ATOM3",
    "ATOM2",
    "atom_index",
    "build_primary",
    "build_intermediate",
    "displaced_intermediate_generator",
    "build_limit",
    "limit_rhs",
    "limit_equilibrium",
    "integrate_limit",
    "output_amplitudes",
    "preset",
    "PRESET_NAMES",
]

ATOM4 = ("g", "h", "e", "s")
ATOM3 = ("g", "h", "s")
ATOM2 = ("g", "h")


class NoUniqueEquilibriumError(ValueError):
    """Raised when both control drives vanish: every population is stationary."""


class NoSwitchError(RuntimeError):
    """Raised when a trajectory never reaches the switching criterion."""


def atom_index(levels: tuple[str, ...], name: str) -> int:
    try:
        return levels.index(name)
    except ValueError:
        raise ValueError(f"unknown atomic level {name!r}; have {levels}") from None


@dataclass(frozen=True)
class SwitchParameters:
    """Physical rates of the relay; all in the same inverse-time unit.

    Gamma is the atomic spontaneous emission rate (applied uniformly to all
    four decay channels), kappa_* the field decay rates per mirror, g_* the
    vacuum Rabi frequencies, k1/k2 the dimensionless scaling parameters of
    the strong-coupling limit, n_* the Fock truncations per cavity mode.
    """

    Gamma: float = 0.3
    kappa_p: float = 50.0
    kappa_s: float = 50.0
    kappa_r: float = 50.0
    g_p: float = 50.0
    g_s: float = 10.0
    g_r: float = 10.0
    k1: float = 1.0
    k2: float = 1.0
    n_power: int = 3
    n_set: int = 3
    n_reset: int = 3

    def __post_init__(self):
        for name in ("Gamma", "kappa_p", "kappa_s", "kappa_r", "g_p", "g_s", "g_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("scaling parameters k1, k2 must be positive")
        for name in ("n_power", "n_set", "n_reset"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2, got {getattr(self, name)}")

    @property
    def enhanced_rate(self) -> float:
        """gamma = g^2/kappa of the control transitions (needs symmetric
        SET/RESET cavities)."""
        if not (math.isclose(self.g_s, self.g_r) and math.isclose(self.kappa_s, self.kappa_r)):
            raise ValueError("enhanced rate assumes g_s = g_r and kappa_s = kappa_r")
        return self.g_s ** 2 / self.kappa_s

    def with_scaling(self, k: float) -> "SwitchParameters":
        return replace(self, k1=k, k2=k)

    def with_truncation(self, n: int) -> "SwitchParameters":
        return replace(self, n_power=n, n_set=n, n_reset=n)


@dataclass(frozen=True)
class DriveAmplitudes:
    """Coherent input amplitudes, units sqrt(photons per unit time)."""

    beta: complex = 0.0
    alpha_s: complex = 0.0
    alpha_r: complex = 0.0

    def __post_init__(self):
        for name in ("beta", "alpha_s", "alpha_r"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def port_vector(self, n_ports: int) -> list[complex]:
        """Displacement vector: d1 = beta, d3 = alpha_s, d5 = alpha_r."""
        if n_ports < 6:
            raise ValueError(f"need at least 6 ports, got {n_ports}")
        d = [0j] * n_ports
        d[0] = complex(self.beta)
        d[2] = complex(self.alpha_s)
        d[4] = complex(self.alpha_r)
        return d


@dataclass(frozen=True)
class LimitState:
    """Two independent matrix elements of the limit model state.

    rho_hh is implied as 1 - rho_gg; the assembled 2x2 matrix must be a
    valid density matrix.
    """

    rho_gg: float
    rho_hg: complex = 0j

    def __post_init__(self):
        if not -1e-12 <= self.rho_gg <= 1 + 1e-12:
            raise ValueError(f"rho_gg = {self.rho_gg} outside [0, 1]")
        pos = self.rho_gg * (1.0 - self.rho_gg) - abs(self.rho_hg) ** 2
        if pos < -1e-10:
            raise ValueError(
                f"positivity violated: rho_gg(1-rho_gg) - |rho_hg|^2 = {pos:.3e}")

    def as_matrix(self) -> np.ndarray:
        m = np.array([[self.rho_gg, np.conj(self.rho_hg)],
                      [self.rho_hg, 1.0 - self.rho_gg]], dtype=complex)
        return m


def _primary_space(p: SwitchParameters) -> HilbertSpace:
    return HilbertSpace([("atom", 4), ("power", p.n_power),
                         ("set", p.n_set), ("reset", p.n_reset)])


def build_primary(p: SwitchParameters) -> SLHModel:
    """The full relay: 4-level atom and three driven cavity modes, 10 ports.

    S = I.  Ports 1-6 carry the POWER/SET/RESET mirrors (two each), ports
    7-10 the four atomic spontaneous emission channels.
    """
    space = _primary_space(p)
    a = embed(annihilation(p.n_power), "power", space)
    b = embed(annihilation(p.n_set), "set", space)
    c = embed(annihilation(p.n_reset), "reset", space)
    s_ge = embed(transition(4, 2, 0), "atom", space)   # |g><e|
    s_he = embed(transition(4, 2, 1), "atom", space)   # |h><e|
    s_gs = embed(transition(4, 3, 0), "atom", space)   # |g><s|
    s_hs = embed(transition(4, 3, 1), "atom", space)   # |h><s|

    H = (1j * p.k1 ** 2 * p.g_p) * (a.dag() @ s_ge - a @ s_ge.dag()) \
        + (1j * p.k2 * p.g_s) * (b.dag() @ s_gs - b @ s_gs.dag()) \
        + (1j * p.k2 * p.g_r) * (c.dag() @ s_hs - c @ s_hs.dag())

    sq = math.sqrt
    L = [
        p.k1 * sq(p.kappa_p) * a, p.k1 * sq(p.kappa_p) * a,
        p.k2 * sq(p.kappa_s) * b, p.k2 * sq(p.kappa_s) * b,
        p.k2 * sq(p.kappa_r) * c, p.k2 * sq(p.kappa_r) * c,
        sq(p.Gamma) * s_gs, sq(p.Gamma) * s_hs,
        sq(p.Gamma) * s_ge, sq(p.Gamma) * s_he,
    ]
    eye = Operator.identity(space)
    zero = Operator.zero(space)
    S = [[eye if i == j else zero for j in range(10)] for i in range(10)]
    return SLHModel(space, S, L, H)


def build_intermediate(gamma: float, Gamma: float) -> SLHModel:
    """The 3-level model after eliminating the excited state and all modes.

    gamma = g^2/kappa is the cavity-enhanced decay rate of the control
    transitions.  8 ports; the scattering block of ports 1/2 routes POWER by
    relay state, S12 = S21 = -Pi_hs.
    """
    if gamma < 0 or Gamma < 0:
        raise ValueError("rates must be >= 0")
    space = HilbertSpace.single("atom", 3)
    pi_g = embed(projector(3, 0), "atom", space)
    pi_hs = embed(projector(3, 1), "atom", space) + embed(projector(3, 2), "atom", space)
    s_gs = embed(transition(3, 2, 0), "atom", space)
    s_hs = embed(transition(3, 2, 1), "atom", space)
    eye = Operator.identity(space)
    zero = Operator.zero(space)

    S = [[zero] * 8 for _ in range(8)]
    S[0][0] = pi_g
    S[1][1] = pi_g
    S[0][1] = -1 * pi_hs
    S[1][0] = -1 * pi_hs
    S[2][3] = eye
    S[3][2] = eye
    S[4][5] = eye
    S[5][4] = eye
    S[6][6] = eye
    S[7][7] = eye

    rg = math.sqrt(gamma)
    rG = math.sqrt(Gamma)
    L = [zero, zero, rg * s_gs, rg * s_gs, rg * s_hs, rg * s_hs,
         rG * s_gs, rG * s_hs]
    return SLHModel(space, S, L, zero)


def displaced_intermediate_generator(
        gamma: float, Gamma: float,
        drives: DriveAmplitudes) -> tuple[Operator, tuple[Operator, ...]]:
    """Hand-built generator of the coherently driven 3-level model.

    Drive Hamiltonian on the g-s and h-s transitions, decay channels from
    |s> to |g> and |h> at rate Gamma + 2*gamma each, and a dephasing channel
    at rate |beta|^2 that distinguishes |g> from the (h, s) subspace.  Must
    agree with generator(displace(build_intermediate(...), d)) on every
    state; see the drive-phase gauge note in the module docstring.
    """
    if gamma < 0 or Gamma < 0:
        raise ValueError("rates must be >= 0")
    space = HilbertSpace.single("atom", 3)
    s_gs = embed(transition(3, 2, 0), "atom", space)
    s_hs = embed(transition(3, 2, 1), "atom", space)
    pi_g = embed(projector(3, 0), "atom", space)
    pi_hs = embed(projector(3, 1), "atom", space) + embed(projector(3, 2), "atom", space)

    rg = math.sqrt(gamma)
    al_s, al_r = complex(drives.alpha_s), complex(drives.alpha_r)
    H = (-1j * rg) * ((al_s * s_gs.dag()) - (np.conj(al_s) * s_gs)) \
        + (-1j * rg) * ((al_r * s_hs.dag()) - (np.conj(al_r) * s_hs))

    rate = math.sqrt(Gamma + 2.0 * gamma)
    b = abs(complex(drives.beta))
    L = (rate * s_gs, rate * s_hs, b * pi_g, b * pi_hs)
    return H, L


def build_limit() -> SLHModel:
    """The scattering-matrix limit: a 2-level relay routing six ports.

    L and H vanish; the 6x6 operator-valued S is exactly unitary.  The two
    pure atomic decay channels of the intermediate model carry no scattering
    entries in the limit and are dropped (keeping them with zero rows would
    break unitarity).
    """
    space = HilbertSpace.single("atom", 2)
    pi_g = embed(projector(2, 0), "atom", space)
    pi_h = embed(projector(2, 1), "atom", space)
    s_gh = embed(transition(2, 1, 0), "atom", space)   # |g><h|
    s_hg = embed(transition(2, 0, 1), "atom", space)   # |h><g|
    eye = Operator.identity(space)
    zero = Operator.zero(space)

    S = [[zero] * 6 for _ in range(6)]
    S[0][0] = pi_g
    S[1][1] = pi_g
    S[0][1] = -1 * pi_h
    S[1][0] = -1 * pi_h
    S[2][2] = -0.5 * pi_g
    S[3][3] = -0.5 * pi_g
    S[2][3] = eye - 0.5 * pi_g
    S[3][2] = eye - 0.5 * pi_g
    S[4][4] = -0.5 * pi_h
    S[5][5] = -0.5 * pi_h
    S[4][5] = eye - 0.5 * pi_h
    S[5][4] = eye - 0.5 * pi_h
    for i in (2, 3):
        for j in (4, 5):
            S[i][j] = -0.5 * s_gh
    for i in (4, 5):
        for j in (2, 3):
            S[i][j] = -0.5 * s_hg

    L = [zero] * 6
    return SLHModel(space, S, L, zero)


def limit_rhs(x: LimitState, d: DriveAmplitudes) -> tuple[float, complex]:
    """Time derivative (d rho_gg, d rho_hg) of the limit master equation."""
    d_gg, d_hg = _limit_rhs_raw(x.rho_gg, x.rho_hg, d)
    return d_gg, complex(d_hg)


def limit_equilibrium(d: DriveAmplitudes) -> LimitState:
    """Closed-form fixed point of the limit master equation."""
    as2 = abs(d.alpha_s) ** 2
    ar2 = abs(d.alpha_r) ** 2
    if as2 + ar2 == 0:
        raise NoUniqueEquilibriumError(
            "with both control drives off every population is an equilibrium")
    rho_gg = ar2 / (as2 + ar2)
    rho_hg = -d.alpha_s * np.conj(d.alpha_r) / (2 * abs(d.beta) ** 2 + as2 + ar2)
    return LimitState(rho_gg=rho_gg, rho_hg=complex(rho_hg))


def integrate_limit(d: DriveAmplitudes, x0: LimitState,
                    config: IntegrationConfig) -> Trajectory:
    """RK4 integration of the two-variable limit ODE, recorded like a full run.

    Channels mirror the full models: populations plus the displaced POWER
    output amplitudes out = -beta*rho_hh and outbar = beta*rho_gg.
    """
    space = HilbertSpace.single("atom", 2)
    n_steps = max(1, int(round(config.t_final / config.dt)))
    stride = min(config.record_stride, n_steps)
    h = config.dt

    def rhs(y: np.ndarray) -> np.ndarray:
        st = (float(y[0].real), y[1])
        d_gg, d_hg = _limit_rhs_raw(st[0], st[1], d)
        return np.array([d_gg, d_hg], dtype=complex)

    y = np.array([x0.rho_gg, x0.rho_hg], dtype=complex)
    times = [0.0]
    samples = [y.copy()]
    for k in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            times.append((k + 1) * h)
            samples.append(y.copy())

    beta = complex(d.beta)
    pop_g = np.array([s[0].real for s in samples])
    pop_h = 1.0 - pop_g
    out = -beta * pop_h
    outbar = beta * pop_g
    reduced = np.array([LimitState(min(max(s[0].real, 0.0), 1.0), s[1]).as_matrix()
                        for s in samples])
    final = DensityMatrix(space, reduced[-1], validate=False)
    diag = Diagnostics(dt=h, method="rk4", n_steps=n_steps,
                       min_eigenvalue=float(
                           min(np.linalg.eigvalsh(r).min() for r in reduced)))
    channels = {
        "pop_g": pop_g.astype(complex),
        "pop_h": pop_h.astype(complex),
        "out": out.astype(complex),
        "outbar": outbar.astype(complex),
    }
    return Trajectory(times=np.array(times), channels=channels,
                      final_state=final, diagnostics=diag,
                      reduced_states=reduced)


def _limit_rhs_raw(rho_gg: float, rho_hg: complex, d: DriveAmplitudes):
    as2 = abs(d.alpha_s) ** 2
    ar2 = abs(d.alpha_r) ** 2
    d_gg = 0.5 * (-as2 * rho_gg + ar2 * (1.0 - rho_gg))
    d_hg = (-0.5 * d.alpha_s * np.conj(d.alpha_r)
            - rho_hg * (abs(d.beta) ** 2 + 0.5 * as2 + 0.5 * ar2))
    return d_gg, d_hg


def output_amplitudes(g_displaced: SLHModel, rho: DensityMatrix) -> np.ndarray:
    """Coherent output amplitude of every port: <L_i> of the displaced model."""
    if rho.space != g_displaced.space:
        raise ValueError("state and model must share a space")
    return np.array([expectation(rho, li) for li in g_displaced.L])


def _platform_preset(g: float, kappa: float, Gamma: float) -> tuple[SwitchParameters, DriveAmplitudes]:
    params = SwitchParameters(Gamma=Gamma, kappa_p=kappa, kappa_s=kappa,
                              kappa_r=kappa, g_p=g, g_s=g, g_r=g)
    beta = math.sqrt(0.005 * kappa)          # same beta^2/kappa_p ratio as paper-fig2
    alpha = beta / math.sqrt(10.0)           # power gain 10
    return params, DriveAmplitudes(beta=beta, alpha_s=alpha, alpha_r=alpha)


def preset(name: str) -> tuple[SwitchParameters, DriveAmplitudes]:
    """Named parameter presets.

    "paper-fig2": the benchmark operating point (Gamma=0.3, g_p=50,
    g_s=g_r=10, kappa=50, beta=0.5; the control amplitude is fixed by the
    power-gain-10 relation, |alpha|^2 = |beta|^2/10 = 0.025, the only
    constraint the benchmark pins on it).  "gaas-inas" and "gap-nv" are
    documented platform presets, (g, kappa, Gamma)/2pi = (16, 16, 0.1) GHz
    and (2.25, 0.16, 0.013) GHz expressed in angular units (1/ns), with
    drives scaled to the same beta^2/kappa_p ratio as paper-fig2.
    """
    if name == "paper-fig2":
        params = SwitchParameters()
        return params, DriveAmplitudes(beta=0.5, alpha_s=math.sqrt(0.025),
                                       alpha_r=math.sqrt(0.025))
    tau = 2.0 * math.pi
    if name == "gaas-inas":
        return _platform_preset(16.0 * tau, 16.0 * tau, 0.1 * tau)
    if name == "gap-nv":
        return _platform_preset(2.25 * tau, 0.16 * tau, 0.013 * tau)
    raise ValueError(f"unknown preset {name!r}; have {sorted(PRESET_NAMES)}")


PRESET_NAMES = ("paper-fig2", "gaas-inas", "gap-nv")
