"""Scenario runner, switch metrics, convergence studies and CSV emission.

A Scenario pins one model (primary / intermediate / limit), its physical
parameters, the coherent drives and the operating mode.  Modes gate the
control drives: SET leaves only alpha_s on, RESET only alpha_r, HOLD
neither, RACE both.  Trajectories are written to CSV with the fixed column
order ``t,re_a,im_a,pop_g,pop_h,pop_s,pop_e,p_out,p_outbar,norm_amp``;
channels a model does not have are written as empty fields.  One leading
``#``-comment line records the scenario so that metrics can be recomputed
from the file alone.

Output powers in the CSV are coherent-port powers |<L_out>|^2; the contrast
ratio reported by the metrics is the switching extinction of the POWER
beam, full input power |beta|^2 over the steady transmitted coherent power
(the reflected port carries the full input up to the small atomic
scattering when the relay reflects).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c as _c_light, h as _h_planck

from .dynamics import (IntegrationConfig, IntegrationError, Trajectory,
                       integrate, trajectory_distance)
from .models import (ATOM2, ATOM3, ATOM4, DriveAmplitudes, LimitState,
                     NoSwitchError, SwitchParameters, atom_index,
                     build_intermediate, build_limit, build_primary,
                     integrate_limit, preset)
from .opalg import DensityMatrix, embed, projector, annihilation
from .slh import displace

__all__ = [
    "Scenario",
    "Metrics",
    "MODES",
    "MODEL_NAMES",
    "CSV_COLUMNS",
    "run_scenario",
    "compute_metrics",
    "metrics_from_csv",
    "convergence_study",
    "zeno_sweep",
    "write_csv",
    "read_csv",
    "channel_delta",
    "truncation_delta",
]

MODES = ("HOLD", "SET", "RESET", "RACE")
MODEL_NAMES = ("primary", "intermediate", "limit")
CSV_COLUMNS = ("t", "re_a", "im_a", "pop_g", "pop_h", "pop_s", "pop_e",
               "p_out", "p_outbar", "norm_amp")

_LEVELS = {"primary": ATOM4, "intermediate": ATOM3, "limit": ATOM2}


def _masked_drives(drives: DriveAmplitudes, mode: str) -> DriveAmplitudes:
    if mode == "SET":
        return replace(drives, alpha_r=0j)
    if mode == "RESET":
        return replace(drives, alpha_s=0j)
    if mode == "HOLD":
        return replace(drives, alpha_s=0j, alpha_r=0j)
    return drives


@dataclass(frozen=True)
class Scenario:
    """One fully specified run: model, parameters, drives, mode, initial state."""

    model: str
    params: SwitchParameters
    drives: DriveAmplitudes
    mode: str
    init: str = "g"
    config: IntegrationConfig = IntegrationConfig()

    def __post_init__(self):
        if self.model not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.model!r}; have {MODEL_NAMES}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; have {MODES}")
        levels = _LEVELS[self.model]
        if self.init not in levels:
            raise ValueError(
                f"initial level {self.init!r} not in the {self.model} model {levels}")
        a_s, a_r = self.drives.alpha_s, self.drives.alpha_r
        consistent = {
            "HOLD": a_s == 0 and a_r == 0,
            "SET": a_r == 0 and a_s != 0,
            "RESET": a_s == 0 and a_r != 0,
            "RACE": a_s != 0 and a_r != 0,
        }[self.mode]
        if not consistent:
            raise ValueError(
                f"drives (alpha_s={a_s}, alpha_r={a_r}) inconsistent with "
                f"mode {self.mode}")

    @classmethod
    def from_preset(cls, name: str, model: str, mode: str, init: str = "g",
                    config: IntegrationConfig | None = None,
                    params: SwitchParameters | None = None,
                    drives: DriveAmplitudes | None = None) -> "Scenario":
        """Build a scenario from a named preset, gating drives by mode."""
        p, d = preset(name)
        p = params if params is not None else p
        d = drives if drives is not None else d
        if config is None:
            dt = 2e-3 if model == "primary" else 1e-2
            stride = max(1, int(round(0.5 / dt)))
            config = IntegrationConfig(dt=dt, record_stride=stride)
        return cls(model=model, params=p, drives=_masked_drives(d, mode),
                   mode=mode, init=init, config=config)


def _primary_setup(s: Scenario):
    g = build_primary(s.params)
    gd = displace(g, s.drives.port_vector(10))
    space = gd.space
    a = embed(annihilation(s.params.n_power), "power", space)
    obs = {
        "a": a,
        "pop_g": embed(projector(4, 0), "atom", space),
        "pop_h": embed(projector(4, 1), "atom", space),
        "pop_e": embed(projector(4, 2), "atom", space),
        "pop_s": embed(projector(4, 3), "atom", space),
        "out": gd.L[1],
        "outbar": gd.L[0],
    }
    rho0 = DensityMatrix.basis(space, {"atom": atom_index(ATOM4, s.init)})
    return gd, obs, rho0


def _intermediate_setup(s: Scenario):
    g = build_intermediate(s.params.enhanced_rate, s.params.Gamma)
    gd = displace(g, s.drives.port_vector(8))
    space = gd.space
    obs = {
        "pop_g": embed(projector(3, 0), "atom", space),
        "pop_h": embed(projector(3, 1), "atom", space),
        "pop_s": embed(projector(3, 2), "atom", space),
        "out": gd.L[1],
        "outbar": gd.L[0],
    }
    rho0 = DensityMatrix.basis(space, {"atom": atom_index(ATOM3, s.init)})
    return gd, obs, rho0


def _limit_setup(s: Scenario):
    g = build_limit()
    gd = displace(g, s.drives.port_vector(6))
    space = gd.space
    obs = {
        "pop_g": embed(projector(2, 0), "atom", space),
        "pop_h": embed(projector(2, 1), "atom", space),
        "out": gd.L[1],
        "outbar": gd.L[0],
    }
    rho0 = DensityMatrix.basis(space, {"atom": atom_index(ATOM2, s.init)})
    return gd, obs, rho0


_SETUPS = {"primary": _primary_setup, "intermediate": _intermediate_setup,
           "limit": _limit_setup}


def run_scenario(s: Scenario, out_path: str | None = None) -> Trajectory:
    """Build the displaced model, integrate, optionally write the CSV."""
    gd, obs, rho0 = _SETUPS[s.model](s)
    traj = integrate(gd, rho0, s.config, observables=obs, record_reduced="atom")
    if s.config.truncation_check and s.model == "primary":
        traj.diagnostics.truncation_delta = truncation_delta(s)
    if out_path is not None:
        write_csv(traj, s, out_path)
    return traj


def _norm_amp(traj: Trajectory, s: Scenario) -> np.ndarray | None:
    beta = abs(complex(s.drives.beta))
    if beta == 0:
        return None
    if s.model == "primary":
        return math.sqrt(s.params.kappa_p) * np.abs(traj.channels["a"]) / beta
    return np.abs(traj.channels["out"]) / beta


def _scenario_comment(s: Scenario) -> str:
    d = s.drives
    fields = [
        f"model={s.model}", f"mode={s.mode}", f"init={s.init}",
        f"beta={d.beta!r}", f"alpha_s={d.alpha_s!r}", f"alpha_r={d.alpha_r!r}",
        f"kappa_p={s.params.kappa_p!r}", f"t_final={s.config.t_final!r}",
        f"dt={s.config.dt!r}",
    ]
    return "# scenario: " + " ".join(fields)


def _format_csv(traj: Trajectory, s: Scenario) -> str:
    cols: dict[str, np.ndarray | None] = {name: None for name in CSV_COLUMNS}
    cols["t"] = traj.times
    if "a" in traj.channels:
        cols["re_a"] = traj.channels["a"].real
        cols["im_a"] = traj.channels["a"].imag
    for pop in ("pop_g", "pop_h", "pop_s", "pop_e"):
        if pop in traj.channels:
            cols[pop] = traj.channels[pop].real
    cols["p_out"] = np.abs(traj.channels["out"]) ** 2
    cols["p_outbar"] = np.abs(traj.channels["outbar"]) ** 2
    cols["norm_amp"] = _norm_amp(traj, s)

    buf = io.StringIO()
    buf.write(_scenario_comment(s) + "\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    n = len(traj.times)
    for i in range(n):
        row = []
        for name in CSV_COLUMNS:
            v = cols[name]
            row.append("" if v is None else f"{v[i]:.12e}")
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_csv(traj: Trajectory, s: Scenario, path: str) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(_format_csv(traj, s))


def read_csv(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a trajectory CSV back: (scenario metadata, column arrays).

    Absent (empty) columns come back as empty dicts entries omitted.
    """
    meta: dict[str, str] = {}
    with open(path) as f:
        lineno = 1
        first = f.readline()
        if first.startswith("# scenario:"):
            for tok in first[len("# scenario:"):].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
            header = f.readline()
            lineno += 1
        else:
            header = first
        names = header.strip().split(",")
        if names != list(CSV_COLUMNS):
            raise ValueError(f"unexpected CSV header {names} in {path}")
        raw: list[list[str]] = [[] for _ in names]
        for line in f:
            lineno += 1
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(names):
                raise ValueError(f"{path}:{lineno}: expected {len(names)} fields, "
                                 f"got {len(parts)}")
            for j, p in enumerate(parts):
                raw[j].append(p)
    cols: dict[str, np.ndarray] = {}
    for name, vals in zip(names, raw):
        if vals and vals[0] != "":
            cols[name] = np.array([float(v) for v in vals])
    return meta, cols


@dataclass(frozen=True)
class Metrics:
    """Figures of merit of one switching run.

    contrast_ratio: input power |beta|^2 over the steady transmitted
    coherent power (extinction of the switched beam); power_gain:
    |beta|^2/|alpha|^2 of the scenario inputs; switch_time_90: first time
    the target population reaches 0.9; photon_cost: switch_time_90 times
    the control photon flux; energy_joules: photon_cost times the photon
    energy at the given wavelength.
    """

    contrast_ratio: float | None
    power_gain: float | None
    switch_time_90: float | None
    photon_cost: float | None
    energy_joules: float | None
    wavelength_nm: float = 1000.0


def _active_alpha(mode: str, alpha_s: complex, alpha_r: complex) -> complex:
    if mode == "SET":
        return alpha_s
    if mode == "RESET":
        return alpha_r
    if mode == "RACE":
        return alpha_s
    return 0j


def _metrics_core(mode: str, beta: complex, alpha_s: complex, alpha_r: complex,
                  times: np.ndarray, pop_g: np.ndarray | None,
                  pop_h: np.ndarray | None, p_out: np.ndarray,
                  wavelength_nm: float, require_switch: bool) -> Metrics:
    beta2 = abs(beta) ** 2
    alpha = _active_alpha(mode, alpha_s, alpha_r)
    gain = beta2 / abs(alpha) ** 2 if alpha != 0 else None

    contrast = None
    if mode in ("RESET", "HOLD") and beta2 > 0:
        out_low = float(p_out[-1])
        contrast = math.inf if out_low == 0 else beta2 / out_low

    t90 = cost = energy = None
    if mode in ("SET", "RESET"):
        target = pop_h if mode == "SET" else pop_g
        if target is None:
            raise ValueError(f"{mode} metrics need the target population channel")
        hits = np.nonzero(target >= 0.9)[0]
        if hits.size == 0 and require_switch:
            raise NoSwitchError(
                f"{mode} target population never reached 0.9 "
                f"(max {float(target.max()):.4f})")
        if hits.size:
            t90 = float(times[hits[0]])
            cost = t90 * abs(alpha) ** 2
            energy = cost * _h_planck * _c_light / (wavelength_nm * 1e-9)
    return Metrics(contrast_ratio=contrast, power_gain=gain, switch_time_90=t90,
                   photon_cost=cost, energy_joules=energy,
                   wavelength_nm=wavelength_nm)


def compute_metrics(traj: Trajectory, s: Scenario,
                    wavelength_nm: float = 1000.0,
                    require_switch: bool = True) -> Metrics:
    """Derive switch metrics from a finished trajectory.

    With require_switch (default) a SET or RESET run whose target
    population never reaches 0.9 raises NoSwitchError; passing False
    instead leaves the switching-time metrics as None, which is how the
    steady contrast is read off a full-model RESET run (its |g> population
    saturates just below 0.9 under POWER backaction).
    """
    return _metrics_core(
        s.mode, s.drives.beta, s.drives.alpha_s, s.drives.alpha_r,
        traj.times,
        traj.channels["pop_g"].real if "pop_g" in traj.channels else None,
        traj.channels["pop_h"].real if "pop_h" in traj.channels else None,
        np.abs(traj.channels["out"]) ** 2,
        wavelength_nm, require_switch)


def metrics_from_csv(path: str, wavelength_nm: float = 1000.0,
                     require_switch: bool = True) -> Metrics:
    """Recompute metrics from a written trajectory CSV."""
    meta, cols = read_csv(path)
    for key in ("mode", "beta", "alpha_s", "alpha_r"):
        if key not in meta:
            raise ValueError(f"{path} lacks scenario metadata key {key!r}")
    return _metrics_core(
        meta["mode"], complex(meta["beta"]), complex(meta["alpha_s"]),
        complex(meta["alpha_r"]), cols["t"], cols.get("pop_g"),
        cols.get("pop_h"), cols["p_out"], wavelength_nm, require_switch)


def channel_delta(a: Trajectory, b: Trajectory,
                  channels: tuple[str, ...] | None = None) -> float:
    """Scale-relative difference of recorded channels on a common grid.

    max over channels of max_t |a - b| / max_t |a|; used for step-halving
    and truncation-stability checks.  Sample times must coincide.
    """
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times):
        raise ValueError("trajectories must share the recording grid")
    names = channels if channels is not None else tuple(
        k for k in a.channels if k in b.channels)
    worst = 0.0
    for name in names:
        va, vb = a.channels[name], b.channels[name]
        scale = max(float(np.abs(va).max()), 1e-12)
        worst = max(worst, float(np.abs(va - vb).max()) / scale)
    return worst


def truncation_delta(s: Scenario) -> float:
    """Channel change when every Fock truncation is raised by one."""
    if s.model != "primary":
        raise ValueError("truncation checks only apply to the primary model")
    bigger = replace(s, params=replace(
        s.params, n_power=s.params.n_power + 1, n_set=s.params.n_set + 1,
        n_reset=s.params.n_reset + 1),
        config=replace(s.config, truncation_check=False))
    base = replace(s, config=replace(s.config, truncation_check=False))
    ta = run_scenario(base)
    tb = run_scenario(bigger)
    return channel_delta(ta, tb)


def convergence_study(params: SwitchParameters, drives: DriveAmplitudes,
                      scales, study: str, mode: str = "SET", init: str = "g",
                      t_final: float = 50.0, out_path: str | None = None,
                      dt_primary: float = 2e-3, dt_reduced: float = 1e-2,
                      ) -> list[tuple[float, float]]:
    """Numerical check of the two strong-coupling limits.

    study="k": integrate the primary model at k1 = k2 = k for each scale and
    report the max trace distance of the reduced atomic state against the
    fixed intermediate-model trajectory (the primary step size shrinks as
    1/k^2 to follow the fastest rate).  study="gamma": integrate the
    intermediate model at each gamma against the closed two-level limit ODE.
    Distances are measured on the shared (g,h,s) or (g,h) basis.

    Port-phase note: the reduced models transmit the control beams with a
    +1 convention, while the physical cavity of the primary model transmits
    with -1 on resonance.  The k-study reference therefore drives the
    intermediate model with negated control amplitudes; this is a gauge
    change (invisible in populations, the POWER ports and the whole gamma
    study) but it is what the reduced atomic coherences converge to.
    """
    scales = [float(x) for x in scales]
    if any(x <= 0 for x in scales):
        raise ValueError("scales must be positive")
    if sorted(scales) != scales:
        raise ValueError("scales must be increasing")
    d = _masked_drives(drives, mode)
    rows: list[tuple[float, float]] = []

    if study == "k":
        stride = max(1, int(round(0.5 / dt_reduced)))
        ref_cfg = IntegrationConfig(dt=dt_reduced, t_final=t_final,
                                    record_stride=stride)
        d_ref = replace(d, alpha_s=-d.alpha_s, alpha_r=-d.alpha_r)
        ref = run_scenario(Scenario(model="intermediate", params=params,
                                    drives=d_ref, mode=mode, init=init,
                                    config=ref_cfg))
        interval = dt_reduced * stride
        for k in scales:
            # snap dt to an exact divisor of the recording interval so both
            # trajectories sample the same instants
            n_sub = max(1, math.ceil(interval / (dt_primary / k ** 2)))
            dt = interval / n_sub
            cfg = IntegrationConfig(dt=dt, t_final=t_final, record_stride=n_sub)
            try:
                traj = run_scenario(Scenario(
                    model="primary", params=params.with_scaling(k), drives=d,
                    mode=mode, init=init, config=cfg))
            except IntegrationError as err:
                raise IntegrationError(
                    f"k-study failed at scale k={k}: {err}", err.diagnostics) from err
            rows.append((k, trajectory_distance(traj, ref)))
    elif study == "gamma":
        stride = max(1, int(round(0.5 / dt_reduced)))
        cfg = IntegrationConfig(dt=dt_reduced, t_final=t_final,
                                record_stride=stride)
        x0 = LimitState(rho_gg=1.0) if init == "g" else LimitState(rho_gg=0.0)
        ref = integrate_limit(d, x0, cfg)
        for gamma in scales:
            try:
                traj = run_scenario(Scenario(
                    model="intermediate",
                    params=replace(params,
                                   g_s=math.sqrt(gamma * params.kappa_s),
                                   g_r=math.sqrt(gamma * params.kappa_r)),
                    drives=d, mode=mode, init=init, config=cfg))
            except IntegrationError as err:
                raise IntegrationError(
                    f"gamma-study failed at gamma={gamma}: {err}",
                    err.diagnostics) from err
            rows.append((gamma, trajectory_distance(traj, ref)))
    else:
        raise ValueError(f"unknown study {study!r}; use 'k' or 'gamma'")

    if out_path is not None:
        with open(out_path, "w", newline="\n") as f:
            f.write("scale,distance\n")
            for scale, dist in rows:
                f.write(f"{scale:.12e},{dist:.12e}\n")
    return rows


def zeno_sweep(betas, alpha_r: complex, params: SwitchParameters | None = None,
               t_final: float = 600.0, dt: float = 1e-2,
               out_path: str | None = None) -> list[tuple[float, float | None]]:
    """RESET switching time on the intermediate model versus POWER amplitude.

    Explores the conjectured dephasing slow-down of the reset for
    |beta| >> |alpha_r|.  Rows that never switch are recorded with an empty
    time rather than aborting the sweep.
    """
    betas = [float(b) for b in betas]
    if any(b < 0 for b in betas):
        raise ValueError("beta values must be >= 0")
    if sorted(betas) != betas:
        raise ValueError("beta values must be increasing")
    params = params or preset("paper-fig2")[0]
    cfg = IntegrationConfig(dt=dt, t_final=t_final,
                            record_stride=max(1, int(round(0.1 / dt))))
    rows: list[tuple[float, float | None]] = []
    for b in betas:
        mode = "RESET"
        drives = DriveAmplitudes(beta=b, alpha_s=0j, alpha_r=alpha_r)
        s = Scenario(model="intermediate", params=params, drives=drives,
                     mode=mode, init="h", config=cfg)
        traj = run_scenario(s)
        try:
            m = compute_metrics(traj, s)
            rows.append((b, m.switch_time_90))
        except NoSwitchError:
            rows.append((b, None))
    if out_path is not None:
        with open(out_path, "w", newline="\n") as f:
            f.write("beta,switch_time_90\n")
            for b, t90 in rows:
                t = "" if t90 is None else f"{t90:.12e}"
                f.write(f"{b:.12e},{t}\n")
    return rows
