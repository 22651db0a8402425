"""Switch model builders, the limit ODE and its equilibrium."""

import numpy as np
import pytest

from qswitch.dynamics import (IntegrationConfig, integrate, lindblad_rhs)
from qswitch.models import (DriveAmplitudes, LimitState,
                            NoUniqueEquilibriumError, SwitchParameters,
                            build_intermediate, build_limit, build_primary,
                            displaced_intermediate_generator, integrate_limit,
                            limit_equilibrium, limit_rhs, output_amplitudes,
                            preset)
from qswitch.opalg import (DensityMatrix, HilbertSpace, embed, projector)
from qswitch.slh import displace, generator

PAPER = SwitchParameters()   # defaults are the paper-fig2 operating point


def random_density(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = m @ m.conj().T
    return m / np.trace(m).real


# ---------------------------------------------------------------- primary

def test_primary_dimensions():
    g = build_primary(PAPER)
    assert g.space.dim == 4 * 27 == 108
    assert g.n_ports == 10


def test_primary_H_hermitian_at_paper_parameters():
    g = build_primary(PAPER)
    assert g.H.hermiticity_defect() <= 1e-12


def test_primary_zero_couplings_zero_H():
    p = SwitchParameters(g_p=0.0, g_s=0.0, g_r=0.0)
    g = build_primary(p)
    assert g.H.max_abs() == 0.0


def test_primary_coefficients_match_hand_built_operators():
    """Channel-by-channel equality against independently kron-built matrices."""
    p = SwitchParameters(k1=1.3, k2=0.8, n_power=3, n_set=4, n_reset=2)
    g = build_primary(p)

    def lift(m, slot, dims=(4, 3, 4, 2)):
        mats = [np.eye(d, dtype=complex) for d in dims]
        mats[slot] = m
        out = np.array([[1.0 + 0j]])
        for x in mats:
            out = np.kron(out, x)
        return out

    def ann(n):
        return np.diag(np.sqrt(np.arange(1.0, n)), 1).astype(complex)

    def tr4(i, j):
        m = np.zeros((4, 4), complex)
        m[i, j] = 1
        return m

    a = lift(ann(3), 1)
    b = lift(ann(4), 2)
    c = lift(ann(2), 3)
    s_ge, s_he = lift(tr4(0, 2), 0), lift(tr4(1, 2), 0)
    s_gs, s_hs = lift(tr4(0, 3), 0), lift(tr4(1, 3), 0)

    sq = np.sqrt
    want_L = [
        p.k1 * sq(p.kappa_p) * a, p.k1 * sq(p.kappa_p) * a,
        p.k2 * sq(p.kappa_s) * b, p.k2 * sq(p.kappa_s) * b,
        p.k2 * sq(p.kappa_r) * c, p.k2 * sq(p.kappa_r) * c,
        sq(p.Gamma) * s_gs, sq(p.Gamma) * s_hs,
        sq(p.Gamma) * s_ge, sq(p.Gamma) * s_he,
    ]
    for got, want in zip(g.L, want_L):
        np.testing.assert_allclose(got.dense(), want, atol=1e-12)

    dag = lambda m: m.conj().T
    want_H = (1j * p.k1 ** 2 * p.g_p * (dag(a) @ s_ge - a @ dag(s_ge))
              + 1j * p.k2 * p.g_s * (dag(b) @ s_gs - b @ dag(s_gs))
              + 1j * p.k2 * p.g_r * (dag(c) @ s_hs - c @ dag(s_hs)))
    np.testing.assert_allclose(g.H.dense(), want_H, atol=1e-12)
    assert g.unitarity_defect() == 0.0


def test_parameter_validation():
    with pytest.raises(ValueError):
        SwitchParameters(Gamma=-0.1)
    with pytest.raises(ValueError):
        SwitchParameters(k1=0.0)
    with pytest.raises(ValueError):
        SwitchParameters(n_power=1)


# ------------------------------------------------------------ intermediate

def test_enhanced_rate_from_paper_parameters():
    assert PAPER.enhanced_rate == pytest.approx(2.0)   # g^2/kappa = 100/50


def test_enhanced_rate_requires_symmetric_control_cavities():
    p = SwitchParameters(g_s=10.0, g_r=12.0)
    with pytest.raises(ValueError):
        _ = p.enhanced_rate


def test_intermediate_unitarity_exact():
    g = build_intermediate(2.0, 0.3)
    assert g.unitarity_defect() == 0.0
    assert g.n_ports == 8


def test_intermediate_s_state_decay_rate():
    """Undriven, initial |s>: population leaves at total rate 2(Gamma+2 gamma)."""
    gamma, Gam = 2.0, 0.3
    g = build_intermediate(gamma, Gam)
    rho0 = DensityMatrix.basis(g.space, {"atom": 2})
    cfg = IntegrationConfig(dt=1e-3, t_final=0.5, record_stride=50)
    pi_s = embed(projector(3, 2), "atom", g.space)
    traj = integrate(g, rho0, cfg, observables={"pop_s": pi_s})
    rate = 2.0 * (Gam + 2.0 * gamma)
    want = np.exp(-rate * traj.times)
    np.testing.assert_allclose(traj.channels["pop_s"].real, want, atol=1e-6)


def test_displaced_generator_matches_displacement_route():
    """The module's key cross-check: hand-built generator == displace route."""
    rng = np.random.default_rng(101)
    gamma, Gam = 2.0, 0.3
    d = DriveAmplitudes(beta=0.5, alpha_s=0.3 + 0.1j, alpha_r=-0.2 + 0.25j)
    g = displace(build_intermediate(gamma, Gam), d.port_vector(8))
    H1, L1 = generator(g)
    H2, L2 = displaced_intermediate_generator(gamma, Gam, d)
    for _ in range(20):
        rho = random_density(rng, 3)
        np.testing.assert_allclose(
            lindblad_rhs(rho, H1, L1), lindblad_rhs(rho, H2, L2), atol=1e-10)


def test_displaced_generator_no_control_drive_no_H():
    H, _ = displaced_intermediate_generator(2.0, 0.3,
                                            DriveAmplitudes(beta=0.7))
    assert H.max_abs() == 0.0


def test_power_beam_dephases_relay_coherence():
    """beta = 0.5 alone: the g-h coherence decays at |beta|^2 = 0.25."""
    H, L = displaced_intermediate_generator(2.0, 0.3, DriveAmplitudes(beta=0.5))
    rho = np.zeros((3, 3), complex)
    rho[0, 0] = rho[1, 1] = 0.5
    rho[0, 1] = rho[1, 0] = 0.5
    rhs = lindblad_rhs(rho, H, L)
    assert rhs[1, 0] == pytest.approx(-0.25 * 0.5)
    assert rhs[0, 0] == pytest.approx(0.0)   # populations untouched


# ------------------------------------------------------------------ limit

def test_limit_unitarity_and_shape():
    g = build_limit()
    assert g.n_ports == 6
    assert g.unitarity_defect() < 1e-15
    assert all(op.max_abs() == 0.0 for op in g.L)
    assert g.H.max_abs() == 0.0


def test_limit_power_block_routing():
    """Relay in |g>: POWER block is the identity (reflection); in |h>: the
    off-diagonal entries are -1 (transmission with sign flip)."""
    g = build_limit()
    ket_g = np.array([1.0, 0.0])
    ket_h = np.array([0.0, 1.0])
    s11, s12 = g.S[0][0].dense(), g.S[0][1].dense()
    s21, s22 = g.S[1][0].dense(), g.S[1][1].dense()
    assert ket_g @ s11 @ ket_g == pytest.approx(1.0)
    assert ket_g @ s12 @ ket_g == pytest.approx(0.0)
    assert ket_h @ s11 @ ket_h == pytest.approx(0.0)
    assert ket_h @ s12 @ ket_h == pytest.approx(-1.0)
    assert ket_h @ s21 @ ket_h == pytest.approx(-1.0)
    assert ket_g @ s22 @ ket_g == pytest.approx(1.0)


def test_limit_displaced_master_equation_matches_limit_rhs():
    """The displaced scattering model reproduces the two-level ODE literally."""
    rng = np.random.default_rng(7)
    d = DriveAmplitudes(beta=0.4 - 0.2j, alpha_s=0.35 + 0.1j, alpha_r=0.15 + 0.3j)
    g = displace(build_limit(), d.port_vector(6))
    H, L = generator(g)
    for _ in range(20):
        rho = random_density(rng, 2)
        rhs = lindblad_rhs(rho, H, L)
        st = LimitState.__new__(LimitState)
        object.__setattr__(st, "rho_gg", rho[0, 0].real)
        object.__setattr__(st, "rho_hg", rho[1, 0])
        d_gg, d_hg = limit_rhs(st, d)
        assert abs(rhs[0, 0].real - d_gg) < 1e-12
        assert abs(rhs[1, 0] - d_hg) < 1e-12


def test_limit_rhs_hold_freezes_populations():
    d = DriveAmplitudes(beta=0.5)
    x = LimitState(rho_gg=0.3, rho_hg=0.2 + 0.1j)
    d_gg, d_hg = limit_rhs(x, d)
    assert d_gg == 0.0
    assert d_hg == pytest.approx(-(0.25) * (0.2 + 0.1j))


def test_limit_rhs_set_rate():
    d = DriveAmplitudes(alpha_s=0.4)
    x = LimitState(rho_gg=1.0)
    d_gg, _ = limit_rhs(x, d)
    assert d_gg == pytest.approx(-0.5 * 0.16)


def test_limit_rhs_population_rate_is_beta_independent():
    x = LimitState(rho_gg=0.6, rho_hg=0.1)
    d_gg_0, _ = limit_rhs(x, DriveAmplitudes(beta=0.0, alpha_s=0.3, alpha_r=0.2))
    d_gg_b, _ = limit_rhs(x, DriveAmplitudes(beta=5.0, alpha_s=0.3, alpha_r=0.2))
    assert d_gg_0 == d_gg_b


def test_limit_equilibrium_set_only():
    eq = limit_equilibrium(DriveAmplitudes(alpha_s=1.0))
    assert eq.rho_gg == 0.0
    assert eq.rho_hg == 0.0


def test_limit_equilibrium_race():
    eq = limit_equilibrium(DriveAmplitudes(beta=0.0, alpha_s=0.3, alpha_r=0.3))
    assert eq.rho_gg == pytest.approx(0.5)
    assert eq.rho_hg == pytest.approx(-0.5)


def test_limit_equilibrium_race_with_power():
    """alpha_s = alpha_r = beta = alpha: coherence settles at -1/4."""
    a = 0.37
    eq = limit_equilibrium(DriveAmplitudes(beta=a, alpha_s=a, alpha_r=a))
    assert eq.rho_hg == pytest.approx(-0.25)
    # cross-check by integrating the ODE to convergence
    cfg = IntegrationConfig(dt=1e-2, t_final=max(200.0, 60.0 / a ** 2),
                            record_stride=10 ** 6)
    traj = integrate_limit(DriveAmplitudes(beta=a, alpha_s=a, alpha_r=a),
                           LimitState(rho_gg=1.0), cfg)
    final = traj.reduced_states[-1]
    assert final[1, 0] == pytest.approx(-0.25, abs=1e-6)
    assert final[0, 0].real == pytest.approx(0.5, abs=1e-6)


def test_limit_equilibrium_zeroes_rhs_for_random_drives():
    rng = np.random.default_rng(55)
    for _ in range(100):
        amps = rng.normal(size=3) + 1j * rng.normal(size=3)
        d = DriveAmplitudes(beta=amps[0], alpha_s=amps[1], alpha_r=amps[2])
        eq = limit_equilibrium(d)
        d_gg, d_hg = limit_rhs(eq, d)
        assert abs(d_gg) < 1e-12
        assert abs(d_hg) < 1e-12


def test_limit_equilibrium_requires_a_control_drive():
    with pytest.raises(NoUniqueEquilibriumError):
        limit_equilibrium(DriveAmplitudes(beta=1.0))


# ------------------------------------------------------------- observables

def test_output_amplitudes_transmitting_state():
    """Relay in |h>: the POWER beam transmits fully, OUT = -beta, OUTbar = 0."""
    beta = 0.5
    d = DriveAmplitudes(beta=beta, alpha_s=0.0, alpha_r=0.0)
    g = displace(build_limit(), d.port_vector(6))
    rho = DensityMatrix.basis(g.space, {"atom": 1})
    amps = output_amplitudes(g, rho)
    assert amps[1] == pytest.approx(-beta)
    assert amps[0] == pytest.approx(0.0)


def test_output_amplitudes_vacuum_undriven():
    g = build_primary(PAPER)
    rho = DensityMatrix.basis(g.space, {"atom": 0})
    amps = output_amplitudes(g, rho)
    np.testing.assert_allclose(amps, np.zeros(10), atol=1e-14)


def test_output_amplitudes_space_mismatch():
    g = displace(build_limit(), DriveAmplitudes(beta=1.0).port_vector(6))
    rho = DensityMatrix(HilbertSpace.single("atom", 3), np.eye(3) / 3)
    with pytest.raises(ValueError):
        output_amplitudes(g, rho)


# ----------------------------------------------------------------- presets

def test_paper_preset_values():
    p, d = preset("paper-fig2")
    assert (p.Gamma, p.g_p, p.g_s, p.g_r) == (0.3, 50.0, 10.0, 10.0)
    assert (p.kappa_p, p.kappa_s, p.kappa_r) == (50.0, 50.0, 50.0)
    assert (p.k1, p.k2) == (1.0, 1.0)
    assert d.beta == 0.5
    assert abs(d.alpha_s) ** 2 == pytest.approx(0.025)
    assert abs(d.beta) ** 2 / abs(d.alpha_s) ** 2 == pytest.approx(10.0)


def test_platform_presets_exist_and_are_valid():
    for name in ("gaas-inas", "gap-nv"):
        p, d = preset(name)
        assert p.g_p > 0 and p.kappa_p > 0 and p.Gamma > 0
        assert abs(d.beta) ** 2 / abs(d.alpha_s) ** 2 == pytest.approx(10.0)
    with pytest.raises(ValueError):
        preset("nope")


def test_limit_state_validation():
    with pytest.raises(ValueError):
        LimitState(rho_gg=1.4)
    with pytest.raises(ValueError):
        LimitState(rho_gg=0.9, rho_hg=0.4)   # violates positivity
    m = LimitState(rho_gg=0.5, rho_hg=-0.5).as_matrix()
    assert np.linalg.eigvalsh(m).min() >= -1e-12
