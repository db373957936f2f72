import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import digamma

from negfspin.density import (
    ContourError, ContourSpec, ScfSettings, _rho_from_gf, contour_nodes, default_e_bottom,
    equilibrium_density, fermi, hysteresis_probe, occupations, resolve_e_bottom, scf_moment,
)
from negfspin.model import SPINS, Alignment, DeviceSpec, JunctionSetup, LeadSpec, SpinResolved

from conftest import random_setup, real_axis_occupations, seeds

KT = 0.025


def isolated_level(eps):
    dev = DeviceSpec([[eps]], 0, 0.0, [[0.0]], [[0.0]])
    return JunctionSetup(dev, LeadSpec.chain(), LeadSpec.chain()).assemble(Alignment.PC, 2.05)


def test_fermi_examples():
    assert fermi(0.3, 0.3, KT) == 0.5
    assert fermi(0.3 + 40 * KT, 0.3, KT) < 1e-17
    assert fermi(-KT * math.log(3), 0.0, KT) == pytest.approx(0.75, rel=1e-14)
    assert isinstance(fermi(0.0, 0.0, KT), float)


def test_fermi_overflow_safe():
    with np.errstate(over="raise"):
        f = fermi(np.array([-1e6, 1e6]), 0.0, 1e-3)
    assert f[0] == 1.0 and 0.0 <= f[1] < 1e-200


@given(st.floats(-5, 5), st.floats(-1, 1), st.floats(1e-3, 0.2))
def test_fermi_particle_hole(e, mu, kT):
    assert fermi(mu + e, mu, kT) + fermi(mu - e, mu, kT) == pytest.approx(1.0, abs=1e-15)


def test_contour_nodes_upper_half_plane():
    z, w = contour_nodes(0.0, KT, -8.0, ContourSpec())
    assert len(z) == len(w) == 48
    assert np.all(z.imag > 0)


def test_contour_rejects_bottom_above_line_start():
    with pytest.raises(ContourError):
        contour_nodes(0.0, KT, 0.0, ContourSpec())


@pytest.mark.parametrize("eps, expected", [(-1.0, 1.0), (1.0, 0.0)])
def test_isolated_level_filling(eps, expected):
    n = occupations(isolated_level(eps))
    assert abs(n.up[0] - expected) < 1e-6


def lorentzian_occupation(eps, gamma, mu, kT):
    """Exact filling of a level with constant total width ``gamma``."""
    arg = 0.5 + (gamma / 2 + 1j * (eps - mu)) / (2 * math.pi * kT)
    return 0.5 - digamma(arg).imag / math.pi


def test_symmetric_level_half_filled():
    tau = 0.3
    dev = DeviceSpec([[0.0]], 0, 0.0, [[tau]], [[tau]])
    m = JunctionSetup(dev, LeadSpec.chain(), LeadSpec.chain()).assemble(Alignment.PC, 2.05)
    n = occupations(m).up[0]
    assert abs(n - 0.5) < 1e-4
    assert abs(n - real_axis_occupations(m, SPINS[0])[0]) < 1e-4


@pytest.mark.parametrize("eps", [-0.3, -0.05, 0.0, 0.08, 0.4])
def test_contour_matches_digamma_oracle(eps):
    # a single level coupled through constant-width self-energy: occupation in closed form
    gamma = 0.1
    spec = ContourSpec()
    e_bottom = -8.0
    z, w = contour_nodes(0.0, KT, e_bottom, spec)
    g = 1.0 / (z - eps + 0.5j * gamma)
    n = _rho_from_gf(g[:, None, None], w)[0, 0].real
    # weight below e_bottom is outside the contour; remove it from the reference
    tail = (math.atan((e_bottom - eps) / (gamma / 2)) + math.pi / 2) / math.pi
    assert n == pytest.approx(lorentzian_occupation(eps, gamma, 0.0, KT) - tail, abs=1e-7)


@pytest.mark.parametrize("d", [2.05, 5.0])
@pytest.mark.parametrize("align", list(Alignment))
def test_contour_vs_real_axis_on_preset(copc, d, align):
    m = scf_moment(copc, align, d).model
    occ = occupations(m)
    for s in SPINS:
        assert np.max(np.abs(occ[s] - real_axis_occupations(m, s))) < 1e-4


def continuum_setup(seed):
    """Random junction whose spectrum lies inside the lead continuum.

    Wide chain leads and weak couplings leave no bound states, which a finite
    real-axis grid could not resolve at small eta.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    a = rng.uniform(-0.5, 0.5, size=(n, n))
    lead_l = LeadSpec.chain(rng.uniform(-0.5, 0.5), -3.0, rng.uniform(0, 1))
    lead_r = LeadSpec.chain(rng.uniform(-0.5, 0.5), -3.0, rng.uniform(0, 1))
    vl = rng.uniform(-1, 1, size=(1, n))
    vr = rng.uniform(-1, 1, size=(1, n))
    return JunctionSetup(DeviceSpec(a + a.T, 0, 0.0, vl, vr), lead_l, lead_r)


@given(seeds)
def test_contour_vs_real_axis_random_models(seed):
    m = continuum_setup(seed).assemble(Alignment.APC, 2.3)
    occ = occupations(m)
    for s in SPINS:
        assert np.max(np.abs(occ[s] - real_axis_occupations(m, s, eta=1e-6))) < 1e-4


@pytest.mark.parametrize("d", [2.05, 2.4, 5.0])
def test_contour_refinement(copc, d):
    for align in Alignment:
        m = scf_moment(copc, align, d).model
        a, b = occupations(m), occupations(m, ContourSpec(32, 32, 32))
        for s in SPINS:
            assert np.max(np.abs(a[s] - b[s])) < 1e-6


def test_density_matrix_hermitian_psd():
    m = random_setup(21).assemble(Alignment.PC, 2.2)
    for s in SPINS:
        rho = equilibrium_density(m, s)
        assert np.allclose(rho, rho.conj().T, atol=1e-14)
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-8
        assert np.all(np.diag(rho).real >= -1e-6) and np.all(np.diag(rho).real <= 1 + 1e-6)


def test_e_bottom_above_spectral_bound_rejected():
    m = isolated_level(-1.0)
    with pytest.raises(ContourError, match="spectral bound"):
        equilibrium_density(m, SPINS[0], ContourSpec(e_bottom=-0.8))
    assert resolve_e_bottom(m, ContourSpec(e_bottom=-4.0)) == -4.0
    assert resolve_e_bottom(m, ContourSpec()) == default_e_bottom(m)


def test_verify_passes_for_default_contour():
    m = random_setup(17).assemble(Alignment.PC, 2.2)
    rho = equilibrium_density(m, SPINS[0], ContourSpec(), verify=True)
    assert np.allclose(rho, equilibrium_density(m, SPINS[0]))


@given(seeds, st.sampled_from(list(Alignment)))
def test_charge_conserved_under_global_spin_flip(seed, align):
    setup = random_setup(seed, max_sites=4)
    a = occupations(setup.assemble(align, 2.5))
    b = occupations(setup.spin_reversed().assemble(align, 2.5))
    assert abs(np.sum(a.up + a.down) - np.sum(b.up + b.down)) < 1e-8
    np.testing.assert_allclose(a.up, b.down, atol=1e-10)


def test_u_zero_no_exchange_no_moment():
    setup = random_setup(30, exchange=False)
    res = scf_moment(setup, Alignment.PC, 2.5)
    assert res.converged and res.iterations == 0
    assert abs(res.moment_central) < 1e-8


def test_scf_fixed_point_reproduces(copc):
    settings = ScfSettings()
    res = scf_moment(copc, Alignment.APC, 2.6, settings)
    assert res.converged
    again = occupations(res.model)
    for s in SPINS:
        assert np.max(np.abs(again[s] - np.array(res.n[s]))) <= 2 * settings.tol


def test_scf_occupations_physical(copc):
    res = scf_moment(copc, Alignment.PC, 3.0)
    for s in SPINS:
        assert all(-1e-6 <= x <= 1 + 1e-6 for x in res.n[s])
    assert -1 <= res.moment_central <= 1


def test_preset_tunneling_pc_moment_positive(copc):
    assert scf_moment(copc, Alignment.PC, 5.0).moment_central > 0


def test_preset_apc_sign_change(copc):
    near = scf_moment(copc, Alignment.APC, 2.05).moment_central
    far = scf_moment(copc, Alignment.APC, 5.0).moment_central
    assert near * far < 0


def test_scf_nonconvergence_is_flagged(copc):
    res = scf_moment(copc, Alignment.PC, 2.05, ScfSettings(max_iter=2, tol=1e-14))
    assert not res.converged
    assert res.iterations == 2


def test_scf_respects_initial_state(copc):
    res = scf_moment(copc, Alignment.PC, 3.0, initial=SpinResolved(0.4, 0.4))
    ref = scf_moment(copc, Alignment.PC, 3.0)
    assert res.moment_central == pytest.approx(ref.moment_central, abs=1e-5)


def test_hysteresis_probe_single_valued_preset(copc):
    probe = hysteresis_probe(copc, Alignment.APC, 2.4)
    assert not probe.bistable


def test_hysteresis_probe_reports_bistability():
    # strongly interacting isolated-ish level at half filling: symmetry-broken solutions
    dev = DeviceSpec([[-2.0]], 0, 4.0, [[0.1]], [[0.1]])
    setup = JunctionSetup(dev, LeadSpec.chain(), LeadSpec.chain())
    probe = hysteresis_probe(setup, Alignment.PC, 2.05)
    assert probe.bistable
    assert probe.plus.moment_central == pytest.approx(-probe.minus.moment_central, abs=1e-4)


def test_settings_validation():
    with pytest.raises(ValueError):
        ScfSettings(mixing=0.0)
    with pytest.raises(ValueError):
        ScfSettings(init_moment=1.5)
    with pytest.raises(ValueError):
        ContourSpec(n_poles=0)
    with pytest.raises(ValueError):
        ContourSpec(kT=0.0)
    assert replace(ContourSpec(), n_poles=16) == ContourSpec()
