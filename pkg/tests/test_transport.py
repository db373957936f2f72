import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given
from hypothesis import strategies as st

from negfspin.greens import advanced, broadening, device_gf, retarded
from negfspin.model import SPINS, Alignment, DeviceSpec, JunctionSetup, LeadSpec, SpinChannel
from negfspin.transport import (
    dos, dos_record, eigenchannels, trace_transmission, transmission, transmission_record,
)

from conftest import random_setup, seeds

UP = SpinChannel.UP


def single_site(eps=0.0, tau_l=0.2, tau_r=0.2, exchange=0.0, u=0.0):
    lead = LeadSpec.chain(0.0, -1.0, exchange)
    return JunctionSetup(DeviceSpec([[eps]], 0, u, [[tau_l]], [[tau_r]]), lead, lead).assemble(Alignment.PC, 2.05)


def test_pristine_chain_unit_transmission(chain_model):
    e = np.linspace(-1.95, 1.95, 301)
    for s in SPINS:
        t = transmission(chain_model, s, e, eta=1e-9)
        assert np.max(np.abs(t - 1)) < 1e-6


def test_pristine_chain_closed_outside_band(chain_model):
    e = np.concatenate([np.linspace(-4, -2.05, 50), np.linspace(2.05, 4, 50)])
    assert np.max(transmission(chain_model, UP, e, eta=1e-9)) < 1e-6
    assert transmission(chain_model, UP, 3.0) < 1e-6


def test_pristine_chain_single_channel(chain_model):
    ch = eigenchannels(chain_model, UP, 0.0)
    assert ch.shape == (1,)
    assert ch[0] == pytest.approx(1.0, abs=1e-6)


def test_breit_wigner_with_computed_self_energies():
    eps, tau = 0.1, 0.2
    m = single_site(eps, tau, tau)
    gamma0 = 2 * tau ** 2
    e = eps + np.linspace(-5 * gamma0, 5 * gamma0, 201)
    g, sl, sr = retarded(m, UP, e)
    gl = broadening(sl)[:, 0, 0].real
    gr = broadening(sr)[:, 0, 0].real
    shift = (sl + sr)[:, 0, 0].real
    oracle = gl * gr / ((e - eps - shift) ** 2 + ((gl + gr) / 2) ** 2)
    assert np.max(np.abs(transmission(m, UP, e) - oracle)) < 1e-4


@pytest.mark.parametrize("e, expected", [(0.0, 1.0), (0.3, 0.2)])
def test_breit_wigner_wide_band_values(e, expected):
    # symmetric wide-band leads, total width 0.3: resonance 1, one full width away 1/5
    gamma = 0.3
    sig = np.array([[-0.25j * gamma]])
    g = device_gf(single_site(), UP, e + 0j, sig, sig)
    gam = broadening(sig)
    assert trace_transmission(gam, g, gam) == pytest.approx(expected, rel=1e-12)


def test_dos_wide_band_peak():
    gamma = 0.3
    sig = np.array([[-0.5j * gamma]])
    g = device_gf(single_site(0.2), UP, 0.2 + 0j, sig, sig)
    assert -g[0, 0].imag / np.pi == pytest.approx(1 / (np.pi * gamma), rel=1e-12)


def test_dos_sum_rule_isolated_level():
    m = single_site(0.3, 0.0, 0.0)
    e = np.linspace(-5, 5, 200001)
    d = dos(m, UP, e, eta=1e-3)[:, 0]
    assert abs(trapezoid(d, e) - 1) < 1e-3


def test_dos_spin_symmetric_without_exchange():
    m = random_setup(8, exchange=False).assemble(Alignment.APC, 2.5)
    e = np.linspace(-3, 3, 41)
    assert np.array_equal(dos(m, SpinChannel.UP, e), dos(m, SpinChannel.DOWN, e))


def test_dos_record_consistency():
    rec = dos_record(random_setup(1).assemble(Alignment.PC, 2.2), 0.3)
    for s in SPINS:
        assert min(rec.per_site[s]) >= -1e-10
        assert rec.total[s] == pytest.approx(sum(rec.per_site[s]), abs=1e-9)


def test_single_site_has_one_channel():
    m = single_site(0.05, 0.4, 0.3, exchange=0.6)
    for s in SPINS:
        ch = eigenchannels(m, s, 0.1)
        assert len(ch) == 1
        assert abs(ch[0] - transmission(m, s, 0.1)) < 1e-10


@given(seeds, st.sampled_from(list(Alignment)), st.floats(-3, 3))
def test_channel_sum_and_bounds(seed, align, e):
    m = random_setup(seed).assemble(align, 2.4)
    for s in SPINS:
        ch = eigenchannels(m, s, e)
        t = transmission(m, s, e)
        assert abs(np.sum(ch) - t) < 1e-9
        assert np.all(ch >= -1e-10) and np.all(ch <= 1 + 1e-10)
        assert np.all(np.diff(ch) <= 0)


@given(seeds, st.floats(-3, 3))
def test_reciprocity(seed, e):
    m = random_setup(seed).assemble(Alignment.PC, 2.4)
    for s in SPINS:
        g, sl, sr = retarded(m, s, e)
        gl, gr = broadening(sl), broadening(sr)
        assert abs(trace_transmission(gl, g, gr) - trace_transmission(gr, g, gl)) < 1e-10


@given(seeds, st.floats(-3, 3))
def test_spin_symmetry_without_exchange_and_u(seed, e):
    m = random_setup(seed, exchange=False).assemble(Alignment.APC, 2.4)
    assert transmission(m, SpinChannel.UP, e) == transmission(m, SpinChannel.DOWN, e)


@given(st.floats(-3.5, 3.5), st.floats(0, 1.5), st.floats(-0.5, 0.5), st.sampled_from(list(Alignment)))
def test_transmission_bounded_by_open_channels(e, exchange, onsite, align):
    lead = LeadSpec.chain(onsite, -1.0, exchange)
    setup = JunctionSetup(DeviceSpec([[0.2, -0.6], [-0.6, -0.1]], 0, 0.0, [[-0.8, 0]], [[0, -1.0]]), lead, lead)
    m = setup.assemble(align, 2.3)
    flip = -1 if align is Alignment.APC else 1
    for s in SPINS:
        sgn = -1 if s is SpinChannel.UP else 1
        n_open = min(abs(e - onsite - sgn * 0.5 * exchange) < 2,
                     abs(e - onsite - sgn * flip * 0.5 * exchange) < 2)
        t = transmission(m, s, e)
        # closed channels leak O(eta) only, through the evanescent tail
        assert -1e-12 <= t <= n_open + 1e-6


def test_transmission_record_shape():
    rec = transmission_record(random_setup(6, n_sites=3).assemble(Alignment.APC, 2.3), 0.0)
    for s in SPINS:
        assert len(rec.channels[s]) == 3
        assert rec.t_spin[s] == pytest.approx(sum(rec.channels[s]), abs=1e-9)
    assert rec.total == pytest.approx(rec.t_spin.up + rec.t_spin.down)


def test_scalar_and_batch_agree():
    m = random_setup(12).assemble(Alignment.PC, 2.05)
    e = np.linspace(-1, 1, 7)
    batch = transmission(m, UP, e)
    assert np.array_equal(batch, [transmission(m, UP, x) for x in e])
    assert isinstance(transmission(m, UP, 0.0), float)


def test_advanced_used_in_trace():
    m = random_setup(13).assemble(Alignment.PC, 2.05)
    g, sl, sr = retarded(m, UP, 0.4)
    gl, gr = broadening(sl), broadening(sr)
    direct = np.trace(gl @ g @ gr @ advanced(g)).real
    assert trace_transmission(gl, g, gr) == pytest.approx(direct, abs=1e-14)
