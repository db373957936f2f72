import sys

import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

from negfspin.density import default_e_bottom, fermi
from negfspin.model import Alignment, DeviceSpec, JunctionSetup, LeadSpec
from negfspin.presets import get_preset, pristine_chain
from negfspin.transport import dos

hypothesis.settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile("default")


def random_lead(rng, n_orb, exchange=0.0, sign=1):
    a = rng.normal(size=(n_orb, n_orb))
    h00 = 0.5 * (a + a.T)
    h01 = -np.eye(n_orb) + 0.3 * rng.normal(size=(n_orb, n_orb))
    return LeadSpec(h00, h01, exchange, 0.0, sign)


def random_setup(seed, n_sites=None, u=0.0, max_sites=6, exchange=True):
    """A random valid junction; leads have 1 or 2 orbitals per principal layer."""
    rng = np.random.default_rng(seed)
    n = int(n_sites or rng.integers(1, max_sites + 1))
    a = rng.normal(size=(n, n))
    h = 0.5 * (a + a.T)
    nl, nr = (int(x) for x in rng.integers(1, 3, size=2))
    vl = rng.normal(size=(nl, n)) * (rng.random((nl, n)) < 0.7)
    vr = rng.normal(size=(nr, n)) * (rng.random((nr, n)) < 0.7)
    vl[0, 0] = vl[0, 0] or 0.8
    vr[0, -1] = vr[0, -1] or 0.8
    ex_l, ex_r = (rng.uniform(0, 1.5, 2) if exchange else (0.0, 0.0))
    dev = DeviceSpec(h, int(rng.integers(0, n)), u, vl, vr)
    return JunctionSetup(dev, random_lead(rng, nl, ex_l), random_lead(rng, nr, ex_r))


def lead_band_edges(model, spin):
    """Zone-centre and zone-boundary band energies of both leads (edges for chains)."""
    edges = []
    for lead in (model.lead_left[spin], model.lead_right[spin]):
        for phase in (1.0, -1.0):
            h = lead.h00 + phase * (lead.h01 + lead.h01.conj().T)
            edges.extend(np.linalg.eigvalsh(h))
    return edges


def _mapped_panels(fn, a, b, n_panels, order=32):
    """Composite Gauss-Legendre in t with E = a + (b - a)(1 - cos(pi t)) / 2."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    h = np.diff(edges)[:, None]
    t = (edges[:-1, None] + h * (x + 1) / 2).ravel()
    wt = (h * w / 2).ravel()
    e = a + (b - a) * (1 - np.cos(np.pi * t)) / 2
    jac = (b - a) * np.pi * np.sin(np.pi * t) / 2
    return (wt * jac) @ fn(e)


def real_axis_occupations(model, spin, kT=0.025, eta=1e-6, tol=1e-9, max_panels=4096):
    """Real-axis integral of -Im G^R f / pi from the spectral bottom to mu + 30 kT.

    The interval is split at the lead band edges and at mu.  The cosine map
    cancels the inverse square-root edge singularities; panels are doubled
    until the segment integral changes by less than ``tol``.
    """
    lo, hi = default_e_bottom(model), model.mu + 30 * kT
    cuts = sorted({lo, hi, model.mu, *(e for e in lead_band_edges(model, spin) if lo < e < hi)})

    def fn(e):
        return dos(model, spin, e, eta) * fermi(e, model.mu, kT)[:, None]

    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        n = 4
        prev = _mapped_panels(fn, a, b, n)
        while True:
            n *= 2
            cur = _mapped_panels(fn, a, b, n)
            if np.max(np.abs(cur - prev)) < tol or n >= max_panels:
                break
            prev = cur
        total = total + cur
    return total


seeds = st.integers(0, 2**32 - 1)
alignments = st.sampled_from(list(Alignment))


@pytest.fixture(scope="session")
def chain_model():
    return pristine_chain().assemble(Alignment.PC, 2.05)


@pytest.fixture(scope="session")
def copc():
    return get_preset("copc-analog")


def pytest_terminal_summary(terminalreporter):
    results = sys.modules.get("test_acceptance")
    lines = getattr(results, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
