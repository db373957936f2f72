"""Zero-bias transmission, eigenchannels and device density of states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .greens import DEFAULT_ETA, advanced, broadening, retarded
from .model import SPINS, JunctionModel, SpinChannel, SpinResolved

IMAG_RESIDUE_TOL = 1e-10
HERMITICITY_TOL = 1e-8


class TransmissionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TransmissionRecord:
    energy: float
    t_spin: SpinResolved[float]
    channels: SpinResolved[List[float]]

    @property
    def total(self) -> float:
        return self.t_spin.up + self.t_spin.down


@dataclass(frozen=True)
class DosRecord:
    energy: float
    total: SpinResolved[float]
    per_site: SpinResolved[List[float]]


def _spectral(model, spin, energy, eta):
    g, sl, sr = retarded(model, spin, energy, eta)
    return g, broadening(sl), broadening(sr)


def trace_transmission(gamma_a, g, gamma_b):
    """``Tr[Gamma_a G Gamma_b G^dag]`` with the imaginary residue checked."""
    t = np.einsum("...ii->...", gamma_a @ g @ gamma_b @ advanced(g))
    resid = np.max(np.abs(t.imag) / np.maximum(1.0, np.abs(t.real)), initial=0.0)
    if resid > IMAG_RESIDUE_TOL:
        raise TransmissionError(f"transmission has imaginary residue {resid:.3g}")
    return t.real


def transmission(model: JunctionModel, spin: SpinChannel, energy, eta: float = DEFAULT_ETA):
    """Landauer transmission ``Tr[Gamma_L G^R Gamma_R G^A]`` for one spin.

    ``energy`` may be a scalar or an array; broadenings are ``i (Sigma - Sigma^dag)``
    so a perfect channel transmits exactly one.
    """
    g, gl, gr = _spectral(model, spin, energy, eta)
    t = trace_transmission(gl, g, gr)
    return float(t) if np.ndim(energy) == 0 else t


def _psd_sqrt(gamma):
    w, u = np.linalg.eigh(gamma)
    if np.min(w, initial=0.0) < -HERMITICITY_TOL:
        raise TransmissionError(f"Gamma_L has eigenvalue {np.min(w):.3g} < 0")
    w = np.sqrt(np.clip(w, 0.0, None))
    return (u * w[..., None, :]) @ advanced(u)


def eigenchannels(model: JunctionModel, spin: SpinChannel, energy, eta: float = DEFAULT_ETA):
    """Eigenchannel transmissions, sorted descending.

    Eigenvalues of ``Gamma_L^1/2 G^R Gamma_R G^A Gamma_L^1/2``; one row per
    energy for array input.
    """
    g, gl, gr = _spectral(model, spin, energy, eta)
    s = _psd_sqrt(gl)
    m = s @ g @ gr @ advanced(g) @ s
    m_dag = advanced(m)
    scale = np.maximum(1.0, np.linalg.norm(m, axis=(-2, -1)))
    asym = np.max(np.linalg.norm(m - m_dag, axis=(-2, -1)) / scale)
    if asym > HERMITICITY_TOL:
        raise TransmissionError(f"transmission matrix not Hermitian (residue {asym:.3g})")
    return np.linalg.eigvalsh(0.5 * (m + m_dag))[..., ::-1]


def dos(model: JunctionModel, spin: SpinChannel, energy, eta: float = DEFAULT_ETA):
    """Site-resolved density of states ``-Im G^R_ii / pi`` (states/eV)."""
    g, _, _ = retarded(model, spin, energy, eta)
    return -np.diagonal(g, axis1=-2, axis2=-1).imag / np.pi


def transmission_record(model: JunctionModel, energy: float, eta: float = DEFAULT_ETA) -> TransmissionRecord:
    chans = {s: eigenchannels(model, s, energy, eta) for s in SPINS}
    ts = {s: transmission(model, s, energy, eta) for s in SPINS}
    return TransmissionRecord(
        energy=float(energy),
        t_spin=SpinResolved.from_fn(lambda s: ts[s]),
        channels=SpinResolved.from_fn(lambda s: [float(c) for c in chans[s]]),
    )


def dos_record(model: JunctionModel, energy: float, eta: float = DEFAULT_ETA) -> DosRecord:
    per = {s: dos(model, s, energy, eta) for s in SPINS}
    return DosRecord(
        energy=float(energy),
        total=SpinResolved.from_fn(lambda s: float(np.sum(per[s]))),
        per_site=SpinResolved.from_fn(lambda s: [float(x) for x in per[s]]),
    )
