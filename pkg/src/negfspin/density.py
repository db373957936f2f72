"""Equilibrium density by complex-contour integration and the central-site mean-field loop.

The contour runs from ``e_bottom`` on the real axis along a circular arc up to
the horizontal line ``Im z = 2 pi kT n_poles``, then along that line to
``mu + 30 kT``.  Closing it against the real axis encloses the first
``n_poles`` Matsubara poles ``mu + i pi kT (2j - 1)`` of the Fermi function,
whose residues are added back.  On the line the Fermi function is real and
equal to its value on the real axis, so only its kT-wide step has to be
resolved there; the line nodes are Gauss-Legendre in a sinh-stretched
variable that clusters them around ``mu``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .greens import device_gf, lead_self_energies
from .model import (SPINS, Alignment, JunctionModel, JunctionSetup, SpinChannel,
                    SpinResolved)

log = logging.getLogger(__name__)

DEFAULT_KT = 0.025
E_BOTTOM_MARGIN = 5.0
# line geometry, in units of kT relative to mu
LINE_START = -20.0
LINE_END = 30.0
LINE_STRETCH = 2.0
DRIFT_TOL = 1e-4


class ContourError(ValueError):
    """Contour does not enclose the whole occupied spectrum."""


def fermi(energy, mu: float, kT: float):
    """Fermi-Dirac occupation; exponent clamped to +-500 to avoid overflow."""
    if not kT > 0:
        raise ValueError(f"kT must be > 0, got {kT}")
    x = np.clip((np.asarray(energy) - mu) / kT, -500.0, 500.0)
    out = 1.0 / (1.0 + np.exp(x))
    return float(out) if np.ndim(out) == 0 else out


def _fermi_complex(z, mu, kT):
    x = (z - mu) / kT
    x = np.clip(x.real, -500.0, 500.0) + 1j * x.imag
    return 1.0 / (1.0 + np.exp(x))


@dataclass(frozen=True)
class ContourSpec:
    n_circle: int = 16
    n_line: int = 16
    n_poles: int = 16
    e_bottom: Optional[float] = None
    kT: float = DEFAULT_KT

    def __post_init__(self):
        for name in ("n_circle", "n_line", "n_poles"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.kT > 0:
            raise ValueError(f"kT must be > 0, got {self.kT}")

    def doubled(self) -> "ContourSpec":
        return replace(self, n_circle=2 * self.n_circle, n_line=2 * self.n_line,
                       n_poles=2 * self.n_poles)


def default_e_bottom(model: JunctionModel) -> float:
    return model.spectral_bottom() - E_BOTTOM_MARGIN


def resolve_e_bottom(model: JunctionModel, contour: ContourSpec) -> float:
    """Contour start: the explicit value if it lies below the model's spectral bound, else the default."""
    if contour.e_bottom is None:
        return default_e_bottom(model)
    bound = model.spectral_bottom()
    if not contour.e_bottom < bound:
        raise ContourError(f"e_bottom {contour.e_bottom} is not below the spectral bound {bound:.6g}")
    return contour.e_bottom


def contour_nodes(mu: float, kT: float, e_bottom: float, spec: ContourSpec):
    """Nodes ``z`` and weights ``w`` with ``int G(E+i0) f(E) dE ~= sum w G(z)``.

    The real-axis integral runs from ``e_bottom`` to infinity; ``G`` must be
    analytic in the upper half plane and negligible below ``e_bottom``.
    """
    delta = 2.0 * math.pi * kT * spec.n_poles
    gamma = mu + LINE_START * kT
    if not e_bottom < gamma:
        raise ContourError(f"e_bottom {e_bottom} must lie below mu - {-LINE_START:g} kT")

    # arc: circle centred on the real axis through e_bottom and gamma + i delta
    centre = (gamma ** 2 + delta ** 2 - e_bottom ** 2) / (2.0 * (gamma - e_bottom))
    radius = centre - e_bottom
    theta_end = math.atan2(delta, gamma - centre)
    x, w = np.polynomial.legendre.leggauss(spec.n_circle)
    half = 0.5 * (theta_end - math.pi)
    theta = math.pi + half * (x + 1.0)
    z_arc = centre + radius * np.exp(1j * theta)
    w_arc = w * half * 1j * radius * np.exp(1j * theta) * _fermi_complex(z_arc, mu, kT)

    x, w = np.polynomial.legendre.leggauss(spec.n_line)
    ta, tb = math.asinh(LINE_START / LINE_STRETCH), math.asinh(LINE_END / LINE_STRETCH)
    tau = ta + 0.5 * (tb - ta) * (x + 1.0)
    s = LINE_STRETCH * np.sinh(tau)
    z_line = mu + kT * s + 1j * delta
    w_line = w * 0.5 * (tb - ta) * kT * LINE_STRETCH * np.cosh(tau) * fermi(mu + kT * s, mu, kT)

    j = np.arange(1, spec.n_poles + 1)
    z_pole = mu + 1j * math.pi * kT * (2 * j - 1)
    # residue of f at each pole is -kT
    w_pole = np.full(spec.n_poles, -2j * math.pi * kT)

    return np.concatenate([z_arc, z_line, z_pole]), np.concatenate([w_arc, w_line, w_pole])


def _rho_from_gf(g, w):
    x = np.einsum("k,kij->ij", w, g)
    rho = 0.5j / math.pi * (x - x.conj().T)
    return 0.5 * (rho + rho.conj().T)


class _ContourCache:
    """Lead self-energies on the contour nodes; they do not depend on the mean field."""

    def __init__(self, model: JunctionModel, contour: ContourSpec, e_bottom: float):
        self.z, self.w = contour_nodes(model.mu, contour.kT, e_bottom, contour)
        self.sigma = {s: lead_self_energies(model, s, self.z) for s in SPINS}

    def density(self, model: JunctionModel, spin: SpinChannel) -> np.ndarray:
        sl, sr = self.sigma[spin]
        return _rho_from_gf(device_gf(model, spin, self.z, sl, sr), self.w)


def equilibrium_density(model: JunctionModel, spin: SpinChannel, contour: ContourSpec = ContourSpec(),
                        verify: bool = False) -> np.ndarray:
    """Equilibrium density matrix of the device for one spin.

    An explicit ``e_bottom`` above the model's spectral bound raises
    :class:`ContourError`.  With ``verify`` the occupations are also recomputed
    on a contour of doubled resolution and a drift of the total above 1e-4
    raises, which flags spectral weight sitting close to the contour.
    """
    e_bottom = resolve_e_bottom(model, contour)
    rho = _ContourCache(model, contour, e_bottom).density(model, spin)
    if verify:
        fine = _ContourCache(model, contour.doubled(), e_bottom).density(model, spin)
        drift = abs(np.trace(fine).real - np.trace(rho).real)
        if drift > DRIFT_TOL:
            raise ContourError(f"occupation drift {drift:.3g} under contour refinement; "
                               f"is e_bottom={e_bottom} below the spectrum?")
    return rho


def occupations(model: JunctionModel, contour: ContourSpec = ContourSpec()) -> SpinResolved[np.ndarray]:
    """Site occupations per spin from the equilibrium density."""
    e_bottom = resolve_e_bottom(model, contour)
    cache = _ContourCache(model, contour, e_bottom)
    return SpinResolved.from_fn(lambda s: np.diagonal(cache.density(model, s)).real.copy())


@dataclass(frozen=True)
class ScfSettings:
    mixing: float = 0.3
    tol: float = 1e-6
    max_iter: int = 500
    init_moment: float = 0.5

    def __post_init__(self):
        if not 0 < self.mixing <= 1:
            raise ValueError(f"mixing must be in (0, 1], got {self.mixing}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not -1 <= self.init_moment <= 1:
            raise ValueError(f"init_moment must be in [-1, 1], got {self.init_moment}")


@dataclass(frozen=True)
class MomentResult:
    n: SpinResolved[List[float]]
    moment_central: float
    converged: bool
    iterations: int
    central_index: int = 0
    model: Optional[JunctionModel] = field(default=None, repr=False, compare=False)

    @property
    def central_occupations(self) -> SpinResolved[float]:
        return self.n.map(lambda occ: occ[self.central_index])


def scf_moment(setup: JunctionSetup, align: Alignment, d: float,
               settings: ScfSettings = ScfSettings(), contour: ContourSpec = ContourSpec(),
               initial: Optional[SpinResolved[float]] = None) -> MomentResult:
    """Self-consistent central-site occupations under the Hubbard mean field.

    Iterates ``n -> occupations(model(U n_{-s}))`` with linear mixing on the
    central site.  Non-convergence is reported through ``converged`` rather
    than raised.  ``initial`` overrides the default start
    ``0.5 +- init_moment / 2``.
    """
    c = setup.device.central_index
    u = setup.device.u_hubbard
    base = setup.assemble(align, d)
    e_bottom = resolve_e_bottom(base, contour)
    cache = _ContourCache(base, contour, e_bottom)

    def solve(n_c: SpinResolved[float]):
        model = setup.assemble(align, d, n_c)
        occ = SpinResolved.from_fn(lambda s: np.diagonal(cache.density(model, s)).real.copy())
        return model, occ

    if u == 0.0:
        model, occ = solve(SpinResolved(0.0, 0.0))
        return _result(occ, c, True, 0, model)

    if initial is None:
        m0 = settings.init_moment
        initial = SpinResolved(0.5 + 0.5 * m0, 0.5 - 0.5 * m0)
    n_c = initial
    converged = False
    prev = None
    it = 0
    for it in range(1, settings.max_iter + 1):
        model, occ = solve(n_c)
        change = max(abs(occ.up[c] - n_c.up), abs(occ.down[c] - n_c.down))
        if prev is not None:
            change = max(change, float(np.max(np.abs(occ.up - prev.up))),
                         float(np.max(np.abs(occ.down - prev.down))))
        prev = occ
        if change <= settings.tol:
            converged = True
            break
        a = settings.mixing
        n_c = SpinResolved((1 - a) * n_c.up + a * occ.up[c], (1 - a) * n_c.down + a * occ.down[c])
    if not converged:
        log.warning("SCF not converged after %d iterations (align=%s, d=%.4f)",
                    settings.max_iter, align.value, d)
    return _result(occ, c, converged, it, model)


def _result(occ, c, converged, iterations, model) -> MomentResult:
    return MomentResult(
        n=occ.map(lambda a: [float(x) for x in a]),
        moment_central=float(occ.up[c] - occ.down[c]),
        converged=converged,
        iterations=iterations,
        central_index=c,
        model=model,
    )


@dataclass(frozen=True)
class HysteresisProbe:
    plus: MomentResult
    minus: MomentResult
    bistable: bool


def hysteresis_probe(setup: JunctionSetup, align: Alignment, d: float,
                     settings: ScfSettings = ScfSettings(), contour: ContourSpec = ContourSpec(),
                     tol: float = 1e-4) -> HysteresisProbe:
    """Run the loop from +|init_moment| and -|init_moment|; flag disagreeing fixed points."""
    m = abs(settings.init_moment)
    plus = scf_moment(setup, align, d, replace(settings, init_moment=m), contour)
    minus = scf_moment(setup, align, d, replace(settings, init_moment=-m), contour)
    bistable = abs(plus.moment_central - minus.moment_central) > tol
    if bistable:
        log.warning("bistable mean field at d=%.4f (%s): moments %.6f vs %.6f",
                    d, align.value, plus.moment_central, minus.moment_central)
    return HysteresisProbe(plus, minus, bistable)
