"""Bias-window currents, zero-bias conductance, magnetoresistance and parameter sweeps.

Currents are returned in natural units of (e/h) * eV, i.e. the value of
``int T (f_L - f_R) dE`` with E in eV; multiply by :data:`E2_OVER_H` for amperes.
Each spin channel carries e/h, so a spin-degenerate junction gives the
familiar 2e/h prefactor once both channels are summed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import constants
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .density import DEFAULT_KT, ContourSpec, MomentResult, ScfSettings, fermi, scf_moment
from .greens import DEFAULT_ETA
from .model import Alignment, JunctionModel, JunctionSetup, SpinChannel, SpinResolved
from .transport import transmission

log = logging.getLogger(__name__)

E2_OVER_H = constants.e ** 2 / constants.h  # A per (e/h * eV), i.e. siemens
WINDOW_PAD_KT = 10.0
G_PC_FLOOR = 1e-14


@dataclass(frozen=True)
class BiasPoint:
    v: float
    mu: float = 0.0

    @property
    def mu_l(self) -> float:
        return self.mu + 0.5 * self.v

    @property
    def mu_r(self) -> float:
        return self.mu - 0.5 * self.v


@dataclass(frozen=True)
class IVRecord:
    v: float
    i_spin: SpinResolved[float]

    @property
    def i_total(self) -> float:
        return self.i_spin.up + self.i_spin.down

    @property
    def i_total_amperes(self) -> float:
        return self.i_total * E2_OVER_H


def bias_grid(bias: BiasPoint, n_points: int, kT: float) -> np.ndarray:
    lo = min(bias.mu_l, bias.mu_r) - WINDOW_PAD_KT * kT
    hi = max(bias.mu_l, bias.mu_r) + WINDOW_PAD_KT * kT
    return np.linspace(lo, hi, n_points)


def integrate_current(energies, t_of_e, bias: BiasPoint, kT: float) -> float:
    """Trapezoid rule for ``int T(E) [f(E - mu_L) - f(E - mu_R)] dE``."""
    window = fermi(energies, bias.mu_l, kT) - fermi(energies, bias.mu_r, kT)
    return float(trapezoid(np.asarray(t_of_e) * window, energies))


def current(model: JunctionModel, spin: SpinChannel, v: float, n_points: int = 200,
            kT: float = DEFAULT_KT, eta: float = DEFAULT_ETA) -> float:
    """Spin-resolved Landauer current in units of (e/h) * eV.

    Uses the zero-bias transmission over ``n_points`` uniform energies spanning
    the bias window padded by 10 kT on each side.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    bias = BiasPoint(v, model.mu)
    if v == 0.0:
        return 0.0
    e = bias_grid(bias, n_points, kT)
    return integrate_current(e, transmission(model, spin, e, eta), bias, kT)


def iv_record(model: JunctionModel, v: float, n_points: int = 200, kT: float = DEFAULT_KT,
              eta: float = DEFAULT_ETA) -> IVRecord:
    return IVRecord(float(v), SpinResolved.from_fn(lambda s: current(model, s, v, n_points, kT, eta)))


@dataclass(frozen=True)
class Conductance:
    """Zero-bias conductance in units of e^2/h per spin."""

    g: SpinResolved[float]

    @property
    def total(self) -> float:
        return self.g.up + self.g.down


def conductance(model: JunctionModel, eta: float = DEFAULT_ETA) -> Conductance:
    return Conductance(SpinResolved.from_fn(lambda s: transmission(model, s, model.mu, eta)))


def solve_point(setup: JunctionSetup, align: Alignment, d: float,
                settings: ScfSettings = ScfSettings(), contour: ContourSpec = ContourSpec(),
                initial: Optional[SpinResolved[float]] = None) -> MomentResult:
    """Self-consistent model at one (alignment, distance); ``.model`` carries the converged field."""
    return scf_moment(setup, align, d, settings, contour, initial)


@dataclass(frozen=True)
class MRResult:
    d: float
    g_pc: float
    g_apc: float
    converged: bool = True

    @property
    def defined(self) -> bool:
        return self.g_pc >= G_PC_FLOOR

    @property
    def mr(self) -> float:
        """``(G_APC - G_PC) / G_PC``; NaN when G_PC is below the division guard."""
        if not self.defined:
            return math.nan
        return (self.g_apc - self.g_pc) / self.g_pc


def magnetoresistance(setup: JunctionSetup, d: float, settings: ScfSettings = ScfSettings(),
                      contour: ContourSpec = ContourSpec(), eta: float = DEFAULT_ETA) -> MRResult:
    pc = solve_point(setup, Alignment.PC, d, settings, contour)
    apc = solve_point(setup, Alignment.APC, d, settings, contour)
    return MRResult(float(d), conductance(pc.model, eta).total, conductance(apc.model, eta).total,
                    pc.converged and apc.converged)


@dataclass(frozen=True)
class SpinFlip:
    d_star: float
    bracket: Tuple[float, float]
    moment_at_d_star: float


def find_spin_flip(setup: JunctionSetup, align: Alignment, d_lo: float, d_hi: float,
                   n_scan: int = 16, xtol: float = 5e-3, settings: ScfSettings = ScfSettings(),
                   contour: ContourSpec = ContourSpec()) -> Optional[SpinFlip]:
    """Distance where the central moment changes sign, or None if it never does.

    A uniform scan of ``n_scan`` points locates the first sign change; Brent's
    method then refines it to ``xtol``.
    """
    def moment(d):
        return solve_point(setup, align, d, settings, contour).moment_central

    grid = np.linspace(d_lo, d_hi, n_scan)
    values = [moment(d) for d in grid]
    for (a, ma), (b, mb) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if ma == 0.0:
            return SpinFlip(float(a), (float(a), float(a)), 0.0)
        if ma * mb < 0:
            d_star = brentq(moment, a, b, xtol=xtol)
            return SpinFlip(float(d_star), (float(a), float(b)), moment(d_star))
    return None


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of a least-squares straight line through (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


@dataclass
class SweepResult:
    parameter: str
    rows: List[Tuple[float, Dict[str, object]]] = field(default_factory=list)

    def __post_init__(self):
        self.rows.sort(key=lambda r: r[0])
        values = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"{self.parameter} values must be strictly monotone")

    def column(self, key: str) -> List[object]:
        return [row.get(key) for _, row in self.rows]

    @property
    def values(self) -> List[float]:
        return [r[0] for r in self.rows]


DISTANCE_OBSERVABLES = ("moment", "conductance", "mr")


def _distance_row(setup, d, observables, settings, contour, eta, initial=None):
    row: Dict[str, object] = {}
    try:
        occ = {}
        for align in Alignment:
            res = solve_point(setup, align, d, settings, contour,
                              None if initial is None else initial.get(align))
            occ[align] = res.central_occupations
            g = conductance(res.model, eta)
            tag = align.value
            if "moment" in observables:
                row[f"moment_{tag}"] = res.moment_central
                row[f"converged_{tag}"] = res.converged
            if "conductance" in observables or "mr" in observables:
                row[f"G_up_{tag}"] = g.g.up
                row[f"G_down_{tag}"] = g.g.down
                row[f"G_{tag}"] = g.total
        if "mr" in observables:
            row["MR"] = MRResult(d, row["G_PC"], row["G_APC"]).mr
        row["_occupations"] = occ
    except Exception as exc:  # noqa: BLE001 - per-row failures are recorded, the sweep goes on
        log.error("distance row d=%s failed: %s", d, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_distance(setup: JunctionSetup, distances: Sequence[float],
                   observables: Iterable[str] = DISTANCE_OBSERVABLES,
                   settings: ScfSettings = ScfSettings(), contour: ContourSpec = ContourSpec(),
                   eta: float = DEFAULT_ETA, warm_start: bool = False,
                   map_fn: Callable = map) -> SweepResult:
    """Moment / conductance / MR for both alignments at every distance.

    Rows are independent unless ``warm_start`` is set, in which case each SCF
    starts from the previous row's converged occupations and rows run serially.
    ``map_fn`` (e.g. an executor's ``map``) evaluates independent rows.
    """
    observables = tuple(observables)
    unknown = set(observables) - set(DISTANCE_OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables {sorted(unknown)}")
    distances = [float(d) for d in distances]
    if warm_start:
        rows = []
        prev = None
        for d in sorted(distances):
            row = _distance_row(setup, d, observables, settings, contour, eta, prev)
            prev = row.get("_occupations", prev)
            rows.append(row)
    else:
        rows = list(map_fn(lambda d: _distance_row(setup, d, observables, settings, contour, eta),
                           distances))
    for row in rows:
        row.pop("_occupations", None)
    return SweepResult("d", list(zip(distances, rows)))


def sweep_bias(model: JunctionModel, voltages: Sequence[float], n_points: int = 200,
               kT: float = DEFAULT_KT, eta: float = DEFAULT_ETA, map_fn: Callable = map) -> SweepResult:
    """Spin-resolved I-V curve of a fixed (zero-bias self-consistent) model."""
    voltages = [float(v) for v in voltages]

    def row(v):
        try:
            rec = iv_record(model, v, n_points, kT, eta)
            return {"I_up": rec.i_spin.up, "I_down": rec.i_spin.down, "I_total": rec.i_total}
        except Exception as exc:  # noqa: BLE001
            return {"error": f"{type(exc).__name__}: {exc}"}

    return SweepResult("V", list(zip(voltages, map_fn(row, voltages))))
