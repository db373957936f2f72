"""Tight-binding junction models: magnetic leads, molecular device, distance-dependent tip.

All energies are in eV, distances in angstrom.  The basis is orthogonal.

Lead blocks are given in the lead's own frame, counted from the surface layer
(the one touching the device) inward: ``h01`` is the block ``H[n, n+1]`` that
couples a layer to the next one deeper in the lead.  With that convention the
surface Green's function obeys ``g = [z - h00 - h01 g h01^dag]^-1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Generic, NamedTuple, Optional, TypeVar

import numpy as np

T = TypeVar("T")
U = TypeVar("U")

HERMITIAN_TOL = 1e-12


class SpinChannel(enum.Enum):
    UP = "up"
    DOWN = "down"

    def other(self) -> "SpinChannel":
        return SpinChannel.DOWN if self is SpinChannel.UP else SpinChannel.UP


SPINS = (SpinChannel.UP, SpinChannel.DOWN)


@dataclass(frozen=True)
class SpinResolved(Generic[T]):
    """A pair of values indexed by collinear spin channel."""

    up: T
    down: T

    def __getitem__(self, spin: SpinChannel) -> T:
        if spin is SpinChannel.UP:
            return self.up
        if spin is SpinChannel.DOWN:
            return self.down
        raise KeyError(spin)

    def map(self, fn: Callable[[T], U]) -> "SpinResolved[U]":
        return SpinResolved(fn(self.up), fn(self.down))

    def swapped(self) -> "SpinResolved[T]":
        return SpinResolved(self.down, self.up)

    @classmethod
    def from_fn(cls, fn: Callable[[SpinChannel], T]) -> "SpinResolved[T]":
        return cls(fn(SpinChannel.UP), fn(SpinChannel.DOWN))


class Alignment(enum.Enum):
    PC = "PC"
    APC = "APC"


class ModelError(ValueError):
    """Inconsistent model input (shape mismatch, non-Hermitian block, bad range)."""


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ModelError(f"{name} must be a 2-D matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


def _check_hermitian(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise ModelError(f"{name} must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ModelError(f"{name} is not Hermitian")


class LeadBlocks(NamedTuple):
    h00: np.ndarray
    h01: np.ndarray


@dataclass(frozen=True, eq=False)
class LeadSpec:
    """Principal-layer description of a semi-infinite ferromagnetic electrode."""

    h00: np.ndarray
    h01: np.ndarray
    exchange: float = 0.0
    mu: float = 0.0
    magnetization_sign: int = 1

    def __post_init__(self):
        h00 = _as_matrix(self.h00, "h00")
        h01 = _as_matrix(self.h01, "h01")
        _check_hermitian(h00, "h00")
        if h01.shape != h00.shape:
            raise ModelError(f"h01 shape {h01.shape} does not match h00 shape {h00.shape}")
        if not self.exchange >= 0.0:
            raise ModelError(f"exchange must be >= 0, got {self.exchange}")
        if self.magnetization_sign not in (1, -1):
            raise ModelError(f"magnetization_sign must be +1 or -1, got {self.magnetization_sign}")
        object.__setattr__(self, "h00", h00)
        object.__setattr__(self, "h01", h01)

    @property
    def n_orb(self) -> int:
        return self.h00.shape[0]

    @classmethod
    def chain(cls, onsite: float = 0.0, hopping: float = -1.0, exchange: float = 0.0,
              mu: float = 0.0, magnetization_sign: int = 1) -> "LeadSpec":
        """Single-orbital nearest-neighbour chain."""
        return cls([[onsite]], [[hopping]], exchange, mu, magnetization_sign)

    def band_bottom(self) -> float:
        """Lower bound of the lead band (exact for single-orbital chains)."""
        e_min = float(np.linalg.eigvalsh(self.h00)[0])
        return e_min - 2.0 * float(np.linalg.norm(self.h01, 2)) - 0.5 * self.exchange


def build_lead(spec: LeadSpec, spin: SpinChannel, flip: bool = False) -> LeadBlocks:
    """Per-spin lead blocks with the rigid exchange shift applied.

    The majority channel is ``UP`` when ``magnetization_sign`` is +1 (after an
    optional flip) and is shifted by ``-exchange/2``; minority by ``+exchange/2``.
    """
    sign = spec.magnetization_sign * (-1 if flip else 1)
    majority = SpinChannel.UP if sign > 0 else SpinChannel.DOWN
    s = -1.0 if spin is majority else 1.0
    h00 = spec.h00 + s * 0.5 * spec.exchange * np.eye(spec.n_orb)
    h00.setflags(write=False)
    return LeadBlocks(h00, spec.h01)


@dataclass(frozen=True)
class DistanceLaw:
    """Exponential tip-molecule coupling ``t0 * exp(-beta * (d - d0))``."""

    t0: float = 1.0
    beta: float = 1.0
    d0: float = 2.05

    def __post_init__(self):
        if not self.t0 > 0:
            raise ModelError(f"t0 must be > 0, got {self.t0}")
        if not self.beta > 0:
            raise ModelError(f"beta must be > 0, got {self.beta}")

    def coupling(self, d: float) -> float:
        return distance_to_coupling(d, self)


def distance_to_coupling(d: float, law: DistanceLaw) -> float:
    if not math.isfinite(d):
        raise ModelError(f"distance must be finite, got {d}")
    return law.t0 * math.exp(-law.beta * (d - law.d0))


@dataclass(frozen=True, eq=False)
class DeviceSpec:
    """Scattering region: spin-independent Hamiltonian plus lead couplings.

    ``coupling_left[a, i]`` is the hopping between surface orbital ``a`` of the
    substrate lead and device site ``i``; ``coupling_right_template`` is the
    same for the tip lead before distance scaling.
    """

    h_dev: np.ndarray
    central_index: int
    u_hubbard: float
    coupling_left: np.ndarray
    coupling_right_template: np.ndarray

    def __post_init__(self):
        h = _as_matrix(self.h_dev, "h_dev")
        _check_hermitian(h, "h_dev")
        n = h.shape[0]
        if not 0 <= self.central_index < n:
            raise ModelError(f"central_index {self.central_index} out of range for {n} sites")
        if not self.u_hubbard >= 0:
            raise ModelError(f"u_hubbard must be >= 0, got {self.u_hubbard}")
        vl = _as_matrix(self.coupling_left, "coupling_left")
        vr = _as_matrix(self.coupling_right_template, "coupling_right_template")
        for name, v in (("coupling_left", vl), ("coupling_right_template", vr)):
            if v.shape[1] != n:
                raise ModelError(f"{name} has {v.shape[1]} columns, device has {n} sites")
        object.__setattr__(self, "h_dev", h)
        object.__setattr__(self, "coupling_left", vl)
        object.__setattr__(self, "coupling_right_template", vr)

    @property
    def n_sites(self) -> int:
        return self.h_dev.shape[0]


@dataclass(frozen=True, eq=False)
class JunctionModel:
    """Two-terminal system assembled for one (alignment, distance) point."""

    h_dev_eff: SpinResolved[np.ndarray]
    lead_left: SpinResolved[LeadBlocks]
    lead_right: SpinResolved[LeadBlocks]
    v_left: SpinResolved[np.ndarray]
    v_right: SpinResolved[np.ndarray]
    leads: tuple
    alignment: Alignment
    distance: float
    mu: float
    central_index: int = 0

    @property
    def n_sites(self) -> int:
        return self.h_dev_eff.up.shape[0]

    def spectral_bottom(self) -> float:
        """Lowest energy carrying spectral weight, bounded from below."""
        e_dev = min(float(np.linalg.eigvalsh(h)[0]) for h in (self.h_dev_eff.up, self.h_dev_eff.down))
        e_lead = min(lead.band_bottom() for lead in self.leads)
        # block Gershgorin bound on the full (device + leads) Hamiltonian
        v = float(np.linalg.norm(self.v_left.up, 2) + np.linalg.norm(self.v_right.up, 2))
        return min(e_dev, e_lead) - v


def assemble_junction(dev: DeviceSpec, left: LeadSpec, right: LeadSpec, align: Alignment,
                      d: float, law: DistanceLaw,
                      occupations: Optional[SpinResolved[float]] = None) -> JunctionModel:
    """Assemble the per-spin two-terminal model.

    ``occupations`` holds the frozen central-site occupations; spin ``s`` sees
    the mean-field shift ``U * n[other(s)]`` on the central site.
    """
    if left.n_orb != dev.coupling_left.shape[0]:
        raise ModelError(f"coupling_left has {dev.coupling_left.shape[0]} rows, "
                         f"left lead has {left.n_orb} orbitals")
    if right.n_orb != dev.coupling_right_template.shape[0]:
        raise ModelError(f"coupling_right_template has {dev.coupling_right_template.shape[0]} rows, "
                         f"right lead has {right.n_orb} orbitals")
    if occupations is None:
        occupations = SpinResolved(0.0, 0.0)

    flip = align is Alignment.APC
    c = dev.central_index

    def h_eff(spin: SpinChannel) -> np.ndarray:
        h = dev.h_dev.copy()
        h[c, c] += dev.u_hubbard * occupations[spin.other()]
        h.setflags(write=False)
        return h

    vr = distance_to_coupling(d, law) * dev.coupling_right_template
    vr.setflags(write=False)
    return JunctionModel(
        h_dev_eff=SpinResolved.from_fn(h_eff),
        lead_left=SpinResolved.from_fn(lambda s: build_lead(left, s, False)),
        lead_right=SpinResolved.from_fn(lambda s: build_lead(right, s, flip)),
        v_left=SpinResolved(dev.coupling_left, dev.coupling_left),
        v_right=SpinResolved(vr, vr),
        leads=(left, right),
        alignment=align,
        distance=float(d),
        mu=left.mu,
        central_index=c,
    )


@dataclass(frozen=True, eq=False)
class JunctionSetup:
    """Everything needed to assemble a junction at any (alignment, distance)."""

    device: DeviceSpec
    left: LeadSpec
    right: LeadSpec
    law: DistanceLaw = field(default_factory=DistanceLaw)

    def __post_init__(self):
        if self.left.mu != self.right.mu:
            raise ModelError("both leads must share the same chemical potential at zero bias")

    def assemble(self, align: Alignment, d: float,
                 occupations: Optional[SpinResolved[float]] = None) -> JunctionModel:
        return assemble_junction(self.device, self.left, self.right, align, d, self.law, occupations)

    @property
    def mu(self) -> float:
        return self.left.mu

    def spin_reversed(self) -> "JunctionSetup":
        """Same setup with both lead magnetizations reversed."""
        return replace(
            self,
            left=replace(self.left, magnetization_sign=-self.left.magnetization_sign),
            right=replace(self.right, magnetization_sign=-self.right.magnetization_sign),
        )
