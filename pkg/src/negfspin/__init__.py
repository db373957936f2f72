"""Spin-polarized NEGF transport through model magnetic molecular junctions."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    SPINS, Alignment, DeviceSpec, DistanceLaw, JunctionModel, JunctionSetup, LeadSpec,
    SpinChannel, SpinResolved, assemble_junction, build_lead, distance_to_coupling,
)

__all__ = [
    "SPINS", "Alignment", "DeviceSpec", "DistanceLaw", "JunctionModel", "JunctionSetup", "LeadSpec",
    "SpinChannel", "SpinResolved", "assemble_junction", "build_lead", "distance_to_coupling",
]
