"""Named junction presets.

``copc-analog`` is a three-site anchor-centre-apex chain between a
ferromagnetic substrate chain and a ferromagnetic tip chain.  Its constants
were fixed by ``scripts/calibrate_preset.py``; they are model choices, not
fitted material parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .model import DeviceSpec, DistanceLaw, JunctionSetup, LeadSpec


@dataclass(frozen=True)
class CopcAnalogParams:
    # substrate lead
    lead_onsite: float = -0.841
    lead_hopping: float = -1.0
    lead_exchange: float = 1.385
    # tip lead
    tip_onsite: float = 0.632
    tip_hopping: float = -1.0
    tip_exchange: float = 0.967
    # device: substrate anchor (0), magnetic centre (1), tip apex (2)
    anchor_onsite: float = 0.956
    centre_onsite: float = -0.452
    apex_onsite: float = 0.819
    t_substrate_anchor: float = -1.0
    t_anchor_centre: float = -0.792
    t_centre_apex: float = -0.935
    u_hubbard: float = 0.624
    # distance law
    t0: float = 1.0
    beta: float = 1.0
    d0: float = 2.05
    mu: float = 0.0


def copc_analog(params: CopcAnalogParams = CopcAnalogParams()) -> JunctionSetup:
    p = params
    h = np.array([
        [p.anchor_onsite, p.t_anchor_centre, 0.0],
        [p.t_anchor_centre, p.centre_onsite, p.t_centre_apex],
        [0.0, p.t_centre_apex, p.apex_onsite],
    ])
    device = DeviceSpec(
        h_dev=h,
        central_index=1,
        u_hubbard=p.u_hubbard,
        coupling_left=[[p.t_substrate_anchor, 0.0, 0.0]],
        # tip lead couples to the apex site; its strength carries the distance law
        coupling_right_template=[[0.0, 0.0, -1.0]],
    )
    left = LeadSpec.chain(p.lead_onsite, p.lead_hopping, p.lead_exchange, p.mu, 1)
    right = LeadSpec.chain(p.tip_onsite, p.tip_hopping, p.tip_exchange, p.mu, 1)
    return JunctionSetup(device, left, right, DistanceLaw(p.t0, p.beta, p.d0))


def pristine_chain() -> JunctionSetup:
    """A single chain site between two identical nonmagnetic chains; T = 1 in band."""
    lead = LeadSpec.chain(0.0, -1.0, 0.0, 0.0, 1)
    device = DeviceSpec(h_dev=[[0.0]], central_index=0, u_hubbard=0.0,
                        coupling_left=[[-1.0]], coupling_right_template=[[-1.0]])
    return JunctionSetup(device, lead, lead, DistanceLaw(1.0, 1.0, 2.05))


PRESETS = {
    "copc-analog": copc_analog,
    "pristine-chain": pristine_chain,
}

COPC_PARAM_NAMES = tuple(f.name for f in fields(CopcAnalogParams))


def get_preset(name: str, **overrides) -> JunctionSetup:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "copc-analog":
        return copc_analog(CopcAnalogParams(**overrides))
    if overrides:
        raise ValueError(f"preset {name!r} takes no parameters")
    return PRESETS[name]()
