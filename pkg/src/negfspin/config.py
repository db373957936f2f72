"""Run configuration: TOML file -> validated, fully defaulted :class:`RunConfig`.

See ``docs/config.md`` for the grammar.  Validation collects every problem it
finds and raises them together in a :class:`ConfigError`.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .density import ContourSpec, ScfSettings
from .greens import DEFAULT_ETA
from .model import Alignment, DeviceSpec, JunctionSetup, LeadSpec, ModelError
from .presets import COPC_PARAM_NAMES, PRESETS, CopcAnalogParams, get_preset

TASK_KINDS = ("transmission", "dos", "conductance", "moment", "mr", "iv", "distance_sweep")
DEFAULT_FILES = {
    "transmission": "transmission.csv",
    "dos": "dos.csv",
    "conductance": "conductance.csv",
    "moment": "moment_vs_d.csv",
    "mr": "mr_vs_d.csv",
    "iv": "iv.csv",
    "distance_sweep": "distance_sweep.csv",
}
ALIGNMENTS = ("PC", "APC")

# keys each task kind accepts, with defaults (None = required)
TASK_KEYS: Dict[str, Dict[str, Any]] = {
    "transmission": {"alignment": "PC", "distance": 2.05, "energies": None},
    "dos": {"alignment": "PC", "distance": 2.05, "energies": None},
    "conductance": {"alignment": "PC", "distance": 2.05},
    "moment": {"alignments": ["PC", "APC"], "distances": None},
    "mr": {"distances": None},
    "iv": {"alignment": "PC", "distance": 2.05, "voltages": None, "n_points": 200},
    "distance_sweep": {"distances": None, "observables": ["moment", "conductance", "mr"],
                       "warm_start": False},
}
GRID_KEYS = {"energies", "distances", "voltages"}


class ConfigError(ValueError):
    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class PhysicsConfig:
    kT: float = 0.025
    eta: float = DEFAULT_ETA
    U: Optional[float] = None
    exchange_substrate: Optional[float] = None
    exchange_tip: Optional[float] = None
    t0: Optional[float] = None
    beta: Optional[float] = None
    d0: Optional[float] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    precision: int = 9


@dataclass(frozen=True)
class TaskConfig:
    kind: str
    file: str
    params: Dict[str, Any]


@dataclass(frozen=True)
class RunConfig:
    model: Dict[str, Any]
    physics: PhysicsConfig
    contour: ContourSpec
    scf: ScfSettings
    tasks: Tuple[TaskConfig, ...]
    output: OutputConfig
    setup: JunctionSetup = field(repr=False, compare=False, default=None)

    def resolved(self) -> Dict[str, Any]:
        """Plain-data view with every default expanded (goes into the manifest)."""
        return {
            "model": self.model,
            "physics": asdict(self.physics),
            "contour": asdict(self.contour),
            "scf": asdict(self.scf),
            "tasks": [{"kind": t.kind, "file": t.file, **t.params} for t in self.tasks],
            "output": asdict(self.output),
        }


def expand_grid(spec) -> List[float]:
    """A grid is a list of numbers or a table ``{start, stop, step}`` / ``{start, stop, num}``."""
    if isinstance(spec, (list, tuple)):
        return [float(x) for x in spec]
    if isinstance(spec, dict):
        extra = set(spec) - {"start", "stop", "step", "num"}
        if extra:
            raise ValueError(f"unknown grid keys {sorted(extra)}")
        start, stop = float(spec["start"]), float(spec["stop"])
        if ("step" in spec) == ("num" in spec):
            raise ValueError("grid needs exactly one of 'step' or 'num'")
        if "num" in spec:
            num = int(spec["num"])
            if num < 1:
                raise ValueError("grid 'num' must be >= 1")
            return [float(x) for x in np.linspace(start, stop, num)]
        step = float(spec["step"])
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    raise ValueError("grid must be a list or a {start, stop, step|num} table")


def _check_keys(table: dict, allowed, where: str, errors: List[str]) -> None:
    for k in table:
        if k not in allowed:
            errors.append(f"{where}: unknown key '{k}'")


def _build_dataclass(cls, table: dict, where: str, errors: List[str]):
    names = [f.name for f in fields(cls)]
    _check_keys(table, names, where, errors)
    kwargs = {k: v for k, v in table.items() if k in names}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{where}: {exc}")
        return cls()


def _matrix(value, where, errors):
    try:
        m = np.array(value, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        return m
    except (TypeError, ValueError):
        errors.append(f"{where}: not a numeric matrix")
        return None


def _custom_lead(table, where, errors):
    if not isinstance(table, dict):
        errors.append(f"{where}: must be a table")
        return None
    n_err = len(errors)
    allowed = {"h00", "h01", "exchange", "mu", "magnetization_sign"}
    _check_keys(table, allowed, where, errors)
    for k in ("h00", "h01"):
        if k not in table:
            errors.append(f"{where}: missing key '{k}'")
    if len(errors) > n_err:
        return None
    try:
        return LeadSpec(_matrix(table["h00"], where + ".h00", errors), _matrix(table["h01"], where + ".h01", errors),
                        float(table.get("exchange", 0.0)), float(table.get("mu", 0.0)),
                        int(table.get("magnetization_sign", 1)))
    except (ModelError, TypeError, ValueError) as exc:
        errors.append(f"{where}: {exc}")
        return None


def _build_setup(model: dict, physics: PhysicsConfig, errors: List[str]) -> Optional[JunctionSetup]:
    _check_keys(model, {"preset", "params", "custom"}, "model", errors)
    preset = model.get("preset")
    setup = None
    if preset == "custom":
        custom = model.get("custom")
        if not isinstance(custom, dict):
            errors.append("model: preset 'custom' needs a [model.custom] table")
            return None
        allowed = {"h_dev", "central_index", "u_hubbard", "coupling_left", "coupling_right_template",
                   "left", "right"}
        _check_keys(custom, allowed, "model.custom", errors)
        missing = [k for k in sorted(allowed) if k not in custom]
        if missing:
            errors.append(f"model.custom: missing keys {missing}")
            return None
        n_err = len(errors)
        left = _custom_lead(custom["left"], "model.custom.left", errors)
        right = _custom_lead(custom["right"], "model.custom.right", errors)
        if len(errors) > n_err:
            return None
        try:
            dev = DeviceSpec(_matrix(custom["h_dev"], "model.custom.h_dev", errors), int(custom["central_index"]),
                             float(custom["u_hubbard"]), _matrix(custom["coupling_left"], "coupling_left", errors),
                             _matrix(custom["coupling_right_template"], "coupling_right_template", errors))
            setup = JunctionSetup(dev, left, right)
            setup.assemble(Alignment.PC, 2.05)
        except (ModelError, TypeError, ValueError) as exc:
            errors.append(f"model.custom: {exc}")
            return None
    elif preset in PRESETS:
        params = model.get("params", {})
        if params and preset != "copc-analog":
            errors.append(f"model.params: preset '{preset}' takes no parameters")
            params = {}
        _check_keys(params, COPC_PARAM_NAMES, "model.params", errors)
        params = {k: v for k, v in params.items() if k in COPC_PARAM_NAMES}
        try:
            setup = get_preset(preset, **params)
        except (ModelError, TypeError, ValueError) as exc:
            errors.append(f"model.params: {exc}")
            return None
    else:
        errors.append(f"model.preset: unknown preset {preset!r}; choose from {sorted(PRESETS) + ['custom']}")
        return None
    return _apply_physics(setup, physics, errors)


def _apply_physics(setup: JunctionSetup, ph: PhysicsConfig, errors: List[str]) -> Optional[JunctionSetup]:
    """Overlay the [physics] overrides on the model."""
    checks = [("U", lambda x: x >= 0, ">= 0"), ("exchange_substrate", lambda x: x >= 0, ">= 0"),
              ("exchange_tip", lambda x: x >= 0, ">= 0"), ("t0", lambda x: x > 0, "> 0"),
              ("beta", lambda x: x > 0, "> 0"), ("d0", math.isfinite, "finite")]
    ok = True
    for name, pred, what in checks:
        value = getattr(ph, name)
        if value is not None and not (isinstance(value, (int, float)) and pred(value)):
            errors.append(f"physics.{name}: must be {what}, got {value!r}")
            ok = False
    if not ok:
        return None
    dev, left, right, law = setup.device, setup.left, setup.right, setup.law
    if ph.U is not None:
        dev = replace(dev, u_hubbard=float(ph.U))
    if ph.exchange_substrate is not None:
        left = replace(left, exchange=float(ph.exchange_substrate))
    if ph.exchange_tip is not None:
        right = replace(right, exchange=float(ph.exchange_tip))
    law_kw = {k: float(getattr(ph, k)) for k in ("t0", "beta", "d0") if getattr(ph, k) is not None}
    if law_kw:
        law = replace(law, **law_kw)
    return JunctionSetup(dev, left, right, law)


def _validate_task(i: int, raw: dict, setup: Optional[JunctionSetup], errors: List[str]) -> Optional[TaskConfig]:
    where = f"tasks[{i}]"
    kind = raw.get("kind")
    if kind not in TASK_KINDS:
        errors.append(f"{where}.kind: must be one of {list(TASK_KINDS)}, got {kind!r}")
        return None
    spec = TASK_KEYS[kind]
    _check_keys(raw, set(spec) | {"kind", "file"}, where, errors)
    params: Dict[str, Any] = {}
    for key, default in spec.items():
        if key not in raw:
            if default is None:
                errors.append(f"{where}.{key}: required for task '{kind}'")
                continue
            params[key] = default
            continue
        value = raw[key]
        if key in GRID_KEYS:
            try:
                grid = expand_grid(value)
            except (ValueError, KeyError, TypeError) as exc:
                errors.append(f"{where}.{key}: {exc}")
                continue
            if not grid:
                errors.append(f"{where}.{key}: empty grid")
            elif any(b <= a for a, b in zip(grid, grid[1:])):
                errors.append(f"{where}.{key}: values must be strictly increasing")
            elif not all(math.isfinite(x) for x in grid):
                errors.append(f"{where}.{key}: values must be finite")
            params[key] = grid
        else:
            params[key] = value
    if "alignment" in params and params["alignment"] not in ALIGNMENTS:
        errors.append(f"{where}.alignment: must be one of {list(ALIGNMENTS)}")
    if "alignments" in params:
        al = params["alignments"]
        if not isinstance(al, list) or not al or any(a not in ALIGNMENTS for a in al) or len(set(al)) != len(al):
            errors.append(f"{where}.alignments: must be a non-empty list drawn from {list(ALIGNMENTS)}")
    for key in ("distance",):
        if key in params and not (isinstance(params[key], (int, float)) and math.isfinite(params[key])):
            errors.append(f"{where}.{key}: must be a finite number")
    if "n_points" in params and not (isinstance(params["n_points"], int) and params["n_points"] >= 2):
        errors.append(f"{where}.n_points: must be an integer >= 2")
    if "observables" in params:
        bad = set(params["observables"]) - {"moment", "conductance", "mr"}
        if bad:
            errors.append(f"{where}.observables: unknown {sorted(bad)}")
    if "warm_start" in params and not isinstance(params["warm_start"], bool):
        errors.append(f"{where}.warm_start: must be true or false")
    file = raw.get("file", DEFAULT_FILES[kind])
    if not isinstance(file, str) or not file.endswith(".csv") or "/" in file:
        errors.append(f"{where}.file: must be a plain '*.csv' file name")
    return TaskConfig(kind, file, params)


def build_config(raw: Dict[str, Any]) -> RunConfig:
    errors: List[str] = []
    _check_keys(raw, {"model", "physics", "contour", "scf", "tasks", "output"}, "config", errors)
    model = raw.get("model")
    if not isinstance(model, dict):
        errors.append("model: missing [model] section")
        model = {}
    physics = _build_dataclass(PhysicsConfig, raw.get("physics", {}), "physics", errors)
    kt_ok = True
    for name in ("kT", "eta"):
        value = getattr(physics, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            errors.append(f"physics.{name}: must be a number > 0, got {value!r}")
            kt_ok = kt_ok and name != "kT"
    contour = _build_dataclass(ContourSpec, raw.get("contour", {}), "contour", errors)
    if kt_ok and contour.kT != physics.kT:
        if "kT" in raw.get("contour", {}):
            errors.append("contour.kT: set the temperature in [physics] only")
        contour = ContourSpec(contour.n_circle, contour.n_line, contour.n_poles, contour.e_bottom, physics.kT)
    scf = _build_dataclass(ScfSettings, raw.get("scf", {}), "scf", errors)
    output = _build_dataclass(OutputConfig, raw.get("output", {}), "output", errors)
    if not (isinstance(output.precision, int) and 1 <= output.precision <= 17):
        errors.append("output.precision: must be an integer in [1, 17]")

    setup = _build_setup(model, physics, errors) if model else None

    tasks_raw = raw.get("tasks", [])
    if not isinstance(tasks_raw, list) or not tasks_raw:
        errors.append("tasks: at least one [[tasks]] entry is required")
        tasks_raw = []
    tasks = []
    for i, t in enumerate(tasks_raw):
        task = _validate_task(i, t, setup, errors)
        if task is not None:
            tasks.append(task)
    names = [t.file for t in tasks]
    for name in sorted(set(n for n in names if names.count(n) > 1)):
        errors.append(f"tasks: output file '{name}' used by more than one task; set 'file'")

    if errors:
        raise ConfigError(errors)
    # record the values actually in force, whether they came from [physics] or the model
    physics = replace(physics, U=setup.device.u_hubbard, exchange_substrate=setup.left.exchange,
                      exchange_tip=setup.right.exchange, t0=setup.law.t0, beta=setup.law.beta,
                      d0=setup.law.d0)
    model_resolved = dict(model)
    if model.get("preset") == "copc-analog":
        model_resolved["params"] = asdict(CopcAnalogParams(**model.get("params", {})))
    return RunConfig(model_resolved, physics, contour, scf, tuple(tasks), output, setup)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: TOML syntax error: {exc}"]) from exc
    return build_config(raw)
