"""Command-line front end.

    negfspin run CONFIG [--out DIR] [--threads N] [--validate-only]

Exit status: 0 success, 1 invalid configuration, 2 a task failed or is incomplete.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, TaskConfig, parse_config
from .density import MomentResult, scf_moment
from .model import SPINS, Alignment
from .observables import E2_OVER_H, MRResult, conductance, iv_record, sweep_distance
from .transport import dos, eigenchannels, transmission

log = logging.getLogger("negfspin")

THREADS_ENV = "NEGFSPIN_THREADS"
# energy grids are cut into fixed-size chunks so results never depend on the thread count
ENERGY_CHUNK = 64

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


@dataclass
class TaskOutcome:
    header: List[str]
    rows: List[list]
    unconverged: List[str] = field(default_factory=list)
    row_errors: List[str] = field(default_factory=list)


def format_value(x, precision: int) -> str:
    """Render one CSV cell; ``precision`` counts mantissa digits after the leading one (2.0 -> 2.000000000)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if x == 0.0:
            x = 0.0  # no negative zero in output
        return format(x, f"#.{precision + 1}g")
    return str(x)


def render_csv(header: Sequence[str], rows: Sequence[Sequence], precision: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(x, precision) for x in row])
    return buf.getvalue()


class Runner:
    def __init__(self, config: RunConfig, map_fn: Callable = map):
        self.cfg = config
        self.setup = config.setup
        self.map = map_fn
        self.eta = config.physics.eta
        self.kT = config.physics.kT
        self._scf_cache: Dict[tuple, MomentResult] = {}

    def scf(self, align: str, d: float) -> MomentResult:
        key = (align, float(d))
        if key not in self._scf_cache:
            self._scf_cache[key] = scf_moment(self.setup, Alignment(align), d, self.cfg.scf, self.cfg.contour)
        return self._scf_cache[key]

    def _chunked(self, fn, energies):
        chunks = [energies[i:i + ENERGY_CHUNK] for i in range(0, len(energies), ENERGY_CHUNK)]
        return np.concatenate(list(self.map(fn, chunks)), axis=0)

    def _flag(self, res: MomentResult, label: str, out: TaskOutcome):
        if not res.converged:
            out.unconverged.append(label)

    def task_transmission(self, p) -> TaskOutcome:
        res = self.scf(p["alignment"], p["distance"])
        model = res.model
        e_rel = np.asarray(p["energies"])
        e_abs = model.mu + e_rel
        n_ch = min(model.n_sites, *(lead.n_orb for lead in model.leads))
        out = TaskOutcome(["E", "spin", "T"] + [f"channel_{k + 1}" for k in range(n_ch)], [])
        self._flag(res, f"{p['alignment']} d={p['distance']}", out)
        per_spin = {}
        for s in SPINS:
            t = self._chunked(lambda e, s=s: transmission(model, s, e, self.eta), e_abs)
            ch = self._chunked(lambda e, s=s: eigenchannels(model, s, e, self.eta), e_abs)
            per_spin[s] = (t, ch)
        for i, e in enumerate(e_rel):
            for s in SPINS:
                t, ch = per_spin[s]
                out.rows.append([float(e), s.value, float(t[i])] + [float(c) for c in ch[i, :n_ch]])
        return out

    def task_dos(self, p) -> TaskOutcome:
        res = self.scf(p["alignment"], p["distance"])
        model = res.model
        e_rel = np.asarray(p["energies"])
        out = TaskOutcome(["E", "spin", "total"] + [f"site_{k}" for k in range(model.n_sites)], [])
        self._flag(res, f"{p['alignment']} d={p['distance']}", out)
        per_spin = {s: self._chunked(lambda e, s=s: dos(model, s, e, self.eta), model.mu + e_rel) for s in SPINS}
        for i, e in enumerate(e_rel):
            for s in SPINS:
                ld = per_spin[s][i]
                out.rows.append([float(e), s.value, float(np.sum(ld))] + [float(x) for x in ld])
        return out

    def task_conductance(self, p) -> TaskOutcome:
        res = self.scf(p["alignment"], p["distance"])
        g = conductance(res.model, self.eta)
        out = TaskOutcome(["d", "alignment", "G_up", "G_down", "G_total", "moment", "converged"], [])
        self._flag(res, f"{p['alignment']} d={p['distance']}", out)
        out.rows.append([float(p["distance"]), p["alignment"], g.g.up, g.g.down, g.total,
                         res.moment_central, res.converged])
        return out

    def task_moment(self, p) -> TaskOutcome:
        pairs = [(d, a) for d in p["distances"] for a in ALIGN_ORDER if a in p["alignments"]]
        results = list(self.map(lambda da: self.scf(da[1], da[0]), pairs))
        out = TaskOutcome(["d", "alignment", "moment", "converged"], [])
        for (d, a), res in zip(pairs, results):
            self._flag(res, f"{a} d={d}", out)
            out.rows.append([d, a, res.moment_central, res.converged])
        return out

    def task_mr(self, p) -> TaskOutcome:
        def point(d):
            pc, apc = self.scf("PC", d), self.scf("APC", d)
            mr = MRResult(d, conductance(pc.model, self.eta).total, conductance(apc.model, self.eta).total)
            return pc, apc, mr

        out = TaskOutcome(["d", "G_PC", "G_APC", "MR"], [])
        for d, (pc, apc, mr) in zip(p["distances"], self.map(point, p["distances"])):
            self._flag(pc, f"PC d={d}", out)
            self._flag(apc, f"APC d={d}", out)
            if not mr.defined:
                out.row_errors.append(f"d={d}: G_PC below {mr.g_pc:.3g}, MR undefined")
            out.rows.append([d, mr.g_pc, mr.g_apc, mr.mr])
        return out

    def task_iv(self, p) -> TaskOutcome:
        res = self.scf(p["alignment"], p["distance"])
        model = res.model
        recs = list(self.map(lambda v: iv_record(model, v, p["n_points"], self.kT, self.eta), p["voltages"]))
        out = TaskOutcome(["V", "I_up", "I_down", "I_total", "I_total_A"], [])
        self._flag(res, f"{p['alignment']} d={p['distance']}", out)
        for r in recs:
            out.rows.append([r.v, r.i_spin.up, r.i_spin.down, r.i_total, r.i_total * E2_OVER_H])
        return out

    def task_distance_sweep(self, p) -> TaskOutcome:
        obs = tuple(p["observables"])
        sweep = sweep_distance(self.setup, p["distances"], obs, self.cfg.scf, self.cfg.contour,
                               self.eta, warm_start=p["warm_start"], map_fn=self.map)
        keys = []
        if "moment" in obs:
            keys += ["moment_PC", "moment_APC", "converged_PC", "converged_APC"]
        if "conductance" in obs or "mr" in obs:
            keys += ["G_up_PC", "G_down_PC", "G_PC", "G_up_APC", "G_down_APC", "G_APC"]
        if "mr" in obs:
            keys.append("MR")
        out = TaskOutcome(["d"] + keys + ["error"], [])
        for d, row in sweep.rows:
            if "error" in row:
                out.row_errors.append(f"d={d}: {row['error']}")
            for a in ALIGN_ORDER:
                if row.get(f"converged_{a}") is False:
                    out.unconverged.append(f"{a} d={d}")
            out.rows.append([d] + [row.get(k, math.nan) for k in keys] + [row.get("error", "")])
        return out


ALIGN_ORDER = ("PC", "APC")


def resolve_threads(flag: Optional[int]) -> int:
    if flag is None:
        env = os.environ.get(THREADS_ENV)
        flag = int(env) if env else 0
    if flag < 0:
        raise ValueError("--threads must be >= 0")
    return flag or (os.cpu_count() or 1)


@contextmanager
def _mapper(threads: int):
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield pool.map


def run(config: RunConfig, out_dir: Optional[Path] = None, threads: int = 1,
        config_path: Optional[str] = None) -> int:
    """Execute every task, write one CSV per task plus ``manifest.json``; return the exit code."""
    out_dir = Path(out_dir or config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    manifest = {
        "engine": "negfspin",
        "version": __version__,
        "config_path": config_path,
        "resolved_config": config.resolved(),
        "threads": threads,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "tasks": [],
    }
    status = EXIT_OK
    with _mapper(threads) as map_fn:
        runner = Runner(config, map_fn)
        for task in config.tasks:
            entry = _run_task(runner, task, out_dir, config.output.precision)
            manifest["tasks"].append(entry)
            if entry["status"] != "complete":
                status = EXIT_FAILED
    manifest["wall_time_s"] = round(time.time() - started, 3)
    manifest["status"] = "ok" if status == EXIT_OK else "failed"
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


def _run_task(runner: Runner, task: TaskConfig, out_dir: Path, precision: int) -> dict:
    t0 = time.perf_counter()
    entry = {"kind": task.kind, "file": task.file}
    try:
        outcome = getattr(runner, f"task_{task.kind}")(task.params)
    except Exception as exc:  # noqa: BLE001 - reported in the manifest, other tasks still run
        log.exception("task %s failed", task.kind)
        entry.update(status="failed", error=f"{type(exc).__name__}: {exc}", file=None)
    else:
        (out_dir / task.file).write_text(render_csv(outcome.header, outcome.rows, precision))
        entry.update(
            status="incomplete" if outcome.row_errors else "complete",
            rows=len(outcome.rows),
            all_converged=not outcome.unconverged,
            unconverged=outcome.unconverged,
            row_errors=outcome.row_errors,
        )
    entry["wall_time_s"] = round(time.perf_counter() - t0, 3)
    return entry


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="negfspin", description="Spin-polarized NEGF transport for model junctions.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every task in a configuration file")
    r.add_argument("config", help="path to the TOML configuration")
    r.add_argument("--out", help="output directory (overrides [output].directory)")
    r.add_argument("--threads", type=int, default=None,
                   help=f"worker threads, 0 = all cores (default: ${THREADS_ENV} or 0)")
    r.add_argument("--validate-only", action="store_true", help="check the configuration and exit")
    r.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config)
        threads = resolve_threads(args.threads)
    except (ConfigError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    if args.validate_only:
        print(f"{args.config}: OK ({len(config.tasks)} tasks)")
        return EXIT_OK
    return run(config, Path(args.out) if args.out else None, threads, str(args.config))


if __name__ == "__main__":
    sys.exit(main())
