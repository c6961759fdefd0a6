"""Ensemble orchestration: oracles, warm starts, parallel replicas, reports.

Replicas run on a thread pool (the numba kernels release the GIL) and are
merged strictly in replica-index order, so every numeric output depends on
the configuration and master seed only.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import (OccupationAccumulator, PathFunctionals, QVAccumulator, conservativity,
                          fold, martingale_residual, qv_check, revuz_check, symmetry_check,
                          total_variation)
from .dynamics import MAX_ORACLE_STATES, ChainSpec, chain_stationary_oracle, simulate
from .errors import StickyError
from .observers import HistogramObserver, MartingaleObserver, OccupationObserver, QVObserver
from .quadrature import MAX_QUAD_DIMENSION, stratum_masses
from .rng import derive_replica_seed, replica_generator, sampler_generator
from .sampler import sample_stationary

log = logging.getLogger("stickywet")

EXIT_PASS, EXIT_DIAGNOSTIC, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
STAGES = ("quadrature", "chain_oracle", "warm_start", "simulate", "diagnostics")


@dataclass
class ReplicaOutput:
    index: int
    seed: int
    initial: list
    steps: int
    k_min: int
    k_max: int
    occupation: OccupationAccumulator
    qv: QVAccumulator | None
    paths: PathFunctionals | None
    histogram: np.ndarray | None
    chain: ChainSpec


@dataclass
class RunManifest:
    config_sha256: str
    version: str
    master_seed: int
    replica_seeds: list
    threads: int
    stages: dict = field(default_factory=lambda: {s: "pending" for s in STAGES})
    status: str = "running"
    started: float = 0.0
    finished: float | None = None
    wall_seconds: float | None = None
    stage_seconds: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    exit_code: int | None = None

    def write(self, out: Path):
        tmp = out / "manifest.json.tmp"
        tmp.write_text(json.dumps(vars(self), indent=2, sort_keys=True) + "\n")
        os.replace(tmp, out / "manifest.json")


def warm_start(cfg: RunConfig, chain: ChainSpec, index: int) -> np.ndarray:
    """Initial grid state of one replica: a snapped sampler draw or the dry corner."""
    if cfg.scheme.start == "sampler":
        phi = sample_stationary(chain.model, cfg.sampler_config(),
                                sampler_generator(cfg.master_seed, index)).heights
        return chain.snap(phi) * chain.h
    return np.zeros(chain.n)


def run_replica(cfg: RunConfig, chain: ChainSpec, index: int, x0, functions) -> ReplicaOutput:
    """Burn-in and observed run of one replica from ``x0``."""
    gen = replica_generator(cfg.master_seed, index)
    x0 = np.asarray(x0, dtype=float)
    if cfg.scheme.burn_in > 0:
        x0 = simulate(chain, x0, T=cfg.scheme.burn_in, rng=gen).final
    dg = cfg.diagnostics
    occ = OccupationObserver(dg.batches)
    qv = QVObserver() if dg.qv else None
    mart = MartingaleObserver(functions) if (dg.martingale or dg.symmetry) else None
    hist = HistogramObserver() if dg.histogram else None
    obs = [o for o in (occ, qv, mart, hist) if o is not None]
    kw = {"T": cfg.scheme.T} if cfg.scheme.T is not None else {"steps": cfg.scheme.steps}
    res = simulate(chain, x0, observers=obs, rng=gen, **kw)
    return ReplicaOutput(
        index, derive_replica_seed(cfg.master_seed, index), x0.tolist(), res.steps,
        res.k_min, res.k_max, OccupationAccumulator.from_observer(occ),
        QVAccumulator.from_observer(qv) if qv else None,
        PathFunctionals.from_observer(mart) if mart else None,
        hist.counts.copy() if hist else None, chain)


def _ordered_map(fn, count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def run_ensemble(cfg: RunConfig, chain: ChainSpec, functions, threads: int = 1, starts=None):
    """All replicas, returned in index order."""
    if starts is None:
        starts = _ordered_map(lambda i: warm_start(cfg, chain, i), cfg.replicas, threads)
    return _ordered_map(lambda i: run_replica(cfg, chain, i, starts[i], functions),
                        cfg.replicas, threads)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x).__name__)


def _finite(x):
    # JSON has no inf/nan; encode them as strings so files stay standard
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def dump_json(obj) -> str:
    plain = json.loads(json.dumps(obj, default=_json_default))
    return json.dumps(_finite(plain), indent=2, sort_keys=True, allow_nan=False) + "\n"


def run_experiment(cfg: RunConfig, *, threads: int = 1, out_dir: str | None = None):
    """Run every enabled stage and write ``occupancy.csv``, ``summary.json``, ``manifest.json``.

    Returns ``(manifest, summary, exit_code)``.  Failures are recorded per
    stage; artifacts written before the failure are kept.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    manifest = RunManifest(cfg.sha256(), __version__, cfg.master_seed,
                           [derive_replica_seed(cfg.master_seed, i) for i in range(cfg.replicas)],
                           threads, started=t_start)
    manifest.write(out)
    summary: dict = {"config": cfg.to_dict(), "version": __version__, "checks": {}}
    model = cfg.build_model()
    chain = cfg.build_chain(model)
    n = model.n
    state = {"quad": None, "oracle": None, "starts": None, "outputs": None}

    def stage(name, fn, enabled=True):
        if not enabled:
            manifest.stages[name] = "skipped"
            manifest.write(out)
            return
        manifest.stages[name] = "running"
        manifest.write(out)
        t0 = time.time()
        log.info("stage %s started", name)
        try:
            fn()
        except Exception as exc:
            manifest.stages[name] = "failed"
            manifest.errors.append({"stage": name, "type": type(exc).__name__, "message": str(exc)})
            raise
        finally:
            manifest.stage_seconds[name] = round(time.time() - t0, 6)
        manifest.stages[name] = "completed"
        manifest.write(out)
        log.info("stage %s completed in %.3fs", name, manifest.stage_seconds[name])

    def do_quadrature():
        table = stratum_masses(model)
        state["quad"] = table
        summary["quadrature"] = {"L": table.L, "masses": table.normalized,
                                 "revuz_masses": table.revuz_masses}

    def do_oracle():
        orc = chain_stationary_oracle(chain)
        state["oracle"] = orc
        summary["chain_oracle"] = {"masses": orc.stratum_masses,
                                   "revuz_masses": orc.revuz_masses,
                                   "iterations": orc.iterations,
                                   "tv_increment": orc.tv_increment}
        if state["quad"] is not None:
            summary["chain_oracle"]["max_abs_diff_quadrature"] = float(
                np.abs(orc.stratum_masses - state["quad"].normalized).max())

    functions = cfg.test_functions(n)

    def do_warm():
        starts = _ordered_map(lambda i: warm_start(cfg, chain, i), cfg.replicas, threads)
        state["starts"] = starts
        masks = [int(((x > 0) * (1 << np.arange(n))).sum()) for x in starts]
        summary["warm_start"] = {"method": cfg.scheme.start, "sweeps": cfg.sampler.sweeps,
                                 "start_mask_counts": np.bincount(masks, minlength=1 << n)}

    def do_simulate():
        state["outputs"] = run_ensemble(cfg, chain, functions, threads, state["starts"])

    def do_diagnostics():
        outs = state["outputs"]
        dg = cfg.diagnostics
        occ = fold(o.occupation for o in outs)
        target_kind = dg.target
        if target_kind == "auto":
            target_kind = "chain" if state["oracle"] is not None else (
                "quadrature" if state["quad"] is not None else None)
        if target_kind == "chain":
            targets = state["oracle"].stratum_masses
        elif target_kind == "quadrature":
            targets = state["quad"].normalized
        else:
            targets = np.full(1 << n, np.nan)
        report = revuz_check(occ, targets, z_threshold=dg.z_threshold, abs_tol=dg.abs_tol)
        (out / "occupancy.csv").write_text(report.to_csv())
        checks = summary["checks"]
        checks["occupancy"] = report.to_dict() | {"target": target_kind}
        if target_kind is None:  # nothing to compare against; report only
            checks["occupancy"]["passed"] = True
        checks["occupancy"]["wall_local_time_per_replica"] = (
            occ.wall_steps * occ.delta / occ.s / len(outs))
        cons = conservativity(outs, occ)
        checks["conservativity"] = cons.to_dict()
        if dg.qv:
            checks["qv"] = qv_check(fold(o.qv for o in outs)).to_dict()
        if dg.martingale or dg.symmetry:
            paths = fold(o.paths for o in outs)
            if dg.martingale:
                checks["martingale"] = martingale_residual(paths).to_dict()
            if dg.symmetry:
                checks["symmetry"] = symmetry_check(paths).to_dict()
        if dg.histogram:
            counts = sum(o.histogram for o in outs)
            hist = counts / counts.sum()
            entry = {"distribution": hist, "tv_tol": dg.tv_tol}
            if state["oracle"] is not None:
                tv = total_variation(hist, state["oracle"].pi)
                entry |= {"tv_vs_oracle": tv, "passed": tv < dg.tv_tol}
            checks["histogram"] = entry

    code = EXIT_PASS
    try:
        stage("quadrature", do_quadrature, enabled=n <= MAX_QUAD_DIMENSION)
        stage("chain_oracle", do_oracle, enabled=chain.n_states <= MAX_ORACLE_STATES
              and cfg.diagnostics.target in ("auto", "chain"))
        stage("warm_start", do_warm)
        stage("simulate", do_simulate)
        stage("diagnostics", do_diagnostics)
        summary["passed"] = _all_passed(summary["checks"])
        code = EXIT_PASS if summary["passed"] else EXIT_DIAGNOSTIC
    except Exception as exc:  # recorded in the manifest; artifacts so far are kept
        (log.error if isinstance(exc, StickyError) else log.exception)("run failed: %s", exc)
        summary["passed"] = False
        code = EXIT_RUNTIME
    (out / "summary.json").write_text(dump_json(summary))
    manifest.finished = time.time()
    manifest.wall_seconds = round(manifest.finished - t_start, 6)
    manifest.status = "completed" if code in (EXIT_PASS, EXIT_DIAGNOSTIC) else "failed"
    manifest.exit_code = code
    manifest.write(out)
    return manifest, summary, code


def _all_passed(checks: dict) -> bool:
    return all(c.get("passed", True) for c in checks.values() if isinstance(c, dict))
