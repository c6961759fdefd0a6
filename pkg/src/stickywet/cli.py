"""Command-line entry point ``stickywet``.

Exit codes: 0 pass, 1 diagnostic failure, 2 configuration error, 3 runtime error.
Log verbosity comes from ``STICKY_LOG`` (error, info or debug).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_config
from .errors import ParseError, StickyError, ValidationError
from .runner import EXIT_CONFIG, EXIT_DIAGNOSTIC, EXIT_PASS, EXIT_RUNTIME, dump_json, run_experiment

log = logging.getLogger("stickywet")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class ConfigProblem(Exception):
    pass


def _setup_logging():
    name = os.environ.get("STICKY_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.ERROR), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if name not in LOG_LEVELS:
        log.warning("unknown STICKY_LOG=%r, using error", name)


def _load(path: str, seed: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigProblem(f"cannot read {path}: {exc}") from None
    cfg = parse_config(text)
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigProblem("--seed must be an unsigned 64-bit integer")
        cfg = dataclasses.replace(cfg, master_seed=seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args.config, args.seed)
    if args.threads < 1:
        raise ConfigProblem("--threads must be at least 1")
    _, summary, code = run_experiment(cfg, threads=args.threads, out_dir=args.out)
    occ = summary.get("checks", {}).get("occupancy")
    if occ:
        for row in occ["strata"]:
            print(f"{row['label']:>12}  fraction={row['empirical_fraction']:.6f}  "
                  f"target={row['target_mass']:.6f}  z={row['z']:+.2f}")
    print("PASS" if code == EXIT_PASS else ("FAIL" if code == EXIT_DIAGNOSTIC else "ERROR"))
    return code


def cmd_oracle_masses(args) -> int:
    from .quadrature import stratum_masses
    cfg = _load(args.config)
    sys.stdout.write(stratum_masses(cfg.build_model()).to_csv())
    return EXIT_PASS


def cmd_oracle_chain(args) -> int:
    from .dynamics import chain_stationary_oracle
    cfg = _load(args.config)
    orc = chain_stationary_oracle(cfg.build_chain())
    print("mask,chain_mass,revuz_mass")
    for m, (p, r) in enumerate(zip(orc.stratum_masses, orc.revuz_masses)):
        print(f"{m},{p:.17g},{r:.17g}")
    log.info("power iteration: %d steps, final TV increment %.3g", orc.iterations,
             orc.tv_increment)
    return EXIT_PASS


def cmd_check_forms(args) -> int:
    from .forms import check_form_identities
    cfg = _load(args.config)
    model = cfg.build_model()
    fns = cfg.test_functions(model.n)
    pairs = [(f, g) for i, f in enumerate(fns) for j, g in enumerate(fns) if i != j]
    report = check_form_identities(model, pairs)
    tol = cfg.diagnostics.form_tol
    report["tolerance"] = tol
    report["passed"] = max(report["max_rel_err"].values()) < tol
    sys.stdout.write(dump_json(report))
    return EXIT_PASS if report["passed"] else EXIT_DIAGNOSTIC


def cmd_sample_gibbs(args) -> int:
    from .rng import sampler_generator
    from .sampler import sample_chain
    from .strata import masks_of
    cfg = _load(args.config)
    if args.draws < 1:
        raise ConfigProblem("--draws must be positive")
    model = cfg.build_model()
    X = sample_chain(model, cfg.sampler_config(), sampler_generator(cfg.master_seed, 0),
                     args.draws, thin=cfg.sampler.thin)
    freq = np.bincount(masks_of(X), minlength=1 << model.n) / len(X)
    header = ",".join(f"phi{j + 1}" for j in range(model.n))
    states = header + "\n" + "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in X)
    summary = "mask,frequency\n" + "".join(f"{m},{p:.17g}\n" for m, p in enumerate(freq))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "states.csv").write_text(states)
        (out / "strata.csv").write_text(summary)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(states)
        sys.stderr.write(summary)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stickywet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a replica ensemble and its diagnostics")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--seed", type=int, default=None, help="override master_seed (u64)")
    sim.set_defaults(func=cmd_simulate)

    orc = sub.add_parser("oracle", help="deterministic reference values")
    osub = orc.add_subparsers(dest="which", required=True)
    om = osub.add_parser("masses", help="face masses by quadrature (n <= 3)")
    om.add_argument("--config", required=True)
    om.set_defaults(func=cmd_oracle_masses)
    oc = osub.add_parser("chain", help="face masses of the exact chain")
    oc.add_argument("--config", required=True)
    oc.set_defaults(func=cmd_oracle_chain)

    chk = sub.add_parser("check", help="deterministic identity checks")
    csub = chk.add_subparsers(dest="which", required=True)
    cf = csub.add_parser("forms", help="integration-by-parts and energy-measure identities")
    cf.add_argument("--config", required=True)
    cf.set_defaults(func=cmd_check_forms)

    smp = sub.add_parser("sample", help="stationary sampling")
    ssub = smp.add_subparsers(dest="which", required=True)
    sg = ssub.add_parser("gibbs", help="draw states with the Gibbs sampler")
    sg.add_argument("--config", required=True)
    sg.add_argument("--draws", type=int, required=True)
    sg.add_argument("--out", default=None, help="write states.csv and strata.csv here")
    sg.set_defaults(func=cmd_sample_gibbs)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except (ParseError, ValidationError, ConfigProblem) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StickyError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        log.exception("unexpected failure")
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
