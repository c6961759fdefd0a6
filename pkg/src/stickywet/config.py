"""Run configuration: JSON parsing, defaults and fail-fast validation.

Every violated constraint is collected together with the module that owns
it and raised as one :class:`ValidationError`.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .dynamics import MAX_ORACLE_STATES, TAIL_TOL, build_chain
from .errors import ParseError, StickyError, ValidationError
from .gibbs import GibbsModel, PotentialSpec
from .quadrature import MAX_QUAD_DIMENSION
from .rng import MASK64
from .sampler import SamplerConfig
from .strata import MAX_DIMENSION
from .testfunctions import FAMILIES, default_catalog, from_dict

TARGETS = ("auto", "quadrature", "chain")
STARTS = ("sampler", "dry")


@dataclass
class ModelBlock:
    d: int = 1
    N: int = 1
    potential: dict = field(default_factory=lambda: {"family": "gaussian", "a": 1.0})
    s: float = 1.0


@dataclass
class SchemeBlock:
    h: float = 0.05
    L: float | None = None  # None: smallest grid multiple meeting the tail bound
    T: float | None = None
    steps: int | None = None
    burn_in: float = 0.0  # physical time discarded before observing
    zero_drift: bool = False
    start: str = "sampler"


@dataclass
class SamplerBlock:
    sweeps: int = 1000
    proposal_sigma: float = 0.7
    atom_proposal_prob: float = 0.5
    thin: int = 1


@dataclass
class DiagnosticsBlock:
    target: str = "auto"
    z_threshold: float = 3.0
    abs_tol: float | None = None
    batches: int = 20
    qv: bool = False
    martingale: bool = False
    symmetry: bool = False
    histogram: bool = False
    test_functions: list | str = "default"
    form_tol: float = 1e-6
    tv_tol: float = 0.02


@dataclass
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    scheme: SchemeBlock = field(default_factory=SchemeBlock)
    sampler: SamplerBlock = field(default_factory=SamplerBlock)
    diagnostics: DiagnosticsBlock = field(default_factory=DiagnosticsBlock)
    replicas: int = 32
    master_seed: int = 0
    out_dir: str = "run"

    # -- derived objects (built after validation) --------------------------
    def build_model(self) -> GibbsModel:
        m = self.model
        return GibbsModel.build(m.d, m.N, PotentialSpec.from_dict(m.potential), m.s)

    def build_chain(self, model: GibbsModel | None = None):
        model = model or self.build_model()
        return build_chain(model, self.scheme.h, self.scheme.L,
                           zero_drift=self.scheme.zero_drift)

    def sampler_config(self) -> SamplerConfig:
        b = self.sampler
        return SamplerConfig(b.sweeps, b.proposal_sigma, b.atom_proposal_prob)

    def test_functions(self, n: int):
        choice = self.diagnostics.test_functions
        if choice == "default":
            return default_catalog(n)
        return [from_dict(doc, n) for doc in choice]

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


_BLOCKS = {"model": ModelBlock, "scheme": SchemeBlock, "sampler": SamplerBlock,
           "diagnostics": DiagnosticsBlock}


def _fill(cls, doc, where, errors):
    if not isinstance(doc, dict):
        errors.append(("runner", f"{where} must be an object"))
        return cls()
    allowed = set(cls.__dataclass_fields__)
    for key in sorted(set(doc) - allowed):
        errors.append(("runner", f"unknown key {where}.{key}"))
    return cls(**{k: v for k, v in doc.items() if k in allowed})


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _integer(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _grid_multiple(x: float, h: float) -> bool:
    k = x / h
    return abs(k - round(k)) <= 1e-9 * max(1.0, k)


def auto_cap(model: GibbsModel, h: float, tail_tol: float = TAIL_TOL) -> float:
    """Smallest multiple of ``h`` whose tail estimate is below ``tail_tol``."""
    k = 1
    while math.exp(-model.tail_energy(k * h)) > tail_tol:
        k += 1
        if k * h > 1e6:
            raise ValueError("no cap found below 1e6")
    return round(k * h, 12)


def parse_config(document) -> RunConfig:
    """Parse JSON text (or an already-decoded dict) into a validated :class:`RunConfig`."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ParseError("configuration must be a JSON object")
    errors: list[tuple[str, str]] = []
    top = set(RunConfig.__dataclass_fields__)
    for key in sorted(set(doc) - top):
        errors.append(("runner", f"unknown key {key}"))
    blocks = {k: _fill(cls, doc.get(k, {}), k, errors) for k, cls in _BLOCKS.items()}
    scalars = {k: doc[k] for k in ("replicas", "master_seed", "out_dir") if k in doc}
    cfg = RunConfig(**blocks, **scalars)
    _validate(cfg, errors)
    if errors:
        raise ValidationError(errors)
    return cfg


def _validate(cfg: RunConfig, errors):
    err = lambda owner, msg: errors.append((owner, msg))
    m, sc, sa, dg = cfg.model, cfg.scheme, cfg.sampler, cfg.diagnostics

    # runner
    if not _integer(cfg.replicas) or cfg.replicas < 1:
        err("runner", f"replicas must be a positive integer, got {cfg.replicas!r}")
    if not _integer(cfg.master_seed) or not 0 <= cfg.master_seed <= MASK64:
        err("runner", "master_seed must be an unsigned 64-bit integer")
    if not isinstance(cfg.out_dir, str) or not cfg.out_dir:
        err("runner", "out_dir must be a non-empty path")

    # model
    model = None
    model_ok = True
    for key in ("d", "N"):
        v = getattr(m, key)
        if not _integer(v) or v < 1:
            err("gibbs", f"model.{key} must be a positive integer, got {v!r}")
            model_ok = False
    if model_ok and m.N ** m.d > MAX_DIMENSION:
        err("strata", f"n = N^d = {m.N ** m.d} exceeds {MAX_DIMENSION}")
        model_ok = False
    if not _number(m.s) or m.s <= 0:
        err("gibbs", f"stickiness s must lie in (0, inf), got {m.s!r}")
        model_ok = False
    try:
        PotentialSpec.from_dict(m.potential)
    except (StickyError, ValueError, TypeError, KeyError) as exc:
        err("gibbs", f"potential: {exc}")
        model_ok = False
    if model_ok:
        try:
            model = cfg.build_model()
        except (StickyError, ValueError) as exc:
            err("gibbs", str(exc))
    n = model.n if model is not None else None

    # sampler
    try:
        SamplerConfig(sa.sweeps, sa.proposal_sigma, sa.atom_proposal_prob)
    except (ValueError, TypeError) as exc:
        err("sampler", str(exc))
    if n is not None and _integer(sa.sweeps) and sa.sweeps < 100 * n:
        err("sampler", f"sweeps {sa.sweeps} below the burn-in floor 100*n = {100 * n}")
    if not _integer(sa.thin) or sa.thin < 1:
        err("sampler", "thin must be a positive integer")

    # scheme
    scheme_ok = _number(sc.h) and sc.h > 0
    if not scheme_ok:
        err("dynamics", f"h must be positive, got {sc.h!r}")
    if sc.L is not None and not (_number(sc.L) and sc.L > 0):
        err("dynamics", f"L must be positive, got {sc.L!r}")
        scheme_ok = False
    if scheme_ok and sc.L is not None and not _grid_multiple(sc.L, sc.h):
        err("dynamics", f"L={sc.L} is not a multiple of h={sc.h}")
        scheme_ok = False
    if scheme_ok and sc.L is None and model is not None:
        sc.L = auto_cap(model, sc.h)
    if sc.start not in STARTS:
        err("dynamics", f"start must be one of {STARTS}")
    if sc.T is not None and sc.steps is not None:
        err("dynamics", "give either scheme.T or scheme.steps, not both")
    if sc.T is None and sc.steps is None:
        sc.steps = 50_000
    delta = 0.5 * sc.h * sc.h if scheme_ok else None
    if sc.steps is not None and (not _integer(sc.steps) or sc.steps < 0):
        err("dynamics", "steps must be a non-negative integer")
    if sc.T is not None:
        if not _number(sc.T) or sc.T < 0:
            err("dynamics", "T must be non-negative")
        elif delta and not _grid_multiple(sc.T, delta):
            err("dynamics", f"T={sc.T} is not a multiple of the time step {delta}")
    if not _number(sc.burn_in) or sc.burn_in < 0:
        err("dynamics", "burn_in must be non-negative")
    elif delta and not _grid_multiple(sc.burn_in, delta):
        err("dynamics", f"burn_in={sc.burn_in} is not a multiple of the time step {delta}")
    if not isinstance(sc.zero_drift, bool):
        err("dynamics", "zero_drift must be a boolean")
    if scheme_ok and model is not None and sc.L is not None:
        try:
            cfg.build_chain(model)
        except StickyError as exc:
            err("dynamics", f"{type(exc).__name__}: {exc}")

    # diagnostics
    if dg.target not in TARGETS:
        err("diagnostics", f"target must be one of {TARGETS}")
    if not _number(dg.z_threshold) or dg.z_threshold <= 0:
        err("diagnostics", "z_threshold must be positive")
    if dg.abs_tol is not None and (not _number(dg.abs_tol) or dg.abs_tol <= 0):
        err("diagnostics", "abs_tol must be positive")
    if not _integer(dg.batches) or dg.batches < 2:
        err("diagnostics", "batches must be an integer of at least 2")
    if not _number(dg.tv_tol) or dg.tv_tol <= 0:
        err("diagnostics", "tv_tol must be positive")
    if not _number(dg.form_tol) or dg.form_tol <= 0:
        err("form_calculus", "form_tol must be positive")
    for key in ("qv", "martingale", "symmetry", "histogram"):
        if not isinstance(getattr(dg, key), bool):
            err("diagnostics", f"{key} must be a boolean")
    if (dg.martingale is True or dg.symmetry is True) and _integer(cfg.replicas) \
            and cfg.replicas < 30:
        err("diagnostics", "martingale and symmetry checks need at least 30 replicas")
    if n is not None:
        if dg.target == "quadrature" and n > MAX_QUAD_DIMENSION:
            err("quadrature", f"quadrature targets need n <= {MAX_QUAD_DIMENSION}")
        if dg.target == "chain" and scheme_ok and sc.L is not None:
            states = (round(sc.L / sc.h) + 1) ** n
            if states > MAX_ORACLE_STATES:
                err("dynamics", f"chain oracle needs <= {MAX_ORACLE_STATES} states, got {states}")
        if dg.test_functions != "default":
            if not isinstance(dg.test_functions, list):
                err("form_calculus", "test_functions must be 'default' or a list")
            else:
                for i, doc in enumerate(dg.test_functions):
                    try:
                        if not isinstance(doc, dict) or doc.get("family") not in FAMILIES:
                            raise ValueError(f"unknown family in {doc!r}")
                        from_dict(doc, n)
                    except (ValueError, KeyError, TypeError) as exc:
                        err("form_calculus", f"test_functions[{i}]: {exc}")
