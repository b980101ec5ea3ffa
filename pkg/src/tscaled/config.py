"""Experiment configuration: INI files with CLI overrides.

A configuration is a single text file with key/value pairs in nested
sections.  Lists are comma separated.  Example::

    [experiment]
    problem = rpca
    methods = scaledgd, vanillagd
    transform = dft
    n1 = 100
    n2 = 100
    n3 = 100
    rank = 10
    kappa = 1, 5, 10, 20
    alpha = 0.1
    eta = 0.5
    max_iters = 150
    seeds = 0

    [schedule]
    zeta0 = 0.5
    zeta1 = 0.5
    rho = 0.95
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .solvers import Method, SolverParams, ThresholdSchedule

PROBLEMS = ("rpca", "completion", "factorization")


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    problem: str = "rpca"
    methods: list[str] = field(default_factory=lambda: ["scaledgd", "vanillagd"])
    transform: str = "dft"
    n1: int = 100
    n2: int = 100
    n3: int = 100
    rank: int = 10
    kappas: list[float] = field(default_factory=lambda: [1.0, 5.0, 10.0, 20.0])
    alpha: float = 0.1
    p: float = 0.4
    snr_db: float = math.inf
    etas: list[float] = field(default_factory=lambda: [0.5])
    max_iters: int = 150
    rel_tol: float = 0.0
    zeta0: float = 0.5
    zeta1: float = 0.5
    rho: float = 0.95
    varsigma: float | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    no_timing: bool = False

    def validate(self) -> None:
        def fail(path, msg):
            raise ConfigError(f"{path}: {msg}")

        if self.problem not in PROBLEMS:
            fail("experiment.problem", f"must be one of {PROBLEMS}, got {self.problem!r}")
        for m in self.methods:
            try:
                Method(m)
            except ValueError:
                fail("experiment.methods", f"unknown method {m!r}")
        if self.transform not in ("dft", "dct"):
            fail("experiment.transform", f"must be dft or dct, got {self.transform!r}")
        for name in ("n1", "n2", "n3"):
            if getattr(self, name) < 1:
                fail(f"experiment.{name}", "must be >= 1")
        if not 1 <= self.rank <= min(self.n1, self.n2):
            fail("experiment.rank", f"must be in [1, {min(self.n1, self.n2)}]")
        if not self.kappas or any(k < 1 for k in self.kappas):
            fail("experiment.kappa", "condition numbers must be >= 1")
        if not 0 <= self.alpha < 1:
            fail("experiment.alpha", "must be in [0, 1)")
        if not 0 < self.p <= 1:
            fail("experiment.p", "must be in (0, 1]")
        if not self.etas:
            fail("experiment.eta", "at least one step size required")
        if not self.seeds:
            fail("experiment.seeds", "at least one seed required")
        if self.max_iters < 0:
            fail("experiment.max_iters", "must be >= 0")
        # Constructor validation covers the numeric ranges.
        try:
            ThresholdSchedule(self.zeta0, self.zeta1, self.rho)
        except Exception as exc:
            fail("schedule", str(exc))
        for eta in self.etas:
            try:
                SolverParams(
                    eta=eta,
                    max_iters=self.max_iters,
                    rank=self.rank,
                    rel_tol=self.rel_tol,
                    projection_radius=self.varsigma,
                )
            except Exception as exc:
                fail("experiment.eta", str(exc))


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    cfg = ExperimentConfig()
    try:
        if parser.has_section("experiment"):
            sec = parser["experiment"]
            cfg.problem = sec.get("problem", cfg.problem).strip().lower()
            if "methods" in sec:
                cfg.methods = [m.strip().lower() for m in sec["methods"].split(",") if m.strip()]
            cfg.transform = sec.get("transform", cfg.transform).strip().lower()
            cfg.n1 = sec.getint("n1", cfg.n1)
            cfg.n2 = sec.getint("n2", cfg.n2)
            cfg.n3 = sec.getint("n3", cfg.n3)
            cfg.rank = sec.getint("rank", cfg.rank)
            if "kappa" in sec:
                cfg.kappas = _parse_floats(sec["kappa"])
            cfg.alpha = sec.getfloat("alpha", cfg.alpha)
            cfg.p = sec.getfloat("p", cfg.p)
            if "snr_db" in sec:
                raw = sec["snr_db"].strip().lower()
                cfg.snr_db = math.inf if raw in ("inf", "none", "") else float(raw)
            if "eta" in sec:
                cfg.etas = _parse_floats(sec["eta"])
            cfg.max_iters = sec.getint("max_iters", cfg.max_iters)
            cfg.rel_tol = sec.getfloat("rel_tol", cfg.rel_tol)
            if "seeds" in sec:
                cfg.seeds = _parse_ints(sec["seeds"])
            cfg.out_dir = sec.get("out", cfg.out_dir).strip()
        if parser.has_section("schedule"):
            sec = parser["schedule"]
            cfg.zeta0 = sec.getfloat("zeta0", cfg.zeta0)
            cfg.zeta1 = sec.getfloat("zeta1", cfg.zeta1)
            cfg.rho = sec.getfloat("rho", cfg.rho)
        if parser.has_section("projection"):
            raw = parser["projection"].get("varsigma", "").strip()
            cfg.varsigma = float(raw) if raw else None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"malformed value in {path}: {exc}") from exc
    cfg.validate()
    return cfg
