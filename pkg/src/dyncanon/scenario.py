"""Scenario files: one JSON document naming a triple, an engine, grids,
checks and output paths.

Relative paths inside a scenario are resolved against the scenario file's
directory.  The environment variable ``GBDT_SEED`` overrides every seed in
the scenario (generator and sampling).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GBDTError
from .serialization import matrix_from_json
from .triple import GBDTTriple, SignatureJ, random_admissible, triple_from_json

__all__ = ["Grid", "Scenario", "load_scenario", "scenario_from_dict", "ScenarioError"]

ENGINES = ("explicit", "general")


class ScenarioError(GBDTError, ValueError):
    """Malformed scenario document."""


@dataclass(frozen=True)
class Grid:
    x0: float
    x1: float
    nx: int
    t0: float
    t1: float
    nt: int

    def __post_init__(self):
        if self.nx < 2 or self.nt < 1:
            raise ScenarioError("grid needs nx >= 2 and nt >= 1")
        if not self.x1 > self.x0 or self.t1 < self.t0:
            raise ScenarioError("grid bounds must satisfy x0 < x1 and t0 <= t1")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.nt) if self.nt > 1 else np.array([self.t0])


@dataclass
class Scenario:
    name: str
    triple: GBDTTriple
    engine: str = "explicit"
    hamiltonian: str | None = None
    grid: Grid = field(default_factory=lambda: Grid(0.0, 2.0, 50, 0.0, 2.0, 50))
    step: float = 1e-3
    x_max: float = 30.0
    pde_step: float = 0.1
    h: np.ndarray | None = None
    subspace: object = None
    checks: list | None = None
    tolerances: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    base: Path = Path(".")

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ScenarioError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.engine == "general" and not self.hamiltonian:
            raise ScenarioError("engine=general requires a hamiltonian")

    def output_path(self, key) -> Path | None:
        p = self.outputs.get(key)
        return None if p is None else self.base / p

    def resolve(self, p) -> str:
        return str(self.base / p)


def _env_seed():
    v = os.environ.get("GBDT_SEED")
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        raise ScenarioError(f"GBDT_SEED must be an integer, got {v!r}") from None


def _load_triple(spec, base: Path, seed_override) -> GBDTTriple:
    if isinstance(spec, str):
        with open(base / spec) as fh:
            spec = json.load(fh)
    if not isinstance(spec, dict):
        raise ScenarioError("triple must be an object or a path")
    if "generate" in spec:
        g = dict(spec["generate"])
        try:
            n, m1, m2 = int(g["n"]), int(g["m1"]), int(g["m2"])
        except KeyError as e:
            raise ScenarioError(f"generator spec lacks {e.args[0]!r}") from None
        seed = seed_override if seed_override is not None else int(g.get("seed", 0))
        return random_admissible(n, SignatureJ(m1, m2), seed,
                                 spectrum=g.get("spectrum", "offreal"),
                                 method=g.get("method", "inertia"),
                                 mix=bool(g.get("mix", True)))
    return triple_from_json(spec)


def scenario_from_dict(d: dict, base=".") -> Scenario:
    base = Path(base)
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    if "triple" not in d:
        raise ScenarioError("scenario lacks a triple")
    seed_env = _env_seed()
    triple = _load_triple(d["triple"], base, seed_env)
    kw = {}
    if "grid" in d:
        g = d["grid"]
        try:
            kw["grid"] = Grid(float(g["x0"]), float(g["x1"]), int(g["nx"]),
                              float(g["t0"]), float(g["t1"]), int(g["nt"]))
        except KeyError as e:
            raise ScenarioError(f"grid lacks {e.args[0]!r}") from None
    for key in ("step", "x_max", "pde_step"):
        if key in d:
            kw[key] = float(d[key])
    if "h" in d:
        # a vector is stored as a single row of entries
        kw["h"] = matrix_from_json([d["h"]], "h").reshape(-1)
        if kw["h"].size != triple.n:
            raise ScenarioError(f"h has {kw['h'].size} entries, triple has n={triple.n}")
    if "subspace" in d:
        sub = d["subspace"]
        if isinstance(sub, list):
            sub = matrix_from_json(sub, "subspace")
        kw["subspace"] = sub
    ham = d.get("hamiltonian")
    if isinstance(ham, str) and ham not in ("identity",) and not ham.startswith("diag:"):
        ham = str(base / ham)
    seed = seed_env if seed_env is not None else int(d.get("seed", 0))
    return Scenario(
        name=str(d.get("name", "scenario")),
        triple=triple,
        engine=d.get("engine", "explicit"),
        hamiltonian=ham,
        checks=list(d["checks"]) if "checks" in d else None,
        tolerances={k: float(v) for k, v in d.get("tolerances", {}).items()},
        outputs=dict(d.get("outputs", {})),
        seed=seed,
        base=base,
        **kw,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: {e}") from None
    return scenario_from_dict(d, path.parent)
