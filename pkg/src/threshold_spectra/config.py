"""Run configuration: a JSON document validated against a pydantic schema."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from .birman_schwinger import PotentialSpec
from .fields import Grid3
from .kinetic import DIRAC, LOWER, SCHRODINGER, UPPER, KineticModel
from .weights import Weight


class ConfigError(ValueError):
    """Configuration rejected; ``paths`` lists the offending fields as dotted paths."""

    def __init__(self, message, paths=()):
        super().__init__(message)
        self.paths = list(paths)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    kind: Literal["schrodinger", "pseudorelativistic", "dirac"] = "schrodinger"
    mass: float = Field(1.0, gt=0)


class GridSection(_Strict):
    n: int = Field(64, ge=8)
    box_length: float = Field(16.0, gt=0)

    @field_validator("n")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("grid size must be even")
        return v


class PotentialSection(_Strict):
    form: Literal["square_well", "gaussian", "table"] = "square_well"
    radius: float = Field(1.0, gt=0)
    depth: float = Field(1.0, ge=0)
    width: float = Field(1.0, gt=0)
    table_path: str | None = None
    supersample: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _table(self):
        if self.form == "table" and not self.table_path:
            raise ValueError("table potential needs table_path")
        return self


class LadderSection(_Strict):
    E0: float = -1.0
    ratio: float = Field(0.5, gt=0, lt=1)
    count: int = Field(11, ge=4)
    energies: list[float] | None = None


class WeightSection(_Strict):
    kind: Literal["power"] = "power"
    s: float = 1.0


class SolverSection(_Strict):
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(2000, ge=1)
    method: Literal["auto", "dense", "lanczos", "power"] = "auto"


class OutputSection(_Strict):
    directory: str = "results"
    formats: list[Literal["csv", "json"]] = ["csv", "json"]


class DiagnosticsSection(_Strict):
    tol_c: float = Field(1e-2, gt=0)
    subsample: int = Field(64, ge=1)
    rungs: int = Field(4, ge=2)
    floor: float = Field(5e-2, gt=0)


class RunConfig(_Strict):
    model: ModelSection = ModelSection()
    grid: GridSection = GridSection()
    potential: PotentialSection = PotentialSection()
    branch: Literal["upper", "lower"] = UPPER
    energy_ladder: LadderSection = LadderSection()
    weights: list[WeightSection] = [WeightSection()]
    solver: SolverSection = SolverSection()
    output: OutputSection = OutputSection()
    diagnostics: DiagnosticsSection = DiagnosticsSection()
    seed: int = 0

    @model_validator(mode="after")
    def _consistency(self):
        if self.branch == LOWER and self.model.kind != DIRAC:
            raise ValueError("branch 'lower' exists only for the dirac model")
        return self

    # -- library objects ------------------------------------------------------------
    def kinetic_model(self):
        return KineticModel(self.model.kind, self.model.mass)

    def grid3(self):
        return Grid3(self.grid.n, self.grid.box_length)

    def potential_spec(self, base_dir=None):
        p = self.potential
        table = None
        if p.form == "table":
            path = Path(p.table_path)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            table = np.load(path) if path.suffix == ".npy" else np.loadtxt(path)
        return PotentialSpec(form=p.form, radius=p.radius, depth=p.depth, width=p.width, table=table,
                             supersample=p.supersample)

    def weight_list(self):
        return [Weight(kind=w.kind, s=w.s) for w in self.weights]

    def energies(self):
        """Ladder energies; checked for strict monotonicity toward the branch threshold."""
        lad = self.energy_ladder
        model = self.kinetic_model()
        thr = model.threshold(self.branch)
        if lad.energies is not None:
            es = [float(e) for e in lad.energies]
        else:
            if (lad.E0 >= thr) if self.branch == UPPER else (lad.E0 <= thr):
                raise ConfigError("energy_ladder.E0 lies on the wrong side of the branch threshold",
                                  ["energy_ladder.E0"])
            # geometric approach to the threshold: distance_n = |E0 - thr| * ratio^n
            d0 = abs(lad.E0 - thr)
            sign = -1.0 if self.branch == UPPER else 1.0
            es = [thr + sign * d0 * lad.ratio**k for k in range(lad.count)]
        dist = [abs(e - thr) for e in es]
        below = all((e < thr) if self.branch == UPPER else (e > thr) for e in es)
        if len(es) < 4 or not below or not all(b < a for a, b in zip(dist[:-1], dist[1:])):
            raise ConfigError("energy_ladder must approach the branch threshold strictly monotonically from "
                              "inside the gap", ["energy_ladder"])
        if model.kind != SCHRODINGER:
            lo, hi = -2.0 * model.mass, 0.0
            if not all(lo < e < hi for e in es):
                raise ConfigError("energy_ladder energies must lie in the open gap (-2m, 0)", ["energy_ladder"])
        return es


def _paths(err):
    return [".".join(str(p) for p in e["loc"]) or "<root>" for e in err.errors()]


def parse_config(data):
    """Validate a mapping; raises ConfigError carrying dotted field paths."""
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        paths = _paths(exc)
        lines = [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config: " + "; ".join(lines), paths) from None
    cfg.energies()
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data)
