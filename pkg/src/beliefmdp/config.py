"""Config schema for batch experiment runs.

A config names exactly one task, the model it acts on, a mandatory seed,
and a task-specific parameter block.  ``validate_config`` returns the list
of schema and cross-field violations without running anything; parse
failures are reported as diagnostics, never raised.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

__all__ = [
    "ExperimentConfig",
    "ModelRef",
    "CostRef",
    "BoxRef",
    "TASK_NAMES",
    "task_params_model",
    "validate_config",
    "parse_config",
]

TASK_NAMES = ("simulate", "filter", "diagnose", "feller", "setconv", "solve", "probe-cost")


class _Base(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class ModelRef(_Base):
    kind: Literal["catalog", "fixture", "inline"]
    name: str | None = None
    params: dict = Field(default_factory=dict)
    inline: dict | None = None

    @model_validator(mode="after")
    def _check(self) -> "ModelRef":
        if self.kind in ("catalog", "fixture") and not self.name:
            raise ValueError(f"model kind {self.kind!r} needs a name")
        if self.kind == "inline" and self.inline is None:
            raise ValueError("model kind 'inline' needs the inline block")
        return self


class CostRef(_Base):
    family: Literal["quadratic", "estimation", "inventory", "table", "fixture_metadata"]
    mode: Literal["D", "P"] = "P"
    params: dict = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self) -> "CostRef":
        if self.family in ("quadratic", "estimation"):
            for key in ("X", "A"):
                if key not in self.params:
                    raise ValueError(f"cost family {self.family!r} needs params.{key}")
        if self.family == "table" and "table" not in self.params:
            raise ValueError("cost family 'table' needs params.table")
        return self


class BoxRef(_Base):
    lo: list[float]
    hi: list[float]

    @model_validator(mode="after")
    def _check(self) -> "BoxRef":
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("box lo/hi must be same nonzero length")
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise ValueError("box needs lo < hi in every coordinate")
        return self


class PolicyRef(_Base):
    kind: Literal["fixed", "greedy"] = "fixed"
    action: float | int | list[float] | None = None
    mesh: int = Field(default=50, ge=1)


def _check_radii(radii: list[float]) -> list[float]:
    if not radii:
        raise ValueError("radii must be nonempty")
    if any(r < 0 for r in radii):
        raise ValueError("radii must be nonnegative")
    if any(radii[i] <= radii[i + 1] for i in range(len(radii) - 1)):
        raise ValueError("radii must be strictly decreasing")
    return radii


class SimulateParams(_Base):
    horizon: int = Field(ge=0)
    n_episodes: int = Field(default=100, ge=1)
    alpha: float = Field(default=0.95, ge=0.0)
    policy: PolicyRef = Field(default_factory=PolicyRef)
    filter: Literal["auto", "kalman", "particle", "exact"] = "auto"
    n_particles: int = Field(default=512, ge=2)
    record_trajectories: int = Field(default=3, ge=0)
    cost: CostRef | None = None

    @model_validator(mode="after")
    def _check(self) -> "SimulateParams":
        if self.policy.kind == "greedy" and self.cost is None:
            raise ValueError("greedy policy needs a cost block")
        return self


class OracleRef(_Base):
    enabled: bool = False
    lo: float = -8.0
    hi: float = 8.0
    n: int = Field(default=401, ge=3)


class FilterParams(_Base):
    horizon: int = Field(ge=1)
    actions: list[float] | float = 0.0       # constant action or one per step
    filter: Literal["auto", "kalman", "particle", "exact"] = "auto"
    n_particles: int = Field(default=512, ge=2)
    oracle: OracleRef = Field(default_factory=OracleRef)


class DiagnoseParams(_Base):
    checks: list[Literal["diffeo", "transition_profile", "observation_profile"]] = Field(
        default_factory=lambda: ["diffeo", "transition_profile"])
    radii: list[float] = Field(default_factory=lambda: [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625])
    n_samples: int = Field(default=10000, ge=10)
    mode: Literal["auto", "density", "coupled"] = "auto"
    base_state: list[float] | None = None
    base_action: list[float] | None = None
    directions: list[list[float]] | None = None
    grid_res: int = Field(default=9, ge=3)
    density_grid_res: int = Field(default=201, ge=11)
    floor: float = Field(default=0.1, gt=0.0)
    bl_dictionary_size: int = Field(default=256, ge=8)
    param_box: BoxRef | None = None

    @model_validator(mode="after")
    def _check(self) -> "DiagnoseParams":
        if not self.checks:
            raise ValueError("checks must be nonempty")
        _check_radii(self.radii)
        return self


class FellerParams(_Base):
    base_state: list[float] = Field(default_factory=lambda: [0.0])
    base_action: list[float] = Field(default_factory=lambda: [0.0])
    radii: list[float] = Field(default_factory=lambda: [0.5, 0.25, 0.125, 0.0625, 0.03125])
    n_samples: int = Field(default=20000, ge=100)
    f_dictionary_size: int = Field(default=64, ge=4)
    y_partition_levels: int = Field(default=6, ge=1)
    directions: list[list[float]] | None = None

    @model_validator(mode="after")
    def _check(self) -> "FellerParams":
        _check_radii(self.radii)
        return self


class SetconvMapRef(_Base):
    kind: Literal["scaling", "catalog_transition"] = "scaling"
    dim: int = Field(default=2, ge=1)
    action: list[float] | None = None


class RegionRef(_Base):
    center: list[float]
    radius: float = Field(gt=0.0)


class SetconvParams(_Base):
    map: SetconvMapRef = Field(default_factory=SetconvMapRef)
    region: RegionRef
    s2: list[float]
    ladder: list[list[float]]
    resolution: int = Field(default=600, ge=16)
    failure_threshold: float = Field(default=0.05, gt=0.0)

    @model_validator(mode="after")
    def _check(self) -> "SetconvParams":
        if not self.ladder:
            raise ValueError("ladder must be nonempty")
        return self


class SolveParams(_Base):
    alpha: float = Field(ge=0.0)
    mesh: int = Field(ge=1)
    mode: Literal["tolerance", "horizon"] = "tolerance"
    horizon: int | None = None
    tol: float = Field(default=1e-3, gt=0.0)
    max_sweeps: int = Field(default=10_000, ge=1)
    cost: CostRef = Field(default_factory=lambda: CostRef(family="fixture_metadata"))

    @model_validator(mode="after")
    def _check(self) -> "SolveParams":
        if self.cost.mode == "D" and self.alpha >= 1.0:
            raise ValueError(f"cost assumption mode 'D' requires alpha < 1; got {self.alpha}")
        if self.mode == "horizon" and (self.horizon is None or self.horizon < 1):
            raise ValueError("horizon mode needs a positive horizon")
        if self.mode == "tolerance" and self.alpha >= 1.0:
            raise ValueError("tolerance mode needs alpha < 1")
        return self


class ProbeCostParams(_Base):
    cost: CostRef
    gamma: float
    probe_mode: Literal["action", "joint"] = "action"
    state_region: BoxRef
    action_box: BoxRef
    resolution: int = Field(default=9, ge=2)
    max_doublings: int = Field(default=10, ge=1)


_TASK_PARAMS = {
    "simulate": SimulateParams,
    "filter": FilterParams,
    "diagnose": DiagnoseParams,
    "feller": FellerParams,
    "setconv": SetconvParams,
    "solve": SolveParams,
    "probe-cost": ProbeCostParams,
}

_MODEL_FREE_TASKS = ("probe-cost",)


def task_params_model(task: str):
    return _TASK_PARAMS[task]


class ExperimentConfig(_Base):
    schema_version: Literal[1]
    task: Literal["simulate", "filter", "diagnose", "feller", "setconv", "solve", "probe-cost"]
    seed: int = Field(ge=0)
    model: ModelRef | None = None
    out: str | None = None
    threads: int = Field(default=1, ge=1)
    label: str | None = None
    params: dict = Field(default_factory=dict)

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        if self.model is None and self.task not in _MODEL_FREE_TASKS:
            if not (self.task == "setconv"
                    and self.params.get("map", {}).get("kind", "scaling") == "scaling"):
                raise ValueError(f"task {self.task!r} needs a model block")
        return self

    def typed_params(self):
        """Parse the task-specific parameter block (raises ValidationError)."""
        return _TASK_PARAMS[self.task].model_validate(self.params)

    def resolved(self) -> dict:
        """Full config echo with every default made explicit."""
        blob = self.model_dump(mode="json")
        blob["params"] = self.typed_params().model_dump(mode="json")
        return blob


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        out.append(f"{loc}: {item['msg']}")
    return out


def parse_config(blob: dict) -> ExperimentConfig:
    cfg = ExperimentConfig.model_validate(blob)
    cfg.typed_params()  # force task-block validation
    return cfg


def validate_config(blob) -> list[str]:
    """Schema plus cross-field diagnostics; empty list means valid."""
    if not isinstance(blob, dict):
        return ["<root>: config must be a JSON object"]
    try:
        cfg = ExperimentConfig.model_validate(blob)
    except ValidationError as err:
        return _format_errors(err)
    try:
        cfg.typed_params()
    except ValidationError as err:
        return [f"params.{msg}" if not msg.startswith("params") else msg
                for msg in _format_errors(err)]
    return []
