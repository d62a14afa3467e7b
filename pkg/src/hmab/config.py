"""Experiment configuration files (JSON or YAML) and their schema."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .model import ArmParams, Kind
from .simulate import Policy, SimConfig
from .solver import SolverConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AvailabilitySpec(_Strict):
    """Probability of being available next slot, by action and current availability."""

    play_available: float = Field(ge=0.0, le=1.0)
    play_unavailable: float = Field(ge=0.0, le=1.0)
    rest_available: float = Field(ge=0.0, le=1.0)
    rest_unavailable: float = Field(0.0, ge=0.0, le=1.0)


class ArmSpec(_Strict):
    # bounds are checked by the arm validator so that violations are reported, not rejected
    mu0: float
    mu1: float
    r0: float
    r1: float
    eta0: float
    eta1: float
    theta: AvailabilitySpec
    kind: Kind = Kind.RESTED

    def to_params(self) -> ArmParams:
        t = self.theta
        return ArmParams.with_availability(
            play_avail=t.play_available, play_unavail=t.play_unavailable,
            rest_avail=t.rest_available, rest_unavail=t.rest_unavailable,
            mu0=self.mu0, mu1=self.mu1, r0=self.r0, r1=self.r1,
            eta0=self.eta0, eta1=self.eta1, kind=self.kind)


class SolverSpec(_Strict):
    grid_points: int = Field(1001, ge=2)
    tolerance: float = Field(1e-9, gt=0.0)
    max_iterations: int = Field(100_000, ge=1)


class SweepSpec(_Strict):
    start: float = Field(alias="from")
    stop: float = Field(alias="to")
    step: float = Field(gt=0.0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError("sweep 'to' must not be below 'from'")
        return self

    def values(self) -> list[float]:
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 12) for k in range(n)]


class SimSpec(_Strict):
    episodes: int = Field(10_000, ge=0)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    horizon: Union[int, Literal["auto"]] = "auto"
    initial_pi: list[float]
    initial_y: list[Literal[0, 1]]
    policies: list[Policy] = [Policy.INDEX, Policy.MYOPIC]
    betas: Optional[list[float]] = None
    index_points: int = Field(101, ge=2)
    index_w_tolerance: float = Field(1e-3, gt=0.0)
    workers: int = Field(1, ge=1)

    @field_validator("initial_pi")
    @classmethod
    def _beliefs(cls, v):
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError("initial beliefs must lie in [0, 1]")
        return v

    @field_validator("horizon")
    @classmethod
    def _horizon(cls, v):
        if isinstance(v, int) and v < 1:
            raise ValueError("horizon must be positive or 'auto'")
        return v

    @field_validator("betas")
    @classmethod
    def _betas(cls, v):
        if v is not None and any(not 0.0 < b < 1.0 for b in v):
            raise ValueError("every beta must lie in (0, 1)")
        return v


class IndexSpec(_Strict):
    beliefs: list[float] = [0.0, 0.25, 0.5, 0.75, 1.0]
    availability: list[Literal[0, 1]] = [1, 0]
    w_tolerance: float = Field(1e-6, gt=0.0)


class OutputSpec(_Strict):
    dir: str = "out"
    formats: list[Literal["csv", "json"]] = ["csv", "json"]


class ExperimentConfig(_Strict):
    arms: list[ArmSpec] = Field(min_length=1)
    beta: float = Field(gt=0.0, lt=1.0)
    strict_ordering: bool = False
    solver: SolverSpec = SolverSpec()
    subsidy: Optional[float] = None
    subsidy_sweep: Optional[SweepSpec] = None
    index: IndexSpec = IndexSpec()
    sim: Optional[SimSpec] = None
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _consistent(self):
        if self.subsidy is not None and self.subsidy_sweep is not None:
            raise ValueError("give either 'subsidy' or 'subsidy_sweep', not both")
        if self.sim is not None:
            n = len(self.arms)
            if len(self.sim.initial_pi) != n or len(self.sim.initial_y) != n:
                raise ValueError("sim.initial_pi and sim.initial_y need one entry per arm")
        return self

    def arm_params(self) -> list[ArmParams]:
        return [a.to_params() for a in self.arms]

    def solver_config(self, beta: Optional[float] = None, w: float = 0.0) -> SolverConfig:
        s = self.solver
        return SolverConfig(beta=self.beta if beta is None else beta, subsidy_w=w,
                            grid_points=s.grid_points, tolerance=s.tolerance,
                            max_iterations=s.max_iterations)

    def subsidies(self) -> list[float]:
        if self.subsidy_sweep is not None:
            return self.subsidy_sweep.values()
        return [0.0 if self.subsidy is None else self.subsidy]

    def sim_config(self, beta: Optional[float] = None) -> SimConfig:
        if self.sim is None:
            raise ValueError("config has no 'sim' section")
        s = self.sim
        return SimConfig(arms=tuple(self.arm_params()), beta=self.beta if beta is None else beta,
                         initial_pi=tuple(s.initial_pi), initial_y=tuple(s.initial_y),
                         horizon=None if s.horizon == "auto" else s.horizon,
                         episodes=s.episodes, seed=s.seed, policies=tuple(s.policies),
                         index_points=s.index_points, index_w_tolerance=s.index_w_tolerance,
                         grid_points=self.solver.grid_points, tolerance=self.solver.tolerance,
                         max_iterations=self.solver.max_iterations)


def read_raw(path: Union[str, Path]) -> tuple[dict, bytes]:
    """Parse a JSON or YAML file into a plain tree; returns (tree, raw bytes)."""
    raw = Path(path).read_bytes()
    if Path(path).suffix.lower() in (".yaml", ".yml"):
        tree = yaml.safe_load(raw)
    else:
        tree = json.loads(raw)
    if not isinstance(tree, dict):
        raise ValueError("config root must be a mapping")
    return tree, raw


def load(path: Union[str, Path]) -> tuple[ExperimentConfig, str]:
    """Validated config and the SHA-256 of the file bytes."""
    tree, raw = read_raw(path)
    return ExperimentConfig.model_validate(tree), hashlib.sha256(raw).hexdigest()
