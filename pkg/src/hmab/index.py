"""Not-play regions, indexability and subsidy indices for a single arm.

The index of a state is the smallest subsidy that makes resting optimal
there. It is found by bisection on the subsidy, re-solving the value
iteration at every probe. Solves are memoised per (arm, solver config).
"""
from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import structure
from .errors import BracketFailure, NonThresholdPolicy
from .model import ArmParams, rested_assumptions_hold
from .solver import SolverConfig, ValueTables, extract_policy, solve
from .structure import Shape

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-8
MAX_WIDENINGS = 8


@functools.lru_cache(maxsize=512)
def cached_solve(params: ArmParams, config: SolverConfig) -> ValueTables:
    """Converged tables for ``(params, config)``; the result must not be mutated."""
    return solve(params, config).require_converged()


def solve_cache_clear() -> None:
    cached_solve.cache_clear()


@dataclass
class GwRegion:
    """States where resting is optimal under subsidy ``w``.

    ``pi_L`` is the smallest belief with y=1 in the region (None if no such
    belief), ``pi_tilde_L`` the same for y=0.
    """

    w: float
    pi_L: Optional[float]
    pi_tilde_L: Optional[float]
    empty: bool
    # grid membership per availability, True = resting optimal
    members: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def boundary(self, y: int) -> Optional[float]:
        return self.pi_L if y == 1 else self.pi_tilde_L

    def to_dict(self) -> dict:
        return {"w": self.w, "pi_L": self.pi_L, "pi_tilde_L": self.pi_tilde_L, "empty": self.empty}


def _boundary(res: structure.ThresholdResult) -> Optional[float]:
    if res.shape is Shape.ALL_PLAY:
        return None
    if res.shape is Shape.ALL_NOT_PLAY:
        return 0.0
    return res.pi_star


def region_from_tables(tables: ValueTables) -> GwRegion:
    policy = extract_policy(tables)
    members = {y: policy.actions[y] == 0 for y in (0, 1)}
    shapes = structure.extract_threshold(policy)
    empty = not (members[0].any() or members[1].any())
    bad = {y: r for y, r in shapes.items() if r.shape is Shape.NOT_THRESHOLD}
    region = GwRegion(tables.w, _boundary(shapes[1]) if 1 not in bad else None,
                      _boundary(shapes[0]) if 0 not in bad else None, empty, members)
    if bad:
        raise NonThresholdPolicy(
            f"resting region at w={tables.w} is not an upper interval for y in {sorted(bad)}",
            witness={"region": region, "indices": {y: r.witness for y, r in bad.items()}})
    return region


def compute_gw(params: ArmParams, w: float, config: SolverConfig) -> GwRegion:
    """Resting region at subsidy ``w`` with sub-grid refined boundaries."""
    return region_from_tables(cached_solve(params, config.with_w(w)))


def in_region(tables: ValueTables, pi, y: int):
    """Membership of (pi, y) in the resting region; ties count as resting."""
    return np.interp(pi, tables.grid, tables.play_minus_rest(y)) <= 0.0


@dataclass
class IndexabilityReport:
    passed: bool
    regions: list[GwRegion]
    # (i, j, y, boundary_i, boundary_j) of the first pair w_i < w_j that breaks monotonicity
    violation: Optional[tuple] = None
    nested_on_grid: bool = True

    def to_dict(self) -> dict:
        return {"passed": self.passed, "nested_on_grid": self.nested_on_grid,
                "violation": list(self.violation) if self.violation else None,
                "regions": [r.to_dict() for r in self.regions]}


def _as_inf(b: Optional[float]) -> float:
    return float("inf") if b is None else b


def check_boundaries_monotone(ws: Sequence[float], boundaries: Sequence[tuple],
                              tol: float = BOUNDARY_TOL) -> Optional[tuple]:
    """First adjacent pair where a boundary rises with the subsidy, or None.

    ``boundaries[k]`` is ``(pi_L, pi_tilde_L)`` at ``ws[k]``; None means the
    region is empty for that availability.
    """
    for k in range(len(ws) - 1):
        for y, col in ((1, 0), (0, 1)):
            a, b = _as_inf(boundaries[k][col]), _as_inf(boundaries[k + 1][col])
            if b > a + tol:
                return (k, k + 1, y, boundaries[k][col], boundaries[k + 1][col])
    return None


def is_indexable(params: ArmParams, w_grid: Sequence[float], config: SolverConfig) -> IndexabilityReport:
    """Check that the resting region grows with the subsidy over ``w_grid``."""
    ws = [float(w) for w in w_grid]
    if any(b < a for a, b in zip(ws, ws[1:])):
        raise ValueError("w_grid must be sorted ascending")
    regions = [compute_gw(params, w, config) for w in ws]
    violation = check_boundaries_monotone(ws, [(r.pi_L, r.pi_tilde_L) for r in regions])
    nested = all(np.all(~a.members[y] | b.members[y])
                 for a, b in zip(regions, regions[1:]) for y in (0, 1))
    return IndexabilityReport(violation is None and nested, regions, violation, nested)


class Method(str, enum.Enum):
    BISECTION = "bisection"
    STOPPING_TIME_ORACLE = "stopping_time_oracle"


@dataclass
class IndexResult:
    pi: float
    y: int
    index_w: float
    bisection_width: float
    method: Method = Method.BISECTION
    # False when the arm is outside the rested setting the index theory covers
    certified: bool = True
    probes: int = 0

    def to_dict(self) -> dict:
        return {"pi": self.pi, "y": self.y, "index_w": self.index_w,
                "bisection_width": self.bisection_width, "method": self.method.value,
                "certified": self.certified, "probes": self.probes}


def _probe(params: ArmParams, config: SolverConfig, w: float) -> ValueTables:
    return cached_solve(params, config.with_w(w))


def compute_index(params: ArmParams, pi: float, y: int, config: SolverConfig,
                  w_tolerance: float = 1e-6, lo: float = 0.0, hi: float = 1.0) -> IndexResult:
    """Smallest subsidy in [lo, hi] putting (pi, y) in the resting region."""
    if in_region(_probe(params, config, lo), pi, y):
        raise BracketFailure(f"({pi}, {y}) already rests at w={lo}")
    if not in_region(_probe(params, config, hi), pi, y):
        raise BracketFailure(f"({pi}, {y}) still plays at w={hi}")
    probes = 2
    while hi - lo > w_tolerance:
        mid = 0.5 * (lo + hi)
        if in_region(_probe(params, config, mid), pi, y):
            hi = mid
        else:
            lo = mid
        probes += 1
    return IndexResult(float(pi), int(y), 0.5 * (lo + hi), hi - lo,
                       certified=rested_assumptions_hold(params), probes=probes)


@dataclass
class IndexTable:
    """Index values on a belief grid for both availabilities."""

    pi_grid: np.ndarray
    values: np.ndarray  # (2, len(pi_grid)); row y
    w_tolerance: float
    certified: bool
    solves: int = 0

    def lookup(self, pi, y):
        """Linear interpolation in the belief; ``y`` may be an array."""
        y = np.asarray(y)
        v1 = np.interp(pi, self.pi_grid, self.values[1])
        v0 = np.interp(pi, self.pi_grid, self.values[0])
        return np.where(y == 1, v1, v0)


def index_table(params: ArmParams, config: SolverConfig, points: int = 101,
                w_tolerance: float = 1e-4, lo: float = 0.0, hi: float = 1.0,
                widen: bool = False) -> IndexTable:
    """Run ``compute_index`` for every (pi, y) on a uniform belief grid.

    With ``widen`` the bracket is grown by its own width on whichever side
    fails, instead of raising, so negative or very large indices are found.

    The bisections run in lockstep so each probe solve is shared by every
    state whose bracket has the same midpoint; each entry equals what
    ``compute_index`` would return for that state.
    """
    pis = np.linspace(0.0, 1.0, points)
    solves = 0
    for _ in range(MAX_WIDENINGS + 1):
        low_ok = not any(in_region(_probe(params, config, lo), pis, y).any() for y in (0, 1))
        high_ok = all(in_region(_probe(params, config, hi), pis, y).all() for y in (0, 1))
        solves += 2
        if low_ok and high_ok:
            break
        if not widen:
            raise BracketFailure(f"some index on the belief grid lies outside [{lo}, {hi}]")
        span = hi - lo
        if not low_ok:
            lo -= span
        if not high_ok:
            hi += span
    else:
        raise BracketFailure(f"no bracket found after {MAX_WIDENINGS} widenings")
    lo_a = np.full((2, points), float(lo))
    hi_a = np.full((2, points), float(hi))
    while True:
        active = hi_a - lo_a > w_tolerance
        if not active.any():
            break
        mids = 0.5 * (lo_a + hi_a)
        for w in np.unique(mids[active]):
            t = _probe(params, config, float(w))
            solves += 1
            for y in (0, 1):
                sel = active[y] & (mids[y] == w)
                if not sel.any():
                    continue
                inside = in_region(t, pis[sel], y)
                idx = np.flatnonzero(sel)
                hi_a[y, idx[inside]] = w
                lo_a[y, idx[~inside]] = w
    return IndexTable(pis, 0.5 * (lo_a + hi_a), w_tolerance,
                      rested_assumptions_hold(params), solves)
