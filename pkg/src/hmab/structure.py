"""Numerical checks of the structural properties of solved value tables.

Every check returns the worst-case witness alongside its verdict so a
failure can be located on the grid.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .model import ArmParams
from .solver import PolicyTable, SolverConfig, ValueTables, extract_policy

DEFAULT_REL_TOL = 1e-6
# absorbs rounding noise when the value range itself is ~0
ABS_FLOOR = 1e-12
REFINE_XTOL = 1e-8


def default_eps(tables: ValueTables, rel: float = DEFAULT_REL_TOL) -> float:
    return rel * tables.value_range() + ABS_FLOOR


@dataclass
class CheckResult:
    passed: bool
    worst: float
    index: Optional[int]
    tolerance: float
    note: str = ""


@dataclass
class StructuralConditions:
    strict_ordering: bool
    mu0_gt_mu1: bool
    availability_ordered: bool
    mu_gap: float
    monotone_regime: bool      # every hypothesis of the mu0 > mu1 monotonicity result
    small_gap_regime: bool     # 0 <= mu1 - mu0 <= 1/3
    lipschitz_applicable: bool  # 0 < mu1 - mu0 <= 1/3


def check_structural_conditions(params: ArmParams) -> StructuralConditions:
    """Report which hypothesis sets of the structural results hold.

    With availability probabilities constant in the belief, the ordering in
    belief holds with equality; only theta[a][1] >= theta[a][0] is checked.
    """
    p = params
    strict = 0.0 <= p.eta0 < p.r0 < p.eta1 < p.r1 <= 1.0
    mu_order = p.mu0 > p.mu1
    avail = all(p.theta[a][1] >= p.theta[a][0] for a in (0, 1))
    gap = p.mu1 - p.mu0
    return StructuralConditions(
        strict_ordering=strict,
        mu0_gt_mu1=mu_order,
        availability_ordered=avail,
        mu_gap=gap,
        monotone_regime=strict and mu_order and avail,
        small_gap_regime=0.0 <= gap <= 1.0 / 3.0,
        lipschitz_applicable=0.0 < gap <= 1.0 / 3.0,
    )


def _worst_increase(a: np.ndarray, eps: float) -> CheckResult:
    d = np.diff(a)
    i = int(np.argmax(d)) if d.size else 0
    worst = float(d[i]) if d.size else 0.0
    ok = worst <= eps
    return CheckResult(ok, worst, None if ok else i, eps)


def check_monotone_values(tables: ValueTables, eps: float | None = None) -> CheckResult:
    """V and V~ must be weakly nonincreasing in the belief."""
    eps = default_eps(tables) if eps is None else eps
    rv = _worst_increase(tables.v, eps)
    rt = _worst_increase(tables.v_tilde, eps)
    worst = rv if rv.worst >= rt.worst else rt
    worst.note = "v" if worst is rv else "v_tilde"
    worst.passed = rv.passed and rt.passed
    return worst


def check_isotone_difference(tables: ValueTables, eps: float | None = None) -> dict[str, CheckResult]:
    """Play-minus-rest differences must be weakly decreasing in the belief."""
    eps = default_eps(tables) if eps is None else eps
    return {"available": _worst_increase(tables.v_s - tables.v_ns, eps),
            "unavailable": _worst_increase(tables.v_tilde_s - tables.v_tilde_ns, eps)}


def check_convexity(tables: ValueTables, eps: float | None = None) -> dict[str, CheckResult]:
    """Discrete second differences of every value array must be >= -eps."""
    eps = default_eps(tables) if eps is None else eps
    out = {}
    for name, a in tables.arrays().items():
        d2 = a[2:] - 2.0 * a[1:-1] + a[:-2]
        if d2.size == 0:
            out[name] = CheckResult(True, 0.0, None, eps)
            continue
        i = int(np.argmin(d2))
        ok = bool(d2[i] >= -eps)
        out[name] = CheckResult(ok, float(d2[i]), None if ok else i + 1, eps)
    return out


@dataclass
class LipschitzResult:
    applicable: bool
    passed: bool
    kappa: float = float("nan")
    slope_v: float = float("nan")
    bound_v: float = float("nan")
    slope_v_tilde: float = float("nan")
    bound_v_tilde: float = float("nan")
    tolerance: float = 0.0


def lipschitz_constant(beta: float, mu0: float, mu1: float) -> float:
    return 1.0 / (1.0 - beta * (mu1 - mu0))


def check_lipschitz(tables: ValueTables, params: ArmParams, config: SolverConfig,
                    eps: float | None = None) -> LipschitzResult:
    """Compare the steepest grid slope of V and V~ with kappa * reward gap.

    Only defined for 0 < mu1 - mu0 <= 1/3; otherwise returned as not applicable.
    """
    gap = params.mu1 - params.mu0
    if not 0.0 < gap <= 1.0 / 3.0:
        return LipschitzResult(applicable=False, passed=True)
    eps = default_eps(tables) if eps is None else eps
    h = np.diff(tables.grid)
    # an additive error of eps per point shows up as eps / h in a slope
    slope_tol = eps / float(np.min(h))
    kappa = lipschitz_constant(config.beta, params.mu0, params.mu1)
    sv = float(np.max(np.abs(np.diff(tables.v)) / h))
    st = float(np.max(np.abs(np.diff(tables.v_tilde)) / h))
    bv = kappa * abs(params.r1 - params.r0)
    bt = kappa * abs(params.eta1 - params.eta0)
    return LipschitzResult(True, sv <= bv + slope_tol and st <= bt + slope_tol,
                           kappa, sv, bv, st, bt, slope_tol)


class Shape(str, enum.Enum):
    ALL_PLAY = "all_play"
    ALL_NOT_PLAY = "all_not_play"
    THRESHOLD = "threshold"
    NOT_THRESHOLD = "not_threshold"


@dataclass
class ThresholdResult:
    shape: Shape
    # refined switch belief; None unless shape is THRESHOLD
    pi_star: Optional[float] = None
    # first grid point with action NotPlay
    grid_pi_star: Optional[float] = None
    grid_index: Optional[int] = None
    # NOT_THRESHOLD: indices i where action goes NotPlay -> Play between i and i+1
    witness: list[int] = field(default_factory=list)


def refine_switch(grid: np.ndarray, diff: np.ndarray, k: int) -> float:
    """Root of the interpolated difference between grid[k-1] (play) and grid[k]."""
    if diff[k] == 0.0:
        return float(grid[k])
    a, b = float(grid[k - 1]), float(grid[k])
    f = lambda x: float(np.interp(x, grid, diff))  # noqa: E731
    return float(optimize.bisect(f, a, b, xtol=REFINE_XTOL))


def classify(grid: np.ndarray, actions: np.ndarray, diff: np.ndarray | None = None) -> ThresholdResult:
    acts = np.asarray(actions).astype(np.int8)
    if np.all(acts == 1):
        return ThresholdResult(Shape.ALL_PLAY)
    if np.all(acts == 0):
        return ThresholdResult(Shape.ALL_NOT_PLAY, pi_star=None, grid_pi_star=float(grid[0]),
                               grid_index=0)
    rises = np.flatnonzero(np.diff(acts) > 0)
    if rises.size:
        return ThresholdResult(Shape.NOT_THRESHOLD, witness=rises.tolist())
    k = int(np.argmin(acts))  # first NotPlay; actions are 1...1 0...0 here
    pi_star = float(grid[k]) if diff is None else refine_switch(grid, diff, k)
    return ThresholdResult(Shape.THRESHOLD, pi_star=pi_star, grid_pi_star=float(grid[k]),
                           grid_index=k)


def extract_threshold(policy: PolicyTable) -> dict[int, ThresholdResult]:
    """Classify the action map for each availability value."""
    return {y: classify(policy.grid, policy.actions[y], policy.diffs.get(y)) for y in (1, 0)}


def is_threshold(result: dict[int, ThresholdResult]) -> bool:
    return all(r.shape is not Shape.NOT_THRESHOLD for r in result.values())


@dataclass
class StructureReport:
    conditions: StructuralConditions
    convex_in_pi: dict[str, CheckResult]
    monotone_in_pi: CheckResult
    isotone_difference: dict[str, CheckResult]
    lipschitz: LipschitzResult
    threshold: dict[int, ThresholdResult]
    w: float
    beta: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["threshold"] = {("available" if y == 1 else "unavailable"): asdict(r)
                          for y, r in self.threshold.items()}
        for r in d["threshold"].values():
            r["shape"] = r["shape"].value if isinstance(r["shape"], Shape) else r["shape"]
        return d


def analyze(tables: ValueTables, params: ArmParams, config: SolverConfig,
            rel_tol: float = DEFAULT_REL_TOL) -> StructureReport:
    eps = default_eps(tables, rel_tol)
    return StructureReport(
        conditions=check_structural_conditions(params),
        convex_in_pi=check_convexity(tables, eps),
        monotone_in_pi=check_monotone_values(tables, eps),
        isotone_difference=check_isotone_difference(tables, eps),
        lipschitz=check_lipschitz(tables, params, config, eps),
        threshold=extract_threshold(extract_policy(tables)),
        w=tables.w,
        beta=tables.beta,
    )
