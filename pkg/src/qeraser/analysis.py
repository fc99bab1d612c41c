"""
Closed-form coincidence tables, tallying of trial records, fringe visibility
and per-cell statistical comparison.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import cos, pi, sin, sqrt
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constants import TOL
from .optics import Choice, alpha, wrap_theta

ENV_DETECTORS = ("D1", "D2")
SYS_DETECTORS = ("D3", "D4")
# (D1,D3), (D2,D3), (D1,D4), (D2,D4)
CELLS: tuple[tuple[str, str], ...] = tuple((e, s) for s in SYS_DETECTORS for e in ENV_DETECTORS)


def cell_name(cell: tuple[str, str]) -> str:
    """``("D1", "D3") -> "13"``."""
    return cell[0][1:] + cell[1][1:]


class UndefinedVisibilityError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticProbTable:
    theta: float
    alpha: float
    choice: Choice
    p: Mapping[tuple[str, str], float]

    def __getitem__(self, cell: tuple[str, str]) -> float:
        return self.p[cell]

    def marginal(self, detector: str) -> float:
        return sum(v for k, v in self.p.items() if detector in k)

    def conditional(self, env: str, sys: str) -> float:
        """p(env and sys) / p(sys)."""
        return self.p[(env, sys)] / self.marginal(sys)


def analytic_table(theta: float, choice: Choice | int) -> AnalyticProbTable:
    choice = Choice(choice)
    theta = wrap_theta(theta)
    a = alpha(theta)
    if choice is Choice.ZERO:
        p = {c: 0.25 for c in CELLS}
    else:
        s2, c2 = 0.5 * sin(a) ** 2, 0.5 * cos(a) ** 2
        p = {("D1", "D3"): s2, ("D2", "D3"): c2, ("D1", "D4"): c2, ("D2", "D4"): s2}
    return AnalyticProbTable(theta, a, choice, p)


@dataclass
class CoincidenceTable:
    """Detector-pair counts for one choice stratum."""

    counts: dict[tuple[str, str], int] = field(default_factory=lambda: {c: 0 for c in CELLS})

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def frequencies(self) -> dict[tuple[str, str], float] | None:
        """``None`` flags an empty stratum."""
        n = self.total
        if n == 0:
            return None
        return {c: k / n for c, k in self.counts.items()}

    def merge(self, other: "CoincidenceTable") -> "CoincidenceTable":
        return CoincidenceTable({c: self.counts[c] + other.counts[c] for c in CELLS})

    def conditional(self, env: str, sys: str) -> float:
        """Empirical p(env | sys); NaN when the sys stratum is empty."""
        n = sum(self.counts[(e, sys)] for e in ENV_DETECTORS)
        return self.counts[(env, sys)] / n if n else float("nan")


def tally(records) -> dict[int, CoincidenceTable]:
    """Counts per choice bit; both strata are always present."""
    out = {0: CoincidenceTable(), 1: CoincidenceTable()}
    if hasattr(records, "env") and hasattr(records, "choice"):  # columnar TrialBatch
        # code = choice*4 + env*2 + sys
        codes = (records.choice.astype(np.int64) * 4 + records.env * 2 + records.sys)
        hist = np.bincount(codes, minlength=8)
        for c in (0, 1):
            for e, env in enumerate(ENV_DETECTORS):
                for s, sys in enumerate(SYS_DETECTORS):
                    out[c].counts[(env, sys)] = int(hist[c * 4 + e * 2 + s])
        return out
    counter = Counter((r.choice, r.env_detector, r.sys_detector) for r in records)
    for (c, env, sys), n in counter.items():
        out[int(c)].counts[(env, sys)] += n
    return out


def merge_tallies(parts: Iterable[Mapping[int, CoincidenceTable]]) -> dict[int, CoincidenceTable]:
    out = {0: CoincidenceTable(), 1: CoincidenceTable()}
    for part in parts:
        for c, table in part.items():
            out[c] = out[c].merge(table)
    return out


def visibility(sweep: Sequence[tuple[float, float]]) -> float:
    """``(max - min) / (max + min)`` of the fringe values; NaN points are ignored."""
    values = np.array([v for _, v in sweep], dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise UndefinedVisibilityError("sweep has no defined values")
    hi, lo = float(values.max()), float(values.min())
    if hi + lo == 0.0:
        raise UndefinedVisibilityError("max + min = 0")
    return (hi - lo) / (hi + lo)


@dataclass
class Comparison:
    z: dict[tuple[str, str], float]
    verdict: dict[tuple[str, str], bool]
    sigma: float

    @property
    def passed(self) -> bool:
        return all(self.verdict.values())

    @property
    def max_abs_z(self) -> float:
        finite = [abs(v) for v in self.z.values() if np.isfinite(v)]
        return max(finite, default=0.0)


def compare(empirical: CoincidenceTable, analytic: AnalyticProbTable,
            sigma: float = 4.0) -> Comparison:
    """Per-cell binomial z-scores.

    Cells with probability 0 (or 1) have no spread; they pass only when the
    count matches exactly, and report ``z = 0`` or ``inf``.
    """
    n = empirical.total
    if n <= 0:
        raise ValueError("empirical table is empty")
    z, ok = {}, {}
    for cell in CELLS:
        p, k = analytic[cell], empirical.counts[cell]
        if p <= TOL or p >= 1 - TOL:
            exact = k == (0 if p <= TOL else n)
            z[cell] = 0.0 if exact else float("inf")
            ok[cell] = exact
            continue
        z[cell] = (k / n - p) / sqrt(p * (1 - p) / n)
        ok[cell] = abs(z[cell]) < sigma
    return Comparison(z, ok, sigma)


def compare_empirical(a: CoincidenceTable, b: CoincidenceTable, sigma: float = 5.0) -> Comparison:
    """Two-sample z-test per cell using the pooled frequency."""
    na, nb = a.total, b.total
    if na <= 0 or nb <= 0:
        raise ValueError("both tables must be non-empty")
    z, ok = {}, {}
    for cell in CELLS:
        ka, kb = a.counts[cell], b.counts[cell]
        pooled = (ka + kb) / (na + nb)
        if pooled in (0.0, 1.0):
            z[cell] = 0.0
        else:
            z[cell] = (ka / na - kb / nb) / sqrt(pooled * (1 - pooled) * (1 / na + 1 / nb))
        ok[cell] = abs(z[cell]) < sigma
    return Comparison(z, ok, sigma)


def analytic_fringes(thetas: Sequence[float], choice: Choice | int) -> dict[str, list[tuple[float, float]]]:
    """Conditioned fringes p(Di | Dj) along a theta sweep, keyed ``"1|3"`` etc."""
    out: dict[str, list[tuple[float, float]]] = {}
    for th in thetas:
        t = analytic_table(th, choice)
        for env, sys in CELLS:
            out.setdefault(f"{env[1:]}|{sys[1:]}", []).append((th, t.conditional(env, sys)))
    return out


def theta_grid(start: float = -pi, end: float = pi, steps: int = 181) -> np.ndarray:
    if steps < 2:
        raise ValueError("a grid needs at least 2 points")
    return np.linspace(start, end, steps)


__all__ = [
    "AnalyticProbTable",
    "CELLS",
    "CoincidenceTable",
    "Comparison",
    "UndefinedVisibilityError",
    "analytic_fringes",
    "analytic_table",
    "cell_name",
    "compare",
    "compare_empirical",
    "merge_tallies",
    "tally",
    "theta_grid",
    "visibility",
]
