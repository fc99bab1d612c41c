"""
Seeded trial generator for coincidence experiments.

Each trial ``t`` owns one Philox4x64 counter block (``key=seed``,
``counter=t``), i.e. four 64-bit words, so any trial can be regenerated on
its own and chunks of trials can run in any order or in parallel. The words
are used as:

* word 0: choice bit (``random_per_trial`` only)
* word 1: first measurement (or the single joint draw)
* word 2: second measurement

Outcome probabilities come from the measurement module. The branch tree
(first outcome, collapse, conditional outcome) is computed once per choice
and then sampled by inverse CDF for every trial; :func:`simulate_trial`
replays a single trial with explicit per-trial collapse and must agree.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import isfinite
from typing import Iterator, Sequence

import numpy as np

from .constants import PROB_FLOOR
from .hilbert import Ket
from .measurement import (
    OutcomeDistribution,
    collapse,
    distribution,
    joint_probability,
)
from .optics import Choice, env_analyzer, full_eraser_state, system_detectors, wrap_theta

log = logging.getLogger(__name__)

ENV_DETECTORS = ("D1", "D2")
SYS_DETECTORS = ("D3", "D4")
_WORDS_PER_TRIAL = 4


class ChoicePolicy(str, enum.Enum):
    FIXED0 = "fixed0"
    FIXED1 = "fixed1"
    RANDOM = "random_per_trial"


class Ordering(str, enum.Enum):
    SYSTEM_FIRST = "system_first"
    ENVIRONMENT_FIRST = "environment_first"
    JOINT = "joint_single_shot"


# logical times (t_sys, t_choice, t_env) per ordering
_TIMESTAMPS = {
    Ordering.SYSTEM_FIRST: (0, 1, 2),
    Ordering.ENVIRONMENT_FIRST: (2, 0, 1),
    Ordering.JOINT: (1, 0, 1),
}


@dataclass(frozen=True)
class RunConfig:
    theta: float
    choice_policy: ChoicePolicy = ChoicePolicy.FIXED1
    ordering: Ordering = Ordering.SYSTEM_FIRST
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "theta", wrap_theta(self.theta))
        object.__setattr__(self, "choice_policy", ChoicePolicy(self.choice_policy))
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    choice: int
    sys_detector: str
    env_detector: str
    t_sys: int
    t_env: int
    t_choice: int
    substream: int


CSV_HEADER = ("trial_id", "choice", "env_detector", "sys_detector",
              "t_sys", "t_choice", "t_env", "substream")


class TrialBatch(Sequence[TrialRecord]):
    """Columnar store of trial records, indexable as a sequence of :class:`TrialRecord`.

    ``env`` and ``sys`` hold detector indices (0 -> D1/D3, 1 -> D2/D4).
    """

    def __init__(self, ordering: Ordering, trial_id: np.ndarray, choice: np.ndarray,
                 env: np.ndarray, sys: np.ndarray):
        self.ordering = Ordering(ordering)
        self.trial_id = np.asarray(trial_id, dtype=np.int64)
        self.choice = np.asarray(choice, dtype=np.int8)
        self.env = np.asarray(env, dtype=np.int8)
        self.sys = np.asarray(sys, dtype=np.int8)
        for a in (self.trial_id, self.choice, self.env, self.sys):
            a.setflags(write=False)
        self.t_sys, self.t_choice, self.t_env = _TIMESTAMPS[self.ordering]

    def __len__(self) -> int:
        return len(self.trial_id)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return TrialBatch(self.ordering, self.trial_id[i], self.choice[i], self.env[i], self.sys[i])
        tid = int(self.trial_id[i])
        return TrialRecord(tid, int(self.choice[i]), SYS_DETECTORS[self.sys[i]],
                           ENV_DETECTORS[self.env[i]], self.t_sys, self.t_env, self.t_choice, tid)

    def __iter__(self) -> Iterator[TrialRecord]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, TrialBatch):
            return NotImplemented
        return (self.ordering == other.ordering
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("trial_id", "choice", "env", "sys")))

    @classmethod
    def concat(cls, parts: Sequence["TrialBatch"]) -> "TrialBatch":
        orderings = {p.ordering for p in parts}
        if len(orderings) != 1:
            raise ValueError("cannot merge batches with different orderings")
        parts = sorted(parts, key=lambda p: int(p.trial_id[0]) if len(p) else -1)
        cat = lambda f: np.concatenate([getattr(p, f) for p in parts])
        return cls(orderings.pop(), cat("trial_id"), cat("choice"), cat("env"), cat("sys"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        ts, tc, te = self.t_sys, self.t_choice, self.t_env
        lines = (
            f"{t},{c},{ENV_DETECTORS[e]},{SYS_DETECTORS[s]},{ts},{tc},{te},{t}\n"
            for t, c, e, s in zip(self.trial_id.tolist(), self.choice.tolist(),
                                  self.env.tolist(), self.sys.tolist())
        )
        buf.writelines(lines)
        return buf.getvalue()


def read_trials_csv(text: str) -> list[TrialRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        TrialRecord(int(r["trial_id"]), int(r["choice"]), r["sys_detector"], r["env_detector"],
                    int(r["t_sys"]), int(r["t_env"]), int(r["t_choice"]), int(r["substream"]))
        for r in rows
    ]


def sample_outcome(distribution: OutcomeDistribution, uniform: float) -> str:
    """Inverse-CDF draw; outcomes are laid out on [0, 1) in declared order."""
    cdf = np.cumsum(distribution.probabilities)
    k = int(np.searchsorted(cdf, uniform, side="right"))
    return distribution.labels[min(k, len(distribution.labels) - 1)]


def _sample_indices(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized inverse CDF; ``probs`` has one row per trial."""
    cdf = np.cumsum(probs, axis=-1)
    k = (u[:, None] >= cdf).sum(axis=-1)
    return np.minimum(k, probs.shape[-1] - 1)


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform [0, 1) draws of shape (count, 4) for trials start..start+count-1."""
    gen = np.random.Philox(key=seed, counter=start)
    raw = gen.random_raw(_WORDS_PER_TRIAL * count).reshape(count, _WORDS_PER_TRIAL)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _clean(p: np.ndarray) -> np.ndarray:
    """Zero out numerically impossible branches and renormalize."""
    p = np.where(p <= PROB_FLOOR, 0.0, p)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class SamplingPlan:
    """Branch probabilities for one (state, choice, ordering).

    ``first`` is over the first-measured detectors, ``second[k]`` is the
    conditional distribution after first outcome ``k`` (zeros on an
    impossible branch). For the joint ordering ``first`` holds the four
    joint probabilities in (env, sys) row-major order and ``second`` is unused.
    """

    first: np.ndarray
    second: np.ndarray


def build_plan(state: Ket, choice: Choice | int, ordering: Ordering) -> SamplingPlan:
    env_m = env_analyzer(choice)
    sys_m = system_detectors()
    ordering = Ordering(ordering)
    if ordering is Ordering.JOINT:
        joint = np.array([joint_probability(state, env_m, e, sys_m, s)
                          for e in ENV_DETECTORS for s in SYS_DETECTORS])
        return SamplingPlan(_clean(joint), np.zeros((0, 0)))
    first_m, second_m = (sys_m, env_m) if ordering is Ordering.SYSTEM_FIRST else (env_m, sys_m)
    first = _clean(np.array(distribution(state, first_m).probabilities))
    second = np.zeros((len(first), len(second_m.outcomes)))
    for k, det in enumerate(first_m.detectors):
        if first[k] > 0.0:
            second[k] = _clean(np.array(distribution(collapse(state, first_m, det), second_m).probabilities))
    return SamplingPlan(first, second)


def _choices(policy: ChoicePolicy, u0: np.ndarray) -> np.ndarray:
    if policy is ChoicePolicy.FIXED0:
        return np.zeros(len(u0), dtype=np.int8)
    if policy is ChoicePolicy.FIXED1:
        return np.ones(len(u0), dtype=np.int8)
    return (u0 >= 0.5).astype(np.int8)


def _run_chunk(config: RunConfig, plans: dict[int, SamplingPlan], start: int, count: int) -> TrialBatch:
    u = uniforms(config.seed, start, count)
    choice = _choices(config.choice_policy, u[:, 0])
    env = np.zeros(count, dtype=np.int8)
    sys = np.zeros(count, dtype=np.int8)
    for c, plan in plans.items():
        mask = choice == c
        n = int(mask.sum())
        if not n:
            continue
        u1, u2 = u[mask, 1], u[mask, 2]
        if config.ordering is Ordering.JOINT:
            k = _sample_indices(np.broadcast_to(plan.first, (n, 4)), u1)
            env[mask], sys[mask] = k // 2, k % 2
            continue
        k1 = _sample_indices(np.broadcast_to(plan.first, (n, 2)), u1)
        k2 = _sample_indices(plan.second[k1], u2)
        if config.ordering is Ordering.SYSTEM_FIRST:
            sys[mask], env[mask] = k1, k2
        else:
            env[mask], sys[mask] = k1, k2
    ids = np.arange(start, start + count, dtype=np.int64)
    return TrialBatch(config.ordering, ids, choice, env, sys)


def _plans(config: RunConfig) -> dict[int, SamplingPlan]:
    state = full_eraser_state(config.theta)
    wanted = {ChoicePolicy.FIXED0: (0,), ChoicePolicy.FIXED1: (1,),
              ChoicePolicy.RANDOM: (0, 1)}[config.choice_policy]
    return {c: build_plan(state, c, config.ordering) for c in wanted}


def run_trials(config: RunConfig, chunk_size: int = 1 << 18, workers: int = 1) -> TrialBatch:
    """Run ``config.trials`` trials; output is independent of ``chunk_size`` and ``workers``."""
    plans = _plans(config)
    starts = range(0, config.trials, chunk_size)
    jobs = [(s, min(chunk_size, config.trials - s)) for s in starts]
    log.debug("running %d trials in %d chunks", config.trials, len(jobs))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _run_chunk(config, plans, *j), jobs))
    else:
        parts = [_run_chunk(config, plans, *j) for j in jobs]
    return TrialBatch.concat(parts)


def simulate_trial(config: RunConfig, trial_id: int) -> TrialRecord:
    """Replay one trial with explicit collapse of the joint state.

    Uses the same substream as :func:`run_trials`, so the two must agree
    record for record.
    """
    u0, u1, u2, _ = uniforms(config.seed, trial_id, 1)[0]
    choice = int(_choices(config.choice_policy, np.array([u0]))[0])
    state = full_eraser_state(config.theta)
    env_m, sys_m = env_analyzer(choice), system_detectors()

    def draw(dist: OutcomeDistribution, u: float) -> str:
        p = _clean(np.array(dist.probabilities))
        return sample_outcome(OutcomeDistribution(dist.labels, tuple(p)), u)

    if config.ordering is Ordering.JOINT:
        labels = tuple((e, s) for e in ENV_DETECTORS for s in SYS_DETECTORS)
        probs = tuple(joint_probability(state, env_m, e, sys_m, s) for e, s in labels)
        names = tuple(f"{e}|{s}" for e, s in labels)
        env_det, sys_det = draw(OutcomeDistribution(names, probs), u1).split("|")
    else:
        sys_first = config.ordering is Ordering.SYSTEM_FIRST
        first_m, second_m = (sys_m, env_m) if sys_first else (env_m, sys_m)
        d1 = draw(distribution(state, first_m), u1)
        d2 = draw(distribution(collapse(state, first_m, d1), second_m), u2)
        sys_det, env_det = (d1, d2) if sys_first else (d2, d1)
    ts, tc, te = _TIMESTAMPS[config.ordering]
    return TrialRecord(trial_id, choice, sys_det, env_det, ts, te, tc, trial_id)


def timestamps_consistent(record: TrialRecord, ordering: Ordering) -> bool:
    """Check the causal order a record must respect under ``ordering``."""
    ordering = Ordering(ordering)
    if ordering is Ordering.SYSTEM_FIRST:
        return record.t_sys < record.t_choice < record.t_env
    if ordering is Ordering.ENVIRONMENT_FIRST:
        return record.t_choice < record.t_env < record.t_sys
    return record.t_choice < record.t_sys == record.t_env


__all__ = [
    "CSV_HEADER",
    "ChoicePolicy",
    "Ordering",
    "RunConfig",
    "SamplingPlan",
    "TrialBatch",
    "TrialRecord",
    "build_plan",
    "read_trials_csv",
    "run_trials",
    "sample_outcome",
    "simulate_trial",
    "timestamps_consistent",
    "uniforms",
]
