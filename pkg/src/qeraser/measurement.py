"""
Projective measurements on one register of a composite pure state.

Probabilities follow the Born rule, ``p_K = sum_j |<A_K|<B_j|psi>|^2``; the
post-measurement state is the renormalized projection. Outcomes may own
several orthonormal vectors (degenerate projectors).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .constants import PROB_FLOOR, TOL
from .hilbert import (
    BasisSet,
    HilbertError,
    Ket,
    LinearMap,
    MissingRegisterError,
    NotOrthonormalError,
    Register,
    orthonormality_deviation,
)


class MeasurementError(ValueError):
    pass


class UnknownOutcomeError(MeasurementError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ImpossibleOutcomeError(MeasurementError):
    pass


class RegisterConflictError(MeasurementError):
    pass


@dataclass(frozen=True, eq=False)
class Outcome:
    label: str
    detector: str
    vectors: np.ndarray = field(repr=False)  # rows, components in register basis


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Complete set of orthogonal projectors on one register.

    Outcomes can be addressed either by their eigenstate label (``"R"``) or
    by their detector label (``"D1"``).
    """

    register: Register
    outcomes: tuple[Outcome, ...]
    name: str = ""

    def __post_init__(self):
        outs = []
        for o in self.outcomes:
            vecs = np.array(np.atleast_2d(o.vectors), dtype=complex)
            vecs.setflags(write=False)
            if vecs.shape[1] != self.register.dim:
                raise NotOrthonormalError(f"outcome {o.label}: wrong vector length")
            outs.append(Outcome(str(o.label), str(o.detector), vecs))
        object.__setattr__(self, "outcomes", tuple(outs))
        names = [o.label for o in outs] + [o.detector for o in outs]
        if len(set(o.label for o in outs)) != len(outs) or len(set(o.detector for o in outs)) != len(outs):
            raise MeasurementError(f"duplicate outcome or detector labels: {names}")
        allvecs = np.concatenate([o.vectors for o in outs])
        if allvecs.shape[0] != self.register.dim:
            raise NotOrthonormalError("outcome vectors do not span the register")
        dev = orthonormality_deviation(allvecs)
        if dev > TOL:
            raise NotOrthonormalError(f"outcome vectors not orthonormal (deviation {dev:.3g})")

    @classmethod
    def from_basis(cls, basis: BasisSet, detectors: Mapping[str, str] | None = None,
                   name: str = "") -> "ProjectiveMeasurement":
        """One outcome per basis vector, listed in basis order."""
        detectors = dict(detectors or {})
        outs = tuple(
            Outcome(label, detectors.get(label, label), basis.vectors[k][None, :])
            for k, label in enumerate(basis.labels)
        )
        return cls(basis.register, outs, name=name)

    @classmethod
    def after(cls, element: LinearMap, analyzer: "ProjectiveMeasurement",
              name: str = "") -> "ProjectiveMeasurement":
        """Measurement realized by ``element`` followed by ``analyzer``.

        The effective outcome vectors are ``element^dag |a>``.
        """
        if element.output_register != analyzer.register or not element.is_square:
            raise MeasurementError("element must be a unitary onto the analyzer register")
        outs = tuple(
            Outcome(o.label, o.detector, (element.matrix.conj().T @ o.vectors.T).T)
            for o in analyzer.outcomes
        )
        return cls(element.input_register, outs, name=name)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.outcomes)

    @property
    def detectors(self) -> tuple[str, ...]:
        return tuple(o.detector for o in self.outcomes)

    def outcome(self, key: str) -> Outcome:
        for o in self.outcomes:
            if key == o.label or key == o.detector:
                return o
        raise UnknownOutcomeError(
            f"{key!r} is not an outcome of {self.name or 'measurement'} "
            f"(labels {self.labels}, detectors {self.detectors})"
        )

    def relabeled(self, mapping: Mapping[str, str], name: str = "") -> "ProjectiveMeasurement":
        """Copy with outcome labels renamed through ``mapping`` (detectors kept)."""
        outs = tuple(Outcome(mapping.get(o.label, o.label), o.detector, o.vectors)
                     for o in self.outcomes)
        return ProjectiveMeasurement(self.register, outs, name=name or self.name)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Ordered mapping ``label -> probability``."""

    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if len(self.labels) != len(p):
            raise ValueError("labels and probabilities differ in length")
        if np.any(p < -TOL) or abs(p.sum() - 1.0) > TOL:
            raise ValueError(f"not a probability distribution: {self.probabilities}")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "probabilities", tuple(float(max(x, 0.0)) for x in p))

    @classmethod
    def from_mapping(cls, entries: Mapping[str, float]) -> "OutcomeDistribution":
        return cls(tuple(entries), tuple(entries.values()))

    def __getitem__(self, label: str) -> float:
        return self.probabilities[self.labels.index(label)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.probabilities))


def _check_register(state: Ket, meas: ProjectiveMeasurement) -> int:
    ax = state.axis(meas.register.name)
    if state.layout[ax] != meas.register:
        raise MissingRegisterError(
            f"{meas.name or 'measurement'} acts on {meas.register}, state has {state.layout[ax]}"
        )
    return ax


def _project(state: Ket, meas: ProjectiveMeasurement, key: str) -> tuple[np.ndarray, int, Outcome]:
    """Components ``<v_k|psi>`` for every vector of the outcome; axis 0 runs over k."""
    ax = _check_register(state, meas)
    out = meas.outcome(key)
    comps = np.tensordot(out.vectors.conj(), state.tensor_view(), axes=([1], [ax]))
    return comps, ax, out


def outcome_probability(state: Ket, meas: ProjectiveMeasurement, outcome: str) -> float:
    comps, _, _ = _project(state, meas, outcome)
    return float(np.sum(np.abs(comps) ** 2))


def distribution(state: Ket, meas: ProjectiveMeasurement) -> OutcomeDistribution:
    """Born-rule distribution over ``meas`` outcomes, keyed by detector label."""
    probs = [outcome_probability(state, meas, o.label) for o in meas.outcomes]
    return OutcomeDistribution(meas.detectors, tuple(probs))


def collapse(state: Ket, meas: ProjectiveMeasurement, outcome: str) -> Ket:
    comps, ax, out = _project(state, meas, outcome)
    p = float(np.sum(np.abs(comps) ** 2))
    if p <= PROB_FLOOR:
        raise ImpossibleOutcomeError(
            f"outcome {outcome!r} of {meas.name or 'measurement'} has probability {p:.3g}"
        )
    data = np.tensordot(out.vectors.T, comps, axes=([1], [0]))
    data = np.moveaxis(data, 0, ax) / np.sqrt(p)
    return Ket(state.layout, data.reshape(-1))


def _distinct(measA: ProjectiveMeasurement, measB: ProjectiveMeasurement) -> None:
    if measA.register.name == measB.register.name:
        raise RegisterConflictError(
            f"both measurements act on register {measA.register.name!r}"
        )


def joint_probability(state: Ket, measA: ProjectiveMeasurement, outcomeK: str,
                      measB: ProjectiveMeasurement, outcomeL: str) -> float:
    """``sum |<a|<b|psi>|^2`` over the vectors of outcomes K and L."""
    _distinct(measA, measB)
    axA = _check_register(state, measA)
    axB = _check_register(state, measB)
    va = measA.outcome(outcomeK).vectors.conj()
    vb = measB.outcome(outcomeL).vectors.conj()
    data = np.moveaxis(state.tensor_view(), (axA, axB), (0, 1))
    amp = np.einsum("ka,lb,ab...->kl...", va, vb, data)
    return float(np.sum(np.abs(amp) ** 2))


def conditional_probability(state: Ket, first: tuple[ProjectiveMeasurement, str],
                            second: tuple[ProjectiveMeasurement, str]) -> float:
    """Probability of ``second`` after ``first`` has been registered; 0 on an impossible branch."""
    (measA, K), (measB, L) = first, second
    _distinct(measA, measB)
    if outcome_probability(state, measA, K) <= PROB_FLOOR:
        measB.outcome(L)
        return 0.0
    return outcome_probability(collapse(state, measA, K), measB, L)


def sequential_joint(state: Ket, first: tuple[ProjectiveMeasurement, str],
                     second: tuple[ProjectiveMeasurement, str]) -> float:
    """``p_K * p_{L|K}`` with explicit collapse after the first measurement."""
    (measA, K), (measB, L) = first, second
    _distinct(measA, measB)
    pK = outcome_probability(state, measA, K)
    if pK <= PROB_FLOOR:
        measB.outcome(L)
        return 0.0
    return pK * outcome_probability(collapse(state, measA, K), measB, L)


@dataclass
class OrderReport:
    """Worst-case disagreement between the joint rule and both sequential orders."""

    max_dev_a_first: float
    max_dev_b_first: float
    tol: float
    rows: list[dict] = field(default_factory=list)
    violations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max(self.max_dev_a_first, self.max_dev_b_first)

    @property
    def passed(self) -> bool:
        return not self.violations


def order_independence_report(state: Ket, measA: ProjectiveMeasurement,
                              measB: ProjectiveMeasurement, tol: float = TOL) -> OrderReport:
    _distinct(measA, measB)
    report = OrderReport(0.0, 0.0, tol)
    for oa, ob in itertools.product(measA.outcomes, measB.outcomes):
        pj = joint_probability(state, measA, oa.label, measB, ob.label)
        pa = sequential_joint(state, (measA, oa.label), (measB, ob.label))
        pb = sequential_joint(state, (measB, ob.label), (measA, oa.label))
        da, db = abs(pj - pa), abs(pj - pb)
        report.max_dev_a_first = max(report.max_dev_a_first, da)
        report.max_dev_b_first = max(report.max_dev_b_first, db)
        report.rows.append(dict(a=oa.detector, b=ob.detector, joint=pj,
                                a_first=pa, b_first=pb, dev_a_first=da, dev_b_first=db))
        if da > tol or db > tol:
            report.violations.append((oa.detector, ob.detector))
    return report


def random_orthonormal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random orthonormal rows via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return q.T


def random_state(layout: Sequence[Register], rng: np.random.Generator) -> Ket:
    n = int(np.prod([r.dim for r in layout]))
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return Ket(tuple(layout), z / np.linalg.norm(z))


def random_measurement(register: Register, rng: np.random.Generator,
                       prefix: str = "m") -> ProjectiveMeasurement:
    basis = BasisSet(register, tuple(f"{prefix}{k}" for k in range(register.dim)),
                     random_orthonormal(register.dim, rng))
    return ProjectiveMeasurement.from_basis(basis, name=f"random-{register.name}")


__all__ = [
    "HilbertError",
    "ImpossibleOutcomeError",
    "MeasurementError",
    "OrderReport",
    "Outcome",
    "OutcomeDistribution",
    "ProjectiveMeasurement",
    "RegisterConflictError",
    "UnknownOutcomeError",
    "collapse",
    "conditional_probability",
    "distribution",
    "joint_probability",
    "order_independence_report",
    "outcome_probability",
    "random_measurement",
    "random_orthonormal",
    "random_state",
    "sequential_joint",
]
