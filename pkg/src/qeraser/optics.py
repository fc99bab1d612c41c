"""
Optical elements of the two-photon eraser and the single-photon Wheeler
interferometer, as maps between labeled registers.

Phase conventions (each one is pinned by a test):

* symmetric beam splitter: transmission 1/sqrt2, reflection i/sqrt2, so
  ``a -> (|3> + i|4>)/sqrt2`` and ``b -> (|4> + i|3>)/sqrt2``;
* front PBS: H is reflected into arm ``a`` with factor ``i``, V is
  transmitted into arm ``b``;
* dephasing plate: ``e^{i theta}`` on arm ``a``;
* EOM on: ``|R> -> |V>``, ``|L> -> |H>``; off is the identity;
* environment analyzer PBS: V -> D1, H -> D2.

The polarization controllers in front of the final beam splitter only align
the two arms for interference and carry no parameter, so they do not appear.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .hilbert import (
    BasisSet,
    Ket,
    LinearMap,
    Register,
    apply_map,
    basis_ket,
    identity_map,
    tensor,
)
from .measurement import ProjectiveMeasurement, outcome_probability

SQRT1_2 = 1 / np.sqrt(2)

ENV = Register("e", ("H", "V"))
SYS_POL = Register("s", ("H", "V"))
SYS_PATH = Register("s", ("a", "b"))
SYS_PORT = Register("s", ("3", "4"))

WHEELER_IN = Register("w", ("in1", "in2"))
WHEELER_PATH = Register("w", ("a", "b"))
WHEELER_OUT = Register("w", ("1", "2"))


class Choice(enum.IntEnum):
    """Environment analysis: 0 = EOM off (linear V/H), 1 = EOM on (circular R/L)."""

    ZERO = 0
    ONE = 1


def wrap_theta(theta: float) -> float:
    """Map ``theta`` into [-pi, pi]; values already inside are left untouched."""
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    if -pi <= theta <= pi:
        return theta
    return (theta + pi) % (2 * pi) - pi


def alpha(theta: float) -> float:
    """Fringe phase ``theta/2 + pi/4`` reported in [0, pi)."""
    return (wrap_theta(theta) / 2 + pi / 4) % pi


@dataclass(frozen=True)
class ApparatusParams:
    theta: float
    choice: Choice = Choice.ONE

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_theta(self.theta))
        object.__setattr__(self, "choice", Choice(self.choice))

    @property
    def alpha(self) -> float:
        return alpha(self.theta)


def symmetric_bs(inp: Register, out: Register, reflection_phase: float = pi / 2,
                 validate: bool = True) -> LinearMap:
    """50/50 splitter; the reflected amplitude carries ``e^{i reflection_phase}``."""
    r = np.exp(1j * reflection_phase)
    (a, b), (o1, o2) = inp.labels, out.labels
    return LinearMap.from_columns(
        inp, out,
        {a: {o1: SQRT1_2, o2: r * SQRT1_2}, b: {o2: SQRT1_2, o1: r * SQRT1_2}},
        name="bs", validate=validate,
    )


def arm_phase(register: Register, theta: float, arm: str = "a") -> LinearMap:
    phases = {lab: (np.exp(1j * theta) if lab == arm else 1.0) for lab in register.labels}
    return LinearMap(register, register, np.diag([phases[l] for l in register.labels]),
                     name="phase_plate")


def circular_basis(register: Register = ENV) -> BasisSet:
    """``|R> = (|H> + i|V>)/sqrt2``, ``|L> = (|H> - i|V>)/sqrt2``."""
    return BasisSet(register, ("R", "L"), SQRT1_2 * np.array([[1, 1j], [1, -1j]]))


def elliptical_basis(theta: float, register: Register = ENV) -> BasisSet:
    """``|E> = (|H> + e^{i theta}|V>)/sqrt2`` and its orthogonal partner ``E_perp``."""
    ph = np.exp(1j * theta)
    return BasisSet(register, ("E", "E_perp"), SQRT1_2 * np.array([[1, ph], [1, -ph]]))


@dataclass(frozen=True)
class ElementCatalog:
    """Fixed elements of the eraser apparatus."""

    front_pbs: LinearMap
    final_bs: LinearMap
    eom_on: LinearMap
    linear_analyzer: ProjectiveMeasurement = field(repr=False)

    def phase_plate(self, theta: float) -> LinearMap:
        return arm_phase(SYS_PATH, theta, "a")

    def interferometer(self, theta: float) -> LinearMap:
        return self.front_pbs.then(self.phase_plate(theta)).then(self.final_bs)

    def env_analyzer(self, choice: Choice | int) -> ProjectiveMeasurement:
        if Choice(choice) is Choice.ZERO:
            return self.linear_analyzer
        circ = ProjectiveMeasurement.after(self.eom_on, self.linear_analyzer)
        return circ.relabeled({"V": "R", "H": "L"}, name="circular-analyzer")

    def maps(self, theta: float = 0.0) -> dict[str, LinearMap]:
        return {
            "front_pbs": self.front_pbs,
            "phase_plate": self.phase_plate(theta),
            "final_bs": self.final_bs,
            "eom_on": self.eom_on,
            "eom_off": identity_map(ENV),
            "interferometer": self.interferometer(theta),
        }


def make_catalog(bs_reflection_phase: float = pi / 2, validate: bool = True) -> ElementCatalog:
    """Build the element catalog.

    ``bs_reflection_phase`` other than pi/2 gives a non-unitary splitter; it
    exists only for fault injection and requires ``validate=False``.
    """
    front_pbs = LinearMap.from_columns(
        SYS_POL, SYS_PATH, {"H": {"a": 1j}, "V": {"b": 1.0}}, name="front_pbs"
    )
    final_bs = symmetric_bs(SYS_PATH, SYS_PORT, bs_reflection_phase, validate=validate)
    circ = circular_basis(ENV)
    # U = |V><R| + |H><L|
    eom = (np.outer(basis_ket(ENV, "V").amplitudes, circ.vectors[0].conj())
           + np.outer(basis_ket(ENV, "H").amplitudes, circ.vectors[1].conj()))
    eom_on = LinearMap(ENV, ENV, eom, name="eom_on")
    linear = ProjectiveMeasurement.from_basis(
        BasisSet(ENV, ("V", "H"), np.array([[0, 1], [1, 0]])),
        {"V": "D1", "H": "D2"}, name="linear-analyzer",
    )
    return ElementCatalog(front_pbs, final_bs, eom_on, linear)


DEFAULT_CATALOG = make_catalog()


def _cat(catalog: ElementCatalog | None) -> ElementCatalog:
    return DEFAULT_CATALOG if catalog is None else catalog


def build_initial_state() -> Ket:
    """``(|H>_e|V>_s + |V>_e|H>_s)/sqrt2``."""
    return Ket.from_dict((ENV, SYS_POL), {("H", "V"): SQRT1_2, ("V", "H"): SQRT1_2})


def front_stage(state: Ket, theta: float, catalog: ElementCatalog | None = None) -> Ket:
    """Front PBS then the dephasing plate; system register goes H,V -> a,b."""
    cat = _cat(catalog)
    return apply_map(cat.phase_plate(theta), apply_map(cat.front_pbs, state))


def full_eraser_state(theta: float, catalog: ElementCatalog | None = None) -> Ket:
    """Source state propagated through the whole interferometer (env H,V x ports 3,4)."""
    cat = _cat(catalog)
    return apply_map(cat.final_bs, front_stage(build_initial_state(), theta, cat))


def interferometer_transfer(theta: float, catalog: ElementCatalog | None = None) -> LinearMap:
    """``final_bs o phase_plate(theta) o front_pbs`` on the system photon."""
    return _cat(catalog).interferometer(theta)


def circular_route_state(theta: float) -> Ket:
    """Closed-form post-interferometer state written in the circular env basis.

    ``(i cos a |L3> + sin a |R3> - i sin a |L4> + cos a |R4>)/sqrt2`` with
    ``a = theta/2 + pi/4``, expanded back onto env H,V.
    """
    a = wrap_theta(theta) / 2 + pi / 4
    circ = circular_basis(ENV)
    R, L = circ.ket("R"), circ.ket("L")
    p3, p4 = basis_ket(SYS_PORT, "3"), basis_ket(SYS_PORT, "4")
    terms = [
        (1j * np.cos(a), L, p3),
        (np.sin(a), R, p3),
        (-1j * np.sin(a), L, p4),
        (np.cos(a), R, p4),
    ]
    out = None
    for c, e, s in terms:
        t = tensor(e, s).scaled(c * SQRT1_2)
        out = t if out is None else out + t
    return out


def elliptical_decomposition(theta: float) -> Ket:
    """Source state rebuilt as ``(|E>_e|E>_s - |E_perp>_e|E_perp>_s)/sqrt2``."""
    be = elliptical_basis(theta, ENV)
    bs = elliptical_basis(theta, SYS_POL)
    return (tensor(be.ket("E"), bs.ket("E"))
            - tensor(be.ket("E_perp"), bs.ket("E_perp"))).scaled(SQRT1_2)


def elliptical_route_state(theta: float, catalog: ElementCatalog | None = None) -> Ket:
    """Interferometer transfer applied to the elliptical decomposition."""
    return apply_map(interferometer_transfer(theta, catalog), elliptical_decomposition(theta))


def port_entangled_state(theta: float) -> Ket:
    """Closed form ``(i|E>_e|3> + |E_perp>_e|4>)/sqrt2``."""
    be = elliptical_basis(theta, ENV)
    return (tensor(be.ket("E"), basis_ket(SYS_PORT, "3")).scaled(1j)
            + tensor(be.ket("E_perp"), basis_ket(SYS_PORT, "4"))).scaled(SQRT1_2)


def env_analyzer(choice: Choice | int, catalog: ElementCatalog | None = None) -> ProjectiveMeasurement:
    """Choice 0: V -> D1, H -> D2. Choice 1: EOM on, then the same PBS, so R -> D1, L -> D2."""
    return _cat(catalog).env_analyzer(choice)


SYSTEM_DETECTORS = ProjectiveMeasurement.from_basis(
    BasisSet.standard(SYS_PORT), {"3": "D3", "4": "D4"}, name="system-detectors"
)


def system_detectors() -> ProjectiveMeasurement:
    return SYSTEM_DETECTORS


def wheeler_mz(phase: float, second_bs_inserted: bool) -> tuple[float, float]:
    """Detector probabilities (D1, D2) for one photon entering port ``in1``.

    Arm ``a`` carries ``e^{i phase}``. Without the second splitter arm ``a``
    goes to D1 and arm ``b`` to D2. With it, phase 0 sends the photon to D2.
    """
    bs1 = symmetric_bs(WHEELER_IN, WHEELER_PATH)
    state = apply_map(arm_phase(WHEELER_PATH, phase, "a"), apply_map(bs1, basis_ket(WHEELER_IN, "in1")))
    if second_bs_inserted:
        state = apply_map(symmetric_bs(WHEELER_PATH, WHEELER_OUT), state)
    else:
        state = apply_map(
            LinearMap.from_columns(WHEELER_PATH, WHEELER_OUT, {"a": {"1": 1}, "b": {"2": 1}},
                                   name="mirrors"),
            state,
        )
    detectors = ProjectiveMeasurement.from_basis(BasisSet.standard(WHEELER_OUT), {"1": "D1", "2": "D2"})
    return (outcome_probability(state, detectors, "D1"), outcome_probability(state, detectors, "D2"))


__all__ = [
    "ApparatusParams",
    "Choice",
    "DEFAULT_CATALOG",
    "ENV",
    "ElementCatalog",
    "SYS_PATH",
    "SYS_POL",
    "SYS_PORT",
    "alpha",
    "build_initial_state",
    "circular_basis",
    "circular_route_state",
    "elliptical_basis",
    "elliptical_decomposition",
    "elliptical_route_state",
    "env_analyzer",
    "front_stage",
    "full_eraser_state",
    "interferometer_transfer",
    "make_catalog",
    "port_entangled_state",
    "symmetric_bs",
    "system_detectors",
    "wheeler_mz",
    "wrap_theta",
]
