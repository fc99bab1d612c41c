"""
Complex vector algebra over named registers with labeled bases.

A :class:`Ket` is a flat amplitude vector over the row-major product of its
registers. Registers keep their name across optical stages while their labels
change (``s: H,V -> a,b -> 3,4``), so the layout always says which physical
stage a state belongs to.

All values are immutable; every operation returns a new object.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constants import TOL


class HilbertError(ValueError):
    """Base class for layout and construction errors."""


class LayoutConflictError(HilbertError):
    pass


class MissingRegisterError(HilbertError):
    pass


class NotIsometricError(HilbertError):
    pass


class NotOrthonormalError(HilbertError):
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    if not np.all(np.isfinite(array)):
        raise HilbertError("amplitudes must be finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Register:
    """A named subsystem with an ordered list of basis labels."""

    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        if len(self.labels) < 2:
            raise HilbertError(f"register {self.name!r} needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise HilbertError(f"register {self.name!r} has duplicate labels")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise KeyError(f"{label!r} is not a label of register {self.name!r}") from None

    def relabel(self, labels: Sequence[str]) -> "Register":
        return Register(self.name, tuple(labels))


@dataclass(frozen=True, eq=False)
class Ket:
    """Pure state over an ordered layout of registers."""

    layout: tuple[Register, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        layout = tuple(self.layout)
        names = [r.name for r in layout]
        if len(set(names)) != len(names):
            raise LayoutConflictError(f"duplicate register names in layout {names}")
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        expected = int(np.prod([r.dim for r in layout])) if layout else 1
        if amps.size != expected:
            raise HilbertError(f"expected {expected} amplitudes, got {amps.size}")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_dict(cls, layout: Sequence[Register], amplitudes: Mapping) -> "Ket":
        """Build a ket from ``{label tuple: amplitude}``; missing keys are zero.

        For a single-register layout a bare label may be used as the key.
        """
        layout = tuple(layout)
        dims = [r.dim for r in layout]
        arr = np.zeros(dims, dtype=complex)
        for key, value in amplitudes.items():
            if not isinstance(key, tuple):
                key = (key,)
            if len(key) != len(layout):
                raise HilbertError(f"label tuple {key} does not match layout")
            idx = tuple(r.index(lab) for r, lab in zip(layout, key))
            arr[idx] += value
        return cls(layout, arr.reshape(-1))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.layout)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.layout)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingRegisterError(f"register {name!r} not in layout {self.names}") from None

    def register(self, name: str) -> Register:
        return self.layout[self.axis(name)]

    def labels(self) -> list[tuple[str, ...]]:
        """Composite label tuples in storage (row-major) order."""
        return list(itertools.product(*(r.labels for r in self.layout)))

    def amplitude(self, *labels: str) -> complex:
        idx = tuple(r.index(lab) for r, lab in zip(self.layout, labels))
        return complex(self.tensor_view()[idx])

    def as_dict(self, atol: float = 0.0) -> dict[tuple[str, ...], complex]:
        return {
            key: complex(a)
            for key, a in zip(self.labels(), self.amplitudes)
            if abs(a) > atol
        }

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "Ket":
        n = self.norm()
        if n == 0.0:
            raise HilbertError("cannot normalize the zero vector")
        return Ket(self.layout, self.amplitudes / n)

    def is_normalized(self, tol: float = TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def scaled(self, factor: complex) -> "Ket":
        return Ket(self.layout, self.amplitudes * factor)

    def __add__(self, other: "Ket") -> "Ket":
        if other.layout != self.layout:
            raise LayoutConflictError("cannot add kets with different layouts")
        return Ket(self.layout, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "Ket") -> "Ket":
        return self + other.scaled(-1)

    def __rmul__(self, factor: complex) -> "Ket":
        return self.scaled(factor)

    def inner(self, other: "Ket") -> complex:
        """``<self|other>``."""
        if other.layout != self.layout:
            raise LayoutConflictError(
                f"layouts differ: {self.names} vs {other.names} or label mismatch"
            )
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def permuted(self, names: Sequence[str]) -> "Ket":
        """Same state with registers reordered to ``names``."""
        order = [self.axis(n) for n in names]
        if sorted(order) != list(range(len(self.layout))):
            raise LayoutConflictError(f"{names} is not a permutation of {self.names}")
        data = np.transpose(self.tensor_view(), order)
        return Ket(tuple(self.layout[i] for i in order), data.reshape(-1))


def basis_ket(register: Register, label: str) -> Ket:
    vec = np.zeros(register.dim, dtype=complex)
    vec[register.index(label)] = 1.0
    return Ket((register,), vec)


def ket(register: Register, amplitudes: Mapping[str, complex]) -> Ket:
    """Single-register ket from ``{label: amplitude}``."""
    return Ket.from_dict((register,), amplitudes)


def tensor(left: Ket, right: Ket) -> Ket:
    clash = set(left.names) & set(right.names)
    if clash:
        raise LayoutConflictError(f"registers {sorted(clash)} appear on both sides")
    return Ket(left.layout + right.layout, np.kron(left.amplitudes, right.amplitudes))


def tensor_all(kets: Iterable[Ket]) -> Ket:
    kets = list(kets)
    out = kets[0]
    for k in kets[1:]:
        out = tensor(out, k)
    return out


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Isometry ``input_register -> output_register``.

    ``matrix[i, j]`` is the amplitude of output label ``i`` for input label ``j``.
    Non-isometric matrices are rejected unless ``validate=False`` (used only
    to inject faults into the verification suite).
    """

    input_register: Register
    output_register: Register
    matrix: np.ndarray = field(repr=False)
    name: str = ""
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        shape = (self.output_register.dim, self.input_register.dim)
        if m.shape != shape:
            raise HilbertError(f"{self.name or 'map'}: matrix shape {m.shape}, expected {shape}")
        if self.input_register.name != self.output_register.name:
            raise HilbertError("a map may relabel a register but not rename it")
        object.__setattr__(self, "matrix", m)
        if self.validate:
            dev = self.isometry_deviation()
            if dev > TOL:
                raise NotIsometricError(
                    f"{self.name or 'map'} is not an isometry (max |M^dag M - 1| = {dev:.3g})"
                )

    @classmethod
    def from_columns(cls, input_register: Register, output_register: Register,
                     columns: Mapping[str, Mapping[str, complex]], name: str = "",
                     validate: bool = True) -> "LinearMap":
        """Build from ``{input label: {output label: amplitude}}``."""
        m = np.zeros((output_register.dim, input_register.dim), dtype=complex)
        for in_label, image in columns.items():
            j = input_register.index(in_label)
            for out_label, value in image.items():
                m[output_register.index(out_label), j] += value
        return cls(input_register, output_register, m, name=name, validate=validate)

    @property
    def is_square(self) -> bool:
        return self.matrix.shape[0] == self.matrix.shape[1]

    def isometry_deviation(self) -> float:
        gram = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    def unitarity_deviation(self) -> float:
        """max |M^dag M - 1| and, for square maps, max |M M^dag - 1|."""
        dev = self.isometry_deviation()
        if self.is_square:
            outer = self.matrix @ self.matrix.conj().T
            dev = max(dev, float(np.max(np.abs(outer - np.eye(outer.shape[0])))))
        return dev

    def then(self, other: "LinearMap") -> "LinearMap":
        """Composition ``other o self``."""
        if other.input_register != self.output_register:
            raise LayoutConflictError(
                f"cannot compose {self.name}: output {self.output_register} "
                f"!= input {other.input_register}"
            )
        name = f"{other.name}*{self.name}" if self.name and other.name else ""
        return LinearMap(self.input_register, other.output_register,
                         other.matrix @ self.matrix, name=name,
                         validate=self.validate and other.validate)

    def __call__(self, state: Ket) -> Ket:
        return apply_map(self, state)


def identity_map(register: Register) -> LinearMap:
    return LinearMap(register, register, np.eye(register.dim), name="identity")


def apply_map(map: LinearMap, state: Ket) -> Ket:
    ax = state.axis(map.input_register.name)
    if state.layout[ax] != map.input_register:
        raise MissingRegisterError(
            f"state register {state.layout[ax]} does not match map input {map.input_register}"
        )
    data = np.tensordot(map.matrix, state.tensor_view(), axes=([1], [ax]))
    data = np.moveaxis(data, 0, ax)
    layout = state.layout[:ax] + (map.output_register,) + state.layout[ax + 1:]
    return Ket(layout, data.reshape(-1))


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Orthonormal basis of one register with outcome labels.

    ``vectors[k]`` holds the components of basis vector ``labels[k]`` in the
    register's own label basis.
    """

    register: Register
    labels: tuple[str, ...]
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        vecs = _frozen(np.atleast_2d(self.vectors))
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "vectors", vecs)
        if vecs.shape != (self.register.dim, self.register.dim) or len(self.labels) != self.register.dim:
            raise NotOrthonormalError(
                f"basis needs {self.register.dim} vectors of length {self.register.dim}"
            )
        if len(set(self.labels)) != len(self.labels):
            raise NotOrthonormalError("duplicate basis labels")
        dev = orthonormality_deviation(vecs)
        if dev > TOL:
            raise NotOrthonormalError(f"basis vectors not orthonormal (deviation {dev:.3g})")

    @classmethod
    def from_kets(cls, items: Sequence[tuple[str, Ket]]) -> "BasisSet":
        registers = {k.layout for _, k in items}
        if len(registers) != 1 or len(next(iter(registers))) != 1:
            raise NotOrthonormalError("basis kets must all live on the same single register")
        (register,) = next(iter(registers))
        return cls(register, tuple(l for l, _ in items), np.array([k.amplitudes for _, k in items]))

    @classmethod
    def standard(cls, register: Register) -> "BasisSet":
        return cls(register, register.labels, np.eye(register.dim))

    def ket(self, label: str) -> Ket:
        return Ket((self.register,), self.vectors[self.labels.index(label)])

    def __iter__(self):
        return iter((l, self.ket(l)) for l in self.labels)


def orthonormality_deviation(vectors: np.ndarray) -> float:
    """max |<v_i|v_j> - delta_ij| over the rows of ``vectors``."""
    vectors = np.atleast_2d(vectors)
    gram = vectors.conj() @ vectors.T
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


@dataclass(frozen=True, eq=False)
class BasisExpansion:
    """Coefficients of a state with one register rewritten in a new basis.

    Keys are ``(outcome label, *remaining labels)`` with the remaining labels
    in layout order.
    """

    basis: BasisSet
    layout: tuple[Register, ...]
    coefficients: np.ndarray = field(repr=False)  # measured axis moved first

    @property
    def remaining(self) -> tuple[Register, ...]:
        return tuple(r for r in self.layout if r.name != self.basis.register.name)

    def keys(self) -> list[tuple[str, ...]]:
        return list(itertools.product(self.basis.labels, *(r.labels for r in self.remaining)))

    def as_dict(self) -> dict[tuple[str, ...], complex]:
        return {k: complex(c) for k, c in zip(self.keys(), self.coefficients.reshape(-1))}

    def __getitem__(self, key: tuple[str, ...]) -> complex:
        idx = (self.basis.labels.index(key[0]),) + tuple(
            r.index(l) for r, l in zip(self.remaining, key[1:])
        )
        return complex(self.coefficients[idx])

    def sum_sq(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def reconstruct(self) -> Ket:
        ax = [r.name for r in self.layout].index(self.basis.register.name)
        # sum_k c_k,... |b_k>: contract the outcome axis with the basis vectors
        data = np.tensordot(self.basis.vectors.T, self.coefficients, axes=([1], [0]))
        data = np.moveaxis(data, 0, ax)
        return Ket(self.layout, data.reshape(-1))


def express_in(state: Ket, basis: BasisSet) -> BasisExpansion:
    ax = state.axis(basis.register.name)
    if state.layout[ax] != basis.register:
        raise MissingRegisterError(
            f"basis acts on {basis.register}, state has {state.layout[ax]}"
        )
    coeffs = np.tensordot(basis.vectors.conj(), state.tensor_view(), axes=([1], [ax]))
    coeffs.setflags(write=False)
    return BasisExpansion(basis, state.layout, coeffs)


def overlap(x: Ket, y: Ket) -> float:
    """|<x|y>|."""
    return abs(x.inner(y))


def equal_up_to_global_phase(x: Ket, y: Ket, tol: float = TOL) -> bool:
    return overlap(x, y) >= 1.0 - tol
