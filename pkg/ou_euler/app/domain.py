# domain.py
"""
Value types shared by the spectral services.
Multi-indices, Gaussian parameters, Galerkin bases, spectral fields and the
records produced by sampling, time integration and particle tracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from .services.errors import InvalidArgumentError


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Pair (k1, k2) indexing a 2D Hermite mode; ordering is lexicographic."""
    k1: int
    k2: int

    def __post_init__(self):
        if int(self.k1) != self.k1 or int(self.k2) != self.k2:
            raise InvalidArgumentError(f"multi-index entries must be integers, got ({self.k1}, {self.k2})")
        if self.k1 < 0 or self.k2 < 0:
            raise InvalidArgumentError(f"multi-index entries must be non-negative, got ({self.k1}, {self.k2})")

    @property
    def order(self) -> int:
        """|k| = k1 + k2, the weight in the eigenvalue -c|k|."""
        return self.k1 + self.k2

    def __iter__(self) -> Iterator[int]:
        yield self.k1
        yield self.k2

    def label(self) -> str:
        return f"{self.k1}_{self.k2}"


def as_index(k) -> MultiIndex:
    if isinstance(k, MultiIndex):
        return k
    k1, k2 = k
    return MultiIndex(int(k1), int(k2))


class NormalizationMode(str, Enum):
    PAPER = "paper"            # (1/2pi) e^{-c|x|^2/2}, total mass 1/c
    NORMALIZED = "normalized"  # (c/2pi) e^{-c|x|^2/2}, a probability density


@dataclass(frozen=True)
class GaussianParams:
    c: float
    normalization_mode: NormalizationMode = NormalizationMode.NORMALIZED

    def __post_init__(self):
        if not math.isfinite(self.c) or not (0.0 < self.c < 1.0):
            raise InvalidArgumentError(f"c must lie in (0, 1), got {self.c}")
        object.__setattr__(self, "normalization_mode", NormalizationMode(self.normalization_mode))

    def normalized(self) -> "GaussianParams":
        return GaussianParams(self.c, NormalizationMode.NORMALIZED)


@dataclass(frozen=True)
class QuadratureRule:
    """1D Gauss rule for the weight e^{-c x^2/2}; 2D integrals use its tensor square."""
    nodes: np.ndarray
    weights: np.ndarray
    c: float
    degree: int

    def integrate(self, values: np.ndarray) -> Any:
        return np.tensordot(self.weights, values, axes=(0, 0))

    def grid(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tensor grid (X1, X2, W) with W the product weights."""
        x1, x2 = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        w = np.outer(self.weights, self.weights)
        return x1, x2, w


@dataclass
class GalerkinBasis:
    """Ordered set of multi-indices spanning the Galerkin space."""
    indices: Tuple[MultiIndex, ...]
    max_index: int
    shape: str = "box"
    _lookup: Dict[MultiIndex, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.indices = tuple(sorted(set(as_index(k) for k in self.indices)))
        self._lookup = {k: i for i, k in enumerate(self.indices)}

    @classmethod
    def box(cls, max_index: int) -> "GalerkinBasis":
        if max_index < 0:
            raise InvalidArgumentError(f"max_index must be non-negative, got {max_index}")
        return cls(
            tuple(MultiIndex(a, b) for a in range(max_index + 1) for b in range(max_index + 1)),
            max_index,
        )

    @property
    def d(self) -> int:
        return len(self.indices)

    @property
    def k1(self) -> np.ndarray:
        return np.array([k.k1 for k in self.indices], dtype=np.int64)

    @property
    def k2(self) -> np.ndarray:
        return np.array([k.k2 for k in self.indices], dtype=np.int64)

    @property
    def orders(self) -> np.ndarray:
        return self.k1 + self.k2

    def position(self, k) -> int:
        k = as_index(k)
        if k not in self._lookup:
            raise InvalidArgumentError(f"mode {tuple(k)} is not in the basis (N={self.max_index})")
        return self._lookup[k]

    def __contains__(self, k) -> bool:
        return as_index(k) in self._lookup

    def __len__(self) -> int:
        return self.d

    def __eq__(self, other) -> bool:
        return isinstance(other, GalerkinBasis) and self.indices == other.indices

    def __hash__(self) -> int:
        return hash(self.indices)


@dataclass
class SpectralField:
    """Stream function phi = sum_k coeffs[k] H_k^c over a basis."""
    basis: GalerkinBasis
    coeffs: np.ndarray
    c: float

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.basis.d,):
            raise InvalidArgumentError(
                f"expected {self.basis.d} coefficients, got shape {self.coeffs.shape}"
            )

    @classmethod
    def zeros(cls, basis: GalerkinBasis, c: float) -> "SpectralField":
        return cls(basis, np.zeros(basis.d, dtype=np.complex128), c)

    @classmethod
    def from_modes(cls, basis: GalerkinBasis, c: float, modes: Dict[Tuple[int, int], complex]) -> "SpectralField":
        out = cls.zeros(basis, c)
        for k, value in modes.items():
            out.coeffs[basis.position(k)] = value
        return out

    def coefficient(self, k) -> complex:
        return complex(self.coeffs[self.basis.position(k)])

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.basis, np.array(coeffs, dtype=np.complex128), self.c)

    def embed(self, basis: GalerkinBasis) -> "SpectralField":
        """Zero-pad (or restrict) onto another basis."""
        out = SpectralField.zeros(basis, self.c)
        for i, k in enumerate(self.basis.indices):
            if k in basis:
                out.coeffs[basis.position(k)] = self.coeffs[i]
        return out

    def _check(self, other: "SpectralField"):
        if other.basis != self.basis or other.c != self.c:
            raise InvalidArgumentError("fields live on different bases or Gaussian scales")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass
class InteractionTable:
    """
    Sparse triadic coefficients A(p, q, k) over a basis.
    Only the orientation |q| < |p| is stored; A(q, p, k) = -A(p, q, k).
    """
    basis: GalerkinBasis
    p_idx: np.ndarray
    q_idx: np.ndarray
    k_idx: np.ndarray
    values: np.ndarray
    _lookup: Optional[Dict[Tuple[int, int, int], float]] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def entries(self) -> Iterator[Tuple[MultiIndex, MultiIndex, MultiIndex, float]]:
        idx = self.basis.indices
        for p, q, k, v in zip(self.p_idx, self.q_idx, self.k_idx, self.values):
            yield idx[p], idx[q], idx[k], float(v)

    def get(self, p, q, k) -> float:
        if self._lookup is None:
            self._lookup = {
                (int(a), int(b), int(c)): float(v)
                for a, b, c, v in zip(self.p_idx, self.q_idx, self.k_idx, self.values)
            }
        key = (self.basis.position(p), self.basis.position(q), self.basis.position(k))
        if key in self._lookup:
            return self._lookup[key]
        reverse = self._lookup.get((key[1], key[0], key[2]))
        return -reverse if reverse is not None else 0.0


@dataclass
class FieldContext:
    basis: GalerkinBasis
    table: InteractionTable
    params: GaussianParams
    gamma: float
    _operators: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.table.basis != self.basis:
            raise InvalidArgumentError("interaction table was built on a different basis")
        if not (self.gamma > 0):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")

    @property
    def c(self) -> float:
        return self.params.c


@dataclass(frozen=True)
class MeasureParams:
    gamma: float
    params: GaussianParams
    basis: GalerkinBasis
    seed: int = 0
    real_mode: bool = False

    def __post_init__(self):
        if not (self.gamma > 0):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")


@dataclass
class SampleBatch:
    basis: GalerkinBasis
    c: float
    coeffs: np.ndarray  # (count, d)
    seed_path: Dict[str, Any]

    def __len__(self) -> int:
        return int(self.coeffs.shape[0])

    @property
    def fields(self) -> List[SpectralField]:
        return [SpectralField(self.basis, row, self.c) for row in self.coeffs]


@dataclass
class Trajectory:
    basis: GalerkinBasis
    c: float
    times: np.ndarray
    coeffs: np.ndarray        # (len(times), d)
    div_integral: np.ndarray  # (len(times),)
    integrator_stats: Dict[str, Any]
    dense: Optional[Callable[[float], Tuple[np.ndarray, float]]] = field(default=None, repr=False)

    @property
    def states(self) -> List[SpectralField]:
        return [SpectralField(self.basis, row, self.c) for row in self.coeffs]

    def state_at(self, t: float) -> SpectralField:
        if self.dense is None:
            if np.isclose(t, self.times[0]):
                return SpectralField(self.basis, self.coeffs[0], self.c)
            raise InvalidArgumentError("trajectory has no dense output")
        coeffs, _ = self.dense(t)
        return SpectralField(self.basis, coeffs, self.c)

    @property
    def final(self) -> SpectralField:
        return SpectralField(self.basis, self.coeffs[-1], self.c)


@dataclass
class CharPath:
    times: np.ndarray
    points: np.ndarray  # (len(times), 2)
    initial_point: Tuple[float, float]


@dataclass
class VorticityData:
    """Bounded, integrable vorticity rho^c * omega given as a vectorized callable."""
    name: str
    omega: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    parameters: Dict[str, float] = field(default_factory=dict)
    radial_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
