"""Exact 2x2 symmetric-matrix algebra for the continuum gain/loss model.

Every 2x2 object in the continuum model (A0, its exponential, the loss
matrix T, the vacuum sum X and the detection matrix P) is real symmetric,
so matrices are stored as three numbers and the exponential, the Sylvester
solve and the quadratic forms are evaluated in closed form.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from scipy.special import exprel

from .errors import DomainError, SingularSystem
from .models import MediumParams
from .utils import setup_logging


logger = setup_logging(__name__)

SINHC_SERIES_CUTOFF = 1e-4
SINHC_SLOPE_SERIES_CUTOFF = 1e-2
SINGULAR_DET_TOLERANCE = 1e-14
CHI_CLAMP = 1.0 - 1e-15


@dataclass(frozen=True)
class SymMat2:
    """Real symmetric 2x2 matrix [[a11, a12], [a12, a22]]."""

    a11: float
    a12: float
    a22: float

    def __post_init__(self):
        for name in ("a11", "a12", "a22"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"SymMat2.{name} must be finite, got {getattr(self, name)!r}")

    @classmethod
    def zero(cls) -> 'SymMat2':
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def identity(cls) -> 'SymMat2':
        return cls(1.0, 0.0, 1.0)

    @classmethod
    def diag(cls, d1: float, d2: float) -> 'SymMat2':
        return cls(float(d1), 0.0, float(d2))

    @classmethod
    def from_array(cls, array) -> 'SymMat2':
        """Symmetric part of a 2x2 array-like."""
        arr = np.asarray(array, dtype=float)
        if arr.shape != (2, 2):
            raise DomainError(f"expected a 2x2 array, got shape {arr.shape}")
        return cls(float(arr[0, 0]), 0.5 * float(arr[0, 1] + arr[1, 0]), float(arr[1, 1]))

    def to_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def __add__(self, other: 'SymMat2') -> 'SymMat2':
        return SymMat2(self.a11 + other.a11, self.a12 + other.a12, self.a22 + other.a22)

    def __sub__(self, other: 'SymMat2') -> 'SymMat2':
        return SymMat2(self.a11 - other.a11, self.a12 - other.a12, self.a22 - other.a22)

    def __neg__(self) -> 'SymMat2':
        return SymMat2(-self.a11, -self.a12, -self.a22)

    def scaled(self, factor: float) -> 'SymMat2':
        return SymMat2(factor * self.a11, factor * self.a12, factor * self.a22)

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a12

    def max_abs(self) -> float:
        return max(abs(self.a11), abs(self.a12), abs(self.a22))

    def apply(self, v: Tuple[float, float]) -> Tuple[float, float]:
        """Matrix-vector product."""
        return (self.a11 * v[0] + self.a12 * v[1], self.a12 * v[0] + self.a22 * v[1])

    def quad(self, v: Tuple[float, float]) -> float:
        """Quadratic form v^T M v."""
        x, y = v
        return self.a11 * x * x + 2.0 * self.a12 * x * y + self.a22 * y * y

    def sandwich(self, middle: 'SymMat2') -> 'SymMat2':
        """self @ middle @ self, symmetric when both factors are."""
        m = self.to_array()
        return SymMat2.from_array(m @ middle.to_array() @ m)

    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""
        return np.linalg.eigh(self.to_array())


class Splitting(NamedTuple):
    """A = mean*I + D with D traceless and D^2 = xi^2 * I."""

    mean: float
    half_diff: float
    xi: float


@dataclass(frozen=True)
class ClosedFormAux:
    """Auxiliary parameters (xi, chi) of the closed-form noise figures."""

    xi: float
    chi: float

    @classmethod
    def from_medium(cls, m: MediumParams) -> 'ClosedFormAux':
        # Shares sym_exp's splitting so xi agrees bit for bit.
        split = split_traceless(a0_matrix(m))
        if split.xi == 0.0:
            return cls(xi=0.0, chi=0.0)
        ratio = min(max(split.half_diff / split.xi, -CHI_CLAMP), CHI_CLAMP)
        return cls(xi=split.xi, chi=math.atanh(ratio))


def sinhc(x: float) -> float:
    """sinh(x)/x with the removable singularity at 0 filled in."""
    if abs(x) < SINHC_SERIES_CUTOFF:
        x2 = x * x
        return 1.0 + x2 / 6.0 + x2 * x2 / 120.0
    return math.sinh(x) / x


def sinhc_slope(x: float) -> float:
    """sinhc'(x)/x = (x cosh x - sinh x)/x^3, finite at 0."""
    if abs(x) < SINHC_SLOPE_SERIES_CUTOFF:
        x2 = x * x
        return 1.0 / 3.0 + x2 / 30.0 + x2 * x2 / 840.0
    return (x * math.cosh(x) - math.sinh(x)) / (x * x * x)


def split_traceless(a: SymMat2) -> Splitting:
    """Split A into its trace part and a traceless part."""
    mean = 0.5 * (a.a11 + a.a22)
    half_diff = 0.5 * (a.a11 - a.a22)
    return Splitting(mean=mean, half_diff=half_diff, xi=math.hypot(a.a12, half_diff))


def a0_matrix(m: MediumParams) -> SymMat2:
    """Generator A0 of the continuum limit: A^N -> exp(A0)."""
    return SymMat2(0.5 * math.log(m.ta), m.S, 0.5 * math.log(m.tb))


def sym_exp(a: SymMat2) -> SymMat2:
    """Exact exponential of a symmetric 2x2 matrix.

    With A = mean*I + D and D^2 = xi^2 I the series collapses to
    exp(A) = e^mean (cosh(xi) I + sinhc(xi) D).
    """
    split = split_traceless(a)
    scale = math.exp(split.mean)
    c = math.cosh(split.xi)
    k = sinhc(split.xi)
    return SymMat2(
        scale * (c + k * split.half_diff),
        scale * k * a.a12,
        scale * (c - k * split.half_diff),
    )


def sylvester_system(a0: SymMat2) -> np.ndarray:
    """3x3 matrix of A0 X + X A0 acting on (x11, x12, x22)."""
    a, b, c = a0.a11, a0.a12, a0.a22
    return np.array([
        [2.0 * a, 2.0 * b, 0.0],
        [b, a + c, b],
        [0.0, 2.0 * b, 2.0 * c],
    ])


def sylvester_solve(a0: SymMat2, rhs: SymMat2) -> SymMat2:
    """Solve A0 X + X A0 = R for symmetric X.

    Args:
        a0: Coefficient matrix
        rhs: Symmetric right-hand side

    Returns:
        Symmetric solution X

    Raises:
        SingularSystem: two eigenvalues of A0 sum to zero and R is nonzero
    """
    system = sylvester_system(a0)
    scale = float(np.max(np.abs(system)))
    # det = 4 tr(A0) det(A0) = product of the eigenvalue sums 2l1, 2l2, l1+l2
    det = 4.0 * a0.trace * a0.det
    if scale == 0.0 or abs(det) < SINGULAR_DET_TOLERANCE * scale ** 3:
        if rhs.max_abs() == 0.0:
            return SymMat2.zero()
        raise SingularSystem(
            f"Sylvester system singular (det={det:.3e}, scale={scale:.3e}); "
            "eigenvalues of A0 sum to zero"
        )
    x11, x12, x22 = np.linalg.solve(system, np.array([rhs.a11, rhs.a12, rhs.a22]))
    return SymMat2(float(x11), float(x12), float(x22))


def loss_matrix(m: MediumParams) -> SymMat2:
    """T = diag(-log Ta, -log Tb)."""
    return SymMat2.diag(-math.log(m.ta), -math.log(m.tb))


def vacuum_rhs(m: MediumParams) -> SymMat2:
    """Right-hand side exp(A0) T exp(A0) - T of the vacuum-sum equation."""
    t = loss_matrix(m)
    return sym_exp(a0_matrix(m)).sandwich(t) - t


def vacuum_sum_eigen(m: MediumParams) -> SymMat2:
    """Vacuum sum X = int_0^1 exp(A0 u) T exp(A0 u) du in the eigenbasis of A0.

    Finite for every medium, including the resonances where the Sylvester
    system is singular.
    """
    lam, vecs = a0_matrix(m).eigh()
    t_eig = vecs.T @ loss_matrix(m).to_array() @ vecs
    weights = exprel(lam[:, None] + lam[None, :])
    return SymMat2.from_array(vecs @ (weights * t_eig) @ vecs.T)


def vacuum_sum(m: MediumParams) -> SymMat2:
    """Continuum sum X of all injected vacuum contributions inside the medium."""
    if m.lossless:
        return SymMat2.zero()
    try:
        return sylvester_solve(a0_matrix(m), vacuum_rhs(m))
    except SingularSystem as e:
        logger.debug(f"Falling back to eigenbasis vacuum sum for {m}: {e}")
        return vacuum_sum_eigen(m)

