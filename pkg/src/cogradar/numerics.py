"""Small dense linear algebra and seeded random sampling.

Everything in the simulator works on matrices no larger than 4x4, so the
routines here are written for that regime: plain float64 ndarrays, explicit
shape checks, and a hand-rolled Cholesky so that failure modes (non-SPD
input, indefinite covariance) surface as typed errors instead of silently
producing garbage.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionError",
    "SingularMatrixError",
    "IndefiniteCovarianceError",
    "mat_mul",
    "invert_spd",
    "cholesky_spd",
    "cholesky_psd",
    "sample_gaussian",
    "RngStream",
    "splitmix64",
]


class DimensionError(ValueError):
    """Operand shapes are inconsistent."""


class SingularMatrixError(ArithmeticError):
    """Matrix is not symmetric positive definite (Cholesky pivot <= 0)."""


class IndefiniteCovarianceError(ArithmeticError):
    """Covariance has a significantly negative eigen-direction."""


def as_mat(a) -> np.ndarray:
    """Coerce to a float64 2-D array without copying when possible."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def mat_mul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} x {b.shape}")
    return a @ b


def cholesky_spd(a) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises SingularMatrixError as soon as a pivot is <= 0, which is the
    SPD test used throughout (no eigen decomposition for these tiny sizes).
    """
    a = as_mat(a)
    n, m = a.shape
    if n != m:
        raise DimensionError(f"matrix is {n}x{m}, expected square")
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0:
            raise SingularMatrixError(f"pivot {d:g} at row {j}: matrix not SPD")
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def _solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution L x = b for lower-triangular L (b may be a matrix)."""
    n = L.shape[0]
    x = np.array(b, dtype=float)
    for i in range(n):
        x[i] = (x[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def invert_spd(a) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky.

    A @ invert_spd(A) equals the identity to roughly 1e-12 for the
    well-scaled matrices the filters produce.
    """
    L = cholesky_spd(a)
    n = L.shape[0]
    # L L^T X = I  =>  first Y = L^-1, then X = L^-T Y = (L^-1)^T (L^-1)
    y = _solve_lower(L, np.eye(n))
    return y.T @ y


def cholesky_psd(a, rel_tol: float = 1e-10) -> np.ndarray:
    """Cholesky-type factor of a positive *semi*definite matrix.

    Pivots within rel_tol of zero (relative to the largest diagonal entry)
    are flattened to an exactly zero column, so rank-deficient covariances
    (a zero matrix, the rank-one blocks of the motion noise) factor cleanly.
    A pivot below -rel_tol * scale raises IndefiniteCovarianceError.
    """
    a = as_mat(a)
    n, m = a.shape
    if n != m:
        raise DimensionError(f"matrix is {n}x{m}, expected square")
    scale = max(float(np.max(np.abs(np.diag(a)))), 1.0)
    tol = rel_tol * scale
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d < -tol:
            raise IndefiniteCovarianceError(f"pivot {d:g} at row {j}")
        if d <= tol:
            continue  # zero column: direction carries no variance
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def sample_gaussian(mean, cov, rng: "RngStream") -> np.ndarray:
    """Draw one sample from N(mean, cov) with cov symmetric PSD."""
    mean = np.asarray(mean, dtype=float)
    L = cholesky_psd(cov)
    if mean.shape[0] != L.shape[0]:
        raise DimensionError(f"mean length {mean.shape[0]} vs cov {L.shape}")
    return mean + L @ rng.standard_normals(L.shape[0])


_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def splitmix64(seed: int, index: int) -> int:
    """Derive a child seed from (seed, index); documented stream-splitting rule.

    One splitmix64 output step applied to seed + (index + 1) * gamma.
    Deterministic, collision-free for the handful of children we derive.
    """
    z = (int(seed) + (int(index) + 1) * _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngStream:
    """Seeded random stream: identical seed gives an identical draw sequence.

    Thin wrapper over numpy's PCG64 generator. Single-owner by convention;
    state can be captured and restored for exact checkpoint resume.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, index: int) -> "RngStream":
        """Independent stream derived via splitmix64(seed, index)."""
        return RngStream(splitmix64(self.seed, index))

    def standard_normals(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        return float(self._gen.normal(mean, std))

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self._gen.uniform(low, high))

    def uniforms(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def normals(self, mean: float, std: float, size) -> np.ndarray:
        return self._gen.normal(mean, std, size=size)

    def random(self) -> float:
        return float(self._gen.random())

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def get_state(self) -> dict:
        return self._gen.bit_generator.state

    def set_state(self, state: dict) -> None:
        self._gen.bit_generator.state = state
