"""Dense linear-algebra kernels and seeded samplers.

Everything here is deterministic: the factorizations carry fixed sign
conventions and the samplers are pure functions of their ``RandomStream``
argument, so any result can be reproduced bit-for-bit from (seed, stream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One splitmix64 mixing step; a bijection on 64-bit words."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RandomStream:
    """Seeded, splittable source of randomness.

    Identical (seed, stream) pairs produce identical sample sequences on any
    platform and under any thread count.  Parallel work never shares a
    stream; it derives disjoint children with :meth:`child`.
    """

    seed: int
    stream: int = 0

    def child(self, *indices: int) -> "RandomStream":
        """Derive an independent stream keyed by an index path."""
        s = self.stream
        for ix in indices:
            if ix < 0:
                raise ValidationError("stream indices must be non-negative")
            s = _splitmix64(s ^ _splitmix64((ix + 1) & _MASK64))
        return RandomStream(self.seed, s)

    def generator(self) -> np.random.Generator:
        """Fresh counter-based generator; repeated calls restart the stream."""
        key = [self.seed & _MASK64, self.stream & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))


def check_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite, float64, C-ordered 2-D array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got {out.ndim}-D")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return out


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = u @ diag(s) @ v.T`` with orthonormal u, v columns."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def thin_svd(a) -> SvdResult:
    """Thin SVD with a reproducible sign convention.

    In every left-singular vector the entry of largest magnitude (lowest
    index on ties) is made non-negative; the paired right vector is flipped
    with it, so the reconstruction is unchanged.
    """
    a = check_matrix(a, "svd input")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge on a {a.shape[0]}x{a.shape[1]} matrix"
        ) from exc
    v = vt.T
    if u.shape[1]:
        pivot = np.abs(u).argmax(axis=0)
        signs = np.sign(u[pivot, np.arange(u.shape[1])])
        signs[signs == 0] = 1.0
        u = u * signs
        v = v * signs
    return SvdResult(np.ascontiguousarray(u), s, np.ascontiguousarray(v))


def cholesky_factor(c) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == c``.

    Near-semidefinite inputs are retried with an escalating ridge jitter,
    starting at 1e-10 * mean diagonal and growing tenfold up to 1e-6.
    """
    c = check_matrix(c, "covariance")
    n = c.shape[0]
    if c.shape[1] != n:
        raise ValidationError(f"covariance must be square, got {c.shape}")
    sym_err = np.max(np.abs(c - c.T)) if n else 0.0
    if sym_err > 1e-12 * max(1.0, float(np.max(np.abs(c))) if n else 1.0):
        raise ValidationError(f"covariance not symmetric (max asymmetry {sym_err:.3e})")
    base = float(np.trace(c)) / n if n else 0.0
    last = None
    for jitter in [0.0] + [base * 10.0**e for e in range(-10, -5)]:
        try:
            shifted = c if jitter == 0.0 else c + jitter * np.eye(n)
            return scipy.linalg.cholesky(shifted, lower=True)
        except scipy.linalg.LinAlgError as exc:
            last = exc
    raise NumericalError(f"matrix is not positive semidefinite: {last}")


def sample_mvn(mean, chol, rs: RandomStream, count: int) -> np.ndarray:
    """``count`` i.i.d. rows from N(mean, chol @ chol.T)."""
    mean = np.asarray(mean, dtype=np.float64).ravel()
    chol = check_matrix(chol, "cholesky factor")
    dim = mean.shape[0]
    if chol.shape != (dim, dim):
        raise ValidationError(
            f"cholesky factor is {chol.shape}, expected ({dim}, {dim})"
        )
    z = rs.generator().standard_normal((count, dim))
    return mean[None, :] + z @ chol.T


def sample_ar1(rho: float, dim: int, rs: RandomStream, count: int) -> np.ndarray:
    """Rows i.i.d. N(0, Sigma) with Sigma[j,k] = rho**|j-k|.

    Built by the first-order recursion x_1 ~ N(0,1),
    x_j = rho * x_{j-1} + sqrt(1-rho^2) * eps_j, which is O(dim) per row and
    never forms the dim x dim covariance.
    """
    if not -1.0 < rho < 1.0:
        raise ValidationError(f"AR(1) coefficient must lie in (-1, 1), got {rho}")
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    eps = rs.generator().standard_normal((count, dim))
    out = np.empty((count, dim))
    out[:, 0] = eps[:, 0]
    innov = np.sqrt(1.0 - rho * rho)
    for j in range(1, dim):
        out[:, j] = rho * out[:, j - 1] + innov * eps[:, j]
    return out


def sample_compound_symmetric(
    r: float, dim: int, rs: RandomStream, count: int
) -> np.ndarray:
    """Rows i.i.d. N(0, Sigma) with unit diagonal and constant off-diagonal r.

    Uses the closed-form factor x = a*z + b*(sum z)*1 with a = sqrt(1-r) and
    b = (sqrt(1+(dim-1)r) - a)/dim, exact and O(dim) per row.
    """
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    lo = -1.0 / (dim - 1) if dim > 1 else -np.inf
    if not lo <= r <= 1.0:
        raise ValidationError(
            f"off-diagonal {r} outside the positive-semidefinite range ({lo}, 1]"
        )
    z = rs.generator().standard_normal((count, dim))
    a = np.sqrt(1.0 - r)
    b = (np.sqrt(1.0 + (dim - 1) * r) - a) / dim
    return a * z + b * z.sum(axis=1, keepdims=True)


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0) for threshold t >= 0."""
    if t < 0:
        raise ValidationError("threshold must be >= 0")
    az = abs(z) - t
    if az <= 0.0:
        return 0.0
    return az if z > 0 else -az
