"""Data containers, standardization, prediction, and feature readout.

The estimation frame is: predictor columns centered and scaled so that the
diagonal of S = X'X/n is exactly one, responses centered only.  All types
here are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnusableDesignError, ValidationError
from .numerics import check_matrix

# Relative cutoff below which a column's root-mean-square counts as zero
# variance (centering residue on constant columns is ~1e-16 * |mean|).
_ZERO_VAR_RTOL = 1e-13


@dataclass(frozen=True)
class Dataset:
    """Raw predictor matrix X (n x p) and response matrix Y (n x q)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = check_matrix(self.x, "X")
        y = check_matrix(self.y, "Y")
        if x.shape[0] != y.shape[0]:
            raise ValidationError(
                f"X has {x.shape[0]} rows but Y has {y.shape[0]}"
            )
        if x.shape[0] < 2:
            raise ValidationError("need at least 2 observations")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class Standardizer:
    """Column statistics mapping raw data into the estimation frame.

    ``x_scale`` holds the per-column root-mean-square after centering (the
    1/n convention), so transformed columns satisfy S_jj = 1 exactly.
    Zero-variance columns are recorded in ``dropped`` and removed by the
    transform; their scale entry is kept as computed (approximately zero).
    """

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    dropped: frozenset[int] = field(default_factory=frozenset)

    @property
    def p(self) -> int:
        """Original predictor count, before dropping."""
        return self.x_mean.shape[0]

    @property
    def retained(self) -> np.ndarray:
        """Indices of retained columns, in original order."""
        keep = np.ones(self.p, dtype=bool)
        keep[list(self.dropped)] = False
        return np.flatnonzero(keep)


def standardize_fit(data: Dataset, scale: bool = True) -> tuple[Standardizer, Dataset]:
    """Fit the standardizer and return the dataset in the estimation frame.

    With ``scale=True`` (the default) retained predictor columns are divided
    by their root-mean-square so the transformed design satisfies S_jj = 1.
    With ``scale=False`` columns are centered only: unit scales are recorded
    and the raw column dispersion is preserved, which is the frame the
    shipped simulation studies and the CLI use by default.
    """
    x, y = data.x, data.y
    x_mean = x.mean(axis=0)
    centered = x - x_mean[None, :]
    rms = np.sqrt(np.mean(centered * centered, axis=0))
    cutoff = _ZERO_VAR_RTOL * np.maximum(1.0, np.abs(x_mean))
    dropped = frozenset(np.flatnonzero(rms <= cutoff).tolist())
    if len(dropped) == data.p:
        raise UnusableDesignError("all predictor columns have zero variance")
    x_scale = rms if scale else np.where(rms <= cutoff, rms, 1.0)
    std = Standardizer(x_mean, x_scale, y.mean(axis=0), dropped)
    x_t = standardize_apply(std, x)
    y_t = y - std.y_mean[None, :]
    return std, Dataset(x_t, y_t)


def standardize_apply(std: Standardizer, x_new) -> np.ndarray:
    """Map new predictors into the fitted frame, removing dropped columns."""
    x_new = check_matrix(x_new, "X_new")
    if x_new.shape[1] != std.p:
        raise ValidationError(
            f"X_new has {x_new.shape[1]} columns, standardizer expects {std.p}"
        )
    keep = std.retained
    return (x_new[:, keep] - std.x_mean[keep][None, :]) / std.x_scale[keep][None, :]


@dataclass(frozen=True)
class SignalDecomposition:
    """Extracted components in the estimation frame.

    Columns of ``a`` (p x K) are the predictor loadings, columns of ``w``
    (q x K) the response loadings, ``mu`` the per-component signal
    magnitudes, and ``t`` (n x K) the training scores X @ a.  ``t`` is None
    on models restored from disk, where only prediction is needed.
    """

    k: int
    a: np.ndarray
    w: np.ndarray
    mu: np.ndarray
    t: np.ndarray | None = None


@dataclass(frozen=True)
class FittedModel:
    """A fitted decomposition plus everything needed to predict raw data."""

    standardizer: Standardizer
    decomposition: SignalDecomposition
    tau: float
    lam: float
    k_opt: int

    def __post_init__(self):
        if self.decomposition.k >= 1 and not 1 <= self.k_opt <= self.decomposition.k:
            raise ValidationError(
                f"k_opt={self.k_opt} outside 1..{self.decomposition.k}"
            )


def predict(model: FittedModel, x_new, k: int | None = None) -> np.ndarray:
    """Predicted responses for raw predictors, using the first k components.

    ``k`` defaults to the tuned component count; ``k=0`` is allowed and
    yields the constant mean prediction.
    """
    dec = model.decomposition
    if k is None:
        k = model.k_opt
    if not 0 <= k <= dec.k:
        raise ValidationError(f"k={k} outside 0..{dec.k}")
    x_t = standardize_apply(model.standardizer, x_new)
    y_mean = model.standardizer.y_mean
    out = np.tile(y_mean, (x_t.shape[0], 1))
    if k > 0:
        out += (x_t @ dec.a[:, :k]) @ dec.w[:, :k].T
    return out


def selected_features(model: FittedModel, tol: float = 1e-8) -> set[int]:
    """Original indices of predictors with a loading above ``tol``.

    The scan covers the first ``k_opt`` components; dropped columns are
    never selected.  The default tolerance absorbs float dust left by the
    rescaling steps while keeping coordinate-descent exact zeros out.
    """
    dec = model.decomposition
    if dec.k == 0:
        return set()
    active = np.max(np.abs(dec.a[:, : model.k_opt]), axis=1) > tol
    original = model.standardizer.retained
    return set(original[active].tolist())
