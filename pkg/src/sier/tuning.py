"""Penalty-pair grid, component-count rule, and cross-validated selection.

Selection runs in two steps.  First, for each penalty pair, the component
cap is found on the whole dataset: extraction stops at min(n, p, q) or as
soon as a component's share of the accumulated signal magnitude falls to
the threshold (5% by default).  Second, five-fold cross-validation scores
every (pair, component count) cell and the minimizing cell wins; the final
model is the full-data fit of the winning pair.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, ValidationError
from .extractor import (
    CrossMoment,
    PenaltyPair,
    SolverConfig,
    cross_moment,
    fit_components,
    signal_fraction,
)
from .model import (
    Dataset,
    FittedModel,
    SignalDecomposition,
    standardize_apply,
    standardize_fit,
)
from .numerics import RandomStream

#: The default (tau, lambda) ladder: sparsity pressure grows with tau.
DEFAULT_PAIRS: tuple[PenaltyPair, ...] = tuple(
    PenaltyPair(t, l)
    for t, l in [
        (0.05, 0.05),
        (0.1, 0.05),
        (0.1, 0.1),
        (0.5, 0.1),
        (0.5, 0.2),
        (1.0, 0.2),
        (1.0, 0.3),
        (5.0, 0.3),
        (5.0, 0.4),
        (10.0, 0.4),
        (50.0, 0.5),
        (100.0, 0.6),
    ]
)


@dataclass(frozen=True)
class TuningGrid:
    """Candidate penalty pairs plus the component-share stopping threshold.

    ``k_caps`` normally stays None and the caps are computed from the data;
    supplying explicit per-pair caps skips that step.
    """

    pairs: tuple[PenaltyPair, ...] = DEFAULT_PAIRS
    threshold: float = 0.05
    k_caps: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.pairs:
            raise ValidationError("tuning grid needs at least one penalty pair")
        if not 0 < self.threshold < 1:
            raise ValidationError("threshold must be in (0, 1)")
        if self.k_caps is not None and len(self.k_caps) != len(self.pairs):
            raise ValidationError("k_caps must match the number of pairs")


def default_grid() -> TuningGrid:
    return TuningGrid()


def max_components(mu_stream, n: int, p: int, q: int, threshold: float = 0.05) -> int:
    """Component cap from a (possibly lazy) stream of signal magnitudes.

    Consumes magnitudes until the k-th one holds at most ``threshold`` of
    the running total (counted from k = 2, that component included) or
    until min(n, p, q) is reached, whichever is first.  Reading lazily lets
    extraction halt exactly at the cap.
    """
    cap = min(n, p, q)
    if cap <= 0:
        return 0
    total = 0.0
    k = 0
    for mu in mu_stream:
        k += 1
        total += float(mu)
        ratio = float(mu) / total if total > 0.0 else 0.0
        if k >= 2 and ratio <= threshold:
            return min(k, cap)
        if k >= cap:
            return cap
    return k


def share_rule_stop(threshold: float):
    """Stop predicate for fit_components implementing the share rule."""

    def stop(mus: list[float]) -> bool:
        k = len(mus)
        return k >= 2 and signal_fraction(mus, k) <= threshold

    return stop


@dataclass(frozen=True)
class CvReport:
    """Everything the cross-validation saw, for inspection and export.

    ``errors[i, j-1]`` is the mean validation error of pair i with j
    components; cells beyond a pair's cap are NaN.  ``fold_errors`` holds
    the per-fold values, ``fold_assignment`` the fold index of every row.
    """

    pairs: tuple[PenaltyPair, ...]
    k_caps: tuple[int, ...]
    errors: np.ndarray
    fold_errors: np.ndarray
    chosen_pair: int
    chosen_k: int
    fold_assignment: np.ndarray


def _fold_ids(n: int, folds: int, rs: RandomStream) -> np.ndarray:
    """Seeded shuffle, then contiguous blocks; sizes differ by at most 1."""
    perm = rs.generator().permutation(n)
    ids = np.empty(n, dtype=np.int64)
    for l, block in enumerate(np.array_split(perm, folds)):
        ids[block] = l
    return ids


def _prefix_errors(dec: SignalDecomposition, x_val_t, y_val, y_mean, j_max: int):
    """Validation error for each component-count prefix 1..j_max.

    Prefixes are cumulative: the j-component prediction extends the
    (j-1)-component one by a single rank-one term, never refit.  If the
    fold extracted fewer than j_max components, the deepest available
    prefix stands in for the missing ones.
    """
    n_val = x_val_t.shape[0]
    pred = np.tile(y_mean, (n_val, 1))
    errors = np.empty(j_max)
    last = float(np.sum((y_val - pred) ** 2)) / n_val
    for j in range(j_max):
        if j < dec.k:
            pred = pred + np.outer(x_val_t @ dec.a[:, j], dec.w[:, j])
            last = float(np.sum((y_val - pred) ** 2)) / n_val
        errors[j] = last
    return errors


def cross_validate(
    data: Dataset,
    grid: TuningGrid = TuningGrid(),
    cfg: SolverConfig = SolverConfig(),
    rs: RandomStream = RandomStream(0),
    folds: int = 5,
    threads: int = 1,
    scale: bool = False,
) -> tuple[FittedModel, CvReport]:
    """Select (tau, lambda) and the component count; refit on all rows.

    Fold standardization uses fold-training statistics only, and every
    (pair, fold) fit is an independent job, so results do not depend on
    scheduling or thread count.  ``scale`` picks the estimation frame:
    centered-only by default, or unit-diagonal scaling; the default penalty
    grid is calibrated for the centered-only frame.
    """
    if folds < 2:
        raise ValidationError("need at least 2 folds")
    n = data.n
    if n < 2 * folds:
        raise ValidationError(f"n={n} too small for {folds} non-empty training folds")
    fold_assignment = _fold_ids(n, folds, rs)

    std_full, frame_full = standardize_fit(data, scale=scale)
    cm_full = cross_moment(frame_full.x, frame_full.y)
    _warm(cm_full)
    cap_full = min(cm_full.n, cm_full.p, cm_full.q)

    n_pairs = len(grid.pairs)
    full_fits: dict[int, SignalDecomposition] = {}

    def _full_fit(i: int) -> SignalDecomposition:
        return fit_components(
            cm_full, grid.pairs[i], cap_full, cfg, stop=share_rule_stop(grid.threshold)
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        if grid.k_caps is not None:
            k_caps = tuple(min(c, cap_full) for c in grid.k_caps)
        else:
            for i, dec in enumerate(pool.map(_full_fit, range(n_pairs))):
                full_fits[i] = dec
            k_caps = tuple(full_fits[i].k for i in range(n_pairs))

        j_max = max(k_caps) if k_caps else 0
        if j_max == 0:
            raise DegenerateFitError("every penalty pair exhausted the signal at 0 components")

        fold_ctx = list(
            pool.map(lambda l: _fold_context(data, fold_assignment, l, scale), range(folds))
        )
        for l in range(folds):
            if fold_ctx[l][0].n < 2:
                raise ValidationError(f"fold {l} leaves fewer than 2 training rows")

        fold_errors = np.full((n_pairs, folds, j_max), np.nan)

        def _job(il):
            i, l = il
            cm_l, x_val_t, y_val, y_mean_l = fold_ctx[l]
            k_i = min(k_caps[i], cm_l.n, cm_l.p, cm_l.q)
            if k_i == 0:
                return i, l, np.full(0, np.nan)
            dec = fit_components(cm_l, grid.pairs[i], k_i, cfg)
            return i, l, _prefix_errors(dec, x_val_t, y_val, y_mean_l, k_i)

        jobs = [(i, l) for i in range(n_pairs) for l in range(folds)]
        for i, l, errs in pool.map(_job, jobs):
            fold_errors[i, l, : errs.shape[0]] = errs

    errors = np.mean(fold_errors, axis=1)

    chosen_pair, chosen_k = _argmin_cell(errors, k_caps)
    if chosen_pair is None:
        raise DegenerateFitError("cross-validation produced no finite error cell")

    if chosen_pair in full_fits:
        dec = full_fits[chosen_pair]
    else:
        dec = fit_components(
            cm_full, grid.pairs[chosen_pair], k_caps[chosen_pair], cfg
        )
    if dec.k == 0:
        raise DegenerateFitError("final full-data fit extracted no components")
    pair = grid.pairs[chosen_pair]
    model = FittedModel(
        standardizer=std_full,
        decomposition=dec,
        tau=pair.tau,
        lam=pair.lam,
        k_opt=min(chosen_k, dec.k),
    )
    report = CvReport(
        pairs=grid.pairs,
        k_caps=k_caps,
        errors=errors,
        fold_errors=fold_errors,
        chosen_pair=chosen_pair,
        chosen_k=model.k_opt,
        fold_assignment=fold_assignment,
    )
    return model, report


def _warm(cm: CrossMoment) -> None:
    # Materialize the cached SVDs before jobs share the object across threads.
    cm.z_svd
    cm.m_svd


def _fold_context(data: Dataset, fold_assignment: np.ndarray, l: int, scale: bool):
    train = fold_assignment != l
    val = ~train
    std_l, frame_l = standardize_fit(Dataset(data.x[train], data.y[train]), scale=scale)
    cm_l = cross_moment(frame_l.x, frame_l.y)
    _warm(cm_l)
    x_val_t = standardize_apply(std_l, data.x[val])
    return cm_l, x_val_t, data.y[val], std_l.y_mean


def _argmin_cell(errors: np.ndarray, k_caps: tuple[int, ...]):
    """Minimizing (pair, j) cell; ties prefer smaller j, then smaller pair."""
    best = (None, None)
    best_val = np.inf
    for j in range(errors.shape[1]):
        for i in range(errors.shape[0]):
            if j >= k_caps[i]:
                continue
            v = errors[i, j]
            if np.isfinite(v) and v < best_val:
                best_val = v
                best = (i, j + 1)
    return best
