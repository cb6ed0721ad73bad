import numpy as np
import pytest

from sier import Dataset, RandomStream, cross_moment, standardize_fit


def random_psd(dim, rs, rank=None):
    """Random symmetric PSD matrix with the given (numerical) rank."""
    g = rs.generator()
    rank = dim if rank is None else rank
    a = g.standard_normal((dim, rank))
    return a @ a.T / rank


def helmert_design(n, p, scale=None):
    """n x p design with zero column means and X'X/n = I.

    Columns are orthonormal directions orthogonal to the all-ones vector,
    scaled by sqrt(n); optional per-column scale multipliers."""
    assert p < n
    base = np.ones((n, n))
    base[:, 1:] = np.linspace(0.0, 1.0, n)[:, None] ** np.arange(1, n)[None, :]
    q, _ = np.linalg.qr(base)
    x = np.sqrt(n) * q[:, 1 : p + 1]
    if scale is not None:
        x = x * np.asarray(scale)[None, :]
    return x


@pytest.fixture
def rs():
    return RandomStream(20240817)


def small_cross_moment(seed=11, n=14, p=4, q=3):
    """Centered random instance wrapped as a CrossMoment."""
    g = RandomStream(seed).generator()
    x = g.standard_normal((n, p))
    x = x - x.mean(axis=0)
    y = g.standard_normal((n, q))
    return cross_moment(x, y)


def fitted_toy_model(seed=5, n=40, p=6, q=2, noise=0.05, scale=True):
    """A small end-to-end fit used by model/prediction tests."""
    from sier import FittedModel, PenaltyPair, SolverConfig, fit_components

    g = RandomStream(seed).generator()
    x = g.standard_normal((n, p))
    b = np.zeros((p, q))
    b[0, 0] = 1.0
    b[2, 1] = -0.7
    y = x @ b + noise * g.standard_normal((n, q))
    data = Dataset(x, y)
    std, frame = standardize_fit(data, scale=scale)
    cm = cross_moment(frame.x, frame.y)
    dec = fit_components(cm, PenaltyPair(0.5, 0.3), 2, SolverConfig())
    model = FittedModel(std, dec, 0.5, 0.3, dec.k)
    return data, model
