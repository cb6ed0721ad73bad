"""Component extraction by penalized generalized-eigenvalue maximization.

A fitted component is a predictor loading ``alpha`` maximizing

    f(alpha) = |M' alpha|_2^2 / (alpha' S alpha + tau * |alpha|_lam^2)

where M = X'(Y - 1 ybar')/n, S = X'X/n, and the penalty norm is
|a|_lam^2 = (1-lam)|a|_2^2 + lam*|a|_1^2.  The squared l1 term keeps f
scale-invariant, so the solver works on an unconstrained surrogate and
rescales the result to alpha' S alpha = 1.  Components are extracted
sequentially under S-orthogonality to their predecessors.

Quadratic forms go through Z = X/sqrt(n); neither S nor M M' is ever
materialized for large p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import alternate_solve
from .errors import InternalConsistencyError, ValidationError
from .model import SignalDecomposition
from .numerics import RandomStream, check_matrix, thin_svd

# Largest p for which p x p ( S, M M' ) matrices may be formed; only test
# helpers use the dense forms.
DENSE_LIMIT = 200


@dataclass(frozen=True)
class PenaltyPair:
    """Penalty weight tau >= 0 and l1 mixing weight lam in [0, 1)."""

    tau: float
    lam: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValidationError(f"tau must be >= 0, got {self.tau}")
        if not 0 <= self.lam < 1:
            raise ValidationError(f"lambda must be in [0, 1), got {self.lam}")


def penalty_norm_sq(alpha: np.ndarray, lam: float) -> float:
    """(1-lam)*|alpha|_2^2 + lam*|alpha|_1^2."""
    l2 = float(alpha @ alpha)
    l1 = float(np.abs(alpha).sum())
    return (1.0 - lam) * l2 + lam * l1 * l1


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the component solver; defaults suit all shipped studies.

    ``restarts`` counts total starts (the first is deterministic, later ones
    perturb it with seeded noise).  ``ortho_penalty_start`` of None means
    1e3 times the first component's signal magnitude.
    """

    max_outer_iters: int = 500
    tol: float = 1e-8
    restarts: int = 3
    ortho_penalty_start: float | None = None
    ortho_tol: float = 1e-6
    ortho_escalations: int = 6
    exhaustion_rtol: float = 1e-14
    drift_tol: float = 1e-8
    restart_seed: int = 0
    restart_scale: float = 0.1

    def __post_init__(self):
        for name in (
            "max_outer_iters",
            "tol",
            "restarts",
            "ortho_tol",
            "exhaustion_rtol",
            "drift_tol",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.ortho_penalty_start is not None and self.ortho_penalty_start <= 0:
            raise ValidationError("ortho_penalty_start must be positive")
        if self.ortho_escalations < 0:
            raise ValidationError("ortho_escalations must be >= 0")


class CrossMoment:
    """Cross-moment M = X'(Y - 1 ybar')/n plus the operator view of S.

    Holds Z = X/sqrt(n) (and its transpose, contiguous for the kernel) so
    that S v = Z'(Z v) without forming the p x p matrix.  The thin SVDs of
    Z and M are computed lazily and cached.
    """

    def __init__(self, x, y):
        x = check_matrix(x, "X")
        y = check_matrix(y, "Y")
        if x.shape[0] != y.shape[0]:
            raise ValidationError(
                f"X has {x.shape[0]} rows but Y has {y.shape[0]}"
            )
        self.n, self.p = x.shape
        self.q = y.shape[1]
        self.z = x / np.sqrt(self.n)
        self.zt = np.ascontiguousarray(self.z.T)
        yc = y - y.mean(axis=0, keepdims=True)
        self.m = (x.T @ yc) / self.n
        self.mt = np.ascontiguousarray(self.m.T)
        self.m_fro2 = float(np.sum(self.m * self.m))
        self.s_diag = np.einsum("ij,ij->i", self.zt, self.zt)
        self._z_svd = None
        self._m_svd = None

    def s_apply(self, v: np.ndarray) -> np.ndarray:
        """S @ v through Z."""
        return self.zt @ (self.z @ v)

    @property
    def z_svd(self):
        if self._z_svd is None:
            self._z_svd = thin_svd(self.z)
        return self._z_svd

    @property
    def m_svd(self):
        if self._m_svd is None:
            self._m_svd = thin_svd(self.m)
        return self._m_svd

    def s_dense(self) -> np.ndarray:
        if self.p > DENSE_LIMIT:
            raise ValidationError(f"refusing to materialize S for p={self.p}")
        return self.zt @ self.z

    def bhat_dense(self) -> np.ndarray:
        """M M', the estimated signal quadratic form (small p only)."""
        if self.p > DENSE_LIMIT:
            raise ValidationError(f"refusing to materialize B-hat for p={self.p}")
        return self.m @ self.m.T


def cross_moment(x, y) -> CrossMoment:
    """Build the cross-moment from data already in the estimation frame."""
    return CrossMoment(x, y)


def ratio_objective(cm: CrossMoment, alpha: np.ndarray, penalty: PenaltyPair) -> float:
    """The scale-invariant objective f(alpha); 0 at alpha = 0."""
    num = cm.m.T @ alpha
    num = float(num @ num)
    za = cm.z @ alpha
    den = float(za @ za) + penalty.tau * penalty_norm_sq(alpha, penalty.lam)
    if den <= 0.0:
        return 0.0
    return num / den


def population_decomposition(x, b_true) -> SignalDecomposition:
    """Exact decomposition of the noiseless signal X @ B.

    ``x`` must be column-centered.  Components come from the thin SVD of
    X @ B: w_k = (sigma_k/sqrt(n)) u_k, alpha_k = (n/sigma_k^2) B w_k,
    t_k = sqrt(n) gamma_k, mu_k = sigma_k^2/n.  The count K is the numerical
    rank of X @ B (singular values above 1e-10 of the largest).
    """
    x = check_matrix(x, "X")
    b_true = check_matrix(b_true, "B")
    if x.shape[1] != b_true.shape[0]:
        raise ValidationError(
            f"X has {x.shape[1]} columns but B has {b_true.shape[0]} rows"
        )
    n, p = x.shape
    q = b_true.shape[1]
    xb = x @ b_true
    svd = thin_svd(xb)
    if svd.s.size == 0 or svd.s[0] <= 0.0:
        return SignalDecomposition(
            0, np.zeros((p, 0)), np.zeros((q, 0)), np.zeros(0), np.zeros((n, 0))
        )
    k = int(np.count_nonzero(svd.s > 1e-10 * svd.s[0]))
    gamma = svd.u[:, :k]
    u = svd.v[:, :k]
    sig = svd.s[:k]
    w = u * (sig / np.sqrt(n))[None, :]
    a = (b_true @ w) * (n / sig**2)[None, :]
    t = np.sqrt(n) * gamma
    mu = sig**2 / n
    return SignalDecomposition(k, a, w, mu, t)


@dataclass(frozen=True)
class ComponentResult:
    """One extracted loading; ``exhausted`` means no signal was left."""

    alpha: np.ndarray
    mu_hat: float
    objective: float
    converged: bool
    exhausted: bool


def _apply_sign(alpha: np.ndarray) -> float:
    """Sign making the largest-|entry| coordinate non-negative; 1.0 or -1.0."""
    if alpha.size == 0:
        return 1.0
    j = int(np.argmax(np.abs(alpha)))
    return -1.0 if alpha[j] < 0 else 1.0


def _exhausted(p: int) -> ComponentResult:
    return ComponentResult(np.zeros(p), 0.0, 0.0, True, True)


def solve_component(
    cm: CrossMoment,
    penalty: PenaltyPair,
    prev: list[np.ndarray],
    cfg: SolverConfig = SolverConfig(),
) -> ComponentResult:
    """Next loading, S-orthogonal to ``prev`` (each with alpha'S alpha = 1).

    With tau = 0 or lam = 0 the objective is a plain generalized eigenvalue
    problem and is solved exactly in the whitened basis of Z, with the
    orthogonality constraints removed by null-space projection.  Otherwise
    an alternating scheme runs: the best response direction v = M'a/|M'a|
    gives a linear surrogate, maximized over the penalized ellipsoid by
    cyclic coordinate descent; the orthogonality constraints enter as an
    escalating quadratic penalty (the l1 structure survives, unlike under a
    subspace restriction).  The winner over ``cfg.restarts`` seeded starts
    is rescaled to alpha' S alpha = 1.
    """
    if cm.m_fro2 <= 0.0:
        return _exhausted(cm.p)
    if penalty.tau == 0.0 or penalty.lam == 0.0:
        return _solve_smooth(cm, penalty, prev, cfg)
    return _solve_penalized(cm, penalty, prev, cfg)


def _z_rank(cm: CrossMoment):
    """Positive part of Z's thin SVD: (rank, singular values, V columns)."""
    svd = cm.z_svd
    if svd.s.size == 0 or svd.s[0] <= 0.0:
        return 0, svd.s[:0], svd.v[:, :0]
    cutoff = max(cm.n, cm.p) * np.finfo(np.float64).eps * svd.s[0]
    r = int(np.count_nonzero(svd.s > cutoff))
    return r, svd.s[:r], svd.v[:, :r]


def _solve_smooth(cm, penalty, prev, cfg):
    r, sig, v = _z_rank(cm)
    if r == 0:
        return _exhausted(cm.p)
    shift = penalty.tau * (1.0 - penalty.lam)
    wgt = 1.0 / np.sqrt(sig**2 + shift)
    hw = (cm.m.T @ v) * wgt[None, :]
    if prev:
        g = np.column_stack([wgt * (sig**2 * (v.T @ al)) for al in prev])
        q_basis, _ = np.linalg.qr(g)
        hw = hw - (hw @ q_basis) @ q_basis.T
    top = thin_svd(hw)
    if top.s.size == 0 or top.s[0] <= 0.0:
        return _exhausted(cm.p)
    e = top.v[:, 0]
    alpha = v @ (wgt * e)
    za = cm.z @ alpha
    s_norm = float(za @ za)
    if s_norm <= 1e-30:
        return _exhausted(cm.p)
    alpha = alpha / np.sqrt(s_norm)
    alpha *= _apply_sign(alpha)
    mt_a = cm.m.T @ alpha
    mu_hat = float(mt_a @ mt_a)
    if mu_hat <= cfg.exhaustion_rtol * cm.m_fro2:
        return _exhausted(cm.p)
    obj = ratio_objective(cm, alpha, penalty)
    return ComponentResult(alpha, mu_hat, obj, True, False)


def _ridge_init(cm, penalty, prev, cfg):
    """Exact maximizer of the ridge-only relaxation (l1 term dropped).

    This is the global optimum of the smooth problem nearest the penalized
    one, under the same orthogonality constraints, so it places the
    non-concave search in the right basin even when signal magnitudes
    cluster.  Falls back to the top left-singular vector of M if the
    relaxation is degenerate.
    """
    relaxed = PenaltyPair(penalty.tau * (1.0 - penalty.lam), 0.0)
    res = _solve_smooth(cm, relaxed, prev, cfg)
    if not res.exhausted:
        return res.alpha.copy()
    return cm.m_svd.u[:, 0].copy()


def _project_out(alpha, prev, z):
    """S-metric projection of alpha onto the complement of span(prev)."""
    za = z @ alpha
    for al in prev:
        c = float((z @ al) @ za)
        if c != 0.0:
            alpha = alpha - c * al
            za = za - c * (z @ al)
    return alpha


def _solve_penalized(cm, penalty, prev, cfg):
    tau_ridge = penalty.tau * (1.0 - penalty.lam)
    tau_l1 = penalty.tau * penalty.lam
    m_count = len(prev)
    if m_count:
        dmat = np.ascontiguousarray([cm.s_apply(al) for al in prev])
        mu1 = cm.m.T @ prev[0]
        mu1 = float(mu1 @ mu1)
        rho0 = (
            cfg.ortho_penalty_start
            if cfg.ortho_penalty_start is not None
            else 1e3 * max(mu1, 1e-12)
        )
    else:
        dmat = np.zeros((0, cm.p))
        rho0 = 0.0

    alpha0 = _ridge_init(cm, penalty, prev, cfg)
    if m_count:
        alpha0 = _project_out(alpha0, prev, cm.z)
        if np.linalg.norm(alpha0) <= 1e-14:
            alpha0 = cm.m_svd.u[:, 0].copy()

    best = None
    base_rms = np.sqrt(np.mean(alpha0**2))
    if base_rms <= 0.0:
        base_rms = 1.0
    for restart in range(max(1, cfg.restarts)):
        alpha = alpha0.copy()
        if restart > 0:
            gen = RandomStream(cfg.restart_seed, 0).child(m_count, restart).generator()
            alpha = alpha + cfg.restart_scale * base_rms * gen.standard_normal(cm.p)
            if m_count:
                alpha = _project_out(alpha, prev, cm.z)
        res = _alternate(cm, tau_ridge, tau_l1, dmat, rho0, cfg, alpha, penalty)
        if res is None:
            continue
        if best is None or _better(res, best):
            best = res
    if best is None:
        return _exhausted(cm.p)
    return best


def _better(a: ComponentResult, b: ComponentResult) -> bool:
    gap = a.objective - b.objective
    if abs(gap) > 1e-10 * max(abs(a.objective), abs(b.objective), 1e-300):
        return gap > 0
    return float(np.abs(a.alpha).sum()) < float(np.abs(b.alpha).sum())


def _alternate(cm, tau_ridge, tau_l1, dmat, rho0, cfg, alpha, penalty):
    m_count = dmat.shape[0]
    alpha = np.ascontiguousarray(alpha)
    r = np.ascontiguousarray(cm.z @ alpha)
    e = np.ascontiguousarray(dmat @ alpha) if m_count else np.zeros(0)
    rho = rho0 if m_count else 0.0
    converged = False

    for _esc in range(cfg.ortho_escalations + 1):
        _iters, converged, _f = alternate_solve(
            alpha,
            cm.zt,
            r,
            cm.mt,
            dmat,
            e,
            cm.s_diag,
            rho,
            tau_ridge,
            tau_l1,
            cfg.max_outer_iters,
            cfg.tol,
        )
        if not m_count:
            break
        s_norm = np.sqrt(float(r @ r))
        if s_norm <= 0.0:
            break
        if float(np.max(np.abs(e))) / s_norm <= cfg.ortho_tol:
            break
        rho *= 10.0

    s_norm = np.sqrt(float(r @ r))
    if s_norm <= 1e-150:
        return None
    alpha = alpha / s_norm
    alpha *= _apply_sign(alpha)
    mta = cm.m.T @ alpha
    mu_hat = float(mta @ mta)
    if mu_hat <= cfg.exhaustion_rtol * cm.m_fro2:
        return None
    obj = mu_hat / (1.0 + penalty.tau * penalty_norm_sq(alpha, penalty.lam))
    return ComponentResult(np.ascontiguousarray(alpha), mu_hat, obj, converged, False)


def fit_components(
    cm: CrossMoment,
    penalty: PenaltyPair,
    k_max: int,
    cfg: SolverConfig = SolverConfig(),
    stop=None,
) -> SignalDecomposition:
    """Extract up to ``k_max`` components sequentially.

    Extraction ends early when the signal is exhausted or when ``stop``
    (called with the list of magnitudes after each component) returns True.
    Score columns are re-orthogonalized in the S metric whenever drift
    against earlier components exceeds ``cfg.drift_tol``.
    """
    cap = min(cm.n, cm.p, cm.q)
    if k_max > cap:
        raise ValidationError(f"k_max={k_max} exceeds min(n, p, q)={cap}")
    alphas: list[np.ndarray] = []
    gammas: list[np.ndarray] = []
    mus: list[float] = []
    for _k in range(k_max):
        res = solve_component(cm, penalty, alphas, cfg)
        if res.exhausted:
            break
        alpha = res.alpha
        za = cm.z @ alpha
        mu_hat = res.mu_hat
        if alphas:
            drift = max(abs(float(g @ za)) for g in gammas)
            if drift > cfg.drift_tol:
                alpha, za = _gram_schmidt(alpha, za, alphas, gammas)
                norm = np.linalg.norm(za)
                if norm <= 1e-150:
                    break
                alpha = alpha / norm
                za = za / norm
                sign = _apply_sign(alpha)
                alpha *= sign
                za *= sign
                mta = cm.m.T @ alpha
                mu_hat = float(mta @ mta)
                if mu_hat <= cfg.exhaustion_rtol * cm.m_fro2:
                    break
        alphas.append(alpha)
        gammas.append(za)
        mus.append(mu_hat)
        if stop is not None and stop(mus):
            break
    k = len(alphas)
    if k == 0:
        return SignalDecomposition(
            0,
            np.zeros((cm.p, 0)),
            np.zeros((cm.q, 0)),
            np.zeros(0),
            np.zeros((cm.n, 0)),
        )
    a = np.column_stack(alphas)
    t = np.sqrt(cm.n) * np.column_stack(gammas)
    w = cm.m.T @ a
    return SignalDecomposition(k, a, w, np.asarray(mus), t)


def _gram_schmidt(alpha, za, alphas, gammas):
    """Modified Gram-Schmidt in the S metric, repeated until drift is gone."""
    for _pass in range(3):
        worst = 0.0
        for al, g in zip(alphas, gammas):
            c = float(g @ za)
            worst = max(worst, abs(c))
            if c != 0.0:
                alpha = alpha - c * al
                za = za - c * g
        if worst <= 1e-12:
            break
    return alpha, za


def estimate_w(t_mat, y, tol: float = 1e-6) -> np.ndarray:
    """Response loadings W' = T'(Y - 1 ybar')/n.

    Valid because the score columns are orthonormal under the 1/n inner
    product, which is checked up front; this equals the least-squares
    regression of centered Y on T.
    """
    t_mat = check_matrix(t_mat, "T")
    y = check_matrix(y, "Y")
    n, k = t_mat.shape
    if y.shape[0] != n:
        raise ValidationError(f"T has {n} rows but Y has {y.shape[0]}")
    if k:
        gram = t_mat.T @ t_mat / n
        err = float(np.max(np.abs(gram - np.eye(k))))
        if err > tol:
            raise InternalConsistencyError(
                f"score columns not orthonormal: max deviation {err:.3e}"
            )
    yc = y - y.mean(axis=0, keepdims=True)
    return (yc.T @ t_mat) / n


def coefficient_matrix(dec: SignalDecomposition, k: int) -> np.ndarray:
    """Coefficient matrix of the first k components, sum of alpha_j w_j'."""
    if not 0 <= k <= dec.k:
        raise ValidationError(f"k={k} outside 0..{dec.k}")
    if k == 0:
        return np.zeros((dec.a.shape[0], dec.w.shape[0]))
    return dec.a[:, :k] @ dec.w[:, :k].T


def signal_fraction(mu, k: int) -> float:
    """Share of the k-th magnitude in the first k: mu_k / (mu_1+...+mu_k)."""
    mu = np.asarray(mu, dtype=np.float64)
    if not 1 <= k <= mu.shape[0]:
        raise ValidationError(f"k={k} outside 1..{mu.shape[0]}")
    total = float(mu[:k].sum())
    if total <= 0.0:
        return 0.0
    return float(mu[k - 1]) / total
