"""Hard-margin separators via a dual active-set method, and the SVM compression scheme.

The dual is ``max sum(a) - |sum a_i y_i x_i|^2 / 2`` subject to ``a >= 0``
and ``sum a_i y_i = 0``.  On a working set ``F`` all constraints are held at
equality, ``y_i (w.x_i + b) = 1``, giving a small KKT linear system.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .compression import CompressionScheme, canonical, check_function_labels
from .domain import AffineHalfspace, ConstantHypothesis, Hypothesis, Sample
from .errors import ConditioningError, ConfigurationError, InfeasibleError

MIN_MARGIN = 1e-6
ACTIVE_TOL = 1e-8
SAME_TOL = 1e-8
EXHAUSTIVE_CAP = 12
_TINY = 1e-13


@dataclass
class SeparatorSolution:
    w: np.ndarray
    b: float
    margin: float
    active_indices: list[int]
    alpha: np.ndarray
    kkt_residual: float
    iterations: int = 0

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(X @ self.w + self.b >= 0, 1.0, -1.0)


def _eqp(Q: np.ndarray, y: np.ndarray, F: list[int]):
    """Solve the working-set KKT system; return ``(alpha_F, b)`` or a null direction."""
    m = len(F)
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = Q[np.ix_(F, F)]
    K[:m, m] = y[F]
    K[m, :m] = y[F]
    rhs = np.zeros(m + 1)
    rhs[:m] = 1.0
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    res = rhs - K @ sol
    scale = 1.0 + np.abs(K).max()
    if np.linalg.norm(res) > 1e-9 * scale:
        # inconsistent: the residual is a direction along which the dual grows without bound
        return None, res[:m]
    return sol, None


def _first_pair(X: np.ndarray, y: np.ndarray) -> list[int]:
    pos, neg = np.flatnonzero(y > 0), np.flatnonzero(y < 0)
    D = ((X[pos][:, None, :] - X[neg][None, :, :]) ** 2).sum(axis=2)
    i, j = np.unravel_index(int(np.argmin(D)), D.shape)
    return [int(pos[i]), int(neg[j])]


def _linearly_separable(X: np.ndarray, y: np.ndarray) -> bool:
    from scipy.optimize import linprog

    n, d = X.shape
    # find (w, b) with y_i (w.x_i + b) >= 1
    A = -y[:, None] * np.column_stack([X, np.ones(n)])
    res = linprog(np.zeros(d + 1), A_ub=A, b_ub=-np.ones(n), bounds=[(None, None)] * (d + 1),
                  method="highs")
    return res.status == 0


def _solve_sorted(X: np.ndarray, y: np.ndarray, max_iter: int):
    n = X.shape[0]
    Z = y[:, None] * X
    Q = Z @ Z.T
    alpha = np.zeros(n)
    F = _first_pair(X, y)
    for it in range(1, max_iter + 1):
        sol, direction = _eqp(Q, y, F)
        aF = alpha[F]
        if direction is not None:
            neg = direction < -_TINY
            if not neg.any():
                raise InfeasibleError("dual unbounded: sample is not linearly separable")
            steps = aF[neg] / -direction[neg]
            t = steps.min()
            alpha[F] = aF + t * direction
            drop = F[int(np.flatnonzero(neg)[np.argmin(steps)])]
            alpha[drop] = 0.0
            F = [i for i in F if i != drop and alpha[i] > _TINY]
            if not F:
                F = _first_pair(X, y)
            continue
        new, b = sol[:-1], float(sol[-1])
        if np.all(new >= -_TINY):
            alpha[F] = np.maximum(new, 0.0)
            w = Z.T @ alpha
            marg = y * (X @ w + b)
            outside = np.ones(n, dtype=bool)
            outside[F] = False
            cand = np.flatnonzero(outside & (marg < 1.0 - 1e-11))
            if cand.size == 0:
                return alpha, w, b, it
            F = F + [int(cand[np.argmin(marg[cand])])]
            continue
        blocking = new < -_TINY
        ratios = aF[blocking] / (aF[blocking] - new[blocking])
        t = ratios.min()
        alpha[F] = aF + t * (new - aF)
        drop = F[int(np.flatnonzero(blocking)[np.argmin(ratios)])]
        alpha[drop] = 0.0
        F = [i for i in F if i != drop and alpha[i] > _TINY]
        if not F:
            F = _first_pair(X, y)
    raise ConditioningError(f"active-set solver hit the iteration cap ({max_iter})")


def hard_margin_solve(sample: Sample, max_iter: int | None = None) -> SeparatorSolution:
    """Maximum-margin affine separator ``sign(w.x + b)`` of a separable sample.

    The sample is put in canonical ``(x, y)`` order first, so any ordering of
    the same set gives bit-identical ``(w, b)``.  Active indices refer to the
    caller's ordering.
    """
    if len(sample) == 0:
        raise ConfigurationError("empty sample")
    if not (np.any(sample.y > 0) and np.any(sample.y < 0)):
        raise ConfigurationError("hard-margin separation needs both labels")
    keys = np.column_stack([sample.X, sample.y])
    order = np.lexsort(keys.T[::-1])
    X, y = sample.X[order], sample.y[order]
    n = X.shape[0]
    max_iter = max_iter or 50 * n + 100
    try:
        alpha, w, b, it = _solve_sorted(X, y, max_iter)
    except ConditioningError:
        if not _linearly_separable(X, y):
            raise InfeasibleError("sample is not linearly separable") from None
        raise
    nw = float(np.linalg.norm(w))
    if nw == 0 or 1.0 / nw < MIN_MARGIN:
        raise ConditioningError(f"margin below {MIN_MARGIN}")
    marg = y * (X @ w + b)
    if np.any(marg < 1.0 - 1e-8):
        if not _linearly_separable(X, y):
            raise InfeasibleError("sample is not linearly separable")
        raise ConditioningError("solver returned an infeasible separator")
    # dual terms are scaled by sum(alpha), which grows like 1/margin^2
    asum = max(float(alpha.sum()), 1.0)
    kkt = max(
        float(np.max(np.maximum(1.0 - marg, 0.0))),
        abs(float(alpha @ y)) / asum,
        float(np.max(np.abs(alpha * (marg - 1.0)))) / asum,
    )
    active_sorted = np.flatnonzero(np.abs(marg - 1.0) <= ACTIVE_TOL)
    active = sorted(int(order[i]) for i in active_sorted)
    alpha_orig = np.zeros(n)
    alpha_orig[order] = alpha
    return SeparatorSolution(w, b, 1.0 / nw, active, alpha_orig, kkt, it)


def _same(sol: SeparatorSolution, sub: Sample) -> bool:
    if not (np.any(sub.y > 0) and np.any(sub.y < 0)):
        return False
    try:
        other = hard_margin_solve(sub)
    except (InfeasibleError, ConditioningError):
        return False
    scale = max(1.0, float(np.linalg.norm(sol.w)))
    return (np.max(np.abs(other.w - sol.w)) <= SAME_TOL * scale
            and abs(other.b - sol.b) <= SAME_TOL * scale)


def essential_support_vectors(sample: Sample, solution: SeparatorSolution | None = None) -> Sample:
    """A minimal subsample of active points that reproduces the separator.

    Greedy deletion in canonical order first; when at most 12 points are
    active, the first minimal subset in canonical lexicographic order is
    returned instead.
    """
    sol = solution or hard_margin_solve(sample)
    active = canonical(sample.take(sol.active_indices))
    # collapse duplicate examples
    _, first = np.unique(np.column_stack([active.X, active.y]), axis=0, return_index=True)
    active = canonical(active.take(np.sort(first)))
    cur = list(range(len(active)))
    for i in list(cur):
        trial = [j for j in cur if j != i]
        if _same(sol, active.take(trial)):
            cur = trial
    if len(active) <= EXHAUSTIVE_CAP:
        for size in range(2, len(cur)):
            for combo in combinations(range(len(active)), size):
                if _same(sol, active.take(list(combo))):
                    return active.take(list(combo))
    return active.take(cur)


class SVMScheme(CompressionScheme):
    """Essential support vectors as the compression set; ``k = d + 1``."""

    scheme_id = "svm"
    output_class = "affine-halfspace"

    def __init__(self, d: int = 2):
        self.d = d
        self.k = d + 1

    def compress(self, sample: Sample) -> Sample:
        check_function_labels(sample)
        if len(sample) == 0:
            return sample
        if not (np.any(sample.y > 0) and np.any(sample.y < 0)):
            # one-class sample: keep a single representative
            return canonical(sample).head(1)
        return self._checked(sample, essential_support_vectors(sample))

    def reconstruct(self, subsample: Sample) -> Hypothesis:
        if len(subsample) == 0:
            return ConstantHypothesis(1.0)
        if not (np.any(subsample.y > 0) and np.any(subsample.y < 0)):
            return ConstantHypothesis(float(subsample.y[0]))
        sol = hard_margin_solve(subsample)
        return AffineHalfspace(sol.w, sol.b)


def svm_scheme(d: int = 2) -> SVMScheme:
    return SVMScheme(d)
