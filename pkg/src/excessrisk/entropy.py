"""Covering and bracketing numbers, local entropies and their fixed points.

A function class is represented by a :class:`MetricCloud`: one vector per
hypothesis holding its (loss) values at a finite set of weighted evaluation
points.  Covers are always *proper*: centers are cloud members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import domain
from .errors import CapacityError, ConfigurationError

EXACT_CAP = 24
MAX_CLOUD = 10_000
BRACKET_SUBSET = 4
DIST_TOL = 1e-12


# ---------------------------------------------------------------------------
# Clouds
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MetricCloud:
    """Finite class of functions with ``L_r(P)`` distances.

    ``means`` holds ``Pg`` for every member, computed from closed forms when
    the cloud was built from a distribution (more accurate than
    ``vectors @ weights`` on a Monte Carlo point set).
    """

    vectors: np.ndarray
    weights: np.ndarray
    r: int = 1
    labels: list | None = None
    hypotheses: list | None = None
    mode: str = "raw"
    loss: str | None = None
    spec: domain.DistributionSpec | None = None
    means: np.ndarray | None = None
    _dist: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.vectors.shape[1] != self.weights.shape[0]:
            raise ConfigurationError("vector length differs from the number of weights")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError("weights must be nonnegative and sum to 1")
        if self.r not in (1, 2):
            raise ConfigurationError("r must be 1 or 2")
        if self.labels is None:
            self.labels = list(range(len(self.vectors)))
        if self.means is None:
            self.means = self.vectors @ self.weights

    def __len__(self):
        return self.vectors.shape[0]

    def norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self.r == 1:
            return float(np.abs(v) @ self.weights)
        return float(math.sqrt(max((v * v) @ self.weights, 0.0)))

    def distance(self, i: int, j: int) -> float:
        return self.norm(self.vectors[i] - self.vectors[j])

    @property
    def distances(self) -> np.ndarray:
        if self._dist is None:
            self._dist = pairwise_distances(self.vectors, self.weights, self.r)
        return self._dist

    @cached_property
    def diameter(self) -> float:
        return float(self.distances.max()) if len(self) > 1 else 0.0

    def abs_means(self) -> np.ndarray:
        """``P|g|`` per member (from the evaluation points)."""
        return np.abs(self.vectors) @ self.weights

    def evaluate(self, sample: domain.Sample) -> np.ndarray:
        """Values ``g(x_i, y_i)`` of every member on a sample, shape ``(N, n)``."""
        if self.hypotheses is None:
            raise ConfigurationError("cloud has no hypotheses to evaluate")
        P = _predict(self.hypotheses, sample.X)
        if self.mode == "raw":
            return P
        vals = _loss(P, sample.y, self.loss)
        if self.mode == "excess":
            vals = vals - _loss(self.spec.target(sample.X)[None, :], sample.y, self.loss)
        return vals

    def subcloud(self, idx) -> "MetricCloud":
        idx = np.asarray(idx, dtype=int)
        sub = MetricCloud(
            self.vectors[idx], self.weights, self.r,
            [self.labels[i] for i in idx],
            None if self.hypotheses is None else [self.hypotheses[i] for i in idx],
            self.mode, self.loss, self.spec, self.means[idx],
        )
        if self._dist is not None:
            sub._dist = self._dist[np.ix_(idx, idx)]
        return sub


def pairwise_distances(V: np.ndarray, w: np.ndarray, r: int) -> np.ndarray:
    """Weighted ``L_r`` distance matrix between the rows of ``V``."""
    V = np.asarray(V, dtype=float)
    if r == 2:
        G = (V * w) @ V.T
        sq = np.diag(G)
        D2 = np.maximum(sq[:, None] + sq[None, :] - 2 * G, 0.0)
        D = np.sqrt(D2)
    else:
        vals = np.unique(V)
        if vals.size <= 2:
            # two-valued vectors: |u - v| = span * [u != v]
            lo = vals[0]
            span = vals[-1] - lo if vals.size == 2 else 0.0
            Bm = (V != lo).astype(float)
            G = (Bm * w) @ Bm.T
            s = np.diag(G)
            D = span * np.maximum(s[:, None] + s[None, :] - 2 * G, 0.0)
        else:
            D = np.empty((V.shape[0], V.shape[0]))
            for i in range(V.shape[0]):
                D[i] = np.abs(V - V[i]) @ w
    np.fill_diagonal(D, 0.0)
    return D


def _predict(hypotheses, X) -> np.ndarray:
    return domain.predict_all(hypotheses, X)


def _loss(pred: np.ndarray, y: np.ndarray, loss: str) -> np.ndarray:
    if loss == "binary":
        return (pred != y).astype(float)
    return (pred - y) ** 2


def _lattice_points(marginal: domain.Marginal, m: int, kind: str) -> np.ndarray | None:
    # equally spaced, half-step offset points on the circle; homogeneous
    # halfspaces only see the angle, so the ball reduces to its boundary
    on_circle = marginal.kind == "sphere" or (
        marginal.kind == "ball" and kind == "homogeneous-halfspace")
    if on_circle and marginal.d == 2:
        ang = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        return np.column_stack([np.cos(ang), np.sin(ang)])
    return None


def build_cloud(cls: domain.HypothesisClass, spec: domain.DistributionSpec,
                loss: str | None = None, m: int = 2000, seed: int = 0,
                mode: str = "loss-class", r: int = 1, lattice: bool = False) -> MetricCloud:
    """Evaluate a class on weighted points.

    ``mode`` is ``"loss-class"`` (values ``loss(f(x), y)``),
    ``"excess-loss-class"`` (minus the target's loss) or ``"raw-class"``
    (values ``f(x)``).  Finite supports use their atoms with exact weights;
    continuous marginals use ``m`` Monte Carlo points (or, with
    ``lattice=True`` on the circle, ``m`` equally spaced points).  Label
    noise is integrated exactly: each point carries one entry per possible
    label with its conditional probability as weight.
    """
    loss = loss or spec.loss
    modes = {"loss-class": "loss", "excess-loss-class": "excess", "raw-class": "raw",
             "loss": "loss", "excess": "excess", "raw": "raw"}
    if mode not in modes:
        raise ConfigurationError(f"unknown cloud mode {mode!r}")
    mode = modes[mode]
    if len(cls) > MAX_CLOUD:
        raise ConfigurationError(
            f"class of {len(cls)} hypotheses exceeds the {MAX_CLOUD} discretization cap"
        )
    if m < 1:
        raise ConfigurationError("m must be >= 1")
    marg = spec.marginal
    if marg.kind == "pmf":
        X, w, idx = marg.atoms, marg.weights, np.arange(len(marg.weights))
    else:
        X = _lattice_points(marg, m, cls.kind) if lattice else None
        if X is None:
            X, _ = marg.draw(np.random.default_rng(seed), m)
        w, idx = np.full(X.shape[0], 1.0 / X.shape[0]), None
    P = cls.predict(X)
    members = list(cls.members)

    if mode == "raw":
        vectors, weights = P, w
        means = vectors @ weights
        return MetricCloud(vectors, weights, r, list(range(len(cls))), members, mode, loss,
                           spec, means)

    fstar = spec.target(X)
    if loss == "binary":
        h = spec.margin(X, idx) if marg.kind == "pmf" else spec.margin()
        h = np.broadcast_to(np.asarray(h, dtype=float), w.shape)
        ys = np.concatenate([fstar, -fstar])
        ws = np.concatenate([w * (1 + h) / 2, w * (1 - h) / 2])
        Pw = np.concatenate([P, P], axis=1)
        Fw = np.concatenate([fstar, fstar])
    else:
        sigma = spec.noise.sigma if spec.noise.kind == "regression" else 0.0
        ys = np.concatenate([fstar + sigma, fstar - sigma])
        ws = np.concatenate([w / 2, w / 2])
        Pw = np.concatenate([P, P], axis=1)
        Fw = np.concatenate([fstar, fstar])
    keep = ws > 0
    ys, ws, Pw, Fw = ys[keep], ws[keep], Pw[:, keep], Fw[keep]
    ws = ws / ws.sum()
    vectors = _loss(Pw, ys, loss)
    if mode == "excess":
        vectors = vectors - _loss(Fw[None, :], ys, loss)
        means = np.array([domain.excess_risk(f, spec, loss) for f in members])
    else:
        means = np.array([domain.true_risk(f, spec, loss) for f in members])
    return MetricCloud(vectors, ws, r, list(range(len(cls))), members, mode, loss, spec, means)


# ---------------------------------------------------------------------------
# Set cover
# ---------------------------------------------------------------------------


def greedy_set_cover(adj: np.ndarray) -> list[int]:
    """Greedy cover of the columns of a boolean ``(candidates, elements)`` matrix.

    Picks the candidate covering most uncovered elements, smallest index on
    ties.  Within a factor ``H(max set size) <= 1 + ln(#elements)`` of optimal.
    """
    adj = np.asarray(adj, dtype=bool)
    n_el = adj.shape[1]
    if n_el == 0:
        return []
    if not np.all(adj.any(axis=0)):
        raise ConfigurationError("some element is covered by no candidate")
    uncovered = np.ones(n_el, dtype=bool)
    chosen = []
    A = adj.astype(np.int32)
    while uncovered.any():
        gain = A @ uncovered
        c = int(np.argmax(gain))
        chosen.append(c)
        uncovered &= ~adj[c]
    return chosen


def exact_set_cover(adj: np.ndarray, cap: int | None = EXACT_CAP) -> list[int]:
    """Minimum set cover by branch and bound with the greedy cover as incumbent."""
    adj = np.asarray(adj, dtype=bool)
    n_cand, n_el = adj.shape
    if cap is not None and n_el > cap:
        raise CapacityError(f"exact cover requested for {n_el} elements (cap {cap})",
                            size=n_el, cap=cap)
    if n_el == 0:
        return []
    best = greedy_set_cover(adj)
    masks = []
    for row in adj:
        mk = 0
        for e in np.flatnonzero(row):
            mk |= 1 << int(e)
        masks.append(mk)
    # drop candidates dominated by another (keeps the smallest index among equals)
    order = sorted(range(n_cand), key=lambda c: (-bin(masks[c]).count("1"), c))
    kept = []
    for c in order:
        if masks[c] and not any((masks[c] | masks[o]) == masks[o] for o in kept):
            kept.append(c)
    cover_of = [[c for c in kept if masks[c] >> e & 1] for e in range(n_el)]
    full = (1 << n_el) - 1
    best_len = [len(best)]
    best_sol = [list(best)]
    max_size = max(bin(masks[c]).count("1") for c in kept)

    def rec(uncovered: int, chosen: list[int]):
        if uncovered == 0:
            if len(chosen) < best_len[0]:
                best_len[0] = len(chosen)
                best_sol[0] = list(chosen)
            return
        left = bin(uncovered).count("1")
        if len(chosen) + -(-left // max_size) >= best_len[0]:
            return
        # branch on the uncovered element with the fewest candidates
        cands = None
        rest = uncovered
        while rest:
            low = rest & -rest
            e = low.bit_length() - 1
            rest ^= low
            cs = cover_of[e]
            if cands is None or len(cs) < len(cands):
                cands = cs
                if len(cs) == 1:
                    break
        for c in sorted(cands, key=lambda c: (-bin(masks[c] & uncovered).count("1"), c)):
            chosen.append(c)
            rec(uncovered & ~masks[c], chosen)
            chosen.pop()

    rec(full, [])
    return sorted(best_sol[0])


def _solve(adj, solver, cap=EXACT_CAP):
    if solver == "greedy":
        return greedy_set_cover(adj)
    if solver == "exact":
        return exact_set_cover(adj, cap)
    if solver == "auto":
        return exact_set_cover(adj, None) if adj.shape[1] <= cap else greedy_set_cover(adj)
    raise ConfigurationError(f"unknown solver {solver!r}")


# ---------------------------------------------------------------------------
# Covering and bracketing numbers
# ---------------------------------------------------------------------------


def proper_cover(cloud: MetricCloud, eps: float, solver: str = "greedy",
                 members=None) -> list[int]:
    """Indices of a proper ``eps``-cover of ``members`` (default: the whole cloud).

    Coverage is rechecked after solving.
    """
    if eps <= 0:
        raise ConfigurationError("eps must be > 0")
    idx = np.arange(len(cloud)) if members is None else np.asarray(members, dtype=int)
    D = cloud.distances[np.ix_(idx, idx)]
    adj = D <= eps + DIST_TOL
    if solver == "exact" and len(idx) > EXACT_CAP:
        raise CapacityError(
            f"exact covering number requested for {len(idx)} hypotheses (cap {EXACT_CAP})",
            size=len(idx), cap=EXACT_CAP)
    centers = [int(idx[c]) for c in _solve(adj, solver)]
    D_full = cloud.distances[np.ix_(centers, idx)]
    if not np.all((D_full <= eps + DIST_TOL).any(axis=0)):  # pragma: no cover - invariant
        raise AssertionError("cover recheck failed")
    return centers


def covering_number(cloud: MetricCloud, eps: float, solver: str = "greedy") -> int:
    """Size of a proper ``eps``-cover: minimal (exact) or greedy."""
    return len(proper_cover(cloud, eps, solver))


@dataclass
class Bracket:
    lower: np.ndarray
    upper: np.ndarray

    def width(self, weights, r=1) -> float:
        d = self.upper - self.lower
        return float(d @ weights) if r == 1 else float(math.sqrt(max((d * d) @ weights, 0)))

    def contains(self, V) -> np.ndarray:
        V = np.atleast_2d(V)
        return np.all((V >= self.lower - DIST_TOL) & (V <= self.upper + DIST_TOL), axis=1)


def candidate_brackets(cloud: MetricCloud, eps: float, members=None,
                       max_subset: int = BRACKET_SUBSET) -> list[tuple[tuple, Bracket]]:
    """Brackets spanned (pointwise min/max) by member subsets of size <= max_subset
    whose ``L_r`` width is at most ``eps``.

    Subsets are grown depth-first; a subset is extended only while its
    bracket stays narrow enough, since widths never shrink as a subset grows.
    """
    idx = np.arange(len(cloud)) if members is None else np.asarray(members, dtype=int)
    V = cloud.vectors
    out = []

    def grow(start, subset, lo, hi):
        out.append((tuple(subset), Bracket(lo, hi)))
        if len(subset) == max_subset:
            return
        for j in range(start, len(idx)):
            v = V[idx[j]]
            nlo, nhi = np.minimum(lo, v), np.maximum(hi, v)
            if Bracket(nlo, nhi).width(cloud.weights, cloud.r) <= eps + DIST_TOL:
                grow(j + 1, subset + [int(idx[j])], nlo, nhi)

    for i in range(len(idx)):
        v = V[idx[i]]
        grow(i + 1, [int(idx[i])], v.copy(), v.copy())
    return out


def bracket_cover(cloud: MetricCloud, eps: float, solver: str = "exact",
                  members=None) -> list[Bracket]:
    """A minimal (over subset-generated candidates) family of ``eps``-brackets."""
    if eps <= 0:
        raise ConfigurationError("eps must be > 0")
    idx = np.arange(len(cloud)) if members is None else np.asarray(members, dtype=int)
    if solver == "exact" and len(idx) > EXACT_CAP:
        raise CapacityError(
            f"exact bracketing number requested for {len(idx)} hypotheses (cap {EXACT_CAP})",
            size=len(idx), cap=EXACT_CAP)
    cands = candidate_brackets(cloud, eps, idx)
    Vm = cloud.vectors[idx]
    seen = {}
    for _, br in cands:
        key = tuple(np.flatnonzero(br.contains(Vm)))
        seen.setdefault(key, br)
    keys = list(seen)
    adj = np.zeros((len(keys), len(idx)), dtype=bool)
    for c, key in enumerate(keys):
        adj[c, list(key)] = True
    chosen = _solve(adj, solver)
    return [seen[keys[c]] for c in chosen]


def bracketing_number(cloud: MetricCloud, eps: float, solver: str = "exact") -> int:
    return len(bracket_cover(cloud, eps, solver))


# ---------------------------------------------------------------------------
# Local entropies
# ---------------------------------------------------------------------------


def gamma_grid(eps: float, diameter: float) -> list[float]:
    """``eps`` followed by the powers of two above it, up to the diameter."""
    grid = [float(eps)]
    j = math.floor(math.log2(eps)) + 1
    while 2.0**j <= diameter:
        grid.append(2.0**j)
        j += 1
    return grid


class _LocalCounter:
    """Memoized ``max_g N(G ∩ B(g, radius), gamma)`` over centers g."""

    def __init__(self, cloud: MetricCloud, bracketing: bool, solver: str):
        self.cloud = cloud
        self.bracketing = bracketing
        self.solver = solver
        self._ball_cache: dict = {}
        self._level_cache: dict = {}

    def count(self, members: tuple, gamma: float) -> int:
        key = (members, gamma)
        if key not in self._ball_cache:
            if len(members) == 1:
                self._ball_cache[key] = 1
            elif self.bracketing:
                solver = self.solver if self.solver != "auto" else (
                    "exact" if len(members) <= EXACT_CAP else "greedy")
                self._ball_cache[key] = len(bracket_cover(self.cloud, gamma, solver, members))
            else:
                self._ball_cache[key] = len(proper_cover(self.cloud, gamma, self.solver, members))
        return self._ball_cache[key]

    def level(self, radius: float, gamma: float) -> tuple[int, int]:
        """``(max count, argmax center)`` over balls of the given radius."""
        key = (radius, gamma)
        if key not in self._level_cache:
            D = self.cloud.distances
            best, arg = 0, 0
            for g in range(len(self.cloud)):
                members = tuple(np.flatnonzero(D[g] <= radius + DIST_TOL).tolist())
                c = self.count(members, gamma)
                if c > best:
                    best, arg = c, g
            self._level_cache[key] = (best, arg)
        return self._level_cache[key]


def local_entropy(cloud: MetricCloud, eps: float, beta: float = 1.0, B: float = 1.0,
                  bracketing: bool = False, solver: str = "auto", _counter=None) -> float:
    """``sup_{gamma >= eps} sup_g log N(G ∩ B(g, 2 B gamma^beta), gamma)``.

    gamma ranges over :func:`gamma_grid`; centers over every cloud member.
    """
    if eps <= 0:
        raise ConfigurationError("eps must be > 0")
    if B < 1 or not 0 <= beta <= 1:
        raise ConfigurationError("need B >= 1 and beta in [0, 1]")
    if len(cloud) == 1:
        return 0.0
    counter = _counter or _LocalCounter(cloud, bracketing, solver)
    best = 1
    for gamma in gamma_grid(eps, cloud.diameter):
        c, _ = counter.level(2.0 * B * gamma**beta, gamma)
        best = max(best, c)
    return math.log(best)


@dataclass
class LocalEntropyProfile:
    epsilons: np.ndarray
    dloc: np.ndarray
    bracketing: bool
    beta: float
    B: float


def local_entropy_profile(cloud: MetricCloud, epsilons, beta: float = 1.0, B: float = 1.0,
                          bracketing: bool = False, solver: str = "auto") -> LocalEntropyProfile:
    """Local entropy on a grid of scales, made non-increasing by a suffix maximum.

    Each grid value is a lower estimate of the supremum over all
    ``gamma >= eps``, so taking the running maximum from the right keeps it a
    lower estimate while restoring monotonicity.
    """
    eps = np.sort(np.asarray(epsilons, dtype=float))
    counter = _LocalCounter(cloud, bracketing, solver)
    vals = np.array([local_entropy(cloud, e, beta, B, bracketing, solver, counter) for e in eps])
    vals = np.maximum.accumulate(vals[::-1])[::-1]
    return LocalEntropyProfile(eps, vals, bracketing, beta, B)


def local_number(cloud: MetricCloud, radius: float, eps: float, bracketing: bool = False,
                 solver: str = "auto") -> int:
    """``sup_g N(G ∩ B(g, radius), eps)`` (or its bracketing analogue)."""
    return _LocalCounter(cloud, bracketing, solver).level(radius, eps)[0]


def chaining_check(cloud: MetricCloud, eps: float, beta: float, B: float, delta: float,
                   bracketing: bool = True, solver: str = "auto") -> dict:
    """Compare ``log N(2 delta B eps^beta, eps)`` with its local-entropy bound.

    The multiplier is ``log_4(16 delta)`` with bracketing and
    ``log_2(4 delta)`` without.
    """
    if delta <= 1:
        raise ConfigurationError("delta must exceed 1")
    lhs = math.log(local_number(cloud, 2 * delta * B * eps**beta, eps, bracketing, solver))
    dloc = local_entropy(cloud, eps, beta, B, bracketing, solver)
    mult = math.log(16 * delta, 4) if bracketing else math.log2(4 * delta)
    return {"lhs": lhs, "dloc": dloc, "multiplier": mult, "rhs": mult * dloc,
            "holds": lhs <= mult * dloc + 1e-12}


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------

FIXED_POINT_KINDS = ("gamma", "gamma_bracket", "gamma_star", "zeta")


@dataclass
class FixedPointResult:
    value: float
    k: float
    kind: str
    evidence: list
    converged: bool = True
    beta: float = 1.0
    B: float = 1.0


def fixed_point(cloud: MetricCloud, k: float, beta: float = 1.0, B: float = 1.0,
                kind: str = "gamma", lo: float = 1e-6, hi: float = 1.0, rtol: float = 1e-3,
                solver: str = "auto") -> FixedPointResult:
    """Smallest ``eps`` in ``[lo, hi]`` meeting the fixed-point inequality.

    ===============  ====================================================
    kind             inequality
    ===============  ====================================================
    gamma            ``k D(eps^(1/(2-beta)), beta, B) <= eps``
    gamma_bracket    same with the bracketing local entropy
    gamma_star       ``k D(B eps^(beta/(2-beta)), 1, 1) <= eps``
    zeta             ``k D_L2(eps, 1, 1) <= eps^2``
    ===============  ====================================================

    Bisection in log scale to relative tolerance ``rtol``.  ``evidence``
    lists ``(eps, lhs)`` pairs on both sides of the crossing.  If even
    ``hi`` fails, ``hi`` is returned with ``converged=False``.
    """
    if k <= 0:
        raise ConfigurationError("k must be > 0")
    if kind not in FIXED_POINT_KINDS:
        raise ConfigurationError(f"unknown fixed point kind {kind!r}")
    if kind == "zeta" and cloud.r != 2:
        raise ConfigurationError("zeta needs an L2 cloud")
    if kind != "zeta" and cloud.r != 1:
        raise ConfigurationError(f"{kind} needs an L1 cloud")
    bracketing = kind == "gamma_bracket"
    counter = _LocalCounter(cloud, bracketing, solver)

    def lhs(eps):
        if kind in ("gamma", "gamma_bracket"):
            scale, b_, B_ = eps ** (1.0 / (2.0 - beta)), beta, B
        elif kind == "gamma_star":
            scale, b_, B_ = B * eps ** (beta / (2.0 - beta)), 1.0, 1.0
        else:
            scale, b_, B_ = eps, 1.0, 1.0
        return k * local_entropy(cloud, scale, b_, B_, bracketing, solver, counter)

    def rhs(eps):
        return eps * eps if kind == "zeta" else eps

    params = dict(k=k, kind=kind, beta=beta, B=B)
    l_lo = lhs(lo)
    if l_lo <= rhs(lo):
        return FixedPointResult(lo, evidence=[(lo, l_lo)], **params)
    l_hi = lhs(hi)
    if l_hi > rhs(hi):
        return FixedPointResult(hi, evidence=[(hi, l_hi)], converged=False, **params)
    a, b = lo, hi
    la, lb = l_lo, l_hi
    while b / a - 1.0 > rtol:
        mid = math.sqrt(a * b)
        lm = lhs(mid)
        if lm <= rhs(mid):
            b, lb = mid, lm
        else:
            a, la = mid, lm
    return FixedPointResult(b, evidence=[(a, la), (b, lb)], **params)
