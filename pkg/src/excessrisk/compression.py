"""Sample compression schemes, their audits, and the psi counting oracle."""

from __future__ import annotations

import bisect
import copy
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import domain
from .domain import Hypothesis, Interval, Rectangle, Sample
from .errors import CapacityError, ConfigurationError, InconsistencyError, SchemeSizeError

PSI_CAP = 10


def check_function_labels(sample: Sample) -> None:
    """Reject samples where one point carries both labels."""
    seen: dict = {}
    for x, y in sample.keys():
        if seen.setdefault(x, y) != y:
            raise InconsistencyError(f"point {x} appears with both labels")


def lex_order(X: np.ndarray) -> np.ndarray:
    """Stable lexicographic order of the rows of ``X`` (exact comparisons)."""
    X = np.asarray(X)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=int)
    return np.lexsort(X.T[::-1])


def canonical(sample: Sample) -> Sample:
    """Sample sorted by ``(x, y)`` lexicographically; a set-level normal form."""
    if len(sample) == 0:
        return sample
    keys = np.column_stack([sample.X, sample.y])
    return sample.take(np.lexsort(keys.T[::-1]))


class CompressionScheme:
    """A compression map paired with a reconstruction map.

    Subclasses implement :meth:`compress` (returning a subsample of the
    input) and :meth:`reconstruct`.  ``k`` is the declared size bound.
    """

    scheme_id = "abstract"
    k: int = 0
    output_class: str | None = None

    def compress(self, sample: Sample) -> Sample:  # pragma: no cover - abstract
        raise NotImplementedError

    def reconstruct(self, subsample: Sample) -> Hypothesis:  # pragma: no cover - abstract
        raise NotImplementedError

    def fit(self, sample: Sample) -> Hypothesis:
        return self.reconstruct(self.compress(sample))

    def _checked(self, sample: Sample, sub: Sample) -> Sample:
        if len(sub) > self.k:
            raise SchemeSizeError(f"{self.scheme_id}: compression set of size {len(sub)} > k={self.k}")
        return sub

    def __repr__(self):
        return f"{type(self).__name__}(k={self.k})"


class IntervalClosureScheme(CompressionScheme):
    """Smallest interval containing the positive examples (d = 1)."""

    scheme_id = "intervals"
    k = 2
    output_class = "interval"

    def compress(self, sample: Sample) -> Sample:
        check_function_labels(sample)
        x = sample.X[:, 0]
        pos = np.flatnonzero(sample.y > 0)
        if pos.size == 0:
            return sample.take([])
        lo, hi = x[pos].min(), x[pos].max()
        inside_neg = (sample.y < 0) & (x >= lo) & (x <= hi)
        if inside_neg.any():
            raise InconsistencyError("sample is not realizable by an interval")
        keep = sorted({int(pos[np.argmax(x[pos] == lo)]), int(pos[np.argmax(x[pos] == hi)])})
        return self._checked(sample, sample.take(keep))

    def reconstruct(self, subsample: Sample) -> Hypothesis:
        pos = subsample.y > 0
        if not pos.any():
            return Interval(1.0, 0.0)
        x = subsample.X[pos, 0]
        return Interval(float(x.min()), float(x.max()))


class RectangleClosureScheme(CompressionScheme):
    """Smallest axis-aligned box containing the positive examples."""

    scheme_id = "rectangles"
    output_class = "rectangle"

    def __init__(self, d: int = 2):
        self.d = d
        self.k = 2 * d

    def compress(self, sample: Sample) -> Sample:
        check_function_labels(sample)
        pos = np.flatnonzero(sample.y > 0)
        if pos.size == 0:
            return sample.take([])
        P = sample.X[pos]
        lo, hi = P.min(axis=0), P.max(axis=0)
        neg = sample.X[sample.y < 0]
        if np.any(np.all((neg >= lo) & (neg <= hi), axis=1)):
            raise InconsistencyError("sample is not realizable by a rectangle")
        order = lex_order(P)
        chosen = set()
        for j in range(self.d):
            for target in (lo[j], hi[j]):
                # lexicographically smallest positive attaining the extreme
                hit = next(i for i in order if P[i, j] == target)
                chosen.add(int(pos[hit]))
        return self._checked(sample, sample.take(sorted(chosen)))

    def reconstruct(self, subsample: Sample) -> Hypothesis:
        pos = subsample.y > 0
        if not pos.any():
            return Rectangle(np.ones(self.d), np.zeros(self.d))
        P = subsample.X[pos]
        return Rectangle(P.min(axis=0), P.max(axis=0))


# ---------------------------------------------------------------------------
# Online learners and the online-to-batch scheme
# ---------------------------------------------------------------------------


class OnlineLearner:
    """Conservative online learner: :meth:`update` is only called on mistakes."""

    mistake_bound: int | None = None

    def predict(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=float)[None, :])[0])

    def update(self, x, y) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def copy(self) -> "OnlineLearner":
        return copy.deepcopy(self)


class Halving(OnlineLearner):
    """Majority vote of the version space; ties predict +1."""

    def __init__(self, cls: domain.HypothesisClass):
        self.cls = cls
        self.alive = np.ones(len(cls), dtype=bool)
        self.mistake_bound = int(math.floor(math.log2(len(cls))))

    def predict(self, X):
        P = self.cls.predict(X)[self.alive]
        return np.where(P.sum(axis=0) >= 0, 1.0, -1.0)

    def update(self, x, y):
        p = self.cls.predict(np.asarray(x, dtype=float)[None, :])[:, 0]
        self.alive &= p == y

    def copy(self):
        new = Halving.__new__(Halving)
        new.cls, new.alive, new.mistake_bound = self.cls, self.alive.copy(), self.mistake_bound
        return new


class Perceptron(OnlineLearner):
    """Homogeneous perceptron; with margin ``gamma`` in the unit ball it errs at most ``1/gamma^2`` times."""

    def __init__(self, d: int, mistake_bound: int | None = None):
        self.w = np.zeros(d)
        self.mistake_bound = mistake_bound

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(X @ self.w >= 0, 1.0, -1.0)

    def update(self, x, y):
        self.w = self.w + y * np.asarray(x, dtype=float)

    def copy(self):
        new = Perceptron(self.w.size, self.mistake_bound)
        new.w = self.w.copy()
        return new


class OnlineToBatchHypothesis(Hypothesis):
    """Predicts with the learner state reached on all compression points before ``x``."""

    def __init__(self, keys: list[tuple], labels: np.ndarray, states: list[OnlineLearner]):
        self.keys_ = keys
        self.labels = labels
        self.states = states
        self.lookup = dict(zip(keys, labels))

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        groups: dict[int, list[int]] = {}
        for i, row in enumerate(X):
            t = tuple(float(v) for v in row)
            if t in self.lookup:
                out[i] = self.lookup[t]
            else:
                groups.setdefault(bisect.bisect_left(self.keys_, t), []).append(i)
        for j, rows in groups.items():
            out[rows] = self.states[j].predict(X[rows])
        return out

    def key(self):
        return ("o2b", tuple(self.keys_), tuple(self.labels.tolist()))


class OnlineToBatchScheme(CompressionScheme):
    """Compression set = mistakes of a conservative learner run on the sorted sample."""

    output_class = None

    def __init__(self, learner: OnlineLearner, k: int | None = None, scheme_id: str = "online-to-batch"):
        self.learner = learner
        bound = k if k is not None else learner.mistake_bound
        if bound is None:
            raise ConfigurationError("online-to-batch needs a mistake bound")
        self.k = int(bound)
        self.scheme_id = scheme_id

    def _run(self, sample: Sample):
        order = lex_order(sample.X)
        learner = self.learner.copy()
        mistakes = []
        for i in order:
            x, y = sample.X[i], sample.y[i]
            if learner.predict_one(x) != y:
                learner.update(x, y)
                mistakes.append(int(i))
        return mistakes

    def compress(self, sample: Sample) -> Sample:
        check_function_labels(sample)
        mistakes = self._run(sample)
        if len(mistakes) > self.k:
            raise SchemeSizeError(f"{len(mistakes)} mistakes exceed the bound k={self.k}")
        return sample.take(mistakes)

    def reconstruct(self, subsample: Sample) -> Hypothesis:
        order = lex_order(subsample.X)
        learner = self.learner.copy()
        states = [learner.copy()]
        keys, labels = [], []
        for i in order:
            x, y = subsample.X[i], subsample.y[i]
            learner.update(x, y)
            states.append(learner.copy())
            keys.append(tuple(float(v) for v in x))
            labels.append(y)
        return OnlineToBatchHypothesis(keys, np.asarray(labels, dtype=float), states)


def online_to_batch(learner: OnlineLearner, order: str = "lex", k: int | None = None) -> OnlineToBatchScheme:
    if order != "lex":
        raise ConfigurationError("only the lexicographic order is supported")
    return OnlineToBatchScheme(learner, k)


class FirstKScheme(CompressionScheme):
    """Deliberately order-dependent: keeps the first ``k`` examples as drawn."""

    scheme_id = "first-k"

    def __init__(self, k: int = 2):
        self.k = k

    def compress(self, sample: Sample) -> Sample:
        return sample.head(min(self.k, len(sample)))

    def reconstruct(self, subsample: Sample) -> Hypothesis:
        return IntervalClosureScheme().reconstruct(subsample)


# ---------------------------------------------------------------------------
# Majority of three
# ---------------------------------------------------------------------------


class MajorityVote(Hypothesis):
    def __init__(self, components, truncated: int = 0):
        self.components = list(components)
        self.truncated = truncated

    def __call__(self, X):
        s = sum(f(X) for f in self.components)
        return np.where(s >= 0, 1.0, -1.0)

    def key(self):
        return ("maj",) + tuple(f.key() for f in self.components)


def majority_of_three(scheme: CompressionScheme, sample: Sample) -> MajorityVote:
    """Vote of the reconstructions on the first third, two thirds and all of the sample."""
    m = len(sample) // 3
    if m == 0:
        raise ConfigurationError("majority of three needs at least 3 examples")
    parts = [scheme.fit(sample.head(j * m)) for j in (1, 2, 3)]
    return MajorityVote(parts, truncated=len(sample) - 3 * m)


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------


@dataclass
class SchemeAudit:
    scheme_id: str
    valid: bool = True
    permutation_invariant: bool = True
    stable: bool = True
    homogeneous: bool = True
    size_ok: bool = True
    max_size: int = 0
    n_samples: int = 0
    counterexample: dict | None = None

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        if self.counterexample is not None:
            ce = dict(self.counterexample)
            if "sample" in ce:
                ce["sample"] = [list(map(float, x)) + [float(y)] for x, y in ce["sample"].keys()]
            out["counterexample"] = ce
        return out


def _drop_key(sample: Sample, key) -> Sample:
    """Remove every copy of an example from a sample."""
    keep = [i for i, k in enumerate(sample.keys()) if k != key]
    return sample.take(keep)


def audit(scheme: CompressionScheme, samples, n_perm: int = 5, seed: int = 0) -> SchemeAudit:
    """Check validity, permutation invariance, stability and homogeneity.

    Compression sets are compared as sets of ``(x, y)`` examples.  Removing
    an example removes all of its copies.
    """
    rep = SchemeAudit(scheme.scheme_id)
    rng = np.random.default_rng(seed)

    def fail(check, s, removed=None):
        setattr(rep, check, False)
        if rep.counterexample is None:
            rep.counterexample = {"check": check, "sample_seed": s.seed, "sample": s,
                                  "removed": removed}

    for s in samples:
        rep.n_samples += 1
        C = scheme.compress(s)
        ckeys = C.key_set()
        rep.max_size = max(rep.max_size, len(ckeys))
        if len(C) > scheme.k:
            fail("size_ok", s)
        f = scheme.reconstruct(C)
        if np.any(f(s.X) != s.y):
            fail("valid", s)
        for _ in range(n_perm):
            if scheme.compress(s.permuted(rng)).key_set() != ckeys:
                fail("permutation_invariant", s)
                break
        for e in sorted(s.key_set() - ckeys):
            if scheme.compress(_drop_key(s, e)).key_set() != ckeys:
                fail("stable", s, e)
                break
        for e in sorted(ckeys):
            rest = _drop_key(s, e)
            if not len(rest):
                continue
            if not (ckeys - {e}) <= scheme.compress(rest).key_set():
                fail("homogeneous", s, e)
                break
    return rep


# ---------------------------------------------------------------------------
# psi counting
# ---------------------------------------------------------------------------


@dataclass
class PsiCount:
    n: int
    p: int
    value: int
    scheme_id: str
    subsets: list = field(default_factory=list, repr=False)


def count_psi(scheme: CompressionScheme, points: Sample, p: int) -> PsiCount:
    """Number of ``p``-subsets whose removal makes the reconstruction on the rest err on all of them."""
    total = len(points)
    if p not in (1, 2, 3):
        raise ConfigurationError("p must be 1, 2 or 3")
    if total - p < 1:
        raise ConfigurationError("need n = len(points) - p >= 1")
    if total > PSI_CAP:
        raise CapacityError(f"{total} points exceed the psi counting cap of {PSI_CAP}",
                            size=total, cap=PSI_CAP)
    hits = []
    for T in combinations(range(total), p):
        rest = points.take([i for i in range(total) if i not in T])
        f = scheme.fit(rest)
        removed = points.take(list(T))
        if np.all(f(removed.X) != removed.y):
            hits.append(T)
    return PsiCount(total - p, p, len(hits), scheme.scheme_id, hits)


def psi_bound_stable(k: int, p: int) -> int:
    return k ** p


def psi_bound_homogeneous(k: int, p: int) -> int:
    return math.comb(k + p, p)
