"""Examples, hypothesis classes, synthetic distributions and risk evaluation.

Labels are ``+1``/``-1`` for classification and real numbers in ``[-1, 1]``
for square-loss regression.  Points are always stored as ``(n, d)`` float
arrays; finite domains use an ``(m, d)`` array of atoms (by default the
integers ``0..m-1`` as a single column).

Risk evaluation prefers closed forms.  Exact values are available for finite
supports, for homogeneous halfspaces under the rotationally symmetric
marginals (disagreement = angle / pi), for intervals under the uniform law on
``[-1, 1]`` and for linear regressors under the uniform ball/sphere.  All
other combinations fall back to Monte Carlo on a fixed evaluation set drawn
with :data:`EVAL_SEED`.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError

#: Seed of the shared Monte Carlo evaluation set.  Independent of any
#: training seed used by the harness.
EVAL_SEED = 20_170_301
#: Number of Monte Carlo evaluation points.
MC_POINTS = 100_000

LOSSES = ("binary", "square")


# ---------------------------------------------------------------------------
# Examples and samples
# ---------------------------------------------------------------------------


class LabeledExample(NamedTuple):
    x: tuple
    y: float


@dataclass(eq=False)
class Sample:
    """An ordered sample ``(x_i, y_i)``, i = 1..n, as drawn."""

    X: np.ndarray
    y: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.X = X
        self.y = np.asarray(self.y, dtype=float)
        if self.X.shape[0] != self.y.shape[0]:
            raise ConfigurationError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )

    def __len__(self):
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(tuple(x), float(y)) for x, y in zip(self.X.tolist(), self.y)]

    def keys(self) -> list[tuple]:
        """Hashable ``(x, y)`` keys, one per example, in sample order."""
        return [(tuple(x), float(y)) for x, y in zip(self.X.tolist(), self.y.tolist())]

    def key_set(self) -> frozenset:
        return frozenset(self.keys())

    def take(self, idx) -> "Sample":
        idx = np.asarray(idx, dtype=int)
        return Sample(self.X[idx], self.y[idx], self.seed)

    def drop(self, i: int) -> "Sample":
        keep = np.ones(len(self), dtype=bool)
        keep[i] = False
        return Sample(self.X[keep], self.y[keep], self.seed)

    def head(self, m: int) -> "Sample":
        return Sample(self.X[:m], self.y[:m], self.seed)

    def permuted(self, rng: np.random.Generator) -> "Sample":
        return self.take(rng.permutation(len(self)))

    @classmethod
    def from_examples(cls, examples: Sequence, seed=None) -> "Sample":
        X = np.array([np.atleast_1d(np.asarray(e[0], dtype=float)) for e in examples])
        y = np.array([float(e[1]) for e in examples])
        if len(examples) == 0:
            X = np.zeros((0, 1))
        return cls(X, y, seed)


def empty_sample(d: int) -> Sample:
    return Sample(np.zeros((0, d)), np.zeros(0))


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------


def _sign(v: np.ndarray) -> np.ndarray:
    # sign(0) is +1 throughout the package
    return np.where(v >= 0, 1.0, -1.0)


class Hypothesis:
    """Base class: a callable mapping an ``(n, d)`` array to ``n`` predictions."""

    binary = True

    def __call__(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def key(self):
        """Hashable identity used to detect duplicate hypotheses."""
        raise NotImplementedError


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


class HomogeneousHalfspace(Hypothesis):
    """``x -> sign(w . x)``."""

    def __init__(self, w):
        self.w = np.asarray(w, dtype=float).ravel()
        if not np.any(self.w):
            raise ConfigurationError("halfspace normal must be nonzero")

    def __call__(self, X):
        return _sign(_as_points(X) @ self.w)

    def key(self):
        return ("hh", tuple(np.round(self.w / np.linalg.norm(self.w), 12)))

    def __repr__(self):
        return f"HomogeneousHalfspace(w={self.w.tolist()})"


class AffineHalfspace(Hypothesis):
    """``x -> sign(w . x + b)``."""

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=float).ravel()
        self.b = float(b)
        if not np.any(self.w):
            raise ConfigurationError("halfspace normal must be nonzero")

    def __call__(self, X):
        return _sign(_as_points(X) @ self.w + self.b)

    def key(self):
        s = np.linalg.norm(self.w)
        return ("ah", tuple(np.round(self.w / s, 12)), round(self.b / s, 12))

    def __repr__(self):
        return f"AffineHalfspace(w={self.w.tolist()}, b={self.b})"


class Interval(Hypothesis):
    """``+1`` on the closed interval ``[lo, hi]`` of the first coordinate.

    ``lo > hi`` encodes the empty interval (the all-negative hypothesis).
    """

    def __init__(self, lo, hi):
        self.lo = float(lo)
        self.hi = float(hi)

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def __call__(self, X):
        x = _as_points(X)[:, 0]
        return np.where((x >= self.lo) & (x <= self.hi), 1.0, -1.0)

    def key(self):
        return ("iv", None) if self.empty else ("iv", self.lo, self.hi)

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi})"


class Rectangle(Hypothesis):
    """``+1`` on the closed axis-aligned box ``[lo, hi]``; empty if any lo > hi."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float).ravel()
        self.hi = np.asarray(hi, dtype=float).ravel()

    @property
    def empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    def __call__(self, X):
        X = _as_points(X)
        inside = np.all((X >= self.lo) & (X <= self.hi), axis=1)
        return np.where(inside, 1.0, -1.0)

    def key(self):
        if self.empty:
            return ("rect", None)
        return ("rect", tuple(self.lo), tuple(self.hi))

    def __repr__(self):
        return f"Rectangle(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class ConstantHypothesis(Hypothesis):
    def __init__(self, label):
        self.label = float(label)

    def __call__(self, X):
        return np.full(_as_points(X).shape[0], self.label)

    def key(self):
        return ("const", self.label)

    def __repr__(self):
        return f"ConstantHypothesis({self.label:+g})"


class TableHypothesis(Hypothesis):
    """A labeling of a finite domain given as a table over its atoms."""

    def __init__(self, atoms, values):
        self.atoms = _as_points(atoms)
        self.values = np.asarray(values, dtype=float).ravel()
        if self.values.shape[0] != self.atoms.shape[0]:
            raise ConfigurationError("table length must match the number of atoms")
        self.binary = bool(np.all(np.isin(self.values, (-1.0, 1.0))))
        self._index = {tuple(a): i for i, a in enumerate(self.atoms.tolist())}

    def __call__(self, X):
        X = _as_points(X)
        try:
            idx = [self._index[tuple(x)] for x in X.tolist()]
        except KeyError as exc:
            raise ConfigurationError(f"point {exc.args[0]} is not an atom of the domain") from None
        return self.values[np.asarray(idx, dtype=int)]

    def key(self):
        return ("table", tuple(self.values.tolist()))

    def __repr__(self):
        return f"TableHypothesis({self.values.tolist()})"


class LinearRegressor(Hypothesis):
    """Real-valued ``x -> w . x``."""

    binary = False

    def __init__(self, w):
        self.w = np.asarray(w, dtype=float).ravel()

    def __call__(self, X):
        return _as_points(X) @ self.w

    def key(self):
        return ("lin", tuple(np.round(self.w, 12)))

    def __repr__(self):
        return f"LinearRegressor(w={self.w.tolist()})"


def predict_all(hypotheses, X) -> np.ndarray:
    """``(len(hypotheses), n)`` predictions, vectorized for linear families."""
    X = _as_points(X)
    kinds = {type(h) for h in hypotheses}
    if kinds == {HomogeneousHalfspace}:
        W = np.stack([h.w for h in hypotheses])
        return np.where(X @ W.T >= 0, 1.0, -1.0).T
    if kinds == {LinearRegressor}:
        W = np.stack([h.w for h in hypotheses])
        return W @ X.T
    return np.stack([h(X) for h in hypotheses])


# ---------------------------------------------------------------------------
# Hypothesis classes
# ---------------------------------------------------------------------------

CLASS_KINDS = (
    "finite",
    "homogeneous-halfspace",
    "affine-halfspace",
    "interval",
    "rectangle",
    "bounded-regression-grid",
)


@dataclass(eq=False)
class HypothesisClass:
    """A finite (or finitely discretized) hypothesis class."""

    kind: str
    members: list
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CLASS_KINDS:
            raise ConfigurationError(f"unknown class kind {self.kind!r}")
        if not self.members:
            raise ConfigurationError("hypothesis class is empty")
        keys = [h.key() for h in self.members]
        if len(set(keys)) != len(keys):
            raise ConfigurationError("hypothesis class contains duplicate hypotheses")

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    def index(self, h: Hypothesis) -> int | None:
        """Position of a hypothesis equal to ``h``, or None."""
        k = h.key()
        for i, g in enumerate(self.members):
            if g.key() == k:
                return i
        return None

    def predict(self, X) -> np.ndarray:
        """``(len(class), n)`` matrix of predictions."""
        X = _as_points(X)
        if self.kind == "homogeneous-halfspace":
            W = np.stack([h.w for h in self.members])
            return _sign(W @ X.T)
        if self.kind == "affine-halfspace":
            W = np.stack([h.w for h in self.members])
            b = np.array([h.b for h in self.members])
            return _sign(W @ X.T + b[:, None])
        if self.kind == "bounded-regression-grid":
            W = np.stack([h.w for h in self.members])
            return W @ X.T
        return np.stack([h(X) for h in self.members])


def finite_class(labels, atoms=None) -> HypothesisClass:
    """Explicit class of ``+-1`` label vectors over a finite domain."""
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if atoms is None:
        atoms = np.arange(labels.shape[1], dtype=float)[:, None]
    atoms = _as_points(atoms)
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ConfigurationError("finite class labels must be +1 or -1")
    members = [TableHypothesis(atoms, row) for row in labels]
    return HypothesisClass("finite", members, atoms.shape[1], {"atoms": atoms})


def unit_directions(d: int, size: int, seed: int = 0, offset: float = 0.0) -> np.ndarray:
    """``size`` unit vectors: equally spaced angles for d = 2, seeded Gaussian otherwise."""
    if d == 1:
        base = np.array([[1.0], [-1.0]])
        return base[:size]
    if d == 2:
        ang = offset + 2.0 * np.pi * np.arange(size) / size
        return np.column_stack([np.cos(ang), np.sin(ang)])
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((size, d))
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def homogeneous_halfspaces(d: int, size: int, seed: int = 0, offset: float = 0.0) -> HypothesisClass:
    """Discretization of the homogeneous halfspaces of R^d."""
    if size > 10_000:
        raise ConfigurationError(f"discretization of {size} hypotheses exceeds the 10^4 cap")
    W = unit_directions(d, size, seed, offset)
    members = [HomogeneousHalfspace(w) for w in W]
    return HypothesisClass("homogeneous-halfspace", members, d, {"size": size, "offset": offset})


def affine_halfspaces(d: int, size: int, seed: int = 0, max_offset: float = 1.0) -> HypothesisClass:
    rng = np.random.default_rng(seed)
    W = unit_directions(d, size, seed + 1) if d > 2 else unit_directions(d, size, offset=0.0)
    b = rng.uniform(-max_offset, max_offset, size)
    members = [AffineHalfspace(w, bi) for w, bi in zip(W, b)]
    return HypothesisClass("affine-halfspace", members, d, {"size": size})


def intervals_on_grid(grid) -> HypothesisClass:
    """All intervals ``[a, b]`` with endpoints on ``grid`` plus the empty interval."""
    grid = np.sort(np.asarray(grid, dtype=float))
    members = [Interval(1.0, 0.0)]
    for i, a in enumerate(grid):
        for b in grid[i:]:
            members.append(Interval(a, b))
    return HypothesisClass("interval", members, 1, {"grid": grid})


def rectangles_on_grid(grid) -> HypothesisClass:
    """All axis-aligned rectangles in the plane with corners on ``grid x grid``."""
    grid = np.sort(np.asarray(grid, dtype=float))
    members = [Rectangle([1.0, 1.0], [0.0, 0.0])]
    spans = [(a, b) for i, a in enumerate(grid) for b in grid[i:]]
    for ax, bx in spans:
        for ay, by in spans:
            members.append(Rectangle([ax, ay], [bx, by]))
    return HypothesisClass("rectangle", members, 2, {"grid": grid})


def regression_grid(d: int, size: int, radius: float = 0.75) -> HypothesisClass:
    """Linear regressors ``x -> w . x`` on a grid with ``||w|| <= radius``.

    For d = 1 the grid is ``size`` equally spaced slopes in ``[-radius, radius]``;
    for d = 2 it is a ``size x size`` square grid intersected with the disc.
    """
    if d == 1:
        W = np.linspace(-radius, radius, size)[:, None]
    elif d == 2:
        g = np.linspace(-radius, radius, size)
        W = np.array([(a, b) for a in g for b in g if a * a + b * b <= radius**2 + 1e-12])
    else:
        raise ConfigurationError("regression grids are available for d in {1, 2}")
    members = [LinearRegressor(w) for w in W]
    return HypothesisClass("bounded-regression-grid", members, d, {"radius": radius})


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

MARGINALS = ("ball", "sphere", "pmf")
NOISES = ("realizable", "massart", "regression")


@dataclass(frozen=True, eq=False)
class Marginal:
    kind: str
    d: int
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray | None]:
        """``n`` i.i.d. points and, for finite supports, their atom indices."""
        if self.kind == "pmf":
            idx = rng.choice(len(self.weights), size=n, p=self.weights)
            return self.atoms[idx], idx
        G = rng.standard_normal((n, self.d))
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        if self.kind == "sphere":
            return G, None
        r = rng.random(n) ** (1.0 / self.d)
        return G * r[:, None], None

    def atom_index(self, X) -> np.ndarray:
        lookup = {tuple(a): i for i, a in enumerate(self.atoms.tolist())}
        try:
            return np.array([lookup[tuple(x)] for x in _as_points(X).tolist()], dtype=int)
        except KeyError as exc:
            raise ConfigurationError(f"point {exc.args[0]} is not an atom") from None


def uniform_ball(d: int) -> Marginal:
    return Marginal("ball", d)


def uniform_sphere(d: int) -> Marginal:
    return Marginal("sphere", d)


def finite_support(weights, atoms=None) -> Marginal:
    w = np.asarray(weights, dtype=float).ravel()
    if atoms is None:
        atoms = np.arange(w.shape[0], dtype=float)[:, None]
    atoms = _as_points(atoms)
    return Marginal("pmf", atoms.shape[1], atoms, w)


@dataclass(frozen=True, eq=False)
class Noise:
    """Label model around a target ``f*``.

    ``h`` is the margin ``|E[Y|X]|``: a scalar, or one value per atom for finite
    supports.  ``sigma`` is the two-point noise level for regression.
    """

    kind: str
    target: Hypothesis
    h: float | np.ndarray = 1.0
    sigma: float = 0.0


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    marginal: Marginal
    noise: Noise

    def __post_init__(self):
        validate_spec(self)

    @property
    def target(self) -> Hypothesis:
        return self.noise.target

    @property
    def d(self) -> int:
        return self.marginal.d

    @property
    def loss(self) -> str:
        return "square" if self.noise.kind == "regression" else "binary"

    def margin(self, X=None, idx=None) -> np.ndarray | float:
        """``|E[Y|X]|`` at the given points (scalar when constant)."""
        h = self.noise.h
        if np.ndim(h) == 0:
            return float(h)
        if idx is None:
            idx = self.marginal.atom_index(X)
        return np.asarray(h, dtype=float)[idx]


def realizable(marginal: Marginal, target: Hypothesis) -> DistributionSpec:
    return DistributionSpec(marginal, Noise("realizable", target, 1.0))


def massart(marginal: Marginal, target: Hypothesis, h) -> DistributionSpec:
    """``P(Y = f*(X) | X) = (1 + h) / 2``; ``h`` may vary over the atoms of a pmf."""
    return DistributionSpec(marginal, Noise("massart", target, h))


def bounded_regression(marginal: Marginal, target: Hypothesis, sigma: float) -> DistributionSpec:
    """``Y = f*(X) + sigma * s`` with ``s`` a Rademacher sign independent of X."""
    return DistributionSpec(marginal, Noise("regression", target, 1.0, float(sigma)))


def validate_spec(spec: DistributionSpec) -> None:
    errors = []
    m, nz = spec.marginal, spec.noise
    if m.kind not in MARGINALS:
        errors.append(f"unknown marginal {m.kind!r}")
    if m.d < 1:
        errors.append("dimension must be >= 1")
    if m.kind == "pmf":
        if m.weights is None or m.weights.size == 0:
            errors.append("pmf marginal is empty")
        else:
            if np.any(m.weights < 0):
                errors.append("pmf weights must be nonnegative")
            if abs(m.weights.sum() - 1.0) > 1e-12:
                errors.append(f"pmf weights sum to {m.weights.sum()!r}, not 1")
            if m.atoms.shape[0] != m.weights.shape[0]:
                errors.append("pmf atoms and weights differ in length")
    if nz.kind not in NOISES:
        errors.append(f"unknown noise model {nz.kind!r}")
    h = np.asarray(nz.h, dtype=float)
    if np.any(h <= 0) or np.any(h > 1) or not np.all(np.isfinite(h)):
        errors.append("margin h must lie in (0, 1]")
    if h.ndim > 0:
        if m.kind != "pmf":
            errors.append("a per-point margin profile requires a pmf marginal")
        elif m.weights is not None and h.shape[0] != m.weights.shape[0]:
            errors.append("margin profile length differs from the number of atoms")
    if nz.kind == "realizable" and np.any(h != 1):
        errors.append("realizable noise has h = 1")
    if nz.kind == "regression":
        if not 0 <= nz.sigma <= 0.25:
            errors.append("regression noise level sigma must lie in [0, 0.25]")
        bound = _sup_abs(nz.target, m)
        if bound is not None and bound + nz.sigma > 1 + 1e-12:
            errors.append(
                f"labels may leave [-1, 1]: sup|f*| = {bound:.4g} with sigma = {nz.sigma}"
            )
    elif not getattr(nz.target, "binary", True):
        errors.append("classification noise requires a binary target")
    if errors:
        raise ConfigurationError("; ".join(errors), errors)


def _sup_abs(f: Hypothesis, marginal: Marginal) -> float | None:
    if marginal.kind == "pmf":
        return float(np.max(np.abs(f(marginal.atoms))))
    if isinstance(f, LinearRegressor):
        return float(np.linalg.norm(f.w))
    return None


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def generate_sample(spec: DistributionSpec, n: int, seed: int) -> Sample:
    """Draw ``n`` i.i.d. labeled examples, deterministically in ``seed``.

    Classification labels are flipped with probability ``(1 - h) / 2``; the
    uniform variates are drawn even when ``h = 1`` so a realizable spec and a
    Massart spec with ``h = 1`` produce identical samples.
    """
    if n < 1:
        raise ConfigurationError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    X, idx = spec.marginal.draw(rng, n)
    fx = spec.target(X)
    if spec.noise.kind == "regression":
        s = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        y = fx + spec.noise.sigma * s
    else:
        h = spec.margin(X, idx) if spec.marginal.kind == "pmf" else spec.margin()
        u = rng.random(n)
        y = np.where(u < (1.0 - np.asarray(h)) / 2.0, -fx, fx)
    return Sample(X, y, seed)


@functools.lru_cache(maxsize=16)
def _eval_points_cached(kind: str, d: int, m: int, seed: int) -> np.ndarray:
    X, _ = Marginal(kind, d).draw(np.random.default_rng(seed), m)
    X.setflags(write=False)
    return X


def eval_points(marginal: Marginal, m: int = MC_POINTS, seed: int = EVAL_SEED) -> np.ndarray:
    """Fixed Monte Carlo evaluation set for a continuous marginal."""
    if marginal.kind == "pmf":
        raise ConfigurationError("finite supports are evaluated exactly")
    return _eval_points_cached(marginal.kind, marginal.d, m, seed)


def expectation(spec: DistributionSpec, fn: Callable, m: int = MC_POINTS):
    """``E fn(X, idx)`` over the marginal: ``(value, stderr, exact)``.

    ``fn`` receives points and (for finite supports) their atom indices and
    returns one value per point.
    """
    marg = spec.marginal
    if marg.kind == "pmf":
        vals = np.asarray(fn(marg.atoms, np.arange(len(marg.weights))), dtype=float)
        return float(vals @ marg.weights), 0.0, True
    X = eval_points(marg, m)
    vals = np.asarray(fn(X, None), dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))), False


# ---------------------------------------------------------------------------
# Risks
# ---------------------------------------------------------------------------


def _check_loss(loss: str) -> None:
    if loss not in LOSSES:
        raise ConfigurationError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def _exact_disagreement(f: Hypothesis, g: Hypothesis, marginal: Marginal) -> float | None:
    if marginal.kind in ("ball", "sphere"):
        if isinstance(f, HomogeneousHalfspace) and isinstance(g, HomogeneousHalfspace):
            if marginal.d == 1:
                return 0.0 if np.sign(f.w[0]) == np.sign(g.w[0]) else 1.0
            u, v = f.w / np.linalg.norm(f.w), g.w / np.linalg.norm(g.w)
            # angle via 2 atan2(|u - v|, |u + v|), accurate near 0 and pi
            return float(2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v)) / np.pi)
        if (
            marginal.kind == "ball"
            and marginal.d == 1
            and isinstance(f, (Interval, ConstantHypothesis))
            and isinstance(g, (Interval, ConstantHypothesis))
        ):
            return _interval_disagreement(f, g)
    return None


def _clip_interval(h) -> tuple[float, float]:
    if isinstance(h, ConstantHypothesis):
        return (-1.0, 1.0) if h.label > 0 else (1.0, -1.0)
    lo, hi = max(h.lo, -1.0), min(h.hi, 1.0)
    return (lo, hi) if lo <= hi else (1.0, -1.0)


def _interval_disagreement(f, g) -> float:
    # uniform law on [-1, 1]: P(f != g) = |A symmetric-difference B| / 2
    (a, b), (c, e) = _clip_interval(f), _clip_interval(g)
    la, lb = max(b - a, 0.0), max(e - c, 0.0)
    inter = max(min(b, e) - max(a, c), 0.0) if la > 0 and lb > 0 else 0.0
    return (la + lb - 2.0 * inter) / 2.0


def disagreement_mass(f: Hypothesis, g: Hypothesis, spec: DistributionSpec, return_stderr=False):
    """``P(f(X) != g(X))``; exact where a closed form exists."""
    exact = _exact_disagreement(f, g, spec.marginal)
    if exact is not None:
        return (exact, 0.0) if return_stderr else exact
    val, se, _ = expectation(spec, lambda X, idx: f(X) != g(X))
    return (val, se) if return_stderr else val


def _linear_second_moment(marginal: Marginal) -> float | None:
    # E[(v . X)^2] / ||v||^2 for the uniform ball / sphere
    if marginal.kind == "ball":
        return 1.0 / (marginal.d + 2)
    if marginal.kind == "sphere":
        return 1.0 / marginal.d
    return None


def l2_distance_sq(f: Hypothesis, g: Hypothesis, spec: DistributionSpec) -> float:
    """``||f - g||^2_{L2(P_X)}``."""
    if isinstance(f, LinearRegressor) and isinstance(g, LinearRegressor):
        c = _linear_second_moment(spec.marginal)
        if c is not None:
            dw = f.w - g.w
            return float(c * (dw @ dw))
    val, _, _ = expectation(spec, lambda X, idx: (f(X) - g(X)) ** 2)
    return val


def true_risk(h: Hypothesis, spec: DistributionSpec, loss: str | None = None, return_stderr=False):
    """``R(h) = E loss(h(X), Y)``.

    Conditional risks given X are integrated exactly over the label noise;
    the remaining expectation over X is exact when a closed form exists and a
    Monte Carlo average over :func:`eval_points` otherwise.
    """
    loss = loss or spec.loss
    _check_loss(loss)
    f_star = spec.target
    if loss == "binary":
        if np.ndim(spec.noise.h) == 0:
            hm = float(spec.noise.h)
            dis, se = disagreement_mass(h, f_star, spec, return_stderr=True)
            val, se = (1.0 - hm) / 2.0 + hm * dis, hm * se
        else:

            def cond(X, idx):
                m = spec.margin(X, idx)
                return np.where(h(X) == f_star(X), (1.0 - m) / 2.0, (1.0 + m) / 2.0)

            val, se, _ = expectation(spec, cond)
    else:
        s2 = spec.noise.sigma**2 if spec.noise.kind == "regression" else 0.0
        val, se = l2_distance_sq(h, f_star, spec) + s2, 0.0
        if not (isinstance(h, LinearRegressor) and _linear_second_moment(spec.marginal)):
            if spec.marginal.kind != "pmf":
                _, se, _ = expectation(spec, lambda X, idx: (h(X) - f_star(X)) ** 2)
    return (val, se) if return_stderr else val


def excess_risk(h: Hypothesis, spec: DistributionSpec, loss: str | None = None) -> float:
    """``R(h) - R(f*)``, computed without cancellation where possible."""
    loss = loss or spec.loss
    _check_loss(loss)
    f_star = spec.target
    if loss == "binary":
        if np.ndim(spec.noise.h) == 0:
            return float(spec.noise.h) * disagreement_mass(h, f_star, spec)
        val, _, _ = expectation(
            spec, lambda X, idx: spec.margin(X, idx) * (h(X) != f_star(X))
        )
        return val
    return l2_distance_sq(h, f_star, spec)


# ---------------------------------------------------------------------------
# Bernstein conditions
# ---------------------------------------------------------------------------

ZERO_MEAN_TOL = 1e-9
ZERO_ABS_TOL = 1e-6


@dataclass
class BernsteinEstimate:
    kind: str
    beta: float
    B: float
    witness: int | None
    table: dict = field(default_factory=dict)


def loss_moments(cls: HypothesisClass, spec: DistributionSpec, loss: str | None = None,
                 mode: str = "excess") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-member ``(Pg, P|g|, Pg^2)`` for the loss or excess-loss class."""
    loss = loss or spec.loss
    _check_loss(loss)
    if mode not in ("excess", "loss"):
        raise ConfigurationError(f"mode must be 'excess' or 'loss', not {mode!r}")
    f_star = spec.target
    out = np.zeros((3, len(cls)))
    for j, f in enumerate(cls):
        if loss == "binary":
            if mode == "excess":
                dis = disagreement_mass(f, f_star, spec)
                out[:, j] = excess_risk(f, spec, loss), dis, dis
            else:
                r = true_risk(f, spec, loss)
                out[:, j] = r, r, r
        else:
            sigma = spec.noise.sigma if spec.noise.kind == "regression" else 0.0

            def moments(X, idx, f=f):
                dlt = f(X) - f_star(X)
                if mode == "excess":
                    a, b = dlt * dlt - 2 * sigma * dlt, dlt * dlt + 2 * sigma * dlt
                    return np.stack([dlt * dlt, (np.abs(a) + np.abs(b)) / 2,
                                     (a * a + b * b) / 2])
                a, b = (dlt - sigma) ** 2, (dlt + sigma) ** 2
                return np.stack([(a + b) / 2, (a + b) / 2, (a * a + b * b) / 2])

            marg = spec.marginal
            if marg.kind == "pmf":
                out[:, j] = moments(marg.atoms, None) @ marg.weights
            else:
                out[:, j] = moments(eval_points(marg), None).mean(axis=1)
    return out[0], out[1], out[2]


def estimate_bernstein(cls: HypothesisClass, spec: DistributionSpec, loss: str | None = None,
                       kind: str = "L1", beta_grid=(0.0, 0.25, 0.5, 0.75, 1.0),
                       mode: str = "excess") -> BernsteinEstimate:
    """Smallest ``B >= 1`` with ``P|g| <= B (Pg)^beta`` (L1) or ``Pg^2 <= B (Pg)^beta`` (L2).

    Returns the largest feasible ``beta`` of the grid with its minimal ``B``.
    Members with ``Pg <= 1e-9`` are treated as ``Pg = 0``: they are harmless
    when their moment is ``<= 1e-6`` and otherwise make every ``beta > 0``
    infeasible.
    """
    if len(cls) == 0:
        raise ConfigurationError("empty class")
    if kind not in ("L1", "L2"):
        raise ConfigurationError(f"kind must be 'L1' or 'L2', not {kind!r}")
    pg, pabs, psq = loss_moments(cls, spec, loss, mode)
    moment = pabs if kind == "L1" else psq
    zero = pg <= ZERO_MEAN_TOL
    bad_zero = zero & (moment > ZERO_ABS_TOL)
    table = {}
    witness_for = {}
    for beta in sorted(float(b) for b in beta_grid):
        if beta > 0 and np.any(bad_zero):
            table[beta] = math.inf
            witness_for[beta] = int(np.flatnonzero(bad_zero)[0])
            continue
        if beta == 0:
            ratio = moment.copy()
        else:
            ratio = np.where(zero, 0.0, moment / np.where(zero, 1.0, np.maximum(pg, 0.0) ** beta))
        j = int(np.argmax(ratio))
        table[beta] = max(1.0, float(ratio[j]))
        witness_for[beta] = j
    feasible = [b for b, val in table.items() if math.isfinite(val)]
    if not feasible:
        return BernsteinEstimate(kind, math.nan, math.inf, None, table)
    beta = max(feasible)
    return BernsteinEstimate(kind, beta, table[beta], witness_for[beta], table)
