"""Monte Carlo trial runner, bound registry and rate fits."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import domain, skeleton
from .compression import CompressionScheme, majority_of_three
from .domain import DistributionSpec, Hypothesis, Sample
from .entropy import MetricCloud, build_cloud, fixed_point
from .errors import ConfigurationError, ExcessRiskError, PrecisionError

log = logging.getLogger(__name__)

CSV_HEADER = ("learner_id", "n", "trial", "seed", "risk", "excess", "aux", "status")
LOWER_CONSTANT = 0.0725


def trial_seed(master_seed: int, learner_id: str, n: int, trial: int) -> int:
    """Mix ``(master_seed, crc32(learner_id), n, trial)`` through numpy's SeedSequence."""
    ss = np.random.SeedSequence([master_seed, zlib.crc32(learner_id.encode()), n, trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------


class Learner:
    """``fit`` returns ``(hypothesis, aux, checks)``; ``checks`` maps a check name to a bool."""

    learner_id = "learner"

    def prepare(self, n: int) -> None:
        pass

    def fit(self, sample: Sample) -> tuple[Hypothesis, float, dict]:  # pragma: no cover
        raise NotImplementedError


class ConstantLearner(Learner):
    def __init__(self, h: Hypothesis, learner_id: str = "constant"):
        self.h = h
        self.learner_id = learner_id

    def fit(self, sample):
        return self.h, 0.0, {}


class SchemeLearner(Learner):
    def __init__(self, scheme: CompressionScheme):
        self.scheme = scheme
        self.learner_id = f"scheme:{scheme.scheme_id}"

    def fit(self, sample):
        C = self.scheme.compress(sample)
        return self.scheme.reconstruct(C), float(len(C)), {}


class MajorityLearner(Learner):
    def __init__(self, scheme: CompressionScheme, spec: DistributionSpec | None = None):
        self.scheme = scheme
        self.spec = spec
        self.learner_id = f"majority:{scheme.scheme_id}"

    def fit(self, sample):
        g = majority_of_three(self.scheme, sample)
        checks = {}
        if self.spec is not None:
            X = domain.eval_points(self.spec.marginal, 10_000)
            t = self.spec.target(X)
            E = [f(X) != t for f in g.components]
            union = (E[0] & E[1]) | (E[0] & E[2]) | (E[1] & E[2])
            checks["majority_inclusion"] = bool(np.all(~(g(X) != t) | union))
        return g, float(g.truncated), checks


class NetErmLearner(Learner):
    """Net ERM with the net scale chosen from the fixed point at ``k = B/n``.

    One loss-class cloud is built up front; per ``n`` the fixed point, the
    scale and the net are computed once and reused for every trial.  With
    ``check_decompositions`` each trial also evaluates the two pathwise
    decompositions from the skeleton module.
    """

    def __init__(self, cls: domain.HypothesisClass, spec: DistributionSpec, beta: float = 1.0,
                 B: float = 1.0, delta: float = 0.05, variant: str = "cor", m: int = 2880,
                 lattice: bool = True, fp_cache: dict | None = None, check_decompositions: bool = False,
                 learner_id: str = "net-erm"):
        self.cls, self.spec = cls, spec
        self.beta, self.B, self.delta, self.variant = beta, B, delta, variant
        # a shared cache lets rotated copies of one problem reuse fixed points
        self.fps: dict[int, float] = {} if fp_cache is None else fp_cache
        self.check_decompositions = check_decompositions
        self.learner_id = learner_id
        self.cloud = build_cloud(cls, spec, None, m, 0, mode="loss-class", lattice=lattice)
        self.excess_cloud: MetricCloud | None = None
        if check_decompositions:
            self.excess_cloud = build_cloud(cls, spec, None, m, 0, mode="excess-loss-class",
                                            lattice=lattice)
            self.excess_cloud._dist = self.cloud.distances
        self.nets: dict[int, skeleton.EpsilonNet] = {}

    def prepare(self, n: int) -> None:
        if n in self.nets:
            return
        if n not in self.fps:
            kind = "gamma" if self.variant == "cor" else "gamma_star"
            self.fps[n] = fixed_point(self.cloud, self.B / n, self.beta, self.B, kind=kind).value
        fp = self.fps[n]
        eta = skeleton.select_eta(n, self.delta, self.beta, self.B, fp, self.variant)
        self.nets[n] = skeleton.build_epsilon_net(self.cloud, eta)

    def fit(self, sample):
        n = len(sample)
        self.prepare(n)
        net = self.nets[n]
        out = skeleton.net_erm(net, sample, self.spec.loss)
        checks = {}
        if self.check_decompositions:
            checks["net_decomposition"] = skeleton.net_decomposition(
                net, self.excess_cloud, sample).holds
            checks["aggregation"] = skeleton.aggregation_decomposition(self.cloud, sample).holds
        return out.hypothesis, float(len(net)), checks


class L2SkeletonLearner(Learner):
    def __init__(self, cls: domain.HypothesisClass, spec: DistributionSpec, delta: float = 0.05,
                 m: int = 2000, learner_id: str = "l2-skeleton"):
        self.cls, self.spec, self.delta = cls, spec, delta
        self.cloud = build_cloud(cls, spec, "square", m, 0, mode="raw-class", r=2)
        self.learner_id = learner_id

    def fit(self, sample):
        out = skeleton.skeleton_l2_regression(self.cls, self.spec, sample, self.delta, self.cloud)
        return out.hypothesis, float(len(out.net)), {}


# ---------------------------------------------------------------------------
# Risk tables
# ---------------------------------------------------------------------------


@dataclass
class TrialRow:
    learner_id: str
    n: int
    trial: int
    seed: int
    risk: float
    excess: float
    aux: float
    status: str = "ok"


@dataclass
class RiskTable:
    rows: list[TrialRow] = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def ns(self) -> list[int]:
        return sorted({r.n for r in self.rows})

    def select(self, n: int | None = None, learner_id: str | None = None, ok: bool = True):
        return [r for r in self.rows
                if (n is None or r.n == n) and (learner_id is None or r.learner_id == learner_id)
                and (not ok or r.status == "ok")]

    def values(self, n: int, column: str = "risk", learner_id: str | None = None) -> np.ndarray:
        return np.array([getattr(r, column) for r in self.select(n, learner_id)])

    def failed(self, n: int | None = None) -> int:
        return sum(1 for r in self.rows if r.status != "ok" and (n is None or r.n == n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.learner_id, r.n, r.trial, r.seed, repr(r.risk), repr(r.excess),
                        repr(r.aux), r.status])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RiskTable":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(TrialRow(rec["learner_id"], int(rec["n"]), int(rec["trial"]),
                                 int(rec["seed"]), float(rec["risk"]), float(rec["excess"]),
                                 float(rec["aux"]), rec["status"]))
        return cls(rows)


def _one_trial(learner: Learner, spec: DistributionSpec, n: int, trial: int, seed: int):
    try:
        sample = domain.generate_sample(spec, n, seed)
        h, aux, checks = learner.fit(sample)
        risk = float(domain.true_risk(h, spec))
        excess = float(domain.excess_risk(h, spec))
        return TrialRow(learner.learner_id, n, trial, seed, risk, excess, aux), checks
    except ExcessRiskError as exc:
        reason = f"failed: {type(exc).__name__}: {exc}".replace(",", ";")
        return TrialRow(learner.learner_id, n, trial, seed, math.nan, math.nan, math.nan, reason), {}


def _chunk(args):
    learner, spec, n, jobs = args
    return [_one_trial(learner, spec, n, t, s) for t, s in jobs]


def run_trials(learner: Learner, spec: DistributionSpec, n_grid, trials: int,
               master_seed: int = 0, jobs: int = 1) -> RiskTable:
    """Fresh sample per ``(n, trial)``; risks from closed forms where available.

    Failed trials are kept with their reason and excluded from statistics.
    """
    table = RiskTable()
    for n in n_grid:
        learner.prepare(n)
        work = [(t, trial_seed(master_seed, learner.learner_id, n, t)) for t in range(trials)]
        if jobs > 1:
            parts = [work[i::jobs] for i in range(jobs)]
            with ProcessPoolExecutor(jobs) as ex:
                results = [r for chunk in ex.map(_chunk, [(learner, spec, n, p) for p in parts])
                           for r in chunk]
            results.sort(key=lambda rc: rc[0].trial)
        else:
            results = [_one_trial(learner, spec, n, t, s) for t, s in work]
        for row, checks in results:
            table.rows.append(row)
            for name, ok in checks.items():
                passed, total = table.checks.get(name, (0, 0))
                table.checks[name] = (passed + int(ok), total + 1)
    return table


def rotation_indices(size: int, count: int) -> list[int]:
    """``count`` class indices spaced by a step coprime to ``size``.

    A step sharing a factor with ``size`` can line every target up with the
    regular spacing of a greedy net, which hides the discretization offset
    at some ``n``; a coprime step spreads the offsets evenly.
    """
    if not 1 <= count <= size:
        raise ConfigurationError("need 1 <= count <= size")
    step = size // count + 1
    while math.gcd(step, size) != 1:
        step += 1
    return [(j * step) % size for j in range(count)]


def run_family(learner_factory: Callable[[DistributionSpec], Learner], specs: list,
               n_grid, trials: int, master_seed: int = 0, jobs: int = 1) -> RiskTable:
    """Split the trials at each ``n`` round-robin over several specs and pool the rows.

    Used to average over target rotations, which removes the fixed offset
    between one target and a deterministic net.
    """
    table = RiskTable()
    for j, spec in enumerate(specs):
        share = trials // len(specs) + (1 if j < trials % len(specs) else 0)
        if share == 0:
            continue
        learner = learner_factory(spec)
        learner.learner_id = f"{learner.learner_id}#{j}"
        part = run_trials(learner, spec, n_grid, share, master_seed, jobs)
        table.rows.extend(part.rows)
        for name, (p, t) in part.checks.items():
            p0, t0 = table.checks.get(name, (0, 0))
            table.checks[name] = (p0 + p, t0 + t)
    table.rows.sort(key=lambda r: (r.n, r.learner_id, r.trial))
    return table


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


def floyd_warmuth(n, delta, k):
    return (k * math.log(math.e * n / k) + math.log(1 / delta)) / (n - k)


def k_over_n_plus_1(n, delta, k):
    return k / (n + 1)


def stable_deviation(n, delta, k):
    return math.e * k * math.log(1 / delta) / n


def polynomial_tail(n, delta, k):
    return k * k / (n * delta ** (1.0 / k))


def majority_deviation(n, delta, k):
    return k * math.log(k) / n + math.log(1 / delta) / n


def homogeneous_deviation(n, delta, k):
    return math.e * k / n + math.e * math.log(1 / delta) / n


def logconc(n, delta, d, B=1.0, beta=1.0):
    return (B * d / n + B * math.log(1 / delta) / n) ** (1.0 / (2.0 - beta))


def svm_deviation(n, delta, d):
    return d * math.log(d) / n + math.log(1 / delta) / n


def net_rate(n, delta, fp, B=1.0, beta=1.0):
    return (fp + B * math.log(1 / delta) / n) ** (1.0 / (2.0 - beta))


def tsybakov_reference(n, beta, r):
    return (1.0 / n) ** ((2.0 - beta) / (2.0 - beta + beta * r))


@dataclass(frozen=True)
class BoundSpec:
    fn: Callable
    kind: str      # "expectation" or "deviation"
    fitted: bool   # bound stated up to an unspecified constant


BOUNDS = {
    "floyd_warmuth": BoundSpec(floyd_warmuth, "deviation", False),
    "k_over_n_plus_1": BoundSpec(k_over_n_plus_1, "expectation", False),
    "stable_deviation": BoundSpec(stable_deviation, "deviation", False),
    "pol": BoundSpec(polynomial_tail, "deviation", False),
    "mod": BoundSpec(majority_deviation, "deviation", True),
    "homogeneous": BoundSpec(homogeneous_deviation, "deviation", True),
    "logconc": BoundSpec(logconc, "deviation", True),
    "svm": BoundSpec(svm_deviation, "deviation", True),
    "cor": BoundSpec(net_rate, "deviation", True),
}


def bound_value(bound_id: str, n: int, delta: float, **params) -> float:
    if bound_id not in BOUNDS:
        raise ConfigurationError(f"unknown bound {bound_id!r}")
    return float(BOUNDS[bound_id].fn(n, delta, **params))


@dataclass
class BoundReport:
    bound_id: str
    delta: float
    kind: str
    column: str
    per_n: list[dict]
    fitted_constant: float
    holds: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=float)


def verify_bound(table: RiskTable, bound_id: str, delta: float, params: dict | None = None,
                 column: str = "risk", learner_id: str | None = None) -> BoundReport:
    """Compare trial risks to a registered bound on each ``n``.

    Expectation bounds: mean + 3 standard errors against the bound.
    Deviation bounds: the empirical ``(1 - delta)``-quantile against the
    bound; for bounds stated up to a constant, the constant is fitted on the
    smallest ``n`` and the violation rate at the other ``n`` is tested
    against ``delta + 3 sqrt(delta (1 - delta) / trials)``.
    """
    params = params or {}
    if bound_id not in BOUNDS:
        raise ConfigurationError(f"unknown bound {bound_id!r}")
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)")
    spec = BOUNDS[bound_id]
    ns = sorted({r.n for r in table.select(learner_id=learner_id)})
    if not ns:
        raise ConfigurationError("no successful trials in the table")
    data = {n: table.values(n, column, learner_id) for n in ns}
    if spec.kind == "deviation":
        for n, v in data.items():
            if v.size * delta < 20:
                raise PrecisionError(f"{v.size} trials at n={n} too few for the "
                                     f"{1 - delta:.3g}-quantile (need trials*delta >= 20)")
    bounds = {n: bound_value(bound_id, n, delta, **params) for n in ns}
    n0 = ns[0]
    if spec.kind == "deviation":
        q0 = float(np.quantile(data[n0], 1 - delta))
    else:
        q0 = float(data[n0].mean())
    const = max(q0, 1e-12) / bounds[n0]
    per_n, all_ok = [], True
    for n in ns:
        v = data[n]
        mean = float(v.mean())
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.inf
        q = float(np.quantile(v, 1 - delta))
        b = bounds[n]
        row = {"n": n, "trials": int(v.size), "failed": table.failed(n), "mean": mean,
               "stderr": se, "quantile": q, "bound": b}
        if spec.kind == "expectation":
            row["violation_fraction"] = float(np.mean(v > b))
            ok = mean + 3 * se <= b
        elif spec.fitted:
            row["violation_fraction"] = float(np.mean(v > const * b))
            slack = delta + 3 * math.sqrt(delta * (1 - delta) / v.size)
            ok = row["violation_fraction"] <= slack
        else:
            row["violation_fraction"] = float(np.mean(v > b))
            ok = q <= b
        row["ratio"] = (q if spec.kind == "deviation" else mean) / b
        row["holds"] = bool(ok)
        all_ok &= bool(ok)
        per_n.append(row)
    return BoundReport(bound_id, delta, spec.kind, column, per_n, const, all_ok)


@dataclass
class RateFit:
    slope: float
    intercept: float
    stderr: float
    ns: list[int]
    values: list[float]
    warning: str | None = None


def rate_fit(table: RiskTable, statistic="mean", column: str = "excess",
             learner_id: str | None = None) -> RateFit:
    """Least-squares slope of ``log(statistic)`` against ``log(n)``.

    ``statistic`` is ``"mean"`` or ``("quantile", q)``.
    """
    ns = sorted({r.n for r in table.select(learner_id=learner_id)})
    if len(ns) < 4 or ns[-1] < 8 * ns[0]:
        raise ConfigurationError("rate fit needs >= 4 grid points spanning a factor >= 8")
    vals = []
    for n in ns:
        v = table.values(n, column, learner_id)
        if statistic == "mean":
            vals.append(float(v.mean()))
        elif isinstance(statistic, (tuple, list)) and statistic[0] == "quantile":
            vals.append(float(np.quantile(v, statistic[1])))
        else:
            raise ConfigurationError(f"unknown statistic {statistic!r}")
    warning = None
    keep = len(vals)
    for i, v in enumerate(vals):
        if v <= 0:
            keep = i
            break
    if keep < len(vals):
        warning = f"zero statistic from n={ns[keep]} on; fitted on the first {keep} grid points"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    if keep < 2:
        raise ConfigurationError("fewer than two nonzero statistics")
    res = stats.linregress(np.log(ns[:keep]), np.log(vals[:keep]))
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), ns, vals, warning)


def fit_power_law(ns, values) -> RateFit:
    res = stats.linregress(np.log(ns), np.log(values))
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr), list(ns), list(values))


# ---------------------------------------------------------------------------
# Adversarial family
# ---------------------------------------------------------------------------


def halfspace_packing(cls: domain.HypothesisClass, eps: float, size: int | None = None) -> list[int]:
    """Greedy maximal ``eps``-packing in disagreement distance (angle / pi), in class order.

    When ``size`` is smaller than the packing, an evenly spread subset is kept.
    """
    W = np.stack([h.w / np.linalg.norm(h.w) for h in cls])
    chosen: list[int] = []
    for i in range(len(cls)):
        if all(np.arccos(np.clip(W[i] @ W[j], -1, 1)) / math.pi >= eps - 1e-12 for j in chosen):
            chosen.append(i)
    if size is not None and size < len(chosen):
        pick = np.linspace(0, len(chosen), size, endpoint=False).astype(int)
        chosen = [chosen[p] for p in pick]
    return chosen


@dataclass
class AdversarialReport:
    d: int
    h: float
    n: int
    eps: float
    packing: list[int]
    member_means: list[float]
    observed: float
    lower_reference: float
    upper_value: float
    fitted_constant: float
    sandwich_ok: bool
    max_constant: float = 10.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def adversarial_family_eval(learner_factory: Callable[[DistributionSpec], Learner], d: int,
                            h: float, n: int, packing_size: int = 8, trials: int = 200,
                            master_seed: int = 0, class_size: int = 720, delta: float = 0.05,
                            max_constant: float = 10.0) -> AdversarialReport:
    """Worst mean excess risk of a learner over a packing of Massart problems.

    Each packing member ``f`` defines ``P(Y = 1 | X) = (1 + f(X) h) / 2`` with
    ``X`` uniform on the unit ball.  The report sets the observed worst case
    against ``0.0725 d (1 - h) / (n h)`` below and the log-concave rate with
    ``B = 1/h`` above.
    """
    if not 0 < h <= 1:
        raise ConfigurationError("h must lie in (0, 1]")
    B = 1.0 / h
    if B > math.sqrt(n / d):
        raise ConfigurationError(f"B = 1/h = {B:.3g} exceeds sqrt(n/d) = {math.sqrt(n / d):.3g}")
    eps = min(1.0, d * (1 - h) / (n * h * h))
    cls = domain.homogeneous_halfspaces(d, class_size)
    packing = halfspace_packing(cls, eps, packing_size)
    if not packing:
        raise ConfigurationError(f"empty packing at eps={eps}")
    means = []
    for j in packing:
        spec = domain.massart(domain.uniform_ball(d), cls[j], h)
        learner = learner_factory(spec)
        table = run_trials(learner, spec, [n], trials, master_seed)
        means.append(float(table.values(n, "excess").mean()))
    observed = max(means)
    upper = logconc(n, delta, d, B, 1.0)
    const = observed / upper
    lower = LOWER_CONSTANT * d * (1 - h) / (n * h)
    return AdversarialReport(d, h, n, eps, packing, means, observed, lower, upper, const,
                             bool(0 <= observed and const <= max_constant), max_constant)


# ---------------------------------------------------------------------------
# Scheme catalogue and audit sample families
# ---------------------------------------------------------------------------

AUDIT_MARGIN = 0.02
PERCEPTRON_MARGIN = 0.1


def halving_class(size: int = 16, atoms: int = 8, seed: int = 0) -> domain.HypothesisClass:
    """``size`` distinct random labelings of the points ``0, ..., atoms - 1``."""
    rng = np.random.default_rng(seed)
    codes = rng.choice(2 ** atoms, size=size, replace=False)
    labels = ((codes[:, None] >> np.arange(atoms)) & 1) * 2.0 - 1.0
    return domain.finite_class(labels)


def make_scheme(name: str, d: int = 2) -> CompressionScheme:
    from . import compression as comp
    from .svm import SVMScheme

    if name == "svm":
        return SVMScheme(d)
    if name == "intervals":
        return comp.IntervalClosureScheme()
    if name == "rectangles":
        return comp.RectangleClosureScheme(d)
    if name == "halving":
        sch = comp.online_to_batch(comp.Halving(halving_class()))
        sch.scheme_id = "halving"
        return sch
    if name == "perceptron":
        k = math.ceil(1.0 / PERCEPTRON_MARGIN ** 2)
        return comp.OnlineToBatchScheme(comp.Perceptron(d, k), k, "perceptron")
    if name == "first-k":
        return comp.FirstKScheme(2)
    raise ConfigurationError(f"unknown scheme {name!r}")


def _ball(rng, n, d):
    return domain.uniform_ball(d).draw(rng, n)[0]


def _margin_points(rng, n, d, w, b, gamma):
    # rejection sampling of ball points at distance >= gamma from the boundary
    out = np.zeros((0, d))
    while out.shape[0] < n:
        X = _ball(rng, 4 * n, d)
        out = np.vstack([out, X[np.abs(X @ w + b) >= gamma]])
    return out[:n]


def audit_samples(scheme_name: str, count: int = 200, seed: int = 0, min_size: int = 4,
                  max_size: int = 20, d: int = 2) -> list[Sample]:
    """Seeded realizable samples matched to a scheme's concept class."""
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        n = int(rng.integers(min_size, max_size + 1))
        if scheme_name in ("intervals", "first-k"):
            x = rng.uniform(0, 1, n)
            lo, hi = np.sort(rng.uniform(0, 1, 2))
            X, y = x[:, None], np.where((x >= lo) & (x <= hi), 1.0, -1.0)
        elif scheme_name == "rectangles":
            X = rng.uniform(0, 1, (n, d))
            c = np.sort(rng.uniform(0, 1, (2, d)), axis=0)
            y = np.where(np.all((X >= c[0]) & (X <= c[1]), axis=1), 1.0, -1.0)
        elif scheme_name == "svm":
            w = rng.normal(size=d)
            w /= np.linalg.norm(w)
            b = rng.uniform(-0.5, 0.5)
            X = _margin_points(rng, n, d, w, b, AUDIT_MARGIN)
            y = np.where(X @ w + b >= 0, 1.0, -1.0)
        elif scheme_name == "perceptron":
            w = rng.normal(size=d)
            w /= np.linalg.norm(w)
            X = _margin_points(rng, n, d, w, 0.0, PERCEPTRON_MARGIN)
            y = np.where(X @ w >= 0, 1.0, -1.0)
        elif scheme_name == "halving":
            cls = halving_class()
            X = rng.integers(0, 8, n).astype(float)[:, None]
            y = cls[int(rng.integers(len(cls)))](X)
        else:
            raise ConfigurationError(f"no audit family for scheme {scheme_name!r}")
        out.append(Sample(X, y, i))
    return out
