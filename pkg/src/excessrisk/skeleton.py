"""Skeleton estimators: empirical risk minimization over an eta-net.

Also holds the shifted-process suprema and the two pathwise excess-risk
decompositions used to analyse them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import domain
from .domain import Hypothesis, Sample
from .entropy import MetricCloud, build_cloud, fixed_point, proper_cover, FixedPointResult
from .errors import ConfigurationError


@dataclass
class EpsilonNet:
    member_indices: list[int]
    eta: float
    r: int
    hypotheses: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.member_indices)


@dataclass
class NetErmOutput:
    chosen_index: int
    empirical_risk: float
    eta_used: float
    tie_count: int
    class_index: int | None = None
    hypothesis: Hypothesis | None = field(default=None, repr=False)
    net: EpsilonNet | None = field(default=None, repr=False)


def build_epsilon_net(cloud: MetricCloud, eta: float) -> EpsilonNet:
    """Greedy proper ``eta``-cover of the cloud, coverage rechecked."""
    if eta <= 0:
        raise ConfigurationError("eta must be > 0")
    centers = sorted(proper_cover(cloud, eta, "greedy"))
    hyps = [] if cloud.hypotheses is None else [cloud.hypotheses[i] for i in centers]
    return EpsilonNet(centers, float(eta), cloud.r, hyps)


def select_eta(n: int, delta: float, beta: float, B: float, fp, variant: str = "cor") -> float:
    """Net scale with every proportionality constant set to one.

    ``cor``:      ``(fp + B ln(1/delta) / n) ** (1 / (2 - beta))``
    ``mainbound``: ``B (fp + B ln(1/delta) / n) ** (beta / (2 - beta))``
    """
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)")
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    value = fp.value if isinstance(fp, FixedPointResult) else float(fp)
    base = value + B * math.log(1.0 / delta) / n
    if variant == "cor":
        return base ** (1.0 / (2.0 - beta))
    if variant == "mainbound":
        return B * base ** (beta / (2.0 - beta))
    raise ConfigurationError(f"unknown variant {variant!r}")


def empirical_risks(hypotheses, sample: Sample, loss: str) -> np.ndarray:
    P = domain.predict_all(hypotheses, sample.X)
    if loss == "binary":
        return (P != sample.y).mean(axis=1)
    return ((P - sample.y) ** 2).mean(axis=1)


def net_erm(net: EpsilonNet, sample: Sample, loss: str = "binary") -> NetErmOutput:
    """Empirical risk minimizer over the net; ties go to the smallest index."""
    if len(net) == 0:
        raise ConfigurationError("empty net")
    risks = empirical_risks(net.hypotheses, sample, loss)
    j = int(np.argmin(risks))
    ties = int(np.sum(risks == risks[j]))
    return NetErmOutput(j, float(risks[j]), net.eta, ties, net.member_indices[j],
                        net.hypotheses[j], net)


# ---------------------------------------------------------------------------
# Condition checks
# ---------------------------------------------------------------------------


@dataclass
class StrongerCondReport:
    eta: float
    beta: float
    B: float
    candidates: list[int]
    holds: dict
    eligible: list[int]
    eligible_holds: dict
    vacuous: bool
    t0: float | None = None
    tail_mass: float | None = None
    tail_bound: float | None = None
    tail_member: int | None = None
    condition_new_holds: bool | None = None


def tail_threshold(beta: float, B: float, eta: float) -> float:
    """``t0 = B^(-1/beta) eta^((1 - beta)/beta)``."""
    return B ** (-1.0 / beta) * eta ** ((1.0 - beta) / beta)


def tail_bound(beta: float, B: float, t0: float) -> float | None:
    """``B^(1/(1-beta)) t0^(1/(1-beta))``; undefined (None) at beta = 1."""
    if beta >= 1:
        return None
    return B ** (1.0 / (1.0 - beta)) * t0 ** (1.0 / (1.0 - beta))


def tail_mass(spec: domain.DistributionSpec, f: Hypothesis, t0: float) -> float:
    """``P(|xi(X)| 1[f(X) != f*(X)] >= t0)`` for a classification spec."""
    val, _, _ = domain.expectation(
        spec, lambda X, idx: spec.margin(X, idx) * (f(X) != spec.target(X)) >= t0
    )
    return val


def check_strongercond(net: EpsilonNet, cloud: MetricCloud, eta: float, beta: float,
                       B: float, spec: domain.DistributionSpec | None = None) -> StrongerCondReport:
    """Look for net members with ``P|g| <= eta`` and ``P|g| >= c B (Pg)^beta``.

    ``cloud`` is the excess-loss cloud the net indexes into.  The check is
    reported for ``c`` in {1, 1/2, 1/4}, both over all such members and over
    the members with ``P|g|`` in ``[eta/2, 2 eta]``.  For classification specs
    the tail condition at ``t0`` is evaluated for the member whose
    disagreement with the target is closest to ``eta``.
    """
    spec = spec or cloud.spec
    idx = np.asarray(net.member_indices, dtype=int)
    if spec is not None and cloud.hypotheses is not None:
        members = [cloud.hypotheses[i] for i in idx]
        _, pabs_all, _ = domain.loss_moments(members, spec, cloud.loss, "excess")
    else:
        pabs_all = cloud.abs_means()[idx]
    pg_all = cloud.means[idx]
    cand = np.flatnonzero(pabs_all <= eta + 1e-12)
    tol = 1e-12

    def holds_for(sel):
        out = {}
        for c in (1.0, 0.5, 0.25):
            rhs = c * B * np.maximum(pg_all[sel], 0.0) ** beta
            out[c] = bool(np.any(pabs_all[sel] >= rhs - tol))
        return out

    eligible = cand[(pabs_all[cand] >= eta / 2) & (pabs_all[cand] <= 2 * eta)]
    report = StrongerCondReport(
        eta, beta, B, idx[cand].tolist(), holds_for(cand) if cand.size else {},
        idx[eligible].tolist(), holds_for(eligible) if eligible.size else {},
        vacuous=cand.size == 0,
    )
    if spec is not None and spec.loss == "binary" and cand.size and beta > 0:
        j = cand[np.argmin(np.abs(pabs_all[cand] - eta))]
        t0 = tail_threshold(beta, B, eta)
        f = net.hypotheses[j] if net.hypotheses else cloud.hypotheses[idx[j]]
        report.t0 = t0
        report.tail_member = int(idx[j])
        report.tail_mass = tail_mass(spec, f, t0)
        report.tail_bound = tail_bound(beta, B, t0)
        if report.tail_bound is not None:
            report.condition_new_holds = report.tail_mass <= report.tail_bound + tol
    return report


# ---------------------------------------------------------------------------
# Square-loss skeleton
# ---------------------------------------------------------------------------


def skeleton_l2_regression(cls: domain.HypothesisClass, spec: domain.DistributionSpec,
                           sample: Sample, delta: float, cloud: MetricCloud | None = None,
                           m: int = 2000, seed: int = 0) -> NetErmOutput:
    """Square-loss ERM over an ``L2(P)`` eta-net of the class itself.

    ``eta = zeta(F, 1/n) + sqrt(ln(1/delta) / n)``.  A prebuilt raw-class L2
    cloud may be passed to avoid rebuilding it per sample.
    """
    if spec.noise.kind != "regression":
        raise ConfigurationError("skeleton regression needs a bounded-regression spec")
    if np.any(np.abs(sample.y) > 1 + 1e-12):
        raise ConfigurationError("labels must lie in [-1, 1]")
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)")
    if cloud is None:
        cloud = build_cloud(cls, spec, "square", m, seed, mode="raw-class", r=2)
    n = len(sample)
    zeta = fixed_point(cloud, 1.0 / n, kind="zeta").value
    eta = zeta + math.sqrt(math.log(1.0 / delta) / n)
    net = build_epsilon_net(cloud, eta)
    return net_erm(net, sample, "square")


# ---------------------------------------------------------------------------
# Shifted processes and pathwise decompositions
# ---------------------------------------------------------------------------


def shifted_process_sup(cloud: MetricCloud, sample: Sample, c: float,
                        direction: str = "forward", members=None,
                        return_argmax: bool = False):
    """Exact maximum over cloud members of a shifted empirical process.

    forward: ``Pg - (1 + c) P_n g``; reverse: ``P_n g - (1 + 2c)/(1 + c) Pg``.
    """
    idx = np.arange(len(cloud)) if members is None else np.asarray(members, dtype=int)
    pg = cloud.means[idx]
    png = cloud.evaluate(sample)[idx].mean(axis=1) if len(sample) else np.zeros(len(idx))
    if direction == "forward":
        vals = pg - (1.0 + c) * png
    elif direction == "reverse":
        vals = png - (1.0 + 2.0 * c) / (1.0 + c) * pg
    else:
        raise ConfigurationError(f"unknown direction {direction!r}")
    j = int(np.argmax(vals))
    return (float(vals[j]), int(idx[j])) if return_argmax else float(vals[j])


@dataclass
class Decomposition:
    lhs: float
    terms: tuple
    rhs: float
    holds: bool


def net_decomposition(net: EpsilonNet, cloud: MetricCloud, sample: Sample,
                      c: float = 1.0) -> Decomposition:
    """Excess risk of net ERM against its two-term bound, on one sample.

    ``R(f_hat) - R(f*) <= sup_net (Pg - (1+c) P_n g) + (1+c)(R_n(f*_eta) - R_n(f*))``
    where ``f*_eta`` is the net member of smallest true risk.  ``cloud`` is
    the excess-loss cloud indexed by the net.
    """
    if cloud.mode != "excess":
        raise ConfigurationError("net decomposition needs an excess-loss cloud")
    idx = np.asarray(net.member_indices, dtype=int)
    values = cloud.evaluate(sample)[idx]
    png = values.mean(axis=1)
    pg = cloud.means[idx]
    risks = empirical_risks(net.hypotheses, sample, cloud.loss)
    chosen = int(np.argmin(risks))
    lhs = float(pg[chosen])
    sup = float(np.max(pg - (1.0 + c) * png))
    best = int(np.argmin(pg))
    second = (1.0 + c) * float(png[best])
    rhs = sup + second
    return Decomposition(lhs, (sup, second), rhs, lhs <= rhs + 1e-12)


def aggregation_decomposition(cloud: MetricCloud, sample: Sample, c: float = 0.5) -> Decomposition:
    """``R(f_hat) - (1+2c) R(f*) <= sup(Pg - (1+c)P_n g) + (1+c) sup(P_n g - (1+2c)/(1+c) Pg)``.

    ``f_hat`` is ERM over the whole loss-class cloud (smallest index on
    ties) and ``f*`` its member of smallest risk; ``c = 1/2`` gives the
    ``R(f_hat) - 2 R(f*)`` form.
    """
    if cloud.mode != "loss":
        raise ConfigurationError("aggregation decomposition needs a loss-class cloud")
    values = cloud.evaluate(sample)
    png = values.mean(axis=1)
    pg = cloud.means
    chosen = int(np.argmin(png))
    lhs = float(pg[chosen] - (1.0 + 2.0 * c) * pg.min())
    fwd = float(np.max(pg - (1.0 + c) * png))
    rev = float(np.max(png - (1.0 + 2.0 * c) / (1.0 + c) * pg))
    rhs = fwd + (1.0 + c) * rev
    return Decomposition(lhs, (fwd, rev), rhs, lhs <= rhs + 1e-12)
