"""Command-line entry point: ``python3 -m excessrisk <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import compression, domain, entropy, harness, svm
from .config import SCHEMES, SUBCOMMANDS, ExperimentConfig, tomllib, validate
from .errors import CapacityError, ConfigurationError, ExcessRiskError

log = logging.getLogger("excessrisk")


# ---------------------------------------------------------------------------
# Building objects from config blocks
# ---------------------------------------------------------------------------


def build_class(block: dict, d: int) -> domain.HypothesisClass:
    kind = block["kind"]
    d = block.get("d") or d
    if kind == "homogeneous-halfspace":
        return domain.homogeneous_halfspaces(d, block["size"], block.get("seed", 0))
    if kind == "affine-halfspace":
        return domain.affine_halfspaces(d, block["size"], block.get("seed", 0))
    if kind == "interval":
        grid = block["grid"] if block["grid"] is not None else np.linspace(0, 1, 11)
        return domain.intervals_on_grid(grid)
    if kind == "rectangle":
        grid = block["grid"] if block["grid"] is not None else np.linspace(0, 1, 5)
        return domain.rectangles_on_grid(grid)
    if kind == "finite":
        if block["labels"] is None:
            raise ConfigurationError("finite class needs labels")
        return domain.finite_class(block["labels"], block["atoms"])
    if kind == "bounded-regression-grid":
        return domain.regression_grid(d, block["size"], block["radius"])
    raise ConfigurationError(f"unknown class kind {kind!r}")


def _target(dist: dict, cls: domain.HypothesisClass | None) -> domain.Hypothesis:
    if dist["target_index"] is not None:
        if cls is None:
            raise ConfigurationError("target_index needs a [class] section")
        return cls[int(dist["target_index"])]
    t = dist["target"]
    if t is None:
        if cls is None:
            raise ConfigurationError("distribution needs a target or a class with target_index")
        return cls[0]
    kind = t.get("kind")
    if kind == "homogeneous-halfspace":
        return domain.HomogeneousHalfspace(t["w"])
    if kind == "affine-halfspace":
        return domain.AffineHalfspace(t["w"], t.get("b", 0.0))
    if kind == "interval":
        return domain.Interval(t["lo"], t["hi"])
    if kind == "rectangle":
        return domain.Rectangle(t["lo"], t["hi"])
    if kind == "linear":
        return domain.LinearRegressor(t["w"])
    raise ConfigurationError(f"unknown target kind {kind!r}")


def build_spec(dist: dict, cls: domain.HypothesisClass | None = None) -> domain.DistributionSpec:
    d = dist["d"]
    if dist["marginal"] == "ball":
        marg = domain.uniform_ball(d)
    elif dist["marginal"] == "sphere":
        marg = domain.uniform_sphere(d)
    else:
        marg = domain.finite_support(dist["weights"], dist["atoms"])
    target = _target(dist, cls)
    if dist["noise"] == "realizable":
        return domain.realizable(marg, target)
    if dist["noise"] == "massart":
        return domain.massart(marg, target, dist["h"])
    return domain.bounded_regression(marg, target, dist["sigma"])


def build_learner(cfg: ExperimentConfig, spec, cls):
    lrn = cfg.learner
    kind = lrn["kind"]
    d = cfg.distribution["d"]
    if kind == "scheme":
        return harness.SchemeLearner(harness.make_scheme(lrn["scheme"], d))
    if kind == "majority":
        return harness.MajorityLearner(harness.make_scheme(lrn["scheme"], d), spec)
    if kind == "constant":
        return harness.ConstantLearner(spec.target)
    if cls is None:
        raise ConfigurationError(f"learner {kind!r} needs a [class] section")
    if kind == "net-erm":
        return harness.NetErmLearner(cls, spec, lrn["beta"], lrn["B"], cfg.delta, lrn["variant"],
                                     lrn["m"], lrn["lattice"], check_decompositions=True)
    return harness.L2SkeletonLearner(cls, spec, cfg.delta)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, frozenset):
            return sorted(o)
        raise TypeError(type(o))

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _rows_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands; each returns (ok, {filename: text}, summary lines)
# ---------------------------------------------------------------------------


def _cmd_entropy(cfg: ExperimentConfig, jobs: int):
    cls = build_class(cfg.cls, cfg.distribution["d"])
    spec = build_spec(cfg.distribution, cls)
    e = cfg.entropy
    r = 2 if e.get("fixed_point") == "zeta" else 1
    cloud = entropy.build_cloud(cls, spec, None, e["m"], cfg.master_seed, e["mode"], r,
                                e["lattice"])
    eps = sorted(float(x) for x in e["epsilon"])
    solver = e["solver"]
    prof = entropy.local_entropy_profile(cloud, eps, e["beta"], e["B"], e["bracketing"], solver)
    rows = [(x, float(v), "dloc_bracket" if e["bracketing"] else "dloc", solver)
            for x, v in zip(prof.epsilons, prof.dloc)]
    lines = [f"D_loc({x:g}) = {v:.4f}" for x, v, _, _ in rows]
    if e["k"] is not None:
        fp = entropy.fixed_point(cloud, e["k"], e["beta"], e["B"], e["fixed_point"], solver=solver)
        rows.append((fp.value, fp.k, fp.kind, solver))
        lines.append(f"{fp.kind}(k={fp.k:g}) = {fp.value:.6g} (converged={fp.converged})")
    ok = all(a >= b - 1e-12 for a, b in zip(prof.dloc, prof.dloc[1:]))
    files = {"entropy.csv": _rows_csv(("eps", "value", "kind", "solver"), rows)}
    return ok, files, lines


def _cmd_trials(cfg: ExperimentConfig, jobs: int):
    needs_class = cfg.learner["kind"] in ("net-erm", "l2-skeleton") or cfg.subcommand == "net-erm"
    cls = build_class(cfg.cls, cfg.distribution["d"]) if "class" in cfg.present or needs_class else None
    spec = build_spec(cfg.distribution, cls)
    if cfg.subcommand == "net-erm":
        cfg.learner["kind"] = "net-erm"
    rotations = int(cfg.learner.get("rotations", 1))
    if cfg.learner["kind"] == "net-erm" and rotations > 1 and cls is not None:
        base = cls.index(spec.target) or 0
        specs = [domain.DistributionSpec(spec.marginal, domain.Noise(
            spec.noise.kind, cls[(base + j) % len(cls)], spec.noise.h, spec.noise.sigma))
            for j in harness.rotation_indices(len(cls), rotations)]
        cache: dict = {}
        lrn = cfg.learner

        def factory(sp):
            return harness.NetErmLearner(cls, sp, lrn["beta"], lrn["B"], cfg.delta, lrn["variant"],
                                         lrn["m"], lrn["lattice"], cache, True)

        table = harness.run_family(factory, specs, cfg.n_grid, cfg.trials, cfg.master_seed, jobs)
    else:
        learner = build_learner(cfg, spec, cls)
        table = harness.run_trials(learner, spec, cfg.n_grid, cfg.trials, cfg.master_seed, jobs)
    files = {"risk_table.csv": table.to_csv()}
    ok = all(p == t for p, t in table.checks.values())
    lines = [f"n={n}: mean risk {table.values(n).mean():.5f}, mean excess "
             f"{table.values(n, 'excess').mean():.5f}, failed {table.failed(n)}" for n in table.ns
             if table.values(n).size]
    for name, (p, t) in sorted(table.checks.items()):
        lines.append(f"check {name}: {p}/{t}")
    report = {"checks": {k: list(v) for k, v in table.checks.items()}}
    if cfg.bound.get("id"):
        rep = harness.verify_bound(table, cfg.bound["id"], cfg.delta, cfg.bound["params"],
                                   cfg.bound["column"])
        report["bound"] = json.loads(rep.to_json())
        ok &= rep.holds
        for row in rep.per_n:
            stat = row["quantile"] if rep.kind == "deviation" else row["mean"]
            lines.append(f"{rep.bound_id} n={row['n']}: {rep.kind} statistic {stat:.5f} vs bound "
                         f"{row['bound']:.5f} -> {'ok' if row['holds'] else 'VIOLATED'}")
    if len(table.ns) >= 4 and table.ns[-1] >= 8 * table.ns[0]:
        fit = harness.rate_fit(table)
        report["rate_fit"] = {"slope": fit.slope, "stderr": fit.stderr, "values": fit.values,
                              "ns": fit.ns, "warning": fit.warning}
        lines.append(f"rate slope {fit.slope:.3f} +- {fit.stderr:.3f}")
    files["report.json"] = _json(report)
    return ok, files, lines


def _cmd_compress(cfg: ExperimentConfig, jobs: int):
    d = cfg.distribution["d"]
    cls = build_class(cfg.cls, d) if "class" in cfg.present else None
    spec = build_spec(cfg.distribution, cls)
    scheme = harness.make_scheme(cfg.learner["scheme"], d)
    sample = domain.generate_sample(spec, cfg.n_grid[0], cfg.master_seed)
    C = scheme.compress(sample)
    f = scheme.reconstruct(C)
    valid = bool(np.all(f(sample.X) == sample.y))
    out = {"scheme_id": scheme.scheme_id, "k": scheme.k, "n": len(sample), "seed": cfg.master_seed,
           "compression_set": [list(x) + [y] for x, y in C.keys()], "valid": valid,
           "size_ok": len(C) <= scheme.k}
    ok = valid and out["size_ok"]
    return ok, {"compression.json": _json(out)}, [
        f"{scheme.scheme_id}: |C| = {len(C)} (k = {scheme.k}), valid = {valid}"]


def _cmd_svm(cfg: ExperimentConfig, jobs: int):
    d = cfg.distribution["d"]
    cls = build_class(cfg.cls, d) if "class" in cfg.present else None
    spec = build_spec(cfg.distribution, cls)
    sample = domain.generate_sample(spec, cfg.n_grid[0], cfg.master_seed)
    sol = svm.hard_margin_solve(sample)
    esv = svm.essential_support_vectors(sample, sol)
    out = {"w": sol.w, "b": sol.b, "margin": sol.margin, "active_indices": sol.active_indices,
           "kkt_residual": sol.kkt_residual, "essential": [list(x) + [y] for x, y in esv.keys()]}
    ok = sol.kkt_residual <= 1e-9 and len(esv) <= d + 1
    return ok, {"svm.json": _json(out)}, [
        f"margin {sol.margin:.6g}, |active| = {len(sol.active_indices)}, |essential| = {len(esv)}, "
        f"KKT residual {sol.kkt_residual:.2e}"]


# stability is asserted for every scheme; homogeneity only where the theory claims it
HOMOGENEOUS_SCHEMES = ("intervals", "rectangles")


def _cmd_audit(cfg: ExperimentConfig, jobs: int):
    a = cfg.audit
    scheme = harness.make_scheme(a["scheme"], a["d"])
    samples = harness.audit_samples(a["scheme"], a["samples"], cfg.master_seed, a["min_size"],
                                    a["max_size"], a["d"])
    rep = compression.audit(scheme, samples, seed=cfg.master_seed)
    ok = rep.valid and rep.permutation_invariant and rep.stable and rep.size_ok
    if a["scheme"] in HOMOGENEOUS_SCHEMES:
        ok &= rep.homogeneous
    out = rep.to_dict()
    out["asserted_homogeneous"] = a["scheme"] in HOMOGENEOUS_SCHEMES
    return ok, {"audit.json": _json(out)}, [
        f"{rep.scheme_id} on {rep.n_samples} samples: valid={rep.valid} "
        f"permutation_invariant={rep.permutation_invariant} stable={rep.stable} "
        f"homogeneous={rep.homogeneous} max|C|={rep.max_size} (k={scheme.k})"]


COMMANDS = {"entropy": _cmd_entropy, "net-erm": _cmd_trials, "experiment": _cmd_trials,
            "compress": _cmd_compress, "svm": _cmd_svm, "audit": _cmd_audit}


def run(cfg: ExperimentConfig, out_dir: str | None = None, fmt: str | None = None,
        jobs: int = 1, stream=None) -> int:
    """Execute a validated config; returns 0 iff every requested check passed."""
    stream = stream or sys.stdout
    out = Path(out_dir or cfg.output["dir"])
    fmt = fmt or cfg.output["format"]
    try:
        ok, files, lines = COMMANDS[cfg.subcommand](cfg, jobs)
    except CapacityError as exc:
        print(f"capacity error: {exc} (size={exc.size}, cap={exc.cap})", file=sys.stderr)
        return 2
    except ExcessRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if fmt == "json":
        # tables become JSON arrays of records
        for name in [n for n in files if n.endswith(".csv")]:
            recs = list(csv.DictReader(io.StringIO(files.pop(name))))
            files[name[:-4] + ".json"] = _json(recs)
    files["config.json"] = _json(cfg.to_dict())
    for name, text in sorted(files.items()):
        write_atomic(out / name, text)
    for line in lines:
        print(line, file=stream)
    print(f"{cfg.subcommand}: {'PASS' if ok else 'FAIL'} -> {out}", file=stream)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="excessrisk", description=__doc__)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--out-dir", help="directory for output files")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--bound", help="bound id from the registry")
    p.add_argument("--k", type=float, help="bound parameter k (scheme size) or fixed-point k")
    p.add_argument("--n", type=_int_list, help="sample size(s), comma separated")
    p.add_argument("--trials", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--eps", type=_float_list, help="epsilon grid for entropy")
    p.add_argument("--samples", type=int, help="number of audit samples")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_SCHEME_DISTRIBUTIONS = {
    "svm": {"marginal": "ball", "d": 2, "noise": "realizable",
            "target": {"kind": "affine-halfspace", "w": [1.0, 0.5], "b": 0.1}},
    "intervals": {"marginal": "ball", "d": 1, "noise": "realizable",
                  "target": {"kind": "interval", "lo": -0.3, "hi": 0.4}},
    "rectangles": {"marginal": "ball", "d": 2, "noise": "realizable",
                   "target": {"kind": "rectangle", "lo": [-0.4, -0.3], "hi": [0.3, 0.5]}},
    "perceptron": {"marginal": "ball", "d": 2, "noise": "realizable",
                   "target": {"kind": "homogeneous-halfspace", "w": [0.6, 0.8]}},
}
_SCHEME_K = {"svm": lambda d: d + 1, "intervals": lambda d: 2, "rectangles": lambda d: 2 * d}


def config_from_args(args) -> ExperimentConfig:
    """Merge the config file (if any) with command-line overrides, then validate."""
    data: dict = {}
    if args.config:
        data = tomllib.loads(Path(args.config).read_text())
    data["subcommand"] = args.subcommand
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.n is not None:
        data["n_grid"] = args.n
    if args.trials is not None:
        data["trials"] = args.trials
    if args.delta is not None:
        data["delta"] = args.delta
    if args.format:
        data.setdefault("output", {})["format"] = args.format
    if args.scheme:
        if args.subcommand == "audit":
            data.setdefault("audit", {})["scheme"] = args.scheme
        else:
            data.setdefault("learner", {}).setdefault("kind", "scheme")
            data["learner"]["scheme"] = args.scheme
            if "distribution" not in data and args.scheme in _SCHEME_DISTRIBUTIONS:
                data["distribution"] = json.loads(json.dumps(_SCHEME_DISTRIBUTIONS[args.scheme]))
    if args.d is not None:
        data.setdefault("distribution", {})["d"] = args.d
        if args.subcommand == "audit":
            data.setdefault("audit", {})["d"] = args.d
    if args.samples is not None:
        data.setdefault("audit", {})["samples"] = args.samples
    if args.eps is not None:
        data.setdefault("entropy", {})["epsilon"] = args.eps
    if args.bound:
        bound = data.setdefault("bound", {})
        bound["id"] = args.bound
        params = bound.setdefault("params", {})
        scheme = data.get("learner", {}).get("scheme")
        if args.k is not None:
            params["k"] = int(args.k) if float(args.k).is_integer() else args.k
        elif "k" not in params and scheme in _SCHEME_K and args.bound in (
                "floyd_warmuth", "k_over_n_plus_1", "stable_deviation", "pol", "mod", "homogeneous"):
            params["k"] = _SCHEME_K[scheme](data.get("distribution", {}).get("d", 2))
    elif args.k is not None and args.subcommand == "entropy":
        data.setdefault("entropy", {})["k"] = args.k
    return validate(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigurationError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, args.out_dir, args.format, max(1, args.jobs))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
