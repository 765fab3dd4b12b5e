"""Experiment configuration: TOML text in, validated :class:`ExperimentConfig` out.

Grammar (every section optional unless the subcommand needs it)::

    subcommand = "experiment"      # entropy | net-erm | compress | svm | experiment | audit
    n_grid = [100, 200, 400]       # strictly increasing
    trials = 200
    delta = 0.05
    master_seed = 0

    [distribution]
    marginal = "ball"              # ball | sphere | pmf
    d = 2
    weights = [0.25, 0.75]         # pmf only
    atoms = [[0.0], [1.0]]         # pmf only, defaults to 0..m-1
    noise = "realizable"           # realizable | massart | regression
    h = 0.5                        # massart margin
    sigma = 0.1                    # regression noise level
    target_index = 0               # index into [class], or an inline target table:
    target = { kind = "affine-halfspace", w = [1.0, 0.5], b = 0.1 }

    [class]
    kind = "homogeneous-halfspace" # see domain.CLASS_KINDS
    size = 720
    grid = [0.0, 0.25, 0.5]        # interval / rectangle grids
    labels = [[1, -1], [-1, 1]]    # finite classes
    radius = 0.75                  # regression grid

    [learner]
    kind = "scheme"                # scheme | majority | net-erm | l2-skeleton | constant
    scheme = "svm"                 # svm | intervals | rectangles | halving | perceptron
    beta = 1.0
    B = 1.0
    variant = "cor"                # cor | mainbound
    rotations = 1                  # net-erm: average over rotated targets

    [bound]
    id = "k_over_n_plus_1"
    params = { k = 3 }
    column = "risk"

    [entropy]
    epsilon = [0.05, 0.1, 0.2, 0.4]
    beta = 1.0
    B = 1.0
    bracketing = false
    m = 2880
    lattice = true
    mode = "loss-class"
    k = 0.01                       # optional fixed-point multiplier
    fixed_point = "gamma"

    [audit]
    scheme = "intervals"
    samples = 200
    min_size = 4
    max_size = 20

    [output]
    dir = "out"
    format = "csv"                 # csv | json
"""

from __future__ import annotations

import difflib
import sys
from dataclasses import dataclass, field

from .errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SUBCOMMANDS = ("entropy", "net-erm", "compress", "svm", "experiment", "audit")
SCHEMES = ("svm", "intervals", "rectangles", "halving", "perceptron", "first-k")
LEARNERS = ("scheme", "majority", "net-erm", "l2-skeleton", "constant")

SCHEMA: dict[str, dict] = {
    "": {"subcommand": None, "n_grid": [], "trials": 200, "delta": 0.05, "master_seed": 0,
         "distribution": None, "class": None, "learner": None, "bound": None, "entropy": None,
         "audit": None, "output": None},
    "distribution": {"marginal": "ball", "d": 2, "weights": None, "atoms": None,
                     "noise": "realizable", "h": 1.0, "sigma": 0.0, "target_index": None,
                     "target": None},
    "class": {"kind": "homogeneous-halfspace", "size": 720, "d": None, "grid": None,
              "labels": None, "atoms": None, "radius": 0.75, "seed": 0},
    "learner": {"kind": "scheme", "scheme": "svm", "beta": 1.0, "B": 1.0, "variant": "cor",
                "rotations": 1, "m": 2880, "lattice": True},
    "bound": {"id": None, "params": {}, "column": "risk"},
    "entropy": {"epsilon": [0.05, 0.1, 0.2, 0.4], "beta": 1.0, "B": 1.0, "bracketing": False,
                "m": 2880, "lattice": True, "mode": "loss-class", "k": None,
                "fixed_point": "gamma", "solver": "auto"},
    "audit": {"scheme": "intervals", "samples": 200, "min_size": 4, "max_size": 20, "d": 2},
    "output": {"dir": "out", "format": "csv"},
}
_ALL_KEYS = sorted({k for sec in SCHEMA.values() for k in sec})


@dataclass
class ExperimentConfig:
    subcommand: str
    n_grid: list[int] = field(default_factory=list)
    trials: int = 200
    delta: float = 0.05
    master_seed: int = 0
    distribution: dict = field(default_factory=dict)
    cls: dict = field(default_factory=dict)
    learner: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    entropy: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    present: frozenset = frozenset()

    def to_dict(self) -> dict:
        out = {"subcommand": self.subcommand, "n_grid": self.n_grid, "trials": self.trials,
               "delta": self.delta, "master_seed": self.master_seed}
        for name, attr in (("distribution", "distribution"), ("class", "cls"),
                           ("learner", "learner"), ("bound", "bound"), ("entropy", "entropy"),
                           ("audit", "audit"), ("output", "output")):
            if name in self.present:
                out[name] = getattr(self, attr)
        return out


def _suggest(key: str, pool) -> str:
    hit = difflib.get_close_matches(key, pool, n=1, cutoff=0.6)
    return f" (did you mean {hit[0]!r}?)" if hit else ""


def _check_keys(section: str, data: dict, errors: list) -> None:
    allowed = SCHEMA[section]
    for key in data:
        if key not in allowed:
            pool = list(allowed) + [k for k in _ALL_KEYS if k not in allowed]
            where = f" in [{section}]" if section else ""
            errors.append(f"unknown key {key!r}{where}{_suggest(key, pool)}")


def validate(data: dict) -> ExperimentConfig:
    """Validate a parsed mapping; collects every error before raising."""
    errors: list[str] = []
    _check_keys("", data, errors)
    sections = {}
    for name in SCHEMA:
        if not name:
            continue
        raw = data.get(name)
        if raw is None:
            sections[name] = dict(SCHEMA[name])
            continue
        if not isinstance(raw, dict):
            errors.append(f"[{name}] must be a table")
            sections[name] = dict(SCHEMA[name])
            continue
        _check_keys(name, raw, errors)
        merged = dict(SCHEMA[name])
        merged.update({k: v for k, v in raw.items() if k in SCHEMA[name]})
        sections[name] = merged

    sub = data.get("subcommand")
    if sub is None:
        errors.append("missing required key 'subcommand'")
    elif sub not in SUBCOMMANDS:
        errors.append(f"subcommand must be one of {', '.join(SUBCOMMANDS)}{_suggest(str(sub), SUBCOMMANDS)}")

    n_grid = data.get("n_grid", [])
    if not isinstance(n_grid, list) or not all(isinstance(n, int) and n >= 1 for n in n_grid):
        errors.append("n_grid must be a list of positive integers")
    elif any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        errors.append("n_grid not increasing")
    trials = data.get("trials", 200)
    if not isinstance(trials, int) or trials < 1:
        errors.append("trials must be a positive integer")
    delta = data.get("delta", 0.05)
    if not isinstance(delta, (int, float)) or not 0 < delta < 1:
        errors.append("delta must lie in (0, 1)")
    seed = data.get("master_seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append("master_seed must be a nonnegative integer")

    present = frozenset(k for k in SCHEMA if k and k in data)
    required = {
        "entropy": ("distribution", "class"),
        "net-erm": ("distribution", "class"),
        "experiment": ("distribution", "learner"),
        "compress": ("distribution", "learner"),
        "svm": ("distribution",),
    }.get(sub, ())
    missing = [r for r in required if r not in present]
    if missing:
        errors.append(f"missing required sections for {sub!r}: {', '.join(missing)}")
    if sub in ("experiment", "net-erm", "compress", "svm") and isinstance(n_grid, list) and not n_grid:
        errors.append(f"n_grid is required for {sub!r}")

    dist = sections["distribution"]
    if dist["marginal"] not in ("ball", "sphere", "pmf"):
        errors.append(f"unknown marginal {dist['marginal']!r}")
    if dist["noise"] not in ("realizable", "massart", "regression"):
        errors.append(f"unknown noise {dist['noise']!r}")
    if dist["marginal"] == "pmf" and not dist["weights"]:
        errors.append("pmf marginal needs weights")
    lrn = sections["learner"]
    if lrn["kind"] not in LEARNERS:
        errors.append(f"unknown learner kind {lrn['kind']!r}{_suggest(str(lrn['kind']), LEARNERS)}")
    for sec in ("learner", "audit"):
        if sections[sec]["scheme"] not in SCHEMES:
            errors.append(f"unknown scheme {sections[sec]['scheme']!r}"
                          f"{_suggest(str(sections[sec]['scheme']), SCHEMES)}")
    if sub == "experiment" and "bound" in present and not sections["bound"]["id"]:
        errors.append("[bound] needs an id")
    if sections["output"]["format"] not in ("csv", "json"):
        errors.append("output format must be csv or json")
    eps = sections["entropy"]["epsilon"]
    if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and 0 < e <= 1 for e in eps):
        errors.append("entropy.epsilon must be a nonempty list of values in (0, 1]")

    if errors:
        raise ConfigurationError("; ".join(errors), errors)
    return ExperimentConfig(
        sub, list(n_grid), trials, float(delta), seed, sections["distribution"], sections["class"],
        sections["learner"], sections["bound"], sections["entropy"], sections["audit"],
        sections["output"], present,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config is not valid TOML: {exc}") from None
    return validate(data)
