"""Experiment configuration: JSON loading, presets and validation."""

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

from . import network, sets
from .algorithms import DOFW, DOGD, DOGD_LOCAL, DOGD_MIXED, StepSchedule, alpha_at
from .errors import ConfigError, ScheduleError

PRESETS = ("fig1", "fig2", "fig3")

DEFAULTS = {
    "replicates": 1,
    "network": {"topology": network.CYCLE_SPLIT, "n": 20, "Q": 20},
    "loss": {"kind": "ridge", "d": 8, "lambda1": 5e-6, "T": 2000, "static": False, "static_features": False},
    "set": {"kind": "simplex"},
    "metrics": {"regret": True, "at": "x", "comparator_tol": 1e-8, "theorem1": True, "lemmas": True,
                "diagnostics": "auto"},
    "export": {"traces": True, "diagnostics": True, "stream": False, "schedule": False},
    "output": "out",
}

# full per-round arrays are kept automatically only below this many n*d*T entries
AUTO_DIAGNOSTICS_LIMIT = 2_000_000


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, expected one of {', '.join(PRESETS)}", "preset")
    text = resources.files("dofw").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None


def merge(base, override):
    """Recursive dict merge; lists and scalars in ``override`` replace ``base``."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunSpec:
    label: str
    algorithm: str
    step: StepSchedule
    variant: str = DOGD_MIXED
    dims: list | None = None


@dataclass
class ExperimentConfig:
    seed: int
    replicates: int
    network: dict
    loss: dict
    set: dict
    dims: list
    horizons: list
    runs: list
    metrics: dict
    export: dict
    output: str
    raw: dict = field(default=None, repr=False)

    @property
    def n(self):
        return self.network["n"]

    def fset(self, d):
        return sets.from_config({**self.set, "d": d})

    def dims_for(self, run):
        return self.dims if run.dims is None else run.dims

    def stream_seed(self, rep):
        return self.loss.get("seed", self.seed) + rep

    def network_seed(self, rep):
        return self.network.get("seed", self.seed) + rep

    def diagnostics_for(self, d, T):
        mode = self.metrics["diagnostics"]
        if mode == "auto":
            return self.n * d * T <= AUTO_DIAGNOSTICS_LIMIT
        return bool(mode)


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    assumption1: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.errors

    def add(self, path, message):
        self.errors.append(f"{path}: {message}")


def _is_int(v, lo=None):
    return isinstance(v, int) and not isinstance(v, bool) and (lo is None or v >= lo)


def _int_list(v, lo=1):
    if _is_int(v, lo):
        return [v]
    if isinstance(v, list) and v and all(_is_int(x, lo) for x in v):
        return list(v)
    return None


def validate(raw, certify=True):
    """Structural checks with field paths, then certification of each schedule.

    Returns (ExperimentConfig or None, ValidationReport).
    """
    rep = ValidationReport()
    if not isinstance(raw, dict):
        rep.add("<root>", "config must be a JSON object")
        return None, rep
    if "seed" not in raw:
        rep.add("seed", "is mandatory")
    elif not _is_int(raw["seed"], 0):
        rep.add("seed", f"must be a non-negative integer, got {raw['seed']!r}")
    cfg = merge(DEFAULTS, raw)
    net, loss = cfg["network"], cfg["loss"]

    if not _is_int(cfg["replicates"], 1):
        rep.add("replicates", "must be a positive integer")
    if net.get("topology") not in network.TOPOLOGIES:
        rep.add("network.topology", f"must be one of {', '.join(network.TOPOLOGIES)}")
    for key in ("n", "Q"):
        if not _is_int(net.get(key), 1):
            rep.add(f"network.{key}", "must be a positive integer")
    if "seed" in net and not _is_int(net["seed"], 0):
        rep.add("network.seed", "must be a non-negative integer")
    if loss.get("kind") != "ridge":
        rep.add("loss.kind", "only 'ridge' is supported")
    if "n" in loss and loss["n"] != net.get("n"):
        rep.add("loss.n", f"{loss['n']!r} does not match network.n={net.get('n')!r}")
    if "seed" in loss and not _is_int(loss["seed"], 0):
        rep.add("loss.seed", "must be a non-negative integer")
    if not (isinstance(loss.get("lambda1"), (int, float)) and loss["lambda1"] >= 0):
        rep.add("loss.lambda1", "must be a non-negative number")

    dims = _int_list(cfg.get("dims", loss.get("d")))
    if dims is None:
        rep.add("dims" if "dims" in cfg else "loss.d", "must be a positive integer or a non-empty list of them")
    horizons = _int_list(cfg.get("horizons", loss.get("T")))
    if horizons is None:
        rep.add("horizons" if "horizons" in cfg else "loss.T",
                "must be a positive integer or a non-empty list of them")
    if "d" in cfg["set"] and dims is not None and any(d != cfg["set"]["d"] for d in dims):
        rep.add("set.d", f"{cfg['set']['d']!r} does not match dims {dims}")
    if cfg["set"].get("kind") not in (sets.SIMPLEX, sets.L1_BALL, sets.BOX):
        rep.add("set.kind", f"unknown set kind {cfg['set'].get('kind')!r}")
    elif cfg["set"]["kind"] == sets.BOX and dims and max(dims) > sets.MAX_BOX_VERTEX_DIM:
        rep.add("set.kind", f"box sets need d <= {sets.MAX_BOX_VERTEX_DIM} for exact variation budgets")

    met = cfg["metrics"]
    if met.get("at") not in ("x", "x_hat"):
        rep.add("metrics.at", "must be 'x' or 'x_hat'")
    if not (isinstance(met.get("comparator_tol"), (int, float)) and met["comparator_tol"] > 0):
        rep.add("metrics.comparator_tol", "must be positive")
    if met.get("diagnostics") not in ("auto", True, False):
        rep.add("metrics.diagnostics", "must be 'auto', true or false")

    runs = []
    raw_runs = cfg.get("runs")
    if not isinstance(raw_runs, list) or not raw_runs:
        rep.add("runs", "must be a non-empty list of algorithm blocks")
        raw_runs = []
    labels = set()
    for k, r in enumerate(raw_runs):
        p = f"runs[{k}]"
        if not isinstance(r, dict):
            rep.add(p, "must be an object")
            continue
        alg = r.get("algorithm")
        if alg not in (DOFW, DOGD):
            rep.add(f"{p}.algorithm", f"must be '{DOFW}' or '{DOGD}'")
        label = r.get("label", f"{alg}_{k}")
        if label in labels:
            rep.add(f"{p}.label", f"duplicate label {label!r}")
        labels.add(label)
        variant = r.get("variant", DOGD_MIXED)
        if variant not in (DOGD_MIXED, DOGD_LOCAL):
            rep.add(f"{p}.variant", f"must be '{DOGD_MIXED}' or '{DOGD_LOCAL}'")
        run_dims = None
        if "dims" in r:
            run_dims = _int_list(r["dims"])
            if run_dims is None:
                rep.add(f"{p}.dims", "must be a positive integer or a non-empty list of them")
            elif dims is not None and not set(run_dims) <= set(dims):
                rep.add(f"{p}.dims", f"{run_dims} not a subset of dims {dims}")
        step = None
        try:
            step = StepSchedule.from_config(r["step"])
            for T in horizons or []:
                alpha_at(step, T)
        except KeyError as exc:
            rep.add(f"{p}.step", f"missing field {exc}")
        except TypeError as exc:
            rep.add(f"{p}.step", f"bad field ({exc})")
        except ConfigError as exc:
            rep.add(f"{p}.{exc.path}" if exc.path else f"{p}.step", exc.message)
        runs.append(RunSpec(label, alg, step, variant, run_dims))

    if rep.errors:
        return None, rep
    conf = ExperimentConfig(
        seed=raw["seed"], replicates=cfg["replicates"], network=net, loss=loss, set=cfg["set"],
        dims=dims, horizons=horizons, runs=runs, metrics=met, export=cfg["export"],
        output=cfg["output"], raw=cfg,
    )
    n, Q, topo = net["n"], net["Q"], net["topology"]
    if topo == network.CYCLE_SPLIT and Q < network.min_period(n, topo):
        rep.add("network.Q", f"Q={Q} is too small for cycle_split with n={n}: every Q-window union must be "
                             f"strongly connected (joint connectivity condition), which needs "
                             f"Q >= {network.min_period(n, topo)}")
        return None, rep
    if certify:
        Tmax = max(horizons)
        for r in range(conf.replicates):
            try:
                sched = network.generate_schedule(n, Tmax, Q, conf.network_seed(r), topo)
            except ScheduleError as exc:
                rep.add("network", str(exc))
                return None, rep
            a1 = network.verify_assumption1(sched)
            rep.assumption1[r] = a1
            if not a1.ok:
                rep.add("network", f"replicate {r}: schedule fails certification: {a1.violations[:3]}")
    return (conf if rep.ok else None), rep
