"""Command line front end: ``coagfrag {simulate,ensemble,drift,validate}``.

Runs are described by a JSON config file.  A minimal mass flow example::

    {"schema": 1, "model": "massflow", "n": 1,
     "coag": {"name": "product_power", "beta": 1.0},
     "init": {"monodisperse": {"x0": 1.0, "count": 1}},
     "stop": {"rate_ceiling": 1e12},
     "ensemble": {"replicates": 1000, "base_seed": 7}}

Command line flags override the matching config fields.  Exit status is 2
for usage and config errors, 1 for model errors, 0 otherwise.
"""
from __future__ import annotations

import argparse
import copy
import inspect
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import direct_sim, drift_functions, kernels, mass_flow
from .ensemble import aggregate, run_ensemble, summary_csv
from .errors import CapabilityError, DivergenceError, DomainError, ModelError, StepSizeError, UsageError
from .jump_core import StopRule, check_region_criterion, classify, drift, pure_birth_law, simulate_chain
from .particle_state import BoundaryGuards, ParticleSystem, SizeTrap
from .rng import DRIFT, stream

SCHEMA = 1
MODELS = ("direct", "massflow", "pure_birth")
_TOP_FIELDS = {"schema", "model", "n", "coag", "frag", "source", "efflux", "rate", "guards", "truncate",
               "init", "stop", "ensemble", "outputs", "drift", "validation"}
_STOP_FIELDS = {"max_jumps", "time_horizon", "rate_ceiling", "trap"}


class ConfigError(UsageError):
    """Malformed config; the message names the offending field."""


def _field_error(path: str, msg: str) -> ConfigError:
    return ConfigError(f"config field '{path}': {msg}")


def _number(value, path: str, *, integer: bool = False, positive: bool = False, allow_inf: bool = False):
    if value is None and allow_inf:
        return math.inf
    if isinstance(value, str) and allow_inf and value.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _field_error(path, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise _field_error(path, f"expected an integer, got {value!r}")
        value = int(value)
    if positive and not value > 0:
        raise _field_error(path, f"must be positive, got {value!r}")
    return value


def _json_float(x: float):
    """Finite floats as numbers, infinities as the strings "inf" / "-inf"."""
    if isinstance(x, float) and not math.isfinite(x):
        if math.isnan(x):
            return None
        return "inf" if x > 0 else "-inf"
    return x


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return _json_float(obj)
    return obj


def dumps(obj, **kw) -> str:
    return json.dumps(_plain(obj), allow_nan=False, **kw)


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    """Validated run description; :meth:`to_dict` gives the canonical echo."""

    model: str
    n: int = 1
    coag: Optional[dict] = None
    frag: Optional[dict] = None
    source: Optional[dict] = None
    efflux: Optional[dict] = None
    rate: Optional[dict] = None
    guards: dict = field(default_factory=dict)
    truncate: bool = False
    init: dict = field(default_factory=dict)
    stop: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=lambda: {"replicates": 1, "base_seed": 0})
    outputs: dict = field(default_factory=lambda: {"dir": None, "verbosity": 1})
    drift: Optional[dict] = None
    validation: Optional[dict] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - _TOP_FIELDS
        if unknown:
            raise _field_error(sorted(unknown)[0], f"unknown field; known fields: {sorted(_TOP_FIELDS)}")
        schema = d.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise _field_error("schema", f"unsupported schema {schema!r}, expected {SCHEMA}")
        model = d.get("model")
        if model not in MODELS:
            raise _field_error("model", f"expected one of {list(MODELS)}, got {model!r}")
        cfg = cls(model=model)
        cfg.n = _number(d.get("n", 1), "n", integer=True, positive=True)
        for key in ("coag", "frag", "source", "efflux", "rate", "drift", "validation"):
            if d.get(key) is not None:
                if not isinstance(d[key], (dict, str)):
                    raise _field_error(key, "expected an object")
                setattr(cfg, key, copy.deepcopy(d[key]))
        cfg.truncate = bool(d.get("truncate", False))
        cfg.guards = _parse_guards(d.get("guards", {}))
        cfg.init = _parse_init(d.get("init"), model)
        cfg.stop = _parse_stop(d.get("stop", {}))
        ens = d.get("ensemble", {}) or {}
        cfg.ensemble = {"replicates": _number(ens.get("replicates", 1), "ensemble.replicates",
                                              integer=True, positive=True),
                        "base_seed": _number(ens.get("base_seed", 0), "ensemble.base_seed", integer=True)}
        out = d.get("outputs", {}) or {}
        verbosity = _number(out.get("verbosity", 1), "outputs.verbosity", integer=True)
        if verbosity not in (0, 1, 2):
            raise _field_error("outputs.verbosity", "must be 0, 1 or 2")
        cfg.outputs = {"dir": out.get("dir"), "verbosity": verbosity}
        cfg.build_law()  # resolves every registry name now, so bad names fail before any run
        return cfg

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA, "model": self.model, "n": self.n}
        for key in ("coag", "frag", "source", "efflux", "rate"):
            if getattr(self, key) is not None:
                d[key] = copy.deepcopy(getattr(self, key))
        d["guards"] = dict(self.guards)
        d["truncate"] = self.truncate
        d["init"] = copy.deepcopy(self.init)
        stop = dict(self.stop)
        stop["time_horizon"] = _json_float(stop["time_horizon"])
        stop["rate_ceiling"] = _json_float(stop["rate_ceiling"])
        d["stop"] = stop
        d["ensemble"] = dict(self.ensemble)
        d["outputs"] = dict(self.outputs)
        for key in ("drift", "validation"):
            if getattr(self, key) is not None:
                d[key] = copy.deepcopy(getattr(self, key))
        return d

    # -- builders ---------------------------------------------------------

    def boundary_guards(self) -> BoundaryGuards:
        return BoundaryGuards(**self.guards)

    def build_law(self):
        if self.model == "pure_birth":
            if self.rate is None:
                raise _field_error("rate", "pure_birth needs a rate function, e.g. {'name': 'monomial', 'p': 2}")
            return pure_birth_law(kernels.rate_from_spec(self.rate))
        coag = kernels.coag_from_spec(self.coag) if self.coag is not None else None
        frag = kernels.frag_from_spec(self.frag) if self.frag is not None else None
        source = kernels.source_from_spec(self.source) if self.source is not None else None
        efflux = kernels.efflux_from_spec(self.efflux) if self.efflux is not None else None
        if self.model == "direct":
            return direct_sim.build_law(direct_sim.DirectSimConfig(
                self.n, coag=coag, frag=frag, source=source, efflux=efflux, guards=self.boundary_guards()))
        return mass_flow.build_law(mass_flow.MassFlowConfig(
            self.n, coag=coag, mf_frag=frag, source=source, efflux=efflux, guards=self.boundary_guards(),
            truncate=self.truncate))

    def initial_state(self):
        if self.model == "pure_birth":
            return self.init["k"]
        if "sizes" in self.init:
            return ParticleSystem(self.n, self.init["sizes"])
        if "monodisperse" in self.init:
            m = self.init["monodisperse"]
            return ParticleSystem.monodisperse(self.n, m["x0"], m["count"])
        return ParticleSystem(self.n, [])

    def stop_rule(self, law) -> StopRule:
        guards = []
        if self.model != "pure_birth":
            guards.append(law.guard)
        trap = self.stop.get("trap")
        if trap is not None:
            guards.append(SizeTrap(trap["threshold"], trap.get("above", False)))
        guard = None
        if len(guards) == 1:
            guard = guards[0]
        elif guards:
            guard = _AnyGuard(tuple(guards))
        return StopRule(max_jumps=self.stop["max_jumps"], time_horizon=self.stop["time_horizon"],
                        rate_ceiling=self.stop["rate_ceiling"], state_guard=guard)


@dataclass(frozen=True)
class _AnyGuard:
    guards: tuple

    def __call__(self, state):
        for g in self.guards:
            hit = g(state)
            if hit is not None:
                return hit
        return None


def _parse_guards(g) -> dict:
    if not isinstance(g, dict):
        raise _field_error("guards", "expected an object with x_min / x_max")
    out = {}
    for key in ("x_min", "x_max"):
        if key in g:
            out[key] = float(_number(g[key], f"guards.{key}", positive=True))
    extra = set(g) - {"x_min", "x_max"}
    if extra:
        raise _field_error(f"guards.{sorted(extra)[0]}", "unknown field")
    return out


def _parse_init(init, model: str) -> dict:
    if model == "pure_birth":
        k = 1 if init is None else init.get("k", 1) if isinstance(init, dict) else init
        return {"k": _number(k, "init.k", integer=True, positive=True)}
    if init is None or init == "empty" or (isinstance(init, dict) and init.get("empty")):
        return {"empty": True}
    if not isinstance(init, dict):
        raise _field_error("init", "expected {'monodisperse': {...}}, {'sizes': [...]} or {'empty': true}")
    if "sizes" in init:
        sizes = init["sizes"]
        if not isinstance(sizes, list):
            raise _field_error("init.sizes", "expected a list of sizes")
        return {"sizes": [float(_number(s, f"init.sizes[{i}]", positive=True)) for i, s in enumerate(sizes)]}
    if "monodisperse" in init:
        m = init["monodisperse"]
        if not isinstance(m, dict):
            raise _field_error("init.monodisperse", "expected {'x0': ..., 'count': ...}")
        return {"monodisperse": {"x0": float(_number(m.get("x0", 1.0), "init.monodisperse.x0", positive=True)),
                                 "count": _number(m.get("count"), "init.monodisperse.count", integer=True,
                                                  positive=True)}}
    raise _field_error("init", "expected one of 'monodisperse', 'sizes', 'empty'")


def _parse_stop(stop) -> dict:
    if not isinstance(stop, dict):
        raise _field_error("stop", "expected an object")
    extra = set(stop) - _STOP_FIELDS
    if extra:
        raise _field_error(f"stop.{sorted(extra)[0]}", f"unknown field; known: {sorted(_STOP_FIELDS)}")
    defaults = StopRule()
    out = {
        "max_jumps": _number(stop.get("max_jumps", defaults.max_jumps), "stop.max_jumps", integer=True),
        "time_horizon": float(_number(stop.get("time_horizon"), "stop.time_horizon", allow_inf=True)),
        "rate_ceiling": float(_number(stop.get("rate_ceiling", defaults.rate_ceiling), "stop.rate_ceiling",
                                      allow_inf=True)),
    }
    trap = stop.get("trap")
    if trap is not None:
        if not isinstance(trap, dict) or "threshold" not in trap:
            raise _field_error("stop.trap", "expected {'threshold': ..., 'above': false}")
        out["trap"] = {"threshold": float(_number(trap["threshold"], "stop.trap.threshold", positive=True)),
                       "above": bool(trap.get("above", False))}
    return out


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def apply_overrides(raw: dict, args) -> dict:
    raw = copy.deepcopy(raw)
    ens = raw.setdefault("ensemble", {}) or {}
    raw["ensemble"] = ens
    if getattr(args, "seed", None) is not None:
        ens["base_seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        ens["replicates"] = args.replicates
    out = raw.setdefault("outputs", {}) or {}
    raw["outputs"] = out
    if getattr(args, "out", None) is not None:
        out["dir"] = args.out
    if getattr(args, "verbosity", None) is not None:
        out["verbosity"] = args.verbosity
    return raw


# ---------------------------------------------------------------------------
# output helpers


def state_json(state) -> dict:
    if isinstance(state, ParticleSystem):
        return state.to_json()
    return {"k": int(state)}


def event_tag(ev) -> str:
    if ev is None:
        return "jump"
    return ev.tag


def trajectory_lines(traj, verbosity: int):
    """Trajectory JSONL rows: row k is the state after k jumps and the rate out of it."""
    for k, state in enumerate(traj.states):
        row = {"k": k, "t": traj.jump_times[k], "rate": traj.rates[k] if k < len(traj.rates) else None,
               "event": "start" if k == 0 else event_tag(traj.events[k - 1] if traj.events else None),
               "state": state_json(state)}
        if verbosity >= 2 and k > 0 and traj.events and traj.events[k - 1] is not None:
            row["detail"] = traj.events[k - 1].to_json()
        yield dumps(row)


class Output:
    """Writes files under ``dir`` when one is configured; the primary JSON also goes to stdout."""

    def __init__(self, directory: Optional[str]):
        self.dir = Path(directory) if directory else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        if self.dir is not None:
            (self.dir / name).write_text(text)

    def write_lines(self, name: str, lines):
        if self.dir is not None:
            with open(self.dir / name, "w") as fh:
                for line in lines:
                    fh.write(line + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig, out: Output, stdout) -> int:
    law = cfg.build_law()
    stop = cfg.stop_rule(law)
    verbosity = cfg.outputs["verbosity"]
    seed, replicate = cfg.ensemble["base_seed"], 0
    traj = simulate_chain(law, cfg.initial_state(), seed, stop, replicate=replicate,
                          record_states=verbosity >= 1, record_events=verbosity >= 1)
    verdict = classify(traj, stop)
    report = {"schema": SCHEMA, "seed": seed, "replicate": replicate, **verdict.to_json()}
    out.write("config.json", dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    out.write("verdict.json", dumps(report, indent=2) + "\n")
    if verbosity >= 1:
        out.write_lines("trajectory.jsonl", trajectory_lines(traj, verbosity))
        if cfg.model == "massflow":
            trace = mass_flow.mass_trace(traj)
            out.write("mass_trace.csv", "t,N_over_n\n" + "".join(f"{t!r},{m!r}\n" for t, m in trace.tolist()))
    print(dumps(report), file=stdout)
    return 0


def cmd_ensemble(cfg: RunConfig, out: Output, stdout, workers: int = 1) -> int:
    law = cfg.build_law()
    stop = cfg.stop_rule(law)
    verbosity = cfg.outputs["verbosity"]
    results = run_ensemble(law, cfg.initial_state(), stop, cfg.ensemble["base_seed"],
                           cfg.ensemble["replicates"], workers=workers, keep=verbosity >= 2,
                           record_states=verbosity >= 2, record_events=verbosity >= 2)
    agg = aggregate(results)
    agg["base_seed"] = cfg.ensemble["base_seed"]
    out.write("config.json", dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    out.write("aggregate.json", dumps(agg, indent=2) + "\n")
    if verbosity >= 1:
        out.write("summary.csv", summary_csv(results))
    if verbosity >= 2:
        for r in results:
            out.write_lines(f"trajectory_{r.replicate:06d}.jsonl", trajectory_lines(r.trajectory, verbosity))
    print(dumps(agg), file=stdout)
    return 0


def _drift_states(cfg: RunConfig, spec: dict) -> list:
    states = spec.get("states")
    if not isinstance(states, list) or not states:
        raise _field_error("drift.states", "expected a non-empty list of states")
    out = []
    for i, s in enumerate(states):
        if cfg.model == "pure_birth":
            out.append(_number(s.get("k") if isinstance(s, dict) else s, f"drift.states[{i}]", integer=True,
                               positive=True))
            continue
        sizes = s.get("sizes") if isinstance(s, dict) else s
        if not isinstance(sizes, list):
            raise _field_error(f"drift.states[{i}]", "expected {'sizes': [...]}")
        out.append(ParticleSystem(cfg.n, sizes))
    return out


def cmd_drift(cfg: RunConfig, out: Output, stdout) -> int:
    spec = cfg.drift
    if not isinstance(spec, dict):
        raise _field_error("drift", "drift needs {'eta': {...}, 'states': [...], 'epsilon': ...}")
    if "eta" not in spec:
        raise _field_error("drift.eta", "missing test function spec")
    eta = drift_functions.from_spec(spec["eta"], cfg.n)
    law = cfg.build_law()
    states = _drift_states(cfg, spec)
    samples = _number(spec.get("mc_samples", 1000), "drift.mc_samples", integer=True, positive=True)
    seed = cfg.ensemble["base_seed"]
    epsilon = spec.get("epsilon")
    members = None
    if epsilon is not None:
        epsilon = float(_number(epsilon, "drift.epsilon", positive=True))
        members = check_region_criterion(law, states, eta, epsilon, samples, seed)
    # same seed and draw order as the membership check, so the reported estimates are the ones judged
    rng = stream(seed, 0, DRIFT)
    rows = []
    for i, s in enumerate(states):
        rep = drift(law, s, eta, samples, rng=rng)
        row = {"state": state_json(s), **rep.to_json()}
        if members is not None:
            row["member"] = members[i]
        rows.append(row)
    report = {"schema": SCHEMA, "eta": spec["eta"], "epsilon": epsilon, "mc_samples": samples, "states": rows}
    if members is not None:
        report["all_members"] = all(members)
    out.write("config.json", dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    out.write("drift.json", dumps(report, indent=2) + "\n")
    print(dumps(report), file=stdout)
    return 0


def cmd_validate(name: str, params: dict, out: Output, stdout) -> int:
    from .validations import VALIDATIONS, run_validation
    if name in VALIDATIONS:
        try:
            inspect.signature(VALIDATIONS[name]).bind(**params)
        except TypeError as exc:
            raise UsageError(f"bad parameters for validation {name!r}: {exc}") from None
    result = run_validation(name, **params)
    print(result.line(), file=stdout)
    out.write(f"validation_{result.name}.json", dumps(result.to_json(), indent=2) + "\n")
    return 0 if result.passed in (True, None) else 1


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run config")
    common.add_argument("--seed", type=int, help="base seed (overrides ensemble.base_seed)")
    common.add_argument("--replicates", type=int, help="number of replicates (overrides ensemble.replicates)")
    common.add_argument("--out", metavar="DIR", help="directory for output files")
    common.add_argument("--verbosity", type=int, choices=(0, 1, 2),
                        help="0 verdicts only, 1 adds per-replicate rows, 2 adds full event logs")
    common.add_argument("--workers", type=int, default=1, help="worker processes for ensembles")

    parser = argparse.ArgumentParser(prog="coagfrag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one trajectory")
    sub.add_parser("ensemble", parents=[common], help="run seeded replicates and aggregate verdicts")
    sub.add_parser("drift", parents=[common], help="audit drift of a test function on given states")
    v = sub.add_parser("validate", parents=[common], help="run a named validation check")
    v.add_argument("name", nargs="?", help="validation name; 'list' prints the known names")
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        if args.command == "validate":
            return _validate(args, stdout)
        if not args.config:
            raise UsageError(f"{args.command} needs --config PATH")
        cfg = RunConfig.from_dict(apply_overrides(load_config(args.config), args))
        out = Output(cfg.outputs["dir"])
        if args.command == "simulate":
            return cmd_simulate(cfg, out, stdout)
        if args.command == "ensemble":
            return cmd_ensemble(cfg, out, stdout, workers=args.workers)
        return cmd_drift(cfg, out, stdout)
    except UsageError as exc:
        print(f"coagfrag: usage error: {exc}", file=stderr)
        return 2
    except (ModelError, CapabilityError, DomainError, StepSizeError, DivergenceError) as exc:
        print(f"coagfrag: model error: {exc}", file=stderr)
        return 1


def _validate(args, stdout) -> int:
    from .validations import VALIDATIONS
    name, params = args.name, {}
    if args.config:
        raw = load_config(args.config)
        spec = raw.get("validation", raw) if isinstance(raw, dict) else None
        if not isinstance(spec, dict):
            raise ConfigError("validation config must be an object")
        name = name or spec.get("name")
        params = dict(spec.get("params", {}))
    if name == "list":
        print("\n".join(sorted(VALIDATIONS)), file=stdout)
        return 0
    if not name:
        raise UsageError("validate needs a name (try 'coagfrag validate list')")
    if args.seed is not None:
        params["seed"] = args.seed
    if args.replicates is not None:
        params["replicates"] = args.replicates
    return cmd_validate(name, params, Output(args.out), stdout)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
