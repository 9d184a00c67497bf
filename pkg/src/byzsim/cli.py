"""Command-line front end.

    byzsim run <config>
    byzsim scenario <name> [--set key=value]...
    byzsim sweep <config> --vary <key> --values <v1,v2,...>

Config files are flat ``key = value`` lines. Keys may be dotted
(``adversary.stop = full``) or grouped under ``[section]`` headers.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_EVEN, Context, Decimal
from fractions import Fraction
from typing import Optional, Sequence

from . import analysis
from .adversary import Adversary, make_byzantine, make_stop, oscillation_controller
from .algorithm import TrimmedMidrange
from .core import (
    ByzSimError,
    Configuration,
    InvalidConfiguration,
    SimulationParams,
    UnknownScenario,
    format_scalar,
    parse_scalar,
)
from .engine import CONVERGED, CYCLE_LIMIT, Trace, run
from .scenarios import build_scenario, run_scenario
from .scheduler import Scripted, make_scheduler

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_CYCLE_LIMIT = 3
EXIT_ENGINE = 4

SWEEP_KEYS = ("n", "f", "k", "delta", "epsilon")
_DECIMAL = Context(prec=12, rounding=ROUND_HALF_EVEN)
SEED_MASK = 2**64 - 1


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def decimal_text(value: Fraction) -> str:
    """12 significant digits, round-half-even. Display only."""
    value = Fraction(value)
    d = _DECIMAL.divide(Decimal(value.numerator), Decimal(value.denominator))
    return format(d.normalize(_DECIMAL), "f") if d != 0 else "0"


@dataclass
class RunConfig:
    n: int
    f: int
    delta: Fraction = Fraction(1)
    epsilon: Fraction = Fraction(1, 100)
    max_cycles: int = 1000
    seed: int = 0
    scheduler: str = "full-sync"
    k: int = 1
    script: list[list[int]] = field(default_factory=list)
    script_repeat: bool = False
    byzantine: str = "track-max"
    stop: str = "full"
    fixed_positions: list[Fraction] = field(default_factory=list)
    offset: Fraction = Fraction(1)
    phases: int = 8
    initial_correct: Optional[list[Fraction]] = None
    initial_byzantine: Optional[list[Fraction]] = None
    initial_width: Fraction = Fraction(100)
    output_trace: Optional[str] = None
    output_csv: Optional[str] = None


_KEY_ALIASES = {
    "delta": "delta", "delta_default": "delta", "epsilon": "epsilon", "n": "n", "f": "f",
    "max_cycles": "max_cycles", "seed": "seed", "scheduler": "scheduler", "k": "k",
    "script": "script", "script_repeat": "script_repeat",
    "adversary.byzantine": "byzantine", "adversary.stop": "stop",
    "adversary.fixed_positions": "fixed_positions", "adversary.offset": "offset",
    "adversary.phases": "phases",
    "initial.correct": "initial_correct", "initial.byzantine": "initial_byzantine",
    "initial.width": "initial_width",
    "output.trace": "output_trace", "output.csv": "output_csv",
}


def _scalar_list(key: str, text: str) -> list[Fraction]:
    try:
        return [parse_scalar(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def read_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if section and "." not in key:
            key = f"{section}.{key}"
        raw[key] = value
    return raw


def parse_config(raw: dict[str, str]) -> RunConfig:
    values: dict = {}
    for key, text in raw.items():
        attr = _KEY_ALIASES.get(key)
        if attr is None:
            raise ConfigError(key, "unknown key")
        try:
            if attr in ("n", "f", "max_cycles", "seed", "k", "phases"):
                values[attr] = int(text)
            elif attr in ("delta", "epsilon", "offset", "initial_width"):
                values[attr] = parse_scalar(text)
            elif attr in ("fixed_positions", "initial_correct", "initial_byzantine"):
                values[attr] = _scalar_list(key, text)
            elif attr == "script":
                values[attr] = [[int(x) for x in group.split(",") if x.strip()]
                                for group in text.split(";") if group.strip()]
            elif attr == "script_repeat":
                values[attr] = text.lower() in ("1", "true", "yes")
            else:
                values[attr] = text
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    for required in ("n", "f"):
        if required not in values:
            raise ConfigError(required, "missing required key")
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(read_config_text(fh.read()))


def _spread(m: int, width: Fraction) -> list[Fraction]:
    if m == 1:
        return [Fraction(0)]
    return [width * i / (m - 1) for i in range(m)]


def build_run(cfg: RunConfig):
    """Validate a config and return ``(initial, scheduler, adversary, params)``."""
    try:
        params = SimulationParams(cfg.n, cfg.f, cfg.delta, cfg.epsilon, cfg.max_cycles, cfg.seed)
    except InvalidConfiguration as exc:
        raise ConfigError("n/f/delta/epsilon/max_cycles/seed", str(exc)) from None
    m = cfg.n - cfg.f
    correct = cfg.initial_correct if cfg.initial_correct is not None else _spread(m, cfg.initial_width)
    if len(correct) != m:
        raise ConfigError("initial.correct", f"has {len(correct)} positions, expected n - f = {m}")
    byz = cfg.initial_byzantine if cfg.initial_byzantine is not None else [Fraction(0)] * cfg.f
    if len(byz) != cfg.f:
        raise ConfigError("initial.byzantine", f"has {len(byz)} positions, expected f = {cfg.f}")
    initial = Configuration.build(params, correct, byz)

    if cfg.byzantine == "oscillation":
        try:
            plan = oscillation_controller(params, initial, phases=cfg.phases, offset=cfg.offset)
        except ByzSimError as exc:
            raise ConfigError("adversary.byzantine", str(exc)) from None
        params = replace(params, max_cycles=plan.cycles)
        initial = Configuration.build(params, correct, byz)
        return initial, plan.scheduler, plan.adversary, params

    if cfg.scheduler not in ("full-sync", "round-robin", "k-bounded", "scripted"):
        raise ConfigError("scheduler", f"unknown scheduler {cfg.scheduler!r}")
    if cfg.scheduler == "k-bounded" and cfg.k < 1:
        raise ConfigError("k", "must be >= 1")
    if cfg.scheduler == "scripted":
        if not cfg.script:
            raise ConfigError("script", "scripted scheduler needs a non-empty script")
        bad = {i for group in cfg.script for i in group} - set(range(m))
        if bad:
            raise ConfigError("script", f"ids {sorted(bad)} are not correct robots (0..{m - 1})")
        scheduler = Scripted(cfg.script, repeat=cfg.script_repeat)
    else:
        scheduler = make_scheduler(cfg.scheduler, k=cfg.k, seed=cfg.seed)
    if cfg.byzantine == "fixed" and len(cfg.fixed_positions) != cfg.f:
        raise ConfigError("adversary.fixed_positions", f"needs exactly f = {cfg.f} positions")
    try:
        byzantine = make_byzantine(cfg.byzantine, seed=(cfg.seed + 2) & SEED_MASK, offset=cfg.offset,
                                   fixed_positions=cfg.fixed_positions)
    except ValueError as exc:
        raise ConfigError("adversary.byzantine", str(exc)) from None
    try:
        stop = make_stop(cfg.stop, seed=(cfg.seed + 1) & SEED_MASK)
    except ValueError as exc:
        raise ConfigError("adversary.stop", str(exc)) from None
    return initial, scheduler, Adversary(byzantine, stop), params


def diameter_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "diameter", "diameter_exact"])
    for t, d in enumerate(trace.diameters()):
        w.writerow([t, decimal_text(d), format_scalar(d)])
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".byzsim-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _exit_for(trace: Trace) -> int:
    kind = trace.terminal.kind if trace.terminal else None
    if kind == CONVERGED:
        return EXIT_OK
    if kind == CYCLE_LIMIT:
        return EXIT_CYCLE_LIMIT
    return EXIT_ENGINE


def cmd_run(config_path: str, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        cfg = load_config(config_path)
        initial, scheduler, adversary, params = build_run(cfg)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=err)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except ByzSimError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG

    trace = run(initial, scheduler, adversary, TrimmedMidrange(), params)
    if cfg.output_trace:
        _atomic_write(cfg.output_trace, trace.to_jsonl())
    if cfg.output_csv:
        _atomic_write(cfg.output_csv, diameter_csv(trace))
    final = trace.diameters()[-1]
    print(f"terminal: {trace.terminal}", file=out)
    print(f"cycles: {len(trace.events)}", file=out)
    print(f"final diameter: {format_scalar(final)} (~{decimal_text(final)})", file=out)
    for name, violations in (("cautious", analysis.check_cautious(trace)),
                             ("diameter-monotone", analysis.check_diameter_monotone(trace))):
        print(f"check {name}: {len(violations)} violation(s)", file=out)
    return _exit_for(trace)


def _parse_sets(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise InvalidConfiguration(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def cmd_scenario(name: str, overrides: Sequence[str] = (), trace_path: Optional[str] = None,
                 out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        scenario = build_scenario(name, _parse_sets(overrides))
    except UnknownScenario as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    except (InvalidConfiguration, ValueError, ByzSimError) as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    trace, results = run_scenario(scenario)
    if trace_path:
        _atomic_write(trace_path, trace.to_jsonl())
    print(f"scenario {scenario.name}: {trace.terminal}, {len(trace.events)} cycles", file=out)
    width = max(len(r.check) for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"  {mark}  {r.check:<{width}}  expected={r.expected} actual={r.actual}", file=out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ASSERTION


def _sweep_point(raw: dict[str, str], vary: str, value: str) -> list[str]:
    cfg = parse_config({**raw, vary: value})
    initial, scheduler, adversary, params = build_run(cfg)
    trace = run(initial, scheduler, adversary, TrimmedMidrange(), params)
    report = analysis.convergence_time(trace, params.epsilon)
    shrink = analysis.estimate_shrinking(trace)
    converged = trace.terminal is not None and trace.terminal.kind == CONVERGED
    return [
        value,
        "1" if converged else "0",
        "" if report.t_epsilon is None else str(report.t_epsilon),
        decimal_text(report.final_diameter),
        format_scalar(report.final_diameter),
        "" if shrink.alpha_observed is None else format_scalar(shrink.alpha_observed),
    ]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BYZSIM_THREADS", "1")))
    except ValueError:
        return 1


def cmd_sweep(config_path: str, vary: str, values: Sequence[str], out_path: Optional[str] = None,
              out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    if vary not in SWEEP_KEYS:
        print(f"config error: cannot vary {vary!r}; choose one of {', '.join(SWEEP_KEYS)}", file=err)
        return EXIT_CONFIG
    try:
        with open(config_path, encoding="utf-8") as fh:
            raw = read_config_text(fh.read())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=err)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    if not values:
        print("config error: --values is empty", file=err)
        return EXIT_CONFIG
    raw.pop("output.trace", None)
    raw.pop("output.csv", None)
    for value in values:
        try:
            build_run(parse_config({**raw, vary: value}))
        except (ConfigError, ByzSimError) as exc:
            print(f"config error ({vary}={value}): {exc}", file=err)
            return EXIT_CONFIG

    workers = min(_workers(), len(values))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, [raw] * len(values), [vary] * len(values), values))
    else:
        rows = [_sweep_point(raw, vary, v) for v in values]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([vary, "converged", "t_epsilon", "final_diameter", "final_diameter_exact", "alpha_observed"])
    w.writerows(rows)
    if out_path:
        _atomic_write(out_path, buf.getvalue())
    else:
        out.write(buf.getvalue())
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="byzsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config")

    p_sc = sub.add_parser("scenario", help="run a catalogue scenario and its assertions")
    p_sc.add_argument("name")
    p_sc.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p_sc.add_argument("--trace", help="write the trace to this path")

    p_sw = sub.add_parser("sweep", help="run a config across values of one key")
    p_sw.add_argument("config")
    p_sw.add_argument("--vary", required=True)
    p_sw.add_argument("--values", required=True, help="comma-separated values")
    p_sw.add_argument("--out", help="summary CSV path (default: stdout)")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "scenario":
        return cmd_scenario(args.name, args.overrides, args.trace)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    return cmd_sweep(args.config, args.vary, values, args.out)


if __name__ == "__main__":
    sys.exit(main())
