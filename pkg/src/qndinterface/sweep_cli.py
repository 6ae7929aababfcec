"""Command-line front end: deterministic self-checks, figure sweeps and dumps.

Exit codes: 0 success, 1 check failure, 2 invalid configuration,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import phase_space as ps_
from .metrics import UnreachableTargetError, fidelity, invert_ps, negativity
from .protocols import (
    JointConfig,
    PostSelection,
    ProbabilisticConfig,
    SequentialConfig,
    deterministic_joint_map,
    deterministic_sequential_map,
    joint_chain,
    paper_matrix_residual,
    sequential_chain,
)
from .wigner_calculus import (
    GaussPolyWigner,
    IllConditionedError,
    single_photon_wigner,
    thermal_wigner,
    vacuum_wigner,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
CSV_HEADER = "swept,q,ps,fidelity,negativity"
RESIDUAL_TOL = 1e-12
Q_MAX = 20.0
VA_RANGE = (0.5, 20.0)

DEFAULTS: Dict[str, object] = {
    "kappa1": None,
    "kappa2": None,
    "kappa": 0.5,
    "vm": 0.5,
    "va": 5.0,
    "q": None,
    "ps_target": [1e-2, 1e-3, 1e-4],
    "start": None,
    "stop": None,
    "points": None,
    "log": None,
    "order": 32,
    "jobs": 1,
    "out": None,
    "format": "csv",
    "kappa3_sign": 1,
    "gamma_x": None,
    "gamma_p": None,
    "seed": 0,
    "svg": None,
    "dump_matrix": None,
    "dump_state": None,
}

# per-command sweep defaults: (start, stop, points, log)
SWEEP_DEFAULTS = {
    "sweep-q": (1e-3, 2.0, 40, True),
    "sweep-kappa": (0.1, 1.0, 10, False),
    "sweep-va": (1.0, 10.0, 10, False),
}


class ConfigError(ValueError):
    """Invalid run configuration; reported with exit code 2."""


@dataclass
class SweepResult:
    records: List[dict]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.records:
            cells = [r.get(k) for k in ("swept", "q", "ps", "fidelity", "negativity")]
            buf.write(",".join("" if v is None else repr(float(v)) for v in cells) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"records": self.records, "metadata": self.metadata}, indent=2)


# --------------------------------------------------------------------------
# configuration

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--kappa1", type=float)
    common.add_argument("--kappa2", type=float)
    common.add_argument("--kappa", type=float, help="kappa1 = kappa2 = kappa (joint gain)")
    common.add_argument("--vm", type=float, help="variance of light mode M")
    common.add_argument("--va", type=float, help="variance of matter mode A")
    common.add_argument("--q", type=float, help="post-selection half-width")
    common.add_argument("--ps-target", type=float, nargs="+", dest="ps_target")
    common.add_argument("--start", type=float)
    common.add_argument("--stop", type=float)
    common.add_argument("--points", type=int)
    common.add_argument("--log", action="store_true", default=None, help="log spacing")
    common.add_argument("--linear", action="store_false", dest="log", default=None,
                        help="linear spacing")
    common.add_argument("--order", type=int, help="Gauss-Legendre order per window axis")
    common.add_argument("--jobs", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--svg", help="also write an SVG line plot")
    common.add_argument("--kappa3-sign", type=int, choices=(1, -1), dest="kappa3_sign")
    common.add_argument("--gamma-x", type=float, dest="gamma_x")
    common.add_argument("--gamma-p", type=float, dest="gamma_p")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="qnd-interface",
        description="QND light-matter interface: deterministic checks and post-selection sweeps.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify-deterministic", parents=[common],
                   help="check the deterministic transfer identities")
    sub.add_parser("sweep-q", parents=[common], help="F, N, PS versus window half-width")
    sub.add_parser("sweep-kappa", parents=[common], help="F, N versus coupling at fixed PS")
    sub.add_parser("sweep-va", parents=[common], help="F, N versus matter noise at fixed PS")
    dump = sub.add_parser("dump", parents=[common], help="dump matrices or states as JSON")
    dump.add_argument("--dump-matrix", choices=("sequential", "joint", "published"), dest="dump_matrix")
    dump.add_argument("--dump-state", choices=("single-photon", "vacuum", "thermal"),
                      dest="dump_state")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.command in SWEEP_DEFAULTS:
        cfg.update(zip(("start", "stop", "points", "log"), SWEEP_DEFAULTS[args.command]))
    if args.config:
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(from_file)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if args.command == "sweep-q" and cfg["q"] is not None:
        cfg.update(start=cfg["q"], stop=cfg["q"], points=1)
    if isinstance(cfg["ps_target"], (int, float)):
        cfg["ps_target"] = [cfg["ps_target"]]
    cfg["kappa1"] = cfg["kappa"] if cfg["kappa1"] is None else cfg["kappa1"]
    cfg["kappa2"] = cfg["kappa"] if cfg["kappa2"] is None else cfg["kappa2"]
    validate(args.command, cfg)
    return cfg


def _positive(name: str, value, upper: Optional[float] = None) -> None:
    if value is None or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
    if upper is not None and value > upper:
        raise ConfigError(f"{name} must be <= {upper}, got {value!r}")


def validate(command: str, cfg: dict) -> None:
    for name in ("kappa", "kappa1", "kappa2"):
        _positive(name, cfg[name])
    for name in ("vm", "va"):
        if not isinstance(cfg[name], (int, float)) or not cfg[name] >= 0.5:
            raise ConfigError(f"{name} must be >= 0.5 (vacuum variance), got {cfg[name]!r}")
    if cfg["q"] is not None:
        _positive("q", cfg["q"], Q_MAX)
    if not isinstance(cfg["order"], int) or cfg["order"] < 2:
        raise ConfigError(f"order must be an integer >= 2, got {cfg['order']!r}")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise ConfigError(f"jobs must be a positive integer, got {cfg['jobs']!r}")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    if cfg["kappa3_sign"] not in (1, -1):
        raise ConfigError("kappa3_sign must be 1 or -1")
    for name in ("gamma_x", "gamma_p"):
        if cfg[name] is not None and not math.isfinite(cfg[name]):
            raise ConfigError(f"{name} must be finite")
    if command in SWEEP_DEFAULTS:
        start, stop, points = cfg["start"], cfg["stop"], cfg["points"]
        if not isinstance(points, int) or points < 1:
            raise ConfigError(f"points must be a positive integer, got {points!r}")
        _positive("start", start)
        _positive("stop", stop)
        if stop < start:
            raise ConfigError("sweep range is empty (stop < start)")
        if command == "sweep-q":
            _positive("stop", stop, Q_MAX)
        elif command == "sweep-kappa":
            _positive("stop", stop, 1.0)
        else:
            if start < VA_RANGE[0] or stop > VA_RANGE[1]:
                raise ConfigError(f"V_A range must lie in [{VA_RANGE[0]}, {VA_RANGE[1]}]")
        if command != "sweep-q":
            if not cfg["ps_target"]:
                raise ConfigError("at least one PS target is required")
            for t in cfg["ps_target"]:
                if not isinstance(t, (int, float)) or not 0 < t < 1:
                    raise ConfigError(f"PS targets must lie in (0, 1), got {t!r}")
    if command == "dump" and not (cfg["dump_matrix"] or cfg["dump_state"]):
        raise ConfigError("dump needs --dump-matrix and/or --dump-state")


def sweep_values(cfg: dict) -> np.ndarray:
    start, stop, n = cfg["start"], cfg["stop"], cfg["points"]
    if n == 1:
        return np.array([start])
    if cfg["log"]:
        return np.geomspace(start, stop, n)
    return np.linspace(start, stop, n)


def _sequential(cfg: dict, kappa1=None, kappa2=None) -> SequentialConfig:
    return SequentialConfig(
        cfg["kappa1"] if kappa1 is None else kappa1,
        cfg["kappa2"] if kappa2 is None else kappa2,
        gamma_x=cfg["gamma_x"],
        gamma_p=cfg["gamma_p"],
        kappa3_sign=cfg["kappa3_sign"],
    )


# --------------------------------------------------------------------------
# verify-deterministic

def cmd_verify_deterministic(cfg: dict, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    seq_cfg = _sequential(cfg)
    joint_cfg = JointConfig(cfg["kappa"])
    if not seq_cfg.is_ideal:
        print("warning: non-ideal gains; perfect transfer is not expected", file=sys.stderr)

    seq = deterministic_sequential_map(seq_cfg)
    joint = deterministic_joint_map(joint_cfg)
    a_cols = [ps_.QuadratureIndex("A", "x").index, ps_.QuadratureIndex("A", "p").index]

    rng = np.random.default_rng(cfg["seed"])
    gains = rng.uniform(-2, 2, size=(100, 3))
    gains[np.abs(gains) < 1e-3] = 0.5
    gate_residual = max(
        max(
            ps_.symplectic_residual(ps_.qnd_gate(c, t, k))
            for c, t in (("A", "L"), ("A", "M"), ("L", "A"), ("M", "L"))
        )
        for k in gains[:, 0]
    )
    gate_residual = max(
        gate_residual,
        max(ps_.symplectic_residual(ps_.joint_qnd_gate(k)) for k in gains[:, 1]),
        max(ps_.symplectic_residual(ps_.squeeze_gate("L", g)) for g in gains[:, 2]),
        ps_.symplectic_residual(ps_.balanced_bs_gate("M", "L")),
    )
    chain_residual = max(
        ps_.symplectic_residual(sequential_chain(seq_cfg)),
        ps_.symplectic_residual(joint_chain(joint_cfg)),
    )

    checks = [
        ("sequential identity transfer", seq.transfer_residual()),
        ("sequential matter-mode coefficients vanish", float(np.max(np.abs(seq.matrix[:, a_cols])))),
        ("sequential output commutator", seq.commutator_residual()),
        ("joint identity transfer", joint.transfer_residual()),
        ("joint output commutator", joint.commutator_residual()),
        ("gate symplectic form (random gains)", gate_residual),
        ("chain symplectic form", chain_residual),
    ]
    if seq_cfg.is_ideal:
        checks.append(("published matrix cross-check", paper_matrix_residual(seq_cfg)))

    ok = True
    for name, resid in checks:
        passed = resid < RESIDUAL_TOL
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:45s} max residual {resid:.3e}", file=stream)
    return EXIT_OK if ok else EXIT_CHECK


# --------------------------------------------------------------------------
# sweeps

def _point(task: dict) -> dict:
    """Evaluate one sweep point; numeric failures become null fields."""
    record = {"swept": task["swept"], "q": None, "ps": None, "fidelity": None, "negativity": None}
    try:
        cfg = ProbabilisticConfig(
            SequentialConfig(task["kappa1"], task["kappa2"], gamma_x=task["gamma_x"],
                             gamma_p=task["gamma_p"], kappa3_sign=task["kappa3_sign"]),
            v_m=task["vm"], v_a=task["va"], quad_order=task["order"],
        )
        engine = PostSelection(single_photon_wigner(), cfg)
        q = task.get("q")
        if q is None:
            q = invert_ps(task["ps_target"], cfg, engine=engine)
        record["q"] = q
        result = engine.run(q)
        record["ps"] = result.ps
        record["fidelity"] = fidelity(result, engine.input_L)
        record["negativity"] = negativity(result)
    except (UnreachableTargetError, IllConditionedError, ArithmeticError, np.linalg.LinAlgError) as exc:
        record["error"] = str(exc)
    return record


def _run_tasks(tasks: List[dict], jobs: int) -> List[dict]:
    if jobs == 1 or len(tasks) == 1:
        return [_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_point, tasks))


def _base_task(cfg: dict) -> dict:
    keys = ("kappa1", "kappa2", "vm", "va", "order", "gamma_x", "gamma_p", "kappa3_sign")
    return {k: cfg[k] for k in keys}


def _finish(records: List[dict], cfg: dict, command: str, extra: dict, t0: float) -> SweepResult:
    for r in records:
        if "error" in r:
            print(f"warning: {command} point {r['swept']:g} failed: {r['error']}", file=sys.stderr)
    records = sorted(records, key=lambda r: r["swept"])
    meta = {
        "command": command,
        "engine_version": __version__,
        "quadrature_order": cfg["order"],
        "config": {k: cfg[k] for k in sorted(cfg) if k not in ("out", "svg", "config")},
        "wall_time_s": round(time.perf_counter() - t0, 3),
        **extra,
    }
    return SweepResult(records, meta)


def cmd_sweep_q(cfg: dict) -> List[SweepResult]:
    t0 = time.perf_counter()
    tasks = [dict(_base_task(cfg), swept=float(q), q=float(q)) for q in sweep_values(cfg)]
    return [_finish(_run_tasks(tasks, cfg["jobs"]), cfg, "sweep-q", {"swept": "q"}, t0)]


def _fixed_ps_sweep(cfg: dict, command: str, key: str) -> List[SweepResult]:
    out = []
    for target in cfg["ps_target"]:
        t0 = time.perf_counter()
        tasks = []
        for v in sweep_values(cfg):
            task = dict(_base_task(cfg), swept=float(v), ps_target=float(target))
            if key == "kappa":
                task["kappa1"] = task["kappa2"] = float(v)
            else:
                task["va"] = float(v)
            tasks.append(task)
        records = _run_tasks(tasks, cfg["jobs"])
        out.append(_finish(records, cfg, command, {"swept": key, "ps_target": target}, t0))
    return out


def cmd_sweep_kappa(cfg: dict) -> List[SweepResult]:
    return _fixed_ps_sweep(cfg, "sweep-kappa", "kappa")


def cmd_sweep_va(cfg: dict) -> List[SweepResult]:
    return _fixed_ps_sweep(cfg, "sweep-va", "va")


# --------------------------------------------------------------------------
# dump

def cmd_dump(cfg: dict) -> str:
    payload = {}
    if cfg["dump_matrix"]:
        kind = cfg["dump_matrix"]
        if kind == "sequential":
            S = sequential_chain(_sequential(cfg))
        elif kind == "joint":
            S = joint_chain(JointConfig(cfg["kappa"]))
        else:
            S = ps_.paper_matrix_u(cfg["kappa1"], cfg["kappa2"])
        payload["matrix"] = json.loads(ps_.matrix_to_json(S))
        payload["matrix"]["name"] = kind
    if cfg["dump_state"]:
        kind = cfg["dump_state"]
        state: GaussPolyWigner = {
            "single-photon": single_photon_wigner,
            "vacuum": vacuum_wigner,
            "thermal": lambda: thermal_wigner(cfg["va"]),
        }[kind]()
        payload["state"] = dict(state.to_dict(), name=kind)
    return json.dumps(payload, indent=2)


# --------------------------------------------------------------------------
# output

def svg_plot(result: SweepResult, width: int = 640, height: int = 400) -> str:
    """Minimal line plot of fidelity, negativity and PS against the swept value."""
    series = {"fidelity": "#1f77b4", "negativity": "#d62728", "ps": "#2ca02c"}
    pts = [r for r in result.records if r.get("fidelity") is not None]
    log_x = result.metadata.get("config", {}).get("log", False)
    pad = 50
    xs = [r["swept"] for r in pts]
    if not xs:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>'
    fx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    x0, x1 = min(map(fx, xs)), max(map(fx, xs))
    x1 = x1 if x1 > x0 else x0 + 1
    y0, y1 = -0.4, 1.05

    def sx(v):
        return pad + (fx(v) - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<line x1="{pad}" y1="{sy(0):.1f}" x2="{width - pad}" y2="{sy(0):.1f}" '
        'stroke="#999" stroke-dasharray="4"/>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">'
        f'{result.metadata.get("swept", "")}{" (log)" if log_x else ""}</text>',
    ]
    for i, (name, color) in enumerate(series.items()):
        coords = " ".join(f"{sx(r['swept']):.1f},{sy(r[name]):.1f}" for r in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" points="{coords}"/>')
        parts.append(f'<text x="{pad + 10}" y="{pad + 18 * (i + 1)}" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _suffix_path(path: str, result: SweepResult, many: bool) -> Path:
    p = Path(path)
    if not many:
        return p
    return p.with_name(f"{p.stem}_ps{result.metadata['ps_target']:g}{p.suffix}")


def write_results(results: List[SweepResult], cfg: dict) -> None:
    many = len(results) > 1
    for res in results:
        text = res.to_csv() if cfg["format"] == "csv" else res.to_json()
        if cfg["out"]:
            _suffix_path(cfg["out"], res, many).write_text(text)
        else:
            if many:
                sys.stdout.write(f"# ps_target={res.metadata['ps_target']:g}\n")
            sys.stdout.write(text)
        if cfg["svg"]:
            _suffix_path(cfg["svg"], res, many).write_text(svg_plot(res))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "verify-deterministic":
            return cmd_verify_deterministic(cfg)
        if args.command == "dump":
            text = cmd_dump(cfg)
            if cfg["out"]:
                Path(cfg["out"]).write_text(text + "\n")
            else:
                print(text)
            return EXIT_OK
        runner = {"sweep-q": cmd_sweep_q, "sweep-kappa": cmd_sweep_kappa, "sweep-va": cmd_sweep_va}
        results = runner[args.command](cfg)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        write_results(results, cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if all(r["fidelity"] is None for res in results for r in res.records):
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
