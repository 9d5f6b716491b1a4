"""Command-line interface: protocol inspection, geometry checks, and curve emission.

Exit codes are a stable contract: 0 success, 1 geometry-suite failure, 2 usage or
argument error, 3 I/O error.  CSV output is RFC-4180-style with LF line endings,
'.' decimals, and 12 significant digits; JSON is used for reports and config
files.  Set QKDLAB_THREADS to parallelize sweep evaluation (results are identical
to the serial run; ordering follows the input grid).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .geometry import BiphotonState, Direction, classify_state, dome_state, overlap, sphere_state
from .intercept_resend import ir_crossing, ir_full_joint, ir_point, ir_sweep
from .keyrate import (
    KEYRATE_PROTOCOL_NAMES,
    InfeasibleErrorRate,
    critical_error_rate,
    max_feasible_error,
    min_rate,
    optimal_rate,
    rate_curve,
)
from .protocols import PROTOCOL_NAMES, dome_mub_pair_infeasibility, get_protocol, unbiasedness_matrix
from .session import ChannelModel, SessionConfig, run_session

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _worker_count() -> int:
    raw = os.environ.get("QKDLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_points(fn, items):
    workers = _worker_count()
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_text(path: str | None, text: str):
    try:
        if path is None:
            sys.stdout.write(text)
        else:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
    except OSError as exc:
        raise IOError(str(exc)) from exc


def _csv(rows: list[list], header: list[str]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else _fmt(cell) for cell in row))
    return "\n".join(lines) + "\n"


def _load_config_overrides(args: argparse.Namespace, allowed: dict[str, object]) -> dict:
    """Merge defaults, config-file values, and explicit flags (flags win)."""
    merged = dict(allowed)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IOError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(allowed)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(data)
    for key in allowed:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _resolve_protocol(name: str):
    try:
        return get_protocol(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _vector_payload(state: BiphotonState) -> list[list[float]]:
    return [[float(a.real), float(a.imag)] for a in state.amplitudes]


def cmd_protocols(args) -> int:
    if args.action == "list":
        if args.format == "json":
            _write_text(args.out, json.dumps({"protocols": list(PROTOCOL_NAMES)}, indent=2) + "\n")
        else:
            _write_text(args.out, "\n".join(PROTOCOL_NAMES) + "\n")
        return EXIT_OK
    proto = _resolve_protocol(args.name)
    payload = {
        "name": proto.name,
        "dimension": proto.dimension,
        "bases": [],
        "unbiasedness": {},
    }
    for basis in proto.bases:
        entry = {"name": basis.name, "vectors": [], "classification": []}
        for v in basis.vectors:
            entry["vectors"].append(_vector_payload(v))
            if proto.dimension == 3:
                c = classify_state(v)
                entry["classification"].append(
                    {
                        "region": c.region.value,
                        "theta": None if c.direction is None else c.direction.theta,
                        "phi": None if c.direction is None else c.direction.phi,
                    }
                )
            else:
                entry["classification"].append({"region": "n/a", "theta": None, "phi": None})
        payload["bases"].append(entry)
    for i, a in enumerate(proto.bases):
        for j, b in enumerate(proto.bases):
            if i < j:
                g = unbiasedness_matrix(a, b)
                payload["unbiasedness"][f"{a.name}|{b.name}"] = [[round(float(x), 12) for x in row] for row in g]
    if args.format == "json":
        _write_text(args.out, json.dumps(payload, indent=2) + "\n")
    else:
        lines = [f"protocol {proto.name} (dimension {proto.dimension}, {proto.n_bases} bases)"]
        for entry in payload["bases"]:
            lines.append(f"  basis {entry['name']}:")
            for vec, cls in zip(entry["vectors"], entry["classification"]):
                comps = ", ".join(f"({re:+.6f},{im:+.6f})" for re, im in vec)
                where = cls["region"]
                if cls["theta"] is not None:
                    where += f" theta={cls['theta']:.6f} phi={cls['phi']:.6f}"
                lines.append(f"    [{comps}]  {where}")
        for pair, g in payload["unbiasedness"].items():
            lines.append(f"  overlaps^2 {pair}:")
            for row in g:
                lines.append("    " + "  ".join(f"{x:.6f}" for x in row))
        _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _geometry_checks(n_pairs: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    checks = []

    def record(name: str, residual: float, tol: float, detail: str = ""):
        checks.append(
            {
                "name": name,
                "max_residual": float(residual),
                "tolerance": tol,
                "pass": bool(residual < tol),
                **({"detail": detail} if detail else {}),
            }
        )

    vecs = rng.normal(size=(2, n_pairs, 3))
    vecs /= np.linalg.norm(vecs, axis=2, keepdims=True)
    worst = np.zeros(4)
    for v1, v2 in zip(vecs[0], vecs[1]):
        n1, n2 = Direction(*v1), Direction(*v2)
        ang = n1.angle_to(n2)
        s1, s2 = sphere_state(n1), sphere_state(n2)
        d1, d2 = dome_state(n1), dome_state(n2)
        worst[0] = max(worst[0], abs(abs(overlap(s1, s2)) - math.cos(ang / 2) ** 2))
        worst[1] = max(worst[1], abs(abs(overlap(d1, d2)) - abs(math.cos(ang))))
        worst[2] = max(worst[2], abs(abs(overlap(s1, d2)) - math.sin(ang) / math.sqrt(2)))
        worst[3] = max(worst[3], abs(overlap(s1, sphere_state(n1.antipode()))))
    record("sphere-law-cos2-half-angle", worst[0], 1e-10)
    record("dome-law-abs-cos", worst[1], 1e-10)
    record("cross-law-sin-over-sqrt2", worst[2], 1e-10)
    record("sphere-pi-rotation-orthogonality", worst[3], 1e-10)

    tetra = dome_state(Direction.from_xyz(1, 1, 1))
    axis = dome_state(Direction(0, 0, 1))
    record(
        "tetrahedral-unbiasedness",
        abs(abs(overlap(tetra, axis)) ** 2 - 1.0 / 3.0),
        1e-12,
        detail=f"overlap^2 = {abs(overlap(tetra, axis)) ** 2:.6f}",
    )

    cert = dome_mub_pair_infeasibility()
    checks.append(
        {
            "name": "dome-mub-pair-packing",
            "patterns_checked": cert.patterns_checked,
            "feasible_count": cert.feasible_count,
            "min_abs_row_dot": cert.min_abs_row_dot,
            "pass": cert.infeasible and cert.patterns_checked == 512,
            "detail": f"{cert.feasible_count}/{cert.patterns_checked} sign patterns feasible",
        }
    )

    # Printed-vector anchors: umbrella basis and the two equatorial ray bases.
    t = np.exp(2j * np.pi / 3)
    printed = {
        "umbrella": np.array([[1, 1, -1], [1, t, -t * t], [1, t * t, -t]]) / math.sqrt(3),
        "ray-x": np.array(
            [[1, math.sqrt(2), 1], [1, -math.sqrt(2), 1], [math.sqrt(2), 0, -math.sqrt(2)]]
        )
        / 2.0,
        "ray-y": np.array(
            [[1, math.sqrt(2) * 1j, -1], [-1, math.sqrt(2) * 1j, 1], [math.sqrt(2), 0, math.sqrt(2)]]
        )
        / 2.0,
    }
    built = {
        "umbrella": get_protocol("umbrella").bases[1].matrix(),
        "ray-x": get_protocol("three-rays").bases[1].matrix(),
        "ray-y": get_protocol("three-rays").bases[2].matrix(),
    }
    for name, want in printed.items():
        got = built[name]
        g = np.abs(want.conj() @ got.T)
        residual = max(
            float(np.max(np.abs(np.sort(g, axis=1)[:, :-1]))),
            float(np.max(np.abs(g.max(axis=1) - 1.0))),
        )
        record(f"printed-vectors-{name}", residual, 1e-12)

    return {
        "n_pairs": n_pairs,
        "seed": seed,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }


def cmd_geometry_check(args) -> int:
    report = _geometry_checks(args.pairs, args.seed)
    _write_text(args.out, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if report["pass"] else EXIT_CHECK_FAILED


def cmd_ir_sweep(args) -> int:
    proto = _resolve_protocol(args.protocol)
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    if _worker_count() == 1:
        points = ir_sweep(proto, args.points)
    else:
        ps = np.linspace(0.0, 1.0, args.points)
        points = _map_points(lambda p: ir_point(proto, float(p)), ps)
    rows = [
        [proto.name, pt.p, pt.error_rate, pt.i_ab_bits, pt.i_ae_bits, pt.delta_bits]
        for pt in points
    ]
    header = ["protocol", "p", "Q", "I_AB_bits", "I_AE_bits", "delta_bits"]
    if args.format == "json":
        payload = [dict(zip(header, row)) for row in rows]
        _write_text(args.out, json.dumps(payload, indent=2) + "\n")
    else:
        _write_text(args.out, _csv(rows, header))
    return EXIT_OK


def cmd_keyrate(args) -> int:
    proto = _resolve_protocol(args.protocol)
    if proto.name not in KEYRATE_PROTOCOL_NAMES:
        raise UsageError(
            f"protocol {proto.name!r} has no proven coherent-attack rate "
            f"(supported: {', '.join(KEYRATE_PROTOCOL_NAMES)})"
        )
    if args.points < 2 or args.qmin < 0 or args.qmax <= args.qmin:
        raise UsageError("need --points >= 2 and 0 <= qmin < qmax")
    if args.qmax > max_feasible_error(proto):
        raise UsageError(f"qmax {args.qmax} exceeds the feasible error range of {proto.name}")
    grid = np.linspace(args.qmin, args.qmax, args.points)
    points = rate_curve(proto, grid, preprocessing=args.preprocessing)
    rows = [
        [proto.name, pt.error_rate, str(args.preprocessing).lower(), pt.preprocessing, pt.rate_bits, pt.rate_normalized]
        for pt in points
    ]
    header = ["protocol", "Q", "preprocessing_enabled", "q_star", "rate_bits", "rate_normalized"]
    _write_text(args.out, _csv(rows, header))
    return EXIT_OK


def cmd_critical(args) -> int:
    proto = _resolve_protocol(args.protocol)
    if proto.name not in KEYRATE_PROTOCOL_NAMES:
        raise UsageError(
            f"protocol {proto.name!r} has no proven coherent-attack rate "
            f"(supported: {', '.join(KEYRATE_PROTOCOL_NAMES)})"
        )
    q_star = critical_error_rate(proto, preprocessing=args.preprocessing)
    _write_text(args.out, f"{100.0 * q_star:.2f}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    merged = _load_config_overrides(
        args,
        {
            "protocol": "bb84",
            "n": 10000,
            "channel": "ideal",
            "seed": 0,
            "reveal": 0.2,
            "preprocessing": False,
        },
    )
    try:
        channel = ChannelModel.parse(str(merged["channel"]))
        config = SessionConfig(
            protocol=str(merged["protocol"]),
            n_symbols=int(merged["n"]),
            channel=channel,
            reveal_fraction=float(merged["reveal"]),
            seed=int(merged["seed"]),
            preprocessing=bool(merged["preprocessing"]),
        )
        _resolve_protocol(config.protocol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = run_session(config)
    _write_text(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdlab",
        description="Biphoton-qutrit QKD analysis: protocols, eavesdropping, key rates.",
    )
    parser.add_argument("--version", action="version", version=f"qkdlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protocols", help="list registry protocols or show one")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?", help="protocol name (for show)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_protocols)

    p = sub.add_parser("geometry-check", help="run the sphere/dome invariant suite")
    p.add_argument("--pairs", type=int, default=10000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_geometry_check)

    p = sub.add_parser("ir-sweep", help="intercept-resend information curves")
    p.add_argument("--protocol", required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_ir_sweep)

    p = sub.add_parser("keyrate", help="coherent-attack rate curve")
    p.add_argument("--protocol", required=True)
    p.add_argument("--qmin", type=float, default=0.0)
    p.add_argument("--qmax", type=float, default=0.25)
    p.add_argument("--points", type=int, default=26)
    p.add_argument("--preprocessing", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("critical", help="critical error rate (percent)")
    p.add_argument("--protocol", required=True)
    p.add_argument("--preprocessing", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("simulate", help="seeded Monte-Carlo session")
    p.add_argument("--protocol", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--channel", default=None, help="ideal | depolarizing:<f> | intercept:<p>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reveal", type=float, default=None)
    p.add_argument("--preprocessing", action="store_const", const=True, default=None)
    p.add_argument("--config", default=None, help="JSON file with defaults (flags override)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "protocols" and args.action == "show" and not args.name:
        parser.error("protocols show requires a protocol name")
    if not hasattr(args, "config"):
        args.config = None
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleErrorRate as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
