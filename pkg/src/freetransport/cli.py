"""Command-line front end.

Subcommands read a JSON or TOML config, run one computation and write a
canonical JSON report (sorted keys, ``schema: 1``).  Exit codes: 0 when the
verdict passes, 1 when it fails, 2 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import fock, mixedq, transport
from .errors import ConfigError, FreeTransportError
from .freecalc import diff
from .ncpoly import Series, format_scalar, from_json, from_text, seq_to_json, to_json
from .semitrace import tau_sc, tau_tensor_sc

SCHEMA = 1
EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

# polynomials checked by `verify` when the config names none
DEFAULT_IDENTITY_POLYS = (
    "1 * x1.x1.x1",
    "1 * x2 + 1 * x1.x2.x1",
    "1 * x1.x1 + 1/2 * x1.x2.x1.x2 + 1/2 * x2.x1.x2.x1",
    "1/3 * x1.x2.x3 + 1/3 * x2.x3.x1 + 1/3 * x3.x1.x2 - 1 * x3.x3",
)


def load_config(path) -> dict:
    """Read a JSON or TOML config (by extension; ``.toml`` is TOML)."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if p.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a table / object")
    return data


def _jsonable(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return format_scalar(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return str(x)


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _number(cfg, key, default=None, kind=float):
    v = cfg.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return kind(v)


def _structure(cfg) -> fock.StructureArray:
    structure_cfg = cfg.get("structure", cfg)
    if not isinstance(structure_cfg, dict) or "kind" not in structure_cfg:
        raise ConfigError("config needs a structure array: {kind, q | matrix, n_vars}")
    for key in ("q", "n_vars"):
        value = structure_cfg.get(key)
        if value is not None and not isinstance(value, (int, float)):
            raise ConfigError(f"structure.{key} must be a number")
    if "matrix" in structure_cfg and not isinstance(structure_cfg["matrix"], list):
        raise ConfigError("structure.matrix must be a list of rows")
    try:
        return fock.StructureArray.from_config(structure_cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad structure array: {exc}") from exc


def _series(value, mode) -> Series:
    if isinstance(value, str):
        return from_text(value, mode)
    if isinstance(value, list):
        try:
            return from_json(value, mode)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad series JSON: {exc}") from exc
    raise ConfigError("a series is given as text or as a list of {word, coeff}")


# subcommands

def cmd_check_q(cfg, args):
    Q = _structure(cfg)
    R = args.r if args.r is not None else _number(cfg, "R", 6.7)
    report = mixedq.check_iso(Q, R).to_dict()
    print(f"check-q: verdict {report['verdict']}  sum {report['sum']:.6g} + tail "
          f"{report['tail']:.3g}  threshold {report['threshold']:.6g}  "
          f"margin {report['margin']:.6g}")
    return report, EXIT_PASS if report["verdict"] == "pass" else EXIT_FAIL


def cmd_transport(cfg, args):
    mode = args.mode
    W = _series(cfg.get("W", "0"), mode)
    problem = transport.TransportProblem(
        W,
        R=args.r if args.r is not None else _number(cfg, "R", 6.0),
        S=args.s if args.s is not None else _number(cfg, "S", 5.0),
        degree_cap=args.degree_cap or _number(cfg, "degree_cap", 8, int),
        m_max=_number(cfg, "m_max", None, int),
        tol=_number(cfg, "tol", 1e-12),
        max_iter=_number(cfg, "max_iter", 200, int),
        tensor_cap=_number(cfg, "tensor_cap", None, int),
        mode=mode,
        variables=tuple(range(1, _number(cfg, "n_vars", max(W.variables(), default=1), int) + 1)),
    )
    check_degree = _number(cfg, "check_degree", 3, int)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = transport.solve(problem)
        sd, sd_tail = transport.sd_residual(sol, check_degree, strict=False)
        inv_degree = min(problem.degree_cap, _number(cfg, "invert_degree", 6, int))
        H = transport.invert(sol.f, problem.R, problem.S, inv_degree, strict=False)
        comp = transport.composition_residual(H, sol.Y, inv_degree)
        mono = transport.monotonicity_certificate(sol)
    d = dict(sol.diagnostics)
    bound_ok = d["g_hat_norm_S"] <= 2 * d["W_norm_S"] + 1e-12
    ok = (d["contraction_ratio"] <= 0.5 and bound_ok and mono["passed"]
          and all(d["hypotheses"][k] for k in ("radii_ok", "self_adjoint", "no_constant")))
    report = {
        "problem": {"W": to_json(problem.W), "R": problem.R, "S": problem.S,
                    "degree_cap": problem.degree_cap, "m_max": problem.m_max, "tol": problem.tol},
        "g_hat": to_json(sol.g_hat),
        "g": to_json(sol.g),
        "Y": seq_to_json(sol.Y),
        "inverse": seq_to_json(H),
        "diagnostics": {
            "iters": d["iterations"],
            "ratio": d["contraction_ratio"],
            "ratios": d["ratios"],
            "fixed_point_residual": d["fixed_point_residual"],
            "g_hat_norm_S": d["g_hat_norm_S"],
            "W_norm_S": d["W_norm_S"],
            "g_hat_bound_ok": bound_ok,
            "Y_minus_X_norm_S_inf": d["Y_minus_X_norm_S_inf"],
            "sd_residual": sd,
            "sd_check_degree": check_degree,
            "composition_residual": comp,
            "monotonicity": mono,
            "hypotheses": d["hypotheses"],
            "tails": {"L": d["L_tail_bound"], "sd_neumann": sd_tail},
            "warnings": sorted({str(w.message) for w in caught}),
        },
        "verdict": "pass" if ok else "fail",
    }
    print(f"transport: {d['iterations']} iterations, ratio {d['contraction_ratio']:.4g}, "
          f"sd residual {sd:.3g}, inverse residual {comp:.3g}, "
          f"monotone certificate {'passed' if mono['passed'] else 'failed'}")
    return report, EXIT_PASS if ok else EXIT_FAIL


def _sd_characterization(max_degree, n_vars):
    worst = 0
    for d in range(max_degree + 1):
        for w in itertools.product(range(1, n_vars + 1), repeat=d):
            P = Series.word(w)
            for n in range(1, n_vars + 1):
                lhs = tau_sc((n,) + w)
                rhs = tau_tensor_sc(diff(P, n))
                worst = max(worst, abs(lhs - rhs))
    return worst


def _fock_vs_semicircular(max_degree, n_vars):
    rep = fock.build_rep(fock.StructureArray.zero(n_vars), n_vars, (max_degree + 1) // 2)
    worst = 0.0
    for d in range(max_degree + 1):
        for w in itertools.product(range(1, n_vars + 1), repeat=d):
            worst = max(worst, abs(fock.trace_Q(rep, w) - tau_sc(w)))
    return worst


def cmd_verify(cfg, args):
    mode = "exact" if args.mode is None else args.mode
    polys = cfg.get("polynomials", list(DEFAULT_IDENTITY_POLYS))
    if not isinstance(polys, list):
        raise ConfigError("polynomials must be a list")
    tol = 0 if mode == "exact" else _number(cfg, "tol", 1e-10)
    identities = {}
    for text in polys:
        g = _series(text, mode)
        identities[str(text)] = transport.identity_suite(g)
    per_identity = {}
    for res in identities.values():
        for name, dev in res.items():
            per_identity[name] = max(per_identity.get(name, 0), dev)
    max_degree = args.degree_cap or _number(cfg, "max_degree", 6, int)
    n_vars = _number(cfg, "n_vars", 2, int)
    oracles = {
        "sd_characterization": _sd_characterization(max_degree, n_vars),
        "fock_q0_vs_semicircular": _fock_vs_semicircular(max_degree, n_vars),
    }
    results = {name: {"max_deviation": dev, "passed": dev <= tol}
               for name, dev in per_identity.items()}
    results.update({name: {"max_deviation": dev, "passed": dev <= max(tol, 1e-9 if "fock" in name
                                                                     else 0)}
                    for name, dev in oracles.items()})
    ok = all(r["passed"] for r in results.values())
    for name, r in sorted(results.items()):
        print(f"verify: {name:28s} {'PASS' if r['passed'] else 'FAIL'}  "
              f"(max deviation {format_scalar(r['max_deviation'])})")
    report = {"mode": mode, "polynomials": polys, "results": results,
              "per_polynomial": identities, "verdict": "pass" if ok else "fail"}
    return report, EXIT_PASS if ok else EXIT_FAIL


def cmd_oracle(cfg, args):
    Q = _structure(cfg)
    structure_cfg = cfg.get("structure", cfg)
    depth = args.depth or _number(cfg, "depth", None, int) or structure_cfg.get("depth") or 6
    n_vars = _number(cfg, "n_vars", None, int) or Q.n_vars or (
        len(Q.matrix) if Q.matrix is not None else 1)
    rep = fock.build_rep(Q, n_vars, depth)
    max_degree = _number(cfg, "max_degree", depth, int)
    if max_degree > rep.max_trace_degree:
        raise ConfigError(f"max_degree {max_degree} exceeds the exact range "
                          f"{rep.max_trace_degree} of depth {depth}")
    moments = []
    for d in range(max_degree + 1):
        for w in itertools.product(range(1, n_vars + 1), repeat=d):
            moments.append({"word": list(w), "value": fock.trace_Q(rep, w)})
    residual = fock.commutation_residual(rep)
    for m in moments:
        if len(set(m["word"])) == 1 and len(m["word"]) % 2 == 0 and m["word"][0] == 1:
            print(f"oracle: tau(X1^{len(m['word'])}) = {m['value']:.12g}")
    report = {"structure": Q.to_config(), "n_vars": n_vars, "depth": depth,
              "max_trace_degree": rep.max_trace_degree, "basis_size": rep.size,
              "commutation_residual": residual, "x_norm_bound": Q.sup_x_norm_bound(),
              "moments": moments, "verdict": "pass" if residual <= 1e-12 else "fail"}
    return report, EXIT_PASS if residual <= 1e-12 else EXIT_FAIL


COMMANDS = {
    "check-q": cmd_check_q,
    "transport": cmd_transport,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="freetransport",
                                     description="Free monotone transport and mixed q-Gaussian checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check-q": "evaluate the isomorphism criterion for a structure array",
        "transport": "solve for the transport map of a potential W",
        "verify": "run the polynomial identity and trace oracle suite",
        "oracle": "moment table of a truncated mixed q-Gaussian family",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON or TOML config file")
        p.add_argument("--out", help="where to write the JSON report")
        p.add_argument("--mode", choices=("exact", "float"), default=None)
        p.add_argument("--degree-cap", type=int, dest="degree_cap")
        p.add_argument("--depth", type=int)
        p.add_argument("--r", type=float)
        p.add_argument("--s", type=float)
    return parser


def _write(path, report):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(dumps(report))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = {"schema": SCHEMA, "command": args.command}
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.command == "transport" and args.mode is None:
            args.mode = cfg.get("mode", "float")
        body, code = COMMANDS[args.command](cfg, args)
        report.update(body)
    except (FreeTransportError, ValueError, KeyError, TypeError) as exc:
        report.update({"error": f"{type(exc).__name__}: {exc}", "verdict": "error"})
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        code = EXIT_ERROR
    _write(args.out, report)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
