"""Command-line front end.

Every command writes its data to files under ``--out`` and prints a one-line
summary. Errors raised by the numerical modules exit with status 1 and an
``error.json``; malformed configs exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from jsonschema import Draft7Validator

from . import numkernel as nk
from .errors import ConfigError, StructFBError
from .multiagent import (
    FullWeights,
    HomogeneousWeights,
    LinearSystem,
    MultiAgentProblem,
    centroid_output_map,
    centroid_weights,
    solve_centroid,
    solve_sync,
    solve_sync_homogeneous,
    sync_output_map,
    sync_weights,
)
from .reduction import GainResult, OutputMap
from .reference import run_reference_example
from .riccati import CareProblem, gap_analysis, solve_care_stabilizing
from .simulate import (
    DEFAULT_EXTENT,
    DEFAULT_RESOLUTION,
    effective_field_grid,
    evaluate_cost,
    reduced_closed_loop_cost,
    simulate_closed_loop,
    surface_grid,
    value_matrix,
)

COMMANDS = ("sync", "centroid", "gap", "simulate", "surface", "field", "paper-example")

_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["kind", "N", "A", "B", "weights"],
    "properties": {
        "kind": {"enum": ["sync", "centroid"]},
        "N": {"type": "integer", "minimum": 1},
        "A": _MATRIX,
        "B": _MATRIX,
        "x0": {"type": "array", "items": {"type": "number"}},
        "weights": {
            "type": "object",
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["homogeneous", "full"]},
                "V": _MATRIX,
                "W": _MATRIX,
                "Q": _MATRIX,
                "R": _MATRIX,
            },
            "allOf": [
                {"if": {"properties": {"mode": {"const": "homogeneous"}}},
                 "then": {"required": ["V", "W"]}},
                {"if": {"properties": {"mode": {"const": "full"}}},
                 "then": {"required": ["Q", "R"]}},
            ],
        },
    },
}

FIELD_SCHEMA = {
    "type": "object",
    "required": ["A", "C"],
    "properties": {"A": _MATRIX, "C": _MATRIX},
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def _schema_errors(doc: Any, schema: dict) -> list[tuple[str, str]]:
    errors = []
    for err in sorted(Draft7Validator(schema).iter_errors(doc), key=lambda e: list(e.absolute_path)):
        ptr = _pointer(err.absolute_path)
        if err.validator == "required":
            missing = err.message.split("'")[1]
            errors.append((f"{ptr}/{missing}", "required property is missing"))
        else:
            errors.append((ptr, err.message))
    return errors


def _matrix_at(doc: dict, path: list[str], errors: list) -> np.ndarray | None:
    node: Any = doc
    for key in path:
        node = node[key]
    ptr = _pointer(path)
    if len({len(row) for row in node}) != 1:
        errors.append((ptr, "rows have unequal lengths"))
        return None
    return np.array(node, dtype=float)


def _check_weight(m: np.ndarray | None, ptr: str, shape: tuple | set, errors: list, strict: bool) -> None:
    """Shape, symmetry and definiteness of a weight matrix."""
    if m is None:
        return
    shapes = shape if isinstance(shape, set) else {shape}
    if m.shape not in shapes:
        errors.append((ptr, f"shape {m.shape} not in {sorted(shapes)}"))
        return
    viol = float(np.linalg.norm(m - m.T))
    if viol > 1e-12 * max(1.0, float(np.linalg.norm(m))):
        errors.append((ptr, f"matrix is not symmetric (||M - M^T|| = {viol:.3e})"))
        return
    lmin = float(np.linalg.eigvalsh(m).min())
    if strict and lmin <= 1e-10 * max(1.0, float(np.linalg.norm(m))):
        errors.append((ptr, f"matrix is not positive definite (min eigenvalue {lmin:.3e})"))


def parse_problem(doc: Any) -> MultiAgentProblem:
    """Validate a problem document and build the problem. Raises :class:`ConfigError`."""
    errors = _schema_errors(doc, PROBLEM_SCHEMA)
    if errors:
        raise ConfigError(errors)
    A = _matrix_at(doc, ["A"], errors)
    B = _matrix_at(doc, ["B"], errors)
    N = doc["N"]
    if A is not None and A.shape[0] != A.shape[1]:
        errors.append(("/A", f"A must be square, got {A.shape}"))
        A = None
    if A is not None and B is not None and B.shape[0] != A.shape[0]:
        errors.append(("/B", f"B must have {A.shape[0]} rows, got {B.shape[0]}"))
        B = None
    w = doc["weights"]
    mode = w["mode"]
    mats = {k: _matrix_at(doc, ["weights", k], errors) for k in ("V", "W", "Q", "R") if k in w}
    if A is not None and B is not None:
        n, p = A.shape[0], B.shape[1]
        if mode == "homogeneous":
            _check_weight(mats.get("V"), "/weights/V", (n, n), errors, True)
            _check_weight(mats.get("W"), "/weights/W", (p, p), errors, True)
        else:
            qshapes = {(n, n)} if doc["kind"] == "centroid" else {((N - 1) * n,) * 2, (N * n,) * 2}
            _check_weight(mats.get("Q"), "/weights/Q", qshapes, errors, True)
            _check_weight(mats.get("R"), "/weights/R", (N * p, N * p), errors, True)
        if "x0" in doc and len(doc["x0"]) != N * n:
            errors.append(("/x0", f"x0 must have {N * n} entries"))
    if errors:
        raise ConfigError(errors)
    weights = (HomogeneousWeights(mats["V"], mats["W"]) if mode == "homogeneous"
               else FullWeights(mats["Q"], mats["R"]))
    return MultiAgentProblem(doc["kind"], LinearSystem(A, B), N, weights)


def _load_json(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"invalid JSON: {exc}")]) from exc


def validate_config(path: str | Path) -> MultiAgentProblem:
    """Load and validate a problem JSON file; raises :class:`ConfigError` listing every violation."""
    return parse_problem(_load_json(path))


@dataclass
class RunConfig:
    command: str
    input_path: Path | None = None
    output_path: Path = Path(".")
    horizon: float = 10.0
    dt: float = 1e-3
    extent: float = DEFAULT_EXTENT
    resolution: int = DEFAULT_RESOLUTION
    tolerances: dict[str, float] = field(default_factory=lambda: {"residual": 1e-9})


def _round(obj: Any) -> Any:
    """Round every float to 9 significant digits so output files are stable."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}") if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _round(obj.item())
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    return obj


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(_round(obj), indent=2, sort_keys=True) + "\n")


def solve_problem(prob: MultiAgentProblem) -> GainResult:
    if prob.kind == "centroid":
        return solve_centroid(prob)
    if prob.homogeneous:
        return solve_sync_homogeneous(prob)
    return solve_sync(prob)


def _output_map(prob: MultiAgentProblem) -> OutputMap:
    if prob.kind == "centroid":
        return centroid_output_map(prob.n_agents, prob.agent.n)
    return sync_output_map(prob.n_agents, prob.agent.n)


def _state_cost_weight(prob: MultiAgentProblem, gain: GainResult) -> np.ndarray:
    """Full-state weight ``c^T Q~ c`` equivalent to the reduced cost."""
    if gain.reduced is None:
        return np.zeros((prob.stacked_a.shape[0],) * 2)
    c = gain.c
    return c.T @ gain.reduced.q_tilde @ c


def _need_problem(cfg: RunConfig) -> tuple[MultiAgentProblem, dict]:
    if cfg.input_path is None:
        raise ConfigError([("", f"command '{cfg.command}' needs --input")])
    doc = _load_json(cfg.input_path)
    return parse_problem(doc), doc


def _cmd_gain(cfg: RunConfig, kind: str) -> str:
    prob, _ = _need_problem(cfg)
    if prob.kind != kind:
        raise ConfigError([("/kind", f"command '{kind}' needs kind '{kind}'")])
    gain = solve_problem(prob)
    tol = cfg.tolerances["residual"]
    _write_json(cfg.output_path / "gain.json", gain.to_dict())
    certs = dict(gain.certificates)
    _write_json(cfg.output_path / "certificates.json", {
        "certificates": certs,
        "structure_tag": gain.structure_tag,
        "residual_tolerance": tol,
        "residual_ok": certs.get("are_residual", 0.0) <= tol,
    })
    key = "diffusive_residual" if kind == "sync" else "broadcast_spread"
    return f"{kind}: {gain.structure_tag} gain, {key} = {certs.get(key, 0.0):.3e}"


def _cmd_gap(cfg: RunConfig) -> str:
    prob, _ = _need_problem(cfg)
    c = _output_map(prob)
    if prob.kind == "sync":
        q_tilde = sync_weights(prob, c)[0]
    else:
        q_tilde = prob.n_agents * centroid_weights(prob)[0]
    q_full = c.c.T @ q_tilde @ c.c
    rep = gap_analysis(prob.stacked_a, 0.5 * (q_full + q_full.T), prob.stacked_b, prob.input_weight())
    _write_json(cfg.output_path / "gap.json", rep.to_dict())
    return f"gap: gap_exists = {rep.gap_exists} ({len(rep.unstable_undetectable_modes)} undetectable unstable modes)"


def _cmd_simulate(cfg: RunConfig) -> str:
    prob, doc = _need_problem(cfg)
    gain = solve_problem(prob)
    nx = prob.stacked_a.shape[0]
    x0 = np.array(doc["x0"], float) if "x0" in doc else np.eye(nx)[0]
    acl = prob.stacked_a + prob.stacked_b @ gain.k_full
    if prob.kind == "sync":
        err_map = _output_map(prob).projection
    else:
        err_map = np.kron(np.ones((1, prob.n_agents)), np.eye(prob.agent.n))
    traj = simulate_closed_loop(acl, x0, cfg.horizon, cfg.dt, k=gain.k_full, error_map=err_map)
    cost = evaluate_cost(traj, _state_cost_weight(prob, gain), gain.k_full, prob.input_weight())
    if prob.kind == "sync" and gain.reduced is not None and not nk.is_hurwitz(prob.agent.a):
        # full state diverges along the synchronous subspace; integrate the cost on y = C x
        red_traj, cost = reduced_closed_loop_cost(gain, x0, cfg.horizon, cfg.dt)
        traj.running_cost = red_traj.running_cost
    traj.write_csv(cfg.output_path / "trajectory.csv")
    return f"simulate: {traj.times.size} samples, J({cfg.horizon:g}) = {cost:.6g}"


def _cmd_surface(cfg: RunConfig) -> str:
    prob, _ = _need_problem(cfg)
    if prob.stacked_a.shape[0] != 2:
        raise ConfigError([("", "surface needs a two-dimensional stacked state (N * n = 2)")])
    gain = solve_problem(prob)
    x_star = value_matrix(gain)
    surface_grid(x_star, cfg.extent, cfg.resolution).write_csv(cfg.output_path / "surface.csv")
    msg = "surface: wrote surface.csv"
    try:
        full = CareProblem(prob.stacked_a, prob.stacked_b, _state_cost_weight(prob, gain), prob.input_weight())
        x_s = solve_care_stabilizing(full).x
    except StructFBError:
        return msg
    surface_grid(x_s, cfg.extent, cfg.resolution).write_csv(cfg.output_path / "surface_strong.csv")
    return msg + " and surface_strong.csv"


def _cmd_field(cfg: RunConfig) -> str:
    if cfg.input_path is None:
        raise ConfigError([("", "command 'field' needs --input")])
    doc = _load_json(cfg.input_path)
    if isinstance(doc, dict) and "kind" in doc:
        prob = parse_problem(doc)
        a, c = prob.stacked_a, _output_map(prob)
    else:
        errors = _schema_errors(doc, FIELD_SCHEMA)
        if errors:
            raise ConfigError(errors)
        a = _matrix_at(doc, ["A"], errors)
        cm = _matrix_at(doc, ["C"], errors)
        if errors:
            raise ConfigError(errors)
        c = OutputMap(cm)
    effective_field_grid(a, c, cfg.extent, cfg.resolution).write_csv(cfg.output_path / "field.csv")
    return "field: wrote field.csv"


def _cmd_reference(cfg: RunConfig) -> tuple[str, int]:
    res = run_reference_example(residual_tol=cfg.tolerances["residual"])
    _write_json(cfg.output_path / "paper_example.json", res)
    failed = [k for k, ok in res["checks"].items() if not ok]
    if failed:
        return f"paper-example: FAILED checks {failed}", 1
    return f"paper-example: all {len(res['checks'])} checks passed", 0


def run(cfg: RunConfig) -> int:
    """Dispatch one command; returns the process exit status."""
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    cfg.output_path = out
    status = 0
    try:
        if cfg.command in ("sync", "centroid"):
            msg = _cmd_gain(cfg, cfg.command)
        elif cfg.command == "gap":
            msg = _cmd_gap(cfg)
        elif cfg.command == "simulate":
            msg = _cmd_simulate(cfg)
        elif cfg.command == "surface":
            msg = _cmd_surface(cfg)
        elif cfg.command == "field":
            msg = _cmd_field(cfg)
        elif cfg.command == "paper-example":
            msg, status = _cmd_reference(cfg)
        else:
            raise ConfigError([("", f"unknown command {cfg.command!r}")])
    except ConfigError as exc:
        _write_json(out / "error.json", {"error": str(exc), "witness": exc.witness})
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StructFBError, ValueError) as exc:
        doc = exc.to_dict() if isinstance(exc, StructFBError) else {"error": str(exc)}
        _write_json(out / "error.json", doc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(msg)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structfb", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", type=Path, help="problem JSON")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--horizon", type=float, default=10.0)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--extent", type=float, default=DEFAULT_EXTENT)
    parser.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    parser.add_argument("--tol-residual", type=float, default=1e-9)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        input_path=args.input,
        output_path=args.out,
        horizon=args.horizon,
        dt=args.dt,
        extent=args.extent,
        resolution=args.resolution,
        tolerances={"residual": args.tol_residual},
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
