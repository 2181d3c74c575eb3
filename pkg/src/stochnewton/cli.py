"""Command-line front end.

Every subcommand writes a versioned JSON document (stdout or ``--json PATH``)
and a run manifest (``--manifest PATH``, or one JSON line on stderr).
Exit codes: 0 success, 1 bad arguments, 2 algorithmic failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .dynamics import (
    classify_quadratic_measure,
    lyapunov_fixed_point,
    markov_decompose,
)
from .newton_engine import EngineConfig, deterministic_newton, find_all_roots, run_random_orbit
from .errors import HitCriticalPoint, IncompleteFactorization, StochNewtonError
from .families import EmbeddedMarkov, Quadratic, RelaxedNewton, Rotation
from .measure import UniformDisk, contains_half_disk, family_measure_from_json, measure_from_json
from .montecarlo import empirical_rate, render_basin
from .poly import parse_polynomial
from .sphere import INF, is_inf, point_from_json, point_to_json

SCHEMA_PREFIX = "stochnewton"
DEFAULTS = {
    "seed": 0,
    "radius": 0.75,
    "tolerance": 1e-10,
    "max_iter": 1000,
    "z0": "2",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_jsonish(text: str):
    """JSON given inline or as a path to a file."""
    p = Path(text)
    if not text.lstrip().startswith(("{", "[")) and p.exists():
        text = p.read_text()
    return json.loads(text)


def _poly_arg(text: str):
    p = Path(text)
    if p.exists() and p.is_file():
        text = p.read_text().strip()
    return parse_polynomial(text)


def _resolve(args, config: dict, key: str, fallback=None):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    if key == "seed" and "STOCHNEWTON_SEED" in os.environ:
        return int(os.environ["STOCHNEWTON_SEED"])
    return DEFAULTS.get(key, fallback)


def _seed(args, config, measure_obj=None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in config:
        return int(config["seed"])
    if measure_obj and "seed" in measure_obj:
        return int(measure_obj["seed"])
    if "STOCHNEWTON_SEED" in os.environ:
        return int(os.environ["STOCHNEWTON_SEED"])
    return DEFAULTS["seed"]


def _lambda_measure(args, config):
    obj = getattr(args, "measure", None) or config.get("measure")
    if isinstance(obj, str):
        obj = _load_jsonish(obj)
    radius = getattr(args, "radius", None)
    if obj is None or radius is not None:
        r = radius if radius is not None else config.get("radius", DEFAULTS["radius"])
        return UniformDisk(float(r), seed=_seed(args, config))
    return measure_from_json(obj, seed=_seed(args, config, obj))


def _engine_config(args, config) -> EngineConfig:
    return EngineConfig(
        max_iterations=int(_resolve(args, config, "max_iter")),
        residual_tolerance=float(_resolve(args, config, "tolerance")),
    )


def _complex_arg(text) -> complex:
    if isinstance(text, (int, float, complex, list)):
        return point_from_json(text)
    return point_from_json(str(text))


def _doc(command: str, body: dict) -> dict:
    return {"schema": f"{SCHEMA_PREFIX}.{command}/1", **body}


# -- subcommands ----------------------------------------------------------------


def cmd_find_roots(args, config):
    g = _poly_arg(_resolve(args, config, "poly"))
    tau = _lambda_measure(args, config)
    cfg = _engine_config(args, config)
    z0 = _complex_arg(_resolve(args, config, "z0"))
    roots = find_all_roots(g, tau, cfg, z0=z0)
    return _doc(
        "find-roots",
        {
            "poly": g.to_json(),
            "measure": tau.to_json(),
            "theorem_hypotheses_met": contains_half_disk(tau) and tau.absolutely_continuous(),
            "z0": point_to_json(z0),
            "roots": [r.to_json() for r in roots],
        },
    )


def trap_demo(g, z0: complex, tau, runs: int, cfg: EngineConfig) -> dict:
    det = deterministic_newton(g, z0, cfg)
    converged = 0
    for k in range(runs):
        try:
            converged += run_random_orbit(g, tau, z0, (), cfg, k).converged
        except HitCriticalPoint:
            pass
    return {
        "deterministic": {
            "status": det.status.value,
            "cycle_length": det.cycle_length,
            "iterations": det.iterations,
        },
        "randomized": {"runs": runs, "converged": converged, "fraction": converged / runs},
    }


def cmd_trap_demo(args, config):
    g = _poly_arg(_resolve(args, config, "poly", "2 - 2z + z^3"))
    z0 = _complex_arg(_resolve(args, config, "z0_trap", "0"))
    tau = _lambda_measure(args, config)
    runs = int(_resolve(args, config, "runs", 1000))
    body = trap_demo(g, z0, tau, runs, _engine_config(args, config))
    body.update(poly=g.to_json(), z0=point_to_json(z0), measure=tau.to_json())
    return _doc("trap-demo", body)


def _family(args, config):
    name = _resolve(args, config, "family", "relaxed-newton")
    if name == "relaxed-newton":
        return RelaxedNewton(_poly_arg(_resolve(args, config, "poly")))
    if name == "quadratic":
        return Quadratic()
    if name == "rotation":
        exps = _resolve(args, config, "exponents", "1")
        exps = [int(e) for e in str(exps).split(",")] if not isinstance(exps, list) else exps
        return Rotation(int(_resolve(args, config, "n", 2)), exps)
    if name == "embedded-markov":
        pts = _load_jsonish(_resolve(args, config, "points")) if isinstance(_resolve(args, config, "points"), str) else _resolve(args, config, "points")
        maps = _load_jsonish(_resolve(args, config, "maps")) if isinstance(_resolve(args, config, "maps"), str) else _resolve(args, config, "maps")
        return EmbeddedMarkov([point_from_json(p) for p in pts], maps)
    raise UsageError(f"unknown family {name!r}")


def _family_measure(args, config, family):
    obj = getattr(args, "measure", None) or config.get("measure")
    if isinstance(obj, str):
        obj = _load_jsonish(obj)
    if isinstance(family, RelaxedNewton):
        return _lambda_measure(args, config)
    if obj is None:
        raise UsageError(f"--measure is required for the {family.name} family")
    return family_measure_from_json(obj, seed=_seed(args, config, obj))


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return x


def cmd_lyapunov(args, config):
    fam = _family(args, config)
    tau = _family_measure(args, config, fam)
    x = _complex_arg(_resolve(args, config, "point", "inf"))
    m = _resolve(args, config, "multiplicity")
    est = lyapunov_fixed_point(tau, fam, x, m=int(m) if m is not None else None)
    classification = None
    try:
        for rep in markov_decompose(fam, tau):
            if len(rep.points) == 1 and (
                (is_inf(x) and is_inf(rep.points[0])) or (not is_inf(x) and not is_inf(rep.points[0]) and abs(rep.points[0] - x) < 1e-6 * (1 + abs(x)))
            ):
                classification = rep.classification.value
    except StochNewtonError:
        pass
    return _doc(
        "lyapunov",
        {
            "family": fam.to_json(),
            "measure": tau.to_json(),
            "point": point_to_json(x),
            "lyapunov": _num(est.value),
            "stderr": est.stderr,
            "method": est.method,
            "classification": classification,
        },
    )


def cmd_markov(args, config):
    fam = _family(args, config)
    tau = _family_measure(args, config, fam)
    reports = markov_decompose(fam, tau)
    return _doc("markov", {"family": fam.to_json(), "measure": tau.to_json(), "minimal_sets": [r.to_json() for r in reports]})


def _markov_text(doc: dict) -> str:
    lines = [f"{'#':>3}  {'period':>6}  {'lyapunov':>12}  {'class':<24} points"]
    for i, r in enumerate(doc["minimal_sets"]):
        pts = ", ".join("inf" if p == "inf" else f"{complex(*p):.6g}" for p in r["points"])
        lyap = r["lyapunov"] if isinstance(r["lyapunov"], str) else f"{r['lyapunov']:.6f}"
        lines.append(f"{i:>3}  {r['period']:>6}  {lyap:>12}  {r['classification']:<24} {pts}")
    return "\n".join(lines)


def _trap_text(doc: dict) -> str:
    d, r = doc["deterministic"], doc["randomized"]
    det_result = f"cycle of length {d['cycle_length']}" if d["status"] == "cycle" else d["status"]
    return "\n".join(
        [
            f"{'scheme':<14} {'runs':>6}  result",
            f"{'deterministic':<14} {1:>6}  {det_result}",
            f"{'randomized':<14} {r['runs']:>6}  {r['fraction']:.1%} converged ({r['converged']}/{r['runs']})",
        ]
    )


def _plain_text(doc: dict) -> str:
    lines = []
    for k, v in doc.items():
        if k == "schema":
            continue
        if k == "roots" and v and isinstance(v[0], dict):
            for i, rec in enumerate(v):
                z = complex(*rec["value"])
                lines.append(f"root {i}: {z.real:+.15g} {z.imag:+.15g}i  m={rec['multiplicity_estimate']}  |g|={rec['residual']:.3g}")
            continue
        lines.append(f"{k}: {json.dumps(v) if isinstance(v, (dict, list)) else v}")
    return "\n".join(lines)


def cmd_classify(args, config):
    obj = getattr(args, "measure", None) or config.get("measure")
    if obj is None:
        raise UsageError("--measure is required")
    if isinstance(obj, str):
        obj = _load_jsonish(obj)
    seed = _seed(args, config, obj)
    tau = measure_from_json(obj, seed=seed) if obj.get("kind") == "uniform_disk" else family_measure_from_json(obj, seed=seed)
    res = classify_quadratic_measure(tau, probe=not getattr(args, "no_probe", False))
    return _doc("classify", {"family": "quadratic", "measure": tau.to_json(), **res.to_json()})


def cmd_basin_map(args, config):
    g = _poly_arg(_resolve(args, config, "poly"))
    tau = _lambda_measure(args, config)
    bounds = _resolve(args, config, "bounds", "-2,2,-2,2")
    bounds = tuple(float(v) for v in (bounds.split(",") if isinstance(bounds, str) else bounds))
    res = _resolve(args, config, "res", "64")
    res = [int(v) for v in (str(res).split(",") if not isinstance(res, list) else res)]
    nx, ny = (res[0], res[-1])
    runs = int(_resolve(args, config, "runs", 20))
    grid = render_basin(g, tau, bounds, (nx, ny), runs, _engine_config(args, config), workers=int(_resolve(args, config, "workers", 1)))
    outputs = []
    csv_path = _resolve(args, config, "csv")
    png_path = _resolve(args, config, "png")
    if csv_path:
        grid.to_csv(csv_path)
        outputs.append(csv_path)
    if png_path:
        grid.to_png(png_path)
        outputs.append(png_path)
    doc = _doc(
        "basin-map",
        {
            "poly": g.to_json(),
            "measure": tau.to_json(),
            "bounds": list(bounds),
            "resolution": [nx, ny],
            "runs_per_cell": runs,
            "roots": [[r.real, r.imag] for r in grid.roots],
            "metadata": grid.metadata,
            "mean_escape": float(grid.escape_prob.mean()),
            "mean_unresolved": float(grid.unresolved_prob.mean()),
        },
    )
    return doc, outputs


def rate_check(g, tau, z0: complex, runs: int, cfg: EngineConfig) -> dict:
    fam = RelaxedNewton(g)
    cfg = cfg.with_(trace=True)
    slopes, chis = [], []
    failures = 0
    for k in range(runs):
        try:
            out = run_random_orbit(g, tau, z0, (), cfg, k)
        except HitCriticalPoint:
            failures += 1
            continue
        if not out.converged:
            failures += 1
            continue
        slope, _ = empirical_rate(out.locked_trace)
        slopes.append(slope)
        chis.append(lyapunov_fixed_point(tau, fam, out.final_z, m=out.multiplicity).value)
    mean_slope = sum(slopes) / len(slopes) if slopes else math.nan
    mean_chi = sum(chis) / len(chis) if chis else math.nan
    return {
        "runs": runs,
        "traced": len(slopes),
        "failures": failures,
        "mean_slope": mean_slope,
        "lyapunov": mean_chi,
        "difference": mean_slope - mean_chi,
        "within_0_1": abs(mean_slope - mean_chi) <= 0.1,
    }


def cmd_rate_check(args, config):
    g = _poly_arg(_resolve(args, config, "poly", "-1 + z^2"))
    tau = _lambda_measure(args, config)
    z0 = _complex_arg(_resolve(args, config, "z0"))
    runs = int(_resolve(args, config, "runs", 500))
    body = rate_check(g, tau, z0, runs, _engine_config(args, config))
    body.update(poly=g.to_json(), measure=tau.to_json(), z0=point_to_json(z0))
    return _doc("rate-check", body)


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument(
        "--json", dest="json_out", nargs="?", const="-", metavar="PATH", help="emit the JSON document (stdout, or PATH)"
    )
    common.add_argument("--config", metavar="PATH", help="JSON file of option defaults")
    common.add_argument("--manifest", metavar="PATH")
    common.add_argument("--measure", help="measure JSON (inline or path)")
    common.add_argument("--radius", type=float, help="uniform disk radius around 1")
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--tolerance", type=float)

    p = _Parser(prog="stochnewton", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("find-roots", parents=[common], help="all roots by random relaxed Newton + deflation")
    s.add_argument("--poly", help='e.g. "2 - 2z + z^3", a JSON coefficient array, or a file')
    s.add_argument("--z0")

    s = sub.add_parser("trap-demo", parents=[common], help="deterministic vs randomized Newton on a trap polynomial")
    s.add_argument("--poly")
    s.add_argument("--z0", dest="z0_trap")
    s.add_argument("--runs", type=int)

    for name, helptext in (("lyapunov", "Lyapunov exponent at a fixed point"), ("markov", "minimal sets of the finite chain")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--family", choices=["relaxed-newton", "quadratic", "rotation", "embedded-markov"])
        s.add_argument("--poly")
        s.add_argument("--n", type=int)
        s.add_argument("--exponents", help="comma-separated rotation exponents, one per branch")
        s.add_argument("--points", help="JSON list of points for embedded-markov")
        s.add_argument("--maps", help="JSON list of index maps for embedded-markov")
        if name == "lyapunov":
            s.add_argument("--point", help='fixed point, e.g. "1", "0.5+0.2i" or "inf"')
            s.add_argument("--multiplicity", type=int)

    s = sub.add_parser("classify", parents=[common], help="type Ia/Ib/Ic/II-candidate for the quadratic family")
    s.add_argument("--no-probe", action="store_true")

    s = sub.add_parser("basin-map", parents=[common], help="grid of convergence probabilities")
    s.add_argument("--poly")
    s.add_argument("--bounds", help="xmin,xmax,ymin,ymax")
    s.add_argument("--res", help="N or NX,NY")
    s.add_argument("--runs", type=int)
    s.add_argument("--png")
    s.add_argument("--csv")
    s.add_argument("--workers", type=int)

    s = sub.add_parser("rate-check", parents=[common], help="empirical contraction rate vs Lyapunov exponent")
    s.add_argument("--poly")
    s.add_argument("--z0")
    s.add_argument("--runs", type=int)
    return p


TEXT_RENDERERS = {"trap-demo": _trap_text, "markov": _markov_text}

COMMANDS = {
    "find-roots": cmd_find_roots,
    "trap-demo": cmd_trap_demo,
    "lyapunov": cmd_lyapunov,
    "markov": cmd_markov,
    "classify": cmd_classify,
    "basin-map": cmd_basin_map,
    "rate-check": cmd_rate_check,
}


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        config = _load_jsonish(args.config) if args.config else {}
        result = COMMANDS[args.command](args, config)
    except UsageError as exc:
        return _error("usage", str(exc), 1)
    except IncompleteFactorization as exc:
        return _error(type(exc).__name__, str(exc), 2)
    except StochNewtonError as exc:
        return _error(type(exc).__name__, str(exc), 2)
    except (ValueError, KeyError, json.JSONDecodeError, FileNotFoundError) as exc:
        return _error("usage", f"{type(exc).__name__}: {exc}", 1)

    doc, outputs = result if isinstance(result, tuple) else (result, [])
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.json_out == "-":
        print(text)
    elif args.json_out:
        Path(args.json_out).write_text(text + "\n")
        outputs = [args.json_out] + outputs
    else:
        print(TEXT_RENDERERS.get(args.command, _plain_text)(doc))

    manifest = {
        "schema": f"{SCHEMA_PREFIX}.manifest/1",
        "command": args.command,
        "config": {**config, **{k: v for k, v in vars(args).items() if v is not None and k != "manifest"}},
        "seed": _seed(args, config),
        "version": __version__,
        "wall_time": time.perf_counter() - start,
        "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in outputs],
    }
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    else:
        print(json.dumps({"manifest": manifest}, sort_keys=True), file=sys.stderr)
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
