"""Command-line entry point.

Every subcommand reads one problem file (or a directory of them with
``--jobs``).  A problem file is a JSON object with some of the keys
``domain``, ``codomain`` (graph records), ``map`` (vertex images and edge
paths), ``curve`` (a weighted multi-curve) and ``graph`` (a single network).
Results are written as JSON with sorted keys.

Exit codes: 0 success, 2 invalid input, 3 no convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from .graph_core import EdgeScalars, GraphValidationError, graph_from_dict, graph_to_dict, to_number
from .graph_maps import GraphMap, energy, map_from_dict, map_to_dict

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 2, 3

log = logging.getLogger("elastigraph")


class NotConverged(Exception):
    def __init__(self, payload: dict):
        super().__init__("did not converge")
        self.payload = payload


# ---------------------------------------------------------------- helpers

def num(x) -> Any:
    """A number as plain JSON, with the exact rational alongside when there is one."""
    if isinstance(x, Fraction):
        return {"decimal": float(x), "exact": f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)}
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if hasattr(x, "item"):
        return x.item()
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return num(obj)
    if isinstance(obj, float):
        return num(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def read_problem(path: str) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphValidationError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from exc


def _structures(data: dict, key: str, exact: bool):
    if key not in data:
        raise GraphValidationError([f"problem file has no {key!r} graph"])
    g, structs = graph_from_dict(data[key])
    if exact:
        structs = {k: EdgeScalars(s.kind, {e: Fraction(x) if isinstance(x, float) else x
                                           for e, x in s.items()}) for k, s in structs.items()}
    return g, structs


def _need(structs: dict, kind: str, where: str) -> EdgeScalars:
    if kind not in structs:
        raise GraphValidationError([f"{where} graph needs {kind!r} on every edge"])
    return structs[kind]


def _load_map(data: dict, exact: bool, param: Optional[str] = None):
    dom, ds = _structures(data, "domain", exact)
    cod, cs = _structures(data, "codomain", exact)
    if "map" not in data:
        raise GraphValidationError(["problem file has no 'map'"])
    structure = cs.get(param) if param else None
    f = map_from_dict(data["map"], dom, cod, structure)
    return f, ds, cs


def _exponent(text: str):
    return "inf" if text in ("inf", "oo", "infinity") else to_number(text)


def _structure_kinds(p, q) -> tuple[str, str]:
    dom = "weight" if p == 1 else ("length" if p == "inf" else "alpha")
    cod = "length" if q == "inf" else ("weight" if q == 1 else "alpha")
    return dom, cod


# ---------------------------------------------------------------- subcommands

def cmd_energy(args, data) -> dict:
    p, q = _exponent(args.p), _exponent(args.q)
    dk, ck = _structure_kinds(p, q)
    f, ds, cs = _load_map(data, args.exact, ck)
    dom_s = ds.get(dk) if dk != "weight" else ds.get("weight")
    if dk != "weight":
        dom_s = _need(ds, dk, "domain")
    cod_s = _need(cs, ck, "codomain")
    value = energy(f, dom_s, cod_s, p, q)
    return {"p": args.p, "q": args.q, "energy": value}


def cmd_harmonic(args, data) -> dict:
    from .harmonic import HarmonicError, harmonic_solve
    f, ds, cs = _load_map(data, args.exact)
    try:
        res = harmonic_solve(f, _need(ds, "alpha", "domain"), _need(cs, "length", "codomain"),
                             tol=args.tol, max_transitions=args.max_transitions)
    except HarmonicError as exc:
        raise NotConverged({"error": str(exc)}) from exc
    out = res.to_json()
    if not res.certificate.passed:
        raise NotConverged(out)
    return out


def cmd_lip(args, data) -> dict:
    from .curves import lipschitz_stretch
    f, ds, cs = _load_map(data, args.exact, "length")
    l1, l2 = _need(ds, "length", "domain"), _need(cs, "length", "codomain")
    value, witness = lipschitz_stretch(f, l1, l2)
    out = {"lipschitz": value, "witness": witness.to_json()}
    if args.search:
        from .harmonic import lipschitz_search
        best, g = lipschitz_search(f, l1, l2)
        out["map"] = map_to_dict(g)
        out["map_lipschitz"] = best
    return out


def cmd_taut(args, data) -> dict:
    from .graph_maps import multiplicity
    from .taut import is_taut, make_taut
    f, ds, _ = _load_map(data, args.exact)
    w = _need(ds, "weight", "domain")
    g = make_taut(f, w)
    return {"map": map_to_dict(g), "multiplicity": multiplicity(g, w).to_json(), "taut": is_taut(g, w)}


def _weighted_graph(data: dict, exact: bool):
    key = "graph" if "graph" in data else "domain"
    g, s = _structures(data, key, exact)
    return g, _need(s, "weight", key)


def cmd_mincut(args, data) -> dict:
    from .taut import star_cuts
    g, w = _weighted_graph(data, args.exact)
    cuts = star_cuts(g, w)
    return {"cuts": {m: c.to_json() for m, c in cuts.items()},
            "mincut": {m: c.weight for m, c in cuts.items()}}


def cmd_flows(args, data) -> dict:
    from .taut import check_flows, vertex_flows
    g, w = _weighted_graph(data, args.exact)
    fd = vertex_flows(g, w)
    errs = check_flows(g, w, fd)
    if errs:
        raise GraphValidationError(errs)
    return fd.to_json()


def cmd_emb(args, data) -> dict:
    from .emb_iter import compute_emb
    f, ds, cs = _load_map(data, args.exact)
    a1, a2 = _need(ds, "alpha", "domain"), _need(cs, "alpha", "codomain")
    cert = compute_emb(f, a1, a2, tol=args.tol, max_iters=args.max_iters, seed=args.seed,
                       trace_ratios=bool(args.trace))
    if args.trace and cert.trace is not None:
        with open(args.trace, "w") as fh:
            for rec in cert.trace.records():
                fh.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")
    out = cert.to_json()
    if args.certificate:
        Path(args.certificate).write_text(dumps(out) + "\n")
    if not cert.converged:
        raise NotConverged(out)
    return out


def cmd_elcurves(args, data) -> dict:
    from .curves import sf_el_lower_bound
    f, ds, cs = _load_map(data, args.exact, "alpha")
    value, witness = sf_el_lower_bound(f, _need(ds, "alpha", "domain"), _need(cs, "alpha", "codomain"))
    return {"lower_bound": value, "witness": witness.to_json()}


def cmd_verify(args, data) -> dict:
    from .curves import check_curve, curve_from_dict
    from .emb_iter import verify_tight
    f, ds, cs = _load_map(data, args.exact, "length")
    if "curve" not in data:
        raise GraphValidationError(["problem file has no 'curve'"])
    c = curve_from_dict(data["curve"])
    check_curve(c, f.domain)
    lengths = _need(cs, "length", "codomain")
    return verify_tight(c, f, _need(ds, "alpha", "domain"), _need(cs, "alpha", "codomain"),
                        dict(lengths.items()), tol=args.tol if args.tol > 1e-9 else 1e-6)


def cmd_electrical(args, data) -> dict:
    from .electrical import delta_y, equivalent, response_matrix, series_parallel_reduce, y_delta
    if args.action == "ydelta":
        vals = [to_number(x) for x in data.get("values", [])]
        if len(vals) != 3 or any(not x > 0 for x in vals):
            raise GraphValidationError(["ydelta needs three positive 'values'"])
        out = delta_y(*vals) if data.get("inverse") else y_delta(*vals)
        return {"values": list(out)}
    g, s = _structures(data, "graph", args.exact)
    alpha = _need(s, "alpha", "graph")
    if args.action == "response":
        return response_matrix(g, dict(alpha.items())).to_json()
    if args.action == "reduce":
        net = series_parallel_reduce(g, dict(alpha.items()), y_delta_steps=bool(data.get("y_delta")))
        return {"graph": graph_to_dict(net.graph, [net.scalars()])}
    if args.action == "equiv":
        h, t = _structures(data, "other", args.exact)
        return {"equivalent": equivalent((g, dict(alpha.items())), (h, dict(_need(t, "alpha", "other").items())))}
    raise GraphValidationError([f"unknown electrical action {args.action!r}"])


COMMANDS = {
    "energy": cmd_energy, "harmonic": cmd_harmonic, "lip": cmd_lip, "taut": cmd_taut,
    "mincut": cmd_mincut, "flows": cmd_flows, "emb": cmd_emb, "elcurves": cmd_elcurves,
    "verify": cmd_verify, "electrical": cmd_electrical,
}


# ---------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--max-iters", type=int, default=10000)
    common.add_argument("--max-transitions", type=int, default=100000)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trace", default=None, help="JSON Lines file for per-step records")
    common.add_argument("--out", default=None, help="write the result here instead of stdout")
    common.add_argument("--exact", action="store_true", help="read decimal inputs as exact rationals")
    common.add_argument("--jobs", type=int, default=1, help="parallel runs for a directory input")
    parser = argparse.ArgumentParser(prog="elastigraph", description="Energies and harmonic maps of graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    e = sub.add_parser("energy", parents=[common], help="evaluate E^p_q of a map")
    e.add_argument("--p", default="2")
    e.add_argument("--q", default="inf")
    sub.add_parser("harmonic", parents=[common], help="harmonic representative with certificate")
    lp = sub.add_parser("lip", parents=[common], help="Lipschitz stretch factor over candidate curves")
    lp.add_argument("--search", action="store_true", help="also search for an optimal map")
    sub.add_parser("taut", parents=[common], help="taut representative and multiplicity")
    sub.add_parser("mincut", parents=[common], help="minimal cuts around each marked vertex")
    sub.add_parser("flows", parents=[common], help="vertex-to-vertex flow decomposition")
    em = sub.add_parser("emb", parents=[common], help="embedding energy with witnesses")
    em.add_argument("--certificate", default=None)
    sub.add_parser("elcurves", parents=[common], help="lower bound for the extremal-length stretch")
    sub.add_parser("verify", parents=[common], help="check a curve-map-target chain for tightness")
    el = sub.add_parser("electrical", parents=[common], help="resistor-network tools",
                        usage="elastigraph electrical {response,reduce,ydelta,equiv} INPUT [options]")
    el.add_argument("action", choices=["response", "reduce", "ydelta", "equiv"])
    for name, sp in sub.choices.items():
        sp.add_argument("input", help="problem JSON file, or a directory of them")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("ELASTIGRAPH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run_one(args, path: str) -> tuple[int, dict]:
    try:
        data = read_problem(path)
        if not isinstance(data, dict):
            raise GraphValidationError(["problem file must hold a JSON object"])
        return EXIT_OK, COMMANDS[args.command](args, data)
    except GraphValidationError as exc:
        return EXIT_INVALID, {"error": "invalid input", "details": list(exc.errors)}
    except NotConverged as exc:
        return EXIT_NOT_CONVERGED, {"error": "not converged", "partial": exc.payload}
    except (ValueError, KeyError, OSError) as exc:
        return EXIT_INVALID, {"error": "invalid input", "details": [str(exc)]}


def _run_path(job):
    args, path = job
    return path, run_one(args, path)


def main(argv: Optional[list[str]] = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    target = Path(args.input)
    if target.is_dir():
        paths = sorted(str(p) for p in target.glob("*.json"))
        jobs = [(args, p) for p in paths]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_run_path, jobs))
        else:
            results = [_run_path(j) for j in jobs]
        code = max((c for _, (c, _) in results), default=EXIT_OK)
        payload = {Path(p).name: {"exit": c, "result": r} for p, (c, r) in results}
    else:
        code, payload = run_one(args, str(target))
    text = dumps(payload)
    if code == EXIT_INVALID and not target.is_dir():
        print(dumps(payload), file=sys.stderr)
        return code
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
