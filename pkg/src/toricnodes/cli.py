"""Command-line frontend.

Every report is a JSON object holding the command, the full configuration,
the library version and a ``result`` block.  Exit codes: 0 success,
1 computational failure or bad input, 2 hypotheses unmet.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .curves import NonGeneric, TriangleParam, harnack_params, triangle_nodes
from .hypotheses import (
    DomainTooLarge,
    Wedge,
    check_hypotheses,
    verify_theorem_combinatorics,
    wedge as full_wedge,
)
from .lattice import LatticePolygon, PolygonError, affine_sublattice_index, detect_kite
from .monodromy import (
    EmptyDiscriminant,
    TrackingFailure,
    circle_loop,
    constant_loop,
    discriminant_loop,
    kite_monodromy,
    rotation_loop,
    track_roots,
)
from .obstruction import gcd_vertex_determinants, obstruction_report, psi_triangle

OK, FAILURE, UNMET = 0, 1, 2

DEFAULTS = {"tol": 1e-9, "seed": 0, "format": "json", "max_domain": 1000, "steps": 256, "zmin": 1e-4,
            "loops": 12}


class InputError(Exception):
    """Bad user input; reported with exit code 1."""


@dataclass
class RunConfig:
    command: str
    polygon: str | None = None
    tol: float = DEFAULTS["tol"]
    seed: int = DEFAULTS["seed"]
    format: str = DEFAULTS["format"]
    verbosity: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("--tol must be positive")

    def to_json(self) -> dict:
        out = {"command": self.command, "polygon": self.polygon, "tol": self.tol, "seed": self.seed,
               "format": self.format, "verbosity": self.verbosity}
        out.update(self.extra)
        return out


# serialization


def _plain(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [_plain(float(x.real)), _plain(float(x.imag))]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def dumps(report: dict) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2)


def _has_dict(x: Any) -> bool:
    if isinstance(x, dict):
        return True
    return isinstance(x, list) and any(_has_dict(v) for v in x)


def _text(x: Any, indent: int = 0) -> list[str]:
    pad = "  " * indent
    if not _has_dict(x):
        return [pad + json.dumps(x, sort_keys=True)]
    lines = []
    if isinstance(x, dict):
        for k in sorted(x):
            if _has_dict(x[k]):
                lines.append(f"{pad}{k}:")
                lines += _text(x[k], indent + 1)
            else:
                lines.append(f"{pad}{k}: {json.dumps(x[k], sort_keys=True)}")
    else:
        for v in x:
            lines.append(f"{pad}-")
            lines += _text(v, indent + 1)
    return lines


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps(report)
    return "\n".join(_text(_plain(report)))


# input parsing


def load_polygon(path: str) -> LatticePolygon:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"parse error in {path} at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict) or "vertices" not in data:
        raise InputError(f'{path}: expected an object with a "vertices" key')
    try:
        return LatticePolygon(data["vertices"])
    except (PolygonError, TypeError, ValueError) as e:
        raise InputError(f"{path}: {e}") from None


def parse_complex(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise InputError(f"expected re or re,im, got {text!r}")


def parse_point(text: str) -> tuple[int, int]:
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError:
        raise InputError(f"expected x,y with integer entries, got {text!r}") from None


def parse_options(text: str) -> tuple[str, dict[str, str]]:
    """``kind:key=value,key=value`` with values allowed to contain commas (re,im)."""
    kind, _, rest = text.partition(":")
    opts: dict[str, str] = {}
    key = None
    for piece in rest.split(",") if rest else []:
        if "=" in piece:
            key, _, val = piece.partition("=")
            opts[key] = val
        elif key is not None:
            opts[key] += "," + piece
        else:
            raise InputError(f"cannot parse option {piece!r} in {text!r}")
    return kind, opts


def _triangle(args) -> TriangleParam:
    a = [parse_complex(s) for s in args.a] if args.a else [1.0] * args.ell
    if len(a) != args.ell:
        raise InputError(f"--a given {len(a)} times, need l = {args.ell}")
    try:
        return TriangleParam(args.ell, args.p, args.q, tuple(a))
    except ValueError as e:
        raise InputError(str(e)) from None


def _loop(spec: str, tri: TriangleParam, k: int):
    kind, opts = parse_options(spec)
    idx = int(opts.get("index", 0))
    if kind == "circle":
        if "center" not in opts or "radius" not in opts:
            raise InputError("circle loop needs center=re,im and radius=r")
        return circle_loop(tri.a, idx, parse_complex(opts["center"]), float(opts["radius"]))
    if kind == "discriminant":
        radius = float(opts["radius"]) if "radius" in opts else None
        loop, _ = discriminant_loop(tri, k, idx, radius, int(opts.get("choice", 0)))
        return loop
    if kind == "rotation":
        return rotation_loop(tri.a)
    if kind in ("constant", "none"):
        return constant_loop(tri.a)
    raise InputError(f"unknown loop kind {kind!r}")


# commands


def cmd_analyze(cfg: RunConfig, args) -> tuple[int, dict]:
    poly = load_polygon(args.polygon)
    rep = obstruction_report(poly)
    rep.update({
        "vertices": [list(v) for v in poly.original_vertices],
        "interior_points": len(poly.interior_points),
        "node_count": poly.node_count(),
        "affine_index": affine_sublattice_index(poly.lattice_points),
        "gcd_vertex_determinants": gcd_vertex_determinants(poly),
    })
    return OK, rep


def _triangle_report(tri: TriangleParam, tol: float) -> tuple[int, dict]:
    res = triangle_nodes(tri, tol)
    out = {}
    ok = True
    for k in sorted(res.roots):
        found, expected = len(res.roots[k]), res.expected[k]
        ok &= found == expected
        out[str(k)] = {"roots": res.roots[k], "expected": expected, "found": found,
                       "residual_max": res.residual_max[k], "line_distance_max": res.line_distance_max[k],
                       "node_residual_max": res.node_residual_max[k], "flagged": res.flagged[k]}
    return (OK if ok else FAILURE), {"nodes": out, "total": res.total}


def cmd_triangle_nodes(cfg: RunConfig, args) -> tuple[int, dict]:
    tri = _triangle(args)
    return _triangle_report(tri, cfg.tol)


def cmd_trace(cfg: RunConfig, args) -> tuple[int, dict]:
    tri = _triangle(args)
    loop = _loop(args.loop, tri, args.k)
    res = track_roots(tri, loop, args.k, tol=cfg.tol, steps=args.steps)
    return OK, {"permutation": res.permutation, "residual": res.residual, "steps_used": res.steps_used,
                "closing_distance": res.closing_distance, "loop": loop.description,
                "transposition": res.is_transposition(), "identity": res.is_identity()}


def _parse_wedge(poly: LatticePolygon, spec: str, base: str | None) -> Wedge:
    j, sep, apex = spec.partition(":")
    if not sep:
        raise InputError(f"--wedge expects j:vx,vy, got {spec!r}")
    try:
        j = int(j)
    except ValueError:
        raise InputError(f"--wedge edge index must be an integer, got {j!r}") from None
    vx, vy = parse_point(apex)
    v = (vx - poly.offset[0], vy - poly.offset[1])
    try:
        w = full_wedge(poly, j, v)
        if base:
            i0, _, i1 = base.partition(":")
            pts = w.base[int(i0):int(i1) + 1]
            w = Wedge(w.edge, tuple(pts), w.apex)
    except ValueError as e:
        raise InputError(str(e)) from None
    return w


def cmd_patchwork(cfg: RunConfig, args) -> tuple[int, dict]:
    from .patchwork import (
        degeneration_family,
        geometric_schedule,
        limit_distance,
        patch_loop,
        sample_points,
        track_degeneration_nodes,
    )

    poly = load_polygon(args.polygon)
    w = _parse_wedge(poly, args.wedge, args.base)
    try:
        fam = degeneration_family(poly, w)
    except ValueError as e:
        raise InputError(str(e)) from None
    sched = geometric_schedule(args.zmin)
    tracked = track_degeneration_nodes(fam, sched)
    pts = sample_points()
    zs = sorted(sched)[:2]
    dists = {z: limit_distance(fam, z, pts) for z in zs}
    rep = {"subdivision": fam.sub.to_json(), "offset": list(poly.offset), "schedule": sched,
           "nodes": tracked.to_json(), "limit_distance": {repr(z): d for z, d in dists.items()}}
    if len(zs) == 2:
        rep["limit_ratio"] = dists[zs[1]] / dists[zs[0]]
    code = OK if tracked.ok() else FAILURE
    if args.inner_loop:
        tri = fam.triangle()
        kind, opts = parse_options(args.inner_loop)
        k = int(opts.pop("k", 1))
        loop = _loop(args.inner_loop, tri, k)
        pl = patch_loop(fam, loop, z_min=args.zmin)
        rep["patch_loop"] = {"permutation": pl.permutation, "support": pl.support, "kinds": pl.kinds,
                             "fixes_outside": pl.fixes_outside, "matches_triangle": pl.matches_triangle,
                             "closing_distance": pl.closing_distance, "loop": loop.description}
        if not (pl.fixes_outside and pl.matches_triangle):
            code = FAILURE
    return code, rep


def cmd_check_hypotheses(cfg: RunConfig, args) -> tuple[int, dict]:
    poly = load_polygon(args.polygon)
    rep = check_hypotheses(poly, c_scope=args.c_scope)
    return (OK if rep.all else UNMET), rep.to_json()


def cmd_theorem_check(cfg: RunConfig, args) -> tuple[int, dict]:
    poly = load_polygon(args.polygon)
    res = verify_theorem_combinatorics(poly, max_domain=args.max_domain)
    code = {"verified": OK, "hypotheses unmet": UNMET}.get(res.status, FAILURE)
    return code, res.to_json()


def cmd_kite(cfg: RunConfig, args) -> tuple[int, dict]:
    poly = load_polygon(args.polygon)
    if detect_kite(poly) is None:
        raise InputError(f"{args.polygon} is not a kite")
    km = kite_monodromy(harnack_params(poly), loops=args.loops, seed=cfg.seed, steps=args.steps)
    blocks = km.block_system()
    deco = km.decoration
    rep = {"ratio": deco.ratio, "signs": deco.signs, "residual_max": max(deco.residuals, default=0.0),
           "decoration_blocks": deco.blocks(), "permutations": km.permutations, "loops": km.loops,
           "failures": km.failures, "group_order": str(km.group.order()), "block_system": blocks}
    return (OK if blocks and not km.failures else FAILURE), rep


FIGURE1 = ((0, 0), (5, 0), (7, 6))


def cmd_demo_figure1(cfg: RunConfig, args) -> tuple[int, dict]:
    poly = LatticePolygon(FIGURE1)
    tri = TriangleParam(5, 7, 6, (1.0,) * 5)
    fibers = psi_triangle(poly).fiber_sizes
    code, rep = _triangle_report(tri, cfg.tol)
    rep["fibers"] = {str(k): fibers.get(k, 0) for k in sorted(fibers)}
    rep["interior_points"] = len(poly.interior_points)
    rep["root_lines"] = {str(k): f"exp(-i pi {7 * k}/6) R*" for k in range(1, 4)}
    if rep["total"] != len(poly.interior_points):
        code = FAILURE
    return code, rep


COMMANDS = {
    "analyze": cmd_analyze,
    "triangle-nodes": cmd_triangle_nodes,
    "trace": cmd_trace,
    "patchwork": cmd_patchwork,
    "check-hypotheses": cmd_check_hypotheses,
    "theorem-check": cmd_theorem_check,
    "kite": cmd_kite,
    "demo-figure1": cmd_demo_figure1,
}


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for unmet hypotheses
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(FAILURE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULTS["tol"])
    common.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    common.add_argument("--format", choices=("json", "text"), default=DEFAULTS["format"])
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--max-domain", type=int, default=DEFAULTS["max_domain"])
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="toricnodes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def tri_args(p):
        p.add_argument("--ell", type=int, required=True)
        p.add_argument("--p", type=int, required=True)
        p.add_argument("--q", type=int, required=True)
        p.add_argument("--a", action="append", default=[], help="parameter re or re,im; repeat l times")

    p = sub.add_parser("analyze", parents=[common], help="obstruction map of a polygon")
    p.add_argument("polygon")
    p = sub.add_parser("triangle-nodes", parents=[common], help="nodes of a triangle curve")
    tri_args(p)
    p = sub.add_parser("trace", parents=[common], help="root monodromy of P_k along a loop")
    tri_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--loop", default="discriminant",
                   help="circle:center=re,im,radius=r[,index=i] | discriminant[:choice=c,index=i] | rotation")
    p.add_argument("--steps", type=int, default=DEFAULTS["steps"])
    p = sub.add_parser("patchwork", parents=[common], help="wedge degeneration and node classification")
    p.add_argument("polygon")
    p.add_argument("--wedge", required=True, help="j:vx,vy (edge index, apex in file coordinates)")
    p.add_argument("--base", default=None, help="i0:i1, run of edge lattice points used as base")
    p.add_argument("--zmin", type=float, default=DEFAULTS["zmin"])
    p.add_argument("--inner-loop", default=None, help="discriminant:k=K[,choice=c,index=i] | constant")
    p = sub.add_parser("check-hypotheses", parents=[common], help="assumptions (A), (B), (C)")
    p.add_argument("polygon")
    p.add_argument("--c-scope", choices=("proof", "all"), default="proof")
    p = sub.add_parser("theorem-check", parents=[common], help="group generated by wedge generators")
    p.add_argument("polygon")
    p = sub.add_parser("kite", parents=[common], help="kite decoration and sampled monodromy")
    p.add_argument("polygon")
    p.add_argument("--loops", type=int, default=DEFAULTS["loops"])
    p.add_argument("--steps", type=int, default=DEFAULTS["steps"])
    sub.add_parser("demo-figure1", parents=[common], help="the worked triangle example")
    return parser


def _config(args) -> RunConfig:
    skip = {"command", "polygon", "tol", "seed", "format", "out", "verbose"}
    extra = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return RunConfig(args.command, getattr(args, "polygon", None), args.tol, args.seed, args.format,
                     args.verbose, extra)


def run(argv: Sequence[str] | None = None) -> tuple[int, dict]:
    """Parse ``argv``, run the command and return (exit code, report)."""
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        code, result = COMMANDS[args.command](cfg, args)
        report = {"status": "ok" if code == OK else ("hypotheses unmet" if code == UNMET else "failure"),
                  "result": result}
    except InputError as e:
        cfg_json = {"command": args.command}
        return FAILURE, {"command": args.command, "config": cfg_json, "version": __version__,
                         "status": "error", "error": str(e)}
    except (NonGeneric, EmptyDiscriminant, TrackingFailure, DomainTooLarge, ValueError) as e:
        report = {"status": "failure", "error": f"{type(e).__name__}: {e}"}
        code = FAILURE
    report.update({"command": args.command, "config": cfg.to_json(), "version": __version__})
    return code, report


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    code, report = run(argv)
    text = render(report, args.format) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if report.get("status") == "error":
        sys.stderr.write(f"error: {report['error']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
