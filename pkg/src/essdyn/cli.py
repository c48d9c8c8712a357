"""Command-line entry point: ``essdyn <subcommand> ...``.

Exit status 0 on success, 1 on user error (bad label, window, config or
arguments), 2 on an internal failure.  Reports are JSON on stdout or in
the file given by ``--out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
import time
import traceback

import numpy as np

from . import escape, hairs, orbits, render, singlab
from .catalog import UnknownMap, get_map, map_labels
from .kernel import class_tag_count, compose_maps
from .rules import Window
from .sphere import INF, as_point, point_to_json


_NEGATIVE_VALUE = re.compile(r"^-[\d.][\d.eE+\-]*[,ijIJ]")


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _point(text):
    try:
        return as_point(text)
    except (ValueError, TypeError):
        raise UserError(f"cannot parse point {text!r}") from None


def _points(text):
    return [_point(t) for t in text.split(",") if t.strip()]


def _params(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UserError(f"parameter {item!r} must look like name=value")
        k, v = item.split("=", 1)
        try:
            out[k] = complex(v.replace("i", "j")) if "j" in v or "i" in v else float(v)
        except ValueError:
            raise UserError(f"bad parameter value {v!r}") from None
    return out


def _map(label, params=None):
    try:
        return get_map(label, **(params or {}))
    except UnknownMap as err:
        raise UserError(err.args[0]) from None
    except TypeError as err:
        raise UserError(f"bad parameters for {label}: {err}") from None


def _window(text):
    try:
        return Window.parse(text)
    except ValueError as err:
        raise UserError(f"malformed window {text!r}: {err}") from None


def _budgets(text):
    try:
        return tuple(int(b) for b in text.split(","))
    except ValueError:
        raise UserError(f"bad budgets {text!r}") from None


def _emit(report, out):
    text = json.dumps(report, indent=2, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


# subcommands --------------------------------------------------------------------
def cmd_render(a):
    try:
        cfg = render.RenderConfig.load(a.config)
    except OSError as err:
        raise UserError(f"cannot read config {a.config}: {err}") from None
    for name in ("width", "height", "budget", "tile"):
        v = getattr(a, name)
        if v is not None:
            setattr(cfg, name, v)
    if a.output:
        cfg.output = a.output
    cfg.validate()
    t = time.perf_counter()
    img = render.render_plane(cfg, workers=a.workers)
    png = render.encode_image(img, cfg.output, a.png)
    codes, counts = np.unique(img.codes, return_counts=True)
    return {"output": cfg.output, "png": a.png if png else None, "width": cfg.width,
            "height": cfg.height, "sha256": hashlib.sha256(render.ppm_bytes(img)).hexdigest(),
            "class_counts": {str(int(c)): int(n) for c, n in zip(codes, counts)},
            "seconds": round(time.perf_counter() - t, 3), "config": cfg.to_json()}


def cmd_classify(a):
    fmap = _map(a.map, _params(a.param))
    try:
        z = complex(float(a.re), float(a.im))
    except ValueError:
        raise UserError("re and im must be numbers") from None
    targets = _points(a.cover) if a.cover else [INF]
    try:
        cover = escape.build_cover(targets, a.radius)
    except ValueError as err:
        raise UserError(str(err)) from None
    report = escape.classification_report(fmap, z, cover, _budgets(a.budgets))
    if a.membership is not None:
        report["membership"] = {"target": point_to_json(_point(a.membership)),
                                "verdict": escape.membership_report(fmap, z, _point(a.membership))}
    return report


def _parse_curve(text):
    parts = text.split(",")
    if len(parts) != 6:
        raise UserError("a curve is a preset name or t0,t1,re0,im0,re1,im1")
    try:
        t0, t1, x0, y0, x1, y1 = (float(p) for p in parts)
    except ValueError:
        raise UserError(f"bad curve {text!r}") from None
    try:
        return hairs.Segment(complex(x0, y0), complex(x1, y1), t0, t1)
    except hairs.DegenerateCurve as err:
        raise UserError(str(err)) from None


def cmd_hair(a):
    if a.curve in hairs.HAIR_PRESETS:
        fmap, curve, endpoint, cover = hairs.hair_preset(a.curve)
        if fmap.label != a.map:
            raise UserError(f"preset {a.curve} belongs to map {fmap.label}, not {a.map}")
    else:
        fmap = _map(a.map)
        curve = _parse_curve(a.curve)
        endpoint, cover = None, None
    if a.endpoint is not None:
        endpoint = _point(a.endpoint)
    if endpoint is None:
        raise UserError("--endpoint is required for a custom curve")
    if a.cover:
        cover = escape.build_cover(_points(a.cover), a.radius)
    try:
        trace = hairs.trace_hair(fmap, curve, endpoint, cover, _budgets(a.budgets), a.samples)
    except (hairs.DegenerateCurve, hairs.EndpointNotSingular) as err:
        raise UserError(str(err)) from None
    report = {"trace": trace.to_json()}
    if a.steps:
        try:
            report["singular_orbit"] = hairs.singular_orbit(fmap, trace, a.steps).to_json()
        except hairs.LimitDidNotStabilize as err:
            report["singular_orbit"] = {"error": str(err), "k": err.k}
    if a.csv:
        with open(a.csv, "w") as fh:
            fh.write(trace.to_csv())
    return report


def cmd_verify_v0(a):
    fmap = _map(a.map)
    t = time.perf_counter()
    rep = hairs.verify_absorbing(fmap, a.samples, a.seed, a.k)
    rep["seconds"] = round(time.perf_counter() - t, 3)
    return rep


def cmd_verify_tinf(a):
    if a.height < 3:
        raise UserError("--height must be >= 3")
    t = time.perf_counter()
    rep = hairs.verify_translation(_map(a.map), a.height, a.samples, a.seed)
    rep["seconds"] = round(time.perf_counter() - t, 3)
    return rep


def cmd_presing(a):
    fmap = _map(a.map)
    try:
        depth = int(a.depth)
    except ValueError:
        raise UserError("depth must be an integer") from None
    try:
        tree = singlab.presingularities(fmap, _point(a.e), depth, _window(a.window), a.grid)
    except ValueError as err:
        raise UserError(str(err)) from None
    rep = tree.to_json()
    rep["map"] = fmap.label
    rep["level_sizes"] = [len(l) for l in tree.levels]
    return rep


def cmd_compose(a):
    outer, inner = _map(a.outer), _map(a.inner)
    comp = compose_maps(outer, inner)
    win = _window(a.window)
    pts = singlab.singularities_in_window(comp, win, sphere=True)
    return {"label": comp.label, "expression": str(comp.expression), "class_tag": comp.class_tag,
            "window": win.to_json(), "B": [point_to_json(p) for p in pts],
            "has_infinity": comp.singularity_rule.has_infinity,
            "count": class_tag_count(comp.class_tag)}


def cmd_cycle(a):
    fmap = _map(a.map)
    try:
        period = int(a.period)
    except ValueError:
        raise UserError("period must be an integer") from None
    try:
        rec = orbits.refine_cycle(fmap, _point(a.seed), period)
    except orbits.NoConvergence as err:
        return {"map": fmap.label, "converged": False, "error": str(err)}
    rep = rec.to_json()
    rep.update({"map": fmap.label, "converged": True, "period": rec.period})
    return rep


def build_parser():
    p = _Parser(prog="essdyn", description="Dynamics of maps with essential singularities.")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("render", help="render a dynamical plane from a JSON config")
    s.add_argument("config")
    s.add_argument("--output", help="PPM path (overrides the config)")
    s.add_argument("--png", help="also write a PNG here (needs Pillow)")
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--tile", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("classify", help="escape class of one point")
    s.add_argument("map")
    s.add_argument("re")
    s.add_argument("im")
    s.add_argument("--cover", help="comma-separated targets, e.g. inf,0")
    s.add_argument("--radius", type=float, default=escape.DEFAULT_RADIUS)
    s.add_argument("--budgets", default=",".join(map(str, escape.DEFAULT_BUDGETS)))
    s.add_argument("--membership", help="also report membership in I_e for this e")
    s.add_argument("--param", action="append", help="map parameter name=value")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("hair", help="trace an escaping hair and its singular orbit")
    s.add_argument("map")
    s.add_argument("curve", help=f"preset ({', '.join(hairs.HAIR_PRESETS)}) or t0,t1,re0,im0,re1,im1")
    s.add_argument("--endpoint")
    s.add_argument("--cover")
    s.add_argument("--radius", type=float, default=escape.DEFAULT_RADIUS)
    s.add_argument("--samples", type=int, default=16)
    s.add_argument("--steps", type=int, default=4, help="singular orbit length (0 to skip)")
    s.add_argument("--budgets", default=",".join(map(str, escape.DEFAULT_BUDGETS)))
    s.add_argument("--csv", help="write t,re,im,class rows here")
    s.set_defaults(func=cmd_hair)

    s = sub.add_parser("verify-v0", help="sample the absorbing region V_k of g")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--k", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--map", default="g")
    s.set_defaults(func=cmd_verify_v0)

    s = sub.add_parser("verify-tinf", help="max |g(w) - (w+1)| on Im w >= height")
    s.add_argument("--height", type=float, default=3.0)
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--map", default="g")
    s.set_defaults(func=cmd_verify_tinf)

    s = sub.add_parser("presing", help="pre-singularity tree of e")
    s.add_argument("map")
    s.add_argument("e")
    s.add_argument("depth")
    s.add_argument("window", help="re_min,re_max,im_min,im_max")
    s.add_argument("--grid", type=int, default=64)
    s.set_defaults(func=cmd_presing)

    s = sub.add_parser("compose", help="singularity set of outer o inner")
    s.add_argument("outer")
    s.add_argument("inner")
    s.add_argument("--window", default="-4,4,-4,4")
    s.set_defaults(func=cmd_compose)

    s = sub.add_parser("cycle", help="refine a periodic cycle and classify its multiplier")
    s.add_argument("map")
    s.add_argument("seed")
    s.add_argument("period")
    s.set_defaults(func=cmd_cycle)

    sub.add_parser("maps", help="list map labels").set_defaults(
        func=lambda a: {"maps": map_labels()})
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # "-2,2,-2,2" or "-1+2j" are values, not options
    argv = [" " + t if _NEGATIVE_VALUE.match(t) else t for t in argv]
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UserError("missing subcommand; see --help")
        report = args.func(args)
        _emit(report, args.out)
        return 0
    except UserError as err:
        print(f"essdyn: error: {err}", file=sys.stderr)
        return 1
    except render.InvalidConfig as err:
        print("essdyn: invalid config:", file=sys.stderr)
        for line in err.problems:
            print(f"  {line}", file=sys.stderr)
        return 1
    except SystemExit as err:  # --help
        return int(err.code or 0)
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
