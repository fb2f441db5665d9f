"""Command-line front end.

Exit codes: 0 success, 1 analysis-negative (a condition failed), 2 usage or
I/O error.  Every command that writes an output file also writes
``<output>.manifest.json`` (or the path given by ``--manifest``);
``ifsdim replay`` re-runs a manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import DEFAULT_BURN_IN, OrbitDivergence, PointCloud, forward_orbit
from .estimation import build_index, dimension_profile
from .geometry import DEFAULT_HORIZON, check_osc, check_sosc_mass
from .model import PRESETS, ConfigError, IfsSystem, load_config, preset, validate
from .moments import HypothesisViolated, MomentError, dimension_bounds
from .render import UnsupportedDimension, render_svg

THREADS_ENV = "IFSDIM_THREADS"


class UsageError(Exception):
    pass


class Negative(Exception):
    """An analysis ran fine but a condition failed (exit 1)."""


def _threads(value):
    if value is not None:
        return value
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer") from None


def _system(args, required=True) -> IfsSystem | None:
    if getattr(args, "preset", None):
        try:
            return preset(args.preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if getattr(args, "config", None):
        try:
            return load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read {args.config}: {exc.strerror or exc}") from None
    if required:
        raise UsageError("give --config FILE or --preset NAME")
    return None


def _emit(args, payload: dict, table: list[tuple[str, str]]):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if getattr(args, "output", None) and args.command in ("validate", "bounds", "osc"):
        Path(args.output).write_text(text)
    if args.json:
        sys.stdout.write(text)
    else:
        width = max((len(k) for k, _ in table), default=0)
        for k, v in table:
            print(f"{k:<{width}}  {v}")


def _fmt(est) -> str:
    return f"{est.value:.10g} +/- {est.error:.3g}"


# --------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    sys_ = _system(args)
    rep = validate(sys_)
    rows = [("system", sys_.name), ("status", "ok" if rep.ok else "INVALID")]
    rows += [(v.code, v.message) for v in rep.violations]
    _emit(args, rep.to_dict(), rows)
    return 0 if rep.ok else 1


def cmd_bounds(args) -> int:
    sys_ = _system(args)
    rep = validate(sys_)
    if not rep.ok:
        raise Negative("invalid system: " + "; ".join(v.message for v in rep.violations))
    try:
        b = dimension_bounds(sys_, tol=args.tol)
    except HypothesisViolated as exc:
        raise Negative(f"condition failed: {', '.join(exc.failed)}") from None
    except MomentError as exc:
        raise Negative(str(exc)) from None
    m = b.moments
    rows = [
        ("system", sys_.name),
        ("sum p log p", _fmt(m.entropy)),
        ("sum p Gamma", _fmt(m.mean_Gamma)),
        ("sum p log Gamma", _fmt(m.log_Gamma)),
        ("sum p log gamma", _fmt(m.log_gamma)),
        ("sum p |w(x0)-x0|", _fmt(m.displacement)),
        ("s_lower", _fmt(b.s_lower)),
        ("s_upper", _fmt(b.s_upper)),
        ("conditions", "all satisfied" if b.flags.accepted else ", ".join(b.flags.failed())),
    ]
    rows += [("note", n) for n in b.notes]
    _emit(args, b.to_dict(), rows)
    return 0


def _parse_x0(text, d):
    if text is None:
        return None
    try:
        x0 = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError("--x0 must be comma-separated numbers") from None
    if x0.shape != (d,):
        raise UsageError(f"--x0 needs {d} coordinates")
    return x0


def cmd_simulate(args) -> int:
    sys_ = _system(args)
    if args.n < 0 or args.burn_in < 0:
        raise UsageError("-n and --burn-in must be non-negative")
    rep = validate(sys_)
    if not rep.ok:
        raise Negative("invalid system: " + "; ".join(v.message for v in rep.violations))
    try:
        dimension_bounds(sys_)
    except HypothesisViolated as exc:
        raise Negative(f"condition failed: {', '.join(exc.failed)}") from None
    x0 = _parse_x0(args.x0, sys_.dim)
    try:
        cloud = forward_orbit(sys_, x0=x0, n=args.n, burn_in=args.burn_in, seed=args.seed,
                              workers=_threads(args.threads))
    except OrbitDivergence as exc:
        raise Negative(str(exc)) from None
    cloud.to_csv(args.output)
    print(f"wrote {len(cloud)} points to {args.output}")
    return 0


def cmd_estimate(args) -> int:
    try:
        cloud = PointCloud.from_csv(args.points)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {args.points}: {exc}") from None
    if len(cloud) == 0:
        raise UsageError("point cloud is empty")
    sys_ = _system(args, required=False)
    bounds = None
    margin = False
    if sys_ is not None:
        margin = sys_.space.unbounded_sides()
        try:
            bounds = dimension_bounds(sys_)
        except (HypothesisViolated, MomentError):
            bounds = None
    index = build_index(cloud, r_min=max(float(np.linalg.norm(np.ptp(cloud.points, axis=0))), 1.0) * 1e-4)
    prof = dimension_profile(index, bounds, n_centers=min(args.centers, len(cloud)), seed=args.seed,
                             min_count=args.min_count, edge_margin=margin,
                             workers=_threads(args.threads))
    if args.output:
        prof.to_csv(args.output)
    payload = prof.to_dict()
    q = prof.quantiles
    rows = [
        ("centers used", str(len(prof.slopes))),
        ("excluded", str(prof.excluded)),
        ("slope q10 / q50 / q90", f"{q['q10']:.4f} / {q['q50']:.4f} / {q['q90']:.4f}"),
        ("r0", f"{prof.window['r0']:.6g}"),
    ]
    if prof.band is not None:
        rows.append(("bounds band", f"[{prof.band[0]:.4f}, {prof.band[1]:.4f}]"))
        rows.append(("coverage (band +/- 0.1)", f"{prof.coverage:.3f}"))
    _emit(args, payload, rows)
    return 0


def cmd_render(args) -> int:
    try:
        cloud = PointCloud.from_csv(args.points)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {args.points}: {exc}") from None
    try:
        svg = render_svg(cloud.points, width=args.width, height=args.height,
                         title=cloud.provenance.get("system"))
    except UnsupportedDimension as exc:
        raise UsageError(str(exc)) from None
    Path(args.output).write_text(svg)
    print(f"wrote {args.output}")
    return 0


def cmd_osc(args) -> int:
    sys_ = _system(args)
    rep = check_osc(sys_, horizon=args.horizon)
    if args.points:
        try:
            rep.positive_mass = check_sosc_mass(sys_, None, PointCloud.from_csv(args.points))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {args.points}: {exc}") from None
    rows = [(f"w_{i}(O) in O", "pass" if ok else "FAIL") for i, ok in rep.containment.items()]
    bad = [p for p, ok in rep.disjointness.items() if not ok]
    rows.append(("pairwise disjoint", f"pass ({len(rep.disjointness)} pairs)" if not bad
                 else "FAIL " + " ".join(f"{i},{j}" for i, j in bad)))
    rows.append(("coverage", rep.coverage))
    rows.append(("tail", rep.tail))
    if rep.positive_mass is not None:
        pm = rep.positive_mass
        rows.append(("mu(O) estimate", f"{pm.fraction:.5f} [{pm.lower:.5f}, {pm.upper:.5f}]"))
    _emit(args, rep.to_dict(), rows)
    ok = rep.osc_ok and (rep.positive_mass is None or rep.positive_mass.positive)
    return 0 if ok else 1


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        argv = manifest["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    return main(argv)


# --------------------------------------------------------------------------
# parser


def _add_system(p, required=True):
    g = p.add_mutually_exclusive_group(required=False)
    g.add_argument("--config", help="JSON system configuration")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in system")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifsdim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ifsdim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a system declaration")
    _add_system(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", help="write the JSON report here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bounds", help="moment sums and dimension bounds")
    _add_system(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", help="write the JSON report here")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="forward iteration of the chaos game")
    _add_system(p)
    p.add_argument("-n", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0", help="starting point, comma-separated")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("-o", "--output", required=True, help="CSV output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="local-dimension profile of a point cloud")
    p.add_argument("points")
    _add_system(p, required=False)
    p.add_argument("--centers", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-count", type=int, default=50)
    p.add_argument("--threads", type=int)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", help="per-center CSV output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("render", help="SVG scatter plot of a 2-D cloud")
    p.add_argument("points")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--height", type=int, default=800)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("osc", help="open set condition checks")
    _add_system(p)
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--points", help="cloud for the empirical mass of O")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", help="write the JSON report here")
    p.set_defaults(func=cmd_osc)

    for name, sp in sub.choices.items():
        sp.add_argument("--manifest", metavar="PATH",
                        help="where to write the run manifest (default <output>.manifest.json)")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _write_manifest(args, argv):
    if args.command == "replay":
        return
    out = getattr(args, "output", None)
    target = args.manifest or (out + ".manifest.json" if out else None)
    if target is None:
        return
    outputs = [out] if out else []
    if out and args.command == "simulate":
        outputs.append(out + ".json")
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    manifest = {
        "schema": "ifsdim.manifest/1",
        "command": args.command,
        "argv": list(argv),
        "params": params,
        "tool_version": __version__,
        "outputs": outputs,
    }
    Path(target).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"ifsdim: error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"ifsdim: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except Negative as exc:
        print(f"ifsdim: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ifsdim: I/O error: {exc}", file=sys.stderr)
        return 2
    _write_manifest(args, argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
