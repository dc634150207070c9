"""Command line: ``minitwistor {reflect,wavefront,verify,gallery}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .closed_forms import REFERENCE_CASES, gallery, gallery_names
from .errors import TwistorError
from .scene import load_scene


def _grid(text):
    try:
        n, m = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxM, got {text!r}") from None
    if n < 2 or m < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 x 2 nodes")
    return n, m


def _offsets(text):
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="minitwistor", description="Reflection of wavefronts in minitwistor coordinates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scene_args(sp, required=True):
        sp.add_argument("--scene", required=required, help="scene file ([section] key = value)")
        sp.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                        help="reject unknown scene keys (default on)")
        sp.add_argument("--grid", type=_grid, help="override grid resolution, e.g. 256x256")

    sp = sub.add_parser("reflect", help="export the reflected congruence as CSV")
    scene_args(sp)
    sp.add_argument("--out", help="output directory (default: scene output.path)")
    sp.add_argument("--branch", choices=("+", "-"), help="orientation of exported lines")

    sp = sub.add_parser("wavefront", help="export wavefront point clouds (CSV/OBJ)")
    scene_args(sp)
    sp.add_argument("--out", help="output directory (default: scene output.path)")
    sp.add_argument("--offsets", type=_offsets, help="comma-separated offsets C; use --offsets=-1,0,1 for negatives")

    sp = sub.add_parser("verify", help="run self-checks; exit status 1 on any failure")
    scene_args(sp, required=False)
    sp.add_argument("target", nargs="?", default="all", choices=("all",), help="'all' (default) unless --scene is given")

    sp = sub.add_parser("gallery", help="list gallery surfaces and reference cases")
    sp.add_argument("name", nargs="?", help="show the default parameters of one surface")
    return p


def _scene(args):
    cfg = load_scene(args.scene, strict=args.strict)
    if args.grid is not None:
        from dataclasses import replace

        cfg = replace(cfg, grid=replace(cfg.grid, n=args.grid[0], m=args.grid[1]))
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "gallery":
            return _cmd_gallery(args)
        if args.command == "verify":
            return _cmd_verify(args)
        cfg = _scene(args)
        from .workflows import run_reflect, run_wavefront

        if args.command == "reflect":
            print(run_reflect(cfg, args.out, branch=args.branch))
        else:
            for path in run_wavefront(cfg, args.out, offsets=args.offsets):
                print(path)
        return 0
    except (TwistorError, OSError) as e:
        print(f"minitwistor: error: {e}", file=sys.stderr)
        return 2


def _cmd_gallery(args):
    if args.name is None:
        for name in gallery_names():
            print(name)
        print()
        print("reference cases:")
        for case in REFERENCE_CASES:
            print(f"  {case}")
        return 0
    entry = gallery(args.name)
    for k, v in entry.params.items():
        print(f"{k} = {v}")
    return 0


def _cmd_verify(args):
    from .checks import report, run_verify

    if args.scene is not None:
        target = _scene(args)
    else:
        target = args.target
    text, ok = report(run_verify(target))
    print(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
