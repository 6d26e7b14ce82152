"""Command-line client for the engine service.

By default requests are dispatched to an in-process instance of the FastAPI
app (no server needed); pass --server to target a running instance instead.
Every command writes a machine-readable report (JSON; CSV for paths) whose
deterministic part depends only on the request, seeds included.

Exit codes: 0 ok, 1 residual failure (verify), 2 usage error,
3 domain or degeneracy error.
"""

from __future__ import annotations

import argparse
import json
import sys


def _parse_complex_list(text: str) -> list[list[float]]:
    out = []
    for part in text.split(","):
        c = complex(part.strip().replace(" ", ""))
        out.append([c.real, c.imag])
    return out


def _metric_spec(args, config: dict) -> dict:
    if getattr(args, "dsl", None):
        if args.n is None:
            raise SystemExit2("--dsl requires --n")
        return {"dsl": {"n": args.n, "expr": args.dsl}}
    if getattr(args, "builtin", None):
        params = json.loads(args.params) if getattr(args, "params", None) else {}
        if args.n is None:
            raise SystemExit2("--builtin requires --n")
        return {"builtin": {"name": args.builtin, "n": args.n, "params": params}}
    if "metric" in config:
        return config["metric"]
    raise SystemExit2("no metric given: use --builtin/--n, --dsl/--n or --config")


class SystemExit2(Exception):
    """Usage error carrying exit code 2."""


def _point_payload(args) -> dict:
    if args.z is None or args.v is None:
        raise SystemExit2("this command needs --z and --v")
    return {"z": _parse_complex_list(args.z), "v": _parse_complex_list(args.v)}


def _add_metric_flags(p):
    p.add_argument("--builtin", choices=["euclidean", "poincare_ball", "lp_finsler",
                                         "hermitian_field"])
    p.add_argument("--n", type=int)
    p.add_argument("--params", help="JSON parameters for the builtin family")
    p.add_argument("--dsl", help="metric expression, e.g. 'abs2(v1)/(1 - abs2(z1))^2'")


def _add_point_flags(p):
    p.add_argument("--z", help="comma-separated complex base coordinates")
    p.add_argument("--v", help="comma-separated complex fiber coordinates")
    p.add_argument("--path", choices=["auto", "analytic", "jets"], default="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfinsler",
                                 description="complex Finsler geometry engine client")
    ap.add_argument("--server", help="service URL; default runs the app in-process")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=["json", "csv"], default="json")
    ap.add_argument("--config", help="RunConfig JSON file with defaults")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("jet", help="dump the Wirtinger derivative table of G")
    _add_metric_flags(p)
    _add_point_flags(p)
    p.add_argument("--order", type=int, default=4)

    for name in ("levi", "connection", "torsion"):
        p = sub.add_parser(name)
        _add_metric_flags(p)
        _add_point_flags(p)

    p = sub.add_parser("classify", help="three-level Kähler classification")
    _add_metric_flags(p)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.add_argument("--path", choices=["auto", "analytic", "jets"], default="auto")

    p = sub.add_parser("curvature", help="curvature blocks and identity residuals at a point")
    _add_metric_flags(p)
    _add_point_flags(p)
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, help="constant-curvature parameter to test against")

    p = sub.add_parser("holcurv", help="holomorphic curvature over a grid or samples")
    _add_metric_flags(p)
    p.add_argument("--grid", type=int)
    p.add_argument("--z-max", type=float, default=0.9)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path", choices=["auto", "analytic", "jets"], default="auto")

    p = sub.add_parser("flagcurv", help="flag curvature along random or given flags")
    _add_metric_flags(p)
    _add_point_flags(p)
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("geodesic", help="integrate a geodesic")
    _add_metric_flags(p)
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--dir", dest="direction", required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--samples", type=int, default=65)
    p.add_argument("--fixed-steps", type=int)

    p = sub.add_parser("expmap", help="exponential map endpoint")
    _add_metric_flags(p)
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--dir", dest="direction", required=True)
    p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("length", help="arc length of a line or geodesic segment")
    _add_metric_flags(p)
    p.add_argument("--curve", choices=["line", "geodesic"], default="line")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--dir", dest="direction", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("variation", help="first/second variation formula vs numerics")
    p.add_argument("order", choices=["first", "second"])
    _add_metric_flags(p)
    p.add_argument("--curve", choices=["line", "geodesic"], default="geodesic")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--dir", dest="direction", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--bump-dir", required=True)
    p.add_argument("--profile", choices=["sin", "poly"], default="sin")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--stretch", action="store_true", help="use the endpoint-moving family")
    p.add_argument("--reparam", action="store_true",
                   help="reparametrize the base curve to constant speed first")
    p.add_argument("--h", type=float)

    p = sub.add_parser("verify", help="run the full invariant suite")
    _add_metric_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--draws", type=int, default=20)

    p = sub.add_parser("estimate-c", help="fit the constant-curvature parameter")
    _add_metric_flags(p)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path", choices=["auto", "analytic", "jets"], default="auto")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return ap


def _build_payload(args, config: dict):
    cmd = args.command
    metric = {"metric": _metric_spec(args, config)}
    if cmd == "jet":
        return "/v1/jet", {**metric, "point": _point_payload(args),
                           "order": args.order, "path": args.path}
    if cmd in ("levi", "connection", "torsion"):
        return f"/v1/{cmd}", {**metric, "point": _point_payload(args), "path": args.path}
    if cmd == "classify":
        return "/v1/classify", {**metric,
                                "samples": {"count": args.count, "seed": args.seed},
                                "tol": args.tol, "path": args.path}
    if cmd == "curvature":
        return "/v1/curvature", {**metric, "point": _point_payload(args),
                                 "draws": args.draws, "seed": args.seed,
                                 "constant_c": args.c, "path": args.path}
    if cmd == "holcurv":
        payload = {**metric, "z_max": args.z_max, "path": args.path}
        if args.grid:
            payload["grid"] = args.grid
        elif args.count:
            payload["samples"] = {"count": args.count, "seed": args.seed}
        return "/v1/holcurv", payload
    if cmd == "flagcurv":
        return "/v1/flagcurv", {**metric, "point": _point_payload(args),
                                "draws": args.draws, "seed": args.seed,
                                "path": args.path}
    if cmd == "geodesic":
        z = _parse_complex_list(args.frm)
        v = _parse_complex_list(args.direction)
        return "/v1/geodesic", {**metric, "start": {"z": z, "v": v}, "T": args.T,
                                "tol": args.tol, "samples": args.samples,
                                "fixed_step_count": args.fixed_steps}
    if cmd == "expmap":
        return "/v1/expmap", {**metric, "z": _parse_complex_list(args.frm),
                              "v": _parse_complex_list(args.direction), "tol": args.tol}
    if cmd == "length":
        curve = {"kind": args.curve, "z": _parse_complex_list(args.frm),
                 "v": _parse_complex_list(args.direction),
                 "t0": args.t0, "t1": args.t1}
        return "/v1/length", {**metric, "curve": curve, "tol": args.tol}
    if cmd == "variation":
        curve = {"kind": args.curve, "z": _parse_complex_list(args.frm),
                 "v": _parse_complex_list(args.direction),
                 "t0": args.t0, "t1": args.t1}
        payload = {**metric, "order": 1 if args.order == "first" else 2,
                   "base": curve,
                   "bump": {"direction": _parse_complex_list(args.bump_dir),
                            "profile": args.profile, "scale": args.scale},
                   "family": "stretch" if args.stretch else "bump",
                   "reparametrize": args.reparam}
        if args.h:
            payload["h"] = args.h
        return "/v1/variation", payload
    if cmd == "verify":
        return "/v1/verify", {**metric, "seed": args.seed, "points": args.points,
                              "draws": args.draws}
    if cmd == "estimate-c":
        return "/v1/estimate-c", {**metric,
                                  "samples": {"count": args.count, "seed": args.seed},
                                  "path": args.path}
    raise SystemExit2(f"unknown command {cmd}")


def _make_client(server):
    from .client import make_client

    return make_client(server)


def _write_output(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    config = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    out_path = args.out or config.get("out")
    fmt = args.format if args.format != "json" else config.get("format", "json")

    try:
        url, payload = _build_payload(args, config)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if fmt == "csv" and args.command == "geodesic":
        url += "?format=csv"

    client = _make_client(args.server)
    try:
        resp = client.post(url, json=payload)
    finally:
        client.close()

    if resp.status_code == 422:
        print(f"usage error: {resp.text}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        print(f"error ({resp.status_code}): {resp.text}", file=sys.stderr)
        return 3

    if fmt == "csv" and args.command == "geodesic":
        _write_output(resp.text, out_path)
        return 0

    envelope = resp.json()
    _write_output(json.dumps(envelope, indent=2, sort_keys=True), out_path)

    if args.command == "verify" and not envelope["report"]["passed"]:
        failed = [c["name"] for c in envelope["report"]["checks"] if not c["passed"]]
        print(f"verify FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
