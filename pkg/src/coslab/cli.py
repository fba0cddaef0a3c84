"""Command-line client for the coslab service.

By default commands run against the in-process app (no server needed);
``--server URL`` targets a remote instance instead. ``--config FILE`` merges
a JSON document over the command-line flags (the file wins). Exit codes:
0 success, 2 usage, 3 input error, 4 runtime fault.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import httpx


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service import app
    return httpx.Client(transport=httpx.ASGITransport(app=app),
                        base_url="http://coslab.local", timeout=None)


def _call(server: Optional[str], path: str, payload: dict) -> int:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    try:
        body = resp.json()
    except ValueError:
        body = {"detail": resp.text}
    print(json.dumps(body, indent=2, sort_keys=True))
    if resp.status_code == 200:
        return 0
    if resp.status_code == 422:
        return 2
    if resp.status_code == 400:
        return 3
    return 4


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",") if s != ""]


def _merge_config_file(args: argparse.Namespace, payload: dict) -> dict:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = json.load(fh)
        payload = {**payload, **overrides}
    return payload


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coslab",
        description="Traffic-signal-control laboratory: scenario generation, "
                    "training, evaluation, and artifact dumps.")
    p.add_argument("--server", default=None,
                   help="remote service URL (default: run in-process)")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-scenario", help="write a scenario + demand file")
    g.add_argument("kind", choices=["grid", "avenue"])
    g.add_argument("rows", type=int)
    g.add_argument("cols", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--demand-scale", type=float, default=1.0)
    g.add_argument("--episode-s", type=int, default=3600)
    g.add_argument("--control-interval-s", type=int, default=15)
    g.add_argument("--out", default=None)

    t = sub.add_parser("train", help="train the collaborator-selection controller")
    t.add_argument("scenario")
    t.add_argument("--out", default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--episodes", type=int, default=200)
    t.add_argument("--k", type=int, default=5)
    t.add_argument("--matrix", default="learned",
                   help="learned | fixed-hop:<radius> | random-frozen")
    t.add_argument("--no-diag", action="store_true",
                   help="drop the trace (self-selection) term")
    t.add_argument("--no-sym", action="store_true",
                   help="drop the symmetry term")
    t.add_argument("--no-clip", action="store_true",
                   help="disable ratio clipping in the decision-policy loss")
    t.add_argument("--raw-q", action="store_true",
                   help="use Q directly instead of the mean-baseline advantage")
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--gamma", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--eval-interval-steps", type=int, default=None)
    t.add_argument("--resume", default=None, help="checkpoint to continue from")
    t.add_argument("--config", default=None,
                   help="JSON config file; overrides command-line flags")

    e = sub.add_parser("eval", help="evaluate a controller over seeds")
    e.add_argument("--controller", required=True,
                   choices=["ftc", "maxpressure", "coslight"])
    e.add_argument("--scenario", required=True)
    e.add_argument("--checkpoint", default=None)
    e.add_argument("--seeds", default="0..9", help="e.g. 0..9 or 0,3,7")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--ftc-duration-s", type=int, default=30)
    e.add_argument("--out", default=None)

    d = sub.add_parser("dump", help="dump collaborator matrices or embeddings")
    d.add_argument("kind", choices=["matrix", "embeddings"])
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--scenario", required=True)
    d.add_argument("--episodes", type=int, default=1)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default=None)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "serve":
        import uvicorn
        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    if args.cmd == "gen-scenario":
        payload = {"kind": args.kind, "rows": args.rows, "cols": args.cols,
                   "seed": args.seed, "demand_scale": args.demand_scale,
                   "episode_s": args.episode_s,
                   "control_interval_s": args.control_interval_s,
                   "out_dir": args.out}
        return _call(args.server, "/scenarios/generate", payload)

    if args.cmd == "train":
        config = {"seed": args.seed, "episodes": args.episodes, "k": args.k,
                  "matrix_mode": args.matrix}
        if args.no_diag:
            config["diag_weight"] = 0.0
        if args.no_sym:
            config["sym_weight"] = 0.0
        if args.no_clip:
            config["use_clip"] = False
        if args.raw_q:
            config["raw_q"] = True
        for key, val in (("lr", args.lr), ("gamma", args.gamma),
                         ("batch_size", args.batch_size),
                         ("eval_interval_steps", args.eval_interval_steps)):
            if val is not None:
                config[key] = val
        payload = {"scenario_path": args.scenario, "config": config,
                   "out_dir": args.out, "resume": args.resume}
        payload = _merge_config_file(args, payload)
        return _call(args.server, "/train", payload)

    if args.cmd == "eval":
        payload = {"controller": args.controller, "scenario_path": args.scenario,
                   "checkpoint": args.checkpoint, "seeds": _parse_seeds(args.seeds),
                   "episodes": args.episodes, "ftc_duration_s": args.ftc_duration_s,
                   "out_dir": args.out}
        return _call(args.server, "/evaluate", payload)

    if args.cmd == "dump":
        payload = {"kind": args.kind, "checkpoint": args.checkpoint,
                   "scenario_path": args.scenario, "episodes": args.episodes,
                   "seed": args.seed, "out_dir": args.out}
        return _call(args.server, "/dump", payload)

    return 2


if __name__ == "__main__":
    sys.exit(main())
