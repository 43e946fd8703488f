"""Command-line front end.

Subcommand = task; a config file supplies the parameter block and flags
override its top-level fields (flags win).  By default the CLI executes
in-process through the same handlers the HTTP service exposes; pass
--server to send the config to a remote instance instead.  Exit codes:
0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import TASK_NAMES
from .service import handle_run, handle_validate

__all__ = ["main"]


def _add_common_flags(sub: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        sub.add_argument("--config", required=True, help="path to the JSON config")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--out", default=None, help="override the output directory root")
    sub.add_argument("--threads", type=int, default=None, help="override worker thread count")
    sub.add_argument("--label", default=None, help="stable run directory name")
    sub.add_argument("--server", default=None, help="run against a remote service URL")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beliefmdp",
        description="belief-MDP reduction toolkit: filters, kernels, continuity "
                    "diagnostics, and belief-grid value iteration")
    subs = parser.add_subparsers(dest="command", required=True)
    for task in TASK_NAMES:
        sub = subs.add_parser(task, help=f"run the {task} task from a config file")
        _add_common_flags(sub)
    val = subs.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--server", default=None)
    srv = subs.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8321)
    return parser


def _load_config_file(path: str):
    """Returns (blob, diagnostics). Parse failures are diagnostics, not raises."""
    p = Path(path)
    if not p.exists():
        return None, [f"config file not found: {path}"]
    try:
        return json.loads(p.read_text()), []
    except json.JSONDecodeError as err:
        return None, [f"config is not valid JSON: {err}"]


def _apply_overrides(blob: dict, args: argparse.Namespace, task: str) -> dict:
    out = dict(blob)
    out["task"] = task
    for key in ("seed", "out", "threads", "label"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def _print_diagnostics(diags: list[str]) -> None:
    print(json.dumps({"diagnostics": diags}, indent=2, sort_keys=True))


def _remote_post(server: str, endpoint: str, blob: dict) -> dict:
    import httpx

    url = server.rstrip("/") + endpoint
    resp = httpx.post(url, json={"config": blob}, timeout=600.0)
    resp.raise_for_status()
    return resp.json()


def _run_validate(args: argparse.Namespace) -> int:
    blob, diags = _load_config_file(args.config)
    if not diags:
        if args.server:
            diags = _remote_post(args.server, "/validate", blob)["diagnostics"]
        else:
            diags = handle_validate(blob).diagnostics
    _print_diagnostics(diags)
    return 2 if diags else 0


def _run_task_command(task: str, args: argparse.Namespace) -> int:
    blob, diags = _load_config_file(args.config)
    if diags:
        _print_diagnostics(diags)
        return 2
    blob = _apply_overrides(blob, args, task)

    start = time.perf_counter()
    if args.server:
        payload = _remote_post(args.server, "/run", blob)
        status = payload["status"]
        diagnostics = payload.get("diagnostics", [])
        artifacts = [(a["filename"], a["text"]) for a in payload.get("artifacts", [])]
    else:
        resp = handle_run(blob)
        status = resp.status
        diagnostics = resp.diagnostics
        artifacts = [(a.filename, a.text) for a in resp.artifacts]
    wall = time.perf_counter() - start

    if status == "validation_error":
        _print_diagnostics(diagnostics)
        return 2

    out_root = blob.get("out") or "out"
    label = blob.get("label") or time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    run_dir = Path(out_root) / task / label
    run_dir.mkdir(parents=True, exist_ok=True)
    for name, text in artifacts:  # single-threaded, ordered writes
        (run_dir / name).write_text(text)
    print(json.dumps({
        "status": status,
        "run_dir": str(run_dir),
        "artifacts": [name for name, _ in artifacts],
        "wall_clock_seconds": round(wall, 3),
    }, indent=2, sort_keys=True))
    return 0 if status == "ok" else 3


def _run_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        return _run_validate(args)
    if args.command == "serve":
        return _run_serve(args)
    return _run_task_command(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
