"""Command-line frontend.

Commands mirror the workbench operations: gen-dataset, train-repr, run,
compare, export, plus serve (start the HTTP service). Every command runs
locally by default; with --server URL it becomes a thin client that posts
the same request to a running service and waits for the result.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Optional

from . import __version__, workbench
from .config import load, parse
from .errors import ConfigError, NumericError

POLL_INTERVAL = 0.1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goalex", description="goal-exploration workbench")
    parser.add_argument("--version", action="version", version=f"goalex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument("--config", required=config_required, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory or file")
        p.add_argument("--server", default=None, help="service URL; run remotely instead of locally")

    p = sub.add_parser("gen-dataset", help="render a scene image dataset")
    common(p)
    p.add_argument("--n-images", type=int, default=None, help="override the configured image count")
    p.add_argument("--seed-override", type=int, default=None, help="replace the config seed list")

    p = sub.add_parser("train-repr", help="train the goal-space model on a dataset")
    common(p)
    p.add_argument("--dataset", default=None, help="dataset file (defaults to the configured path)")

    p = sub.add_parser("run", help="execute the configured exploration runs")
    common(p)
    p.add_argument("--seed-override", type=int, default=None, help="run only this seed")
    p.add_argument("--strategy", default=None, help="override the configured strategy")

    p = sub.add_parser("compare", help="aggregate results across run directories")
    p.add_argument("run_dirs", nargs="+", help="run directories with summary.csv")
    p.add_argument("--out", default=None, help="where to write aggregate CSVs")
    p.add_argument("--server", default=None)

    p = sub.add_parser("export", help="export scatter/curve CSVs from a history file")
    p.add_argument("history", help="history.csv from a run")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--server", default=None)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


# ---------------------------------------------------------------------------
# remote mode

class Remote:
    """Thin HTTP client over the service; raises the same error types the
    local path does, so exit-code mapping stays in one place."""

    def __init__(self, client):
        self.client = client

    def _raise_for(self, payload: dict) -> None:
        code = payload.get("error_code")
        detail = payload.get("detail", "remote error")
        if code == 2:
            raise ConfigError(detail)
        if code == 3:
            raise NumericError(detail)
        raise OSError(detail)

    def call(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        if method == "get":
            response = self.client.get(path)
        else:
            response = self.client.post(path, json=payload or {})
        try:
            body = response.json()
        except Exception:
            body = {"detail": response.text}
        if response.status_code >= 400:
            self._raise_for(body if isinstance(body, dict) else {})
        return body

    def wait(self, job_id: str) -> dict:
        while True:
            job = self.call("get", f"/jobs/{job_id}")
            state = job["state"]
            if state == "done":
                return job.get("result") or {}
            if state == "error":
                self._raise_for(job)
            time.sleep(POLL_INTERVAL)


def _make_remote(args, injected_client) -> Optional[Remote]:
    if injected_client is not None:
        return Remote(injected_client)
    if getattr(args, "server", None):
        import httpx

        return Remote(httpx.Client(base_url=args.server, timeout=None))
    return None


def _read_config_text(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc


# ---------------------------------------------------------------------------
# command implementations

def _cmd_gen_dataset(args, remote: Optional[Remote]) -> int:
    if remote is not None:
        body = remote.call(
            "post",
            "/datasets",
            {
                "config_text": _read_config_text(args.config),
                "out_path": args.out,
                "n_images": args.n_images,
                "seed_override": args.seed_override,
            },
        )
        print(f"wrote {body['count']} images to {body['path']}")
        return 0
    cfg = load(args.config)
    if args.seed_override is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seeds=(args.seed_override,))
    path, count = workbench.gen_dataset(cfg, out_path=args.out, n_images=args.n_images)
    print(f"wrote {count} images to {path}")
    return 0


def _cmd_train_repr(args, remote: Optional[Remote]) -> int:
    if remote is not None:
        body = remote.call(
            "post",
            "/representations",
            {
                "config_text": _read_config_text(args.config),
                "dataset_path": args.dataset,
                "out_dir": args.out,
            },
        )
        result = remote.wait(body["job_id"])
        print(f"checkpoint: {result['checkpoint']}")
        print(f"curve: {result['curve']}")
        return 0
    cfg = load(args.config)
    result = workbench.train_representation(cfg, dataset_path=args.dataset, out_dir=args.out)
    print(f"checkpoint: {result['checkpoint']}")
    print(f"curve: {result['curve']}")
    return 0


def _cmd_run(args, remote: Optional[Remote]) -> int:
    if remote is not None:
        body = remote.call(
            "post",
            "/runs",
            {
                "config_text": _read_config_text(args.config),
                "out_dir": args.out,
                "seed_override": args.seed_override,
                "strategy_override": args.strategy,
            },
        )
        result = remote.wait(body["job_id"])
        for row in result["summary"]:
            print(f"{row['strategy']} seed {row['seed']}: final coverage {row['final_coverage']}")
        return 0
    cfg = load(args.config)
    rows = workbench.run_experiment(
        cfg,
        out_dir=args.out,
        seed_override=args.seed_override,
        strategy_override=args.strategy,
    )
    for strategy, seed, cov in rows:
        print(f"{strategy} seed {seed}: final coverage {cov}")
    return 0


def _cmd_compare(args, remote: Optional[Remote]) -> int:
    if remote is not None:
        body = remote.call("post", "/compare", {"run_dirs": args.run_dirs, "out_dir": args.out})
        for row in body["table"]:
            print(
                f"{row['strategy']}: mean {row['mean_final_coverage']:.2f} "
                f"std {row['std_final_coverage']:.2f} (n={row['n']})"
            )
        return 0
    result = workbench.compare(args.run_dirs, out_dir=args.out)
    for strategy, mean, std, n in result["table"]:
        print(f"{strategy}: mean {mean:.2f} std {std:.2f} (n={n})")
    return 0


def _cmd_export(args, remote: Optional[Remote]) -> int:
    if remote is not None:
        body = remote.call("post", "/export", {"history_path": args.history, "out_dir": args.out})
        print(f"scatter: {body['scatter_path']}")
        print(f"curve: {body['curve_path']}")
        return 0
    scatter, curve = workbench.export_history(args.history, args.out)
    print(f"scatter: {scatter}")
    print(f"curve: {curve}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None, client=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        remote = _make_remote(args, client)
        if args.command == "gen-dataset":
            return _cmd_gen_dataset(args, remote)
        if args.command == "train-repr":
            return _cmd_train_repr(args, remote)
        if args.command == "run":
            return _cmd_run(args, remote)
        if args.command == "compare":
            return _cmd_compare(args, remote)
        if args.command == "export":
            return _cmd_export(args, remote)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
