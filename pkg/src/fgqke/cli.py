"""Command-line client for the code-construction and sweep service.

The CLI only marshals flags into service requests.  By default it talks to
an in-process instance of the application (no socket); ``--server URL``
targets a running instance instead, and ``serve`` starts one.

A config file may supply defaults as flat ``key = value`` lines whose keys
mirror the long flag names (``pe-start = 0.02``); values given on the
command line override the file.  Blank lines and ``#`` comments are
ignored.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Any

FAMILY_CHOICES = ("eg1", "eg2", "pg1", "pg2")
TABLE_CHOICES = ("table1", "table2", "table3")
MODE_CHOICES = ("original", "improved")


class CliError(Exception):
    """A user-facing CLI failure with an exit message."""


class ServiceClient:
    """POSTs requests either in-process or to a remote server."""

    def __init__(self, server: str | None):
        if server is None:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from . import service

            self._client = TestClient(service.app)
        else:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)

    def get(self, path: str) -> dict[str, Any]:
        return self._handle(self._client.get(path))

    def post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        return self._handle(self._client.post(path, json=payload))

    @staticmethod
    def _handle(response) -> dict[str, Any]:
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise CliError(f"request failed ({response.status_code}): {detail}")
        return response.json()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgqke",
        description="Finite-geometry codes and key-expansion simulation.",
    )
    parser.add_argument(
        "--config", help="flat key = value file supplying flag defaults"
    )
    parser.add_argument(
        "--server", help="base URL of a running service (default: in-process)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="construct a code and save its bundle")
    build.add_argument("--family", choices=FAMILY_CHOICES)
    build.add_argument("--p", type=int)
    build.add_argument("--s", type=int)
    build.add_argument("--csp", type=int)
    build.add_argument("--rsp", type=int)
    build.add_argument("--out", help="bundle output directory")

    verify = sub.add_parser("verify", help="check a saved bundle's structure")
    verify.add_argument("--code", help="bundle directory")

    tables = sub.add_parser("tables", help="emit a code-family parameter table")
    tables.add_argument("--set", dest="table_set", choices=TABLE_CHOICES)
    tables.add_argument("--max-n", type=int)

    sweep = sub.add_parser("sweep", help="Monte Carlo channel sweep to CSV")
    sweep.add_argument("--code", help="bundle directory")
    sweep.add_argument("--pe-start", type=float)
    sweep.add_argument("--pe-end", type=float)
    sweep.add_argument("--pe-step", type=float)
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--epsilon", type=float)
    sweep.add_argument("--mode", choices=MODE_CHOICES)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument(
        "--full-sift",
        action="store_const",
        const=True,
        help="simulate transmission and sifting in every trial",
    )
    sweep.add_argument("--out", help="output CSV path")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def read_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# Flag name -> (attribute, converter) for config-file lookups.
_CONFIG_FIELDS: dict[str, tuple[str, Any]] = {
    "family": ("family", str),
    "p": ("p", int),
    "s": ("s", int),
    "csp": ("csp", int),
    "rsp": ("rsp", int),
    "out": ("out", str),
    "code": ("code", str),
    "set": ("table_set", str),
    "max-n": ("max_n", int),
    "pe-start": ("pe_start", float),
    "pe-end": ("pe_end", float),
    "pe-step": ("pe_step", float),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "epsilon": ("epsilon", float),
    "mode": ("mode", str),
    "workers": ("workers", int),
    "full-sift": ("full_sift", lambda s: s.lower() in ("1", "true", "yes", "on")),
    "server": ("server", str),
}


def apply_config(args: argparse.Namespace) -> None:
    if args.config is None:
        return
    values = read_config(args.config)
    unknown = set(values) - set(_CONFIG_FIELDS)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, raw in values.items():
        attr, convert = _CONFIG_FIELDS[key]
        if getattr(args, attr, None) is None and hasattr(args, attr):
            try:
                setattr(args, attr, convert(raw))
            except ValueError as exc:
                raise CliError(f"config key {key!r}: bad value {raw!r}") from exc


def require(args: argparse.Namespace, **fields: str) -> None:
    missing = [flag for attr, flag in fields.items() if getattr(args, attr) is None]
    if missing:
        raise CliError(f"missing required flags: {', '.join(sorted(missing))}")


def default(value, fallback):
    return fallback if value is None else value


def pe_list(start: float, end: float, step: float) -> list[float]:
    if step <= 0:
        raise CliError(f"--pe-step must be positive, got {step}")
    if end < start:
        raise CliError(f"--pe-end {end} is below --pe-start {start}")
    count = math.floor((end - start) / step + 1e-9) + 1
    return [round(start + i * step, 10) for i in range(count)]


def cmd_build(client: ServiceClient, args: argparse.Namespace) -> int:
    require(args, family="--family", s="--s", out="--out")
    response = client.post(
        "/build",
        {
            "family": args.family,
            "p": default(args.p, 2),
            "s": args.s,
            "csp": default(args.csp, 1),
            "rsp": default(args.rsp, 1),
            "out_dir": args.out,
        },
    )
    print(
        f"built {response['label']} (n={response['n']}, m={response['m']}, "
        f"c={response['c']}, nominal rate {response['rate']:.4f}) -> {response['out_dir']}"
    )
    return 0


def cmd_verify(client: ServiceClient, args: argparse.Namespace) -> int:
    require(args, code="--code")
    response = client.post("/verify", {"code_dir": args.code})
    for name, ok in response["checks"].items():
        print(f"{name}: {'ok' if ok else 'FAILED'}")
    if response["passed"]:
        print(f"{response['label']}: all checks passed")
        return 0
    print(f"{response['label']}: verification FAILED")
    return 1


def cmd_tables(client: ServiceClient, args: argparse.Namespace) -> int:
    require(args, table_set="--set")
    response = client.post(
        "/tables", {"set_name": args.table_set, "max_n": args.max_n}
    )
    sys.stdout.write(response["csv"])
    return 0


def cmd_sweep(client: ServiceClient, args: argparse.Namespace) -> int:
    require(
        args,
        code="--code",
        pe_start="--pe-start",
        pe_end="--pe-end",
        pe_step="--pe-step",
        out="--out",
    )
    response = client.post(
        "/sweep",
        {
            "code_dir": args.code,
            "pe_values": pe_list(args.pe_start, args.pe_end, args.pe_step),
            "trials": default(args.trials, 10_000),
            "seed": default(args.seed, 0),
            "epsilon": default(args.epsilon, 1e-6),
            "mode": default(args.mode, "improved"),
            "workers": default(args.workers, 1),
            "full_sift": default(args.full_sift, False),
        },
    )
    Path(args.out).write_text(response["csv"])
    print(f"wrote {response['rows']} rows to {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from . import service

    uvicorn.run(service.app, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_config(args)
        if args.command == "serve":
            return cmd_serve(args)
        client = ServiceClient(args.server)
        handler = {
            "build": cmd_build,
            "verify": cmd_verify,
            "tables": cmd_tables,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(client, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
