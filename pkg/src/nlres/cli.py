"""Command-line entry point.

``nlres`` either executes commands in-process or, given ``--url``, forwards
them to a running service and relays its reported exit code, so scripts
behave the same against both backends.  Exit codes: 0 success, 1 validation
failure, 2 I/O problem, 3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import EXIT_IO, NlresError
from .runner import COMPARISON_NAME, cmd_gen_model, cmd_oracle, cmd_run, cmd_validate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlres",
        description="Non-local optical response traces for stored few-level models.",
    )
    parser.add_argument(
        "--url",
        default=None,
        help="base URL of a running nlres service; commands run remotely",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a stored NLRM/1 model directory")
    p.add_argument("model_dir", help="model directory to check")

    p = sub.add_parser("run", help="compute the traces requested by a run config")
    p.add_argument("config", help="run config file")

    p = sub.add_parser("gen-model", help="build an NLRM/1 model from a recipe")
    p.add_argument("recipe", help="recipe file, or the name of a shipped preset")
    p.add_argument("out_dir", help="target model directory")

    p = sub.add_parser(
        "oracle", help="cross-check perturbative traces against the propagated reference"
    )
    p.add_argument("config", help="run config file")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)

    return parser


def _print_comparison(out_dir: Path) -> int:
    worst = 0
    for line in (out_dir / COMPARISON_NAME).read_text().splitlines():
        if line.startswith("#"):
            continue
        order, err, tol, verdict, basis = line.split(",")
        print(
            f"order {order}: rel_l2 {float(err):.3e} against {basis} "
            f"(tolerance {float(tol):.1e}) {verdict}"
        )
        if verdict != "pass":
            worst = 1
    return worst


def _run_local(args: argparse.Namespace) -> int:
    if args.command == "validate":
        code, report = cmd_validate(args.model_dir)
        print(report.rstrip("\n"))
        return code
    if args.command == "run":
        out = cmd_run(args.config)
        print(out)
        return 0
    if args.command == "gen-model":
        out = cmd_gen_model(args.recipe, args.out_dir)
        print(out)
        return 0
    if args.command == "oracle":
        out = cmd_oracle(args.config)
        print(out)
        return _print_comparison(out)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    raise AssertionError(f"unhandled command {args.command}")


def _run_remote(args: argparse.Namespace, base: str) -> int:
    import httpx

    base = base.rstrip("/")
    if args.command == "validate":
        payload = {"model_dir": str(Path(args.model_dir).resolve())}
        endpoint = "/validate"
    elif args.command == "run":
        payload = {"config_path": str(Path(args.config).resolve())}
        endpoint = "/run"
    elif args.command == "oracle":
        payload = {"config_path": str(Path(args.config).resolve())}
        endpoint = "/oracle"
    elif args.command == "gen-model":
        payload = {
            "recipe": args.recipe if not Path(args.recipe).is_file() else str(Path(args.recipe).resolve()),
            "out_dir": str(Path(args.out_dir).resolve()),
        }
        endpoint = "/gen-model"
    else:
        print("error: 'serve' cannot be forwarded to a service", file=sys.stderr)
        return 2

    try:
        response = httpx.post(base + endpoint, json=payload, timeout=None)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {base}: {exc}", file=sys.stderr)
        return EXIT_IO
    body = response.json()
    if response.status_code == 400:
        print(f"error: {body['error']}", file=sys.stderr)
        return int(body["exit_code"])
    response.raise_for_status()

    if args.command == "validate":
        print(body["report"].rstrip("\n"))
        return 0 if body["passed"] else 1
    if args.command == "gen-model":
        print(body["model_dir"])
        return 0
    print(body["output_dir"])
    if args.command == "oracle":
        return _print_comparison(Path(body["output_dir"]))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.url:
            return _run_remote(args, args.url)
        return _run_local(args)
    except NlresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
