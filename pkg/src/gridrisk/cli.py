"""Command-line client for the gridrisk service.

The CLI talks to the same HTTP API the service exposes.  By default it
mounts the application in-process (no server required); ``--server`` points
it at a running instance instead.  Exit codes: 0 success, 2 configuration
errors (bad flags, missing or invalid scenario), 1 runtime failures.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__

_BASE_URL = "http://gridrisk.local"


def _call(method: str, path: str, payload: dict | None, server: str | None) -> tuple[int, dict]:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.request(method, path, json=payload)
            return response.status_code, _body(response)

    from .service.app import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url=_BASE_URL, timeout=None) as client:
            response = await client.request(method, path, json=payload)
            return response.status_code, _body(response)

    return asyncio.run(go())


def _body(response: httpx.Response) -> dict:
    try:
        return response.json()
    except ValueError:
        return {"detail": response.text}


def _fail(status: int, body: dict) -> int:
    detail = body.get("detail", body)
    if isinstance(detail, list):  # pydantic validation errors: name the field
        parts = []
        for err in detail:
            loc = ".".join(str(p) for p in err.get("loc", []) if p != "body")
            parts.append(f"{loc}: {err.get('msg', 'invalid')}")
        detail = "; ".join(parts)
    print(f"error: {detail}", file=sys.stderr)
    return 2 if status in (400, 422) else 1


def _load_scenario(path_str: str) -> dict | None:
    path = Path(path_str)
    if not path.is_file():
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        return None
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        print(f"error: scenario file {path} is not valid JSON: {exc}", file=sys.stderr)
        return None


def _write_files(out_dir: str, files: dict[str, str]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out / name).write_bytes(content.encode("utf-8"))


def _common_payload(args) -> dict:
    payload: dict = {"seed": args.seed}
    if args.cell_size is not None:
        payload["cell_size"] = args.cell_size
    if args.tau is not None:
        payload["tau"] = args.tau
    return payload


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    if scenario is None:
        return 2
    payload = _common_payload(args)
    payload.update({"scenario": scenario, "mode": args.mode})
    if args.snapshot_epochs:
        payload["snapshot_epochs"] = args.snapshot_epochs
    status, body = _call("POST", "/run", payload, args.server)
    if status != 200:
        return _fail(status, body)
    _write_files(args.out, body["files"])
    summary = body["summary"]
    print(
        f"mode={summary['mode']} seed={summary['seed']} epochs={summary['epochs']} "
        f"acc_mean={summary['final_accumulated_mean']:.6g} "
        f"acc_var={summary['final_accumulated_variance']:.6g} "
        f"acc_plus_2sigma={summary['final_plus_two_sigma']:.6g}"
    )
    print(f"wrote {', '.join(sorted(body['files']))} to {args.out}")
    return 0


def cmd_compare(args) -> int:
    scenario = _load_scenario(args.scenario)
    if scenario is None:
        return 2
    payload = _common_payload(args)
    payload["scenario"] = scenario
    status, body = _call("POST", "/compare", payload, args.server)
    if status != 200:
        return _fail(status, body)
    _write_files(args.out, body["files"])
    summary = body["summary"]
    for mode in ("ego", "coop"):
        s = summary[mode]
        print(
            f"{mode}: acc_mean={s['final_accumulated_mean']:.6g} "
            f"acc_var={s['final_accumulated_variance']:.6g} "
            f"acc_plus_2sigma={s['final_plus_two_sigma']:.6g}"
        )
    print(
        f"delta (ego - coop): mean={summary['final_mean_delta']:.6g} "
        f"variance={summary['final_variance_delta']:.6g}"
    )
    print(f"wrote {', '.join(sorted(body['files']))} to {args.out}")
    return 0


def cmd_dump_schema(args) -> int:
    status, body = _call("GET", "/scenario-schema", None, args.server)
    if status != 200:
        return _fail(status, body)
    print(json.dumps(body, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("gridrisk.service.app:app", host=args.host, port=args.port)
    return 0


def _parse_epochs(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid epoch list {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridrisk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridrisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", required=True, help="path to a scenario JSON file")
        p.add_argument("--seed", type=int, default=1729, help="root seed for all randomness")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--cell-size", type=float, default=None, help="override grid cell size (m)")
        p.add_argument("--tau", type=float, default=None, help="override epoch duration (s)")
        p.add_argument("--server", default=None, help="base URL of a running service (default: in-process)")

    run_p = sub.add_parser("run", help="run one scenario and write risk.csv / run.json / snapshots")
    common(run_p)
    run_p.add_argument("--mode", choices=["ego", "coop"], default="coop")
    run_p.add_argument(
        "--snapshot-epochs",
        type=_parse_epochs,
        default=[],
        help="comma-separated epochs to dump as map_<epoch>.csv",
    )
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="run ego-only and cooperative modes and write compare.csv")
    common(cmp_p)
    cmp_p.set_defaults(func=cmd_compare)

    schema_p = sub.add_parser("dump-scenario-schema", help="print the scenario JSON schema")
    schema_p.add_argument("--server", default=None)
    schema_p.set_defaults(func=cmd_dump_schema)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
