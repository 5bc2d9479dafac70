"""Command-line front end.

Thin layer over the library: parses flags, loads the config, runs the
requested experiment, and writes CSV/checkpoint artifacts into --out.
With --server URL the same subcommands are executed by a running service
instead (the CLI just posts the config and writes the returned rows), so
local and remote runs produce identical files.

Exit codes: 0 success, 2 config error, 4 I/O error, 3 any other contract
violation.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, config_to_dict, load_config
from .constellation import make_square_qam, superpose
from .csvio import emit_csv
from .errors import ConfigError, ContractError
from .pipeline import (METRICS_COLUMNS, _streams, build_cm_params, build_params,
                       constellation_histogram, evaluate, load_datasets,
                       metrics_row, paf_sweep, rate_sweep, run_experiment,
                       snr_sweep)

DIAG_COLUMNS = ["epoch", "r_norm_sq", "crosscov_max", "entropy_bound"]
HIST_COLUMNS = ["i", "q", "count"]


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--server", help="base URL of a running service; "
                        "run there instead of in-process")

    p = argparse.ArgumentParser(prog="scmsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common],
                   help="train per config, write metrics.csv + checkpoint")
    pe = sub.add_parser("eval", parents=[common],
                        help="evaluate a saved checkpoint")
    pe.add_argument("--checkpoint", required=True)
    for name in ("sweep-paf", "sweep-snr", "sweep-rate"):
        ps = sub.add_parser(name, parents=[common], help=f"run a {name[6:]} sweep")
        ps.add_argument("--values", help="comma-separated grid values")
    ph = sub.add_parser("hist", parents=[common],
                        help="constellation usage histogram of a trained system")
    ph.add_argument("--checkpoint", help="reuse a checkpoint instead of training")
    ph.add_argument("--trials", type=int, default=2000)
    sub.add_parser("dump-constellation", parents=[common],
                   help="write the super-constellation point grid")
    pv = sub.add_parser("serve", help="run the HTTP service")
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--port", type=int, default=8000)
    return p


def _load_cfg(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config:
        return load_config(args.config, overrides)
    try:
        return RunConfig(**overrides)
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc


def _values(args, cast, default):
    if not getattr(args, "values", None):
        return default
    try:
        return [cast(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list {args.values!r}: {exc}") from exc


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _rebuild(cfg: RunConfig, checkpoint_path: str):
    init_rng = np.random.default_rng(_streams(cfg)["init"])
    params = build_params(cfg, init_rng) if cfg.mode == "deepscm" \
        else build_cm_params(cfg, init_rng)
    apply_checkpoint(sorted(params.named_params().items()), load_checkpoint(checkpoint_path))
    return params


def _write_metrics(out: str, rows: list[dict]) -> str:
    path = os.path.join(out, "metrics.csv")
    emit_csv(path, rows, METRICS_COLUMNS)
    return path


# ---------------------------------------------------------------------------
# remote (thin-client) execution


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=None)
    if resp.status_code == 400:
        raise ConfigError(f"server rejected config: {resp.json().get('detail')}")
    if resp.status_code >= 300:
        raise ContractError(f"server error {resp.status_code}: {resp.text}")
    return resp.json()


def _de_null(row: dict) -> dict:
    return {k: (float("nan") if v is None else v) for k, v in row.items()}


def _remote(args, cfg: RunConfig, out: str) -> int:
    body = config_to_dict(cfg)
    if args.command == "train":
        res = _post(args.server, "/runs", body)
        _write_metrics(out, [_de_null(res["row"])])
        emit_csv(os.path.join(out, "decorrelator_diag.csv"),
                 [_de_null(r) for r in res["diag"]], DIAG_COLUMNS)
        print(f"run {res['run_id']}: wrote {out}/metrics.csv")
        return 0
    if args.command.startswith("sweep-"):
        kind = args.command[6:]
        values = _values(args, int if kind == "rate" else float, None)
        res = _post(args.server, f"/sweeps/{kind}",
                    {"config": body, "values": values})
        _write_metrics(out, [_de_null(r) for r in res["rows"]])
        print(f"wrote {out}/metrics.csv ({len(res['rows'])} rows)")
        return 0
    if args.command == "hist":
        run = _post(args.server, "/runs", body)
        res = _post(args.server, f"/runs/{run['run_id']}/histogram",
                    {"trials": args.trials})
        emit_csv(os.path.join(out, "hist.csv"), res["rows"], HIST_COLUMNS)
        print(f"wrote {out}/hist.csv")
        return 0
    if args.command == "dump-constellation":
        res = _post(args.server, "/constellation",
                    {"m1": cfg.m1, "m2": cfg.m2, "paf": cfg.paf, "power": cfg.power})
        emit_csv(os.path.join(out, "constellation.csv"), res["points"], ["i", "q"])
        print(f"wrote {out}/constellation.csv")
        return 0
    raise ConfigError(f"--server does not support {args.command!r}")


# ---------------------------------------------------------------------------
# local execution


def _cmd_train(args, cfg: RunConfig, out: str) -> int:
    result = run_experiment(cfg)
    _write_metrics(out, [metrics_row(cfg, result.metrics)])
    save_checkpoint(os.path.join(out, "checkpoint.bin"),
                    sorted(result.params.named_params().items()))
    if cfg.mode == "deepscm":
        emit_csv(os.path.join(out, "decorrelator_diag.csv"),
                 result.report.stage2_diag, DIAG_COLUMNS)
    m = result.metrics
    print(f"mode={cfg.mode} acc1={m.acc1:.4f} acc2={m.acc2:.4f} "
          f"psnr1={m.psnr1:.2f} psnr2={m.psnr2:.2f}")
    print(f"wrote {out}/metrics.csv, {out}/checkpoint.bin")
    return 0


def _cmd_eval(args, cfg: RunConfig, out: str) -> int:
    params = _rebuild(cfg, args.checkpoint)
    _, test = load_datasets(cfg)
    metrics = evaluate(params, cfg, test,
                       rng=np.random.default_rng(_streams(cfg)["eval"]))
    _write_metrics(out, [metrics_row(cfg, metrics)])
    print(f"acc1={metrics.acc1:.4f} acc2={metrics.acc2:.4f}")
    return 0


def _cmd_sweep(args, cfg: RunConfig, out: str) -> int:
    if args.command == "sweep-paf":
        rows = paf_sweep(cfg, _values(args, float, [0.55, 0.65, 0.76, 0.85, 0.9]))
    elif args.command == "sweep-snr":
        rows = snr_sweep(cfg, _values(args, float, [0.0, 5.0, 10.0, 15.0, 20.0]))
    else:
        rows = rate_sweep(cfg, _values(args, int, [4, 8, 16]))
    path = _write_metrics(out, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_hist(args, cfg: RunConfig, out: str) -> int:
    if args.checkpoint:
        params = _rebuild(cfg, args.checkpoint)
    else:
        params = run_experiment(cfg).params
    rows = constellation_histogram(params, cfg, args.trials)
    emit_csv(os.path.join(out, "hist.csv"), rows, HIST_COLUMNS)
    print(f"wrote {out}/hist.csv ({len(rows)} points)")
    return 0


def _cmd_dump_constellation(args, cfg: RunConfig, out: str) -> int:
    sc = superpose(make_square_qam(cfg.m1), make_square_qam(cfg.m2),
                   cfg.paf, cfg.power)
    rows = [{"i": float(p.real), "q": float(p.imag)} for p in sc.points]
    emit_csv(os.path.join(out, "constellation.csv"), rows, ["i", "q"])
    print(f"wrote {out}/constellation.csv ({len(rows)} points)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def _run(argv) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    cfg = _load_cfg(args)
    out = _outdir(args)
    if args.server:
        return _remote(args, cfg, out)
    if args.command == "train":
        return _cmd_train(args, cfg, out)
    if args.command == "eval":
        return _cmd_eval(args, cfg, out)
    if args.command.startswith("sweep-"):
        return _cmd_sweep(args, cfg, out)
    if args.command == "hist":
        return _cmd_hist(args, cfg, out)
    if args.command == "dump-constellation":
        return _cmd_dump_constellation(args, cfg, out)
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    try:
        return _run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
