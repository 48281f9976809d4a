"""Command-line front end.

Exit codes: 0 success, 1 a theorem check exceeded its tolerance, 2 bad input.

Default option values may be put in a JSON file named by ``EBCHAN_CONFIG``;
its keys are a subset of ``restarts``, ``iters``, ``tol``, ``seed``,
``format``. Command-line flags win over the file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import SCHEMA, __version__, qmath
from .additivity import (
    DELTA_FLOOR,
    IDENTITY_TOL,
    superadditivity_floor,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)
from .channels import (
    TP_TOL,
    apply,
    choi_partial_transpose_min_eig,
    is_entanglement_breaking,
    random_channel,
    validate_cpt,
)
from .errors import EbchanError
from .optimize import (
    OptimizerConfig,
    chi_star,
    entanglement_of_formation,
    eof_wootters_2x2,
    min_output_entropy,
)
from .serialize import (
    CSV_COLUMNS,
    channel_to_dict,
    encode_state,
    optresult_to_dict,
    parse_channel_file,
    parse_state_file,
    report_csv_row,
    report_to_dict,
)

CONFIG_ENV = "EBCHAN_CONFIG"
CONFIG_KEYS = {"restarts", "iters", "tol", "seed", "format"}
THEOREMS = ("thm1", "thm2", "thm3", "floor")
EXIT_OK, EXIT_SLACK, EXIT_INPUT = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    out: str | None = None
    fmt: str = "json"
    seed: int = 0
    theorem: str | None = None
    pairs: int = 20
    kind: str = "general"
    d_in: int = 2
    d_out: int = 2
    rank: int = 2


def tolerance_set() -> dict:
    return {"eps_herm": qmath.EPS_HERM, "eps_trace": qmath.EPS_TRACE, "eps_psd": qmath.EPS_PSD,
            "tp_tol": TP_TOL, "identity_tol": IDENTITY_TOL, "delta_floor": dict(DELTA_FLOOR)}


def _envelope(cfg: RunConfig, body: dict, started: float, wall: float) -> dict:
    """Wrap a payload with provenance. Only ``timestamp`` varies between identical runs."""
    return {
        "schema": SCHEMA,
        "tool_version": __version__,
        "command": cfg.command,
        "seed": cfg.seed,
        "optimizer": {"restarts": cfg.optimizer.restarts, "max_iters": cfg.optimizer.max_iters,
                      "tol": cfg.optimizer.tol, "seed": cfg.optimizer.seed},
        "tolerances": tolerance_set(),
        **body,
        "timestamp": {"utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
                      "wall_time_s": wall},
    }


def _pair_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _fuzz_pair(theorem: str, pair_seed: int):
    psi = random_channel("general", 2, 2, 2, pair_seed)
    if theorem in ("thm1", "thm2"):
        phi = random_channel("eb_holevo", 2, 2, 3, pair_seed + 1)
    else:
        phi = random_channel("general", 2, 2, 2, pair_seed + 1)
    return psi, phi


_VERIFY = {"thm1": verify_theorem1, "thm2": verify_theorem2, "thm3": verify_theorem3,
           "floor": superadditivity_floor}


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def execute(cfg: RunConfig) -> tuple[int, str]:
    """Run one command and return ``(exit_code, rendered_output)``.

    Input errors propagate as :class:`EbchanError`; :func:`run` maps them to exit code 2.
    """
    started = time.time()
    t0 = time.perf_counter()
    opt = cfg.optimizer
    status = EXIT_OK
    csv_rows = None
    cmd = cfg.command
    if cmd == "validate":
        ch = parse_channel_file(cfg.inputs[0])
        diag = validate_cpt(ch)
        body = {"channel": {"type": type(ch).__name__, "d_in": ch.d_in, "d_out": ch.d_out},
                "tp_residual": diag.tp_residual, "choi_min_eig": diag.choi_min_eig,
                "passed": diag.passed, "eb_status": is_entanglement_breaking(ch).value,
                "choi_pt_min_eig": choi_partial_transpose_min_eig(ch)}
        status = EXIT_OK if diag.passed else EXIT_SLACK
    elif cmd == "apply":
        ch = parse_channel_file(cfg.inputs[0])
        rho = parse_state_file(cfg.inputs[1])
        body = {"output": encode_state(apply(ch, rho))}
    elif cmd == "min-entropy":
        body = {"result": optresult_to_dict(min_output_entropy(parse_channel_file(cfg.inputs[0]), opt))}
    elif cmd == "chi-star":
        body = {"result": optresult_to_dict(chi_star(parse_channel_file(cfg.inputs[0]), opt))}
    elif cmd == "eof":
        rho = parse_state_file(cfg.inputs[0])
        body = {"result": optresult_to_dict(entanglement_of_formation(rho, opt))}
        if tuple(rho.dims) == (2, 2):
            body["wootters"] = eof_wootters_2x2(rho)
    elif cmd == "verify":
        psi = parse_channel_file(cfg.inputs[0])
        phi = parse_channel_file(cfg.inputs[1])
        rep = _VERIFY[cfg.theorem](psi, phi, opt)
        body = {"report": report_to_dict(rep)}
        csv_rows = [report_csv_row(rep)]
        status = EXIT_OK if rep.passed else EXIT_SLACK
    elif cmd == "fuzz":
        reports, rows = [], []
        for k in range(cfg.pairs):
            ps = _pair_seed(cfg.seed, k)
            psi, phi = _fuzz_pair(cfg.theorem, ps)
            rep = _VERIFY[cfg.theorem](psi, phi, opt.replace(seed=ps))
            reports.append({"pair": k, "pair_seed": ps, "report": report_to_dict(rep)})
            rows.append(report_csv_row(rep))
            if not rep.passed:
                status = EXIT_SLACK
        body = {"theorem": cfg.theorem, "pairs": reports}
        csv_rows = rows
    elif cmd == "gen":
        ch = random_channel(cfg.kind, cfg.d_in, cfg.d_out, cfg.rank, cfg.seed)
        return EXIT_OK, json.dumps(channel_to_dict(ch), indent=1) + "\n"
    else:
        raise EbchanError(f"unknown command {cmd!r}")
    if cfg.fmt == "csv":
        if csv_rows is None:
            raise EbchanError(f"--format csv is only available for verify and fuzz, not {cmd}")
        return status, _csv_text(csv_rows)
    doc = _envelope(cfg, body, started, time.perf_counter() - t0)
    return status, json.dumps(doc, indent=1) + "\n"


def run(cfg: RunConfig) -> int:
    try:
        status, text = execute(cfg)
    except EbchanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


def _load_defaults(env=None) -> dict:
    env = os.environ if env is None else env
    path = env.get(CONFIG_ENV)
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise EbchanError(f"{path}: config must be a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise EbchanError(f"{path}: unknown config field(s) {unknown}")
    return data


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    d = {"restarts": 32, "iters": 2000, "tol": 1e-9, "seed": 0, "format": None, **(defaults or {})}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--restarts", type=int, default=d["restarts"])
    common.add_argument("--iters", type=int, default=d["iters"])
    common.add_argument("--tol", type=float, default=d["tol"])
    common.add_argument("--seed", type=int, default=d["seed"])
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=d["format"])

    parser = argparse.ArgumentParser(prog="ebchan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ebchan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", parents=[common], help="check a channel file")
    p.add_argument("channel")
    p = sub.add_parser("apply", parents=[common], help="apply a channel to a state file")
    p.add_argument("channel")
    p.add_argument("state")
    p = sub.add_parser("min-entropy", parents=[common], help="minimum output entropy")
    p.add_argument("channel")
    p = sub.add_parser("chi-star", parents=[common], help="Holevo capacity")
    p.add_argument("channel")
    p = sub.add_parser("eof", parents=[common], help="entanglement of formation of a bipartite state")
    p.add_argument("state")
    p = sub.add_parser("verify", parents=[common], help="check one theorem on a channel pair")
    p.add_argument("theorem", choices=THEOREMS)
    p.add_argument("psi")
    p.add_argument("phi")
    p = sub.add_parser("fuzz", parents=[common], help="check a theorem on random qubit pairs")
    p.add_argument("theorem", choices=THEOREMS)
    p.add_argument("--pairs", type=int, default=20)
    p = sub.add_parser("gen", parents=[common], help="emit a random channel spec")
    p.add_argument("kind", choices=("general", "eb_holevo"))
    p.add_argument("--d-in", type=int, default=2)
    p.add_argument("--d-out", type=int, default=2)
    p.add_argument("--rank", type=int, default=2, help="Kraus rank, or POVM size for eb_holevo")
    return parser


def config_from_args(args) -> RunConfig:
    inputs = [getattr(args, k) for k in ("channel", "state", "psi", "phi") if getattr(args, k, None)]
    fmt = args.format or ("csv" if args.command == "fuzz" else "json")
    opt = OptimizerConfig(restarts=args.restarts, max_iters=args.iters, tol=args.tol, seed=args.seed)
    return RunConfig(
        command=args.command, inputs=inputs, optimizer=opt, out=args.out, fmt=fmt, seed=args.seed,
        theorem=getattr(args, "theorem", None), pairs=getattr(args, "pairs", 20),
        kind=getattr(args, "kind", "general"), d_in=getattr(args, "d_in", 2),
        d_out=getattr(args, "d_out", 2), rank=getattr(args, "rank", 2))


def main(argv=None) -> int:
    try:
        defaults = _load_defaults()
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    parser = build_parser(defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = config_from_args(args)
    except EbchanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
