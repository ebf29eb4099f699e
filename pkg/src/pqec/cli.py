"""Command-line entry point: ``pqec <subcommand> --config FILE [options]``.

Exit codes: 0 success, 1 channel failed validation, 2 configuration or input
error, 3 compile failure (reachability gap; the fit is dumped to stderr).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channels import CHANNEL_FORMAT, ChannelError, channel_from_dict
from .compiler import CompileError
from .config import STUDIES, Config, ConfigError, load_config
from .studies import (
    DynamicsSpec,
    ExtractSpec,
    FitStudySpec,
    Report,
    ResourceSpec,
    run_channel_fit_study,
    run_dynamics_study,
    run_extract,
    run_resource_study,
    run_single_fit,
    write_report,
)
from .surface_code import CodeError
from .resources import BudgetError

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_COMPILE = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STUDIES:
        p = sub.add_parser(name, help=f"run the {name} study")
        p.add_argument("--config", type=Path, help="TOML config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("results"), help="output root")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set section.key=value after parsing (repeatable)")
    v = sub.add_parser("validate-channel", help="check a channel JSON file for CPTP")
    v.add_argument("path", type=Path)
    v.add_argument("--tol", type=float, default=1e-10)
    return parser


def run_study(cfg: Config) -> Report:
    s = cfg.sections
    if cfg.study == "extract":
        e = s["extract"]
        return run_extract(ExtractSpec(e["distance"], cfg.noise(), e["method"], e["samples"],
                                       cfg.seed, e["frame"]))
    if cfg.study == "fit":
        f = s["fit"]
        if f["mode"] == "single":
            if len(f["gamma_tau"]) != 1 and f["target"] == "dephasing":
                raise ConfigError("fit.gamma_tau: single mode takes one value")
            strength = f["gamma_tau"][0] if f["target"] == "dephasing" else f["strength"]
            return run_single_fit(f["target"], strength, f["library"], f["eta"],
                                  f["lambda_unit"], f["allow_gap"])
        if f["library"] == "reset_feedback":
            raise ConfigError("fit.library: study mode uses Pauli-frame recovery policies")
        return run_channel_fit_study(FitStudySpec(
            f["gamma_tau"], f["mismatch"], cfg.noise(), f["distance_A"], f["distance_B"],
            cfg.ansatz(), f["library"], f["eta"], f["workers"]))
    if cfg.study == "dynamics":
        d = s["dynamics"]
        return run_dynamics_study(DynamicsSpec(
            cfg.exciton(), d["tau"], d["m"], cfg.noise(), d["distance_A"], d["distance_B"],
            cfg.ansatz(), d["mismatch_factor"], d["eta"], d["diamond_restarts"], cfg.seed,
            d["p_logical_B"]))
    r, b = s["resources"], s["budget"]
    return run_resource_study(ResourceSpec(
        cfg.ansatz(), r["n_logical"], b["zeta"], b["epsilon"], b["m"], r["delta_tar"],
        r["per_step"], b["eps_prog_A"], b["nu"], b["eps_prog_B"],
        cfg.exciton() if r["use_model"] else None, r["tau"]))


def validate_channel(path: Path, tol: float = 1e-10, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict) or doc.get("format", CHANNEL_FORMAT) != CHANNEL_FORMAT:
            raise ChannelError(f"expected a {CHANNEL_FORMAT} document")
        ch = channel_from_dict(doc)
        report = ch.validate(tol)
    except (OSError, ValueError, TypeError) as exc:
        print(f"pqec validate-channel: {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    row = report.ptm_first_row
    print(f"min_choi_eigenvalue {report.min_choi_eigenvalue:.6e}", file=out)
    print(f"tp_defect {report.tp_defect:.6e}", file=out)
    print("ptm_first_row " + ("n/a" if row is None else
                              " ".join(f"{v:.12g}" for v in np.asarray(row))), file=out)
    print("CPTP" if report.ok else
          "NOT CPTP: " + ", ".join(k for k, ok in (("CP", report.cp), ("TP", report.tp)) if not ok),
          file=out)
    return EXIT_OK if report.ok else EXIT_INVALID


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate-channel":
        return validate_channel(args.path, args.tol)
    try:
        cfg = load_config(args.command, args.config, args.override, args.seed)
        report = run_study(cfg)
    except (ConfigError, CodeError, BudgetError, ChannelError) as exc:
        print(f"pqec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompileError as exc:
        print(f"pqec {args.command}: compile failure: {exc}", file=sys.stderr)
        print(json.dumps(exc.fit.to_dict(), indent=2), file=sys.stderr)
        return EXIT_COMPILE
    out = args.out / cfg.study / cfg.label
    manifest = {"label": cfg.label, "seed": cfg.seed, "config": cfg.resolved(),
                "overrides": list(cfg.overrides)}
    files = write_report(report, out, manifest)
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
