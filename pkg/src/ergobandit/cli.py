"""Command line entry point: ``ergobandit {run,sweep,check,mean-field}``.

Exit codes: 0 success, 2 configuration or I/O error, 3 internal-consistency
error, 4 a verifier reported ``fail`` and ``--strict`` was given.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import bandit, harness
from .report import FAIL, HorizonOverrun, InternalConsistencyError

log = logging.getLogger("ergobandit")

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL, EXIT_STRICT = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ergobandit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("run", "simulate one replica"),
                       ("sweep", "simulate all replicas and aggregate"),
                       ("check", "run the condition and inequality verifiers"),
                       ("mean-field", "deterministic mean-field trajectory")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--out", help="override the output directory")
        s.add_argument("--workers", type=int, help="replica worker threads")
        s.add_argument("--strict", action="store_true",
                       help="exit 4 when any verifier reports fail")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _strict_code(reports, strict: bool) -> int:
    if strict and any(r.verdict == FAIL for r in reports):
        return EXIT_STRICT
    return EXIT_OK


def cmd_run(cfg, out, args):
    rec = harness.simulate(cfg, 0)
    reports = harness.run_reports(rec, cfg)
    harness.write_csv(out / "trajectory.csv", bandit.TRAJECTORY_COLUMNS,
                      harness.trajectory_rows(rec))
    harness.write_json(out / "report.json", harness.run_report_dict(rec, cfg, reports))
    log.info("X_N = %.6g after %d steps", rec.X_final, rec.horizon)
    return _strict_code(reports, args.strict)


def cmd_sweep(cfg, out, args):
    summary, results = harness.sweep(cfg, args.workers)
    harness.write_csv(out / "finals.csv", ("replica", "X_final", "status"),
                      ((r.index, r.X_final if r.X_final is not None else float("nan"), r.status)
                       for r in results))
    harness.write_json(out / "summary.json", summary.to_dict())
    harness.write_json(out / "timing.json", {"wall_time_s": summary.wall_time})
    log.info("fraction_hi %.4f fraction_lo %.4f over %d replicas",
             summary.fraction_hi, summary.fraction_lo, len(summary.finals))
    fails = any(c.get(FAIL, 0) for c in summary.verdict_counts.values())
    return EXIT_STRICT if args.strict and fails else EXIT_OK


def cmd_check(cfg, out, args):
    reports = harness.check_bundle(cfg)
    harness.write_json(out / "checks.json", {
        "schema_version": harness.SCHEMA_VERSION, "config_hash": cfg.hash(),
        "reports": [r.to_dict() for r in reports]})
    for r in reports:
        log.info("%-28s %s", r.condition_name, r.verdict)
    return _strict_code(reports, args.strict)


def cmd_mean_field(cfg, out, args):
    tables = cfg.tables()
    mf = bandit.MeanFieldConfig(cfg.theta_A, cfg.theta_B, cfg.x0)
    x = bandit.mean_field_trajectory(mf, tables, max(cfg.horizon, 1))[: cfg.horizon + 1]
    idx = bandit.sample_indices(cfg.horizon, cfg.stride)
    harness.write_csv(out / "mean_field.csv", ("n", "x"), ((int(n), x[n]) for n in idx))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check,
            "mean-field": cmd_mean_field}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = harness.ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None:
            cfg.workers = args.workers
        out = harness.resolve_output_dir(cfg, args.out)
    except (harness.ConfigError, OSError) as exc:
        print(f"ergobandit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out, args)
    except InternalConsistencyError as exc:
        print(f"ergobandit: internal consistency error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (HorizonOverrun, OSError, ValueError) as exc:
        print(f"ergobandit: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
