"""``fracbn`` command-line interface.

Exit codes: 0 on success, 2 when a precondition or hypothesis check refuses
the run, 1 on numerical failure. A report is written in every case.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from .. import __version__
from ..exceptions import FracBNError, HypothesisViolation, PreconditionError
from .cache import SpectralCache
from .config import load_config
from .report import SCHEMA_VERSION, write_report
from .runner import COMMANDS, Context

log = logging.getLogger("fracbn")

EXIT_OK, EXIT_FAILED, EXIT_REFUSED = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="fracbn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: run.out_dir)")
    common.add_argument("--cache", type=Path, default=None, help="spectral cache directory (default: run.cache_dir)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for sweep rows")
    common.add_argument("--seed", type=int, default=None, help="overrides run.seed")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "eig": "assemble and decompose; print lambda_1 and lambda_1^s",
        "solve": "Nehari minimization with a Pohozaev post-check",
        "certify": "existence-certificate sweep (interior or boundary)",
        "audit": "nonexistence audit for lam <= 0 over a refinement study",
        "extension-check": "c_s calibration and DtN errors over refinements",
        "sweep": "scaling-law sweep with exponent fits and gradient-growth study",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _failure_report(command, cfg_echo, status, message):
    return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command, "status": status,
            "message": message, "config": cfg_echo, "results": {}, "timing": {}}


def run(argv=None):
    """Parse ``argv``, run the subcommand and return ``(exit_code, report)``."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    overrides = {} if args.seed is None else {"run.seed": args.seed}
    cfg_echo = {}
    out = args.out or Path("out")
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, overrides)
        cfg_echo = cfg.echo()
        out = args.out or Path(cfg.run.out_dir)
        cache_dir = args.cache or cfg.run.cache_dir
        ctx = Context(cfg, out, SpectralCache(cache_dir), threads=args.threads or cfg.run.threads)
        report = COMMANDS[args.command](ctx)
        report["tables"] = ctx.tables
        report["fields"] = ctx.fields
        report["timing"] = {"stages": ctx.timing, "total": round(time.perf_counter() - t0, 6),
                            "cache": ctx.cache.stats(), "threads": ctx.threads, "out": str(out)}
        code = EXIT_OK
    except (PreconditionError, HypothesisViolation) as exc:
        log.error("refused: %s", exc)
        report, code = _failure_report(args.command, cfg_echo, "refused", str(exc)), EXIT_REFUSED
    except FracBNError as exc:
        log.error("failed: %s", exc)
        report, code = _failure_report(args.command, cfg_echo, "failed", str(exc)), EXIT_FAILED
    path = write_report(report, out)
    _summarize(report, path)
    return code, report


def _summarize(report, path):
    status = report["status"]
    lines = [f"{report['command']}: {status} -> {path}"]
    spec = report.get("spectral")
    if spec:
        lines.append(f"  lambda_1 = {spec['lambda_1']:.10g}  lambda_1^s = {spec['lambda_1s']:.10g}  K = {spec['K']}")
    if status != "ok":
        lines.append(f"  {report.get('message', '')}")
    print("\n".join(lines))


def main(argv=None):
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
