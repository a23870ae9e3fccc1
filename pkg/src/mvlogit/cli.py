"""Command line interface.

Usage::

    mvlogit fit      --config cfg.json --data trial.csv --seed 1 --out fit/
    mvlogit decide   --config cfg.json --data trial.csv [--posterior fit/] --out dec/
    mvlogit plan     --config plan.json --out plan/
    mvlogit elicit   --config beliefs.json --out elicit/
    mvlogit simulate --config campaign.json --seed 7 --out sim/ [--full-scale]

Each command writes ``report.json`` (``{"command", "result", "metadata"}``)
plus CSV tables into ``--out``.  Failures print ``{"error": {"code",
"message"}}`` on stderr and exit with status 1 (status 2 for usage errors).
"""

import argparse
from datetime import datetime, timezone
import json
from pathlib import Path
import sys

from . import __version__
from .exceptions import ConfigurationError, MvlogitError
from .io import dumps, load_dataset_csv, write_json
from .pipeline import (REPORT_FILE, analysis_config, load_config, run_decide, run_elicit,
                       run_fit, run_plan, run_simulate)

EXIT_ERROR = 1
EXIT_INTERNAL = 3


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvlogit",
        description="Bayesian multivariate logistic regression for two-arm trials with "
                    "multiple binary outcomes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, data=False, seed=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON configuration file")
        if data:
            p.add_argument("--data", required=True, help="CSV dataset")
        if seed:
            p.add_argument("--seed", type=_u64, default=None, help="RNG seed (u64)")
        p.add_argument("--out", required=True, help="output directory")
        return p

    add("fit", "sample the posterior and store draws", data=True, seed=True)
    p = add("decide", "treatment effects and decisions", data=True, seed=True)
    p.add_argument("--posterior", default=None,
                   help="output directory of a previous 'fit' (otherwise fit first)")
    add("plan", "required sample size per arm")
    add("elicit", "prior means from beliefs about success probabilities")
    p = add("simulate", "replication campaign", seed=True)
    p.add_argument("--full-scale", action="store_true",
                   help="1000 replications and 10000 draws after 1000 burn-in")
    return parser


def _dispatch(args):
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command in ("fit", "decide"):
        config = analysis_config(cfg)
        data = load_dataset_csv(args.data, config)
        if args.command == "fit":
            return run_fit(data, config, args.seed, out)
        return run_decide(data, config, args.seed, out, args.posterior)
    if not isinstance(cfg, dict):
        raise ConfigurationError("configuration must be a JSON object")
    if args.command == "plan":
        return run_plan(cfg.get("plan", cfg), out)
    if args.command == "elicit":
        return run_elicit(cfg.get("beliefs", cfg), out)
    return run_simulate(cfg, args.seed, out, args.full_scale)


def _error(code, message, status):
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}}) + "\n")
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc)
    try:
        result = _dispatch(args)
    except MvlogitError as exc:
        return _error(exc.code, str(exc), EXIT_ERROR)
    except OSError as exc:
        return _error("io", str(exc), EXIT_ERROR)
    except Exception as exc:  # noqa: BLE001 - surfaced as a machine-readable failure
        return _error("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    report = {
        "command": args.command,
        "result": result,
        "metadata": {"started": started.isoformat(),
                     "finished": datetime.now(timezone.utc).isoformat(),
                     "version": __version__,
                     "argv": list(sys.argv[1:] if argv is None else argv)},
    }
    write_json(Path(args.out) / REPORT_FILE, report)
    sys.stdout.write(dumps({"command": args.command, "report": str(Path(args.out) / REPORT_FILE)})
                     + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
