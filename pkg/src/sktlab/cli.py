"""Command-line harness for the replica studies.

Subcommands mirror the study kinds; defaults reproduce the canonical runs.
Config files are JSON objects whose keys are StudyConfig fields (see
README for the schema); CLI flags override file values.  Exit codes:
0 pass, 1 certificate failure, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    RUNNERS,
    CertificateFailure,
    ConfigError,
    ReferenceUnresolved,
    StudyConfig,
    effective_threads,
)
from .results import emit_results

STUDY_DEFAULTS = {
    "gap-vs-n": dict(M_values=(8,), N_values=(250, 1000, 4000), replicas=64, T=0.05),
    "det-order": dict(M_values=(8, 16, 32), M_ref=512, T=0.05, eps=0.05),
    "rough": dict(M_values=(4,), N_values=(100, 1000, 10000), replicas=64, T=0.1),
    "qv": dict(M_values=(4,), N_values=(50,), replicas=400, T=0.1),
    "duality": dict(n_regular=100, n_singular=50),
    "stability": dict(M_values=(8, 16, 32, 64), eps_values=(1e-1, 1e-2, 1e-3), T=0.1),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sktlab", description=__doc__)
    sub = parser.add_subparsers(dest="study", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (StudyConfig fields)")
        p.add_argument("--seed", type=int, help="study seed (u64)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="replica worker budget")
        p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    return parser


def load_config(study: str, args) -> StudyConfig:
    fields = dict(STUDY_DEFAULTS.get(study, {}))
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        valid = set(StudyConfig.__dataclass_fields__)
        unknown = set(file_cfg) - valid
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        fields.update(file_cfg)
    for key in ("seed", "out", "threads"):
        val = getattr(args, key)
        if val is not None:
            fields[key] = val
    fields.pop("study", None)
    for key in ("M_values", "N_values", "target", "eps_values"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return StudyConfig(study=study, **fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.study, args)
    except (ConfigError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    threads, override = effective_threads(config)
    print(f"study {args.study}: seed={config.seed} threads={threads}"
          + (f" (env override {override})" if override else ""))
    try:
        result = RUNNERS[args.study](config)
    except (ConfigError, ReferenceUnresolved) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 1
    for row in result.rows[:12]:
        print(f"  M={row.M} N={row.N} mean_sq_gap={row.mean_sq_gap} stderr={row.stderr}")
    if len(result.rows) > 12:
        print(f"  ... {len(result.rows) - 12} more rows")
    if result.slope is not None:
        print(f"  fitted slope {result.slope:.4f} +- {result.slope_err}")
    print(f"  passed={result.passed} runtime={result.runtime_s:.1f}s")
    if config.out:
        try:
            paths = emit_results(result, args.format, config.out)
        except IOError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            return 3
        for p in paths:
            print(f"  wrote {p}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
