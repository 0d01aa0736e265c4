"""Command-line interface.

Subcommands: ``run`` executes the full experiment and writes reports,
``analyze`` re-aggregates an existing record file, ``tables`` renders the
plain-text report tables, and ``selftest`` runs the built-in oracle suites.
Exit codes: 0 success, 1 input error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import load_corpora, synthetic_corpora
from .errors import InputError
from .metrics import summarize
from .runner import (
    REPORT_FORMATS,
    config_from_mapping,
    emit_report,
    parse_config_file,
    read_records_csv,
    render_tables,
    run_experiment,
    write_summary_json,
)
from .selftest import run_selftest

_CONFIG_FLAGS = (
    "max_depth", "max_branch", "root_top_k", "max_nodes",
    "max_new_tokens", "prompt_truncation", "temperature_mode", "seed",
    "prompts_per_domain", "draft_order", "target_order", "smoothing",
    "eos_token",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treespec",
        description="Tree-based speculative decoding harness with acceptance analytics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the full experiment and write reports")
    source = run_p.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", help="directory with one subdirectory of *.txt files per domain")
    source.add_argument("--synthetic", action="store_true", help="use the bundled synthetic domains")
    run_p.add_argument("--synthetic-docs", type=int, default=160, help="documents per synthetic domain")
    run_p.add_argument("--config", help="flat key = value config file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--formats", default=",".join(REPORT_FORMATS),
                       help="comma-separated subset of csv,json,tables")
    for key in _CONFIG_FLAGS:
        flag = "--" + key.replace("_", "-")
        if key == "smoothing":
            run_p.add_argument(flag, type=float, default=None)
        elif key in ("temperature_mode", "eos_token"):
            run_p.add_argument(flag, type=str, default=None)
        else:
            run_p.add_argument(flag, type=int, default=None)
    run_p.set_defaults(func=_cmd_run)

    an_p = sub.add_parser("analyze", help="re-aggregate an existing record file")
    an_p.add_argument("--records", required=True, help="records.csv produced by run")
    an_p.add_argument("--out", required=True, help="output directory")
    an_p.set_defaults(func=_cmd_analyze)

    tab_p = sub.add_parser("tables", help="render report tables from a record file")
    tab_p.add_argument("--records", required=True)
    tab_p.add_argument("--out", help="write tables here instead of stdout")
    tab_p.set_defaults(func=_cmd_tables)

    st_p = sub.add_parser("selftest", help="run the built-in oracle suites")
    st_p.add_argument("--seed", type=int, default=42)
    st_p.set_defaults(func=_cmd_selftest)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    values = parse_config_file(args.config) if args.config else {}
    for key in _CONFIG_FLAGS:
        override = getattr(args, key)
        if override is not None:
            values[key] = str(override)
    config = config_from_mapping(values)

    if args.synthetic:
        corpora = synthetic_corpora(n_docs=args.synthetic_docs, seed=config.seed)
    else:
        corpora = load_corpora(args.data)

    report = run_experiment(config, corpora)
    formats = [f for f in args.formats.split(",") if f]
    written = emit_report(report, args.out, formats)
    print(f"{len(report.records)} records over {len(report.summaries)} domains")
    for name, path in sorted(written.items()):
        print(f"wrote {name}: {path}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    records = read_records_csv(args.records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_json(summarize(records), out / "summary.json")
    (out / "tables.txt").write_text(render_tables(records), encoding="utf-8")
    print(f"analyzed {len(records)} records")
    print(f"wrote {out / 'summary.json'}")
    print(f"wrote {out / 'tables.txt'}")
    return 0


def _cmd_tables(args: argparse.Namespace) -> int:
    records = read_records_csv(args.records)
    text = render_tables(records)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    return 0 if run_selftest(seed=args.seed) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
