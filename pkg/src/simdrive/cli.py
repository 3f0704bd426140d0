"""Command-line entry point wiring the pipeline stages.

Exit codes: 0 success, 1 unexpected failure, 2 missing input file,
3 schema/validation violation, 4 quota shortfall.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

from .errors import QuotaShortfallError, SchemaError, ToolkitError
from .experiment import (
    ExperimentConfig,
    cmd_curate,
    cmd_evaluate,
    cmd_generate,
    cmd_render_prompts,
    cmd_report,
    load_config,
    run_sim2real_experiment,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MISSING_INPUT = 2
EXIT_SCHEMA = 3
EXIT_SHORTFALL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simdrive",
        description="Generate, curate, prompt, and evaluate hard-case driving data.")
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", help="simulate both domains and write datasets")

    p_curate = sub.add_parser("curate", help="stratified-sample the generated pool")
    p_curate.add_argument("--quota", help="quota preset name (HASS, nuScenes-like)")

    sub.add_parser("render-prompts", help="write question/answer prompt pairs")

    p_eval = sub.add_parser("evaluate", help="score a planner on the real-domain records")
    p_eval.add_argument("--planner", default="gt", choices=["gt", "cv", "ctrv", "linear"])
    p_eval.add_argument("--weights", help="planner weight file for --planner linear")

    sub.add_parser("report", help="print the latest metrics report")

    p_exp = sub.add_parser("sim2real", help="run the transfer experiment")
    p_exp.add_argument("--no-align", action="store_true",
                       help="skip coordinate alignment of synthetic records (ablation)")
    return parser


def _load_cfg(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg = ExperimentConfig.from_json_obj({**cfg.to_json_obj(), "seed": args.seed})
    if args.out is not None:
        cfg = ExperimentConfig.from_json_obj({**cfg.to_json_obj(), "out_dir": args.out})
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_cfg(args)
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        if args.command == "generate":
            out = cmd_generate(cfg, created_at=stamp)
            print(json.dumps({"generated": out}))
        elif args.command == "curate":
            out = cmd_curate(cfg, quota_name=args.quota, created_at=stamp)
            print(json.dumps(out))
        elif args.command == "render-prompts":
            out = cmd_render_prompts(cfg)
            print(json.dumps(out))
        elif args.command == "evaluate":
            out = cmd_evaluate(cfg, planner_name=args.planner, weights_path=args.weights)
            print(json.dumps(out))
        elif args.command == "report":
            print(cmd_report(cfg))
        elif args.command == "sim2real":
            align = cfg.align and not args.no_align
            out = run_sim2real_experiment(cfg, align=align)
            print(json.dumps(out, indent=1, sort_keys=True))
        else:  # pragma: no cover - argparse enforces choices
            return EXIT_FAILURE
        return EXIT_OK
    except FileNotFoundError as e:
        print(f"missing input: {e}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except QuotaShortfallError as e:
        print(f"quota shortfall: {e}", file=sys.stderr)
        return EXIT_SHORTFALL
    except SchemaError as e:
        print(f"schema violation: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except ToolkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
