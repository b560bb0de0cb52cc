"""Command-line entry points.

Subcommands: synth, train, backtest, compare, ablate. Every command is
driven by a single JSON config file and a seed, and re-running a command
with the same inputs produces byte-identical outputs.

Exit codes: 0 on success, 2 for configuration problems, 3 for data problems.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import baselines, harness
from .errors import ConfigError, DataError
from .harness import RunConfig
from .market_data import write_ohlcv_csv
from .rl import load_agent

log = logging.getLogger("portagents")

LOG_LEVEL_VAR = "PORTAGENTS_LOG_LEVEL"


def _setup_logging():
    level_name = os.environ.get(LOG_LEVEL_VAR, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_json_file(args.config)
    if getattr(args, "seed", None) is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if "synth" not in cfg.data:
        raise ConfigError("synth command needs a data.synth block in the config")
    series = cfg.load_series()
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_ohlcv_csv(series, out)
    print(f"wrote {series.n_days} days x {series.n_assets} assets to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    result = harness.train(cfg)
    paths = harness.save_train_artifacts(result, args.out, cfg)
    print(f"checkpoint: {paths['checkpoint']}")
    print(f"report: {paths['report']}")
    print(f"best episode: {result.best_episode}")
    return 0


def cmd_backtest(args) -> int:
    cfg = _load_config(args)
    series = cfg.load_series()
    strategy = args.strategy
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if strategy is not None and harness._baseline_name(strategy) in baselines.REGISTRY:
        kind, cfg2 = harness.resolve_strategy(strategy, cfg)
        policy = baselines.make_strategy(harness._baseline_name(strategy))
        result = harness.backtest(policy, series, cfg2)
        label = strategy
    else:
        if strategy is not None:
            _, cfg = harness.resolve_strategy(strategy, cfg)
        if args.checkpoint:
            agent, extra = load_agent(args.checkpoint)
            observer = harness.observer_from_state(
                extra.get("observer"), cfg.observer
            )
        else:
            trained = harness.train(cfg, series=series)
            agent, observer = trained.agent, trained.observer
        result = harness.backtest(
            agent, series, cfg, observer=observer, tier=cfg.tier
        )
        label = strategy or cfg.tier

    payload = result.to_json_dict()
    payload["strategy"] = label
    path = out / "backtest_report.json"
    harness._dump_json(payload, path)
    print(f"report: {path}")
    print(
        f"{label}: ar={payload['ar']:.6f} mdd={payload['mdd']:.6f} "
        f"sharpe={payload['sharpe']:.6f} risk={payload['risk']:.6f}"
    )
    return 0


def _formats(args) -> list[str]:
    return [f.strip() for f in args.formats.split(",") if f.strip()]


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    strategies = None
    if args.strategies:
        strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    report = harness.compare(cfg, strategies=strategies)
    written = harness.emit_report(report, _formats(args), args.out, prefix="comparison")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    report = harness.ablate(cfg)
    written = harness.emit_report(report, _formats(args), args.out, prefix="ablation")
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="portagents",
        description="Multi-agent portfolio backtesting toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True, out_default="runs"):
        p.add_argument("--config", required=True, help="path to a JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if needs_out:
            p.add_argument("--out", default=out_default, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic OHLCV CSV")
    common(p, needs_out=False)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the configured tier")
    common(p, out_default="runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("backtest", help="evaluate on the test split")
    common(p, out_default="runs/backtest")
    p.add_argument("--checkpoint", default=None, help="trained agent checkpoint")
    p.add_argument(
        "--strategy",
        default=None,
        help="baseline name or tier (default: config tier)",
    )
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("compare", help="compare strategies on shared data")
    common(p, out_default="runs/compare")
    p.add_argument("--strategies", default=None, help="comma-separated names")
    p.add_argument("--formats", default="json,csv", help="json,csv,plotdata")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate", help="tier and reward ablation matrix")
    common(p, out_default="runs/ablate")
    p.add_argument("--formats", default="json,csv", help="json,csv,plotdata")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
