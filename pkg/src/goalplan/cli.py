"""Command-line entry point: `goalplan train | evaluate | oracle`"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .adapters.checkpoint import load_checkpoint, save_checkpoint
from .adapters.config import load_document
from .adapters.metrics import emit_metrics, emit_moving_average, emit_schedule
from .core.agent import TrainingDivergenceError
from .core.environment import EpisodeDoneError
from .core.hooks import ProgressLogger
from .core.mdp import ConvergenceError
from .core.oracle import run_oracle
from .core.training import EvaluationReport, Trainer, evaluate_policy, moving_average

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CHECKPOINT_FILE = "checkpoint.txt"
METRICS_FILE = "metrics.csv"
MOVING_AVERAGE_FILE = "moving_average.csv"
SCHEDULE_FILE = "schedule.csv"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goalplan",
        description="Learn annual contribution strategies for multi-goal plans",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging verbosity (default: INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a DQN agent on a profile")
    train.add_argument("--config", required=True, type=Path)
    train.add_argument("--out", required=True, type=Path, help="output directory")
    train.add_argument("--episodes", type=int, help="override training.n_episodes")
    train.add_argument("--seed", type=int, help="override training.seed")
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("evaluate", help="play greedy episodes")
    evaluate.add_argument("--checkpoint", required=True, type=Path)
    evaluate.add_argument("--config", required=True, type=Path)
    evaluate.add_argument("--episodes", type=int, default=10)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument(
        "--out", type=Path, help="schedule.csv directory (default: checkpoint's)"
    )
    evaluate.set_defaults(handler=cmd_evaluate)

    oracle = commands.add_parser(
        "oracle", help="compare the DQN with value iteration on a small problem"
    )
    oracle.add_argument("--config", required=True, type=Path)
    oracle.add_argument("--seed", type=int)
    oracle.set_defaults(handler=cmd_oracle)
    return parser


def cmd_train(args: argparse.Namespace) -> int:
    doc = load_document(args.config)
    overrides = {}
    if args.episodes is not None:
        overrides["n_episodes"] = args.episodes
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = dataclasses.replace(doc.training, **overrides)

    trainer = Trainer(config)
    trainer.register_hook(
        ProgressLogger(every=config.log_every, window=config.moving_average_window)
    )
    checkpoint, metrics = trainer.train()

    args.out.mkdir(parents=True, exist_ok=True)
    names = config.goals.names
    save_checkpoint(args.out / CHECKPOINT_FILE, checkpoint)
    emit_metrics(args.out / METRICS_FILE, metrics, names)
    emit_moving_average(
        args.out / MOVING_AVERAGE_FILE, metrics, config.moving_average_window, names
    )
    rewards = [m.accumulated_reward for m in metrics]
    final = moving_average(rewards, config.moving_average_window)[-1]
    print(f"episodes: {len(metrics)}")
    print(f"steps: {checkpoint.step}")
    print(f"final moving-average reward: {final:.4f}")
    print(f"outputs: {args.out}")
    return 0


def format_report(report: EvaluationReport) -> str:
    lines = [
        f"episodes: {report.n_episodes}",
        f"mean reward: {report.mean_reward:.4f} (std {report.reward_std:.4f})",
        f"mean discounted return: {report.mean_discounted_return:.4f}",
    ]
    for name, p in report.success.items():
        lines.append(f"success {name}: {p:.4f}")
    band = "yes" if report.retirement_in_band else "no"
    lines.append(f"retirement within band: {band}")
    stable = "yes" if report.schedule_is_stable else "no"
    lines.append(f"schedule identical across episodes: {stable}")
    lines.append("year  age  contribution")
    for row in report.schedule:
        lines.append(f"{row.year:>4}  {row.age:>3.0f}  {row.contribution:>12.2f}")
    return "\n".join(lines)


def cmd_evaluate(args: argparse.Namespace) -> int:
    doc = load_document(args.config)
    checkpoint = load_checkpoint(args.checkpoint)
    report = evaluate_policy(
        checkpoint,
        doc.profile,
        doc.goals,
        doc.market,
        n_episodes=args.episodes,
        seed=args.seed,
        reward=doc.reward,
    )
    out = args.out or args.checkpoint.parent
    out.mkdir(parents=True, exist_ok=True)
    emit_schedule(out / SCHEDULE_FILE, report.schedule)
    print(format_report(report))
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    doc = load_document(args.config)
    seed = doc.training.seed if args.seed is None else args.seed
    report = run_oracle(
        doc.profile,
        doc.goals,
        doc.market,
        doc.reward,
        doc.agent.gamma,
        doc.oracle,
        seed=seed,
    )
    print(f"states: {report.n_states}")
    print(f"agreement: {100.0 * report.agreement:.1f}%")
    print(f"strict agreement: {100.0 * report.strict_agreement:.1f}%")
    print(
        f"tie tolerance: {report.tie_tolerance:g} "
        f"({100.0 * report.relative_tolerance:.1f}% of rho)"
    )
    print(f"mean regret: {report.mean_regret:.4f}")
    print(f"optimal value at start: {report.start_value:.4f}")
    return 0 if report.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        return args.handler(args)
    except (
        ValueError,
        OSError,
        TrainingDivergenceError,
        ConvergenceError,
        EpisodeDoneError,
    ) as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"goalplan {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
