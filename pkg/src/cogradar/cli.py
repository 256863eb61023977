"""Command-line front end: training, frozen-policy evaluation, baselines.

Seed discipline: the run seed feeds the training environment directly;
agent weights draw from splitmix64 child stream 3 and the exploration and
minibatch stream from child 4. Evaluation and baseline episodes reuse the
run seed for episode 0, so trained, evaluated and fixed-fraction runs with
equal seeds face identical target histories, and derive episode k > 0
environment seeds as splitmix64(seed, 16 + k).

Each subcommand writes trace.csv (trace_ep<k>.csv for extra episodes),
summary.csv, and config.resolved into --out; train adds checkpoint.npz.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cdrl.agent import DdpgAgent
from .cdrl.train import (
    TrainConfig,
    TrainingDiverged,
    baseline_rollout,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .config import ConfigError, RunConfig, load_config, with_updates, write_resolved
from .env import RadarEnv
from .numerics import RngStream, splitmix64
from .trace import SummaryRow, TraceWriter, summarize, write_summary

AGENT_STREAM = 3
TRAIN_STREAM = 4
EPISODE_STREAM_BASE = 16


def episode_seed(seed: int, episode: int) -> int:
    """Environment seed of one evaluation/baseline episode."""
    if episode == 0:
        return seed
    return splitmix64(seed, EPISODE_STREAM_BASE + episode)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cogradar",
        description="Radar time-budget control: constrained DDPG trainer and baselines.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, slots_help):
        sp.add_argument("--config", default=None,
                        help="YAML config file; built-in defaults when omitted")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="run seed; overrides run.seed")
        sp.add_argument("--slots", type=int, default=None, help=slots_help)
        sp.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="SECTION.KEY=VALUE", help="config override, repeatable")

    t = sub.add_parser("train", help="train the constrained dwell scheduler")
    common(t, "training length; overrides training.slots")

    e = sub.add_parser("eval", help="frozen-policy rollouts from a checkpoint")
    e.add_argument("checkpoint", help="checkpoint.npz written by train")
    common(e, "slots per episode; overrides training.eval_slots")
    e.add_argument("--episodes", type=int, default=1, help="rollout count")

    b = sub.add_parser("baseline", help="fixed-fraction policy rollouts")
    common(b, "slots per episode; overrides training.eval_slots")
    b.add_argument("--fraction", type=float, required=True,
                   help="fixed tracking fraction of each slot, in [0, 1]")
    b.add_argument("--episodes", type=int, default=1, help="rollout count")
    return p


def _resolve(args, slots_key: str) -> RunConfig:
    rc = load_config(args.config, args.overrides)
    run_updates = {}
    if args.seed is not None:
        run_updates["seed"] = args.seed
    updates: dict = {"run": run_updates} if run_updates else {}
    if args.slots is not None:
        updates["training"] = {slots_key: args.slots}
    return with_updates(rc, **updates) if updates else rc


def _prepare_out(args, rc: RunConfig) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved(out / "config.resolved", rc, command=" ".join(args.argv))
    return out


def _print_rows(rows: list[SummaryRow]) -> None:
    for r in rows:
        print(
            f"{r.policy} ep{r.episode} seed {r.seed}: "
            f"utility {r.mean_utility:.1f}, usage {r.mean_usage:.4f}, "
            f"violations {r.violation_fraction:.4f}, "
            f"latency {r.mean_confirm_latency:.1f}, cost {r.mean_tracking_cost:.4f}"
        )


def cmd_train(args) -> int:
    rc = _resolve(args, "slots")
    out = _prepare_out(args, rc)
    seed = rc.run.seed
    env = RadarEnv(rc.env_params(), seed=seed)
    agent = DdpgAgent(rc.ddpg_config(), RngStream(seed).child(AGENT_STREAM))
    train_rng = RngStream(seed).child(TRAIN_STREAM)
    ckpt = out / "checkpoint.npz"
    tcfg = TrainConfig(
        slots=rc.training.slots,
        warmup=rc.training.warmup,
        beta=rc.env.beta,
        buffer_capacity=rc.training.buffer_capacity,
        explore_eps=rc.training.explore_eps,
        checkpoint_every=rc.training.checkpoint_every,
        checkpoint_path=str(ckpt),
        diverge_dump_path=str(out / "diverged.npz"),
    )
    try:
        with TraceWriter(out / "trace.csv", rc.env.n_max, training=True) as w:
            res = train(env, agent, rc.dual_variable(), tcfg, train_rng, writer=w)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    save_checkpoint(ckpt, env, agent, res.dual, res.buffer, res.normalizer,
                    train_rng, next_slot=res.next_slot, pending_obs=res.pending_obs,
                    burst=res.burst)
    rows = []
    if res.reports:
        rows.append(summarize("cdrl", 0, seed, res.reports, rc.dual.theta_max))
    write_summary(out / "summary.csv", rows)
    _print_rows(rows)
    return 0


def _episode_files(out: Path, episode: int) -> Path:
    return out / ("trace.csv" if episode == 0 else f"trace_ep{episode}.csv")


def cmd_eval(args) -> int:
    if args.episodes < 1:
        print("error: --episodes must be at least 1", file=sys.stderr)
        return 2
    rc = _resolve(args, "eval_slots")
    seed = rc.run.seed
    agent = DdpgAgent(rc.ddpg_config(), RngStream(seed).child(AGENT_STREAM))
    try:
        _, _, normalizer, _, _ = load_checkpoint(args.checkpoint, None, agent, None, None)
    except FileNotFoundError:
        print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _prepare_out(args, rc)
    rows = []
    for ep in range(args.episodes):
        eseed = episode_seed(seed, ep)
        env = RadarEnv(rc.env_params(), seed=eseed)
        with TraceWriter(_episode_files(out, ep), rc.env.n_max) as w:
            reports = evaluate(env, agent, normalizer, rc.training.eval_slots, writer=w)
        rows.append(summarize("cdrl", ep, eseed, reports, rc.dual.theta_max))
    write_summary(out / "summary.csv", rows)
    _print_rows(rows)
    return 0


def cmd_baseline(args) -> int:
    if args.episodes < 1:
        print("error: --episodes must be at least 1", file=sys.stderr)
        return 2
    if not 0 <= args.fraction <= 1:
        print("error: --fraction must be in [0, 1]", file=sys.stderr)
        return 2
    rc = _resolve(args, "eval_slots")
    out = _prepare_out(args, rc)
    seed = rc.run.seed
    policy = f"fixed_{int(round(args.fraction * 100))}"
    rows = []
    for ep in range(args.episodes):
        eseed = episode_seed(seed, ep)
        env = RadarEnv(rc.env_params(), seed=eseed)
        with TraceWriter(_episode_files(out, ep), rc.env.n_max) as w:
            reports = baseline_rollout(env, args.fraction, rc.training.eval_slots,
                                       writer=w)
        rows.append(summarize(policy, ep, eseed, reports, rc.dual.theta_max))
    write_summary(out / "summary.csv", rows)
    _print_rows(rows)
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_baseline(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
