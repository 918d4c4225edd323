"""`nsrl` command line: train, eval, oracle, rules and plot."""
from __future__ import annotations

import functools
from dataclasses import replace
from pathlib import Path
from typing import Annotated, Optional

import numpy as np
import typer
from loguru import logger

from src.cli import session
from src.envs.blocks import BlocksWorld
from src.envs.keydoor import KeyDoor
from src.envs.mdp import ScriptedPolicy, optimal_return
from src.envs.variants import task_variants, variant_config
from src.numerics import tensor as tn
from src.policy.acting import ActMode, network_chooser
from src.policy.dqn import dqn_train
from src.policy.ppo import ppo_train
from src.policy.rollout import EpisodeStats, evaluate_policy, run_episode, summarize
from src.reasoning.kappa import AttentionWeights
from src.rules.extraction import aggregate, chain_confidences, format_report, ground_rule, render
from src.tools.visual import create_learning_curve, learning_curve_rows, save_chart
from src.utils.checkpoint import load_checkpoint, save_checkpoint
from src.utils.config import load_config
from src.utils.errors import ConfigError, NsrlError
from src.utils.logs import EpisodeLogRecord, EpisodeLogWriter, RuleRecord, read_episode_log, setup_logging
from src.utils.models import Algorithm, Domain, RunConfig, Task


OVERRIDES = {'allow_extra_args': True, 'ignore_unknown_options': True}

app = typer.Typer(no_args_is_help=True, add_completion=False, help='Neuro-symbolic RL laboratory.')

ConfigOption = Annotated[Optional[Path], typer.Option('--config', '-c', help='TOML run configuration')]


def reporting(command):
    """Turn package errors into a one-line message and the error's exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except NsrlError as exc:
            logger.error(f'❌ {type(exc).__name__}: {exc}')
            typer.echo(f'error: {exc}', err=True)
            raise typer.Exit(exc.exit_code) from None

    return wrapper


@app.callback()
def main_options(verbose: Annotated[bool, typer.Option('--verbose', '-v', help='Debug logging')] = False) -> None:
    setup_logging(verbose)


def _record(config: RunConfig, kind: str, stats: EpisodeStats, seed: int) -> EpisodeLogRecord:
    return EpisodeLogRecord(
        kind=kind,
        episode=stats.episode,
        total_steps=stats.total_steps,
        return_=stats.score,
        length=stats.length,
        task=_task_label(config),
        variant=_variant_label(config),
        seed=seed,
        atoms=stats.atoms,
    )


def _task_label(config: RunConfig) -> str:
    return 'KEYDOOR' if config.env.domain is Domain.KEYDOOR else config.env.task.value


def _variant_label(config: RunConfig) -> str:
    if config.env.domain is Domain.KEYDOOR:
        return 'default'
    return config.env.piles or config.env.variant.value


@app.command(context_settings=OVERRIDES)
@reporting
def train(
    ctx: typer.Context,
    config: ConfigOption = None,
    resume: Annotated[bool, typer.Option(help='Continue from io.checkpoint and append to io.log')] = False,
) -> None:
    """Train with the configured algorithm, writing checkpoints and an episode log."""
    cfg = load_config(config, ctx.args)
    env = session.build_env(cfg, training=True)
    checkpoint_path = Path(cfg.io.checkpoint)
    if resume:
        network, optimizer, rng, saved = session.resume_training(load_checkpoint(checkpoint_path), cfg, env)
        start_step, start_episode = saved.step, saved.episode
        logger.info(f'⏩ resuming at episode {start_episode}, step {start_step}')
    else:
        network = session.build_network(cfg, env)
        optimizer = session.build_optimizer(cfg, network)
        rng = np.random.default_rng(cfg.trainer.seed)
        start_step = start_episode = 0
    progress = {'step': start_step, 'episode': start_episode, 'epsilon': None}

    def checkpoint() -> None:
        save_checkpoint(
            checkpoint_path,
            session.make_checkpoint(
                cfg, network, optimizer, rng, progress['step'], progress['episode'], progress['epsilon']
            ),
        )

    logger.info(f'🚀 training {cfg.trainer.algorithm.value} on {_task_label(cfg)} / {_variant_label(cfg)}')
    with EpisodeLogWriter(cfg.io.log, append=resume) as log:

        def on_episode(stats: EpisodeStats) -> None:
            stats = replace(
                stats, episode=stats.episode + start_episode, total_steps=stats.total_steps + start_step
            )
            log.write(_record(cfg, 'train', stats, cfg.trainer.seed))
            progress['step'], progress['episode'] = stats.total_steps, stats.episode + 1
            if progress['episode'] % cfg.trainer.checkpoint_every == 0:
                checkpoint()

        if cfg.trainer.algorithm is Algorithm.PPO:
            ppo_train(env, network, optimizer, session.ppo_hyper(cfg), rng, on_episode)
        else:
            hyper = session.dqn_hyper(cfg)
            result = dqn_train(env, network, optimizer, hyper, rng, on_episode)
            progress['step'], progress['epsilon'] = start_step + result.step, result.epsilon
    checkpoint()
    logger.info(f'✅ finished after {progress["episode"]} episodes; checkpoint {checkpoint_path}')


@app.command(name='eval', context_settings=OVERRIDES)
@reporting
def evaluate(
    ctx: typer.Context,
    config: ConfigOption = None,
    checkpoint: Annotated[Optional[Path], typer.Option(help='Checkpoint file (default: io.checkpoint)')] = None,
    episodes: Annotated[int, typer.Option(help='Evaluation episodes')] = 100,
    scripted: Annotated[bool, typer.Option(help='Use the value-iteration greedy policy')] = False,
    greedy: Annotated[bool, typer.Option(help='Greedy instead of stochastic policy')] = False,
    record_atoms: Annotated[bool, typer.Option(help='Log the action atom of every step')] = False,
) -> None:
    """Evaluate a checkpoint (or the scripted optimum) and append the results to the log."""
    if episodes <= 0:
        raise ConfigError(f'episodes must be positive, got {episodes}')
    cfg = load_config(config, ctx.args)
    env = session.build_env(cfg, training=False)
    rng = np.random.default_rng(cfg.env.eval_seed)
    if scripted:
        choose = ScriptedPolicy(env)
    else:
        network, _ = session.restore_network(load_checkpoint(checkpoint or cfg.io.checkpoint), env)
        choose = network_chooser(network, ActMode.GREEDY if greedy else ActMode.SOFTMAX, rng)
    with EpisodeLogWriter(cfg.io.log, append=True) as log:
        scores = evaluate_policy(
            env,
            choose,
            episodes,
            seed=cfg.env.eval_seed,
            on_episode=lambda stats: log.write(_record(cfg, 'eval', stats, cfg.env.eval_seed)),
            record_atoms=record_atoms,
        )
        mean, std = summarize(scores)
        log.write(
            EpisodeLogRecord(
                kind='summary',
                episode=episodes,
                task=_task_label(cfg),
                variant=_variant_label(cfg),
                seed=cfg.env.eval_seed,
                mean=mean,
                std=std,
                episodes=episodes,
            )
        )
    typer.echo(f'{_task_label(cfg)} {_variant_label(cfg)}: {mean:.3f} ± {std:.3f} over {episodes} episodes')


def oracle_table(cfg: Optional[RunConfig] = None) -> list[tuple[str, str, float]]:
    """Optimal returns per variant; every Blocks World task when `cfg` is None."""
    if cfg is not None and cfg.env.domain is Domain.KEYDOOR:
        return [('KEYDOOR', 'default', optimal_return(KeyDoor(session.keydoor_config(cfg.env))))]
    tasks = list(Task) if cfg is None else [cfg.env.task]
    rows = []
    for task in tasks:
        for variant in task_variants(task):
            env = BlocksWorld(variant_config(task, variant))
            rows.append((task.value, variant.value, optimal_return(env)))
    return rows


@app.command(context_settings=OVERRIDES)
@reporting
def oracle(ctx: typer.Context, config: ConfigOption = None) -> None:
    """Print value-iteration optimal returns for every variant of the configured task."""
    cfg = load_config(config, ctx.args) if config is not None or ctx.args else None
    for task, variant, value in oracle_table(cfg):
        typer.echo(f'{task:<8} {variant:<14} {value:.3f}')


def _parse_chain(text: str, cfg: RunConfig, vocab) -> list[int]:
    chain = [vocab.predicate_id(name.strip()) for name in text.split(',') if name.strip()]
    if not 1 <= len(chain) <= cfg.model.steps:
        raise ConfigError(f'--debug-one-hot needs 1..{cfg.model.steps} predicates, got {len(chain)}')
    return chain


@app.command(context_settings=OVERRIDES)
@reporting
def rules(
    ctx: typer.Context,
    config: ConfigOption = None,
    checkpoint: Annotated[Optional[Path], typer.Option(help='Checkpoint file (default: io.checkpoint)')] = None,
    states: Annotated[int, typer.Option(help='Rollout states to aggregate over')] = 100,
    top_k: Annotated[int, typer.Option(help='Rules to report')] = 10,
    debug_one_hot: Annotated[Optional[str], typer.Option(help='Force one-hot attention on P1,P2,...')] = None,
    ground: Annotated[bool, typer.Option(help='Also print each rule grounded on the first state')] = False,
    output: Annotated[Optional[Path], typer.Option(help='Write the report to this file')] = None,
) -> None:
    """Extract chain rules from attention weights over sampled states."""
    if states <= 0 or top_k <= 0:
        raise ConfigError('--states and --top-k must be positive')
    cfg = load_config(config, ctx.args)
    env = session.build_env(cfg, training=False)
    vocab = env.vocabulary
    rng = np.random.default_rng(cfg.env.eval_seed)
    if debug_one_hot is not None:
        forced = AttentionWeights.one_hot(_parse_chain(debug_one_hot, cfg, vocab), vocab.n_predicates, cfg.model.steps)
        sample = [env.reset(cfg.env.eval_seed)]
        per_state = [chain_confidences(forced) for _ in range(states)]
    else:
        network, _ = session.restore_network(load_checkpoint(checkpoint or cfg.io.checkpoint), env)
        choose = network_chooser(network, ActMode.SOFTMAX, rng)
        sample = []
        episode = 0
        while len(sample) < states:
            recorder = _Recorder(choose, sample, states)
            run_episode(env, recorder, cfg.env.eval_seed + episode)
            episode += 1
        per_state = []
        for state in sample:
            with tn.no_grad():
                weights = network.weights(state)
            single = AttentionWeights(weights.predicate[0], weights.path[0])
            per_state.append(chain_confidences(single))
    ranked = aggregate(per_state, vocab)
    report = format_report(ranked, vocab.unary_predicates, top_k)
    if ground:
        scores = None
        if debug_one_hot is None:
            with tn.no_grad():
                scores = network.kappa(sample[0]).data[0]
        grounded = [ground_rule(rule, sample[0], vocab, scores) for rule in ranked[:top_k]]
        report += ''.join(f'# grounded: {text}\n' for text in grounded if text is not None)
    typer.echo(report, nl=False)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(report, encoding='utf-8')
    with EpisodeLogWriter(cfg.io.log, append=True) as log:
        log.write(
            EpisodeLogRecord(
                kind='rules',
                episode=len(per_state),
                task=_task_label(cfg),
                variant=_variant_label(cfg),
                seed=cfg.env.eval_seed,
                rules=[
                    RuleRecord(clause=render(rule, vocab.unary_predicates), confidence=rule.confidence)
                    for rule in ranked[:top_k]
                ],
            )
        )


class _Recorder:
    """Chooser wrapper that keeps each visited state until the sample is full."""

    def __init__(self, choose, sample: list, limit: int):
        self.choose = choose
        self.sample = sample
        self.limit = limit

    def __call__(self, state, mask) -> int:
        if len(self.sample) < self.limit:
            self.sample.append(state)
        return self.choose(state, mask)


@app.command()
@reporting
def plot(
    logs: Annotated[list[Path], typer.Argument(help='Episode logs, one per seed')],
    output: Annotated[Path, typer.Option('--output', '-o', help='Image file (.png or .svg)')] = Path('outputs/learning_curve.png'),
    bin_steps: Annotated[Optional[int], typer.Option(help='Environment steps per point')] = None,
    kind: Annotated[str, typer.Option(help='Record kind to plot')] = 'train',
    title: Annotated[str, typer.Option(help='Chart title')] = 'Learning curve',
) -> None:
    """Plot return against environment steps with a min/max band across seeds."""
    runs = {str(path): read_episode_log(path) for path in logs}
    rows = learning_curve_rows(runs, bin_steps, kind)
    save_chart(create_learning_curve(rows, title), output)
    typer.echo(f'{output}')


def main() -> None:
    app()


if __name__ == '__main__':
    main()
