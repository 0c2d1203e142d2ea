# stdlib imports
import functools
import json
import shutil
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

# external imports
import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import spearmanr

# internal imports
from src.approximator.critic import CriticNet
from src.cli.checkpoint import load_checkpoint, save_checkpoint
from src.cli.config import RunConfig, dump_config, load_config, make_env, with_overrides
from src.coalition_game.core import EXACT_CAP, AxiomReport, verify_axioms
from src.coalition_game.games import TableGame
from src.credit.core import (
    CounterfactualGame,
    plain_counterfactual_credits,
    shapley_credits_exact,
    shapley_credits_mc,
    uniform_credits,
)
from src.csv_schemas.csv_schemas import CSV_SCHEMAS
from src.dec_pomdp.core import DecPomdpEnv, encode_actions
from src.dec_pomdp.null_agent import NullAgentWrapper
from src.exceptions import CheckpointError, ConfigError, ShapeError
from src.models.records import AuditStep, AuditSummaryRecord, BenchRecord, MetricsRecord, RunSummary
from src.trainer.core import Trainer, run_episode

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def exit_status(command: Callable[..., Any]) -> Callable[..., int]:
    """Map handled errors of a command to its process exit status."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs) -> int:
        try:
            command(*args, **kwargs)
        except ConfigError as e:
            logger.error(f"invalid configuration: {e}")
            return EXIT_CONFIG
        except (OSError, CheckpointError, ShapeError) as e:
            logger.error(f"{command.__name__} failed: {e}")
            return EXIT_FAILURE
        return EXIT_OK

    return wrapper


def write_csv(rows: Sequence[Dict[str, Any]], schema: str, directory: Path, **header) -> Path:
    """Write ``rows`` under the fixed header of ``schema``; NaN cells stay empty."""
    spec = CSV_SCHEMAS[schema]
    path = Path(directory) / spec.file_name
    frame = pd.DataFrame(list(rows), columns=spec.header(**header))
    frame.to_csv(path, index=False, float_format="%.10g")
    return path


def write_summary(summary: RunSummary, path: Path) -> Path:
    with open(path, "w") as f:
        json.dump(summary.as_dict(), f, indent=2, default=str)
    return path


def _prepare_run_directory(out_dir: Path, overwrite: bool) -> None:
    if out_dir.exists() and any(out_dir.iterdir()):
        if not overwrite:
            raise FileExistsError(f"{out_dir} already exists; pass --overwrite to replace it")
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)


@exit_status
def cmd_train(
    config_path: Path,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    overwrite: bool = False,
    progress: bool = True,
) -> None:
    """Train the configured preset and write metrics, summary and checkpoints."""
    config = with_overrides(load_config(config_path), seed, out)
    _prepare_run_directory(config.out_dir, overwrite)
    (config.out_dir / "config.cfg").write_text(dump_config(config))
    trainer = Trainer(functools.partial(make_env, config.env, config.hp.gamma), config.hp)
    checkpoints = config.out_dir / "checkpoints"
    logger.info(
        f"training {config.name}: {config.hp.credit_strategy} credits, seed {config.hp.seed}, "
        f"{config.hp.training_episodes} episodes"
    )

    def on_episode(t: Trainer) -> None:
        if config.checkpoint_interval and t.episode % config.checkpoint_interval == 0:
            save_checkpoint(
                checkpoints / f"episode_{t.episode:06d}", t.critic, t.agents, t.episode
            )

    records: List[MetricsRecord] = list(trainer.run(on_episode, progress=progress))
    save_checkpoint(
        checkpoints / "final", trainer.critic, trainer.agents, trainer.episode,
        extra={"config": config.as_dict()},
    )
    write_csv([r.as_row() for r in records], "metrics", config.out_dir)
    final = records[-1]
    results: Dict[str, Any] = {
        "episodes": trainer.episode,
        "final_eval_return": final.eval_return,
        "final_success_rate": final.success_rate,
        "best_eval_return": max(r.eval_return for r in records),
    }
    try:
        results["optimal_return"] = trainer.env.optimal_return()
    except (AttributeError, ValueError):
        logger.debug("environment has no fixed optimal return")
    write_summary(
        RunSummary("train", config.hp.seed, config.as_dict(), results),
        config.out_dir / "run_summary.json",
    )
    logger.info(f"run written to {config.out_dir}")


def _greedy_steps(agents, env: DecPomdpEnv, steps: int, rng: np.random.Generator):
    """Collect ``steps`` (state observations, actions) pairs from greedy episodes."""
    collected = []
    while len(collected) < steps:
        episode = run_episode(agents, env, 0.0, np.random.default_rng(int(rng.integers(2**32))))
        collected += list(zip(episode.state_observations, episode.actions))
    return collected[:steps]


def audit_step(
    critic: CriticNet,
    state_observations: np.ndarray,
    actions: np.ndarray,
    samples_list: Sequence[int],
    rng: np.random.Generator,
    step: int = 0,
    cap: int = EXACT_CAP,
    baseline: Optional[np.ndarray] = None,
) -> AuditStep:
    """Credits of one step under every strategy, each on a fresh evaluation cache."""
    encodings = encode_actions(actions, critic.action_dim)

    def game() -> CounterfactualGame:
        return CounterfactualGame(critic, state_observations, encodings, baseline)

    exact = None
    if critic.n_agents <= cap:
        exact = shapley_credits_exact(game(), cap).credits.tolist()
    monte_carlo, evaluations = {}, {}
    for samples in samples_list:
        mc_game = game()
        monte_carlo[samples] = shapley_credits_mc(mc_game, samples, rng).credits.tolist()
        evaluations[samples] = mc_game.critic_evaluations
    grand = game()
    return AuditStep(
        step=step,
        grand_value=grand.grand,
        exact=exact,
        monte_carlo=monte_carlo,
        plain_cf=plain_counterfactual_credits(grand).credits.tolist(),
        uniform=uniform_credits(grand).credits.tolist(),
        critic_evaluations=evaluations,
    )


def summarize_audit(audit: Sequence[AuditStep], samples_list: Sequence[int]) -> List[AuditSummaryRecord]:
    """Mean absolute error and mean per-step rank correlation of each MC column against exact."""
    exact = np.array([s.exact for s in audit])
    records = []
    for samples in samples_list:
        mc = np.array([s.monte_carlo[samples] for s in audit])
        correlations = []
        for e_row, m_row in zip(exact, mc):
            if np.ptp(e_row) > 0 and np.ptp(m_row) > 0:
                correlations.append(spearmanr(e_row, m_row).correlation)
        records.append(
            AuditSummaryRecord(
                samples=samples,
                mae=float(np.mean(np.abs(mc - exact))),
                rank_correlation=float(np.mean(correlations)) if correlations else float("nan"),
            )
        )
    return records


@exit_status
def cmd_audit(
    checkpoint: Path,
    config_path: Path,
    steps: int,
    samples_list: Sequence[int],
    out: Optional[Path] = None,
    seed: Optional[int] = None,
) -> None:
    """Compare exact, Monte Carlo, plain counterfactual and uniform credits on greedy steps."""
    if steps < 1:
        raise ConfigError("steps", "must be a positive integer")
    if not samples_list or min(samples_list) < 1:
        raise ConfigError("M", "sample counts must be positive integers")
    config: RunConfig = with_overrides(load_config(config_path), seed)
    env = make_env(config.env, config.hp.gamma)
    critic, agents, manifest = load_checkpoint(checkpoint)
    spec = env.spec
    if critic.groups != spec.groups or critic.obs_dim != spec.state_obs_dim or len(agents) != spec.n_agents:
        raise CheckpointError(f"Checkpoint {checkpoint} was not trained on the configured environment.")
    out_dir = Path(out) if out is not None else Path(checkpoint) / "audit"
    out_dir.mkdir(parents=True, exist_ok=True)

    rollout_rng, credit_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.hp.seed).spawn(2)
    )
    has_exact = spec.n_agents <= config.hp.exact_cap
    if not has_exact:
        logger.warning(
            f"{spec.n_agents} agents exceed the exact cap {config.hp.exact_cap}; "
            "auditing without the exact column"
        )
    audit = [
        audit_step(
            critic, obs, actions, samples_list, credit_rng, step, config.hp.exact_cap,
            spec.default_action_encoding,
        )
        for step, (obs, actions) in enumerate(_greedy_steps(agents, env, steps, rollout_rng))
    ]

    rows = []
    for s in audit:
        for agent in range(spec.n_agents):
            row = {
                "step": s.step,
                "agent": agent,
                "grand_value": s.grand_value,
                "exact": s.exact[agent] if s.exact is not None else np.nan,
                "plain_cf": s.plain_cf[agent],
                "uniform": s.uniform[agent],
            }
            row.update({f"mc_{m}": s.monte_carlo[m][agent] for m in samples_list})
            rows.append(row)
    write_csv(rows, "audit", out_dir, samples=samples_list)

    budget = max(2 * m * spec.n_agents + 1 for m in samples_list)
    results: Dict[str, Any] = {
        "checkpoint": str(checkpoint),
        "checkpoint_episode": manifest.get("episode"),
        "steps": steps,
        "exact_available": has_exact,
        "max_mc_critic_evaluations": max(max(s.critic_evaluations.values()) for s in audit),
        "mc_budget_respected": all(
            s.critic_evaluations[m] <= 2 * m * spec.n_agents + 1 for s in audit for m in samples_list
        ),
        "mc_budget": budget,
    }
    if has_exact:
        summary = summarize_audit(audit, samples_list)
        write_csv([r.as_row() for r in summary], "audit_summary", out_dir)
        results["mc_vs_exact"] = [r.as_row() for r in summary]
        exact = np.abs(np.array([s.exact for s in audit]))
        if isinstance(env, NullAgentWrapper):
            null = env.null_agent
            active = np.delete(exact, null, axis=1)
            results["null_agent_credit_ratio"] = float(exact[:, null].mean() / max(active.mean(), 1e-12))
        for record in summary:
            logger.info(
                f"M={record.samples}: MAE {record.mae:.5f}, rank correlation {record.rank_correlation:.3f}"
            )
    write_summary(
        RunSummary("audit", config.hp.seed, config.as_dict(), results), out_dir / "audit_summary.json"
    )
    logger.info(f"audit of {steps} steps written to {out_dir}")


def bench_credits(n: int, samples_list: Sequence[int], rng: np.random.Generator) -> List[BenchRecord]:
    """Evaluation counts and wall time of exact and MC credits on one random critic."""
    obs_dim, n_actions = 4, 5
    critic = CriticNet((0,) * n, obs_dim, n_actions, units=16, rng=rng)
    observations = rng.normal(size=(n, obs_dim))
    encodings = encode_actions(rng.integers(n_actions, size=n), n_actions)
    records = []
    if n <= EXACT_CAP:
        game = CounterfactualGame(critic, observations, encodings)
        start = time.perf_counter()
        shapley_credits_exact(game)
        records.append(
            BenchRecord(
                n, "exact", 0, game.critic_evaluations - 1, n * 2**n, game.critic_evaluations,
                time.perf_counter() - start,
            )
        )
    for samples in samples_list:
        game = CounterfactualGame(critic, observations, encodings)
        start = time.perf_counter()
        shapley_credits_mc(game, samples, rng)
        records.append(
            BenchRecord(
                n, "monte_carlo", samples, game.critic_evaluations - 1, 2 * samples * n,
                game.critic_evaluations,
                time.perf_counter() - start,
            )
        )
    return records


def bench_axioms(n: int, rng: np.random.Generator) -> AxiomReport:
    """Shapley axioms of exact credits on a random critic's game paired with a random table game."""
    obs_dim, n_actions = 4, 5
    critic = CriticNet((0,) * n, obs_dim, n_actions, units=16, rng=rng)
    game = CounterfactualGame(
        critic, rng.normal(size=(n, obs_dim)), encode_actions(rng.integers(n_actions, size=n), n_actions)
    )
    return verify_axioms(game, TableGame.random(n, rng))


@exit_status
def cmd_bench(
    n_list: Sequence[int], samples_list: Sequence[int], out: Path = Path("bench"), seed: int = 0
) -> None:
    """Tabulate exact versus Monte Carlo credit cost across agent counts and sample counts."""
    if not n_list or min(n_list) < 1:
        raise ConfigError("n", "agent counts must be positive integers")
    if not samples_list or min(samples_list) < 1:
        raise ConfigError("M", "sample counts must be positive integers")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = [r for n in n_list for r in bench_credits(n, samples_list, rng)]
    write_csv([r.as_row() for r in records], "bench", out)

    by_key = {(r.n, r.method, r.samples): r for r in records}
    ratios: Dict[str, Dict[str, Dict[str, float]]] = {}
    for n in n_list:
        if (n, "exact", 0) in by_key:
            exact = by_key[(n, "exact", 0)]
            ratios[str(n)] = {
                str(m): {
                    "critic_evaluations": exact.critic_evaluations
                    / by_key[(n, "monte_carlo", m)].critic_evaluations,
                    "marginal_evaluations": exact.marginal_evaluations
                    / by_key[(n, "monte_carlo", m)].marginal_evaluations,
                }
                for m in samples_list
            }
    axioms = {str(n): bench_axioms(n, rng) for n in n_list if n <= EXACT_CAP}
    results = {
        "exact_matches_power_of_two": all(
            r.coalitions == 2**r.n - 1 for r in records if r.method == "exact"
        ),
        "mc_budget_respected": all(
            r.critic_evaluations <= 2 * r.samples * r.n + 1 for r in records if r.method == "monte_carlo"
        ),
        "exact_over_mc": ratios,
        "axioms": {n: report.as_dict() for n, report in axioms.items()},
        "axioms_pass": all(report.passed for report in axioms.values()),
    }
    config = {"n": list(n_list), "M": list(samples_list), "out": str(out)}
    write_summary(RunSummary("bench", seed, config, results), out / "bench_summary.json")
    for r in records:
        logger.info(f"n={r.n} {r.method} M={r.samples}: {r.critic_evaluations} critic evaluations")
