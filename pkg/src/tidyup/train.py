"""Advantage actor-critic training loop, evaluation harness, and metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine, tensor as T, world
from .agents import attention_record
from .gamegen import GameSpec, optimal_steps
from .rng import derive_seed


class EmptyEpisode(Exception):
    pass


@dataclass
class TrainConfig:
    episodes: int = 100
    runs: int = 10
    gamma: float = 0.9
    batch_size: int = 1
    max_steps: int = 50
    learning_rate: float = 1e-3
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    seed: int = 0
    optimizer: str = "sgd"
    grad_clip: float = 5.0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


@dataclass
class StepRecord:
    t: int
    observation: str
    admissible: list[str]
    action_index: int
    action: str
    reward: float
    score: int
    done: bool
    value: T.Tensor | None = None
    log_prob: T.Tensor | None = None
    entropy: T.Tensor | None = None
    attention: dict | None = None
    subgraph_nodes: int = 0
    subgraph_edges: int = 0


@dataclass
class EpisodeLog:
    steps: list[StepRecord]
    total_reward: float
    normalized_score: float
    game_seed: int

    def __len__(self) -> int:
        return len(self.steps)

    def transcript(self) -> list[dict]:
        return [
            {
                "t": s.t,
                "obs": s.observation,
                "admissible": s.admissible,
                "action": s.action,
                "reward": s.reward,
                "score": s.score,
                "done": s.done,
            }
            for s in self.steps
        ]


def run_episode(
    game: GameSpec,
    policy,
    mode: str = "sample",
    seed: int = 0,
    max_steps: int = 50,
    record_attention: bool = False,
) -> EpisodeLog:
    """Render -> act -> step until the game solves or the cap hits."""
    policy.start_episode(game, seed)
    state = game.initial_state
    goals = list(game.goals)
    observation = engine.render_observation(state)
    steps: list[StepRecord] = []
    total = 0.0
    while not world.is_terminal(state, goals, max_steps):
        admissible = engine.admissible_actions(state, goals)
        inventory_names = [state.entities[o].display_name for o in state.carried()]
        output = policy.act(observation, admissible, inventory_names, mode=mode)
        action, text = admissible[output.chosen]
        observation, reward, done, state = engine.step(state, action, goals, max_steps)
        total += reward
        subgraph = getattr(getattr(policy, "context", None), "subgraph", None)
        steps.append(
            StepRecord(
                t=state.step,
                observation=observation.text,
                admissible=[s for _, s in admissible],
                action_index=output.chosen,
                action=text,
                reward=reward,
                score=state.score,
                done=done,
                value=output.value,
                log_prob=output.log_prob,
                entropy=output.entropy,
                attention=attention_record(state.step, output) if record_attention else None,
                subgraph_nodes=len(subgraph.nodes) if subgraph else 0,
                subgraph_edges=len(subgraph.edges) if subgraph else 0,
            )
        )
    return EpisodeLog(
        steps=steps,
        total_reward=total,
        normalized_score=total / len(goals) if goals else 0.0,
        game_seed=game.seed,
    )


def discounted_returns(rewards: list[float], gamma: float) -> list[float]:
    """Monte-Carlo returns: R_t = r_t + gamma * R_{t+1}."""
    returns = [0.0] * len(rewards)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        returns[t] = running
    return returns


def a2c_loss(
    log: EpisodeLog, config: TrainConfig, advantages: list[float] | None = None
) -> tuple[T.Tensor, dict]:
    """Policy gradient with constant advantages, squared value error, entropy bonus.

    Advantages are treated as constants (no gradient through the baseline);
    pass `advantages` to pin them externally, e.g. for finite-difference checks.
    """
    if not log.steps:
        raise EmptyEpisode("cannot update from an empty episode")
    rewards = [s.reward for s in log.steps]
    returns = discounted_returns(rewards, config.gamma)
    policy_terms = []
    value_terms = []
    entropy_terms = []
    for index, (step, ret) in enumerate(zip(log.steps, returns)):
        advantage = (
            advantages[index] if advantages is not None else ret - float(step.value.data)
        )
        policy_terms.append(T.scale(step.log_prob, -advantage))
        residual = T.sub(T.Tensor(np.asarray(ret)), step.value)
        value_terms.append(T.mul(residual, residual))
        entropy_terms.append(step.entropy)
    policy_loss = _sum_scalars(policy_terms)
    value_loss = _sum_scalars(value_terms)
    entropy = _sum_scalars(entropy_terms)
    loss = T.add(
        T.add(policy_loss, T.scale(value_loss, config.value_coef)),
        T.scale(entropy, -config.entropy_coef),
    )
    components = {
        "policy_loss": float(policy_loss.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy.data),
        "loss": float(loss.data),
        "returns": returns,
    }
    return loss, components


def _sum_scalars(terms: list[T.Tensor]) -> T.Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = T.add(total, term)
    return total


class Sgd:
    def __init__(self, store: T.ParameterStore, lr: float, grad_clip: float = 5.0):
        self.store = store
        self.lr = lr
        self.grad_clip = grad_clip

    def step(self) -> None:
        clip_gradients(self.store, self.grad_clip)
        for _, tensor in self.store.items():
            tensor.data -= self.lr * tensor.grad


class Adam:
    def __init__(self, store: T.ParameterStore, lr: float, grad_clip: float = 5.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.grad_clip = grad_clip
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.moments = {name: (np.zeros_like(p.data), np.zeros_like(p.data))
                        for name, p in store.items()}

    def step(self) -> None:
        clip_gradients(self.store, self.grad_clip)
        self.t += 1
        for name, tensor in self.store.items():
            m, v = self.moments[name]
            m[...] = self.beta1 * m + (1 - self.beta1) * tensor.grad
            v[...] = self.beta2 * v + (1 - self.beta2) * tensor.grad**2
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_gradients(store: T.ParameterStore, max_norm: float) -> float:
    total = math.sqrt(sum(float((p.grad**2).sum()) for _, p in store.items()))
    if total > max_norm > 0:
        factor = max_norm / total
        for _, tensor in store.items():
            tensor.grad *= factor
    return total


def make_optimizer(store: T.ParameterStore, config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(store, config.learning_rate, config.grad_clip)
    if config.optimizer == "sgd":
        return Sgd(store, config.learning_rate, config.grad_clip)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def a2c_update(log: EpisodeLog, store: T.ParameterStore, config: TrainConfig, optimizer) -> dict:
    loss, components = a2c_loss(log, config)
    store.zero_grads()
    T.backward(loss)
    optimizer.step()
    return components


@dataclass
class Metrics:
    mean_score: float
    std_score: float
    mean_steps: float
    std_steps: float
    per_run: list[dict] = field(default_factory=list)

    def row(self) -> str:
        return (
            f"steps {self.mean_steps:.2f} +/- {self.std_steps:.2f}  "
            f"score {self.mean_score:.2f} +/- {self.std_score:.2f}"
        )

    def to_dict(self) -> dict:
        return {
            "mean_score": round(self.mean_score, 4),
            "std_score": round(self.std_score, 4),
            "mean_steps": round(self.mean_steps, 4),
            "std_steps": round(self.std_steps, 4),
        }


def evaluate(policy, games: list[GameSpec], runs: int = 1, seed: int = 0,
             max_steps: int = 50) -> Metrics:
    """Greedy episodes per game per run; mean and std across runs."""
    run_scores, run_steps = [], []
    for run in range(runs):
        scores, lengths = [], []
        for index, game in enumerate(games):
            episode_seed = derive_seed(seed, run * len(games) + index)
            log = run_episode(game, policy, mode="greedy", seed=episode_seed,
                              max_steps=max_steps)
            scores.append(log.normalized_score)
            lengths.append(len(log))
        run_scores.append(float(np.mean(scores)))
        run_steps.append(float(np.mean(lengths)))
    return Metrics(
        mean_score=float(np.mean(run_scores)),
        std_score=float(np.std(run_scores)),
        mean_steps=float(np.mean(run_steps)),
        std_steps=float(np.std(run_steps)),
        per_run=[{"score": s, "steps": t} for s, t in zip(run_scores, run_steps)],
    )


@dataclass
class TrainResult:
    curve: list[dict]
    final_eval: Metrics
    subgraph_nodes: float
    subgraph_edges: float


def train_agent(games: list[GameSpec], policy, store: T.ParameterStore,
                config: TrainConfig, eval_every: int = 1) -> TrainResult:
    """Round-robin over training games, one gradient step per episode."""
    optimizer = make_optimizer(store, config)
    curve: list[dict] = []
    node_counts: list[float] = []
    edge_counts: list[float] = []
    for episode in range(config.episodes):
        game = games[episode % len(games)]
        rollout_seed = derive_seed(config.seed, 2 * episode)
        log = run_episode(game, policy, mode="sample", seed=rollout_seed,
                          max_steps=config.max_steps)
        a2c_update(log, store, config, optimizer)
        if log.steps:
            node_counts.append(float(np.mean([s.subgraph_nodes for s in log.steps])))
            edge_counts.append(float(np.mean([s.subgraph_edges for s in log.steps])))
        if (episode + 1) % eval_every == 0:
            eval_log = run_episode(game, policy, mode="greedy",
                                   seed=derive_seed(config.seed, 2 * episode + 1),
                                   max_steps=config.max_steps)
            curve.append(
                {
                    "episode": episode + 1,
                    "train_score": log.normalized_score,
                    "train_steps": len(log),
                    "eval_score": eval_log.normalized_score,
                    "eval_steps": len(eval_log),
                }
            )
    final = evaluate(policy, games, runs=1, seed=derive_seed(config.seed, 999_999),
                     max_steps=config.max_steps)
    return TrainResult(
        curve=curve,
        final_eval=final,
        subgraph_nodes=float(np.mean(node_counts)) if node_counts else 0.0,
        subgraph_edges=float(np.mean(edge_counts)) if edge_counts else 0.0,
    )


def write_curve_csv(path, rows: list[dict]) -> None:
    """episode,mean_score,std_score,mean_steps,std_steps; written incrementally."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["episode", "mean_score", "std_score", "mean_steps", "std_steps"])
        for row in rows:
            writer.writerow(
                [
                    row["episode"],
                    f"{row['mean_score']:.6f}",
                    f"{row['std_score']:.6f}",
                    f"{row['mean_steps']:.6f}",
                    f"{row['std_steps']:.6f}",
                ]
            )
            handle.flush()


def experiment_matrix(
    games_by_tier: dict[str, list[GameSpec]],
    strategies: list[str],
    modes: list[str],
    config: TrainConfig,
    out_dir,
    build_policy,
) -> dict:
    """Cross product {strategy} x {mode} x {tier}; one curve CSV per cell.

    `build_policy(strategy, mode, seed)` returns (policy, store) wired to the
    requested knowledge strategy.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = []
    for tier, games in sorted(games_by_tier.items()):
        for strategy in strategies:
            for mode in modes:
                cell_rows: list[list[dict]] = []
                nodes, edges, finals_score, finals_steps = [], [], [], []
                for run in range(config.runs):
                    run_seed = derive_seed(config.seed, hash_cell(tier, strategy, mode, run))
                    policy, store = build_policy(strategy, mode, run_seed)
                    run_config = TrainConfig(
                        episodes=config.episodes,
                        runs=config.runs,
                        gamma=config.gamma,
                        batch_size=config.batch_size,
                        max_steps=config.max_steps,
                        learning_rate=config.learning_rate,
                        entropy_coef=config.entropy_coef,
                        value_coef=config.value_coef,
                        seed=run_seed,
                        optimizer=config.optimizer,
                        grad_clip=config.grad_clip,
                    )
                    result = train_agent(games, policy, store, run_config)
                    cell_rows.append(result.curve)
                    nodes.append(result.subgraph_nodes)
                    edges.append(result.subgraph_edges)
                    finals_score.append(result.final_eval.mean_score)
                    finals_steps.append(result.final_eval.mean_steps)
                merged = _merge_curves(cell_rows)
                name = f"{tier}_{strategy}_{mode}"
                write_curve_csv(out / f"{name}.csv", merged)
                cells.append(
                    {
                        "tier": tier,
                        "strategy": strategy,
                        "mode": mode,
                        "episodes": config.episodes,
                        "runs": config.runs,
                        "final": {
                            "mean_score": round(float(np.mean(finals_score)), 4),
                            "std_score": round(float(np.std(finals_score)), 4),
                            "mean_steps": round(float(np.mean(finals_steps)), 4),
                            "std_steps": round(float(np.std(finals_steps)), 4),
                        },
                        "subgraph": {
                            "mean_nodes": round(float(np.mean(nodes)), 4),
                            "mean_edges": round(float(np.mean(edges)), 4),
                        },
                        "curve_file": f"{name}.csv",
                    }
                )
    report = {
        "schema_version": 1,
        "config": {
            "episodes": config.episodes,
            "runs": config.runs,
            "gamma": config.gamma,
            "batch_size": config.batch_size,
            "max_steps": config.max_steps,
            "learning_rate": config.learning_rate,
            "entropy_coef": config.entropy_coef,
            "value_coef": config.value_coef,
            "optimizer": config.optimizer,
            "grad_clip": config.grad_clip,
            "seed": config.seed,
        },
        "cells": cells,
    }
    with open(out / "report.json", "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return report


def hash_cell(tier: str, strategy: str, mode: str, run: int) -> int:
    packed = f"{tier}/{strategy}/{mode}/{run}".encode()
    value = 1469598103934665603
    for byte in packed:
        value = (value ^ byte) * 1099511628211 % (1 << 64)
    return value


def _merge_curves(runs: list[list[dict]]) -> list[dict]:
    merged = []
    if not runs or not runs[0]:
        return merged
    for idx in range(len(runs[0])):
        scores = [run[idx]["eval_score"] for run in runs]
        steps = [run[idx]["eval_steps"] for run in runs]
        merged.append(
            {
                "episode": runs[0][idx]["episode"],
                "mean_score": float(np.mean(scores)),
                "std_score": float(np.std(scores)),
                "mean_steps": float(np.mean(steps)),
                "std_steps": float(np.std(steps)),
            }
        )
    return merged


def episode_to_jsonl(log: EpisodeLog, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in log.transcript():
            handle.write(json.dumps(record, sort_keys=True) + "\n")
