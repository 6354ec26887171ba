"""Command-line entrypoint: generate, play, run, train, eval, stats, serve, attn."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import engine, gamegen, kg, train, world
from . import tensor as T
from .agents import AgentConfig, NeuralAgent, OracleAgent, RandomAgent
from .rng import derive_seed


class CliError(Exception):
    pass


def _log(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _load_dataset(path: str | None) -> gamegen.Dataset:
    if path is None:
        return gamegen.bundled_dataset()
    return gamegen.load_dataset(path)


def _load_graph(path: str | None) -> kg.ConceptGraph:
    if path is None:
        return kg.bundled_graph()
    if str(path).endswith(".csv"):
        return kg.load_conceptnet_csv(path)
    return kg.load_tsv(path)


def _load_embeddings(path: str | None) -> dict:
    if path is None:
        with resources.as_file(
            resources.files("tidyup.data").joinpath("embeddings.txt")
        ) as bundled:
            return T.load_embeddings(bundled)
    return T.load_embeddings(path)


def _pool_for_split(dataset: gamegen.Dataset, split: str, seed: int):
    train_pool, out_pool = gamegen.split_dataset(dataset.objects, seed)
    return out_pool if split == "out" else train_pool


def cmd_gen(args) -> int:
    dataset = _load_dataset(args.dataset)
    pool = _pool_for_split(dataset, args.split, args.seed)
    config = gamegen.DifficultyConfig.for_tier(args.tier, distractors=args.distractors)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for index in range(args.count):
        game_seed = derive_seed(args.seed, index)
        spec = gamegen.sample_game(dataset, pool, config, args.split, seed=game_seed)
        path = out / f"{args.tier}_{args.split}_{args.seed}_{index:04d}.twc.json"
        gamegen.save_spec(spec, path)
        _log(args, f"wrote {path}")
    return 0


def cmd_play(args) -> int:
    spec = gamegen.load_spec(args.game)
    state = spec.initial_state
    goals = list(spec.goals)
    observation = engine.render_observation(state)
    print(observation.text)
    while not world.is_terminal(state, goals, args.max_steps):
        try:
            command = input("> ").strip()
        except EOFError:
            print()
            return 0
        if command in ("quit", "exit"):
            return 0
        try:
            action = engine.parse(command, state)
            observation, reward, done, state = engine.step(state, action, goals, args.max_steps)
        except engine.ParseError as error:
            print(f"({error})")
            continue
        except world.InadmissibleAction as error:
            print(f"({error})")
            continue
        print(observation.text)
    print(f"*** done: score {state.score} / {len(goals)} in {state.step} steps ***")
    return 0


def _build_policy(args, agent_name: str, strategy: str, mode: str, seed: int, graph, embeddings):
    if agent_name == "random":
        return RandomAgent(seed), None
    if agent_name == "oracle":
        return OracleAgent(), None
    if agent_name == "text":
        strategy = "none"
    config = AgentConfig(
        hidden_dim=args.hidden_dim,
        att_dim=args.att_dim,
        graph_dim=args.att_dim,
        summary_dim=args.att_dim,
        select_dim=args.att_dim,
        strategy=strategy,
        mode=mode,
    )
    store = T.ParameterStore(seed=seed)
    agent = NeuralAgent(store, config, embeddings, graph)
    if args.params:
        store.load(args.params)
    return agent, store


def _games_from_dir(path: str) -> list[gamegen.GameSpec]:
    files = sorted(Path(path).glob("*.twc.json"))
    if not files:
        raise CliError(f"no .twc.json games under {path}")
    return [gamegen.load_spec(f) for f in files]


def cmd_run(args) -> int:
    games = _games_from_dir(args.games)
    graph = _load_graph(args.kg)
    embeddings = _load_embeddings(args.embeddings)

    # each run gets its own policy instance; runs fan out across --jobs workers
    def one_run(run: int):
        policy, _ = _build_policy(
            args, args.agent, args.graph_strategy, args.mode,
            derive_seed(args.seed, 1000 + run), graph, embeddings,
        )
        metrics = train.evaluate(
            policy, games, runs=1, seed=derive_seed(args.seed, run), max_steps=args.max_steps
        )
        return metrics

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one_run, range(args.runs)))
    else:
        results = [one_run(run) for run in range(args.runs)]
    scores = [m.mean_score for m in results]
    steps = [m.mean_steps for m in results]
    report = {
        "schema_version": gamegen.SCHEMA_VERSION,
        "agent": args.agent,
        "graph": args.graph_strategy,
        "mode": args.mode,
        "games": len(games),
        "runs": args.runs,
        "seed": args.seed,
        "mean_score": round(float(np.mean(scores)), 4),
        "std_score": round(float(np.std(scores)), 4),
        "mean_steps": round(float(np.mean(steps)), 4),
        "std_steps": round(float(np.std(steps)), 4),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _transcribe(args, games, policy, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, game in enumerate(games):
        log = train.run_episode(
            game, policy, mode="greedy", seed=derive_seed(args.seed, index),
            max_steps=args.max_steps, record_attention=True,
        )
        path = out_dir / f"episode_{index:04d}.jsonl"
        with open(path, "w", encoding="utf-8") as handle:
            for step, record in zip(log.steps, log.transcript()):
                if step.attention is not None:
                    record = {**record, "attention": step.attention}
                handle.write(json.dumps(record, sort_keys=True) + "\n")
        _log(args, f"wrote {path}")


def cmd_episodes(args) -> int:
    games = _games_from_dir(args.games)
    graph = _load_graph(args.kg)
    embeddings = _load_embeddings(args.embeddings)
    policy, _ = _build_policy(
        args, args.agent, args.graph_strategy, args.mode, args.seed, graph, embeddings
    )
    _transcribe(args, games, policy, Path(args.out))
    return 0


def _matrix(args, do_train: bool) -> int:
    dataset = _load_dataset(args.dataset)
    graph = _load_graph(args.kg)
    embeddings = _load_embeddings(args.embeddings)
    tiers = args.tiers.split(",")
    strategies = args.strategies.split(",")
    modes = args.modes.split(",")
    games_by_tier = {}
    for tier in tiers:
        pool = _pool_for_split(dataset, args.split, args.seed)
        config = gamegen.DifficultyConfig.for_tier(tier)
        games_by_tier[tier] = [
            gamegen.sample_game(dataset, pool, config, args.split, derive_seed(args.seed, i))
            for i in range(args.games_per_tier)
        ]
    train_config = train.TrainConfig(
        episodes=args.episodes if do_train else 1,
        runs=args.runs,
        gamma=args.gamma,
        max_steps=args.max_steps,
        learning_rate=args.learning_rate,
        entropy_coef=args.entropy_coef,
        value_coef=args.value_coef,
        seed=args.seed,
        optimizer=args.optimizer,
        grad_clip=args.grad_clip,
    )

    def build_policy(strategy, mode, seed):
        config = AgentConfig(
            hidden_dim=args.hidden_dim,
            att_dim=args.att_dim,
            graph_dim=args.att_dim,
            summary_dim=args.att_dim,
            select_dim=args.att_dim,
            strategy=strategy,
            mode=mode,
        )
        store = T.ParameterStore(seed=seed)
        return NeuralAgent(store, config, embeddings, graph), store

    report = train.experiment_matrix(
        games_by_tier, strategies, modes, train_config, args.out, build_policy
    )
    _log(args, f"wrote report to {args.out}/report.json")
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    return _matrix(args, do_train=True)


def cmd_eval(args) -> int:
    return _matrix(args, do_train=False)


def cmd_stats(args) -> int:
    dataset = _load_dataset(args.dataset)
    graph = _load_graph(args.kg)
    stats = kg.overlap_stats(dataset, graph)
    output = kg.dumps_stats(stats)
    if args.out:
        Path(args.out).write_text(output)
    print(output, end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import build_app, load_games_dir

    games = load_games_dir(args.games)
    if not games:
        raise CliError(f"no .twc.json games under {args.games}")
    static = args.static if args.static and Path(args.static).is_dir() else None
    app = build_app(games, args.data_dir, static)
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def cmd_attn(args) -> int:
    steps = []
    with open(args.log, encoding="utf-8") as handle:
        for line in handle:
            record = json.loads(line)
            attention = record.get("attention")
            if attention is None:
                continue
            steps.append(
                {
                    "t": record["t"],
                    "action_taken": record.get("action"),
                    "nodes": attention["nodes"],
                    "weights_per_action": attention["weights_per_action"],
                }
            )
    if not steps:
        raise CliError(f"no attention records in {args.log}")
    payload = {"schema_version": 1, "steps": steps}
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _log(args, f"wrote {args.out} ({len(steps)} steps)")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--config", help="JSON file overlaying unset flags")


def _add_agent_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--agent", default="random",
                        choices=["random", "oracle", "text", "commonsense"])
    parser.add_argument("--graph", dest="graph_strategy", default="none",
                        choices=["none", "dc", "cdc", "ng", "manual"])
    parser.add_argument("--mode", default="evolve", choices=["evolve", "full"])
    parser.add_argument("--embeddings", help="embedding file (default: bundled)")
    parser.add_argument("--kg", help="knowledge graph TSV/CSV (default: bundled)")
    parser.add_argument("--params", help="parameter checkpoint to load")
    parser.add_argument("--hidden-dim", type=int, default=300)
    parser.add_argument("--att-dim", type=int, default=64)
    parser.add_argument("--max-steps", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tidyup",
                                     description="house cleanup text games and agents")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate game files")
    gen.add_argument("--tier", required=True, choices=list(gamegen.TIERS))
    gen.add_argument("--split", default="train", choices=list(gamegen.SPLITS))
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--dataset", help="dataset JSON (default: bundled)")
    gen.add_argument("--out", required=True)
    gen.add_argument("--distractors", type=int, default=2)
    _add_common(gen)
    gen.set_defaults(func=cmd_gen)

    play = sub.add_parser("play", help="interactive terminal session")
    play.add_argument("game")
    play.add_argument("--max-steps", type=int, default=50)
    _add_common(play)
    play.set_defaults(func=cmd_play)

    run = sub.add_parser("run", help="evaluate an agent on a game directory")
    run.add_argument("--games", required=True)
    run.add_argument("--runs", type=int, default=1)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", help="write the metrics JSON here too")
    _add_agent_flags(run)
    _add_common(run)
    run.set_defaults(func=cmd_run)

    episodes = sub.add_parser("episodes", help="write greedy episode transcripts (with attention)")
    episodes.add_argument("--games", required=True)
    episodes.add_argument("--out", required=True)
    _add_agent_flags(episodes)
    _add_common(episodes)
    episodes.set_defaults(func=cmd_episodes)

    for name, func in (("train", cmd_train), ("eval", cmd_eval)):
        matrix = sub.add_parser(name, help=f"{name} the experiment matrix")
        matrix.add_argument("--tiers", default="easy")
        matrix.add_argument("--strategies", default="none,cdc")
        matrix.add_argument("--modes", default="evolve")
        matrix.add_argument("--split", default="train", choices=list(gamegen.SPLITS))
        matrix.add_argument("--games-per-tier", type=int, default=5)
        matrix.add_argument("--episodes", type=int, default=100)
        matrix.add_argument("--runs", type=int, default=10)
        matrix.add_argument("--gamma", type=float, default=0.9)
        matrix.add_argument("--learning-rate", type=float, default=1e-3)
        matrix.add_argument("--entropy-coef", type=float, default=0.01)
        matrix.add_argument("--value-coef", type=float, default=0.5)
        matrix.add_argument("--optimizer", default="sgd", choices=["sgd", "adam"])
        matrix.add_argument("--grad-clip", type=float, default=5.0)
        matrix.add_argument("--dataset")
        matrix.add_argument("--out", required=True)
        _add_agent_flags(matrix)
        _add_common(matrix)
        matrix.set_defaults(func=func)

    stats = sub.add_parser("stats", help="knowledge-graph coverage report")
    stats.add_argument("--kg")
    stats.add_argument("--dataset")
    stats.add_argument("--out")
    _add_common(stats)
    stats.set_defaults(func=cmd_stats)

    serve = sub.add_parser("serve", help="human-play HTTP service")
    serve.add_argument("--addr", default="127.0.0.1:8000")
    serve.add_argument("--data-dir", required=True)
    serve.add_argument("--games", required=True)
    serve.add_argument("--static", help="built web UI directory")
    _add_common(serve)
    serve.set_defaults(func=cmd_serve)

    attn = sub.add_parser("attn", help="attention export for the viewer")
    attn.add_argument("--log", required=True)
    attn.add_argument("--out", required=True)
    _add_common(attn)
    attn.set_defaults(func=cmd_attn)

    return parser


def _apply_config_overlay(args: argparse.Namespace, argv: list[str]) -> None:
    """Precedence: explicit flags > config file values > parser defaults."""
    if not getattr(args, "config", None):
        return
    with open(args.config, encoding="utf-8") as handle:
        overlay = json.load(handle)
    given = {token.split("=")[0].lstrip("-").replace("-", "_")
             for token in argv if token.startswith("--")}
    for key, value in overlay.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in given:
            setattr(args, attr, value)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_overlay(args, argv)
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError, gamegen.DatasetTooSmall,
            gamegen.ExhaustedVocabulary) as error:
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
