"""Decision-makers: random, oracle, text-only, and commonsense co-attention agents.

All neural agents share one policy pipeline; the text-only agent is the
same network run with the subgraph forced empty, so only the learned
sentinel row feeds the knowledge pathway.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import kg
from . import tensor as T
from .engine import Observation, ParsedAction, surface
from .gamegen import GameSpec, _travel_walk
from .rng import SplitMix64
from .world import INVENTORY, EntityKind, is_floor

PAD_TOKEN = "<pad>"
SENTINEL = "<sentinel>"


class NoAdmissibleActions(Exception):
    pass


@dataclass
class AgentConfig:
    hidden_dim: int = 300
    att_dim: int = 64
    graph_dim: int = 64
    summary_dim: int = 64
    select_dim: int = 64
    gat_heads: int = 1
    bidirectional: bool = True
    strategy: str = "none"  # none | dc | cdc | ng | manual
    mode: str = "evolve"  # evolve | full
    manual_hops: int = 2

    @property
    def token_dim(self) -> int:
        return self.hidden_dim * (2 if self.bidirectional else 1)


@dataclass
class AgentContext:
    """Per-episode recurrent state and knowledge accumulators."""

    state: T.Tensor
    entity_set: kg.EntitySet = field(default_factory=kg.EntitySet)
    subgraph: kg.Subgraph | None = None
    last_tokens: tuple[str, ...] = ()


@dataclass
class PolicyOutput:
    probs: np.ndarray
    chosen: int
    value: T.Tensor
    log_prob: T.Tensor
    entropy: T.Tensor
    attention_nodes: list[str]
    attention: dict[str, list[float]]


def _subtokens(token: str) -> list[str]:
    return [part for part in re.split(r"[^a-z0-9]+", token.lower()) if part]


def lookup_embedding(token: str, table: dict[str, np.ndarray], dim: int) -> np.ndarray:
    """Exact hit, else mean of known sub-tokens, else zeros."""
    vec = table.get(token)
    if vec is not None:
        return vec
    known = [table[part] for part in _subtokens(token) if part in table]
    if known:
        return np.mean(known, axis=0)
    return np.zeros(dim)


class NeuralAgent:
    """Shared policy network; the graph strategy decides what it attends to."""

    def __init__(
        self,
        store: T.ParameterStore,
        config: AgentConfig,
        embeddings: dict[str, np.ndarray],
        graph: kg.ConceptGraph | None = None,
        kg_embeddings: dict[str, np.ndarray] | None = None,
        stopwords: frozenset[str] | None = None,
    ):
        self.store = store
        self.config = config
        self.embeddings = embeddings
        self.word_dim = T.embedding_dim(embeddings)
        self.kg_embeddings = kg_embeddings if kg_embeddings is not None else embeddings
        self.kg_dim = T.embedding_dim(self.kg_embeddings)
        self.graph = graph if graph is not None else kg.ConceptGraph()
        self.stopwords = stopwords if stopwords is not None else kg.bundled_stopwords()
        self.context: AgentContext | None = None
        self._rng = SplitMix64(0)
        self._cache: dict = {}
        self._build_parameters()

    # parameter layout -------------------------------------------------
    def _gru(self, prefix: str, input_dim: int, hidden: int) -> T.GruParams:
        p = self.store.parameter
        size = input_dim + hidden
        return T.GruParams(
            p(f"{prefix}.wz", (size, hidden)),
            p(f"{prefix}.bz", (hidden,), fan_in=size),
            p(f"{prefix}.wr", (size, hidden)),
            p(f"{prefix}.br", (hidden,), fan_in=size),
            p(f"{prefix}.wc", (size, hidden)),
            p(f"{prefix}.bc", (hidden,), fan_in=size),
        )

    def _build_parameters(self) -> None:
        cfg = self.config
        p = self.store.parameter
        self.text_fw = self._gru("text.fw", self.word_dim, cfg.hidden_dim)
        self.text_bw = self._gru("text.bw", self.word_dim, cfg.hidden_dim) if cfg.bidirectional else None
        self.context_gru = self._gru("context", cfg.token_dim, cfg.hidden_dim)
        self.sentinel = p("graph.sentinel", (self.kg_dim,))
        self.gat_heads = [
            T.GatHead(
                p(f"graph.gat{i}.w", (self.kg_dim, cfg.graph_dim)),
                p(f"graph.gat{i}.a", (2 * cfg.graph_dim,)),
            )
            for i in range(cfg.gat_heads)
        ]
        gat_out = cfg.graph_dim * cfg.gat_heads
        self.project_graph = p("coattend.project_graph", (gat_out, cfg.att_dim))
        self.project_tokens = p("coattend.project_tokens", (cfg.token_dim, cfg.att_dim))
        self.w0 = p("coattend.w0", (3 * cfg.att_dim,), fan_in=3 * cfg.att_dim)
        self.w_combine = p("coattend.w_combine", (4 * cfg.att_dim, cfg.summary_dim))
        self.w_general = p(
            "summary.w_general", (cfg.hidden_dim + cfg.token_dim, cfg.summary_dim)
        )
        select_in = cfg.hidden_dim + cfg.summary_dim + cfg.token_dim
        self.w2 = p("select.w2", (select_in, cfg.select_dim))
        self.b2 = p("select.b2", (cfg.select_dim,), fan_in=select_in)
        self.w1 = p("select.w1", (cfg.select_dim,))
        self.b1 = p("select.b1", (1,), fan_in=cfg.select_dim)
        self.w_value = p("value.w", (cfg.select_dim,))
        self.b_value = p("value.b", (1,), fan_in=cfg.select_dim)

    # episode lifecycle --------------------------------------------------
    def start_episode(self, game: GameSpec, seed: int) -> None:
        self.context = AgentContext(state=T.Tensor(np.zeros(self.config.hidden_dim)))
        self._rng = SplitMix64(seed)
        # params are frozen within an episode, so repeated observations,
        # action strings, and subgraphs can share one tape node each;
        # gradients accumulate through every reuse
        self._cache: dict = {}
        if self.config.strategy == "manual":
            pairs = []
            entities = game.initial_state.entities
            for goal in game.goals:
                pairs.append(
                    (entities[goal.object_id].base_name, entities[goal.location_id].base_name)
                )
            self.context.subgraph = kg.manual_subgraph(pairs, self.graph, self.config.manual_hops)
        elif self.config.mode == "full" and self.config.strategy != "none":
            full_set = kg.EntitySet()
            state = game.initial_state
            inventory_names = [
                state.entities[o].display_name for o in state.carried()
            ]
            room_names = [room.name for room in state.rooms.values()]
            other_names = [
                e.display_name for e in state.entities.values() if e.kind is not EntityKind.OBJECT
            ]
            object_names = [
                e.display_name for e in state.entities.values() if e.kind is EntityKind.OBJECT
            ]
            tokens = tuple(" . ".join(room_names + other_names).split())
            full_set.extend(
                kg.link_entities(tokens, object_names, self.graph, self.stopwords)
            )
            self.context.subgraph = kg.update_subgraph(
                None, full_set, self.graph, self.config.strategy, "full"
            )

    # encoders -----------------------------------------------------------
    def _embed(self, tokens) -> np.ndarray:
        toks = list(tokens) if tokens else [PAD_TOKEN]
        return np.stack([lookup_embedding(t, self.embeddings, self.word_dim) for t in toks])

    def _run_direction(self, rows: T.Tensor, params: T.GruParams, reverse: bool):
        n = rows.data.shape[0]
        hidden = T.Tensor(np.zeros(self.config.hidden_dim))
        states: list[T.Tensor | None] = [None] * n
        order = range(n - 1, -1, -1) if reverse else range(n)
        for k in order:
            hidden = T.gru_cell(hidden, T.take_row(rows, k), params)
            states[k] = hidden
        return states

    def encode_observation(self, tokens) -> tuple[T.Tensor, T.Tensor]:
        """Per-token encodings O (N x token_dim) and the pooled vector o_t."""
        rows = T.Tensor(self._embed(tokens))
        forward = self._run_direction(rows, self.text_fw, reverse=False)
        if self.text_bw is None:
            return T.stack_rows(forward), forward[-1]
        backward = self._run_direction(rows, self.text_bw, reverse=True)
        per_token = T.stack_rows(
            [T.concat([f, b]) for f, b in zip(forward, backward)]
        )
        pooled = T.concat([forward[-1], backward[0]])
        return per_token, pooled

    def encode_actions(self, surfaces: list[str]) -> list[T.Tensor]:
        """Final encoder states per action; identical strings share one encoding."""
        out = []
        for text in surfaces:
            key = ("act", text)
            if key not in self._cache:
                _, vec = self.encode_observation(tuple(text.split()))
                self._cache[key] = vec
            out.append(self._cache[key])
        return out

    def update_context(self, observation_vec: T.Tensor) -> T.Tensor:
        self.context.state = T.gru_cell(self.context.state, observation_vec, self.context_gru)
        return self.context.state

    def encode_graph(self, subgraph: kg.Subgraph) -> T.Tensor:
        """GAT-encoded node rows plus a trailing learned sentinel row."""
        rows: list[T.Tensor] = []
        for node in subgraph.nodes:
            words = node.split("_")
            vectors = [lookup_embedding(w, self.kg_embeddings, self.kg_dim) for w in words]
            rows.append(T.Tensor(np.mean(vectors, axis=0)))
        rows.append(self.sentinel)
        feats = T.stack_rows(rows)
        index = {node: i for i, node in enumerate(subgraph.nodes)}
        edges = [(index[h], index[t]) for h, _, t in subgraph.edges]
        return T.gat_layer(feats, edges, self.gat_heads)

    def co_attend(self, node_encodings: T.Tensor, token_encodings: T.Tensor) -> T.Tensor:
        """Bidirectional attention between graph rows and token rows.

        S[j,i] pairs token j with node i; normalizing its columns gives each
        node a distribution over tokens, normalizing its rows gives each
        token a distribution over nodes. A re-reads the tokens per node,
        B routes node content through the token distributions and back.
        """
        g = T.matmul(node_encodings, self.project_graph)
        o = T.matmul(token_encodings, self.project_tokens)
        similarity = T.trilinear_similarity(g, o, self.w0)
        over_nodes = T.softmax(similarity, axis=1)
        over_tokens = T.softmax(similarity, axis=0)
        graph_to_context = T.matmul(T.transpose(over_tokens), o)
        context_to_graph = T.matmul(
            T.transpose(over_tokens), T.matmul(over_nodes, g)
        )
        combined = T.concat(
            [
                g,
                graph_to_context,
                T.mul(g, graph_to_context),
                T.mul(g, context_to_graph),
            ],
            axis=1,
        )
        return T.matmul(combined, self.w_combine)

    def graph_summaries(
        self, final_graph: T.Tensor, state_vec: T.Tensor, action_vecs: list[T.Tensor]
    ) -> tuple[T.Tensor, np.ndarray]:
        """General attention over nodes per action: g_i = alpha_i . G."""
        queries = T.stack_rows([T.concat([state_vec, a]) for a in action_vecs])
        scores = T.matmul(T.matmul(queries, self.w_general), T.transpose(final_graph))
        alphas = T.softmax(scores, axis=1)
        summaries = T.matmul(alphas, final_graph)
        return summaries, alphas.data.copy()

    def select_action(
        self,
        state_vec: T.Tensor,
        summaries: T.Tensor,
        action_vecs: list[T.Tensor],
        mode: str,
        surfaces: list[str],
    ) -> tuple[np.ndarray, int, T.Tensor, T.Tensor, T.Tensor]:
        if not action_vecs:
            raise NoAdmissibleActions("no admissible actions to select from")
        k = len(action_vecs)
        state_rows = T.stack_rows([state_vec] * k)
        features = T.concat([state_rows, summaries, T.stack_rows(action_vecs)], axis=1)
        hidden = T.relu(T.add(T.matmul(features, self.w2), self.b2))
        logits = T.add(T.matmul(hidden, self.w1), self.b1)
        probs = T.softmax(logits)
        log_probs = T.log_softmax(logits)
        mean_hidden = T.relu(T.add(T.matmul(T.tmean(features, axis=0), self.w2), self.b2))
        value = T.add(T.matmul(mean_hidden, self.w_value), T.pick(self.b_value, 0))
        if mode == "greedy":
            chosen = int(np.argmax(probs.data))  # surfaces sorted, first max wins ties
        elif mode == "sample":
            point = self._rng.random()
            cumulative = np.cumsum(probs.data)
            chosen = int(np.searchsorted(cumulative, point))
            chosen = min(chosen, k - 1)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        entropy = T.scale(T.tsum(T.mul(probs, log_probs)), -1.0)
        return probs.data.copy(), chosen, value, T.pick(log_probs, chosen), entropy

    # one decision -------------------------------------------------------
    def act(
        self,
        observation: Observation,
        admissible: list[tuple[ParsedAction, str]],
        inventory_names: list[str],
        mode: str = "sample",
    ) -> PolicyOutput:
        cfg = self.config
        context = self.context
        if context is None:
            raise RuntimeError("start_episode was not called")
        if cfg.strategy not in ("none", "manual"):
            # anything takeable is an object the moment it is seen; this keeps
            # the object/container split stable instead of flipping on pickup
            carryable = [
                text[len("take ") :].split(" from ")[0]
                for _, text in admissible
                if text.startswith("take ")
            ]
            delta = kg.link_entities(
                observation.tokens, [*inventory_names, *carryable], self.graph, self.stopwords
            )
            context.entity_set.extend(delta)
            if cfg.mode != "full":
                context.subgraph = kg.update_subgraph(
                    context.subgraph, context.entity_set, self.graph, cfg.strategy, cfg.mode
                )
        subgraph = context.subgraph if context.subgraph is not None else kg.EMPTY_SUBGRAPH

        obs_key = ("obs", observation.text)
        if obs_key not in self._cache:
            self._cache[obs_key] = self.encode_observation(observation.tokens)
        token_encodings, observation_vec = self._cache[obs_key]
        surfaces = [text for _, text in admissible]
        action_vecs = self.encode_actions(surfaces)
        state_vec = self.update_context(observation_vec)
        graph_key = ("coattend", subgraph.nodes, subgraph.edges, observation.text)
        if graph_key not in self._cache:
            node_key = ("graph", subgraph.nodes, subgraph.edges)
            if node_key not in self._cache:
                self._cache[node_key] = self.encode_graph(subgraph)
            self._cache[graph_key] = self.co_attend(self._cache[node_key], token_encodings)
        final_graph = self._cache[graph_key]
        summaries, alphas = self.graph_summaries(final_graph, state_vec, action_vecs)
        probs, chosen, value, log_prob, entropy = self.select_action(
            state_vec, summaries, action_vecs, mode, surfaces
        )
        nodes = [*subgraph.nodes, SENTINEL]
        return PolicyOutput(
            probs=probs,
            chosen=chosen,
            value=value,
            log_prob=log_prob,
            entropy=entropy,
            attention_nodes=nodes,
            attention={text: alphas[i].tolist() for i, text in enumerate(surfaces)},
        )


class RandomAgent:
    """Uniform choice over the admissible list."""

    def __init__(self, seed: int = 0):
        self._rng = SplitMix64(seed)

    def start_episode(self, game: GameSpec, seed: int) -> None:
        self._rng = SplitMix64(seed)

    def act(self, observation, admissible, inventory_names, mode="sample") -> PolicyOutput:
        if not admissible:
            raise NoAdmissibleActions("no admissible actions to select from")
        k = len(admissible)
        chosen = self._rng.randint(k)
        probs = np.full(k, 1.0 / k)
        zero = T.Tensor(np.zeros(()))
        return PolicyOutput(
            probs=probs,
            chosen=chosen,
            value=zero,
            log_prob=T.Tensor(np.log(1.0 / k)),
            entropy=T.Tensor(np.log(k)),
            attention_nodes=[],
            attention={},
        )


class OracleAgent:
    """Privileged planner: reads the goal triples and plays the optimal line."""

    def __init__(self):
        self._plan: list[ParsedAction] = []

    def start_episode(self, game: GameSpec, seed: int) -> None:
        self._plan = plan_optimal_actions(game)

    def act(self, observation, admissible, inventory_names, mode="greedy") -> PolicyOutput:
        if not self._plan:
            raise NoAdmissibleActions("oracle plan exhausted before the episode ended")
        intended = self._plan.pop(0)
        for index, (action, _) in enumerate(admissible):
            if action == intended:
                k = len(admissible)
                probs = np.zeros(k)
                probs[index] = 1.0
                zero = T.Tensor(np.zeros(()))
                return PolicyOutput(
                    probs=probs,
                    chosen=index,
                    value=zero,
                    log_prob=zero,
                    entropy=zero,
                    attention_nodes=[],
                    attention={},
                )
        raise NoAdmissibleActions(f"planned action {intended} not admissible")


def plan_optimal_actions(game: GameSpec) -> list[ParsedAction]:
    """take / put / go sequence realizing optimal_steps exactly."""
    state = game.initial_state
    walk = _travel_walk(game)
    goal_of = {g.object_id: g for g in game.goals}
    placement = dict(state.placement)
    plan: list[ParsedAction] = []
    carried = {o for o, place in placement.items() if place == INVENTORY}
    delivered: set[str] = set()

    def room_of(place: str) -> str:
        if is_floor(place):
            return place[len("floor:") :]
        return state.room_of_fixture(place)

    for here, there in zip(walk, [*walk[1:], None]):
        takeable = sorted(
            o for o, place in placement.items()
            if o not in carried and o not in delivered and room_of(place) == here
        )
        for obj in takeable:
            source = None if is_floor(placement[obj]) else placement[obj]
            plan.append(ParsedAction("take", obj, source))
            carried.add(obj)
        for obj in sorted(carried):
            goal = goal_of[obj]
            if goal.room_id != here:
                continue
            fixture = state.entities[goal.location_id]
            verb = "insert" if fixture.kind is EntityKind.CONTAINER else "put"
            plan.append(ParsedAction(verb, obj, goal.location_id))
            carried.discard(obj)
            delivered.add(obj)
            placement[obj] = goal.location_id
        if there is not None:
            room = state.rooms[here]
            direction = next(d for d in sorted(room.exits) if room.exits[d] == there)
            plan.append(ParsedAction("go", direction))
    return plan


def attention_record(step: int, output: PolicyOutput) -> dict:
    return {
        "t": step,
        "nodes": output.attention_nodes,
        "weights_per_action": output.attention,
    }
