"""Concept graph storage, entity linking, and dynamic subgraph extraction."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources

OBJECT = "object"
CONTAINER = "container"

_MAX_CHUNK = 3  # longest display name is "adjective adjective noun"


def normalize(concept: str) -> str:
    """Canonical node form: lowercase, single underscores for whitespace."""
    return "_".join(concept.lower().split())


class ConceptGraph:
    """Immutable-after-load directed triple store with bidirectional adjacency."""

    def __init__(self, triples=()):
        self.nodes: set[str] = set()
        self.edges: list[tuple[str, str, str]] = []
        self._edge_set: set[tuple[str, str, str]] = set()
        self._out: dict[str, list[tuple[str, str, str]]] = {}
        self._in: dict[str, list[tuple[str, str, str]]] = {}
        for head, relation, tail in triples:
            self.add_edge(head, relation, tail)

    def add_edge(self, head: str, relation: str, tail: str) -> None:
        edge = (normalize(head), relation, normalize(tail))
        if edge in self._edge_set:
            return
        self._edge_set.add(edge)
        self.edges.append(edge)
        for node in (edge[0], edge[2]):
            if node not in self.nodes:
                self.nodes.add(node)
                self._out[node] = []
                self._in[node] = []
        self._out[edge[0]].append(edge)
        self._in[edge[2]].append(edge)

    def has_node(self, concept: str) -> bool:
        return concept in self.nodes

    def has_edge(self, head: str, relation: str, tail: str) -> bool:
        return (head, relation, tail) in self._edge_set

    def incident(self, node: str) -> list[tuple[str, str, str]]:
        """Edges touching `node`, outgoing first; both directions."""
        return self._out.get(node, []) + self._in.get(node, [])

    def neighbors(self, node: str) -> list[str]:
        seen: dict[str, None] = {}
        for head, _, tail in self.incident(node):
            other = tail if head == node else head
            seen.setdefault(other, None)
        return list(seen)

    def connected(self, head: str, tail: str) -> bool:
        return any(h == head and t == tail or h == tail and t == head
                   for h, _, t in self.incident(head))

    def distances_from(self, source: str, cap: int | None = None) -> dict[str, int]:
        """Undirected BFS hop counts from `source`."""
        dist = {source: 0}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            if cap is not None and dist[node] >= cap:
                continue
            for other in self.neighbors(node):
                if other not in dist:
                    dist[other] = dist[node] + 1
                    queue.append(other)
        return dist


def load_tsv(path) -> ConceptGraph:
    """3-column head<TAB>relation<TAB>tail file; '#' starts a comment line."""
    graph = ConceptGraph()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"expected 3 tab-separated columns, got {line!r}")
            graph.add_edge(*parts)
    return graph


def _concept_from_uri(uri: str) -> str | None:
    parts = uri.split("/")
    # /c/en/apple or /c/en/apple/n/...
    if len(parts) < 4 or parts[1] != "c" or parts[2] != "en":
        return None
    return parts[3]


def load_conceptnet_csv(path) -> ConceptGraph:
    """ConceptNet 5-column assertion dump, filtered to English concepts."""
    graph = ConceptGraph()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 4:
                continue
            relation = parts[1].split("/")[-1]
            head = _concept_from_uri(parts[2])
            tail = _concept_from_uri(parts[3])
            if head and tail:
                graph.add_edge(head, relation, tail)
    return graph


def bundled_graph() -> ConceptGraph:
    with resources.as_file(resources.files("tidyup.data").joinpath("kg.tsv")) as path:
        return load_tsv(path)


def bundled_stopwords() -> frozenset[str]:
    text = resources.files("tidyup.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


@dataclass
class EntitySet:
    """Concepts observed so far, tagged object vs container-or-supporter."""

    concepts: list[str] = field(default_factory=list)
    tags: dict[str, str] = field(default_factory=dict)

    def add(self, concept: str, tag: str) -> bool:
        if concept not in self.tags:
            self.concepts.append(concept)
            self.tags[concept] = tag
            return True
        if tag == OBJECT and self.tags[concept] == CONTAINER:
            self.tags[concept] = OBJECT  # carried entities outrank room sightings
            return True
        return False

    def extend(self, delta) -> None:
        for concept, tag in delta:
            self.add(concept, tag)


def _match_runs(tokens, graph: ConceptGraph, stopwords) -> list[str]:
    """Maximal-munch node matches over runs of non-stopword tokens."""
    found: list[str] = []
    run: list[str] = []
    for token in [*(t.lower() for t in tokens), None]:
        if token is not None and token not in stopwords and any(c.isalnum() for c in token):
            run.append(token)
            continue
        i = 0
        while i < len(run):
            for n in range(min(_MAX_CHUNK, len(run) - i), 0, -1):
                candidate = normalize(" ".join(run[i : i + n]))
                if graph.has_node(candidate):
                    found.append(candidate)
                    i += n
                    break
            else:
                i += 1
        run = []
    return found


def link_entities(tokens, inventory_names, graph: ConceptGraph, stopwords=None):
    """Longest-match concepts from an observation; inventory entities are objects."""
    if stopwords is None:
        stopwords = bundled_stopwords()
    delta: list[tuple[str, str]] = []
    for name in inventory_names:
        for concept in _match_runs(name.split(), graph, stopwords):
            delta.append((concept, OBJECT))
    for concept in _match_runs(tokens, graph, stopwords):
        delta.append((concept, CONTAINER))
    seen: dict[str, str] = {}
    ordered: list[str] = []
    for concept, tag in delta:
        if concept not in seen:
            seen[concept] = tag
            ordered.append(concept)
        elif tag == OBJECT:
            seen[concept] = OBJECT
    return [(concept, seen[concept]) for concept in ordered]


@dataclass(frozen=True)
class Subgraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]
    strategy: str = "dc"
    mode: str = "evolve"

    def __contains__(self, node: str) -> bool:
        return node in self.nodes


EMPTY_SUBGRAPH = Subgraph(nodes=(), edges=(), strategy="none", mode="evolve")


def _present(entity_set: EntitySet, graph: ConceptGraph) -> list[str]:
    return [c for c in entity_set.concepts if graph.has_node(c)]


def _incident_edges(nodes, graph: ConceptGraph):
    seen: dict[tuple, None] = {}
    for node in nodes:
        for edge in graph.incident(node):
            seen.setdefault(edge, None)
    return list(seen)


def extract_direct(entity_set: EntitySet, graph: ConceptGraph) -> Subgraph:
    nodes = _present(entity_set, graph)
    members = set(nodes)
    edges = [e for e in _incident_edges(nodes, graph) if e[0] in members and e[2] in members]
    return Subgraph(nodes=tuple(nodes), edges=tuple(edges), strategy="dc")


def extract_contextual(entity_set: EntitySet, graph: ConceptGraph) -> Subgraph:
    nodes = _present(entity_set, graph)
    members = set(nodes)
    tags = entity_set.tags
    edges = [
        e
        for e in _incident_edges(nodes, graph)
        if e[0] in members and e[2] in members and tags[e[0]] != tags[e[2]]
    ]
    return Subgraph(nodes=tuple(nodes), edges=tuple(edges), strategy="cdc")


def extract_neighborhood(entity_set: EntitySet, graph: ConceptGraph) -> Subgraph:
    nodes = _present(entity_set, graph)
    edges = _incident_edges(nodes, graph)
    expanded: dict[str, None] = {n: None for n in nodes}
    for head, _, tail in edges:
        expanded.setdefault(head, None)
        expanded.setdefault(tail, None)
    return Subgraph(nodes=tuple(expanded), edges=tuple(edges), strategy="ng")


_EXTRACTORS = {
    "dc": extract_direct,
    "cdc": extract_contextual,
    "ng": extract_neighborhood,
}


def extract(entity_set: EntitySet, graph: ConceptGraph, strategy: str) -> Subgraph:
    if strategy == "none":
        return EMPTY_SUBGRAPH
    return _EXTRACTORS[strategy](entity_set, graph)


def merge_subgraphs(old: Subgraph, new: Subgraph) -> Subgraph:
    nodes: dict[str, None] = {n: None for n in old.nodes}
    for node in new.nodes:
        nodes.setdefault(node, None)
    edges: dict[tuple, None] = {e: None for e in old.edges}
    for edge in new.edges:
        edges.setdefault(edge, None)
    return Subgraph(
        nodes=tuple(nodes), edges=tuple(edges), strategy=new.strategy, mode=old.mode
    )


def update_subgraph(
    previous: Subgraph | None,
    entity_set: EntitySet,
    graph: ConceptGraph,
    strategy: str,
    mode: str = "evolve",
) -> Subgraph:
    """Evolve: grow with the enlarged entity set. Full: frozen after t=0."""
    if mode == "full":
        if previous is not None:
            return previous
        extracted = extract(entity_set, graph, strategy)
        return Subgraph(extracted.nodes, extracted.edges, strategy, "full")
    extracted = extract(entity_set, graph, strategy)
    if previous is None:
        return Subgraph(extracted.nodes, extracted.edges, strategy, "evolve")
    return merge_subgraphs(previous, extracted)


def manual_subgraph(goal_pairs, graph: ConceptGraph, max_hops: int = 2) -> Subgraph:
    """Union of all shortest paths (length <= 2*max_hops) between goal endpoints."""
    nodes: dict[str, None] = {}
    edges: dict[tuple, None] = {}
    for source_name, target_name in goal_pairs:
        source, target = normalize(source_name), normalize(target_name)
        if not graph.has_node(source) or not graph.has_node(target):
            continue
        from_source = graph.distances_from(source)
        if target not in from_source or from_source[target] > 2 * max_hops:
            continue
        from_target = graph.distances_from(target)
        length = from_source[target]
        on_path = {
            v for v, d in from_source.items() if v in from_target and d + from_target[v] == length
        }
        for v in sorted(on_path):
            nodes.setdefault(v, None)
        for head, relation, tail in graph.edges:
            if head not in on_path or tail not in on_path:
                continue
            forward = from_source.get(head, -2) + 1 + from_target.get(tail, -2) == length
            backward = from_source.get(tail, -2) + 1 + from_target.get(head, -2) == length
            if forward or backward:
                edges.setdefault((head, relation, tail), None)
    return Subgraph(nodes=tuple(nodes), edges=tuple(edges), strategy="manual", mode="full")


def overlap_stats(dataset, graph: ConceptGraph) -> dict:
    """Coverage report: goal pairs with direct edges / 2-hop / 3-hop, node matches."""
    entity_names = [e.name for e in dataset.objects] + [f.name for f in dataset.fixtures]
    goal_pairs: list[tuple[str, str]] = []
    for entry in dataset.objects:
        for goal in entry.goals:
            pair = (normalize(entry.name), normalize(goal.location))
            if pair not in goal_pairs:
                goal_pairs.append(pair)

    matched = sum(1 for name in entity_names if graph.has_node(normalize(name)))
    direct = hop2 = hop3 = 0
    for obj, loc in goal_pairs:
        if graph.has_node(obj) and graph.has_node(loc):
            if graph.connected(obj, loc):
                direct += 1
            dist = graph.distances_from(obj, cap=3).get(loc)
            if dist is not None and dist <= 2:
                hop2 += 1
            if dist is not None and dist <= 3:
                hop3 += 1

    def pct(count: int, total: int) -> float:
        return round(100.0 * count / total, 2) if total else 0.0

    return {
        "direct_pct": pct(direct, len(goal_pairs)),
        "unique_match_pct": pct(matched, len(entity_names)),
        "hop2_pct": pct(hop2, len(goal_pairs)),
        "hop3_pct": pct(hop3, len(goal_pairs)),
    }


def dumps_stats(stats: dict) -> str:
    return json.dumps(stats, indent=2, sort_keys=True) + "\n"
