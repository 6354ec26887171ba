"""Independent reference implementations the tests check the library against.

Everything here is deliberately naive (loops, finite differences,
exhaustive enumeration) and never calls the code path it verifies.
"""

import numpy as np


def finite_difference_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central differences of scalar-valued f at x, elementwise."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        upper = f(x)
        flat[i] = original - eps
        lower = f(x)
        flat[i] = original
        out[i] = (upper - lower) / (2 * eps)
    return grad


def relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    # floor keeps FD roundoff noise (~1e-10 absolute at eps=1e-6) from
    # dominating entries whose true gradient is itself ~1e-8
    denom = np.maximum(np.abs(approx) + np.abs(exact), 1e-4)
    return float(np.max(np.abs(approx - exact) / denom))


def check_grad(build_loss, params: dict, eps: float = 1e-6, tol: float = 1e-4) -> None:
    """Assert autodiff grads match central differences for every named param.

    `build_loss()` must rebuild the graph from the live param tensors and
    return the scalar loss Tensor.
    """
    from tidyup import tensor as T

    for tensor in params.values():
        tensor.zero_grad()
    loss = build_loss()
    T.backward(loss)
    for name, tensor in params.items():
        def eval_loss(_data, _tensor=tensor):
            return float(build_loss().data)

        numeric = finite_difference_grad(eval_loss, tensor.data, eps=eps)
        err = relative_error(tensor.grad, numeric)
        assert err < tol, f"{name}: rel err {err:.2e} (tol {tol})"


def softmax_loops(x, axis=-1):
    """Plain-python softmax for small arrays."""
    arr = np.asarray(x, dtype=np.float64)
    moved = np.moveaxis(arr, axis, -1)
    out = np.empty_like(moved)
    flat_in = moved.reshape(-1, moved.shape[-1])
    flat_out = out.reshape(-1, moved.shape[-1])
    for row_in, row_out in zip(flat_in, flat_out):
        shifted = [v - max(row_in) for v in row_in]
        exps = [np.exp(v) for v in shifted]
        total = sum(exps)
        row_out[:] = [v / total for v in exps]
    return np.moveaxis(out, -1, axis)


def trilinear_loops(graph_feats, token_feats, w0):
    """S[j][i] = w0 . concat(g_i, o_j, g_i*o_j), one entry at a time."""
    g = np.asarray(graph_feats)
    o = np.asarray(token_feats)
    w = np.asarray(w0)
    n, big_n = g.shape[0], o.shape[0]
    out = np.zeros((big_n, n))
    for j in range(big_n):
        for i in range(n):
            feats = np.concatenate([g[i], o[j], g[i] * o[j]])
            out[j, i] = float(w @ feats)
    return out


def gat_loops(node_feats, edges, w, a, slope=0.2):
    """Single-head graph attention, one node at a time."""
    feats = np.asarray(node_feats)
    n = feats.shape[0]
    projected = feats @ np.asarray(w)
    neighbors = [set([i]) for i in range(n)]
    for i, j in edges:
        neighbors[i].add(j)
        neighbors[j].add(i)
    out = np.zeros((n, projected.shape[1]))
    for i in range(n):
        others = sorted(neighbors[i])
        scores = []
        for j in others:
            raw = float(np.asarray(a) @ np.concatenate([projected[i], projected[j]]))
            scores.append(raw if raw > 0 else slope * raw)
        weights = softmax_loops(np.array(scores))
        mixed = sum(wt * projected[j] for wt, j in zip(weights, others))
        out[i] = 1.0 / (1.0 + np.exp(-mixed))
    return out


def gru_loops(h_prev, x, wz, bz, wr, br, wc, bc):
    xh = np.concatenate([x, h_prev])
    z = 1.0 / (1.0 + np.exp(-(xh @ wz + bz)))
    r = 1.0 / (1.0 + np.exp(-(xh @ wr + br)))
    xrh = np.concatenate([x, r * h_prev])
    candidate = np.tanh(xrh @ wc + bc)
    return (1 - z) * h_prev + z * candidate


def coattend_loops(g, o, w0, w_combine):
    """The four co-attention formulas, written as explicit loops."""
    s = trilinear_loops(g, o, w0)  # tokens x nodes
    over_nodes = softmax_loops(s, axis=1)  # each token row over nodes
    over_tokens = softmax_loops(s, axis=0)  # each node column over tokens
    n_nodes, dim = np.asarray(g).shape
    a = np.zeros((n_nodes, dim))
    b = np.zeros((n_nodes, dim))
    for i in range(n_nodes):
        for j in range(np.asarray(o).shape[0]):
            a[i] += over_tokens[j, i] * np.asarray(o)[j]
            for k in range(n_nodes):
                b[i] += over_tokens[j, i] * over_nodes[j, k] * np.asarray(g)[k]
    combined = np.concatenate([g, a, g * a, g * b], axis=1)
    return combined @ np.asarray(w_combine)


def action_scores_loops(s_t, g_list, a_list, w2, b2, w1, b1):
    """Per-action logits through the shared two-layer head."""
    logits = []
    for g_i, a_i in zip(g_list, a_list):
        r = np.concatenate([s_t, g_i, a_i])
        hidden = np.maximum(r @ w2 + b2, 0.0)
        logits.append(float(hidden @ w1 + b1[0]))
    return np.array(logits)


def enumerate_admissible(state, goals):
    """Brute-force legal-action enumeration straight from the rules."""
    from tidyup.engine import ParsedAction, surface
    from tidyup.world import EntityKind, floor_of

    room = state.rooms[state.agent_room]
    actions = [ParsedAction("look"), ParsedAction("inventory")]
    for fid in room.fixtures:
        fixture = state.entities[fid]
        if fixture.open:
            for obj in state.objects_at(fid):
                actions.append(ParsedAction("take", obj, fid))
        if fixture.openable and not fixture.open:
            actions.append(ParsedAction("open", fid))
    for obj in state.objects_at(floor_of(room.id)):
        actions.append(ParsedAction("take", obj, None))
    for obj in state.carried():
        for fid in room.fixtures:
            fixture = state.entities[fid]
            if fixture.kind is EntityKind.SUPPORTER:
                actions.append(ParsedAction("put", obj, fid))
            elif fixture.kind is EntityKind.CONTAINER and fixture.open:
                actions.append(ParsedAction("insert", obj, fid))
    for direction in room.exits:
        actions.append(ParsedAction("go", direction))
    return sorted((surface(state, a), a) for a in actions)


def link_entities_exhaustive(tokens, inventory_names, graph, stopwords):
    """All-substring matcher: greedy longest leftmost over non-stopword runs."""
    from tidyup.kg import CONTAINER, OBJECT, normalize

    def runs(words):
        current, all_runs = [], []
        for word in [*(w.lower() for w in words), None]:
            if word is not None and word not in stopwords and any(c.isalnum() for c in word):
                current.append(word)
            elif current:
                all_runs.append(current)
                current = []
        return all_runs

    def match(words):
        found = []
        i = 0
        while i < len(words):
            matched = False
            for n in range(min(3, len(words) - i), 0, -1):
                candidate = normalize(" ".join(words[i : i + n]))
                if graph.has_node(candidate):
                    found.append(candidate)
                    i += n
                    matched = True
                    break
            if not matched:
                i += 1
        return found

    tags = {}
    order = []
    for name in inventory_names:
        for run in runs(name.split()):
            for concept in match(run):
                if concept not in tags:
                    order.append(concept)
                tags[concept] = OBJECT
    for run in runs(tokens):
        for concept in match(run):
            if concept not in tags:
                order.append(concept)
                tags[concept] = CONTAINER
    return [(c, tags[c]) for c in order]
