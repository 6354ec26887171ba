"""POMDP surface: text observations, admissible actions, command parsing.

Observation templates are frozen by golden-file tests; changing any phrase
is a breaking change for both agents and entity linking.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

from . import world
from .world import INVENTORY, EntityKind, GoalTriple, WorldState, floor_of

MAX_STEPS_DEFAULT = 50


class ParseError(Exception):
    pass


class UnknownVerb(ParseError):
    pass


class UnresolvedEntity(ParseError):
    pass


class AmbiguousEntity(ParseError):
    def __init__(self, name: str, candidates: list[str]):
        super().__init__(f"{name!r} could be any of: {', '.join(candidates)}")
        self.candidates = candidates


class AlreadyTerminal(Exception):
    pass


@dataclass(frozen=True)
class ParsedAction:
    verb: str
    arg1: str | None = None
    arg2: str | None = None


@dataclass(frozen=True)
class Observation:
    text: str
    tokens: tuple[str, ...]
    room_id: str
    feedback: str


_PUNCT = set(string.punctuation)


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, detach punctuation, split on whitespace."""
    out = []
    for ch in text:
        if ch in _PUNCT:
            out.append(f" {ch} ")
        else:
            out.append(ch)
    return tuple("".join(out).lower().split())


_MASS_NOUNS = frozenset(
    {"milk", "butter", "flour", "sugar", "rice", "shampoo", "toothpaste", "detergent", "olive oil"}
)
_PAIR_NOUNS = frozenset(
    {
        "socks", "trousers", "underpants", "sunglasses", "sneakers", "sandals",
        "reading glasses", "gardening gloves", "climbing shoes",
    }
)


def _with_article(entity) -> str:
    name = entity.display_name
    if entity.base_name in _MASS_NOUNS:
        return f"some {name}"
    if entity.base_name in _PAIR_NOUNS:
        return f"a pair of {name}"
    return f"an {name}" if name[0] in "aeiou" else f"a {name}"


def _listing(entities: list) -> str:
    named = [_with_article(e) for e in entities]
    if len(named) == 1:
        return named[0]
    return ", ".join(named[:-1]) + " and " + named[-1]


def _room_description(state: WorldState) -> list[str]:
    room = state.rooms[state.agent_room]
    lines = [f"You are in the {room.name}."]
    for fixture_id in room.fixtures:
        fixture = state.entities[fixture_id]
        preposition = "On" if fixture.kind is EntityKind.SUPPORTER else "In"
        if not fixture.open:
            lines.append(f"The {fixture.display_name} is closed.")
            continue
        objects = state.objects_at(fixture_id)
        if objects:
            lines.append(
                f"{preposition} the {fixture.display_name} you see "
                f"{_listing([state.entities[o] for o in objects])}."
            )
        else:
            lines.append(f"{preposition} the {fixture.display_name} you see nothing.")
    floor_objects = state.objects_at(floor_of(room.id))
    if floor_objects:
        lines.append(f"On the floor you see {_listing([state.entities[o] for o in floor_objects])}.")
    exits = sorted(room.exits)
    if len(exits) == 1:
        lines.append(f"There is an exit to the {exits[0]}.")
    elif exits:
        lines.append(f"There are exits to the {' and the '.join(exits)}.")
    return lines


def _feedback(state: WorldState, action: ParsedAction | None, reward: float) -> str:
    if action is None:
        return ""
    name = lambda eid: state.entities[eid].display_name
    if action.verb == "take":
        line = f"You take the {name(action.arg1)}."
    elif action.verb == "put":
        line = f"You put the {name(action.arg1)} on the {name(action.arg2)}."
    elif action.verb == "insert":
        line = f"You put the {name(action.arg1)} into the {name(action.arg2)}."
    elif action.verb == "go":
        line = f"You go {action.arg1}."
    elif action.verb == "open":
        line = f"You open the {name(action.arg1)}."
    elif action.verb == "inventory":
        carried = state.carried()
        if carried:
            line = f"You are carrying {_listing([state.entities[o] for o in carried])}."
        else:
            line = "You are carrying nothing."
    else:
        line = ""
    if reward > 0:
        line += " Your score has gone up by one point."
    return line


def render_observation(
    state: WorldState, last_action: ParsedAction | None = None, reward: float = 0.0
) -> Observation:
    feedback = _feedback(state, last_action, reward)
    lines = ([feedback] if feedback else []) + _room_description(state)
    text = "\n".join(lines)
    return Observation(
        text=text, tokens=tokenize(text), room_id=state.agent_room, feedback=feedback
    )


def _visible_objects(state: WorldState) -> list[tuple[str, str | None]]:
    """(object_id, source fixture id or None for floor) in the agent's room."""
    room = state.rooms[state.agent_room]
    out = []
    for fixture_id in room.fixtures:
        if state.entities[fixture_id].open:
            out.extend((o, fixture_id) for o in state.objects_at(fixture_id))
    out.extend((o, None) for o in state.objects_at(floor_of(room.id)))
    return out


def surface(state: WorldState, action: ParsedAction) -> str:
    name = lambda eid: state.entities[eid].display_name
    if action.verb == "take":
        if action.arg2 is None:
            return f"take {name(action.arg1)}"
        return f"take {name(action.arg1)} from {name(action.arg2)}"
    if action.verb == "put":
        return f"put {name(action.arg1)} on {name(action.arg2)}"
    if action.verb == "insert":
        return f"insert {name(action.arg1)} into {name(action.arg2)}"
    if action.verb == "go":
        return f"go {action.arg1}"
    if action.verb == "open":
        return f"open {name(action.arg1)}"
    return action.verb


def admissible_actions(
    state: WorldState, goals: list[GoalTriple]
) -> list[tuple[ParsedAction, str]]:
    """Every legal action in `state`, ordered by surface string."""
    room = state.rooms[state.agent_room]
    actions = [ParsedAction("look"), ParsedAction("inventory")]
    for obj, source in _visible_objects(state):
        actions.append(ParsedAction("take", obj, source))
    carried = state.carried()
    for fixture_id in room.fixtures:
        fixture = state.entities[fixture_id]
        if fixture.kind is EntityKind.SUPPORTER:
            actions.extend(ParsedAction("put", o, fixture_id) for o in carried)
        elif fixture.kind is EntityKind.CONTAINER and fixture.open:
            actions.extend(ParsedAction("insert", o, fixture_id) for o in carried)
        if fixture.openable and not fixture.open:
            actions.append(ParsedAction("open", fixture_id))
    actions.extend(ParsedAction("go", d) for d in room.exits)
    pairs = [(a, surface(state, a)) for a in actions]
    pairs.sort(key=lambda pair: pair[1])
    return pairs


_ARTICLES = {"the", "a", "an", "some"}


def _strip_articles(tokens: list[str]) -> list[str]:
    return [t for t in tokens if t not in _ARTICLES]


def _contains(haystack: list[str], needle: list[str]) -> bool:
    return any(haystack[i : i + len(needle)] == needle for i in range(len(haystack)))


def _resolve(tokens: list[str], state: WorldState, kinds: tuple[EntityKind, ...]) -> str:
    """Longest display-name match among entities visible here or carried."""
    visible = {o for o, _ in _visible_objects(state)}
    visible.update(state.carried())
    visible.update(state.rooms[state.agent_room].fixtures)
    best: list[str] = []
    best_len = 0
    for eid in sorted(visible):
        entity = state.entities[eid]
        if entity.kind not in kinds:
            continue
        name_tokens = entity.display_name.split()
        if not _contains(tokens, name_tokens):
            continue
        if len(name_tokens) > best_len:
            best, best_len = [eid], len(name_tokens)
        elif len(name_tokens) == best_len:
            best.append(eid)
    if not best:
        raise UnresolvedEntity(f"cannot see any {' '.join(tokens)!r} here")
    if len(best) > 1:
        raise AmbiguousEntity(" ".join(tokens), [state.entities[e].display_name for e in best])
    return best[0]


def parse(command: str, state: WorldState) -> ParsedAction:
    """Parse a free-text command against the action grammar."""
    tokens = _strip_articles(list(tokenize(command)))
    if not tokens:
        raise UnknownVerb("empty command")
    verb, rest = tokens[0], tokens[1:]
    if verb in ("i", "inv"):
        verb = "inventory"
    if verb in ("look", "inventory"):
        return ParsedAction(verb)
    if verb == "go":
        if len(rest) != 1 or rest[0] not in world.DIRECTIONS:
            raise UnresolvedEntity(f"go where? got {' '.join(rest)!r}")
        return ParsedAction("go", rest[0])
    if verb == "open":
        target = _resolve(rest, state, (EntityKind.CONTAINER, EntityKind.DOOR))
        return ParsedAction("open", target)
    if verb == "take":
        if "from" in rest:
            split = rest.index("from")
            obj = _resolve(rest[:split], state, (EntityKind.OBJECT,))
            src = _resolve(rest[split + 1 :], state, (EntityKind.SUPPORTER, EntityKind.CONTAINER))
            return ParsedAction("take", obj, src)
        obj = _resolve(rest, state, (EntityKind.OBJECT,))
        place = state.placement.get(obj)
        source = None if place is None or world.is_floor(place) else place
        return ParsedAction("take", obj, source)
    if verb in ("put", "insert"):
        for i, token in enumerate(rest):
            if token in ("on", "onto", "in", "into", "inside"):
                obj = _resolve(rest[:i], state, (EntityKind.OBJECT,))
                target_kind = (
                    EntityKind.SUPPORTER if token in ("on", "onto") else EntityKind.CONTAINER
                )
                target = _resolve(rest[i + 1 :], state, (target_kind,))
                final_verb = "put" if token in ("on", "onto") else "insert"
                return ParsedAction(final_verb, obj, target)
        raise UnresolvedEntity(f"{verb} what where? got {' '.join(rest)!r}")
    raise UnknownVerb(f"unknown verb {verb!r}")


def step(
    state: WorldState,
    action: ParsedAction,
    goals: list[GoalTriple],
    max_steps: int = MAX_STEPS_DEFAULT,
) -> tuple[Observation, float, bool, WorldState]:
    if world.is_terminal(state, goals, max_steps):
        raise AlreadyTerminal(f"episode is over at step {state.step}")
    new_state, reward = world.apply(state, action, goals)
    done = world.is_terminal(new_state, goals, max_steps)
    observation = render_observation(new_state, action, reward)
    return observation, reward, done, new_state
