"""Domain model of the house world and the legal transitions on it.

States are plain values: :func:`apply` never mutates its input, it returns
the successor state. That keeps episodes replayable and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class EntityKind(str, Enum):
    OBJECT = "object"
    SUPPORTER = "supporter"
    CONTAINER = "container"
    DOOR = "door"
    ROOM = "room"


INVENTORY = "inventory"

DIRECTIONS = ("north", "south", "east", "west")
OPPOSITE = {"north": "south", "south": "north", "east": "west", "west": "east"}


def floor_of(room_id: str) -> str:
    return f"floor:{room_id}"


def is_floor(place: str) -> bool:
    return place.startswith("floor:")


class InadmissibleAction(Exception):
    """The action fails its preconditions; signals an engine bug upstream."""


@dataclass(frozen=True)
class Entity:
    id: str
    base_name: str
    attributes: tuple[str, ...] = ()
    kind: EntityKind = EntityKind.OBJECT
    openable: bool = False
    open: bool = True

    @property
    def display_name(self) -> str:
        return " ".join((*self.attributes, self.base_name))


@dataclass(frozen=True)
class Room:
    id: str
    name: str
    exits: dict[str, str] = field(default_factory=dict)
    fixtures: tuple[str, ...] = ()


@dataclass(frozen=True)
class GoalTriple:
    object_id: str
    room_id: str
    location_id: str


@dataclass(frozen=True)
class WorldState:
    rooms: dict[str, Room]
    entities: dict[str, Entity]
    placement: dict[str, str]
    agent_room: str
    step: int = 0
    achieved: frozenset[int] = frozenset()

    @property
    def score(self) -> int:
        return len(self.achieved)

    def objects_at(self, place: str) -> list[str]:
        return sorted(o for o, p in self.placement.items() if p == place)

    def carried(self) -> list[str]:
        return self.objects_at(INVENTORY)

    def room_of_fixture(self, fixture_id: str) -> str:
        for room in self.rooms.values():
            if fixture_id in room.fixtures:
                return room.id
        raise KeyError(fixture_id)


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise InadmissibleAction(message)


def apply(state: WorldState, action, goals: list[GoalTriple]) -> tuple[WorldState, float]:
    """Execute an admissible action; returns (successor, reward).

    Reward is +1.0 when the action places an object at the location of a
    goal triple not yet achieved. Achieved goals are never revoked.
    """
    verb = action.verb
    placement = state.placement
    entities = state.entities
    achieved = state.achieved
    agent_room = state.agent_room
    reward = 0.0

    if verb == "take":
        obj = action.arg1
        _check(obj in placement, f"unknown object {obj!r}")
        place = placement[obj]
        _check(place != INVENTORY, f"{obj!r} already carried")
        if is_floor(place):
            _check(place == floor_of(agent_room), f"{obj!r} not in this room")
        else:
            fixture = entities[place]
            _check(state.room_of_fixture(place) == agent_room, f"{obj!r} not in this room")
            _check(fixture.open, f"{place!r} is closed")
        placement = dict(placement)
        placement[obj] = INVENTORY
    elif verb in ("put", "insert"):
        obj, target = action.arg1, action.arg2
        _check(placement.get(obj) == INVENTORY, f"not carrying {obj!r}")
        _check(target in entities, f"unknown fixture {target!r}")
        fixture = entities[target]
        _check(state.room_of_fixture(target) == agent_room, f"{target!r} not in this room")
        if verb == "put":
            _check(fixture.kind is EntityKind.SUPPORTER, f"cannot put onto {target!r}")
        else:
            _check(fixture.kind is EntityKind.CONTAINER, f"cannot insert into {target!r}")
            _check(fixture.open, f"{target!r} is closed")
        placement = dict(placement)
        placement[obj] = target
        for index, goal in enumerate(goals):
            if (
                index not in achieved
                and goal.object_id == obj
                and goal.location_id == target
                and goal.room_id == agent_room
            ):
                achieved = achieved | {index}
                reward = 1.0
                break
    elif verb == "go":
        direction = action.arg1
        room = state.rooms[agent_room]
        _check(direction in room.exits, f"no exit {direction!r}")
        agent_room = room.exits[direction]
    elif verb == "open":
        target = action.arg1
        _check(target in entities, f"unknown fixture {target!r}")
        fixture = entities[target]
        _check(state.room_of_fixture(target) == agent_room, f"{target!r} not in this room")
        _check(fixture.openable and not fixture.open, f"cannot open {target!r}")
        entities = dict(entities)
        entities[target] = replace(fixture, open=True)
    elif verb in ("look", "inventory"):
        pass
    else:
        raise InadmissibleAction(f"unknown verb {verb!r}")

    successor = WorldState(
        rooms=state.rooms,
        entities=entities,
        placement=placement,
        agent_room=agent_room,
        step=state.step + 1,
        achieved=achieved,
    )
    return successor, reward


def is_terminal(state: WorldState, goals: list[GoalTriple], max_steps: int) -> bool:
    return len(state.achieved) == len(goals) or state.step >= max_steps
