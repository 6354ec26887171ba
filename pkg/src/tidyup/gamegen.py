"""Procedural game sampling from the object/room/location dataset.

Generation is a pure function of (dataset, difficulty, seed): the same
inputs always produce a byte-identical game file.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from importlib import resources

from .rng import SplitMix64
from .world import DIRECTIONS, OPPOSITE, Entity, EntityKind, GoalTriple, Room, WorldState
from .world import INVENTORY, floor_of

SCHEMA_VERSION = 1
TIERS = ("easy", "medium", "hard")
SPLITS = ("train", "in", "out")

_MAX_RESAMPLES = 64


class DatasetTooSmall(Exception):
    pass


class ExhaustedVocabulary(Exception):
    pass


@dataclass(frozen=True)
class GoalSpec:
    room: str
    location: str
    attribute: str | None = None


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    attributes: tuple[tuple[str, ...], ...]
    goals: tuple[GoalSpec, ...]


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    kind: EntityKind
    openable: bool
    rooms: tuple[str, ...]


@dataclass(frozen=True)
class Dataset:
    rooms: tuple[str, ...]
    fixtures: tuple[FixtureSpec, ...]
    objects: tuple[DatasetEntry, ...]

    def fixture(self, name: str) -> FixtureSpec:
        for spec in self.fixtures:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def fixtures_in(self, room: str) -> list[FixtureSpec]:
        return [f for f in self.fixtures if room in f.rooms]


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    return _dataset_from_raw(raw)


def bundled_dataset() -> Dataset:
    raw = json.loads(resources.files("tidyup.data").joinpath("dataset.json").read_text("utf-8"))
    return _dataset_from_raw(raw)


def _dataset_from_raw(raw: dict) -> Dataset:
    rooms = tuple(raw["rooms"])
    fixtures = tuple(
        FixtureSpec(
            name=f["name"],
            kind=EntityKind(f["kind"]),
            openable=bool(f.get("openable", False)),
            rooms=tuple(f["rooms"]),
        )
        for f in raw["fixtures"]
    )
    fixture_names = {f.name for f in fixtures}
    objects = []
    for entry in raw["objects"]:
        goals = tuple(
            GoalSpec(g["room"], g["location"], g.get("attribute")) for g in entry["goals"]
        )
        for goal in goals:
            if goal.room not in rooms:
                raise ValueError(f"{entry['name']}: unknown room {goal.room!r}")
            if goal.location not in fixture_names:
                raise ValueError(f"{entry['name']}: unknown location {goal.location!r}")
        objects.append(
            DatasetEntry(
                name=entry["name"],
                attributes=tuple(tuple(slot) for slot in entry.get("attributes", [])),
                goals=goals,
            )
        )
    return Dataset(rooms=rooms, fixtures=fixtures, objects=tuple(objects))


@dataclass(frozen=True)
class DifficultyConfig:
    tier: str
    total_objects: tuple[int, ...]
    objects_to_find: tuple[int, ...]
    rooms: tuple[int, ...]
    distractors: int = 2

    @classmethod
    def for_tier(cls, tier: str, distractors: int = 2) -> "DifficultyConfig":
        table = {
            "easy": ((1,), (1,), (1,)),
            "medium": ((2, 3), (1, 2, 3), (1,)),
            "hard": ((6, 7), (5, 6, 7), (1, 2)),
        }
        if tier not in table:
            raise ValueError(f"unknown tier {tier!r}")
        total, find, rooms = table[tier]
        return cls(tier, total, find, rooms, distractors)


@dataclass(frozen=True)
class GameSpec:
    seed: int
    difficulty: str
    split: str
    initial_state: WorldState
    goals: tuple[GoalTriple, ...]
    distractors: tuple[str, ...]
    vocabulary: tuple[str, ...]


def split_dataset(
    entries: list[DatasetEntry] | tuple[DatasetEntry, ...], seed: int
) -> tuple[list[DatasetEntry], list[DatasetEntry]]:
    """Seeded shuffle, then first two thirds train / rest held out."""
    if len(entries) < 3:
        raise DatasetTooSmall(f"need at least 3 unique objects, got {len(entries)}")
    pool = sorted(entries, key=lambda e: e.name)
    SplitMix64(seed).shuffle(pool)
    cut = math.ceil(2 * len(pool) / 3)
    return pool[:cut], pool[cut:]


def _slug(name: str) -> str:
    return name.replace(" ", "_")


class _Retry(Exception):
    pass


def sample_game(
    dataset: Dataset,
    pool: list[DatasetEntry],
    config: DifficultyConfig,
    split: str,
    seed: int,
) -> GameSpec:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    rng = SplitMix64(seed)
    for _ in range(_MAX_RESAMPLES):
        try:
            return _try_sample(dataset, pool, config, split, seed, rng.split())
        except _Retry:
            continue
    raise ExhaustedVocabulary(
        f"no consistent {config.tier} assignment after {_MAX_RESAMPLES} resamples"
    )


def _try_sample(dataset, pool, config, split, seed, rng: SplitMix64) -> GameSpec:
    n_total = rng.choice(config.total_objects)
    find_choices = [f for f in config.objects_to_find if f <= n_total]
    if not find_choices:
        raise _Retry
    n_find = rng.choice(find_choices)
    n_rooms = rng.choice(config.rooms)

    candidate_rooms = [
        room for room in dataset.rooms if any(g.room == room for e in pool for g in e.goals)
    ]
    if len(candidate_rooms) < n_rooms:
        raise _Retry
    game_rooms = rng.sample(candidate_rooms, n_rooms)

    # one object per room first so every room hosts a goal, then fill up
    chosen: list[DatasetEntry] = []
    for room in game_rooms:
        options = [e for e in pool if e not in chosen and any(g.room == room for g in e.goals)]
        if not options:
            raise _Retry
        chosen.append(rng.choice(options))
    rest = [e for e in pool if e not in chosen and any(g.room in game_rooms for g in e.goals)]
    if len(rest) < n_total - len(chosen):
        raise _Retry
    chosen.extend(rng.sample(rest, n_total - len(chosen)))

    instances: list[tuple[DatasetEntry, tuple[str, ...], GoalSpec]] = []
    for entry in chosen:
        attrs = _sample_attributes(entry, rng)
        specific = [g for g in entry.goals if g.attribute in attrs]
        generic = [g for g in entry.goals if g.attribute is None]
        eligible = [g for g in (specific or generic) if g.room in game_rooms]
        if not eligible:
            raise _Retry
        instances.append((entry, attrs, rng.choice(eligible)))

    return _build_spec(dataset, instances, game_rooms, n_find, config, split, seed, rng)


def _sample_attributes(entry: DatasetEntry, rng: SplitMix64) -> tuple[str, ...]:
    if not entry.attributes:
        return ()
    count = rng.randint(min(2, len(entry.attributes)) + 1)
    slots = sorted(rng.sample(range(len(entry.attributes)), count))
    return tuple(rng.choice(entry.attributes[i]) for i in slots)


def _build_spec(dataset, instances, game_rooms, n_find, config, split, seed, rng) -> GameSpec:
    entities: dict[str, Entity] = {}
    room_fixtures: dict[str, list[str]] = {room: [] for room in game_rooms}
    fixture_ids: dict[tuple[str, str], str] = {}
    used_ids: set[str] = set()

    def add_fixture(name: str, room: str) -> str:
        key = (name, room)
        if key in fixture_ids:
            return fixture_ids[key]
        spec = dataset.fixture(name)
        fid = _slug(name)
        suffix = 2
        while fid in used_ids:
            fid = f"{_slug(name)}_{suffix}"
            suffix += 1
        used_ids.add(fid)
        fixture_ids[key] = fid
        # generated games start every container open so each goal costs
        # exactly take+put
        entities[fid] = Entity(
            id=fid,
            base_name=name,
            kind=spec.kind,
            openable=spec.openable,
            open=True,
        )
        room_fixtures[room].append(fid)
        return fid

    goals: list[GoalTriple] = []
    object_ids: list[str] = []
    for entry, attrs, goal in instances:
        location_id = add_fixture(goal.location, goal.room)
        display = " ".join((*attrs, entry.name))
        oid = _slug(display)
        if oid in used_ids:
            raise _Retry
        used_ids.add(oid)
        entities[oid] = Entity(id=oid, base_name=entry.name, attributes=attrs)
        object_ids.append(oid)
        goals.append(GoalTriple(object_id=oid, room_id=_slug(goal.room), location_id=location_id))

    distractors: list[str] = []
    for room in game_rooms:
        options = [
            f.name
            for f in dataset.fixtures_in(room)
            if (f.name, room) not in fixture_ids and _slug(f.name) not in used_ids
        ]
        for name in rng.sample(options, min(config.distractors, len(options))):
            distractors.append(add_fixture(name, room))

    exits: dict[str, dict[str, str]] = {room: {} for room in game_rooms}
    for left, right in zip(game_rooms, game_rooms[1:]):
        direction = rng.choice(DIRECTIONS)
        exits[left][direction] = _slug(right)
        exits[right][OPPOSITE[direction]] = _slug(left)

    rooms = {
        _slug(room): Room(
            id=_slug(room),
            name=room,
            exits=exits[room],
            fixtures=tuple(room_fixtures[room]),
        )
        for room in game_rooms
    }

    to_find = rng.sample(object_ids, n_find)
    placement: dict[str, str] = {}
    for oid, goal in zip(object_ids, goals):
        if oid not in to_find:
            placement[oid] = INVENTORY
            continue
        room = rng.choice(game_rooms)
        spots = [f for f in room_fixtures[room] if f != goal.location_id]
        spots.append(floor_of(_slug(room)))
        placement[oid] = rng.choice(spots)
    placement = {oid: placement[oid] for oid in sorted(placement)}

    state = WorldState(
        rooms=rooms,
        entities=dict(sorted(entities.items())),
        placement=placement,
        agent_room=_slug(rng.choice(game_rooms)),
    )
    return GameSpec(
        seed=seed,
        difficulty=config.tier,
        split=split,
        initial_state=state,
        goals=tuple(goals),
        distractors=tuple(sorted(distractors)),
        vocabulary=tuple(sorted(entry.name for entry, _, _ in instances)),
    )


def _travel_walk(spec: GameSpec) -> list[str]:
    """Minimal room walk delivering every goal object; BFS over (room, picked, done)."""
    state = spec.initial_state
    pickup_room = {}
    for goal in spec.goals:
        place = state.placement[goal.object_id]
        if place == INVENTORY:
            continue
        room = place[len("floor:") :] if place.startswith("floor:") else state.room_of_fixture(place)
        pickup_room[goal.object_id] = room
    goal_room = {g.object_id: g.room_id for g in spec.goals}
    all_objects = frozenset(goal_room)

    def settle(room: str, picked: frozenset, done: frozenset):
        while True:
            more_picked = picked | {o for o, r in pickup_room.items() if r == room}
            more_done = done | {o for o in more_picked if goal_room[o] == room}
            if more_picked == picked and more_done == done:
                return picked, done
            picked, done = more_picked, more_done

    start_picked = frozenset(o for o in goal_room if o not in pickup_room)
    picked, done = settle(state.agent_room, start_picked, frozenset())
    initial = (state.agent_room, picked, done)
    if done == all_objects:
        return [state.agent_room]
    queue = deque([initial])
    parents: dict[tuple, tuple | None] = {initial: None}
    while queue:
        node = queue.popleft()
        room, picked, done = node
        for direction in sorted(state.rooms[room].exits):
            next_room = state.rooms[room].exits[direction]
            next_picked, next_done = settle(next_room, picked, done)
            nxt = (next_room, next_picked, next_done)
            if nxt in parents:
                continue
            parents[nxt] = node
            if next_done == all_objects:
                walk = [next_room]
                cursor = node
                while cursor is not None:
                    walk.append(cursor[0])
                    cursor = parents[cursor]
                return list(reversed(walk))
            queue.append(nxt)
    raise ValueError("goals unreachable from the start room")


def optimal_steps(spec: GameSpec) -> int:
    """2 per object to find, 1 per carried object, plus minimal travel."""
    placement = spec.initial_state.placement
    carried = sum(1 for g in spec.goals if placement[g.object_id] == INVENTORY)
    to_find = len(spec.goals) - carried
    travel = len(_travel_walk(spec)) - 1
    return 2 * to_find + carried + travel


def spec_to_dict(spec: GameSpec) -> dict:
    state = spec.initial_state
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": spec.seed,
        "difficulty": spec.difficulty,
        "split": spec.split,
        "start_room": state.agent_room,
        "rooms": [
            {
                "id": room.id,
                "name": room.name,
                "exits": dict(sorted(room.exits.items())),
                "fixtures": list(room.fixtures),
            }
            for _, room in sorted(state.rooms.items())
        ],
        "entities": [
            {
                "id": entity.id,
                "base_name": entity.base_name,
                "attributes": list(entity.attributes),
                "kind": entity.kind.value,
                "openable": entity.openable,
                "open": entity.open,
            }
            for _, entity in sorted(state.entities.items())
        ],
        "placement": dict(sorted(state.placement.items())),
        "goals": [
            {"object": g.object_id, "room": g.room_id, "location": g.location_id}
            for g in spec.goals
        ],
        "distractors": list(spec.distractors),
        "vocabulary": list(spec.vocabulary),
    }


def spec_from_dict(raw: dict) -> GameSpec:
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {raw.get('schema_version')!r}")
    rooms = {
        r["id"]: Room(
            id=r["id"], name=r["name"], exits=dict(r["exits"]), fixtures=tuple(r["fixtures"])
        )
        for r in raw["rooms"]
    }
    entities = {
        e["id"]: Entity(
            id=e["id"],
            base_name=e["base_name"],
            attributes=tuple(e["attributes"]),
            kind=EntityKind(e["kind"]),
            openable=e["openable"],
            open=e["open"],
        )
        for e in raw["entities"]
    }
    state = WorldState(
        rooms=rooms,
        entities=entities,
        placement=dict(raw["placement"]),
        agent_room=raw["start_room"],
    )
    return GameSpec(
        seed=raw["seed"],
        difficulty=raw["difficulty"],
        split=raw["split"],
        initial_state=state,
        goals=tuple(
            GoalTriple(g["object"], g["room"], g["location"]) for g in raw["goals"]
        ),
        distractors=tuple(raw["distractors"]),
        vocabulary=tuple(raw["vocabulary"]),
    )


def dumps_spec(spec: GameSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n"


def save_spec(spec: GameSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps_spec(spec))


def load_spec(path) -> GameSpec:
    with open(path, encoding="utf-8") as handle:
        return spec_from_dict(json.load(handle))
