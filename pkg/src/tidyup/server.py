"""HTTP service for human play sessions plus static hosting for the web UI.

Transcripts are append-only JSON-lines files; replaying one through the
engine must reproduce the live session's score and step count exactly.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import engine, world
from .gamegen import GameSpec, load_spec, optimal_steps, spec_to_dict

MAX_STEPS = engine.MAX_STEPS_DEFAULT


@dataclass
class Session:
    id: str
    game_id: str
    spec: GameSpec
    annotator: str
    state: world.WorldState
    observation: engine.Observation
    admissible: list
    done: bool = False
    created: float = field(default_factory=time.time)
    finished: float | None = None
    transcript: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def score(self) -> int:
        return self.state.score


class SessionStore:
    """Thread-safe registry; per-session mutation serialized by its own lock."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.sessions_dir = data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, game_id: str, spec: GameSpec, annotator: str) -> Session:
        session = Session(
            id=str(uuid.uuid4()),
            game_id=game_id,
            spec=spec,
            annotator=annotator,
            state=spec.initial_state,
            observation=engine.render_observation(spec.initial_state),
            admissible=engine.admissible_actions(spec.initial_state, list(spec.goals)),
        )
        with self._lock:
            self._sessions[session.id] = session
        self._append(session, {
            "kind": "start",
            "session_id": session.id,
            "game_id": game_id,
            "annotator": annotator,
            "difficulty": spec.difficulty,
            "split": spec.split,
            "optimal_steps": optimal_steps(spec),
            "spec": spec_to_dict(spec),
        })
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def all(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    def _append(self, session: Session, record: dict) -> None:
        session.transcript.append(record)
        path = self.sessions_dir / f"{session.id}.jsonl"
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")


class StartSession(BaseModel):
    game_id: str
    annotator: str = "anonymous"


class ActionRequest(BaseModel):
    action_index: int
    step: int | None = None  # nonce: must match the session's current step


def _session_view(session: Session) -> dict:
    return {
        "session_id": session.id,
        "game_id": session.game_id,
        "observation": session.observation.text,
        "admissible": [text for _, text in session.admissible],
        "score": session.score,
        "max_score": len(session.spec.goals),
        "step": session.state.step,
        "done": session.done,
        "optimal_steps": optimal_steps(session.spec),
    }


def build_app(games: dict[str, GameSpec], data_dir, static_dir=None) -> FastAPI:
    app = FastAPI(title="house cleanup play service")
    store = SessionStore(Path(data_dir))
    app.state.sessions = store
    app.state.games = games

    @app.get("/api/games")
    def list_games():
        return {
            "games": [
                {
                    "id": game_id,
                    "difficulty": spec.difficulty,
                    "split": spec.split,
                    "optimal_steps": optimal_steps(spec),
                }
                for game_id, spec in sorted(games.items())
            ]
        }

    @app.post("/api/sessions")
    def start_session(request: StartSession):
        spec = games.get(request.game_id)
        if spec is None:
            raise HTTPException(status_code=404, detail=f"unknown game {request.game_id!r}")
        session = store.create(request.game_id, spec, request.annotator)
        return _session_view(session)

    @app.post("/api/sessions/{session_id}/action")
    def take_action(session_id: str, request: ActionRequest):
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        with session.lock:
            if session.done:
                raise HTTPException(status_code=409, detail="session is finished")
            if request.step is not None and request.step != session.state.step:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale action: session is at step {session.state.step}",
                )
            if not 0 <= request.action_index < len(session.admissible):
                return JSONResponse(
                    status_code=400,
                    content={
                        "detail": "action_index out of range",
                        "admissible_count": len(session.admissible),
                    },
                )
            action, text = session.admissible[request.action_index]
            observation, reward, done, state = engine.step(
                session.state, action, list(session.spec.goals), MAX_STEPS
            )
            session.state = state
            session.observation = observation
            session.admissible = engine.admissible_actions(state, list(session.spec.goals))
            session.done = done
            if done:
                session.finished = time.time()
            store._append(
                session,
                {
                    "kind": "step",
                    "t": state.step,
                    "action_index": request.action_index,
                    "action": text,
                    "reward": reward,
                    "score": state.score,
                    "done": done,
                    "obs": observation.text,
                    "admissible": [s for _, s in session.admissible],
                },
            )
            view = _session_view(session)
            view["reward"] = reward
            return view

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        view = _session_view(session)
        view["annotator"] = session.annotator
        view["transcript"] = session.transcript
        return view

    @app.get("/api/summary")
    def summary():
        rows: dict[tuple[str, str], list[Session]] = {}
        for session in store.all():
            if not session.done:
                continue
            rows.setdefault((session.annotator, session.spec.difficulty), []).append(session)
        table = []
        for (annotator, difficulty), sessions in sorted(rows.items()):
            steps = [s.state.step for s in sessions]
            scores = [s.score / len(s.spec.goals) for s in sessions]
            table.append(
                {
                    "annotator": annotator,
                    "difficulty": difficulty,
                    "games": len(sessions),
                    "mean_steps": round(sum(steps) / len(steps), 4),
                    "mean_score": round(sum(scores) / len(scores), 4),
                }
            )
        return {"summary": table}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def load_games_dir(path) -> dict[str, GameSpec]:
    games: dict[str, GameSpec] = {}
    for file in sorted(Path(path).glob("*.twc.json")):
        games[file.name.removesuffix(".twc.json")] = load_spec(file)
    return games


def replay_transcript(path) -> dict:
    """Re-run a stored session offline; returns the reproduced score/steps."""
    records = [json.loads(line) for line in open(path, encoding="utf-8")]
    header = records[0]
    if header.get("kind") != "start":
        raise ValueError("transcript does not begin with a start record")
    from .gamegen import spec_from_dict

    spec = spec_from_dict(header["spec"])
    state = spec.initial_state
    goals = list(spec.goals)
    total_reward = 0.0
    for record in records[1:]:
        if record.get("kind") != "step":
            continue
        admissible = engine.admissible_actions(state, goals)
        action, text = admissible[record["action_index"]]
        if text != record["action"]:
            raise ValueError(f"replay mismatch at t={record['t']}: {text!r} != {record['action']!r}")
        _, reward, done, state = engine.step(state, action, goals, MAX_STEPS)
        total_reward += reward
    return {"score": state.score, "steps": state.step, "reward": total_reward}
