import json

import pytest
from fastapi.testclient import TestClient

from tidyup import gamegen
from tidyup.agents import plan_optimal_actions
from tidyup.engine import surface
from tidyup.server import build_app, load_games_dir, replay_transcript


@pytest.fixture()
def service(dataset, pools, tmp_path):
    config = gamegen.DifficultyConfig.for_tier("easy")
    games = {f"easy_{s}": gamegen.sample_game(dataset, pools[0], config, "train", seed=s)
             for s in (3, 4)}
    app = build_app(games, tmp_path)
    return TestClient(app), games, tmp_path


def optimal_surfaces(spec):
    state = spec.initial_state
    return [surface(state, action) for action in plan_optimal_actions(spec)]


def play_through(client, game_id, spec, annotator="kai"):
    response = client.post("/api/sessions", json={"game_id": game_id,
                                                  "annotator": annotator})
    assert response.status_code == 200
    view = response.json()
    for text in optimal_surfaces(spec):
        index = view["admissible"].index(text)
        response = client.post(f"/api/sessions/{view['session_id']}/action",
                               json={"action_index": index, "step": view["step"]})
        assert response.status_code == 200
        view = {**view, **response.json()}
    return view


class TestSessionFlow:
    def test_games_listing(self, service):
        client, games, _ = service
        listing = client.get("/api/games").json()["games"]
        assert [g["id"] for g in listing] == sorted(games)
        assert all(g["difficulty"] == "easy" and g["optimal_steps"] == 2 for g in listing)

    def test_optimal_play_reaches_summary(self, service):
        client, games, _ = service
        view = play_through(client, "easy_3", games["easy_3"])
        assert view["done"] is True
        assert view["score"] == view["max_score"]
        assert view["step"] == 2
        summary = client.get("/api/summary").json()["summary"]
        assert summary == [{"annotator": "kai", "difficulty": "easy", "games": 1,
                            "mean_steps": 2.0, "mean_score": 1.0}]

    def test_session_view_contains_full_transcript(self, service):
        client, games, _ = service
        view = play_through(client, "easy_3", games["easy_3"])
        fetched = client.get(f"/api/sessions/{view['session_id']}").json()
        kinds = [r.get("kind") for r in fetched["transcript"]]
        assert kinds == ["start", "step", "step"]
        assert fetched["annotator"] == "kai"

    def test_sessions_are_isolated(self, service):
        client, games, _ = service
        first = client.post("/api/sessions", json={"game_id": "easy_3",
                                                   "annotator": "a"}).json()
        second = client.post("/api/sessions", json={"game_id": "easy_3",
                                                    "annotator": "b"}).json()
        move = first["admissible"].index(
            optimal_surfaces(games["easy_3"])[0])
        client.post(f"/api/sessions/{first['session_id']}/action",
                    json={"action_index": move, "step": 0})
        untouched = client.get(f"/api/sessions/{second['session_id']}").json()
        assert untouched["step"] == 0
        advanced = client.get(f"/api/sessions/{first['session_id']}").json()
        assert advanced["step"] == 1


class TestErrors:
    def test_unknown_game_404(self, service):
        client, _, _ = service
        assert client.post("/api/sessions",
                           json={"game_id": "nope", "annotator": "x"}).status_code == 404

    def test_unknown_session_404(self, service):
        client, _, _ = service
        assert client.get("/api/sessions/does-not-exist").status_code == 404
        assert client.post("/api/sessions/does-not-exist/action",
                           json={"action_index": 0}).status_code == 404

    def test_out_of_range_400_reports_count(self, service):
        client, games, _ = service
        view = client.post("/api/sessions", json={"game_id": "easy_3",
                                                  "annotator": "x"}).json()
        response = client.post(f"/api/sessions/{view['session_id']}/action",
                               json={"action_index": 999})
        assert response.status_code == 400
        assert response.json()["admissible_count"] == len(view["admissible"])

    def test_stale_nonce_409(self, service):
        client, games, _ = service
        view = client.post("/api/sessions", json={"game_id": "easy_3",
                                                  "annotator": "x"}).json()
        move = view["admissible"].index(optimal_surfaces(games["easy_3"])[0])
        assert client.post(f"/api/sessions/{view['session_id']}/action",
                           json={"action_index": move, "step": 0}).status_code == 200
        stale = client.post(f"/api/sessions/{view['session_id']}/action",
                            json={"action_index": move, "step": 0})
        assert stale.status_code == 409

    def test_action_on_finished_session_409(self, service):
        client, games, _ = service
        view = play_through(client, "easy_3", games["easy_3"])
        response = client.post(f"/api/sessions/{view['session_id']}/action",
                               json={"action_index": 0})
        assert response.status_code == 409


class TestPersistence:
    def test_replay_reproduces_stored_outcome(self, service):
        client, games, tmp_path = service
        view = play_through(client, "easy_4", games["easy_4"])
        path = tmp_path / "sessions" / f"{view['session_id']}.jsonl"
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert records[0]["kind"] == "start"
        replayed = replay_transcript(path)
        assert replayed["score"] == view["score"]
        assert replayed["steps"] == view["step"]

    def test_load_games_dir(self, dataset, pools, tmp_path):
        config = gamegen.DifficultyConfig.for_tier("easy")
        spec = gamegen.sample_game(dataset, pools[0], config, "train", seed=8)
        gamegen.save_spec(spec, tmp_path / "one.twc.json")
        games = load_games_dir(tmp_path)
        assert list(games) == ["one"]
        assert gamegen.dumps_spec(games["one"]) == gamegen.dumps_spec(spec)
