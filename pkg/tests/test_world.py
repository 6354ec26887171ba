import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidyup import world
from tidyup.engine import ParsedAction, admissible_actions
from tidyup.world import (
    Entity,
    EntityKind,
    GoalTriple,
    InadmissibleAction,
    Room,
    WorldState,
    floor_of,
)


def kitchen_state(apple_on="dining_table", carrying=()):
    entities = {
        "refrigerator": Entity("refrigerator", "refrigerator",
                               kind=EntityKind.CONTAINER, openable=True, open=True),
        "dining_table": Entity("dining_table", "dining table", kind=EntityKind.SUPPORTER),
        "apple": Entity("apple", "apple"),
    }
    placement = {"apple": apple_on}
    for obj in carrying:
        placement[obj] = world.INVENTORY
    return WorldState(
        rooms={"kitchen": Room("kitchen", "kitchen",
                               fixtures=("refrigerator", "dining_table"))},
        entities=entities,
        placement=placement,
        agent_room="kitchen",
    )


GOALS = [GoalTriple("apple", "kitchen", "refrigerator")]


class TestApply:
    def test_goal_insert_earns_one_point(self):
        state = kitchen_state(apple_on=world.INVENTORY)
        after, reward = world.apply(state, ParsedAction("insert", "apple", "refrigerator"), GOALS)
        assert reward == 1.0
        assert after.score == 1
        assert after.achieved == {0}

    def test_non_goal_put_earns_nothing(self):
        state = kitchen_state(apple_on=world.INVENTORY)
        after, reward = world.apply(state, ParsedAction("put", "apple", "dining_table"), GOALS)
        assert reward == 0.0
        assert after.score == 0

    def test_take_then_put_back_restores_placement(self):
        state = kitchen_state()
        mid, r1 = world.apply(state, ParsedAction("take", "apple", "dining_table"), GOALS)
        back, r2 = world.apply(mid, ParsedAction("put", "apple", "dining_table"), GOALS)
        assert (r1, r2) == (0.0, 0.0)
        assert back.placement == state.placement
        assert back.step == state.step + 2
        assert back.achieved == state.achieved

    def test_achieved_goal_is_never_revoked(self):
        state = kitchen_state(apple_on=world.INVENTORY)
        after, _ = world.apply(state, ParsedAction("insert", "apple", "refrigerator"), GOALS)
        taken, _ = world.apply(after, ParsedAction("take", "apple", "refrigerator"), GOALS)
        assert taken.score == 1
        # re-inserting does not double count
        again, reward = world.apply(taken, ParsedAction("insert", "apple", "refrigerator"), GOALS)
        assert reward == 0.0
        assert again.score == 1

    def test_apply_is_pure(self):
        state = kitchen_state()
        world.apply(state, ParsedAction("take", "apple", "dining_table"), GOALS)
        assert state.placement["apple"] == "dining_table"
        assert state.step == 0

    def test_take_from_wrong_room_is_inadmissible(self):
        state = kitchen_state()
        bad = ParsedAction("take", "apple", "dining_table")
        other = WorldState(
            rooms={**state.rooms, "pantry": Room("pantry", "pantry")},
            entities=state.entities,
            placement=state.placement,
            agent_room="pantry",
        )
        with pytest.raises(InadmissibleAction):
            world.apply(other, bad, GOALS)

    def test_insert_into_closed_container_is_inadmissible(self):
        state = kitchen_state(apple_on=world.INVENTORY)
        closed = dict(state.entities)
        closed["refrigerator"] = Entity("refrigerator", "refrigerator",
                                        kind=EntityKind.CONTAINER, openable=True, open=False)
        state = WorldState(rooms=state.rooms, entities=closed,
                           placement=state.placement, agent_room="kitchen")
        with pytest.raises(InadmissibleAction):
            world.apply(state, ParsedAction("insert", "apple", "refrigerator"), GOALS)

    def test_open_then_insert(self):
        state = kitchen_state(apple_on=world.INVENTORY)
        closed = dict(state.entities)
        closed["refrigerator"] = Entity("refrigerator", "refrigerator",
                                        kind=EntityKind.CONTAINER, openable=True, open=False)
        state = WorldState(rooms=state.rooms, entities=closed,
                           placement=state.placement, agent_room="kitchen")
        opened, _ = world.apply(state, ParsedAction("open", "refrigerator"), GOALS)
        assert opened.entities["refrigerator"].open
        after, reward = world.apply(opened, ParsedAction("insert", "apple", "refrigerator"), GOALS)
        assert reward == 1.0


class TestIsTerminal:
    def test_all_goals_done(self):
        state = kitchen_state(apple_on="refrigerator")
        done = WorldState(rooms=state.rooms, entities=state.entities,
                          placement=state.placement, agent_room="kitchen",
                          step=11, achieved=frozenset({0, 1, 2}))
        assert world.is_terminal(done, [GOALS[0]] * 3, max_steps=50)

    def test_step_cap(self):
        state = kitchen_state()
        capped = WorldState(rooms=state.rooms, entities=state.entities,
                            placement=state.placement, agent_room="kitchen",
                            step=50, achieved=frozenset({0}))
        assert world.is_terminal(capped, [GOALS[0]] * 3, max_steps=50)

    def test_fresh_episode_not_terminal(self):
        assert not world.is_terminal(kitchen_state(), GOALS, max_steps=50)


@st.composite
def action_indices(draw):
    return draw(st.lists(st.integers(0, 10**6), min_size=1, max_size=40))


class TestEpisodeProperties:
    @given(action_indices())
    @settings(max_examples=60)
    def test_replay_determinism_and_score_monotone(self, picks):
        def rollout():
            state = kitchen_state()
            rewards = []
            scores = [state.score]
            for pick in picks:
                if world.is_terminal(state, GOALS, 50):
                    break
                actions = admissible_actions(state, GOALS)
                action, _ = actions[pick % len(actions)]
                state, reward = world.apply(state, action, GOALS)
                rewards.append(reward)
                scores.append(state.score)
            return state, rewards, scores

        first_state, first_rewards, first_scores = rollout()
        second_state, second_rewards, second_scores = rollout()
        assert first_state == second_state
        assert first_rewards == second_rewards
        assert all(b >= a for a, b in zip(first_scores, first_scores[1:]))
        assert sum(first_rewards) == len(first_state.achieved) <= len(GOALS)
        assert 0 <= first_state.score <= len(GOALS)
