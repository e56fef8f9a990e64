import pytest

from cellbreath.exceptions import CellBreathingViolation
from cellbreath.markov_channel import ACK, NACK
from cellbreath.phy_layer import FAR, NEAR
from cellbreath.scheduler_core import (
    BreathingPattern,
    GroupStep,
    JointAction,
    SystemBeliefState,
    UserRef,
    admissible_actions,
    asymmetric_policy_step,
    check_action,
    fixed_pattern_policy_step,
    greedy_equals_round_robin_check,
    greedy_select,
    immediate_reward,
    joint_greedy_step,
    order_from_beliefs,
    order_vector_update,
)

STATE = SystemBeliefState(near1=(0.3, 0.6), far1=(0.7, 0.2), near2=(0.5, 0.4), far2=(0.1, 0.9))


def test_admissible_set_size_and_shape():
    acts = admissible_actions(2, 3)
    assert len(acts) == 2 * 3 * 2
    assert all({a.cell1.group, a.cell2.group} == {NEAR, FAR} for a in acts)
    assert acts[0] == JointAction(UserRef(NEAR, 0), UserRef(FAR, 0))


def test_same_group_action_rejected():
    with pytest.raises(CellBreathingViolation):
        check_action(STATE, (UserRef(NEAR, 0), UserRef(NEAR, 1)))
    with pytest.raises(CellBreathingViolation):
        check_action(STATE, (UserRef(NEAR, 5), UserRef(FAR, 0)))


def test_immediate_reward():
    assert immediate_reward(STATE, (UserRef(FAR, 0), UserRef(NEAR, 0))) == pytest.approx(1.2)


def test_greedy_select_ties_lowest_index():
    assert greedy_select([0.4, 0.7, 0.7]) == 1
    with pytest.raises(ValueError):
        greedy_select([])


def test_joint_greedy_maximises_sum():
    act = joint_greedy_step(STATE)
    best = max(immediate_reward(STATE, a) for a in admissible_actions(2, 2))
    assert immediate_reward(STATE, act) == pytest.approx(best)
    assert act == JointAction(UserRef(NEAR, 1), UserRef(FAR, 1))


def test_asymmetric_policy_cell1_leads():
    act = asymmetric_policy_step(STATE)
    # cell 1 best overall is far user 0 (0.7), forcing cell 2 onto its near group
    assert act == JointAction(UserRef(FAR, 0), UserRef(NEAR, 0))
    tie = SystemBeliefState((0.5,), (0.5,), (0.2,), (0.9,))
    assert asymmetric_policy_step(tie).cell1 == UserRef(NEAR, 0)


def test_pattern_parse_and_cycle():
    pat = BreathingPattern.parse("1F, 1F ,1n")
    assert str(pat) == "1F,1F,1N"
    assert [pat.group_for(1, k) for k in range(4)] == [FAR, FAR, NEAR, FAR]
    assert [pat.group_for(2, k) for k in range(3)] == [NEAR, NEAR, FAR]
    assert pat.instants(1, NEAR, 6) == [2, 5]
    with pytest.raises(ValueError):
        BreathingPattern.parse("2F")


def test_fixed_pattern_step_follows_elapsed():
    pat = BreathingPattern.parse("1F,1N")
    s0 = SystemBeliefState(STATE.near1, STATE.far1, STATE.near2, STATE.far2, elapsed=0)
    s1 = SystemBeliefState(STATE.near1, STATE.far1, STATE.near2, STATE.far2, elapsed=1)
    assert fixed_pattern_policy_step(s0, pat) == JointAction(UserRef(FAR, 0), UserRef(NEAR, 0))
    assert fixed_pattern_policy_step(s1, pat) == JointAction(UserRef(NEAR, 1), UserRef(FAR, 1))


def test_order_vector_rotation():
    assert order_vector_update((2, 0, 1), 2, ACK) == (2, 0, 1)
    assert order_vector_update((2, 0, 1), 2, NACK) == (0, 1, 2)
    with pytest.raises(ValueError):
        order_vector_update((2, 0, 1), 0, ACK)
    assert order_from_beliefs([0.3, 0.9, 0.3]) == (1, 0, 2)


def test_round_robin_check_detects_mismatch():
    good = [GroupStep((0.5, 0.6), 1, NACK), GroupStep((0.6, 0.2), 0, ACK)]
    assert greedy_equals_round_robin_check(good)
    bad = [GroupStep((0.5, 0.6), 1, NACK), GroupStep((0.6, 0.2), 1, ACK)]
    assert not greedy_equals_round_robin_check(bad)
    with pytest.raises(ValueError):
        greedy_equals_round_robin_check([GroupStep((0.5,), 0, 3)])


def test_state_validation():
    with pytest.raises(ValueError):
        SystemBeliefState((1.2,), (0.5,), (0.5,), (0.5,))
    s = SystemBeliefState.uniform(2, 3, 0.4, k=5)
    assert (s.n_near, s.n_far, s.k) == (2, 3, 5)
    assert UserRef.parse("f2") == UserRef(FAR, 2)
    assert UserRef(NEAR, 1).label() == "n1"
