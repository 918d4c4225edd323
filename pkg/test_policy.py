from dataclasses import replace

import numpy as np
import pytest

from src.envs.base import Outcome, SymbolicEnv, action_index
from src.envs.blocks import BlocksConfig, BlocksWorld
from src.numerics import tensor as tn
from src.numerics.gradcheck import grad_check
from src.numerics.optim import Adam
from src.numerics.tensor import Tensor
from src.policy.acting import ActMode, act, action_probabilities, select_index
from src.policy.dqn import (
    DqnHyper,
    EpsilonSchedule,
    ReplayBuffer,
    double_q_targets,
    dqn_train,
    q_loss,
    td_loss,
)
from src.policy.network import NetworkSpec, PolicyNetwork, q_values
from src.policy.ppo import (
    PpoBatch,
    PpoHyper,
    Trajectory,
    clipped_surrogate,
    gae,
    normalize_advantages,
    ppo_loss,
    ppo_train,
    ppo_update,
)
from src.policy.rollout import Transition, summarize
from src.symbolic.vocabulary import GroundAtom, SymbolicState, Vocabulary
from src.utils.errors import ContractError
from src.utils.models import Task


VOCAB = Vocabulary(entities=('p', 'q', 'r'), state_predicates=('R', 'S'), action_predicates=('Act',))
SMALL = NetworkSpec(steps=2, layers=1, heads=3, hidden=4, head_hidden=4, critic_hidden=3, critic=True, seed=1)


def _state(rng):
    return SymbolicState((rng.random((3, 3, 3)) < 0.4).astype(float))


def _transition(rng, reward=0.0, done=False, index=0):
    mask = np.ones(9, dtype=bool)
    mask[rng.integers(1, 9)] = False
    mask[index] = True
    return Transition(_state(rng), GroundAtom(2, index // 3, index % 3), reward, _state(rng), done, index, mask, np.ones(9, dtype=bool))


def _trajectory(rewards, values, dones, bootstrap=0.0, rng=None):
    rng = rng or np.random.default_rng(0)
    transitions = [_transition(rng, r, d) for r, d in zip(rewards, dones)]
    return Trajectory(transitions, [0.0] * len(rewards), list(values), bootstrap)


def test_identity_heads_read_out_kappa():
    network = PolicyNetwork(VOCAB, NetworkSpec(steps=2, layers=1, heads=3, hidden=4, head_hidden=9))
    params = network.params
    params['head.Act.w0'].data = np.eye(9)
    params['head.Act.b0'].data = np.zeros(9)
    params['head.Act.w1'].data = np.eye(9)
    params['head.Act.b1'].data = np.zeros(9)
    state = _state(np.random.default_rng(0))
    q = network.q_tensor(state).data[0]
    np.testing.assert_allclose(q, network.kappa(state).data[0].reshape(9), atol=1e-12)
    values = q_values(network, state)
    assert values[GroundAtom(2, 1, 2)] == pytest.approx(q[1 * 3 + 2])


def test_zero_heads_give_bias_for_every_state():
    network = PolicyNetwork(VOCAB, SMALL)
    bias = np.arange(9.0)
    network.params['head.Act.w0'].data[:] = 0.0
    network.params['head.Act.w1'].data[:] = 0.0
    network.params['head.Act.b1'].data = bias.copy()
    rng = np.random.default_rng(1)
    q = network.q_tensor([_state(rng), _state(rng)]).data
    np.testing.assert_allclose(q, np.stack([bias, bias]))


def test_clone_is_independent_copy():
    network = PolicyNetwork(VOCAB, SMALL)
    twin = network.clone()
    state = _state(np.random.default_rng(2))
    np.testing.assert_array_equal(network.q_tensor(state).data, twin.q_tensor(state).data)
    twin.params['head.Act.b1'].data = twin.params['head.Act.b1'].data + 1.0
    assert not np.array_equal(network.q_tensor(state).data, twin.q_tensor(state).data)


def test_value_needs_critic():
    network = PolicyNetwork(VOCAB, NetworkSpec(steps=1, heads=3, hidden=4, head_hidden=4))
    with pytest.raises(ContractError):
        network.value(_state(np.random.default_rng(3)))


def test_greedy_selection_breaks_ties_by_lowest_index_and_respects_mask():
    rng = np.random.default_rng(4)
    q = np.array([0.0, 2.0, 2.0, 5.0])
    mask = np.array([True, True, True, False])
    assert select_index(q, mask, ActMode.GREEDY, rng) == 1
    with pytest.raises(ContractError):
        select_index(q, np.zeros(4, dtype=bool), ActMode.GREEDY, rng)


def test_softmax_never_picks_masked_atoms():
    rng = np.random.default_rng(5)
    q = np.array([10.0, 0.0, 0.0, 50.0])
    mask = np.array([False, True, True, False])
    picks = {select_index(q, mask, ActMode.SOFTMAX, rng) for _ in range(200)}
    assert picks == {1, 2}
    np.testing.assert_allclose(action_probabilities(q, mask), [0.0, 0.5, 0.5, 0.0])


def test_full_exploration_is_uniform_over_allowed_atoms():
    rng = np.random.default_rng(6)
    q = np.array([9.0, 0.0, 0.0, 0.0])
    mask = np.array([True, True, False, True])
    counts = np.bincount([select_index(q, mask, ActMode.GREEDY, rng, epsilon=1.0) for _ in range(3000)], minlength=4)
    assert counts[2] == 0
    np.testing.assert_allclose(counts[[0, 1, 3]] / 3000, 1 / 3, atol=0.04)


def test_act_returns_an_action_atom():
    network = PolicyNetwork(VOCAB, SMALL)
    mask = np.zeros(9, dtype=bool)
    mask[5] = True
    atom = act(_state(np.random.default_rng(7)), network, ActMode.SOFTMAX, np.random.default_rng(0), mask)
    assert atom == GroundAtom(2, 1, 2)


def test_double_q_target_and_td_loss():
    targets = double_q_targets(np.array([1.0]), np.array([False]), np.array([[0.0, 5.0]]), np.array([[3.0, 2.0]]), 0.9)
    np.testing.assert_allclose(targets, [2.8])
    assert td_loss(Tensor(np.array([0.0])), targets).item() == pytest.approx(7.84)
    terminal = double_q_targets(np.array([1.0]), np.array([True]), np.array([[0.0, 5.0]]), np.array([[3.0, 2.0]]), 0.9)
    np.testing.assert_allclose(terminal, [1.0])
    masked = double_q_targets(
        np.array([0.0]), np.array([False]), np.array([[0.0, 5.0]]), np.array([[3.0, 2.0]]), 1.0, np.array([[True, False]])
    )
    np.testing.assert_allclose(masked, [3.0])


def test_q_loss_matches_per_transition_loop():
    rng = np.random.default_rng(8)
    network = PolicyNetwork(VOCAB, SMALL)
    target = network.clone()
    target.params['head.Act.b1'].data = rng.normal(size=9)
    batch = [_transition(rng, reward=float(i), done=i == 2, index=i) for i in range(4)]
    expected = []
    for t in batch:
        q_next = network.q_tensor(t.next_state).data[0]
        bootstrap = 0.0 if t.done else target.q_tensor(t.next_state).data[0][int(np.argmax(q_next))]
        q = network.q_tensor(t.state).data[0][t.action_index]
        expected.append((q - (t.reward + 0.9 * bootstrap)) ** 2)
    assert q_loss(batch, network, target, 0.9).item() == pytest.approx(np.mean(expected))
    with pytest.raises(ContractError):
        q_loss([], network, target, 0.9)


def test_q_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    network = PolicyNetwork(VOCAB, SMALL)
    target = network.clone()
    batch = [_transition(rng, reward=1.0, index=i) for i in (0, 4)]
    params = network.params
    checked = [params['head.Act.w1'], params['path.query'], params['predicate.t1.l0.out']]
    assert grad_check(lambda: q_loss(batch, network, target, 0.9), checked) < 1e-4


def test_replay_buffer_is_bounded_and_seeded():
    rng = np.random.default_rng(10)
    items = [_transition(rng, reward=float(i)) for i in range(5)]
    first, second = ReplayBuffer(3, seed=1), ReplayBuffer(3, seed=1)
    for t in items:
        first.append(t)
        second.append(t)
    assert len(first) == 3
    rewards = [t.reward for t in first.sample(20)]
    assert set(rewards) <= {2.0, 3.0, 4.0}
    assert rewards == [t.reward for t in second.sample(20)]
    with pytest.raises(ContractError):
        ReplayBuffer(2).sample(1)
    with pytest.raises(ContractError):
        ReplayBuffer(0)


def test_epsilon_schedule_decays_linearly_then_holds():
    schedule = EpsilonSchedule(start=1.0, end=0.1, fraction=0.5, total=100)
    assert schedule(0) == 1.0
    assert schedule(25) == pytest.approx(0.55)
    assert schedule(50) == pytest.approx(0.1)
    assert schedule(99) == pytest.approx(0.1)


def test_dqn_with_zero_steps_leaves_parameters_untouched():
    network = PolicyNetwork(BlocksWorld(BlocksConfig()).vocabulary, NetworkSpec(steps=1, heads=4, hidden=4, head_hidden=4))
    before = network.params.arrays()
    state = dqn_train(
        BlocksWorld(BlocksConfig()), network, Adam(network.params), DqnHyper(steps=0), np.random.default_rng(0)
    )
    assert state.step == 0 and state.curve == []
    for name, value in network.params.arrays().items():
        np.testing.assert_array_equal(value, before[name])


def test_short_dqn_run_records_episodes():
    env = BlocksWorld(BlocksConfig(piles=[['a', 'b']], horizon=4))
    network = PolicyNetwork(env.vocabulary, NetworkSpec(steps=1, heads=4, hidden=4, head_hidden=4))
    seen = []
    hyper = DqnHyper(steps=12, batch_size=4, learning_starts=4, target_sync=5, log_every=1)
    state = dqn_train(env, network, Adam(network.params, lr=1e-3), hyper, np.random.default_rng(1), seen.append)
    assert state.step == 12
    assert len(seen) == state.episode == len(state.curve)
    assert all(stats.length <= 4 for stats in seen)


def test_gae_with_zero_lambda_is_one_step_td_error():
    traj = _trajectory([1.0, 0.0, 2.0], [0.5, 0.2, 0.1], [False, False, False], bootstrap=0.3)
    advantages, returns = gae(traj, gamma=0.9, lam=0.0)
    np.testing.assert_allclose(advantages, [1.0 + 0.9 * 0.2 - 0.5, 0.9 * 0.1 - 0.2, 2.0 + 0.9 * 0.3 - 0.1])
    np.testing.assert_allclose(returns, advantages + np.array([0.5, 0.2, 0.1]))


def test_gae_with_unit_lambda_is_monte_carlo_return():
    traj = _trajectory([1.0, -1.0, 3.0], [0.5, 0.2, 0.1], [False, False, True])
    advantages, returns = gae(traj, gamma=1.0, lam=1.0)
    np.testing.assert_allclose(returns, [3.0, 2.0, 3.0])
    np.testing.assert_allclose(advantages, [2.5, 1.8, 2.9])


def test_gae_matches_discounted_sum_of_td_errors():
    rewards, values = [0.5, -0.2, 1.0, 0.3], [0.1, 0.4, -0.3, 0.2]
    traj = _trajectory(rewards, values, [False] * 4, bootstrap=0.7)
    gamma, lam = 0.95, 0.8
    next_values = values[1:] + [0.7]
    deltas = [r + gamma * nv - v for r, v, nv in zip(rewards, values, next_values)]
    expected = [sum((gamma * lam) ** k * deltas[i + k] for k in range(4 - i)) for i in range(4)]
    np.testing.assert_allclose(gae(traj, gamma, lam)[0], expected)


def test_normalize_and_clipped_surrogate():
    normalized = normalize_advantages(np.array([1.0, 2.0, 3.0]))
    assert normalized.mean() == pytest.approx(0.0)
    assert normalized.std() == pytest.approx(1.0, abs=1e-6)
    ratio = Tensor(np.array([1.5, 1.5, 0.5, 0.5]))
    advantages = np.array([1.0, -1.0, 1.0, -1.0])
    np.testing.assert_allclose(clipped_surrogate(ratio, advantages, 0.2).data, [1.2, -1.5, 0.5, -0.8])


def _ppo_batch(network, rng):
    trajectories = []
    for _ in range(2):
        transitions = [_transition(rng, reward=float(rng.normal()), index=int(rng.integers(9))) for _ in range(3)]
        transitions[-1] = replace(transitions[-1], done=True)
        values = list(network.value([t.state for t in transitions]).data)
        trajectories.append(Trajectory(transitions, [0.0] * 3, values))
    batch = PpoBatch.from_trajectories(trajectories, gamma=1.0, lam=0.95)
    with tn.no_grad():
        logits = network.q_tensor(batch.states).data + batch.mask_bias
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    batch.old_log_probs = log_probs[np.arange(len(batch.actions)), batch.actions] + rng.normal(0.0, 0.05, size=len(batch.actions))
    return batch


def test_ppo_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    network = PolicyNetwork(VOCAB, SMALL)
    batch = _ppo_batch(network, rng)
    params = network.params
    checked = [params['head.Act.b1'], params['critic.w1'], params['path.query'], params['predicate.t0.l0.out']]
    assert grad_check(lambda: ppo_loss(network, batch)[0], checked) < 1e-4


def test_zero_advantages_give_no_policy_gradient():
    rng = np.random.default_rng(12)
    network = PolicyNetwork(VOCAB, SMALL)
    batch = _ppo_batch(network, rng)
    batch.advantages = np.zeros_like(batch.advantages)
    loss, diagnostics = ppo_loss(network, batch, value_coef=0.0, entropy_coef=0.0)
    assert diagnostics['policy_loss'] == 0.0
    assert loss.item() == 0.0


def test_ppo_update_with_zero_learning_rate_is_identity():
    rng = np.random.default_rng(13)
    network = PolicyNetwork(VOCAB, SMALL)
    transitions = [_transition(rng, reward=1.0, done=True)]
    trajectory = Trajectory(transitions, [np.log(1 / 8)], [0.0])
    before = network.params.arrays()
    diagnostics = ppo_update([trajectory], network, Adam(network.params, lr=0.0), epochs=2)
    assert {'loss', 'policy_loss', 'value_loss', 'entropy', 'mean_ratio', 'clip_fraction', 'grad_norm'} <= set(diagnostics)
    for name, value in network.params.arrays().items():
        np.testing.assert_array_equal(value, before[name])
    with pytest.raises(ContractError):
        PpoBatch.from_trajectories([], 1.0, 0.95)


def test_short_ppo_run_counts_episodes_and_updates():
    env = BlocksWorld(BlocksConfig(task=Task.UNSTACK, piles=[['a', 'b', 'c']], horizon=6))
    network = PolicyNetwork(env.vocabulary, NetworkSpec(steps=2, heads=4, hidden=4, head_hidden=4, critic=True))
    seen = []
    hyper = PpoHyper(episodes=3, batch_episodes=2, epochs=1, log_every=1)
    progress = ppo_train(env, network, Adam(network.params, lr=1e-3), hyper, np.random.default_rng(2), seen.append)
    assert progress.episode == 3
    assert progress.updates == 2
    assert [stats.episode for stats in seen] == [0, 1, 2]
    assert progress.step == sum(stats.length for stats in seen)
    assert all(stats.score <= 0.96 + 1e-9 for stats in seen)


def test_summarize_uses_population_std():
    assert summarize([1.0, 3.0]) == (2.0, 1.0)


def test_softmax_and_greedy_ignore_a_constant_shift_of_q():
    rng = np.random.default_rng(15)
    q = rng.normal(size=9)
    mask = np.ones(9, dtype=bool)
    mask[[2, 7]] = False
    probs = action_probabilities(q, mask)
    assert abs(probs.sum() - 1.0) < 1e-12
    for shift in (-40.0, 3.5, 1e3):
        np.testing.assert_allclose(action_probabilities(q + shift, mask), probs, atol=1e-12)
        assert select_index(q + shift, mask, ActMode.GREEDY, rng) == select_index(q, mask, ActMode.GREEDY, rng)


LADDER = Vocabulary(entities=('p', 'q'), state_predicates=('At',), action_predicates=('Go',))
STOP, ADVANCE = GroundAtom(1, 0, 0), GroundAtom(1, 0, 1)


class TwoStepLadder(SymbolicEnv):
    """Start: stop for 0.5 or advance; upper rung: advance for 1.0 or stop for 0. Core 2 is terminal."""

    horizon = 5

    @property
    def vocabulary(self):
        return LADDER

    def initial_core(self, rng=None):
        return 0

    def outcomes(self, core, action):
        if core == 0:
            return [Outcome(1.0, 1, 0.0, 0.0, False)] if action == ADVANCE else [Outcome(1.0, 2, 0.5, 0.5, True)]
        reward = 1.0 if action == ADVANCE else 0.0
        return [Outcome(1.0, 2, reward, reward, True)]

    def encode_core(self, core):
        matrices = np.zeros((2, 2, 2))
        if core == 2:
            matrices[0, 1, 1] = 1.0
        else:
            matrices[0, 0, core] = 1.0
        return SymbolicState(matrices)

    def decode_state(self, state):
        return 2 if state.matrices[0, 1, 1] else int(np.argmax(state.matrices[0, 0]))

    def core_action_atoms(self, core):
        return [STOP, ADVANCE]

    def is_valid(self, core, action):
        return True

    def is_goal(self, core):
        return core == 2


def test_dqn_converges_to_bellman_values_on_a_deterministic_ladder():
    env = TwoStepLadder()
    network = PolicyNetwork(LADDER, NetworkSpec(steps=1, layers=1, heads=1, hidden=8, head_hidden=16, seed=3))
    hyper = DqnHyper(
        steps=2500,
        gamma=0.9,
        batch_size=32,
        buffer_capacity=1000,
        target_sync=50,
        learning_starts=64,
        epsilon=EpsilonSchedule(1.0, 1.0, 0.4, 2500),
        log_every=1000,
    )
    dqn_train(env, network, Adam(network.params, lr=5e-3), hyper, np.random.default_rng(4))
    stop, advance = action_index(STOP, LADDER), action_index(ADVANCE, LADDER)
    start = network.q_tensor(env.encode_core(0)).data[0]
    rung = network.q_tensor(env.encode_core(1)).data[0]
    assert start[stop] == pytest.approx(0.5, abs=1e-2)
    assert start[advance] == pytest.approx(0.9, abs=1e-2)
    assert rung[stop] == pytest.approx(0.0, abs=1e-2)
    assert rung[advance] == pytest.approx(1.0, abs=1e-2)
