import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from wayfarer.errors import ConfigError, DataFormatError, TrainingDiverged, UsageError
from wayfarer.skills import (
    DistanceRegressor,
    EventPredictor,
    GoalConditionedPolicy,
    QFunction,
    SubgoalEncoder,
    TrainConfig,
    adam_minimize,
    encode_action_sequences,
    fit_q_tabular,
    grad_check,
    kl_standard_normal,
    load_model,
    loss_awac,
    loss_distance_regression,
    loss_events,
    loss_expected_q,
    loss_gcbc,
    loss_vib,
    save_model,
    softplus,
    steps_to_value,
    train,
    value_to_steps,
)
from wayfarer.skills import losses as L
from wayfarer.skills.losses import (
    build_distance,
    build_events,
    build_policy,
    build_q,
    build_vib,
    forward_distance,
    forward_policy,
    vib_encode,
)
from wayfarer.skills.qfit import loss_q_mse
from wayfarer.skills.train import awac_weights
from wayfarer.trajdata import Dataset, Trajectory, fixed_offset, uniform_future
from wayfarer.trajdata.relabel import RelabeledArrays, sample_relabeled_arrays
from wayfarer.worldsim import AgentState, WorldSpec, generate_world, run_episode, uniform_walk
from wayfarer.worldsim.sim import OBS_CHANNELS

EAST = 2


def random_batch(rng, b=8, width=6, max_delta=10):
    """Synthetic positive batch; indices are unused by the losses."""
    zeros = np.zeros(b, dtype=np.int64)
    return RelabeledArrays(
        obs=rng.random((b, width)),
        actions=rng.integers(4, size=b),
        goals=rng.random((b, width)),
        delta=rng.integers(1, max_delta + 1, size=b),
        negative=np.zeros(b, dtype=bool),
        anchor_traj=zeros,
        anchor_t=zeros,
        goal_traj=zeros,
        goal_t=zeros,
    )


def chain_state(i, n):
    """One-cell observation whose signature channel identifies the state."""
    obs = np.zeros(OBS_CHANNELS)
    obs[OBS_CHANNELS - 1] = (i + 1) / (n + 1)
    return obs


def chain_dataset(n=5):
    """Corridor walked once, always EAST: state i reaches j>i in j-i steps."""
    obs = np.stack([chain_state(i, n) for i in range(n)])
    return Dataset().record(
        Trajectory(
            observations=obs,
            actions=np.full(n, EAST, dtype=np.uint8),
            collision=np.zeros(n, dtype=bool),
            bumpiness=np.zeros(n),
            trapped=np.zeros(n, dtype=bool),
            disengagement=np.zeros(n, dtype=bool),
            eval_positions=np.stack([np.arange(n), np.zeros(n, dtype=np.int64)], axis=1),
            world_id="chain",
        )
    )


def walked_dataset(n_traj=3, steps=20, seed=0):
    world = generate_world(WorldSpec(width=10, height=10, seed=seed))
    rng = np.random.default_rng(seed)
    ds = Dataset()
    for _ in range(n_traj):
        ds.record(run_episode(world, uniform_walk, AgentState(5, 5), steps, rng))
    return ds


def zero_head(pv, prefix):
    pv.get(f"{prefix}/W3")[:] = 0.0
    pv.get(f"{prefix}/b3")[:] = 0.0


# --- closed-form loss values ---

def test_gcbc_uniform_policy_is_ln4():
    rng = np.random.default_rng(0)
    pv = build_policy(6, 8, rng)
    zero_head(pv, "pi")
    loss, grad = loss_gcbc(pv, random_batch(rng))
    assert abs(loss - np.log(4.0)) < 1e-12
    assert np.isfinite(grad).all()


def test_gcbc_rejects_negatives():
    rng = np.random.default_rng(0)
    batch = random_batch(rng)
    batch.negative[0] = True
    with pytest.raises(UsageError, match="positive"):
        loss_gcbc(build_policy(6, 8, rng), batch)


def test_distance_loss_constant_head():
    rng = np.random.default_rng(1)
    pv = build_distance(6, 8, rng)
    zero_head(pv, "dist")
    batch = random_batch(rng, b=16)
    loss, _ = loss_distance_regression(pv, batch)
    expected = np.mean((np.log(2.0) - batch.delta) ** 2)
    assert abs(loss - expected) < 1e-12


def test_distance_head_hits_chosen_constant():
    # b3 = softplus^-1(c) with zero weights makes the prediction exactly c,
    # and the batch mean is the mse-optimal constant
    rng = np.random.default_rng(2)
    batch = random_batch(rng, b=32)
    c = batch.delta.mean()

    def loss_at(const):
        pv = build_distance(6, 8, np.random.default_rng(2))
        zero_head(pv, "dist")
        pv.get("dist/b3")[:] = np.log(np.expm1(const))
        return loss_distance_regression(pv, batch)[0]

    assert loss_at(c) < loss_at(c + 0.5)
    assert loss_at(c) < loss_at(c - 0.5)
    assert abs(loss_at(c) - np.mean((c - batch.delta) ** 2)) < 1e-9


def test_expected_q_constant_q_has_zero_gradient():
    rng = np.random.default_rng(3)
    pv = build_policy(6, 8, rng)
    batch = random_batch(rng)
    q = np.full((len(batch), 4), -3.7)
    loss, grad = loss_expected_q(pv, batch, q)
    assert abs(loss - 3.7) < 1e-12
    # expectation of a constant is policy-independent; only float roundoff
    # (softmax rows summing to 1 +- eps) survives in the gradient
    assert np.abs(grad).max() < 1e-15


def test_expected_q_training_prefers_better_action():
    rng = np.random.default_rng(4)
    pv = build_policy(6, 8, rng)
    batch = random_batch(rng, b=32)
    q = np.zeros((32, 4))
    q[:, 1] = 1.0

    adam_minimize(lambda p, s: loss_expected_q(p, batch, q), pv, 300, 3e-3)
    probs = forward_policy(pv, batch.obs, batch.goals)
    assert probs[:, 1].mean() > 0.95


def test_awac_weigths_clip_and_identity():
    q = np.array([[2.0, 0.0, 0.0, 0.0], [50.0, 0.0, 0.0, 0.0]])
    v = np.array([1.0, 0.0])
    acts = np.array([0, 0])
    w = awac_weights(q, v, acts, lam=1.0, w_max=20.0)
    assert abs(w[0] - np.e) < 1e-12
    assert w[1] == 20.0
    assert awac_weights(q, v, np.array([1, 1]), lam=2.0, w_max=20.0)[0] == np.exp(-0.5)


def test_awac_translation_invariant():
    rng = np.random.default_rng(5)
    pv = build_policy(6, 8, rng)
    batch = random_batch(rng)
    q = rng.normal(size=(len(batch), 4))
    v = rng.normal(size=len(batch))
    l0, g0 = loss_awac(pv, batch, q, v, lam=0.7)
    l1, g1 = loss_awac(pv, batch, q + 3.25, v + 3.25, lam=0.7)
    assert abs(l0 - l1) < 1e-10
    assert np.allclose(g0, g1, atol=1e-12)
    with pytest.raises(UsageError):
        loss_awac(pv, batch, q, v, lam=0.0)


def test_awac_unit_weights_match_gcbc():
    # Q == V makes every weight 1, reducing awac to plain imitation
    rng = np.random.default_rng(6)
    pv = build_policy(6, 8, rng)
    batch = random_batch(rng)
    q = np.zeros((len(batch), 4))
    v = np.zeros(len(batch))
    la, ga = loss_awac(pv, batch, q, v)
    lg, gg = loss_gcbc(pv, batch)
    assert abs(la - lg) < 1e-12
    assert np.allclose(ga, gg, atol=1e-14)


def test_events_loss_constant_head():
    rng = np.random.default_rng(7)
    ds = walked_dataset()
    from wayfarer.trajdata.relabel import sample_event_windows

    windows = sample_event_windows(ds, 3, 16, rng)
    pv = build_events(ds.obs_width(), 3, 8, rng)
    zero_head(pv, "ev")
    loss, _ = loss_events(pv, windows)
    ln2 = np.log(2.0)
    expected = 3 * ln2 + 3 * ln2 + np.mean(((ln2 - windows["bumpiness"]) ** 2).sum(axis=1))
    assert abs(loss - expected) < 1e-12


def test_vib_zero_encoder_kills_kl():
    rng = np.random.default_rng(8)
    pv = build_vib(6, 3, 8, rng)
    zero_head(pv, "enc")
    batch = random_batch(rng)
    eps = rng.standard_normal((len(batch), 3))
    l0, _ = loss_vib(pv, batch, beta=0.0, eps=eps)
    l1, _ = loss_vib(pv, batch, beta=5.0, eps=eps)
    assert l0 == l1  # KL(N(0,I) || N(0,I)) = 0 exactly


def test_vib_beta_linearity():
    rng = np.random.default_rng(9)
    pv = build_vib(6, 3, 8, rng)
    batch = random_batch(rng)
    eps = rng.standard_normal((len(batch), 3))
    mu, logvar = vib_encode(pv, batch.obs, batch.goals)
    kl = kl_standard_normal(mu, logvar).mean()
    assert kl > 0
    l1, _ = loss_vib(pv, batch, beta=0.25, eps=eps)
    l2, _ = loss_vib(pv, batch, beta=1.25, eps=eps)
    assert abs((l2 - l1) - kl) < 1e-10
    with pytest.raises(UsageError):
        loss_vib(pv, batch, beta=-0.1, eps=eps)


def test_kl_closed_form_example():
    # KL for mu=1, logvar=0 in one coordinate: 0.5*(1+1-0-1) = 0.5
    kl = kl_standard_normal(np.array([[1.0]]), np.array([[0.0]]))
    assert abs(kl[0] - 0.5) < 1e-15


# --- gradient integrity ---

def _loss_cases(rng):
    batch = random_batch(rng, b=6)
    q = rng.normal(size=(6, 4))
    v = rng.normal(size=6)
    eps = rng.standard_normal((6, 3))
    ds = walked_dataset(n_traj=2, steps=10)
    from wayfarer.trajdata.relabel import sample_event_windows

    windows = sample_event_windows(ds, 2, 6, rng)
    targets = rng.normal(size=6)
    return [
        ("gcbc", build_policy(6, 8, rng), lambda p: loss_gcbc(p, batch)),
        ("expected_q", build_policy(6, 8, rng), lambda p: loss_expected_q(p, batch, q)),
        ("awac", build_policy(6, 8, rng), lambda p: loss_awac(p, batch, q, v, lam=0.8)),
        ("distance", build_distance(6, 8, rng), lambda p: loss_distance_regression(p, batch)),
        ("events", build_events(ds.obs_width(), 2, 8, rng), lambda p: loss_events(p, windows)),
        ("vib", build_vib(6, 3, 8, rng), lambda p: loss_vib(p, batch, beta=0.3, eps=eps)),
        ("q_mse", build_q(6, 8, rng), lambda p: loss_q_mse(p, batch.obs, batch.actions, batch.goals, targets)),
    ]


@pytest.mark.parametrize("case", range(7))
def test_gradients_match_finite_differences(case):
    rng = np.random.default_rng(100 + case)
    name, pv, fn = _loss_cases(rng)[case]
    report = grad_check(fn, pv, rng, coords_per_block=40)
    assert report.passed(1e-4), f"{name}: {report}"


# --- q fitting ---

def test_tabular_chain_gamma_one_is_negated_steps():
    table = fit_q_tabular(chain_dataset(5), gamma=1.0)
    obs = [chain_state(i, 5) for i in range(5)]
    for i in range(5):
        for j in range(i, 5):
            assert table.value(obs[i], obs[j]) == -(j - i)


def test_tabular_chain_discounted_matches_series():
    gamma = 0.9
    table = fit_q_tabular(chain_dataset(5), gamma=gamma)
    obs = [chain_state(i, 5) for i in range(5)]
    for i in range(5):
        for j in range(i + 1, 5):
            assert abs(table.value(obs[i], obs[j]) - steps_to_value(j - i, gamma)) < 1e-9


def test_tabular_unreachable_sinks_below_reachable():
    table = fit_q_tabular(chain_dataset(5), gamma=1.0)
    obs = [chain_state(i, 5) for i in range(5)]
    reachable_floor = min(table.value(obs[i], obs[j]) for i in range(5) for j in range(i, 5))
    for i in range(1, 5):
        assert table.value(obs[i], obs[0]) < reachable_floor - 1.0


def test_tabular_rejects_large_spaces_and_bad_gamma():
    with pytest.raises(ConfigError):
        fit_q_tabular(chain_dataset(3), gamma=0.0)
    with pytest.raises(UsageError, match="not in the fitted table"):
        fit_q_tabular(chain_dataset(3), gamma=1.0).value(np.ones(OBS_CHANNELS), chain_state(0, 3))


def test_value_to_steps_round_trip_integers():
    for gamma in (0.9, 0.95, 1.0):
        for d in range(51):
            steps, saturated = value_to_steps(steps_to_value(d, gamma), gamma)
            assert not saturated
            assert abs(steps - d) < 1e-7


def test_value_to_steps_saturates():
    steps, saturated = value_to_steps(-1.0 / (1.0 - 0.9), 0.9, delta_max=77.0)
    assert saturated and steps == 77.0
    with pytest.raises(ConfigError):
        value_to_steps(-1.0, 1.5)


def test_qfunction_estimator_chain_distances():
    q = QFunction(mode="tabular", gamma=1.0).fit(chain_dataset(5))
    obs = [chain_state(i, 5) for i in range(5)]
    assert q.distance(obs[0], obs[3]) == 3.0
    assert q.distance(obs[2], obs[2]) == 0.0
    np.testing.assert_allclose(q.distance(np.stack(obs[:3]), obs[4]), [4.0, 3.0, 2.0])


def test_qfunction_mlp_orders_near_and_far():
    # 1x6 corridor walked at random: every action has data at every cell
    # (greedy max over an action head nothing ever trained is meaningless)
    from wayfarer.worldsim import observe_cell

    world = generate_world(WorldSpec(width=8, height=8, seed=0))
    rng = np.random.default_rng(0)
    ds = Dataset()
    for _ in range(6):
        ds.record(run_episode(world, uniform_walk, AgentState(4, 4), 150, rng))
    q = QFunction(
        mode="mlp", gamma=0.9, strategy=uniform_future(),
        hidden=16, steps=1200, batch_size=64, target_refresh=50, random_state=0,
    ).fit(ds)
    # the walk starts at the center, so the middle row is data-dense
    obs = [observe_cell(world, x, 4) for x in range(1, 7)]
    assert q.distance(obs[0], obs[5]) > q.distance(obs[0], obs[1]) + 1.0
    assert q.distance(obs[1], obs[1]) == 0.0  # arrived pin
    d = q.distance(np.stack(obs), obs[3])
    assert (np.asarray(d) >= 0.0).all()


# --- optimizer ---

def test_adam_zero_learning_rate_is_identity():
    rng = np.random.default_rng(10)
    pv = build_policy(6, 8, rng)
    before = pv.flat.copy()
    adam_minimize(lambda p, s: loss_gcbc(p, random_batch(rng)), pv, 40, 0.0)
    assert np.array_equal(pv.flat, before)


def test_adam_minimizes_quadratic():
    rng = np.random.default_rng(11)
    pv = build_policy(6, 8, rng)

    def quad(p, step):
        return float((p.flat**2).sum()), 2.0 * p.flat

    adam_minimize(quad, pv, 1500, 0.05)
    assert np.abs(pv.flat).max() < 1e-3


def test_training_divergence_reports_step():
    rng = np.random.default_rng(12)
    pv = build_policy(6, 8, rng)

    def exploding(p, step):
        if step == 3:
            return float("nan"), np.zeros_like(p.flat)
        return 1.0, np.zeros_like(p.flat)

    with pytest.raises(TrainingDiverged) as err:
        adam_minimize(exploding, pv, 10, 1e-3)
    assert err.value.step == 3


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=-1.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(gamma=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(target_refresh=0).validate()


def test_train_rejects_mismatched_objective_and_strategy():
    ds = walked_dataset()
    from wayfarer.trajdata import negative_mix

    with pytest.raises(ConfigError, match="positives only"):
        train("distance", ds, negative_mix(uniform_future(), 0.3), TrainConfig(steps=2), np.random.default_rng(0))
    with pytest.raises(ConfigError, match="unknown objective"):
        train("dagger", ds, uniform_future(), TrainConfig(steps=2), np.random.default_rng(0))
    with pytest.raises(ConfigError, match="q_model"):
        train("awac", ds, uniform_future(), TrainConfig(steps=2), np.random.default_rng(0))


# --- estimators ---

def test_estimators_raise_before_fit():
    with pytest.raises(NotFittedError):
        GoalConditionedPolicy().action_probabilities(np.zeros(9), np.zeros(9))
    with pytest.raises(NotFittedError):
        DistanceRegressor().predict(np.zeros(9), np.zeros(9))
    with pytest.raises(NotFittedError):
        QFunction().q_values(np.zeros(9), np.zeros(9))
    with pytest.raises(NotFittedError):
        EventPredictor().predict(np.zeros(9), [[0, 1, 2, 3]])
    with pytest.raises(NotFittedError):
        SubgoalEncoder().encode(np.zeros(9), np.zeros(9))


def test_policy_learns_constant_action_corridor():
    ds = chain_dataset(8)
    pol = GoalConditionedPolicy(hidden=16, steps=300, batch_size=32, strategy=fixed_offset(1)).fit(ds)
    obs = [chain_state(i, 8) for i in range(8)]
    probs = pol.action_probabilities(np.stack(obs[:4]), obs[5])
    assert probs.shape == (4, 4)
    assert (probs[:, EAST] > 0.9).all()
    assert pol.predict(obs[0], obs[5]) == EAST


def test_policy_unknown_objective():
    with pytest.raises(ConfigError):
        GoalConditionedPolicy(objective="ppo").fit(chain_dataset(3))


def test_pair_validation_errors():
    pol = GoalConditionedPolicy(hidden=8, steps=2, batch_size=4).fit(chain_dataset(4))
    with pytest.raises(ValueError, match="feature width"):
        pol.action_probabilities(np.zeros(5), np.zeros(5))
    with pytest.raises(ValueError, match="non-finite"):
        pol.action_probabilities(np.full(OBS_CHANNELS, np.nan), chain_state(0, 4))


def test_get_params_round_trip():
    est = DistanceRegressor(hidden=32, steps=7)
    clone = DistanceRegressor(**est.get_params(deep=False))
    assert clone.hidden == 32 and clone.steps == 7


def test_event_predictor_shapes_and_errors():
    ds = walked_dataset(n_traj=2, steps=15)
    ev = EventPredictor(horizon=3, hidden=8, steps=30, batch_size=8).fit(ds)
    out = ev.predict(ds.trajectories[0].observations[0], [[0, 1, 2], [3, 3, 3]])
    assert out["collision"].shape == (2, 3)
    assert (out["bumpiness"] >= 0).all()
    assert ((out["collision"] >= 0) & (out["collision"] <= 1)).all()
    with pytest.raises(ValueError, match="length 3"):
        ev.predict(ds.trajectories[0].observations[0], [[0, 1]])


def test_encode_action_sequences():
    out = encode_action_sequences(np.array([[0, 3]]))
    assert out.shape == (1, 8)
    assert out[0].tolist() == [1, 0, 0, 0, 0, 0, 0, 1]
    with pytest.raises(ValueError):
        encode_action_sequences(np.array([[4]]))


def test_subgoal_encoder_api():
    ds = walked_dataset(n_traj=2, steps=15)
    enc = SubgoalEncoder(latent_dim=4, hidden=8, steps=30, batch_size=8).fit(ds)
    mu, logvar = enc.encode(ds.trajectories[0].observations[0], ds.trajectories[0].observations[5])
    assert mu.shape == (4,) and logvar.shape == (4,)
    z = enc.sample_subgoal(np.random.default_rng(0), n=5)
    assert z.shape == (5, 4)
    d = enc.distance(ds.trajectories[0].observations[0], z)
    assert (np.asarray(d) >= 0).all()


# --- checkpoints ---

def test_checkpoint_round_trip_distance(tmp_path):
    ds = walked_dataset(n_traj=2, steps=12)
    est = DistanceRegressor(hidden=8, steps=25, batch_size=8).fit(ds)
    p1, p2 = tmp_path / "d1.wfm", tmp_path / "d2.wfm"
    save_model(est, p1)
    loaded = load_model(p1)
    obs = ds.trajectories[0].observations
    assert np.array_equal(loaded.predict(obs[:5], obs[5:10]), est.predict(obs[:5], obs[5:10]))
    save_model(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_round_trip_tabular_q(tmp_path):
    q = QFunction(mode="tabular", gamma=0.9).fit(chain_dataset(4))
    path = tmp_path / "q.wfm"
    save_model(q, path)
    loaded = load_model(path)
    obs = [chain_state(i, 4) for i in range(4)]
    assert loaded.distance(obs[0], obs[3]) == q.distance(obs[0], obs[3])
    assert np.array_equal(loaded.table_.q, q.table_.q)


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.wfm"
    bad.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(DataFormatError, match="magic"):
        load_model(bad)
    ds = walked_dataset(n_traj=1, steps=8)
    est = DistanceRegressor(hidden=8, steps=5, batch_size=4).fit(ds)
    good = tmp_path / "good.wfm"
    save_model(est, good)
    cut = tmp_path / "cut.wfm"
    cut.write_bytes(good.read_bytes()[:-20])
    with pytest.raises(DataFormatError, match="truncated"):
        load_model(cut)
