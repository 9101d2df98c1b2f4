import numpy as np
import pytest

from wayfarer.errors import ConfigError, DataFormatError, UsageError
from wayfarer.trajdata import (
    Dataset,
    Trajectory,
    fixed_offset,
    load_dataset,
    negative_mix,
    sample_relabeled,
    sample_relabeled_arrays,
    save_dataset,
    trajectory_final,
    uniform_future,
)
from wayfarer.trajdata.dataset import make_provenance, replay_positions
from wayfarer.trajdata.io import dequantize_obs, export_jsonl, quantize_obs
from wayfarer.trajdata.relabel import (
    eligible_anchors,
    replay_reaches_goal,
    sample_event_windows,
    sample_transitions,
)
from wayfarer.worldsim import AgentState, WorldSpec, generate_world, run_episode, uniform_walk


def walked_dataset(n_traj=4, steps=30, seed=0, width=12):
    world = generate_world(WorldSpec(width=width, height=width, seed=seed))
    rng = np.random.default_rng(seed)
    ds = Dataset(provenance=make_provenance([seed], "uniform_walk"))
    for _ in range(n_traj):
        ds.record(run_episode(world, uniform_walk, AgentState(width // 2, width // 2), steps, rng))
    return ds


def synthetic_trajectory(h, world_id="w", obs_width=3, fill=0.5):
    return Trajectory(
        observations=np.full((h, obs_width), fill),
        actions=np.zeros(h, dtype=np.uint8),
        collision=np.zeros(h, dtype=bool),
        bumpiness=np.zeros(h),
        trapped=np.zeros(h, dtype=bool),
        disengagement=np.zeros(h, dtype=bool),
        eval_positions=np.zeros((h, 2), dtype=np.int64),
        world_id=world_id,
    )


# --- containers ---

def test_trajectory_validates_lengths():
    with pytest.raises(ValueError, match="actions"):
        Trajectory(
            observations=np.zeros((3, 2)),
            actions=np.zeros(2, dtype=np.uint8),
            collision=np.zeros(3, dtype=bool),
            bumpiness=np.zeros(3),
            trapped=np.zeros(3, dtype=bool),
            disengagement=np.zeros(3, dtype=bool),
            eval_positions=np.zeros((3, 2), dtype=np.int64),
            world_id="w",
        )


def test_trajectory_trapped_only_last():
    bad = np.array([True, False, False])
    with pytest.raises(ValueError, match="trapped"):
        Trajectory(
            observations=np.zeros((3, 2)),
            actions=np.zeros(3, dtype=np.uint8),
            collision=np.zeros(3, dtype=bool),
            bumpiness=np.zeros(3),
            trapped=bad,
            disengagement=np.zeros(3, dtype=bool),
            eval_positions=np.zeros((3, 2), dtype=np.int64),
            world_id="w",
        )


def test_empty_dataset_rejected():
    with pytest.raises(UsageError):
        Dataset().require_nonempty()
    with pytest.raises(UsageError):
        sample_relabeled_arrays(Dataset(), uniform_future(), 8, np.random.default_rng(0))


def test_replay_positions_respects_event_flags():
    # EAST, EAST (collision), NORTH (veto): only free steps move
    pos = replay_positions(
        (4, 4),
        actions=[2, 2, 0],
        collision=[False, True, False],
        disengagement=[False, False, True],
    )
    assert pos.tolist() == [[5, 4], [5, 4], [5, 4]]


# --- relabel strategies ---

def test_uniform_future_support():
    ds = Dataset().record(synthetic_trajectory(10))
    rng = np.random.default_rng(1)
    batch = sample_relabeled_arrays(ds, uniform_future(), 5000, rng)
    assert not batch.negative.any()
    assert (batch.delta >= 1).all()
    assert (batch.goal_t == batch.anchor_t + batch.delta).all()
    assert (batch.goal_t <= 9).all()
    # anchors cover every non-final step, deltas reach the trajectory end
    assert set(batch.anchor_t.tolist()) == set(range(9))
    assert batch.delta.max() == 9


def test_fixed_offset_one_step():
    ds = Dataset().record(synthetic_trajectory(6))
    batch = sample_relabeled_arrays(ds, fixed_offset(1), 200, np.random.default_rng(0))
    assert (batch.delta == 1).all()
    assert batch.anchor_t.max() == 4  # last step has no successor


def test_fixed_offset_trims_anchor_range():
    ds = Dataset().record(synthetic_trajectory(5))
    traj_idx, t_idx = eligible_anchors(ds, fixed_offset(3))
    assert t_idx.tolist() == [0, 1]
    with pytest.raises(ConfigError):
        fixed_offset(0).validate()


def test_trajectory_final_targets_last_step():
    ds = Dataset().record(synthetic_trajectory(7)).record(synthetic_trajectory(4))
    batch = sample_relabeled_arrays(ds, trajectory_final(), 500, np.random.default_rng(2))
    lengths = np.array([7, 4])
    assert (batch.goal_t == lengths[batch.anchor_traj] - 1).all()
    assert (batch.delta >= 1).all()


def test_negative_mix_fraction_and_sentinel():
    ds = walked_dataset(n_traj=5, steps=20)
    batch = sample_relabeled_arrays(ds, negative_mix(uniform_future(), 0.3), 20000, np.random.default_rng(3))
    frac = batch.negative.mean()
    assert abs(frac - 0.3) < 0.02
    # negatives: delta sentinel 0, goal drawn from a different trajectory
    assert (batch.delta[batch.negative] == 0).all()
    assert (batch.goal_traj[batch.negative] != batch.anchor_traj[batch.negative]).all()
    assert (batch.delta[~batch.negative] >= 1).all()


def test_negative_mix_needs_two_trajectories():
    ds = Dataset().record(synthetic_trajectory(6))
    with pytest.raises(ConfigError, match="2 trajectories"):
        sample_relabeled_arrays(ds, negative_mix(uniform_future(), 0.5), 8, np.random.default_rng(0))


def test_strategy_validation_errors():
    with pytest.raises(ConfigError):
        negative_mix(uniform_future(), 1.5).validate()
    with pytest.raises(ConfigError):
        negative_mix(negative_mix(uniform_future(), 0.1), 0.1).validate()
    from wayfarer.trajdata.relabel import RelabelStrategy

    with pytest.raises(ConfigError, match="unknown relabel mode"):
        RelabelStrategy("nearest_future").validate()
    ds = Dataset().record(synthetic_trajectory(4))
    with pytest.raises(ConfigError, match="batch_size"):
        sample_relabeled_arrays(ds, uniform_future(), 0, np.random.default_rng(0))


def test_positives_replay_to_goal_positions():
    ds = walked_dataset(n_traj=6, steps=40, seed=5)
    batch = sample_relabeled_arrays(ds, uniform_future(), 4000, np.random.default_rng(7))
    assert replay_reaches_goal(ds, batch).all()


def test_goal_observation_matches_indices():
    ds = walked_dataset(n_traj=2, steps=15, seed=9)
    for s in sample_relabeled(ds, uniform_future(), 50, np.random.default_rng(4)):
        traj = ds.trajectories[s.goal_traj_index]
        assert np.array_equal(s.o_g, traj.observations[s.goal_t_index])
        assert np.array_equal(s.o_t, ds.trajectories[s.traj_index].observations[s.t_index])
        assert s.a_t == int(ds.trajectories[s.traj_index].actions[s.t_index])


def test_sampling_seed_purity():
    ds = walked_dataset(n_traj=3, steps=25)
    strat = negative_mix(uniform_future(), 0.25)
    a = sample_relabeled_arrays(ds, strat, 64, np.random.default_rng(11))
    b = sample_relabeled_arrays(ds, strat, 64, np.random.default_rng(11))
    assert np.array_equal(a.obs, b.obs)
    assert np.array_equal(a.goal_t, b.goal_t)
    assert np.array_equal(a.negative, b.negative)


def test_sample_transitions_returns_next_observation():
    ds = walked_dataset(n_traj=2, steps=12)
    batch, next_obs = sample_transitions(ds, uniform_future(), 100, np.random.default_rng(6))
    for i in range(len(batch)):
        traj = ds.trajectories[batch.anchor_traj[i]]
        assert np.array_equal(next_obs[i], traj.observations[batch.anchor_t[i] + 1])


def test_event_windows_match_recorded_slices():
    ds = walked_dataset(n_traj=3, steps=20, seed=2)
    k_e = 4
    wins = sample_event_windows(ds, k_e, 200, np.random.default_rng(8))
    for row in range(5):
        traj = ds.trajectories[wins["anchor_traj"][row]]
        t = int(wins["anchor_t"][row])
        assert np.array_equal(wins["collision"][row], traj.collision[t : t + k_e])
        assert np.array_equal(wins["bumpiness"][row], traj.bumpiness[t : t + k_e])
        onehot = wins["action_onehot"][row].reshape(k_e, 4)
        assert np.array_equal(np.argmax(onehot, axis=1), traj.actions[t : t + k_e])
        assert onehot.sum() == k_e
    with pytest.raises(UsageError, match="event horizon"):
        sample_event_windows(ds, 999, 8, np.random.default_rng(0))


# --- persistence ---

def test_save_load_round_trip_is_exact(tmp_path):
    ds = walked_dataset(n_traj=3, steps=18, seed=13)
    p1 = tmp_path / "a.wfd"
    p2 = tmp_path / "b.wfd"
    save_dataset(ds, p1)
    loaded = load_dataset(p1)
    assert loaded == ds
    save_dataset(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_quantization_grid_is_lossless():
    # rendered channels are k/255; 65535 = 257*255 makes the grid exact
    vals = np.arange(256) / 255.0
    assert np.array_equal(dequantize_obs(quantize_obs(vals)), vals)
    with pytest.raises(ValueError):
        quantize_obs(np.array([1.2]))


def test_load_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.wfd"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataFormatError, match="magic"):
        load_dataset(p)


def test_load_truncation_names_offset(tmp_path):
    ds = walked_dataset(n_traj=2, steps=10)
    p = tmp_path / "t.wfd"
    save_dataset(ds, p)
    blob = p.read_bytes()
    cut = p.with_suffix(".cut")
    cut.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(DataFormatError, match="offset"):
        load_dataset(cut)


def test_load_rejects_trailing_bytes(tmp_path):
    ds = walked_dataset(n_traj=1, steps=5)
    p = tmp_path / "t.wfd"
    save_dataset(ds, p)
    p.write_bytes(p.read_bytes() + b"xx")
    with pytest.raises(DataFormatError, match="trailing"):
        load_dataset(p)


def test_jsonl_export_row_count(tmp_path):
    ds = walked_dataset(n_traj=2, steps=8)
    p = tmp_path / "d.jsonl"
    export_jsonl(ds, p)
    lines = p.read_text().strip().split("\n")
    assert len(lines) == 1 + sum(len(t) for t in ds.trajectories)
