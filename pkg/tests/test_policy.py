import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cooplab.policy import (
    NetSpec,
    PolicyOutput,
    PolicyParams,
    ShapeMismatch,
    backward,
    entropy,
    forward,
    forward_batch,
    init_params,
    load_params,
    sample_action,
    save_params,
)

TINY = NetSpec(in_channels=2, height=3, width=3, conv_layers=1, conv_filters=2,
               hidden_layers=1, hidden_size=8)


def tiny_params(seed=0):
    return init_params(TINY, seed)


def rand_obs(rng, spec=TINY):
    return rng.standard_normal(spec.obs_shape)


def test_manifest_total_matches_data_length():
    p = tiny_params()
    assert p.data.shape == (TINY.num_params(),)
    assert TINY.num_params() == 253


def test_zero_params_give_uniform_policy_and_zero_value():
    params = PolicyParams(spec=TINY, data=np.zeros(TINY.num_params()))
    out = forward(params, np.random.default_rng(0).standard_normal(TINY.obs_shape))
    np.testing.assert_allclose(out.action_probs, 1 / 6, atol=1e-12)
    assert abs(out.action_probs.sum() - 1.0) < 1e-9
    assert out.value == 0.0


def test_forward_deterministic():
    rng = np.random.default_rng(1)
    params, obs = tiny_params(3), rand_obs(rng)
    a = forward(params, obs)
    b = forward(params, obs)
    assert np.array_equal(a.action_probs, b.action_probs)
    assert a.value == b.value


def test_policy_bias_bump_raises_action_probability():
    params = tiny_params(5)
    obs = rand_obs(np.random.default_rng(2))
    before = forward(params, obs)
    names = dict.fromkeys(n for n, _ in TINY.manifest())
    offset = 0
    for name, shape in TINY.manifest():
        if name == "policy.b":
            break
        offset += int(np.prod(shape))
    data = params.data.copy()
    data[offset + 2] += 0.5  # bias of action 2
    after = forward(PolicyParams(spec=TINY, data=data), obs)
    assert after.action_probs[2] > before.action_probs[2]


def test_shape_mismatch_rejected():
    params = tiny_params()
    with pytest.raises(ShapeMismatch):
        forward(params, np.zeros((2, 4, 3)))
    with pytest.raises(ShapeMismatch):
        PolicyParams(spec=TINY, data=np.zeros(10))


def test_sample_degenerate_categorical():
    probs = np.zeros(6)
    probs[0] = 1.0
    out = PolicyOutput(action_probs=probs, log_probs=np.log(np.maximum(probs, 1e-8)),
                       value=0.0)
    rng = np.random.default_rng(0)
    assert all(sample_action(out, rng)[0] == 0 for _ in range(200))


def test_sample_uniform_frequencies():
    probs = np.full(6, 1 / 6)
    out = PolicyOutput(action_probs=probs, log_probs=np.log(probs), value=0.0)
    rng = np.random.default_rng(42)
    draws = 60_000
    counts = np.zeros(6)
    for _ in range(draws):
        a, logp = sample_action(out, rng)
        counts[a] += 1
        assert logp == pytest.approx(math.log(1 / 6))
    freqs = counts / draws
    assert np.all(np.abs(freqs - 1 / 6) < 0.01)
    # chi-square sanity: 5 dof, 0.999 quantile ~ 20.5
    chi2 = ((counts - draws / 6) ** 2 / (draws / 6)).sum()
    assert chi2 < 20.5


def test_sample_seeded_reproducible():
    params = tiny_params(7)
    obs = rand_obs(np.random.default_rng(3))
    out = forward(params, obs)
    seq_a = [sample_action(out, np.random.default_rng(99))[0] for _ in range(10)]
    rng = np.random.default_rng(99)
    seq_b = [sample_action(out, rng)[0] for _ in range(10)]
    assert seq_a[0] == seq_b[0]
    rng1, rng2 = np.random.default_rng(5), np.random.default_rng(5)
    assert [sample_action(out, rng1)[0] for _ in range(50)] == [
        sample_action(out, rng2)[0] for _ in range(50)
    ]


def _output_from_probs(probs):
    probs = np.asarray(probs, dtype=float)
    return PolicyOutput(action_probs=probs, log_probs=np.log(np.maximum(probs, 1e-8)),
                        value=0.0)


def test_entropy_analytic_values():
    assert entropy(_output_from_probs(np.full(6, 1 / 6))) == pytest.approx(math.log(6), abs=1e-12)
    assert entropy(_output_from_probs([1, 0, 0, 0, 0, 0])) == pytest.approx(0.0, abs=1e-7)
    assert entropy(_output_from_probs([0.5, 0.5, 0, 0, 0, 0])) == pytest.approx(
        math.log(2), abs=1e-7
    )


def test_backward_zero_loss_grads():
    params = tiny_params(11)
    obs = rand_obs(np.random.default_rng(4))
    g = backward(params, obs, (np.zeros(6), 0.0))
    assert np.all(g == 0.0)


def test_value_head_gradient_does_not_touch_policy_head():
    params = tiny_params(13)
    obs = rand_obs(np.random.default_rng(6))
    g = backward(params, obs, (np.zeros(6), 1.0))
    views = PolicyParams(spec=TINY, data=g).views()
    assert np.all(views["policy.w"] == 0.0)
    assert np.all(views["policy.b"] == 0.0)
    assert np.any(views["value.w"] != 0.0)


def finite_difference_grad(params, obs, loss_grads, h=1e-5):
    dprobs, dvalue = loss_grads

    def loss(data):
        out = forward(PolicyParams(spec=params.spec, data=data), obs)
        return float(np.dot(dprobs, out.action_probs) + dvalue * out.value)

    grad = np.empty_like(params.data)
    for i in range(params.data.shape[0]):
        up = params.data.copy()
        up[i] += h
        down = params.data.copy()
        down[i] -= h
        grad[i] = (loss(up) - loss(down)) / (2 * h)
    return grad


def max_rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = init_params(TINY, seed)
    obs = rand_obs(rng)
    loss_grads = (rng.standard_normal(6), float(rng.standard_normal()))
    analytic = backward(params, obs, loss_grads)
    numeric = finite_difference_grad(params, obs, loss_grads)
    assert max_rel_error(analytic, numeric) < 1e-4


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.1, 5.0))
def test_softmax_sums_to_one_and_entropy_bounds(seed, scale):
    rng = np.random.default_rng(seed)
    params = PolicyParams(spec=TINY, data=rng.standard_normal(TINY.num_params()) * scale)
    out = forward(params, rand_obs(rng))
    assert abs(out.action_probs.sum() - 1.0) < 1e-9
    assert np.all(out.action_probs > 0)
    h = entropy(out)
    assert -1e-12 <= h <= math.log(6) + 1e-12


def test_checkpoint_round_trip_bit_identical(tmp_path):
    params = init_params(NetSpec(in_channels=29, height=4, width=5), seed=123)
    path = tmp_path / "agent" / "best.ckpt"
    save_params(params, path)
    loaded = load_params(path)
    assert loaded.spec == params.spec
    assert np.array_equal(loaded.data, params.data)
    obs = np.random.default_rng(0).standard_normal(params.spec.obs_shape)
    a, b = forward(params, obs), forward(loaded, obs)
    assert np.array_equal(a.action_probs, b.action_probs)
    assert a.value == b.value


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValueError, match="not a policy checkpoint"):
        load_params(path)


def test_batched_forward_matches_single():
    params = tiny_params(17)
    rng = np.random.default_rng(8)
    batch = rng.standard_normal((5, *TINY.obs_shape))
    probs, logps, values, _ = forward_batch(params, batch)
    for i in range(5):
        out = forward(params, batch[i])
        # batch size may change the BLAS kernel, so compare to float tolerance
        np.testing.assert_allclose(out.action_probs, probs[i], rtol=1e-12, atol=0)
        assert out.value == pytest.approx(values[i], rel=1e-12)
