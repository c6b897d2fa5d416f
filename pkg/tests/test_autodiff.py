"""Tests for the reverse-mode tensor engine, Adam and checkpoints"""
import json

import numpy as np
import pytest

from bargebench.autodiff import ops
from bargebench.autodiff.checkpoint import checkpoint_digest, load_checkpoint, save_checkpoint
from bargebench.autodiff.gradcheck import grad_check
from bargebench.autodiff.optim import Adam, AdamState, adam_step
from bargebench.autodiff.tensor import DiffTensor, parameter
from bargebench.errors import ConfigError, NumericError, ShapeError, StorageError

TOL = 1e-4


def _t(rng, *shape):
    return DiffTensor(rng.normal(0.0, 0.5, size=shape))


def _random_projection(seed=0):
    """Fixed random linear functional: sum(out * c), one c per output shape."""
    cache = {}

    def f(t):
        if t.shape not in cache:
            cache[t.shape] = np.random.default_rng(seed).normal(size=t.shape)
        return ops.sum_(ops.mul(t, DiffTensor(cache[t.shape])))

    return f


class TestGradients:
    """Test backward passes against central differences"""

    @pytest.fixture(params=[0, 1, 2])
    def seed(self, request):
        """Provide each gradient-check seed"""
        return request.param

    @pytest.fixture
    def rng(self, seed):
        """Provide a generator for the current seed"""
        return np.random.default_rng(seed)

    def test_elementwise(self, rng):
        """Test add, mul, scale and the activations"""
        a, b = _t(rng, 3, 4), _t(rng, 4)
        assert grad_check(lambda x, y: ops.sum_(ops.mul(ops.add(x, y), x)), [a, b]) < TOL
        assert grad_check(lambda x: ops.sum_(ops.tanh(ops.scale(x, 0.5, 1.0))), a) < TOL
        assert grad_check(lambda x: ops.sum_(ops.mul(ops.sigmoid(x), x)), a) < TOL
        assert grad_check(lambda x: ops.sum_(ops.mul(ops.relu(x), x)), a) < TOL

    def test_matmul_batched(self, rng, seed):
        """Test batched matmul with a shared right operand"""
        a, w = _t(rng, 2, 3, 4), _t(rng, 4, 5)
        project = _random_projection(seed)
        assert grad_check(lambda x, y: project(ops.matmul(x, y)), [a, w]) < TOL

    def test_softmax_with_mask(self, rng, seed):
        """Test masked softmax gradients and zero mass above the diagonal"""
        x = _t(rng, 2, 4, 4)
        mask = np.where(np.tri(4, dtype=bool), 0.0, ops.MASK_VALUE)
        project = _random_projection(seed)
        assert grad_check(lambda v: project(ops.softmax(v, mask=mask)), x) < TOL
        p = ops.softmax(x, mask=mask).value
        upper = np.triu_indices(4, 1)
        assert np.all(p[:, upper[0], upper[1]] == 0.0)
        np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)

    def test_shape_ops(self, rng, seed):
        """Test concat, slice, transpose, reshape and permute"""
        a, b = _t(rng, 2, 3, 4), _t(rng, 2, 2, 4)
        project = _random_projection(seed)

        def f(x, y):
            joint = ops.concat([x, y], axis=1)
            part = ops.slice_(joint, 1, 5, axis=1)
            moved = ops.permute(ops.transpose(part), (2, 0, 1))
            return project(ops.reshape(moved, (4, 8)))

        assert grad_check(f, [a, b]) < TOL

    def test_take_rows(self, rng, seed):
        """Test embedding lookup accumulates repeated ids"""
        table = _t(rng, 5, 3)
        ids = np.array([[0, 2, 2], [4, 0, 1]])
        project = _random_projection(seed)
        assert grad_check(lambda t: project(ops.take_rows(t, ids)), table) < TOL
        with pytest.raises(ShapeError):
            ops.take_rows(table, [5])

    def test_mean(self, rng):
        """Test mean over an axis and overall"""
        x = _t(rng, 3, 4)
        assert grad_check(lambda v: ops.mean(ops.mul(ops.mean(v, axis=0), ops.mean(v, axis=0))), x) < TOL

    @pytest.mark.parametrize("causal", [True, False])
    def test_conv1d_full(self, rng, seed, causal):
        """Test full 1-D convolution with bias"""
        x, w, b = _t(rng, 2, 6, 3), _t(rng, 3, 3, 2), _t(rng, 2)
        project = _random_projection(seed)
        assert grad_check(lambda a, k, c: project(ops.conv1d(a, k, c, causal=causal)), [x, w, b]) < TOL

    def test_conv1d_depthwise(self, rng, seed):
        """Test depthwise causal convolution"""
        x, w = _t(rng, 2, 7, 3), _t(rng, 3, 4)
        project = _random_projection(seed)
        assert grad_check(lambda a, k: project(ops.conv1d(a, k, causal=True, depthwise=True)), [x, w]) < TOL

    def test_conv1d_causality(self, rng):
        """Test a causal output never depends on later inputs"""
        x = rng.normal(size=(1, 8, 2))
        w = DiffTensor(rng.normal(size=(2, 3)))
        y = ops.conv1d(DiffTensor(x), w, depthwise=True).value
        x2 = x.copy()
        x2[:, 5:] += 10.0
        y2 = ops.conv1d(DiffTensor(x2), w, depthwise=True).value
        np.testing.assert_array_equal(y[:, :5], y2[:, :5])

    def test_conv2d(self, rng, seed):
        """Test 2-D convolution causal in time"""
        x, w, b = _t(rng, 2, 2, 5, 4), _t(rng, 3, 2, 3, 3), _t(rng, 3)
        project = _random_projection(seed)
        assert grad_check(lambda a, k, c: project(ops.conv2d(a, k, c)), [x, w, b]) < TOL
        assert ops.conv2d(x, w, b).shape == (2, 3, 5, 4)

    def test_transposed_conv1d(self, rng, seed):
        """Test upsampling doubles the time axis when K equals the stride"""
        x, w, b = _t(rng, 2, 4, 3), _t(rng, 2, 3, 5), _t(rng, 5)
        project = _random_projection(seed)
        assert ops.transposed_conv1d(x, w, b, stride=2).shape == (2, 8, 5)
        assert grad_check(lambda a, k, c: project(ops.transposed_conv1d(a, k, c, stride=2)), [x, w, b]) < TOL

    def test_gru_cell(self, rng, seed):
        """Test one GRU step"""
        x, h = _t(rng, 2, 3), _t(rng, 2, 4)
        w_ih, w_hh = _t(rng, 3, 12), _t(rng, 4, 12)
        b_ih, b_hh = _t(rng, 12), _t(rng, 12)
        project = _random_projection(seed)
        assert grad_check(lambda *a: project(ops.gru_cell(*a)), [x, h, w_ih, w_hh, b_ih, b_hh]) < TOL

    def test_bce(self, rng):
        """Test cross-entropy gradient and its value at p = 0.5"""
        logits = _t(rng, 6)
        y = np.array([1, 0, 1, 1, 0, 0], dtype=float)
        assert grad_check(lambda v: ops.bce_loss(ops.sigmoid(v), y), logits) < TOL
        half = ops.bce_loss(DiffTensor(np.full(4, 0.5)), np.array([1, 0, 1, 0]))
        assert half.item() == pytest.approx(np.log(2.0))


class TestTensor:
    """Test graph bookkeeping"""

    def test_shared_input_accumulates(self):
        """Test a tensor used twice receives both gradients"""
        x = parameter(np.array([3.0]), "x")
        ops.sum_(ops.mul(x, x)).backward()
        assert x.grad.tolist() == [6.0]

    def test_non_finite_forward(self):
        """Test non-finite results raise NumericError"""
        x = parameter(np.array([1e308]), "x")
        with pytest.raises(NumericError):
            ops.scale(x, 10.0)

    def test_shape_mismatch_names_operands(self):
        """Test incompatible operands raise ShapeError"""
        with pytest.raises(ShapeError, match="inner dims"):
            ops.matmul(DiffTensor(np.zeros((2, 3))), DiffTensor(np.zeros((4, 2))))

    def test_constants_get_no_grad(self):
        """Test only leaves that require grad accumulate"""
        w = parameter(np.ones(3), "w")
        c = DiffTensor(np.ones(3))
        ops.sum_(ops.mul(w, c)).backward()
        assert c._grad is None
        assert w.grad.tolist() == [1.0, 1.0, 1.0]


class TestAdam:
    """Test the optimizer"""

    def test_first_step_moves_by_lr(self):
        """Test bias correction makes the first step lr * sign(g)"""
        p = {"w": np.array([1.0, -1.0])}
        adam_step(p, {"w": np.array([0.3, -5.0])}, AdamState(lr=0.1))
        np.testing.assert_allclose(p["w"], [0.9, -0.9], atol=1e-6)

    def test_non_finite_gradient_leaves_params(self):
        """Test a NaN gradient aborts the whole step"""
        p = {"a": np.array([1.0]), "b": np.array([2.0])}
        state = AdamState()
        with pytest.raises(NumericError) as e:
            adam_step(p, {"a": np.array([0.1]), "b": np.array([np.nan])}, state)
        assert e.value.name == "b"
        assert p["a"].tolist() == [1.0] and state.step == 0

    def test_minimizes_quadratic(self):
        """Test Adam drives a quadratic towards its minimum"""
        w = parameter(np.array([3.0, -2.0]), "w")
        opt = Adam({"w": w}, lr=0.1)
        for _ in range(300):
            ops.sum_(ops.mul(w, w)).backward()
            opt.step()
        assert np.all(np.abs(w.value) < 0.1)
        assert w._grad is None

    def test_rejects_bad_learning_rate(self):
        """Test the learning rate must be positive"""
        with pytest.raises(ConfigError):
            AdamState(lr=0.0)


class TestCheckpoint:
    """Test checkpoint files"""

    def test_round_trip_exact(self, temp_dir, rng):
        """Test parameters and metadata reload bit-identically"""
        params = {"a.weight": rng.normal(size=(3, 2)), "b": rng.normal(size=(4,))}
        path = save_checkpoint(temp_dir / "ck.json", params, {"epoch": 2})
        arrays, meta = load_checkpoint(path)
        assert meta == {"epoch": 2}
        for name in params:
            np.testing.assert_array_equal(arrays[name], params[name])

    def test_digest_stable(self, temp_dir):
        """Test identical parameters give identical digests"""
        a = save_checkpoint(temp_dir / "a.json", {"w": np.arange(3.0)})
        b = save_checkpoint(temp_dir / "b.json", {"w": np.arange(3.0)})
        assert checkpoint_digest(a) == checkpoint_digest(b)

    def test_version_checked(self, temp_dir):
        """Test an unknown version is refused"""
        path = save_checkpoint(temp_dir / "ck.json", {"w": np.zeros(2)})
        body = json.loads(path.read_text())
        body["version"] = 99
        path.write_text(json.dumps(body))
        with pytest.raises(ConfigError, match="version"):
            load_checkpoint(path)

    def test_missing(self, temp_dir):
        """Test a missing checkpoint is a storage error"""
        with pytest.raises(StorageError):
            load_checkpoint(temp_dir / "nope.json")
