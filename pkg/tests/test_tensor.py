import numpy as np
import pytest

from lowpsim import tensor as T
from lowpsim.errors import InvalidInputError, ShapeError
from lowpsim.tensor import Tensor

from .oracle import naive_matmul


def test_construction_checks():
    t = Tensor([[1, 2], [3, 4]])
    assert t.shape == (2, 2) and t.dtype == np.float32
    assert Tensor([1, 2, 3, 4], shape=(2, 2)).tolist() == [[1, 2], [3, 4]]
    with pytest.raises(ShapeError):
        Tensor([1, 2, 3], shape=(2, 2))
    with pytest.raises(InvalidInputError):
        Tensor([1.0, np.inf])
    with pytest.raises(InvalidInputError):
        Tensor([np.nan])
    with pytest.raises(ValueError):
        t.data[0, 0] = 5  # immutable


def test_matmul_examples():
    eye = Tensor(np.eye(2))
    m = Tensor([[1, 2], [3, 4]])
    assert T.matmul(eye, m).tolist() == [[1, 2], [3, 4]]
    assert T.matmul(Tensor([[1, 2]]), Tensor([[3], [4]])).tolist() == [[11]]
    with pytest.raises(ShapeError):
        T.matmul(m, Tensor([[1, 2, 3]]))


def test_matmul_matches_naive_loop_exactly():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.standard_normal((5, 7)).astype(np.float32)
        b = rng.standard_normal((7, 3)).astype(np.float32)
        out = T.matmul(Tensor(a), Tensor(b))
        assert np.array_equal(out.data, naive_matmul(a, b))


def test_matmul_deterministic_and_transpose_consistent():
    rng = np.random.default_rng(1)
    a = Tensor(rng.standard_normal((40, 30)))
    b = Tensor(rng.standard_normal((30, 20)))
    c1, c2 = T.matmul(a, b), T.matmul(a, b)
    assert c1.bit_equal(c2)
    ct = T.matmul(T.transpose(b), T.transpose(a))
    ulps = np.abs(c1.data.view(np.int32).astype(np.int64) - T.transpose(ct).data.view(np.int32))
    assert ulps.max() <= 4


def test_elementwise_examples():
    assert T.relu(Tensor([-1, 0, 2])).tolist() == [0, 0, 2]
    assert T.add(Tensor([1, 2]), Tensor([3, 4])).tolist() == [4, 6]
    assert T.sub(Tensor([1, 2]), Tensor([3, 4])).tolist() == [-2, -2]
    assert T.mul(Tensor([1, 2]), Tensor([3, 4])).tolist() == [3, 8]
    assert T.div(Tensor([1, 2]), Tensor([4, 4])).tolist() == [0.25, 0.5]
    assert T.scale(Tensor([1, 2]), 0.5).tolist() == [0.5, 1.0]
    assert T.relu_backward(Tensor([5, 6, 7]), Tensor([-1, 0, 1])).tolist() == [0, 0, 7]
    with pytest.raises(ShapeError):
        T.add(Tensor([1, 2]), Tensor([1, 2, 3]))
    with pytest.raises(InvalidInputError):
        T.div(Tensor([1, 2]), Tensor([1, 0]))


def test_softmax_rows_and_bias():
    s = T.softmax_rows(Tensor([[0, 0], [1000, 0]]))
    assert np.allclose(s.data, [[0.5, 0.5], [1, 0]])
    assert T.add_bias(Tensor([[1, 2], [3, 4]]), Tensor([10, 20])).tolist() == [[11, 22], [13, 24]]
    assert T.sum_rows(Tensor([[1, 2], [3, 4]])).tolist() == [4, 6]


def test_reduce_max_abs():
    assert T.reduce_max_abs(Tensor([-3, 1, 2])).tolist() == [3]
    assert T.reduce_max_abs(Tensor([[1, -4], [2, 3]]), 0).tolist() == [4, 3]
    assert T.reduce_max_abs(Tensor([[1, -4], [2, 3]]), 1).tolist() == [2, 4]
    with pytest.raises(ShapeError):
        T.reduce_max_abs(Tensor([1, 2]), 1)


def test_reduce_max_abs_matches_loop():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 4, 5)).astype(np.float32)
    for d in range(3):
        got = T.reduce_max_abs(Tensor(x), d).tolist()
        want = [0.0] * x.shape[d]
        for idx in np.ndindex(x.shape):
            want[idx[d]] = max(want[idx[d]], abs(float(x[idx])))
        assert got == want


def test_round_ops():
    t = Tensor([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 0.3, -0.7], dtype=np.float64)
    assert T.round_nearest(t, "nearest_even").tolist() == [-2, -2, 0, 0, 2, 2, 0, -1]
    assert T.round_nearest(t, "nearest_away").tolist() == [-3, -2, -1, 1, 2, 3, 0, -1]
    assert T.round_nearest(t, "nearest_zero").tolist() == [-2, -1, 0, 0, 1, 2, 0, -1]
    r = T.round_nearest(Tensor([-0.2], dtype=np.float64), "nearest_even")
    assert np.signbit(r.data).sum() == 0


def test_expand_along_and_wrap():
    v = Tensor([1, 2], dtype=np.float64)
    assert T.expand_along(v, (2, 3), 0).tolist() == [[1, 1, 1], [2, 2, 2]]
    assert T.expand_along(Tensor([7]), (2, 2), None).tolist() == [[7, 7], [7, 7]]
    assert T.wrap(Tensor([4, -5, 3], dtype=np.float64), -4, 8).tolist() == [-4, 3, 3]


def test_pass_counter():
    with T.count_passes() as c:
        T.add(Tensor([1]), Tensor([2]))
        T.relu(Tensor([1]))
    assert c.passes == 2 and c.ops == ["add", "relu"]


def test_validation_toggle():
    big = Tensor([3e38])
    with pytest.raises(InvalidInputError):
        T.scale(big, 10.0)
    with T.validation(False), np.errstate(over="ignore"):
        assert np.isinf(T.scale(big, 10.0).data).all()
