import itertools

import numpy as np
import pytest

from snnkit.tensor import Shape, Tensor, shape_of


class TestShape:
    def test_numel(self):
        assert Shape((2, 3)).numel == 6
        assert Shape((1,)).numel == 1
        assert Shape((4, 1, 2, 3)).numel == 24

    def test_strides_row_major(self):
        assert Shape((2, 3)).strides == (3, 1)
        assert Shape((2, 2, 2)).strides == (4, 2, 1)
        assert Shape((5,)).strides == (1,)

    @pytest.mark.parametrize("dims", [(), (0,), (2, 0, 3), (1, 1, 1, 1, 1)])
    def test_invalid_dims_rejected(self, dims):
        with pytest.raises(ValueError):
            Shape(dims)

    def test_offset_examples(self):
        assert Shape((2, 3)).offset((1, 2)) == 5
        assert Shape((4,)).offset((0,)) == 0
        assert Shape((2, 2, 2)).offset((1, 0, 1)) == 5

    def test_offset_matches_nested_loop_enumeration(self):
        # flat order must equal nested-loop order over all 8 indices
        shape = Shape((2, 2, 2))
        expected = 0
        for i, j, k in itertools.product(range(2), range(2), range(2)):
            assert shape.offset((i, j, k)) == expected
            expected += 1

    def test_offset_out_of_bounds(self):
        with pytest.raises(IndexError):
            Shape((2, 3)).offset((2, 0))
        with pytest.raises(IndexError):
            Shape((2, 3)).offset((0, 3))
        with pytest.raises(IndexError):
            Shape((2, 3)).offset((0,))


class TestTensor:
    def test_zeros(self):
        t = Tensor.zeros(shape_of(2, 2))
        assert t.nd.tolist() == [[0.0, 0.0], [0.0, 0.0]]
        assert Tensor.zeros(shape_of(1)).data.tolist() == [0.0]
        assert Tensor.zeros(shape_of(3, 1, 1)).data.tolist() == [0.0, 0.0, 0.0]

    def test_data_length_checked(self):
        with pytest.raises(ValueError):
            Tensor(shape_of(2, 2), np.zeros(3, dtype=np.float32))

    def test_storage_is_float32(self):
        t = Tensor.from_array(np.array([1, 2, 3], dtype=np.int64))
        assert t.data.dtype == np.float32

    def test_get_set_round_trip(self):
        rng = np.random.default_rng(3)
        for dims in [(4,), (2, 3), (3, 2, 2), (2, 2, 2, 2)]:
            t = Tensor.zeros(Shape(dims))
            for _ in range(20):
                index = tuple(int(rng.integers(d)) for d in dims)
                value = float(np.float32(rng.normal()))
                t.set(index, value)
                assert t.get(*index) == value

    def test_flat_order_matches_nested_loops(self):
        for dims in [(2, 3), (4, 4, 4), (2, 2, 2, 2)]:
            shape = Shape(dims)
            assert shape.numel <= 64
            t = Tensor.from_array(np.arange(shape.numel, dtype=np.float32).reshape(dims))
            flat = 0
            for index in itertools.product(*(range(d) for d in dims)):
                assert t.get(*index) == float(flat)
                flat += 1

    def test_json_round_trip(self):
        t = Tensor.from_array(np.array([[0.1, -2.5], [3.0, 1e-7]], dtype=np.float32))
        again = Tensor.from_json_obj(t.to_json_obj())
        assert again.shape == t.shape
        assert np.array_equal(again.data, t.data)

    def test_copy_is_independent(self):
        t = Tensor.zeros(shape_of(2))
        c = t.copy()
        c.set((0,), 5.0)
        assert t.get(0) == 0.0
