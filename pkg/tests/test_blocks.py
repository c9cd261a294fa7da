import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsqstab.blocks import (BlockStructure, Detuning, GainMatrix, PlantMatrix, SquaredSelection,
                            assemble_AEK, effective_gains, enumerate_full_selections,
                            enumerate_reduced_selections, extract_squared, one_hot_detuning)
from nsqstab.errors import DimensionError, EnumerationCapError

structures = st.lists(st.integers(1, 3), min_size=1, max_size=4).map(lambda p: BlockStructure(tuple(p)))


def dense_AEK(A, E, K):
    """Oracle: plain dense product A @ diag(eps) @ K."""
    return A.data @ E.to_dense() @ K.to_dense()


class TestStructure:
    def test_basic(self):
        s = BlockStructure((2, 3, 2))
        assert (s.m, s.n, s.n_full) == (3, 7, 12)
        assert s.offsets == (0, 2, 5)
        assert s.column(1, 2) == 4

    @pytest.mark.parametrize("p", [(), (0,), (2, -1)])
    def test_invalid(self, p):
        with pytest.raises(DimensionError):
            BlockStructure(p)

    def test_plant_shape_checked(self):
        with pytest.raises(DimensionError):
            PlantMatrix(BlockStructure((2, 1)), np.zeros((2, 2)))

    def test_plant_is_read_only(self, worked_plant):
        with pytest.raises(ValueError):
            worked_plant.data[0, 0] = 7.0

    def test_negative_gain_rejected(self):
        with pytest.raises(DimensionError):
            GainMatrix(BlockStructure((1, 1)), [1, -1])


class TestAssemble:
    def test_square_identity_weights(self, rng):
        s = BlockStructure((1, 1, 1))
        A = PlantMatrix(s, rng.normal(size=(3, 3)))
        np.testing.assert_array_equal(assemble_AEK(A, Detuning.ones(s), GainMatrix.ones(s)), A.data)

    def test_worked_example(self, worked_plant):
        s = worked_plant.structure
        got = assemble_AEK(worked_plant, Detuning(s, [[1, 0], [1]]), GainMatrix.ones(s))
        np.testing.assert_array_equal(got, [[1, 3], [4, 6]])

    def test_zero_detuning(self, worked_plant):
        s = worked_plant.structure
        assert not assemble_AEK(worked_plant, Detuning(s, 0.0), GainMatrix.ones(s)).any()

    def test_structure_mismatch(self, worked_plant):
        with pytest.raises(DimensionError):
            assemble_AEK(worked_plant, Detuning.ones(BlockStructure((1, 2))),
                         GainMatrix.ones(worked_plant.structure))

    @settings(max_examples=60)
    @given(structures, st.integers(0, 2**32 - 1))
    def test_matches_dense_product_and_linear(self, s, seed):
        rng = np.random.default_rng(seed)
        A = PlantMatrix(s, rng.normal(size=(s.m, s.n)))
        E = Detuning(s, rng.uniform(0, 2, size=s.n))
        K = GainMatrix(s, rng.uniform(0, 2, size=s.n))
        M = assemble_AEK(A, E, K)
        np.testing.assert_allclose(M, dense_AEK(A, E, K), atol=1e-12)
        np.testing.assert_allclose(assemble_AEK(A, Detuning(s, 2 * E.values), K), 2 * M, atol=1e-12)

    @settings(max_examples=40)
    @given(structures, st.integers(0, 2**32 - 1))
    def test_one_hot_detuning_gives_squared_matrix(self, s, seed):
        rng = np.random.default_rng(seed)
        A = PlantMatrix(s, rng.normal(size=(s.m, s.n)))
        K = GainMatrix.ones(s)
        for sel in enumerate_full_selections(s):
            np.testing.assert_array_equal(assemble_AEK(A, one_hot_detuning(s, sel), K),
                                          extract_squared(A, sel))


class TestEffectiveGains:
    def test_all_zero(self, worked_plant):
        s = worked_plant.structure
        eg = effective_gains(Detuning(s, 0.0), GainMatrix.ones(s))
        assert eg.in_service == (False, False)

    def test_products(self):
        s = BlockStructure((2, 1))
        eg = effective_gains(Detuning(s, [[0.5, 0], [1]]), GainMatrix(s, [[1, 2], [3]]))
        np.testing.assert_array_equal(eg.values, [0.5, 0, 3])
        assert eg.in_service == (True, True)

    def test_out_of_service(self):
        s = BlockStructure((1, 1))
        eg = effective_gains(Detuning(s, [0, 1]), GainMatrix.ones(s))
        assert eg.in_service == (False, True)
        assert eg.active_groups == (1,)


class TestEnumeration:
    def test_counts(self):
        assert len(enumerate_full_selections(BlockStructure((2, 3, 2)))) == 12
        assert len(enumerate_full_selections(BlockStructure((1, 1, 1)))) == 1

    def test_lexicographic(self):
        sels = enumerate_full_selections(BlockStructure((2, 2)))
        assert [s.choice for s in sels] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert all(s.active == (0, 1) for s in sels)

    def test_reduced(self):
        sels = enumerate_reduced_selections(BlockStructure((2, 1)), 1)
        assert [(s.active, s.choice) for s in sels] == [((0,), (0,)), ((0,), (1,)), ((1,), (0,))]
        s = BlockStructure((2, 3))
        assert enumerate_reduced_selections(s, 2) == enumerate_full_selections(s)
        assert len(enumerate_reduced_selections(BlockStructure((3,)), 1)) == 3

    @given(structures)
    def test_reduced_count_formula(self, s):
        for k in range(1, s.m + 1):
            want = sum(math.prod(s.p[i] for i in S) for S in itertools.combinations(range(s.m), k))
            assert len(enumerate_reduced_selections(s, k)) == want
        assert len(enumerate_full_selections(s)) == math.prod(s.p)

    def test_repeatable(self):
        s = BlockStructure((3, 2, 2))
        assert enumerate_full_selections(s) == enumerate_full_selections(s)

    def test_cap(self, monkeypatch):
        s = BlockStructure((3, 3, 3))
        with pytest.raises(EnumerationCapError):
            enumerate_full_selections(s, cap=26)
        monkeypatch.setenv("NSQSTAB_CAP", "10")
        with pytest.raises(EnumerationCapError):
            enumerate_full_selections(s)
        monkeypatch.setenv("NSQSTAB_CAP", "27")
        assert len(enumerate_full_selections(s)) == 27

    def test_bad_k(self):
        with pytest.raises(ValueError):
            enumerate_reduced_selections(BlockStructure((2, 1)), 3)


class TestExtract:
    def test_worked_example(self, worked_plant):
        np.testing.assert_array_equal(extract_squared(worked_plant, SquaredSelection.full((1, 0))),
                                      [[2, 3], [5, 6]])
        np.testing.assert_array_equal(extract_squared(worked_plant, SquaredSelection((0,), (0,))), [[1]])

    def test_reduced_drops_matching_row(self, worked_plant):
        np.testing.assert_array_equal(extract_squared(worked_plant, SquaredSelection((1,), (0,))), [[6]])

    def test_square_identity(self, rng):
        s = BlockStructure((1, 1, 1))
        A = PlantMatrix(s, rng.normal(size=(3, 3)))
        np.testing.assert_array_equal(extract_squared(A, SquaredSelection.full((0, 0, 0))), A.data)

    @pytest.mark.parametrize("sel", [SquaredSelection((0,), (2,)), SquaredSelection((2,), (0,))])
    def test_invalid(self, worked_plant, sel):
        with pytest.raises(IndexError):
            extract_squared(worked_plant, sel)
