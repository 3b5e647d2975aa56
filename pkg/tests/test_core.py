import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import (
    down_shift_matrix,
    real_shift_matrix,
    second_difference_matrix,
    upwind_matrix,
)
from transport_reversal.core import (
    GridField,
    RealShift,
    SnapshotMatrix,
    discrete_laplacian,
    is_constant,
    second_difference,
    shift_fractional,
    shift_integer,
    shift_real,
    shift_real_adjoint,
    transport_columns,
    transport_pivot,
    wrap_shift,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = st.integers(3, 40).flatmap(lambda n: arrays(float, n, elements=finite))
fractions = st.floats(0.0, 1.0)


def e(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


class TestTypes:
    def test_grid_field_spacing(self):
        g = GridField(np.arange(7.0))
        assert g.n_cells == 7
        assert abs(g.spacing * g.n_cells - 1.0) < 1e-14
        assert np.allclose(g.centers, (np.arange(7) + 0.5) / 7)

    @pytest.mark.parametrize("bad", [[], [[1.0, 2.0]], [1.0, np.nan], [np.inf]])
    def test_grid_field_rejects(self, bad):
        with pytest.raises(ValueError):
            GridField(np.array(bad, dtype=float))

    def test_grid_field_immutable(self):
        g = GridField([1.0, 2.0])
        with pytest.raises(ValueError):
            g.values[0] = 5.0

    @given(st.floats(-1e6, 1e6, allow_nan=False))
    def test_real_shift_parts(self, x):
        r = RealShift(x)
        assert abs(r.integral_part + r.fractional_part - x) <= 1e-14 * max(1.0, abs(x))
        assert 0.0 <= r.fractional_part < 1.0

    def test_real_shift_negative(self):
        r = RealShift(-1.5)
        assert r.integral_part == -2
        assert r.fractional_part == 0.5

    def test_snapshot_matrix_validation(self):
        with pytest.raises(ValueError):
            SnapshotMatrix(np.zeros((3, 2)), times=[0.0, 0.0])
        with pytest.raises(ValueError):
            SnapshotMatrix(np.zeros(3))
        s = SnapshotMatrix(np.ones((3, 2)))
        assert s.shape == (3, 2)
        assert np.array_equal(s.times, [0.0, 1.0])
        assert isinstance(s.column(1), GridField)

    def test_wrap_shift(self):
        assert wrap_shift(50, 100) == 50
        assert wrap_shift(51, 100) == -49
        assert wrap_shift(-50, 100) == 50
        assert wrap_shift(3, 5) == -2
        assert np.array_equal(wrap_shift(np.array([0, 2, 3, 4]), 5), [0, 2, -2, -1])

    def test_is_constant(self):
        assert is_constant(np.full(5, 3.0))
        assert is_constant(np.zeros(4))
        assert not is_constant([1.0, 1.0, 1.0 + 1e-6])


class TestShiftInteger:
    def test_unit_vector(self):
        assert np.array_equal(shift_integer(e(0, 4), 1), e(1, 4))

    def test_zero_shift(self, rng):
        f = rng.normal(size=9)
        assert np.array_equal(shift_integer(f, 0), f)

    def test_negative_shift(self):
        assert np.array_equal(shift_integer([1.0, 2.0, 3.0, 4.0], -1), [2.0, 3.0, 4.0, 1.0])

    @given(vectors, st.integers(-100, 100))
    def test_matches_dense_power(self, f, s):
        n = f.size
        K = np.linalg.matrix_power(down_shift_matrix(n), s % n)
        assert np.array_equal(shift_integer(f, s), K @ f)

    @given(vectors, st.integers(-100, 100))
    def test_modulo_n(self, f, s):
        assert np.array_equal(shift_integer(f, s), shift_integer(f, s + f.size))


class TestShiftFractional:
    def test_endpoints(self, rng):
        f = rng.normal(size=6)
        assert np.array_equal(shift_fractional(f, 0.0), f)
        assert np.array_equal(shift_fractional(f, 1.0), shift_integer(f, 1))

    def test_hand_value(self):
        assert np.allclose(shift_fractional(e(0, 4), 0.25), [0.75, 0.25, 0.0, 0.0], atol=0)

    @pytest.mark.parametrize("nu", [-0.01, 1.01, 2.0])
    def test_rejects_out_of_range(self, nu):
        with pytest.raises(ValueError):
            shift_fractional(np.ones(3), nu)

    @given(vectors, fractions)
    def test_matches_dense(self, f, nu):
        assert np.allclose(shift_fractional(f, nu), upwind_matrix(f.size, nu) @ f, rtol=1e-13, atol=1e-10)

    @given(vectors, fractions)
    def test_mass(self, f, nu):
        scale = f.size * max(np.max(np.abs(f)), 1.0)
        assert abs(shift_fractional(f, nu).sum() - f.sum()) <= 1e-12 * scale


class TestShiftReal:
    def test_integer_value(self, rng):
        f = rng.normal(size=7)
        assert np.array_equal(shift_real(f, 2.0), shift_integer(f, 2))

    def test_hand_value(self):
        assert np.allclose(shift_real(e(0, 4), 1.25), [0.0, 0.75, 0.25, 0.0])

    def test_adjoint_dense_n6(self):
        n = 6
        M = real_shift_matrix(n, 1.5)
        f = e(2, n)
        assert np.allclose(shift_real(f, -1.5), M.T @ f, atol=1e-15)
        assert np.allclose(shift_real_adjoint(f, RealShift(1.5)), M.T @ f, atol=1e-15)

    @given(vectors, st.floats(-60.0, 60.0))
    def test_matches_dense(self, f, w):
        assert np.allclose(shift_real(f, w), real_shift_matrix(f.size, w) @ f, rtol=1e-12, atol=1e-9)

    @given(st.integers(3, 20), st.floats(-30.0, 30.0))
    def test_transpose_is_negative_shift(self, n, w):
        assert np.allclose(real_shift_matrix(n, w).T, shift_real(np.eye(n), -w), atol=1e-14)

    @given(vectors, st.floats(-60.0, 60.0))
    def test_mass(self, f, w):
        scale = f.size * max(np.max(np.abs(f)), 1.0)
        assert abs(shift_real(f, w).sum() - f.sum()) <= 1e-12 * scale


class TestLaplacian:
    def test_constant_in_nullspace(self):
        assert np.allclose(discrete_laplacian(np.full(8, 2.5)), 0.0)

    def test_hand_value(self):
        assert np.array_equal(discrete_laplacian(e(0, 4)), 16.0 * np.array([-2.0, 1.0, 0.0, 1.0]))

    def test_sine_eigenfunction(self):
        n = 100
        x = (np.arange(n) + 0.5) / n
        f = np.sin(2 * np.pi * x)
        lf = discrete_laplacian(f)
        assert np.linalg.norm(lf + (2 * np.pi) ** 2 * f) <= 1e-2 * np.linalg.norm((2 * np.pi) ** 2 * f)

    @given(vectors)
    def test_zero_sum(self, f):
        n = f.size
        assert abs(discrete_laplacian(f).sum()) <= 1e-10 * n * max(np.max(np.abs(f)), 1.0) * n * n

    @given(vectors)
    def test_matches_dense(self, f):
        assert np.allclose(second_difference(f), second_difference_matrix(f.size) @ f, atol=1e-9)


class TestAlgebraicIdentities:
    """Commutation, semigroup defect and the diffusion identity, on dense matrices."""

    @given(st.integers(3, 30), fractions, fractions)
    def test_commute(self, n, nu, om):
        A, B = upwind_matrix(n, nu), upwind_matrix(n, om)
        assert np.max(np.abs(A @ B - B @ A)) <= 1e-13

    @given(st.integers(3, 30), fractions, fractions)
    def test_adjoints_commute(self, n, nu, om):
        A, B = upwind_matrix(n, nu), upwind_matrix(n, om)
        assert np.max(np.abs(A.T @ B - B @ A.T)) <= 1e-13

    @given(st.integers(3, 30), fractions, fractions)
    def test_semigroup_defect_is_shifted_laplacian(self, n, nu, om):
        total = nu + om
        if total > 1.0:
            nu, om = nu / 2, om / 2
        K = down_shift_matrix(n)
        L = second_difference_matrix(n)
        defect = upwind_matrix(n, nu) @ upwind_matrix(n, om) - upwind_matrix(n, nu + om)
        assert np.max(np.abs(defect - nu * om * K @ L)) <= 1e-13

    @given(st.integers(3, 30), fractions)
    def test_diffusion_identity(self, n, nu):
        Kn = upwind_matrix(n, nu)
        L = second_difference_matrix(n)
        assert np.max(np.abs(Kn.T @ Kn - np.eye(n) - nu * (1 - nu) * L)) <= 1e-13

    @pytest.mark.parametrize("n", [16, 100])
    @pytest.mark.parametrize("nu", np.round(np.arange(0.1, 1.0, 0.1), 1))
    def test_diffusion_bound(self, n, nu):
        Kn = shift_fractional(np.eye(n), nu)
        norm = np.linalg.norm(Kn.T @ Kn - np.eye(n), 2)
        assert norm <= 4 * nu * (1 - nu) + 1e-12


class TestTransport:
    def test_zero_shift(self, rng):
        A = rng.normal(size=(5, 4))
        assert np.array_equal(transport_columns(A, np.zeros(4, dtype=int)), A)

    def test_identity_snapshots_align(self):
        n = 10
        A = n * np.eye(n)
        out = transport_columns(A, -np.arange(n))
        assert np.array_equal(out, np.tile(n * e(0, n)[:, None], (1, n)))

    @given(st.integers(0, 2**32 - 1))
    def test_round_trip_exact(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(8, 5))
        nus = rng.integers(-20, 20, size=5)
        assert np.array_equal(transport_columns(transport_columns(A, -nus), nus), A)

    def test_real_shifts(self, rng):
        A = rng.normal(size=(6, 3))
        nus = np.array([0.5, -1.25, 2.0])
        out = transport_columns(A, nus)
        for j in range(3):
            assert np.allclose(out[:, j], real_shift_matrix(6, nus[j]) @ A[:, j])

    def test_scaling_and_cutoff(self):
        A = np.arange(12.0).reshape(4, 3)
        cut = np.ones((4, 3), dtype=bool)
        cut[0, :] = False
        out = transport_columns(A, np.array([0, 1, 0]), scalings=[2.0, 1.0, 0.5], cutoffs=cut)
        assert np.array_equal(out[1:, 0], 2 * A[1:, 0])
        assert np.all(out[0] == 0)
        assert np.array_equal(out[1:, 1], np.roll(A[:, 1], 1)[1:])

    def test_pivot_transport(self):
        b = e(0, 5)
        out = transport_pivot(b, np.arange(5))
        assert np.array_equal(out, np.eye(5))

    @pytest.mark.parametrize(
        "kw",
        [
            {"nus": np.zeros(3, dtype=int)},
            {"nus": np.zeros(2, dtype=int), "scalings": np.ones(3)},
            {"nus": np.zeros(2, dtype=int), "cutoffs": np.ones((2, 2), dtype=bool)},
        ],
    )
    def test_dimension_mismatch(self, kw):
        with pytest.raises(ValueError):
            transport_columns(np.zeros((4, 2)), **kw)
