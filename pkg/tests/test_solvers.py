import math

import numpy as np
import pytest

from oracles import chebyshev_first_kind
from transport_reversal.solvers import (
    CFLError,
    InitialCondition,
    Problem,
    ProblemSpec,
    acoustic_energy,
    characteristic_snapshots,
    chebyshev_nodes,
    initial_profile,
    medium,
    snapshot_at_chebyshev_times,
    solve,
)


class TestSpec:
    def test_cfl(self):
        with pytest.raises(CFLError):
            ProblemSpec(courant=1.01)

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_cells": 0},
            {"n_snapshots": 0},
            {"final_time": -1.0},
            {"courant": 0.0},
            {"rho": 0.0},
            {"decay_rate": -1.0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ProblemSpec(**kw)

    def test_bad_initial_condition(self):
        with pytest.raises(ValueError):
            InitialCondition(kind="square")
        with pytest.raises(ValueError):
            InitialCondition(width=0.0)

    def test_dict_initial_condition(self):
        s = ProblemSpec(initial_condition={"kind": "delta"})
        assert s.initial_condition.kind == "delta"

    def test_problem_from_string(self):
        assert ProblemSpec("burgers").problem is Problem.BURGERS


class TestInitialProfile:
    def test_gaussian_mass(self):
        u = initial_profile(InitialCondition(center=0.5, width=0.05), 100)
        assert u.sum() / 100 == pytest.approx(math.sqrt(math.pi) * 0.05, rel=1e-12)

    def test_periodic_images(self):
        a = initial_profile(InitialCondition(center=0.0, width=0.1), 50)
        assert a[0] == pytest.approx(a[-1], rel=1e-12)

    def test_delta(self):
        u = initial_profile(InitialCondition(kind="delta"), 10)
        assert u[0] == 10.0 and np.count_nonzero(u) == 1


class TestAdvection:
    def test_identity_snapshots_exact(self):
        n = 100
        spec = ProblemSpec(n_cells=n, n_snapshots=n, final_time=(n - 1) / n, courant=1.0,
                           initial_condition=InitialCondition(kind="delta"))
        A = solve(spec)["u"].data
        assert np.array_equal(A, n * np.eye(n))

    def test_periodic_conserves_sum(self):
        A = solve(ProblemSpec(n_snapshots=20))["u"].data
        s = A.sum(axis=0)
        assert np.allclose(s, s[0], rtol=1e-13)

    def test_source_decay(self):
        spec = ProblemSpec(Problem.ADVECTION_SOURCE, n_snapshots=11, decay_rate=2.0)
        sol = solve(spec)["u"]
        s = sol.data.sum(axis=0)
        assert np.allclose(s, s[0] * np.exp(-2.0 * sol.times), rtol=1e-12)

    def test_absorbing_loses_mass(self):
        spec = ProblemSpec(Problem.ADVECTION_ABSORBING, n_snapshots=11,
                           initial_condition=InitialCondition(center=0.5))
        A = solve(spec)["u"].data
        s = A.sum(axis=0)
        assert np.all(np.diff(s) <= 1e-12)
        assert s[-1] < 1e-6 * s[0]

    def test_times_uniform(self):
        sol = solve(ProblemSpec(n_snapshots=5, final_time=2.0))["u"]
        assert np.allclose(sol.times, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_single_snapshot(self):
        sol = solve(ProblemSpec(n_snapshots=1))["u"]
        assert sol.shape == (100, 1)
        assert np.array_equal(sol.data[:, 0], initial_profile(InitialCondition(), 100))


class TestAcoustic:
    @pytest.mark.parametrize("n,courant", [(100, 1.0), (400, 0.9)])
    def test_pulse_splits_in_half(self, n, courant):
        spec = ProblemSpec(Problem.ACOUSTIC_HOMOGENEOUS, n_cells=n, n_snapshots=2, final_time=0.4,
                           courant=courant, initial_condition=InitialCondition(center=0.5))
        p = solve(spec)["p"].data
        half = p[:, 0].max() / 2
        for hump in (p[: n // 2, 1], p[n // 2:, 1]):
            assert abs(hump.max() - half) <= 0.1 * half

    @pytest.mark.parametrize("problem", [Problem.ACOUSTIC_HOMOGENEOUS, Problem.ACOUSTIC_HETEROGENEOUS])
    def test_energy_nonincreasing(self, problem):
        spec = ProblemSpec(problem, n_snapshots=40)
        sol = solve(spec)
        rho, bulk = medium(spec)
        E = acoustic_energy(sol["p"].data, sol["u"].data, rho, bulk)
        assert np.all(np.diff(E) <= 1e-14 * E[0])

    def test_reflection_transmission_converge(self):
        # impedances 1 and 2: pressure reflection 1/3, transmission 4/3 on a
        # pulse compressed by the speed ratio 1/2, so 2/3 of the mass
        errs = []
        for n in (100, 200, 400):
            spec = ProblemSpec(Problem.ACOUSTIC_HETEROGENEOUS, n_cells=n, n_snapshots=2, final_time=0.5)
            p = solve(spec)["p"].data
            left = (np.arange(n) + 0.5) / n < 0.5
            m0 = p[:, 0].sum()
            R, T = p[left, 1].sum() / m0, p[~left, 1].sum() / m0
            errs.append(max(abs(R - 1 / 3), abs(T - 2 / 3)))
        assert np.all(np.diff(errs) < 0)
        assert errs[-1] < 1e-8

    def test_heterogeneous_initial_is_right_going(self):
        spec = ProblemSpec(Problem.ACOUSTIC_HETEROGENEOUS, n_snapshots=2)
        r = characteristic_snapshots(spec, solve(spec))
        # p = u is purely right-going where the impedance is 1
        left = slice(0, 50)
        assert np.max(np.abs(r["r1"].data[left, 0])) <= 1e-15 * np.max(np.abs(r["r2"].data[:, 0]))

    def test_characteristics_need_acoustics(self):
        spec = ProblemSpec(n_snapshots=2)
        with pytest.raises(ValueError):
            characteristic_snapshots(spec, solve(spec))


@pytest.fixture(scope="module")
def sol():
    spec = ProblemSpec(Problem.BURGERS, final_time=0.5,
                       initial_condition=InitialCondition(kind="twin_gaussians", width=0.1))
    return spec, solve(spec)["u"].data


class TestBurgers:
    def test_mass(self, sol):
        _, A = sol
        s = A.sum(axis=0) / A.shape[0]
        assert np.all(np.abs(s - s[0]) <= 1e-12 * np.abs(s[0]) * A.shape[1])

    def test_max_principle(self, sol):
        _, A = sol
        lo, hi = A[:, 0].min(), A[:, 0].max()
        assert A.min() >= lo - 1e-12 and A.max() <= hi + 1e-12

    def test_shock_steepens(self, sol):
        _, A = sol
        assert np.max(np.abs(np.diff(A[:, -1]))) > 2 * np.max(np.abs(np.diff(A[:, 0])))


class TestChebyshev:
    def test_nodes_closed_form(self):
        assert np.allclose(chebyshev_nodes(3, 1.0), chebyshev_first_kind(3, 1.0), atol=1e-15)
        assert np.allclose(chebyshev_nodes(7, 2.5), chebyshev_first_kind(7, 2.5), atol=1e-15)

    @pytest.mark.parametrize("m", [1, 3, 20])
    def test_stamps_near_nodes(self, m):
        spec = ProblemSpec(n_snapshots=m)
        sol = snapshot_at_chebyshev_times(spec)["u"]
        dt_max = spec.courant / spec.n_cells
        assert sol.shape == (100, m)
        assert np.all(np.abs(sol.times - chebyshev_first_kind(m, 1.0)) <= dt_max / 2 + 1e-14)

    def test_single_node_is_midpoint(self):
        sol = snapshot_at_chebyshev_times(ProblemSpec(n_snapshots=1))["u"]
        assert sol.times[0] == pytest.approx(0.5, abs=0.005)

    def test_columns_match_uniform_run(self):
        # with courant 1 every step is an exact cell shift, so a snapshot
        # depends only on its step index
        spec = ProblemSpec(n_snapshots=5, courant=1.0, final_time=1.0)
        cheb = snapshot_at_chebyshev_times(spec)["u"]
        for j, t in enumerate(cheb.times):
            k = int(round(t * 100))
            ref = solve(spec.with_(n_snapshots=2, final_time=k / 100))["u"].data[:, 1]
            assert np.allclose(cheb.data[:, j], ref, atol=1e-14)

    def test_acoustic_pair(self):
        out = snapshot_at_chebyshev_times(ProblemSpec(Problem.ACOUSTIC_HOMOGENEOUS, n_snapshots=4))
        assert set(out) == {"p", "u"}
