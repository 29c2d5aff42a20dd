"""Tests for the particle-system dynamics layer.

Statistical checks use 4-standard-error bands on pinned seeds; scaling and
flow values are checked against frozen hand computations and a numerical ODE
oracle (see inline derivations).
"""
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from logifv import _engine_py
from logifv.dynamics import (EventRecord, ModelParams, PopulationState,
                             ReplicateSet, Trajectory, drift_rate,
                             engine_backend, frequency, logistic_flow,
                             lyapunov, occupation_stats, replicate_stream,
                             scaling_for, simulate, simulate_replicates, step)
from logifv.errors import ExtinctError, ParameterError
from logifv.offspring import make_explicit, make_zeta

SEED = 20260819


def fv_params(K=300):
    # one child per birth, b=2, d=1, c=1: n* = 1, effective_pop = 1/4
    return ModelParams(b=2.0, d=1.0, c=1.0, K=K, law=make_explicit([1.0]),
                       regime="finite_variance")


class TestModelParams:
    def test_valid_construction(self):
        p = fv_params()
        assert p.c_K == 1.0 / 300

    @pytest.mark.parametrize("kwargs", [
        dict(b=0.0), dict(b=-1.0), dict(b=math.inf),
        dict(d=-0.5), dict(c=0.0), dict(K=0), dict(K=2.5),
    ])
    def test_bad_scalars(self, kwargs):
        base = dict(b=2.0, d=1.0, c=1.0, K=300, law=make_explicit([1.0]),
                    regime="finite_variance")
        base.update(kwargs)
        with pytest.raises(ParameterError):
            ModelParams(**base)

    def test_unknown_regime(self):
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=0.0, c=1.0, K=10, law=make_explicit([1.0]),
                        regime="kingman")

    def test_finite_variance_needs_m2(self):
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=0.0, c=1.0, K=10, law=make_zeta(1.5),
                        regime="finite_variance")

    def test_finite_variance_accepts_zeta_alpha3(self):
        law = make_zeta(3.0)
        ModelParams(b=1.0, d=0.0, c=1.0, K=10, law=law,
                    regime="finite_variance")

    def test_stable_needs_zeta_alpha_in_1_2(self):
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=0.0, c=1.0, K=10, law=make_zeta(2.5),
                        regime="stable")
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=0.0, c=1.0, K=10,
                        law=make_explicit([0.5, 0.5]), regime="stable")

    def test_neveu_needs_alpha_1(self):
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=0.0, c=1.0, K=10, law=make_zeta(1.5),
                        regime="neveu")

    def test_neveu_needs_k3(self):
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=0.0, c=1.0, K=2, law=make_zeta(1.0),
                        regime="neveu")

    def test_supercriticality(self):
        with pytest.raises(ParameterError):
            ModelParams(b=1.0, d=1.0, c=1.0, K=10, law=make_explicit([1.0]),
                        regime="finite_variance")


class TestScaling:
    def test_finite_variance_desk_values(self):
        s = scaling_for(fv_params())
        # n* = (2*1 - 1)/1 = 1; effective_pop = 1/(2*(1+1)) = 1/4
        assert s.n_star == 1.0
        assert s.effective_pop == 0.25
        assert s.time_factor == 300.0
        assert s.size_factor == 300.0

    def test_stable_scaling(self):
        law = make_zeta(1.5)
        b = 1.0 / law.m
        p = ModelParams(b=b, d=0.0, c=1.0, K=500, law=law, regime="stable")
        s = scaling_for(p)
        assert s.n_star == pytest.approx(1.0, rel=1e-15)
        assert s.time_factor == pytest.approx(math.sqrt(500.0), rel=1e-15)
        assert s.size_factor == 500.0
        assert s.effective_pop is None

    def test_neveu_scaling(self):
        p = ModelParams(b=1.0, d=0.0, c=1.0, K=1000, law=make_zeta(1.0),
                        regime="neveu")
        s = scaling_for(p)
        # n* = b p0 / c = 1/zeta(2) = 6/pi^2
        assert s.n_star == pytest.approx(6.0 / math.pi**2, rel=1e-12)
        assert s.time_factor == 1.0
        assert s.size_factor == pytest.approx(1000.0 * math.log(1000.0),
                                              rel=1e-15)

    def test_drift_rate(self):
        assert drift_rate(fv_params()) == 1.0  # b m - d = 2 - 1
        p = ModelParams(b=1.0, d=0.0, c=1.0, K=1000, law=make_zeta(1.0),
                        regime="neveu")
        assert drift_rate(p) == pytest.approx(6.0 / math.pi**2, rel=1e-12)


class TestStep:
    def test_birth_fraction_and_increment_mean(self):
        # from frozen N the birth probability is rate_birth/rate_total and
        # E[delta N] = (rate_birth * m - rate_death)/rate_total
        law = make_explicit([0.3, 0.5, 0.2])  # m = 1.9
        p = ModelParams(b=2.0, d=1.0, c=1.0, K=100, law=law,
                        regime="finite_variance")
        n0 = 200
        rb = p.b * n0
        rd = (p.d + p.c_K * n0) * n0
        p_birth = rb / (rb + rd)
        mean_delta = (rb * law.m - rd) / (rb + rd)
        n_steps = 40_000
        stream = _engine_py.UniformStream(replicate_stream(SEED, 0))
        births = 0
        deltas = np.empty(n_steps)
        for i in range(n_steps):
            state = PopulationState.from_counts([120, 80])
            ev = step(state, p, stream)
            births += ev.kind == "birth"
            deltas[i] = state.total - n0
            assert state.raw_time == ev.wait > 0.0
        se_b = math.sqrt(p_birth * (1 - p_birth) / n_steps)
        assert abs(births / n_steps - p_birth) < 4 * se_b
        se_d = deltas.std(ddof=1) / math.sqrt(n_steps)
        assert abs(deltas.mean() - mean_delta) < 4 * se_d

    def test_wait_time_mean(self):
        # waits are Exponential(rate_total)
        p = fv_params(K=100)
        n0 = 100
        rate_total = p.b * n0 + (p.d + p.c_K * n0) * n0
        stream = _engine_py.UniformStream(replicate_stream(SEED, 1))
        n_steps = 40_000
        waits = np.empty(n_steps)
        for i in range(n_steps):
            state = PopulationState.from_counts([n0])
            waits[i] = step(state, p, stream).wait
        se = waits.std(ddof=1) / math.sqrt(n_steps)
        assert abs(waits.mean() - 1.0 / rate_total) < 4 * se

    def test_offspring_added_to_parent_type(self):
        law = make_explicit([0.0, 0.0, 1.0])  # always three children
        p = ModelParams(b=5.0, d=0.1, c=0.01, K=100, law=law,
                        regime="finite_variance")
        stream = _engine_py.UniformStream(replicate_stream(SEED, 2))
        state = PopulationState.from_counts([10, 10])
        before = state.counts.copy()
        ev = step(state, p, stream)
        assert isinstance(ev, EventRecord)
        delta = state.counts - before
        changed = np.nonzero(delta)[0]
        assert changed.tolist() == [ev.type_index]
        assert delta[ev.type_index] == (3 if ev.kind == "birth" else -1)
        assert ev.offspring == (3 if ev.kind == "birth" else 0)

    def test_extinct_raises(self):
        state = PopulationState.from_counts([0, 0])
        stream = _engine_py.UniformStream(replicate_stream(SEED, 3))
        with pytest.raises(ExtinctError):
            step(state, fv_params(), stream)

    def test_step_matches_kernel_records(self):
        # stepping with the same stream reproduces the kernel's record at an
        # observation time (the pre-event state when the clock passes it)
        p = fv_params(K=50)
        init = [30, 20]
        obs_scaled = 0.3
        tr = simulate(p, init, horizon=obs_scaled, obs_times=[obs_scaled],
                      seed=SEED)
        obs_raw = obs_scaled * scaling_for(p).time_factor
        state = PopulationState.from_counts(init)
        stream = _engine_py.UniformStream(replicate_stream(SEED, 0))
        snapshot = state.counts.copy()
        while state.raw_time < obs_raw:
            snapshot = state.counts.copy()
            step(state, p, stream)
        assert np.array_equal(tr.counts[0], snapshot)


class TestSimulate:
    def test_records_initial_state_at_time_zero(self):
        tr = simulate(fv_params(), [150, 150], horizon=0.0, obs_times=[0.0],
                      seed=SEED)
        assert tr.counts.tolist() == [[150, 150]]
        assert tr.n_bar[0] == 1.0
        assert tr.freqs[0].tolist() == [0.5, 0.5]
        assert not tr.extinct[0]

    def test_obs_validation(self):
        p = fv_params()
        with pytest.raises(ParameterError):
            simulate(p, [10], 1.0, obs_times=[0.5, 0.5], seed=0)
        with pytest.raises(ParameterError):
            simulate(p, [10], 1.0, obs_times=[0.5, 0.2], seed=0)
        with pytest.raises(ParameterError):
            simulate(p, [10], 1.0, obs_times=[0.5, 1.5], seed=0)
        with pytest.raises(ParameterError):
            simulate(p, [10], 1.0, obs_times=[-0.1, 0.5], seed=0)
        with pytest.raises(ParameterError):
            simulate(p, [10], -1.0, seed=0)

    def test_init_validation(self):
        with pytest.raises(ParameterError):
            simulate(fv_params(), [], 1.0, seed=0)
        with pytest.raises(ParameterError):
            simulate(fv_params(), [5, -1], 1.0, seed=0)

    def test_extinction_absorbs_with_zero_rows(self):
        # barely supercritical and tiny K: death dominates almost surely
        p = ModelParams(b=1.01, d=1.0, c=1.0, K=2, law=make_explicit([1.0]),
                        regime="finite_variance")
        tr = simulate(p, [2], horizon=100.0,
                      obs_times=np.linspace(10.0, 100.0, 10), seed=SEED)
        assert tr.extinct[-1]
        dead = np.nonzero(tr.extinct)[0]
        assert np.all(tr.counts[dead] == 0)
        assert np.all(tr.n_bar[dead] == 0.0)
        assert np.all(tr.freqs[dead] == 0.0)
        # extinction is absorbing: flags are monotone
        assert np.all(np.diff(tr.extinct.astype(int)) >= 0)

    def test_audit_clean_run(self):
        tr = simulate(fv_params(K=100), [50, 50], horizon=1.0,
                      obs_times=[1.0], seed=SEED, audit=True)
        assert tr.events > 0

    def test_determinism_and_seed_sensitivity(self):
        p = fv_params(K=100)
        a = simulate(p, [60, 40], 0.5, [0.1, 0.5], seed=7)
        b = simulate(p, [60, 40], 0.5, [0.1, 0.5], seed=7)
        c = simulate(p, [60, 40], 0.5, [0.1, 0.5], seed=8)
        assert np.array_equal(a.counts, b.counts)
        assert a.final_raw_time == b.final_raw_time
        assert not np.array_equal(a.counts, c.counts)

    def test_seed_forms_agree(self):
        p = fv_params(K=100)
        a = simulate(p, [60, 40], 0.5, [0.5], seed=7)
        ss = np.random.SeedSequence(entropy=7, spawn_key=(0, 0))
        b = simulate(p, [60, 40], 0.5, [0.5], seed=ss)
        c = simulate(p, [60, 40], 0.5, [0.5], seed=np.random.Philox(ss))
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.counts, c.counts)

    def test_label_merge_invariance(self):
        # the total-size process does not depend on how mass is split over
        # labels: the kernel consumes the same uniforms either way
        p = fv_params(K=100)
        split = simulate(p, [40, 30, 20, 10], 1.0, np.linspace(0.1, 1, 10),
                         seed=SEED)
        merged = simulate(p, [100], 1.0, np.linspace(0.1, 1, 10), seed=SEED)
        assert np.array_equal(split.counts.sum(axis=1),
                              merged.counts[:, 0])
        assert split.events == merged.events
        assert split.final_raw_time == merged.final_raw_time

    def test_mean_size_near_equilibrium(self):
        # time average of N_bar over well-mixed records stays near n* = 1
        p = fv_params(K=300)
        tr = simulate(p, [300], 1.0, np.linspace(0.01, 1.0, 100), seed=SEED)
        assert abs(tr.n_bar.mean() - 1.0) < 0.05

    def test_frequency_martingale_over_replicates(self):
        # E[type-0 frequency] stays at its initial value
        p = fv_params(K=200)
        rs = simulate_replicates(p, [60, 140], 0.3, [0.3], master_seed=SEED,
                                 replicates=400)
        alive = ~rs.extinct[:, 0]
        assert alive.mean() > 0.99
        f = rs.freqs[alive, 0, 0]
        se = f.std(ddof=1) / math.sqrt(f.size)
        assert abs(f.mean() - 0.3) < 4 * se


class TestReplicates:
    def test_replicate_streams_are_stable_and_independent(self):
        p = fv_params(K=100)
        rs = simulate_replicates(p, [50, 50], 0.5, [0.1, 0.5],
                                 master_seed=11, replicates=8)
        single = simulate(p, [50, 50], 0.5, [0.1, 0.5],
                          seed=replicate_stream(11, 5))
        assert np.array_equal(rs.counts[5], single.counts)
        assert not np.array_equal(rs.counts[4], rs.counts[5])

    def test_threads_do_not_change_results(self):
        p = fv_params(K=100)
        a = simulate_replicates(p, [50, 50], 0.5, [0.5], master_seed=3,
                                replicates=12, threads=4)
        b = simulate_replicates(p, [50, 50], 0.5, [0.5], master_seed=3,
                                replicates=12, threads=1)
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.events, b.events)

    def test_trajectory_accessor(self):
        p = fv_params(K=100)
        rs = simulate_replicates(p, [50, 50], 0.5, [0.1, 0.5],
                                 master_seed=11, replicates=3)
        assert isinstance(rs, ReplicateSet)
        tr = rs.trajectory(2)
        assert isinstance(tr, Trajectory)
        assert tr.replicate == 2
        assert np.array_equal(tr.counts, rs.counts[2])
        assert rs.n_replicates == 3

    def test_replicates_validation(self):
        with pytest.raises(ParameterError):
            simulate_replicates(fv_params(), [10], 1.0, [1.0],
                                master_seed=0, replicates=0)


class TestBackends:
    def test_lanes_bit_identical(self):
        # the compiled kernel must reproduce the pure-Python lane exactly
        pytest.importorskip("logifv._engine_cy")
        from logifv import _engine_cy
        for law, b, d, c_K in [
            (make_zeta(1.0), 1.0, 0.0, 0.02),
            (make_zeta(1.5), 0.52, 0.0, 0.0125),
            (make_explicit([0.3, 0.5, 0.2]), 2.0, 1.0, 0.01),
        ]:
            is_zeta = law.kind == "zeta"
            alpha = law.alpha if is_zeta else 1.0
            args = (np.array([40, 30, 20, 10], dtype=np.int64), b, d, c_K,
                    law.head_cum, is_zeta, alpha, law.tail_start - 1,
                    np.linspace(0.05, 3.0, 40))
            ss = np.random.SeedSequence(entropy=SEED, spawn_key=(0, 7))
            out_p, ev_p, t_p = _engine_py.run_sim(*args,
                                                  np.random.Philox(ss), 4096)
            out_c, ev_c, t_c = _engine_cy.run_sim(*args,
                                                  np.random.Philox(ss), 4096)
            assert np.array_equal(out_p, out_c)
            assert ev_p == ev_c
            assert t_p == t_c

    def test_kernel_does_not_mutate_inputs(self):
        pytest.importorskip("logifv._engine_cy")
        from logifv import _engine_cy
        law = make_explicit([1.0])
        init = np.array([50, 50], dtype=np.int64)
        _engine_cy.run_sim(init, 2.0, 1.0, 0.01, law.head_cum, False, 1.0,
                           law.tail_start - 1, np.array([5.0]),
                           np.random.Philox(np.random.SeedSequence(0)), 0)
        assert init.tolist() == [50, 50]

    def test_backend_reported(self):
        assert engine_backend() in ("compiled", "python")


class TestObservables:
    def test_frequency(self):
        assert frequency([3, 1]).tolist() == [0.75, 0.25]
        assert frequency([0, 0]).tolist() == [0.0, 0.0]
        state = PopulationState.from_counts([1, 4])
        assert frequency(state).tolist() == [0.2, 0.8]

    def test_occupation_stats_forward_gap_weighting(self):
        # records at 0, 0.5, 1.0 with horizon 2: gaps 0.5, 0.5, 1.0; the
        # deviations 0.3, 0.1, 0.25 against eps=0.2 flag records 1 and 3,
        # so frac = (0.5 + 1.0)/2 and sup = 0.3
        tr = Trajectory(
            scaled_times=np.array([0.0, 0.5, 1.0]),
            counts=np.zeros((3, 1), dtype=np.int64),
            n_bar=np.array([1.3, 0.9, 1.25]),
            freqs=np.zeros((3, 1)), extinct=np.zeros(3, dtype=bool),
            events=0, final_raw_time=0.0)
        oc = occupation_stats(tr, n_star=1.0, eps=0.2, horizon=2.0)
        assert oc.sup_dev == pytest.approx(0.3, abs=1e-15)
        assert oc.frac_outside == pytest.approx(0.75, abs=1e-15)

    def test_occupation_stats_default_horizon(self):
        tr = Trajectory(
            scaled_times=np.array([0.0, 1.0]),
            counts=np.zeros((2, 1), dtype=np.int64),
            n_bar=np.array([1.0, 1.5]),
            freqs=np.zeros((2, 1)), extinct=np.zeros(2, dtype=bool),
            events=0, final_raw_time=0.0)
        oc = occupation_stats(tr, n_star=1.0, eps=0.2)
        # last record has zero forward gap under the default horizon
        assert oc.frac_outside == 0.0
        assert oc.sup_dev == pytest.approx(0.5)

    def test_occupation_stats_errors(self):
        tr = Trajectory(
            scaled_times=np.array([0.0, 1.0]),
            counts=np.zeros((2, 1), dtype=np.int64),
            n_bar=np.array([1.0, 1.0]),
            freqs=np.zeros((2, 1)), extinct=np.zeros(2, dtype=bool),
            events=0, final_raw_time=0.0)
        with pytest.raises(ParameterError):
            occupation_stats(tr, 1.0, eps=0.0)
        with pytest.raises(ParameterError):
            occupation_stats(tr, 1.0, eps=0.1, horizon=0.5)

    def test_lyapunov(self):
        assert lyapunov(1.0, 1.0) == 0.0
        assert lyapunov(2.0, 1.0) > 0.0
        assert lyapunov(0.5, 1.0) > 0.0
        with pytest.raises(ParameterError):
            lyapunov(0.0, 1.0)

    def test_logistic_flow_against_ode_oracle(self):
        # closed form vs numerical integration of dn/dt = r n (1 - n/n*)
        r, n_star = 1.7, 0.8
        for n0 in (0.1, 0.8, 2.5):
            sol = solve_ivp(lambda t, n: r * n[0] * (1 - n[0] / n_star),
                            (0.0, 3.0), [n0], rtol=1e-11, atol=1e-13,
                            dense_output=True)
            for t in (0.3, 1.0, 3.0):
                assert logistic_flow(n0, t, r, n_star) == pytest.approx(
                    sol.sol(t)[0], rel=1e-8)

    def test_logistic_flow_fixed_points(self):
        assert logistic_flow(0.0, 5.0, 1.0, 1.0) == 0.0
        assert logistic_flow(1.0, 5.0, 1.0, 1.0) == pytest.approx(1.0)
        with pytest.raises(ParameterError):
            logistic_flow(-1.0, 1.0, 1.0, 1.0)

    def test_flow_tracks_particle_mean(self):
        # law of large numbers: at K=5000 a single path started at 0.25 n*
        # follows the logistic flow within O(1/sqrt(K)). The transient lives
        # on the raw clock (rate b m - d = 1 per raw unit), so the scaled
        # observation times are raw/K.
        K = 5000
        p = fv_params(K=K)
        raw_times = np.array([0.5, 1.0, 2.0, 4.0])
        obs = raw_times / K
        tr = simulate(p, [K // 4], float(obs[-1]), obs, seed=SEED)
        for i, rt in enumerate(raw_times):
            flow = logistic_flow(0.25, float(rt), drift_rate(p), 1.0)
            assert abs(tr.n_bar[i] - flow) < 0.06
