"""Spectral stepper against closed-form and ODE oracles.

Linear runs must reproduce the multiplier propagator to roundoff, the
zero mode must follow its damped scalar ODE, and the nonlinear stepper
must self-converge at second order.  Constant fields reduce the PDE to
a k-dimensional ODE system, which an independent RK4 loop integrates as
the nonlinear oracle.
"""

import math

import numpy as np
import pytest

from sevolab.errors import BlowUpDetected, DataLeakage
from sevolab.kernels import propagator_arrays
from sevolab.solver import (
    ComponentData,
    FieldState,
    GridSpec,
    InitialData,
    RunResult,
    make_initial_data,
    norms,
    run,
    step,
    symmetry_defect,
)
from sevolab.exponents import SystemParams

PARAMS_34 = SystemParams(n=1, sigma=1.0, k=2, p=(3.0, 4.0))
PARAMS_22 = SystemParams(n=1, sigma=1.0, k=2, p=(2.0, 2.0))


def gaussian_data(eps, amps=((1.0, 0.0), (1.0, 0.0)), width=1.0):
    return InitialData(
        epsilon=eps,
        components=tuple(
            ComponentData(amp0=a0, amp1=a1, width=width) for a0, a1 in amps
        ),
    )


def random_state(grid, k, seed, modes=20):
    """Real band-limited random fields with nonzero velocity part."""
    rng = np.random.default_rng(seed)
    shape = (k,) + grid.shape
    u = np.zeros(shape)
    v = np.zeros(shape)
    x = grid.axes()[0]
    for ell in range(k):
        for m in range(1, modes + 1):
            cu, su = rng.normal(size=2) / m ** 2
            cv, sv = rng.normal(size=2) / m ** 2
            phase = math.pi * m / grid.L * x
            u[ell] += cu * np.cos(phase) + su * np.sin(phase)
            v[ell] += cv * np.cos(phase) + sv * np.sin(phase)
        u[ell] += rng.normal() * 0.1
    axes = grid.spatial_axes
    return FieldState(
        t=0.0, u_hat=np.fft.fftn(u, axes=axes), v_hat=np.fft.fftn(v, axes=axes)
    )


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="n must be"):
            GridSpec(n=3, N=64, L=1.0)
        with pytest.raises(ValueError, match="power of two"):
            GridSpec(n=1, N=100, L=1.0)
        with pytest.raises(ValueError, match="power of two"):
            GridSpec(n=1, N=4, L=1.0)
        with pytest.raises(ValueError, match="L must be"):
            GridSpec(n=1, N=64, L=0.0)

    def test_geometry(self):
        g = GridSpec(n=1, N=64, L=4.0)
        assert g.dx == pytest.approx(0.125)
        assert g.cell_volume == pytest.approx(0.125)
        assert g.resolution_bound == pytest.approx(math.pi / 4.0 * 32)
        x = g.axes()[0]
        assert x[0] == pytest.approx(-4.0)
        assert x[-1] == pytest.approx(4.0 - g.dx)

    def test_symbol_is_wavenumber_power(self):
        g = GridSpec(n=1, N=16, L=2.0)
        a = g.symbol(1.5)
        assert a[0] == 0.0
        assert a[1] == pytest.approx((math.pi / 2.0) ** 3)
        assert a[8] == pytest.approx((math.pi / 2.0 * 8) ** 3)

    def test_2d_symbol(self):
        g = GridSpec(n=2, N=16, L=2.0)
        a = g.symbol(1.0)
        assert a[1, 2] == pytest.approx((math.pi / 2.0) ** 2 * 5)


class TestInitialData:
    def test_width_validation(self):
        with pytest.raises(ValueError, match="width"):
            ComponentData(amp0=1.0, width=0.0)
        with pytest.raises(ValueError, match="component"):
            InitialData(epsilon=0.1, components=())

    def test_gaussian_l2_analytic(self):
        # |eps A exp(-x^2/w^2)|_L2 = eps A (pi/2)^(1/4) sqrt(w) on the line;
        # the box tail is e^(-(L/w)^2) and invisible at double precision.
        grid = GridSpec(n=1, N=256, L=20.0)
        eps, amp, w = 0.05, 1.3, 2.0
        data = InitialData(
            epsilon=eps,
            components=(ComponentData(amp0=amp, width=w),
                        ComponentData(amp0=0.7, width=1.0)),
        )
        state, _ = make_initial_data(grid, data, sigma=1.0)
        got = norms(grid, state, 1.0)["l2"][0]
        exact = eps * amp * (math.pi / 2.0) ** 0.25 * math.sqrt(w)
        assert got == pytest.approx(exact, rel=1e-10)

    def test_mean_analytic(self):
        grid = GridSpec(n=1, N=256, L=20.0)
        eps, amp, w = 0.1, 1.0, 1.5
        data = InitialData(
            epsilon=eps,
            components=(ComponentData(amp0=amp, width=w),
                        ComponentData(amp0=amp, width=w)),
        )
        state, report = make_initial_data(grid, data, sigma=1.0)
        exact = eps * amp * math.sqrt(math.pi) * w / (2.0 * grid.L)
        assert norms(grid, state, 1.0)["mean"][0] == pytest.approx(
            exact, rel=1e-12
        )
        assert report["means_u0"][0] == pytest.approx(exact, rel=1e-12)

    def test_data_norm_linear_in_epsilon(self):
        grid = GridSpec(n=1, N=128, L=15.0)
        _, r1 = make_initial_data(
            grid, gaussian_data(0.1, ((1.0, 0.5), (0.3, 0.0))), sigma=1.0
        )
        _, r2 = make_initial_data(
            grid, gaussian_data(0.2, ((1.0, 0.5), (0.3, 0.0))), sigma=1.0
        )
        assert r2["data_norm"] == pytest.approx(2.0 * r1["data_norm"],
                                                rel=1e-14)

    def test_leakage_wide_bump(self):
        grid = GridSpec(n=1, N=256, L=40.0)
        with pytest.raises(DataLeakage, match="edge"):
            make_initial_data(grid, gaussian_data(0.1, width=15.0), sigma=1.0)

    def test_leakage_off_center_bump(self):
        grid = GridSpec(n=1, N=256, L=40.0)
        data = InitialData(
            epsilon=0.1,
            components=(
                ComponentData(amp0=1.0, width=4.0, center=(30.0,)),
                ComponentData(amp0=1.0, width=1.0),
            ),
        )
        with pytest.raises(DataLeakage):
            make_initial_data(grid, data, sigma=1.0)

    def test_zero_data(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        state, report = make_initial_data(
            grid, gaussian_data(0.0), sigma=1.0
        )
        assert report["data_norm"] == 0.0
        assert max(norms(grid, state, 1.0)["sup"]) == 0.0


class TestLinearExactness:
    def test_multiplier_propagation(self):
        # One macro step, many micro steps and the bare multiplier state
        # all agree to roundoff: the linear flow is exact per mode.
        grid = GridSpec(n=1, N=256, L=10.0)
        state = random_state(grid, k=2, seed=3)
        T = 2.0
        a = grid.symbol(1.0)
        k0, k1, _, _, _, _ = propagator_arrays(T, a)
        exact_u = k0 * state.u_hat + k1 * state.v_hat

        one = step(state, T, PARAMS_34, grid, linear_only=True)
        many = state
        for _ in range(1000):
            many = step(many, T / 1000.0, PARAMS_34, grid, linear_only=True)

        ref = math.sqrt(float(np.sum(np.abs(exact_u) ** 2)))
        for got in (one.u_hat, many.u_hat):
            err = math.sqrt(float(np.sum(np.abs(got - exact_u) ** 2))) / ref
            assert err <= 1e-10

    def test_sigma_fractional(self):
        grid = GridSpec(n=1, N=128, L=5.0)
        params = SystemParams(n=1, sigma=1.5, k=2, p=(2.0, 2.0))
        state = random_state(grid, k=2, seed=11)
        a = grid.symbol(1.5)
        k0, k1, _, _, _, _ = propagator_arrays(0.7, a)
        exact_u = k0 * state.u_hat + k1 * state.v_hat
        got = step(state, 0.7, params, grid, linear_only=True).u_hat
        num = math.sqrt(float(np.sum(np.abs(got - exact_u) ** 2)))
        den = math.sqrt(float(np.sum(np.abs(exact_u) ** 2)))
        assert num / den <= 1e-12

    def test_mass_mode_ode(self):
        # At xi = 0 the linear equation is u'' + u' = 0, so the mean
        # follows m(t) = m0 + (1 - e^(-t)) m1.
        grid = GridSpec(n=1, N=64, L=3.0)
        m0, m1 = 0.4, -0.7
        Nn = grid.N ** grid.n
        u_hat = np.zeros((2,) + grid.shape, dtype=complex)
        v_hat = np.zeros((2,) + grid.shape, dtype=complex)
        u_hat[:, 0] = m0 * Nn
        v_hat[:, 0] = m1 * Nn
        state = FieldState(t=0.0, u_hat=u_hat, v_hat=v_hat)
        for t in (0.3, 1.0, 4.0):
            new = step(state, t, PARAMS_34, grid, linear_only=True)
            got = norms(grid, new, 1.0)["mean"][0]
            assert got == pytest.approx(m0 + (1 - math.exp(-t)) * m1,
                                        abs=1e-14)


class TestNonlinearStep:
    def test_constant_field_rk4_oracle(self):
        # Constant fields collapse the PDE to u_l'' + u_l' = |u_{l-1}|^p_l.
        grid = GridSpec(n=1, N=8, L=1.0)
        params = SystemParams(n=1, sigma=1.0, k=2, p=(2.0, 3.0))
        u0 = np.array([0.3, 0.2])
        v0 = np.array([0.1, -0.05])
        Nn = grid.N ** grid.n
        u_hat = np.zeros((2,) + grid.shape, dtype=complex)
        v_hat = np.zeros((2,) + grid.shape, dtype=complex)
        u_hat[:, 0] = u0 * Nn
        v_hat[:, 0] = v0 * Nn
        state = FieldState(t=0.0, u_hat=u_hat, v_hat=v_hat)
        T, nsteps = 1.0, 200
        for _ in range(nsteps):
            state = step(state, T / nsteps, params, grid)

        def rhs(y):
            u, v = y[:2], y[2:]
            force = np.array(
                [abs(u[(l - 1) % 2]) ** params.p[l] for l in range(2)]
            )
            return np.concatenate([v, -v + force])

        y = np.concatenate([u0, v0])
        h = T / 20000
        for _ in range(20000):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        got = norms(grid, state, 1.0)["mean"]
        assert got[0] == pytest.approx(y[0], abs=2e-7)
        assert got[1] == pytest.approx(y[1], abs=2e-7)

    def test_second_order_self_convergence(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        data = gaussian_data(0.5, ((1.0, 0.3), (0.8, 0.0)))
        state0, _ = make_initial_data(grid, data, PARAMS_34.sigma)
        T = 1.0

        def final_u(dt):
            st = state0
            while st.t < T - 1e-12:
                st = step(st, min(dt, T - st.t), PARAMS_34, grid)
            return np.fft.ifftn(st.u_hat, axes=grid.spatial_axes).real

        ref = final_u(T / 512)
        errs = [
            float(np.max(np.abs(final_u(T / m) - ref)))
            for m in (16, 32, 64)
        ]
        r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
        assert 3.0 <= r1 <= 5.0
        assert 3.0 <= r2 <= 5.0

    def test_realness_and_symmetry_preserved(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        data = gaussian_data(0.4, ((1.0, 0.2), (0.6, -0.1)))
        state, _ = make_initial_data(grid, data, PARAMS_34.sigma)
        for _ in range(50):
            state = step(state, 0.05, PARAMS_34, grid)
        assert symmetry_defect(state) < 1e-12
        u = np.fft.ifftn(state.u_hat, axes=grid.spatial_axes)
        rel = float(np.max(np.abs(u.imag))) / float(np.max(np.abs(u.real)))
        assert rel < 1e-12

    def test_dealias_kills_high_products(self):
        # A pure mode at m0 > N/6 squares to 2 m0 > N/3, which the mask
        # must remove before it aliases.
        grid = GridSpec(n=1, N=64, L=math.pi)
        params = SystemParams(n=1, sigma=1.0, k=2, p=(2.0, 2.0))
        m0 = 14
        x = grid.axes()[0]
        u = np.zeros((2,) + grid.shape)
        u[0] = 1e-3 * np.cos(m0 * math.pi / grid.L * x)
        u[1] = 1e-3 * np.cos(m0 * math.pi / grid.L * x)
        axes = grid.spatial_axes
        state = FieldState(
            t=0.0,
            u_hat=np.fft.fftn(u, axes=axes),
            v_hat=np.zeros_like(np.fft.fftn(u, axes=axes)),
        )
        new = step(state, 0.1, params, grid)
        spec = np.abs(new.u_hat[0])
        # an unmasked |u|^2 product would deposit ~1e-9 here; all that
        # remains is FFT roundoff of the initial transform
        assert spec[2 * m0] <= 1e-14
        assert spec[grid.N - 2 * m0] <= 1e-14

    def test_step_guards(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        state, _ = make_initial_data(grid, gaussian_data(0.1),
                                     PARAMS_34.sigma)
        with pytest.raises(ValueError, match="dt"):
            step(state, 0.0, PARAMS_34, grid)
        flagged = FieldState(0.0, state.u_hat, state.v_hat, blown_up=True)
        with pytest.raises(BlowUpDetected):
            step(flagged, 0.1, PARAMS_34, grid)

    def test_threshold_triggers(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        state, _ = make_initial_data(grid, gaussian_data(0.5),
                                     PARAMS_34.sigma)
        with pytest.raises(BlowUpDetected) as exc:
            step(state, 0.1, PARAMS_34, grid, threshold=1e-6)
        assert exc.value.state.blown_up


class TestNorms:
    def test_parseval_l2(self):
        grid = GridSpec(n=1, N=128, L=7.0)
        state = random_state(grid, k=2, seed=5)
        u = np.fft.ifftn(state.u_hat, axes=grid.spatial_axes).real
        direct = math.sqrt(float(np.sum(u[0] ** 2)) * grid.cell_volume)
        assert norms(grid, state, 1.0)["l2"][0] == pytest.approx(
            direct, rel=1e-12
        )

    def test_hsigma_single_mode(self):
        grid = GridSpec(n=1, N=64, L=4.0)
        m = 3
        xi0 = math.pi / grid.L * m
        x = grid.axes()[0]
        u = np.zeros((1,) + grid.shape)
        u[0] = np.cos(xi0 * x)
        state = FieldState(
            t=0.0,
            u_hat=np.fft.fftn(u, axes=(1,)),
            v_hat=np.zeros_like(np.fft.fftn(u, axes=(1,))),
        )
        out = norms(grid, state, 1.5)
        assert out["hsigma"][0] == pytest.approx(
            xi0 ** 1.5 * out["l2"][0], rel=1e-12
        )
        assert out["l2"][0] == pytest.approx(math.sqrt(grid.L), rel=1e-12)

    def test_2d_parseval(self):
        grid = GridSpec(n=2, N=32, L=3.0)
        rng = np.random.default_rng(9)
        u = rng.normal(size=(1,) + grid.shape)
        state = FieldState(
            t=0.0,
            u_hat=np.fft.fftn(u, axes=(1, 2)),
            v_hat=np.zeros((1,) + grid.shape, dtype=complex),
        )
        direct = math.sqrt(float(np.sum(u ** 2)) * grid.cell_volume)
        assert norms(grid, state, 1.0)["l2"][0] == pytest.approx(
            direct, rel=1e-12
        )


class TestRun:
    def test_schedule_and_snapshots(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        res = run(PARAMS_34, grid, gaussian_data(0.01), t_end=2.0, dt=0.05,
                  outputs=12, snapshot_times=(0.0, 1.0, 2.0))
        assert res.times[0] == 0.0
        assert res.times[-1] == pytest.approx(2.0, abs=1e-12)
        assert np.all(np.diff(res.times) > 0)
        assert res.l2.shape == (2, len(res.times))
        assert len(res.snapshots) == 3
        assert [round(t, 9) for t, _ in res.snapshots] == [0.0, 1.0, 2.0]
        assert res.snapshots[0][1].shape == (2,) + grid.shape
        assert not res.blown_up
        assert res.blowup_time is None

    def test_deterministic(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        r1 = run(PARAMS_34, grid, gaussian_data(0.3), t_end=1.0, dt=0.02)
        r2 = run(PARAMS_34, grid, gaussian_data(0.3), t_end=1.0, dt=0.02)
        assert np.array_equal(r1.l2, r2.l2)
        assert np.array_equal(r1.hsigma, r2.hsigma)

    def test_xnorm_present_iff_decay_predicted(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        sup = run(PARAMS_34, grid, gaussian_data(0.01), t_end=1.0, dt=0.05)
        assert sup.xnorm is not None and sup.xnorm.shape == sup.l2.shape
        sub = run(PARAMS_22, grid, gaussian_data(0.01), t_end=1.0, dt=0.05)
        assert sub.xnorm is None

    def test_blowup_verdict_and_time(self):
        grid = GridSpec(n=1, N=256, L=40.0)
        data = gaussian_data(0.3, ((1.0, 1.0), (1.0, 1.0)))
        res = run(PARAMS_22, grid, data, t_end=100.0, dt=0.05)
        assert res.blown_up
        assert res.blowup_time is not None
        assert 5.0 < res.blowup_time < 25.0
        # history stops before the cap
        assert res.times[-1] < 100.0

    def test_blowup_time_stable_under_dt(self):
        grid = GridSpec(n=1, N=256, L=40.0)
        data = gaussian_data(0.3, ((1.0, 1.0), (1.0, 1.0)))
        coarse = run(PARAMS_22, grid, data, t_end=100.0, dt=0.1)
        fine = run(PARAMS_22, grid, data, t_end=100.0, dt=0.025)
        assert coarse.blowup_time == pytest.approx(fine.blowup_time,
                                                   rel=0.02)

    def test_adaptive_matches_fixed(self):
        grid = GridSpec(n=1, N=256, L=40.0)
        data = gaussian_data(0.3, ((1.0, 1.0), (1.0, 1.0)))
        adaptive = run(PARAMS_22, grid, data, t_end=100.0, dt=0.05,
                       dt_policy="adaptive")
        fixed = run(PARAMS_22, grid, data, t_end=100.0, dt=0.025)
        assert adaptive.blown_up
        assert adaptive.blowup_time == pytest.approx(fixed.blowup_time,
                                                     rel=0.05)

    def test_zero_data_stays_zero(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        res = run(PARAMS_34, grid, gaussian_data(0.0), t_end=1.0, dt=0.1)
        assert not res.blown_up
        assert float(np.max(res.sup)) == 0.0

    def test_argument_guards(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        with pytest.raises(ValueError, match="policy"):
            run(PARAMS_34, grid, gaussian_data(0.1), t_end=1.0, dt=0.1,
                dt_policy="frozen")
        with pytest.raises(ValueError, match="t_end"):
            run(PARAMS_34, grid, gaussian_data(0.1), t_end=0.0, dt=0.1)
        bad = InitialData(epsilon=0.1,
                          components=(ComponentData(amp0=1.0),))
        with pytest.raises(ValueError, match="components"):
            run(PARAMS_34, grid, bad, t_end=1.0, dt=0.1)

    def test_result_is_runresult(self):
        grid = GridSpec(n=1, N=64, L=10.0)
        res = run(PARAMS_34, grid, gaussian_data(0.01), t_end=0.5, dt=0.1)
        assert isinstance(res, RunResult)
        assert res.steps > 0
        assert res.data_report["data_norm"] > 0
