"""Session construction, stepping protocol, and parameterization handling."""

import numpy as np
import pytest

from cabkit import (
    DivergenceError,
    DomainError,
    SamplerConfig,
    rectified_flow,
    ve,
)
from cabkit_bridge import ProtocolError, create_session


def _session(n_steps=8, order=2, gamma=0.2, merge=False, dim=2, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    return create_session(
        {"kind": "rf"},
        {"order": order, "gamma": gamma, "n_steps": n_steps, "terminal_merge": merge},
        rng.standard_normal(dim),
        **kwargs,
    )


class TestCreateSession:
    def test_exposes_evaluation_timesteps(self):
        session = _session(n_steps=8, gamma=0.2, merge=False)
        assert len(session.evaluation_times) == 8
        assert session.cursor == 0
        assert not session.done

    def test_merge_reduces_evaluations(self):
        session = _session(n_steps=8, merge=True)
        assert len(session.evaluation_times) == 7

    def test_identity_schedule_round_trips_rho(self):
        session = create_session(
            {"kind": "ve"},
            {"order": 2, "n_steps": 6, "terminal_merge": False},
            np.zeros(2),
            t_start=2.0,
            t_end=0.5,
        )
        assert session.rho_grid == pytest.approx(session.t_grid, abs=0.0)

    def test_invalid_gamma_rejected_at_construction(self):
        with pytest.raises(DomainError):
            _session(gamma=-1.0)

    def test_schedule_spec_validation(self):
        with pytest.raises(DomainError):
            create_session({"beta0": 0.1}, {"order": 2}, np.zeros(2))
        with pytest.raises(DomainError):
            create_session(3.5, {"order": 2}, np.zeros(2))

    def test_schedule_instance_accepted(self):
        session = create_session(ve(), SamplerConfig(order=2, n_steps=4),
                                 np.zeros(1), t_start=2.0, t_end=0.5)
        assert session.dimension == 1


class TestSteppingProtocol:
    def test_replay_rejected_without_corruption(self):
        session = _session(merge=False)
        out = np.zeros(session.dimension)
        session.step(0, out)
        with pytest.raises(ProtocolError, match="replayed"):
            session.step(0, out)
        next_x, done = session.step(1, out)
        assert session.cursor == 2 and not done

    def test_skip_rejected(self):
        session = _session()
        with pytest.raises(ProtocolError, match="skipped"):
            session.step(1, np.zeros(session.dimension))
        assert session.cursor == 0

    def test_premature_result_rejected(self):
        session = _session()
        with pytest.raises(ProtocolError):
            session.result()

    def test_step_after_finish_rejected(self):
        session = _session(n_steps=4, merge=False)
        out = np.zeros(session.dimension)
        for i in range(4):
            _, done = session.step(i, out)
        assert done and session.done
        with pytest.raises(ProtocolError):
            session.step(4, out)
        assert session.result() is not None

    def test_dimension_mismatch(self):
        session = _session(dim=2)
        with pytest.raises(ValueError):
            session.step(0, np.zeros(3))

    def test_non_finite_output(self):
        session = _session(dim=2)
        with pytest.raises(DivergenceError):
            session.step(0, np.array([np.nan, 0.0]))
        assert session.cursor == 0  # rejected before any state change


class TestArithmetic:
    def test_constant_noise_feed_matches_closed_form(self):
        session = _session(n_steps=8, order=3, gamma=0.75, merge=True, dim=3, seed=4)
        c = np.array([0.4, -0.1, 0.9])
        x0 = session.current_x.copy()
        sched = rectified_flow()
        y0 = x0 / sched.eval(session.t_grid[0]).s
        while not session.done:
            x_next, _ = session.step(session.cursor, c)
        rho = session.rho_grid
        y_final = y0 + (rho[-1] - rho[0]) * c
        s_final = sched.eval(session.t_grid[-1]).s
        assert session.result() == pytest.approx(s_final * y_final, rel=1e-12)

    def test_current_x_tracks_cursor(self):
        session = _session(n_steps=5, merge=False, dim=1, seed=2)
        seen = [session.current_x.copy()]
        while not session.done:
            x_next, _ = session.step(session.cursor, np.array([0.3]))
            if not session.done:
                assert session.current_x == pytest.approx(x_next, abs=0.0)
                seen.append(x_next)
        assert len(seen) == 5

    def test_float64_contiguous_boundary(self):
        session = _session(dim=2)
        x, _ = session.step(0, [0.25, -0.5])  # plain list accepted
        assert x.dtype == np.float64 and x.flags["C_CONTIGUOUS"]

    def test_accessors_refuse_finished_session(self):
        session = _session(n_steps=4, merge=False, dim=1)
        while not session.done:
            session.step(session.cursor, np.array([0.1]))
        with pytest.raises(ProtocolError):
            _ = session.current_x
        with pytest.raises(ProtocolError):
            _ = session.current_t


class TestParameterizations:
    def test_velocity_feed_matches_noise_feed(self):
        # Ground-truth noise field evaluated host-side in both forms.
        sched = rectified_flow()
        rng = np.random.default_rng(8)
        mat = 0.4 * rng.standard_normal((2, 2))

        def eps(x, t):
            return np.tanh(mat @ x + 0.3 * t)

        config = {"order": 2, "gamma": 0.4, "n_steps": 8, "terminal_merge": False}
        x0 = rng.standard_normal(2)
        noise_sess = create_session({"kind": "rf"}, config, x0)
        vel_sess = create_session({"kind": "rf"}, config, x0)
        while not noise_sess.done:
            i = noise_sess.cursor
            t = noise_sess.current_t
            vals = sched.eval(t)
            x_noise = noise_sess.current_x
            noise_sess.step(i, eps(x_noise, t))
            x_vel = vel_sess.current_x
            e = eps(x_vel, t)
            data_pred = (x_vel - vals.sigma * e) / vals.s
            velocity = vals.sdot * data_pred + vals.sigmadot * e
            vel_sess.step(i, velocity, parameterization="velocity")
        a, b = noise_sess.result(), vel_sess.result()
        assert b == pytest.approx(a, rel=1e-12)

    def test_data_feed_matches_noise_feed(self):
        sched = ve()
        rng = np.random.default_rng(9)

        def eps(x, t):
            return np.tanh(0.2 * x + 0.1 * t)

        config = {"order": 3, "gamma": 0.25, "n_steps": 6, "terminal_merge": False}
        kwargs = {"t_start": 3.0, "t_end": 0.5}
        x0 = rng.standard_normal(2)
        noise_sess = create_session({"kind": "ve"}, config, x0, **kwargs)
        data_sess = create_session({"kind": "ve"}, config, x0, **kwargs)
        while not noise_sess.done:
            i, t = noise_sess.cursor, noise_sess.current_t
            vals = sched.eval(t)
            noise_sess.step(i, eps(noise_sess.current_x, t))
            x = data_sess.current_x
            data_sess.step(i, (x - vals.sigma * eps(x, t)) / vals.s,
                           parameterization="data")
        assert data_sess.result() == pytest.approx(noise_sess.result(), rel=1e-12)

    def test_unknown_parameterization(self):
        session = _session()
        with pytest.raises(DomainError):
            session.step(0, np.zeros(2), parameterization="score")
