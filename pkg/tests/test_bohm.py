import cmath
import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eraser_sim import ConfigError, DetectorId, DomainError, NodeError, PhaseUndefined, StepError
from eraser_sim import bohm, detection, wave
from eraser_sim.bohm import Configuration, Timeline

nonneg = st.floats(0, 10)
angle = st.floats(-20, 20)


# -- polar form -------------------------------------------------------------------

@pytest.mark.parametrize("a,prev,R,S", [(1, None, 1, 0), (1j, 0.0, 1, math.pi / 2), (-1, 3.0, 1, math.pi)])
def test_polar_decompose_examples(a, prev, R, S):
    p = bohm.polar_decompose(a, prev)
    assert p.R == pytest.approx(R) and p.S == pytest.approx(S)


def test_polar_decompose_branch():
    # -1 seen from just below -pi stays on the -pi branch
    assert bohm.polar_decompose(-1, -3.0).S == pytest.approx(-math.pi)
    assert bohm.polar_decompose(1, 6.0).S == pytest.approx(2 * math.pi)


def test_polar_decompose_node():
    with pytest.raises(PhaseUndefined):
        bohm.polar_decompose(1e-16)
    p = bohm.polar_decompose(0, need_phase=False)
    assert p.R == 0 and math.isnan(p.S)


@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6, allow_nan=False, allow_infinity=False),
       st.one_of(st.none(), st.floats(-100, 100)))
def test_polar_reproduces_value(a, prev):
    p = bohm.polar_decompose(a, prev)
    assert abs(p.value() - a) <= 1e-12 * max(1.0, abs(a))
    if prev is not None:
        assert abs(p.S - prev) <= math.pi + 1e-12


def test_amplitude_sq_examples():
    assert bohm.two_particle_amplitude_sq(2, 0.3, 1.5, 0.1, 7, 1, 0, 2) == pytest.approx(9)
    assert bohm.two_particle_amplitude_sq(1, 0, 1, 0, 1, 0, 1, 0) == pytest.approx(4)
    assert bohm.two_particle_amplitude_sq(1, 0, 1, 0, 1, math.pi, 1, 0) == pytest.approx(0, abs=1e-15)


def test_phase_examples():
    assert bohm.two_particle_phase(2, 0.3, 1.5, 0.1, 7, 1, 0, 2) == pytest.approx(0.4)
    assert bohm.two_particle_phase(1, 0, 1, 0, 1, 0, 1, math.pi / 2) == pytest.approx(math.pi / 4)
    with pytest.raises(PhaseUndefined):
        bohm.two_particle_phase(0, 0, 1, 0, 1, 0, 0, 0)


def _summed(R1, S1, R1p, S1p, R2, S2, R2p, S2p):
    return R1 * R1p * cmath.exp(1j * (S1 + S1p)) + R2 * R2p * cmath.exp(1j * (S2 + S2p))


def test_phase_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        R = rng.uniform(0.01, 3, 4)
        S = rng.uniform(-10, 10, 4)
        args = (R[0], S[0], R[1], S[1], R[2], S[2], R[3], S[3])
        z = _summed(*args)
        if abs(z) < 1e-6:
            continue
        d = bohm.two_particle_phase(*args) - cmath.phase(z)
        assert abs(bohm.unwrap_to(d, 0.0)) < 1e-10


@given(st.tuples(nonneg, angle, nonneg, angle, nonneg, angle, nonneg, angle))
def test_amplitude_sq_law_of_cosines(args):
    z = _summed(*args)
    assert bohm.two_particle_amplitude_sq(*args) == pytest.approx(abs(z) ** 2, rel=1e-9, abs=1e-9)


def test_phase_vectorized():
    R = np.ones(3)
    S = np.array([0.0, 1.0, 2.0])
    out = bohm.two_particle_phase(R, S, R, 0 * S, 0 * R, S, R, S)
    assert np.allclose(out, S)


# -- guidance velocity ----------------------------------------------------------------

def test_which_path_velocity_is_radial(g):
    for x, y in ((1.0, 0.0), (10.0, 7.0), (50.0, -20.0)):
        for branch, ys in (("upper", g.slit_upper_y), ("lower", g.slit_lower_y)):
            v = bohm.guidance_velocity(Configuration((x, y), branch), g)
            r = math.hypot(x, y - ys)
            assert np.allclose(v, g.wave_number * np.array([x, y - ys]) / r, rtol=1e-12)


def _fd_velocity(x, y, g, coeffs, h=1e-5):
    S = lambda a, b: bohm.effective_phase(a, b, g, coeffs)
    return np.array([bohm.unwrap_to(S(x + h, y) - S(x - h, y), 0) / (2 * h),
                     bohm.unwrap_to(S(x, y + h) - S(x, y - h), 0) / (2 * h)])


@pytest.mark.parametrize("stage", ["post_eraser_to_D1", "post_eraser_to_D2"])
def test_eraser_velocity_finite_differences(g, stage):
    coeffs = bohm.wave_coefficients("upper", stage)
    for x, y in ((25.0, 0.0), (5.0, 0.0), (40.0, 3.3), (2.0, -1.0)):
        v = bohm.guidance_velocity(Configuration((x, y), "upper", stage), g)
        ref = _fd_velocity(x, y, g, coeffs)
        assert np.linalg.norm(v - ref) < 1e-6 * np.linalg.norm(ref)


def test_regime_argument_overrides_stage(g):
    c = Configuration((20.0, 4.0), "lower")
    assert np.allclose(bohm.guidance_velocity(c, g, regime="post_eraser_to_D1"),
                       bohm.guidance_velocity(Configuration((20.0, 4.0), "lower", "post_eraser_to_D1"), g))


def test_dark_fringe_flow_points_to_axis(g):
    # Near each minimum the phase winds with the dominant (nearer) slit wave,
    # so the excess transverse velocity over the mean radial flow points toward the axis.
    L = g.screen_distance
    y = np.linspace(-25, 25, 20001)
    for d, coeffs in (("D1", (1j, -1)), ("D2", (-1, 1j))):
        dens = wave.conditional_density(d, y, g)
        vx, vy = bohm._velocity(L, y, *coeffs, g)[:2]
        excess = vy - vx * y / L
        mins = [i for i in range(1, len(y) - 1) if dens[i] < dens[i - 1] and dens[i] < dens[i + 1]]
        assert len(mins) >= 2
        for i in mins:
            assert np.sign(excess[i]) == -np.sign(y[i])
            assert abs(excess[i]) > 1.0


def test_velocity_domain_and_node(g, monkeypatch):
    with pytest.raises(DomainError):
        bohm.guidance_velocity(Configuration((0.0, 1.0), "upper"), g)
    # psi1 - psi2 vanishes on the symmetry axis
    monkeypatch.setattr(bohm, "wave_coefficients", lambda b, s: (1, -1))
    with pytest.raises(NodeError):
        bohm.guidance_velocity(Configuration((10.0, 0.0), "upper"), g)


def test_configuration_validation():
    with pytest.raises(ConfigError):
        Configuration((1.0, 0.0), "middle")
    with pytest.raises(ConfigError):
        Configuration((1.0, 0.0), "upper", "halfway")


def test_eraser_outcome_probability(g):
    y = np.linspace(-25, 25, 101)
    p = bohm.eraser_outcome_probability(g.screen_distance, y, g)
    ref = wave.conditional_density("D1", y, g) / (wave.conditional_density("D1", y, g)
                                                  + wave.conditional_density("D2", y, g))
    assert np.allclose(p, ref, rtol=1e-12)
    assert bohm.eraser_outcome_probability(10.0, 0.0, g) == pytest.approx(0.5)


def test_velocity_gradient_norm_single_slit(g):
    x, y = np.array([1.0, 7.0, 30.0]), np.array([0.0, 5.0, -9.0])
    r = np.hypot(x, y - g.slit_upper_y)
    assert np.allclose(bohm._velocity_gradient_norm(x, y, 1, 0, g), g.wave_number / r, rtol=1e-12)


# -- single trajectories ------------------------------------------------------------------

def _start(g, branch="upper", angle=0.2):
    return Configuration(bohm.launch_point(g, branch, angle), branch)


def test_straight_line_when_eraser_after_screen(g):
    tr = bohm.integrate_trajectory(_start(g, angle=0.3), g, Timeline(g.flight_time + g.idler_delay))
    ang = np.arctan2(tr.positions[:, 1] - g.slit_upper_y, tr.positions[:, 0])
    assert np.ptp(ang) < 1e-12
    assert tr.regime_switch_time is None
    assert set(tr.stages) == {0}
    assert tr.positions[-1, 0] == pytest.approx(g.screen_distance, abs=1e-12)
    assert tr.idler_outcome in (DetectorId.D1, DetectorId.D2)


def test_wiggly_when_eraser_first(g):
    tr = bohm.integrate_trajectory(_start(g, angle=0.1), g, Timeline(0.0))
    assert tr.regime_switch_time == 0.0
    assert tr.stages[0] in (1, 2) and len(set(tr.stages)) == 1
    ang = np.arctan2(tr.positions[:, 1] - g.slit_upper_y, tr.positions[:, 0])
    assert np.ptp(ang) > 1e-3


def test_one_kink_at_switch(g):
    t_sw = 0.4 * g.flight_time
    tr = bohm.integrate_trajectory(_start(g, angle=-0.05), g, Timeline(t_sw), u=0.1)
    assert tr.regime_switch_time == t_sw
    assert np.all(np.diff(tr.times) > 0)
    assert np.all(np.diff(tr.stages) >= 0)
    assert np.count_nonzero(np.diff(tr.stages)) == 1
    i = int(np.flatnonzero(np.diff(tr.stages))[0]) + 1
    assert tr.times[i] == t_sw
    # velocity jumps at the switch point: same position, two guiding waves
    c = list(tr.configurations())[i]
    before = bohm.guidance_velocity(c, g, regime="pre_eraser")
    after = bohm.guidance_velocity(c, g)
    assert np.linalg.norm(after - before) > 1e-3
    # straight before the switch
    pre = tr.positions[: i + 1]
    ang = np.arctan2(pre[:, 1] - g.slit_upper_y, pre[:, 0])
    assert np.ptp(ang) < 1e-12


def test_outcome_follows_draw(g):
    t_sw = 0.5 * g.flight_time
    lo = bohm.integrate_trajectory(_start(g), g, Timeline(t_sw), u=0.0)
    hi = bohm.integrate_trajectory(_start(g), g, Timeline(t_sw), u=0.999999)
    assert lo.idler_outcome is DetectorId.D1 and hi.idler_outcome is DetectorId.D2


def test_mirrors_in_stays_which_path(g):
    gm = g.with_mirrors(True)
    tr = bohm.integrate_trajectory(_start(gm, "lower", 0.2), gm, Timeline(0.3 * g.flight_time))
    assert tr.idler_outcome is DetectorId.D3
    assert set(tr.stages) == {0, 3}
    ang = np.arctan2(tr.positions[:, 1] - g.slit_lower_y, tr.positions[:, 0])
    assert np.ptp(ang) < 1e-12


def test_restart_reproduces_path(g):
    tl = Timeline(0.5 * g.flight_time)
    tr = bohm.integrate_trajectory(_start(g, angle=-0.4), g, tl, u=0.7)
    for k in (len(tr.times) // 4, len(tr.times) // 2):
        again = bohm.integrate_trajectory(list(tr.configurations())[k], g, tl, u=0.7)
        assert np.max(np.abs(again.positions[-1] - tr.positions[-1])) < 1e-8


def test_step_and_dt_errors(g):
    with pytest.raises(StepError):
        bohm.integrate_trajectory(_start(g), g, Timeline(0.0), dt=1.0)
    with pytest.raises(ConfigError):
        bohm.integrate_trajectory(_start(g), g, Timeline(0.0), dt=0.0)


def test_which_path_weight_formula(g):
    # straight radial flight: weight = r0 / (r cos theta) at the screen
    ens = bohm.sample_ensemble(40, g, Timeline(math.inf), seed=4)
    r0 = bohm.LAUNCH_RADIUS * g.wavelength
    for tr in ens.trajectories:
        if not np.isfinite(tr.weight):
            continue
        ys = g.slit_upper_y if tr.idler_branch == "upper" else g.slit_lower_y
        x, y = tr.endpoint
        r = math.hypot(x, y - ys)
        assert tr.weight * r * (x / r) == pytest.approx(r0, rel=1e-6)


# -- ensembles ------------------------------------------------------------------------

def test_ensemble_layout_and_determinism(g):
    a = bohm.sample_ensemble(30, g, Timeline(0.5 * g.flight_time), seed=8)
    b = bohm.sample_ensemble(30, g, Timeline(0.5 * g.flight_time), seed=8)
    assert [t.idler_branch for t in a.trajectories] == ["upper", "lower"] * 15
    assert np.array_equal(a.endpoints(), b.endpoints())
    assert np.array_equal(a.weights(), b.weights(), equal_nan=True)
    assert a.outcomes() == b.outcomes()
    angles = np.array([t.launch_angle for t in a.trajectories])
    assert np.all(np.abs(angles) < math.pi / 2)
    assert a.nodes_resampled == 0
    with pytest.raises(ConfigError):
        bohm.sample_ensemble(0, g, Timeline(0.0), seed=1)


def test_past_immutability(g):
    t_sw = 0.5 * g.flight_time
    a = bohm.sample_ensemble(20, g, Timeline(t_sw), seed=3, record_every=1)
    b = bohm.sample_ensemble(20, g, Timeline(math.inf), seed=3, record_every=1)
    for ta, tb in zip(a.trajectories, b.trajectories):
        pre = ta.times < t_sw
        k = int(pre.sum())
        assert k > 0
        assert np.array_equal(ta.times[pre], tb.times[:k])
        assert np.array_equal(ta.positions[pre], tb.positions[:k])


def test_default_recording_keeps_key_points(g):
    ens = bohm.sample_ensemble(6, g, Timeline(0.5 * g.flight_time), seed=2)
    for tr in ens.trajectories:
        assert len(tr.times) == 3  # launch, switch, end
        assert tr.times[1] == tr.regime_switch_time


def test_halving_dt_converges(g):
    for tl in (Timeline(0.0), Timeline(0.5 * g.flight_time)):
        a = bohm.sample_ensemble(40, g, tl, seed=12)
        b = bohm.sample_ensemble(40, g, tl, seed=12, dt=bohm.default_dt(g) / 2)
        ok = np.isfinite(a.weights()) & np.isfinite(b.weights())
        assert np.max(np.abs(a.endpoints() - b.endpoints())[ok]) < 1e-4


def test_small_ensemble_tracks_clump(g):
    # coarse sanity check; the 10^4 comparison lives in the acceptance suite
    ens = bohm.sample_ensemble(2000, g, Timeline(0.0), seed=6)
    edges = np.linspace(-25, 25, 11)
    ref = detection.expected_bin_probabilities(g, edges)
    assert np.abs(ens.endpoint_histogram(edges) - ref).sum() < 0.05
    d1 = [o for o in ens.outcomes() if o is DetectorId.D1]
    assert 0.4 < len(d1) / len(ens) < 0.6


def test_mirrors_in_ensemble(g):
    gm = g.with_mirrors(True)
    ens = bohm.sample_ensemble(20, gm, Timeline(0.0), seed=1)
    for tr in ens.trajectories:
        assert tr.idler_outcome is (DetectorId.D4 if tr.idler_branch == "upper" else DetectorId.D3)


def test_exports(tmp_path, g):
    ens = bohm.sample_ensemble(4, g, Timeline(0.5 * g.flight_time), seed=1, record_every=50)
    p = tmp_path / "t.csv"
    bohm.write_trajectories_csv(p, ens.trajectories)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["traj_id", "t", "x", "y", "regime"]
    assert {r[0] for r in rows[1:]} == {"0", "1", "2", "3"}
    assert {r[4] for r in rows[1:]} <= {"which_path", "eraser_D1", "eraser_D2"}
    s = tmp_path / "s.json"
    bohm.write_ensemble_summary(s, ens, g, bins=10)
    data = json.loads(s.read_text())
    assert data["n"] == 4 and data["nodes_resampled"] == 0
    assert len(data["endpoint_histogram"]["bin_edges"]) == 11
    assert len(data["endpoint_histogram"]["weights"]["all"]) == 10
