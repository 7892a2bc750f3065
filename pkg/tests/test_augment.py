import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import straight_mission
from leeway.augment import (
    AugmentConfig,
    AugmenterState,
    EstimationError,
    ForceSource,
    Horizon,
    adjust_speed,
    augmenter_tick,
    error_std,
    force_estimate,
    intermediate_waypoint,
)
from leeway.coverage import star_pattern
from leeway.displacement import (
    DisplacementModel,
    RelativeReading,
    absolute_to_relative,
    relative_to_absolute,
)
from leeway.forcefield import ForceSample, GpHyperparams, Source, UniformField, fit_gp
from leeway.geo import DomainError, LocalPoint, Pose, cross_track, to_path_frame
from leeway.mission import Mission, Waypoint
from leeway.scenarios import fit_map, sample_field, train_model
from leeway.vessel import VesselState, run_mission

ZERO_W = np.zeros((2, 4))
EAST_WP = Waypoint(LocalPoint(100, 0), 3.0)
ORIGIN = VesselState(Pose(LocalPoint(0, 0), 0.0))


def bias_model(ea, ec):
    w = np.zeros((2, 4))
    w[:, 3] = (ea, ec)
    return DisplacementModel(w)


def uniform_map(v, source):
    pts = [LocalPoint(x, y) for x in (-100, 0, 100) for y in (-100, 0, 100)]
    return fit_gp([ForceSample(p, v, source) for p in pts], GpHyperparams(1.0, 200.0, 0.01))


# --- config --------------------------------------------------------------------


def test_config_validation():
    for bad in (dict(gain=-1), dict(replan_period=0), dict(speed_bounds=(2, 1)),
                dict(max_offset=0), dict(significance=-1)):
        with pytest.raises(DomainError):
            AugmentConfig(**bad)
    with pytest.raises(DomainError):
        AugmentConfig(speed_bounds=(0.5, 6.0)).check_vessel(4.0)


# --- force_estimate ------------------------------------------------------------


def test_map_mode_uniform_wind():
    maps = (uniform_map((1.0, 0.0), Source.WIND), uniform_map((0.0, 0.0), Source.CURRENT))
    w, c = force_estimate(ORIGIN, ForceSource.MAP, maps=maps)
    assert w == pytest.approx((1.0, 0.0), abs=1e-3)
    assert c == pytest.approx((0.0, 0.0), abs=1e-3)


def test_live_mode_wind_dead_ahead():
    rs = [RelativeReading(2.0, 0.0, Source.WIND), RelativeReading(0.0, 0.0, Source.CURRENT)]
    w, c = force_estimate(ORIGIN, ForceSource.LIVE, readings=rs)
    assert w == pytest.approx((2.0, 0.0))
    assert c == pytest.approx((0.0, 0.0))


def test_missing_source_names_it():
    with pytest.raises(EstimationError, match="current"):
        force_estimate(ORIGIN, ForceSource.LIVE, readings=[RelativeReading(1.0, 0.0, Source.WIND)])
    with pytest.raises(EstimationError, match="map"):
        force_estimate(ORIGIN, ForceSource.MAP, maps=None)


def test_live_and_map_modes_agree_on_constant_field():
    rng = np.random.default_rng(5)
    wind, cur = (0.4, -1.1), (0.7, -0.3)
    samples = {Source.WIND: [], Source.CURRENT: []}
    for _ in range(30):
        pose = Pose(LocalPoint(*rng.uniform(-150, 150, 2)), rng.uniform(-math.pi, math.pi))
        gv = tuple(rng.uniform(-3, 3, 2))
        for src, v in ((Source.WIND, wind), (Source.CURRENT, cur)):
            r = absolute_to_relative(v, src, pose, gv)
            samples[src].append(ForceSample(pose.position, relative_to_absolute(r, pose, gv), src))
    maps = (fit_map(samples[Source.WIND]), fit_map(samples[Source.CURRENT]))
    state = VesselState(Pose(LocalPoint(20, -30), 1.0), 2.0, (1.0, 1.0))
    live = force_estimate(state, ForceSource.LIVE, readings=[
        absolute_to_relative(wind, Source.WIND, state.pose, state.ground_vel),
        absolute_to_relative(cur, Source.CURRENT, state.pose, state.ground_vel)])
    mapped = force_estimate(state, ForceSource.MAP, maps=maps)
    for a, b in zip(live, mapped):
        assert a == pytest.approx(b, abs=0.1)


# --- intermediate_waypoint -----------------------------------------------------


def test_zero_model_gives_true_waypoint():
    wp = intermediate_waypoint(EAST_WP, ORIGIN, ((1, 2), (3, 4)), DisplacementModel(ZERO_W),
                               AugmentConfig())
    assert wp == EAST_WP


def test_mirror_offset_perpendicular():
    wp = intermediate_waypoint(EAST_WP, ORIGIN, ((0, 0), (0, 0)), bias_model(0.0, 5.0),
                               AugmentConfig(), leg_start=LocalPoint(0, 0))
    assert (wp.position.x, wp.position.y) == pytest.approx((100.0, -5.0))
    assert wp.speed == EAST_WP.speed


def test_offset_clamped():
    wp = intermediate_waypoint(EAST_WP, ORIGIN, ((0, 0), (0, 0)), bias_model(0.0, 30.0),
                               AugmentConfig(max_offset=15.0), leg_start=LocalPoint(0, 0))
    assert math.hypot(wp.position.x - 100, wp.position.y) == pytest.approx(15.0)


def test_inside_acceptance_radius_returns_true_wp():
    s = VesselState(Pose(LocalPoint(99, 0), 0.0))
    assert intermediate_waypoint(EAST_WP, s, ((0, 0), (0, 0)), bias_model(0, 5),
                                 AugmentConfig()) == EAST_WP


def test_leg_horizon_scales_and_drops_along():
    cfg = AugmentConfig(horizon=Horizon.LEG, max_offset=1e6)
    wp = intermediate_waypoint(EAST_WP, ORIGIN, ((0, 0), (0, 0)), bias_model(2.0, 1.0), cfg,
                               leg_start=LocalPoint(0, 0))
    n = 100.0 / (3.0 * cfg.window)
    assert (wp.position.x, wp.position.y) == pytest.approx((100.0, -n))


@settings(max_examples=50)
@given(st.sampled_from([0, 45, 90, 135, 180, 225, 270, 315]), st.sampled_from([-1.0, 1.0]),
       st.floats(0.2, 2.0))
def test_offset_opposes_predicted_cross_error(deg, sign, k):
    # model trained on pure-cross displacement: e_cross = k * f_cross
    w = np.zeros((2, 4))
    w[1, 1] = k
    model = DisplacementModel(w)
    th = math.radians(deg)
    wp = Waypoint(LocalPoint(100 * math.cos(th), 100 * math.sin(th)), 3.0)
    cur = (-sign * math.sin(th), sign * math.cos(th))  # unit current to the left*sign
    inter = intermediate_waypoint(wp, ORIGIN, ((0, 0), cur), model, AugmentConfig(),
                                  leg_start=LocalPoint(0, 0))
    predicted = k * to_path_frame(*cur, th)[1]
    offset = cross_track(inter.position, LocalPoint(0, 0), wp.position)
    assert predicted != 0 and offset * predicted < 0


# --- adjust_speed --------------------------------------------------------------


def test_speed_law_examples():
    cfg = AugmentConfig(speed_beta=0.2, speed_bounds=(0.5, 4.0))
    assert adjust_speed(3.0, (0.0, 0.0), cfg) == 3.0
    assert adjust_speed(3.0, (-10.0, 0.0), cfg) == pytest.approx(3.6)
    assert adjust_speed(3.0, (-1000.0, 0.0), cfg) == 4.0
    assert adjust_speed(3.0, (1000.0, 0.0), cfg) == 0.5


# --- augmenter_tick ------------------------------------------------------------


def _live_readings():
    return [RelativeReading(0.0, 0.0, Source.WIND), RelativeReading(0.0, 0.0, Source.CURRENT)]


def test_cache_between_replans():
    aug = AugmenterState(bias_model(0.0, 5.0))
    a = augmenter_tick(aug, ORIGIN, EAST_WP, 0.0, _live_readings())
    moved = VesselState(Pose(LocalPoint(0.3, 0.4), 0.0))
    b = augmenter_tick(aug, moved, EAST_WP, 0.1, _live_readings())
    assert a is b


def test_target_change_replans_immediately():
    aug = AugmenterState(bias_model(0.0, 5.0))
    a = augmenter_tick(aug, ORIGIN, EAST_WP, 0.0, _live_readings())
    north = Waypoint(LocalPoint(0, 100), 3.0)
    b = augmenter_tick(aug, ORIGIN, north, 0.1, _live_readings())
    # the new leg runs from the previous target (100, 0); 5 m to its right
    assert b != a
    assert cross_track(b.position, EAST_WP.position, north.position) == pytest.approx(-5.0)
    assert math.hypot(b.position.x, b.position.y - 100) == pytest.approx(5.0)


def test_tick_propagates_estimation_error():
    aug = AugmenterState(bias_model(0.0, 5.0))
    with pytest.raises(EstimationError):
        augmenter_tick(aug, ORIGIN, EAST_WP, 0.0, [])


def test_significance_gate_drops_uncertain_prediction():
    model = DisplacementModel(np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0]]))
    rng = np.random.default_rng(0)
    weak = (0.0, 0.02)
    maps = (fit_map(sample_field(UniformField((0.0, 0.0)), Source.WIND, 50, 200, 0.1, rng)),
            fit_map(sample_field(UniformField(weak), Source.CURRENT, 50, 200, 0.1, rng)))
    sa, sc = error_std(model, (0.01, 0.01), 0.0)
    assert (sa, sc) == pytest.approx((0.0, 0.2))
    on = AugmenterState(model, AugmentConfig(source=ForceSource.MAP, significance=2.0), maps)
    assert on.tick(ORIGIN, EAST_WP, 0.0).position == EAST_WP.position
    off = AugmenterState(model, AugmentConfig(source=ForceSource.MAP), maps)
    assert off.tick(ORIGIN, EAST_WP, 0.0).position != EAST_WP.position


# --- end to end ------------------------------------------------------------------


def test_zero_gain_bit_identical():
    m = straight_mission(200.0, 3.0, heading=0.3)
    cur = UniformField((0.3, 1.0))
    model = bias_model(1.0, 4.0)
    base = run_mission(m, field_current=cur)
    aug = AugmenterState(model, AugmentConfig(gain=0.0))
    assert run_mission(m, field_current=cur, augmenter=aug).equals(base)


@pytest.fixture(scope="module")
def crosscurrent_run():
    cur = UniformField((0.0, 1.0))
    zero = UniformField((0.0, 0.0))
    model = train_model(zero, cur)
    m = Mission(LocalPoint(0, 0), tuple(w for mm in star_pattern(LocalPoint(0, 0), 150.0, 3.0,
                                                                headings_deg=[0.0])
                                        for w in mm.waypoints))
    cfg = AugmentConfig(source=ForceSource.LIVE)
    log = run_mission(m, field_current=cur, augmenter=AugmenterState(model, cfg))
    return m, log, cfg


def test_intermediate_lies_upstream(crosscurrent_run):
    m, log, _ = crosscurrent_run
    shifted = np.hypot(log.inter_x - log.target_x, log.inter_y - log.target_y) > 1e-9
    assert shifted.any()
    # current pushes north (+y): the intermediate sits south of the target
    assert np.all(log.inter_y[shifted] < log.target_y[shifted])


def test_offset_never_exceeds_max(crosscurrent_run):
    _, log, cfg = crosscurrent_run
    d = np.hypot(log.inter_x - log.target_x, log.inter_y - log.target_y)
    assert np.all(d <= cfg.max_offset + 1e-9)


def test_replan_cadence(crosscurrent_run):
    _, log, cfg = crosscurrent_run
    change = np.flatnonzero((np.diff(log.inter_x) != 0) | (np.diff(log.inter_y) != 0)) + 1
    same_leg = log.wp_index[change] == log.wp_index[change - 1]
    times = log.t[change[same_leg]]
    last = None
    for i, t in zip(change[same_leg], times):
        if last is not None and log.wp_index[i] == log.wp_index[last]:
            assert t - log.t[last] >= cfg.replan_period - 1e-9
        last = i
