"""
Model tests
Rolling disk, moving-wall billiard and floor particle: impact maps, momentum rules, validation and chart agreement.
"""

import logging

import numpy as np
import pytest

from hybrid.flow import run_hybrid_flow
from hybrid.transitions import apply_impact, newtonian_impact
from mechanics.errors import ChartSingularityError, ScenarioValidationError
from mechanics.states import TangentState
from mechanics.system import kinetic_energy
from models import BilliardParams, DiskParams, build_billiard, build_model, build_rolling_disk
from models.billiard import WALL, probe_wall
from models.disk import HIGH_WALL, LOW_WALL, rolling_impact
from models.disk import probe_wall as probe_disk_wall


def constant_wall_billiard():
    return build_billiard(BilliardParams(f=lambda t: 1.0, fdot=lambda t: 0.0))


# =============================================================================
# ROLLING DISK
# =============================================================================


def test_disk_impact_example():
    """R=1, k^2=1/2, e=1: (1, -1, 0) -> (2/3, 1, 2/3)"""
    post = rolling_impact(DiskParams(), 1.0, 1.0, -1.0, 0.0)
    assert np.allclose(post, [2.0 / 3.0, 1.0, 2.0 / 3.0], atol=1e-15), f"Got {post}"


def test_disk_impact_keeps_rolling_states():
    post = rolling_impact(DiskParams(), 1.0, 0.6, -0.8, 0.6)
    assert np.allclose(post, [0.6, 0.8, 0.6], atol=1e-15), f"Got {post}"


def test_disk_default_initial_state_rolls():
    bundle = build_rolling_disk(DiskParams())
    s = bundle.default_initial
    assert s.v[0] == pytest.approx(bundle.params.R * s.v[2])
    assert bundle.params.R < s.q[1] < bundle.params.top(0.0)


def test_disk_impact_never_gains_energy(rng):
    bundle = build_rolling_disk(DiskParams(e=0.7))
    sys = bundle.cartesian.sys
    for _ in range(200):
        pre = TangentState(0.0, [rng.normal(), 1.0, rng.normal()], [rng.normal(), -abs(rng.normal()), rng.normal()])
        post = apply_impact(bundle.cartesian, LOW_WALL, pre)
        assert kinetic_energy(sys, post) <= kinetic_energy(sys, pre) * (1.0 + 1e-12), "Impact created energy"
        assert post.v[0] == pytest.approx(bundle.params.R * post.v[2], abs=1e-12), "Post state must roll"


def test_disk_elastic_impact_conserves_energy_on_rolling_set(rng):
    bundle = build_rolling_disk(DiskParams(e=1.0))
    sys = bundle.cartesian.sys
    for _ in range(50):
        td = rng.normal()
        pre = TangentState(0.0, [rng.normal(), 1.0, 0.0], [td, -abs(rng.normal()), td])
        post = apply_impact(bundle.cartesian, LOW_WALL, pre)
        assert kinetic_energy(sys, post) == pytest.approx(kinetic_energy(sys, pre), rel=1e-12)


@pytest.mark.parametrize("e", [1.0, 0.6, 0.0])
@pytest.mark.parametrize("label", [LOW_WALL, HIGH_WALL])
def test_disk_momentum_rule_matches_impact_on_rolling_set(label, e, rng):
    p = DiskParams(e=e)
    bundle = build_rolling_disk(p)
    y_w = p.R if label == LOW_WALL else p.top(0.0)
    sign = -1.0 if label == LOW_WALL else 1.0
    for _ in range(50):
        td = rng.normal()
        pre = TangentState(0.0, [rng.normal(), y_w, rng.normal()], [p.R * td, sign * abs(rng.normal()), td])
        post = apply_impact(bundle.cartesian, label, pre)
        expected = bundle.momentum_rule(label, 0.0, bundle.cartesian_momentum(pre))
        assert np.allclose(bundle.cartesian_momentum(post), expected, rtol=1e-12, atol=1e-12), f"{label}, e={e}"


def test_disk_polar_impact_matches_cartesian(rng):
    bundle = build_rolling_disk(DiskParams(e=0.8))
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0)
        pre = TangentState(0.0, [x, 1.0, 0.3], [rng.normal(), -abs(rng.normal()), rng.normal()])
        cart = apply_impact(bundle.cartesian, LOW_WALL, pre)
        polar = apply_impact(bundle.polar, LOW_WALL, bundle.to_polar(pre))
        assert np.allclose(bundle.to_cartesian(polar).v, cart.v, rtol=1e-10, atol=1e-12)


def test_disk_parameter_validation():
    with pytest.raises(ScenarioValidationError) as info:
        DiskParams(m=0.0)
    assert info.value.field == "model.m"
    with pytest.raises(ScenarioValidationError):
        DiskParams(e=1.5)
    with pytest.raises(ScenarioValidationError):
        DiskParams(alpha=1.0)
    with pytest.raises(ScenarioValidationError):
        DiskParams(wall_motion=lambda t: 4.0)


def test_disk_gyration_radius_defaults_to_homogeneous_disk():
    assert DiskParams(R=2.0).k == pytest.approx(np.sqrt(2.0))


def test_moving_disk_wall_must_not_drop():
    p = DiskParams(wall_motion=lambda t: 4.0 - t, wall_rate=lambda t: -1.0)
    with pytest.raises(ScenarioValidationError):
        probe_disk_wall(p, 2.0)
    probe_disk_wall(DiskParams(wall_speed=0.05), 10.0)


def test_moving_disk_forces_elastic_impacts(caplog):
    with caplog.at_level(logging.WARNING):
        bundle = build_rolling_disk(DiskParams(wall_speed=0.05, e=0.5))
    assert "e=1" in caplog.text
    pre = TangentState(0.0, [0.0, 1.0, 0.0], [0.0, -1.0, 0.0])
    assert apply_impact(bundle.cartesian, LOW_WALL, pre).v[1] == pytest.approx(1.0)
    assert bundle.params.top(2.0) == pytest.approx(3.1)


# =============================================================================
# BILLIARD
# =============================================================================


def test_billiard_fixed_wall_is_newtonian_reflection(rng):
    bundle = constant_wall_billiard()
    hs = bundle.cartesian
    g, _ = hs.transition(WALL)
    for _ in range(100):
        phi = rng.uniform(-np.pi, np.pi)
        q = np.array([np.cos(phi), np.sin(phi)])
        v = rng.normal(size=2)
        if v @ q < 0:
            v = -v
        t = rng.uniform(0.0, 3.0)
        pre = TangentState(t, q, v)
        custom = apply_impact(hs, WALL, pre)
        newton = newtonian_impact(hs.sys, g, 1.0, pre)
        residual = np.max(np.abs(custom.v - newton.v))
        assert residual <= 1e-12, f"Moving-wall map differs from reflection by {residual:.3e}"


def test_billiard_impact_keeps_angular_velocity_and_reverses_approach(rng):
    p = BilliardParams()
    hs = build_billiard(p).cartesian
    g, _ = hs.transition(WALL)
    for _ in range(50):
        t = rng.uniform(0.0, 5.0)
        phi = rng.uniform(-np.pi, np.pi)
        q = np.sqrt(p.wall(t)) * np.array([np.cos(phi), np.sin(phi)])
        v = rng.normal(size=2)
        pre = TangentState(t, q, v)
        if g.approach_value(t, q, v) >= 0:
            continue
        post = apply_impact(hs, WALL, pre)
        assert q[0] * post.v[1] - q[1] * post.v[0] == pytest.approx(q[0] * v[1] - q[1] * v[0], abs=1e-12)
        assert g.approach_value(t, q, post.v) == pytest.approx(-g.approach_value(t, q, v), rel=1e-10, abs=1e-12)


def test_billiard_momentum_rule_is_identity(rng):
    bundle = build_billiard(BilliardParams())
    mu = rng.normal(size=1)
    assert np.array_equal(bundle.momentum_rule(WALL, 1.0, mu), mu)


def test_billiard_wall_probe(caplog):
    p = BilliardParams()
    with pytest.raises(ScenarioValidationError) as info:
        probe_wall(p, 7.0)
    assert info.value.field == "t_end"
    with caplog.at_level(logging.WARNING):
        probe_wall(p, 5.0)
    assert "not increasing" in caplog.text


def test_billiard_parameter_validation():
    with pytest.raises(ScenarioValidationError):
        BilliardParams(c=-1.0)
    with pytest.raises(ScenarioValidationError):
        BilliardParams(f=lambda t: 1.0)


# =============================================================================
# REGISTRY AND CHARTS
# =============================================================================


def test_build_model_registry():
    assert build_model("billiard", {"c": 0.1}).params.c == 0.1
    assert build_model("disk_moving").params.wall_speed == pytest.approx(0.05)
    assert build_model("particle", {"e": 0.0}).name == "particle"
    with pytest.raises(ScenarioValidationError) as info:
        build_model("pendulum")
    assert info.value.field == "model.name"
    with pytest.raises(ScenarioValidationError) as info:
        build_model("disk_fixed", {"wall_speed": 0.1})
    assert info.value.field == "model.wall_speed"
    with pytest.raises(ScenarioValidationError):
        build_model("disk_moving", {"wall_speed": 0.0})
    with pytest.raises(ScenarioValidationError):
        build_model("billiard", {"c": "fast"})


def test_polar_chart_rejects_origin():
    bundle = build_billiard(BilliardParams())
    with pytest.raises(ChartSingularityError):
        bundle.to_polar(TangentState(0.0, [0.0, 0.0], [1.0, 0.0]))


@pytest.mark.parametrize("model", ["billiard", "disk"])
def test_cartesian_and_polar_runs_agree(model, cfg):
    if model == "billiard":
        bundle, t_end = build_billiard(BilliardParams(c=0.05), t_end=2.0), 2.0
    else:
        bundle, t_end = build_rolling_disk(DiskParams(c=0.01)), 5.0
    cart = run_hybrid_flow(bundle.cartesian, bundle.default_initial, t_end, cfg)
    polar = run_hybrid_flow(bundle.polar, bundle.to_polar(bundle.default_initial), t_end, cfg)
    assert len(cart.events) == len(polar.events) >= 1
    assert np.allclose(cart.impact_times, polar.impact_times, atol=1e-7), f"{cart.impact_times} vs {polar.impact_times}"
    assert [ev.guard_label for ev in cart.events] == [ev.guard_label for ev in polar.events]
    end = bundle.to_cartesian(polar.arcs[-1].end_state)
    assert np.allclose(end.q, cart.arcs[-1].end_state.q, atol=1e-6)
    assert np.allclose(end.v, cart.arcs[-1].end_state.v, atol=1e-6)
