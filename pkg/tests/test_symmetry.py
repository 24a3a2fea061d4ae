"""
Symmetry tests
Momentum maps, Routh reduction, reconstruction, impact classification and symmetry checks.
"""

import numpy as np
import pytest

from hybrid.flow import INTEGRATION_FAILURE, run_hybrid_flow
from hybrid.transitions import Guard, HybridSystem, ImpactLaw
from mechanics.errors import CyclicStructureError, HybridSimError, RegularityError
from mechanics.numerics import NumericsConfig, central_derivative, central_gradient
from mechanics.states import TangentState
from mechanics.system import MechanicalSystem, acceleration, legendre_forward
from models import BilliardParams, DiskParams, build_billiard, build_rolling_disk
from symmetry.momentum import (
    GENERALIZED,
    HYBRID,
    NEITHER,
    CyclicStructure,
    annotate_momentum,
    check_hybrid_constant,
    classify_momentum_map,
    isotropy_preserved,
    momentum_map,
    validate_cyclic_structure,
)
from symmetry.noether import check_symmetry, check_symmetry_hamiltonian
from symmetry.routh import reconstruct, reduced_field, routh_reduce, run_reduced_hybrid_flow


def coupled_system(damping=0.1):
    """Shape x, cyclic theta, mass coupling 0.3 x between them and damping on x only."""
    return MechanicalSystem(
        n=2,
        mass=lambda t, q: np.array([[1.0 + q[0] ** 2, 0.3 * q[0]], [0.3 * q[0], 2.0]]),
        potential=lambda t, q: 0.5 * q[0] ** 2,
        force=lambda t, q, v: np.array([damping * v[0], 0.0]),
        name="coupled",
    )


# =============================================================================
# MOMENTUM MAPS
# =============================================================================


def test_cyclic_structure_complement_and_validation():
    cyc = CyclicStructure(3, (1, 2))
    assert cyc.shape_indices == (0,)
    assert np.array_equal(cyc.assemble(np.array([5.0]), np.array([1.0, 2.0])), [5.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        CyclicStructure(3, (1,), (0, 1))
    with pytest.raises(ValueError):
        CyclicStructure(3, ())


def test_disk_momentum_map_example():
    """m=1, k=1, r=2, theta_dot=0.5, vartheta_dot=3 -> (m r^2 theta_dot, m k^2 vartheta_dot) = (2, 3)"""
    bundle = build_rolling_disk(DiskParams(m=1.0, R=1.0, k=1.0))
    mu = momentum_map(bundle.polar.sys, bundle.cyclic, TangentState(0.0, [2.0, 0.3, 0.0], [0.7, 0.5, 3.0])).mu
    assert np.allclose(mu, [2.0, 3.0]), f"Expected (2, 3), got {mu}"


def test_billiard_momentum_map_at_start_and_rest():
    bundle = build_billiard(BilliardParams())
    s = TangentState(0.0, [0.5, 1.0], [0.2, -3.0])
    assert momentum_map(bundle.polar.sys, bundle.cyclic, s).mu[0] == pytest.approx(0.25 * -3.0)
    rest = TangentState(0.0, [0.5, 1.0], [0.0, 0.0])
    assert np.array_equal(momentum_map(bundle.polar.sys, bundle.cyclic, rest).mu, [0.0])


def test_cyclic_structure_depends_on_chart():
    bundle = build_rolling_disk(DiskParams())
    reference = bundle.to_polar(bundle.default_initial)
    validate_cyclic_structure(bundle.polar.sys, bundle.cyclic, reference)
    # theta is not cyclic in the Cartesian chart
    with pytest.raises(HybridSimError):
        validate_cyclic_structure(bundle.cartesian.sys, CyclicStructure(3, (1,)), bundle.default_initial)


def floor_bump_system():
    """Height y over a floor with free phase theta; below y = 0.1 the potential picks up a cos(theta) bump."""
    sys = MechanicalSystem(
        n=2,
        mass=lambda t, q: np.eye(2),
        potential=lambda t, q: q[0] + max(0.0, 0.1 - q[0]) ** 3 * np.cos(q[1]),
        name="floor_bump",
    )
    floor = Guard(label="floor", h=lambda t, q: q[0], h_dq=lambda t, q: np.array([1.0, 0.0]), h_dt=lambda t, q: 0.0)
    return HybridSystem(sys, ((floor, ImpactLaw.newtonian(1.0)),))


def test_isotropy_across_impacts():
    bundle = build_billiard(BilliardParams())
    sys, cyc = bundle.polar.sys, bundle.cyclic
    pre = TangentState(0.0, [0.9, 0.4], [1.0, 0.5])
    assert isotropy_preserved(sys, cyc, pre, TangentState(0.0, [0.9, 0.4], [-1.0, 0.5]))
    assert not isotropy_preserved(sys, cyc, pre, TangentState(0.0, [0.9, 0.7], [-1.0, 0.5]))

    hs = floor_bump_system()
    cyc = CyclicStructure(2, (1,))
    high = TangentState(0.0, [0.5, 0.3], [-1.0, 0.3])
    low = TangentState(0.0, [0.0, 0.3], [-1.0, 0.3])
    assert isotropy_preserved(hs.sys, cyc, high, high)
    assert not isotropy_preserved(hs.sys, cyc, low, low)


def test_reduced_run_validates_cyclic_structure(cfg):
    bundle = build_rolling_disk(DiskParams())
    with pytest.raises(CyclicStructureError):
        run_reduced_hybrid_flow(bundle.cartesian, CyclicStructure(3, (1,)), bundle.default_initial, 1.0, cfg)


def test_impact_breaking_cyclic_structure_fails_reduced_run(cfg):
    s0 = TangentState(0.0, [0.5, 0.0], [0.0, 0.3])
    record = run_reduced_hybrid_flow(floor_bump_system(), CyclicStructure(2, (1,)), s0, 3.0, cfg)
    assert record.termination == INTEGRATION_FAILURE
    assert "cyclic structure" in record.message, record.message
    assert not record.events
    assert record.arcs[-1].t1 == pytest.approx(1.0, abs=1e-2)


def test_reduced_run_fails_on_momentum_rule_mismatch(cfg):
    """Dissipation leaves the rolling set, so the rolling-set rule disagrees with the lifted impact"""
    bundle = build_rolling_disk(DiskParams(c=0.2))
    s0 = bundle.to_polar(bundle.default_initial)
    record = run_reduced_hybrid_flow(bundle.polar, bundle.cyclic, s0, 6.0, cfg, rule=bundle.momentum_rule)
    assert record.termination == INTEGRATION_FAILURE
    assert "momentum rule" in record.message, record.message


# =============================================================================
# ROUTH REDUCTION
# =============================================================================


def test_disk_routhian_and_reduced_force():
    p = DiskParams(m=2.0, R=1.0, k=0.5, c=0.3)
    red = routh_reduce(build_rolling_disk(p).polar.sys, CyclicStructure(3, (1, 2)), np.array([1.5, -0.4]))
    r, rd = 1.7, 0.9
    expected = 0.5 * p.m * rd**2 - 1.5**2 / (2 * p.m * r**2) - 0.4**2 / (2 * p.m * p.k**2)
    assert red.routhian(0.0, np.array([r]), np.array([rd])) == pytest.approx(expected, rel=1e-12)
    force = red.reduced_force(0.0, np.array([r]), np.array([rd]))
    assert force == pytest.approx([2 * p.c * r * 1.5 / p.m], rel=1e-12)


def test_disk_routhian_at_zero_momentum():
    red = routh_reduce(build_rolling_disk(DiskParams(m=1.0)).polar.sys, CyclicStructure(3, (1, 2)), np.zeros(2))
    assert red.routhian(0.0, np.array([2.0]), np.array([3.0])) == pytest.approx(4.5)


def test_billiard_routhian_and_reduced_force():
    p = BilliardParams(m=1.0, c=0.1)
    red = routh_reduce(build_billiard(p).polar.sys, CyclicStructure(2, (1,)), np.array([0.8]))
    t, r, rd = 2.0, 0.7, -1.1
    g = np.exp(p.c * t / p.m)
    expected = 0.5 * p.m * g * rd**2 - 0.8**2 / (g * 2 * p.m * r**2)
    assert red.routhian(t, np.array([r]), np.array([rd])) == pytest.approx(expected, rel=1e-12)
    assert red.reduced_force(t, np.array([r]), np.array([rd])) == pytest.approx([2 * p.c * r * 0.8 / p.m], rel=1e-12)


def test_routhian_with_mass_coupling_matches_closed_form(rng):
    """R = 1/2 A x_dot^2 + b x_dot - V_eff for a coupled mass matrix"""
    sys = coupled_system()
    cyc = CyclicStructure(2, (1,))
    for _ in range(20):
        mu = rng.normal()
        x, xd = rng.normal(), rng.normal()
        red = routh_reduce(sys, cyc, np.array([mu]))
        A = 1.0 + x**2 - (0.3 * x) ** 2 / 2.0
        b = 0.3 * x * mu / 2.0
        v_eff = 0.5 * x**2 + mu**2 / 4.0
        expected = 0.5 * A * xd**2 + b * xd - v_eff
        assert red.routhian(0.0, np.array([x]), np.array([xd])) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_reduced_field_matches_full_dynamics(rng):
    """Shape acceleration of the reduced system equals the full one on the same momentum level"""
    sys = coupled_system()
    cyc = CyclicStructure(2, (1,))
    for _ in range(20):
        q = np.array([rng.uniform(-1, 1), rng.uniform(-3, 3)])
        v = rng.normal(size=2)
        s = TangentState(0.0, q, v)
        red = routh_reduce(sys, cyc, momentum_map(sys, cyc, s))
        reduced = reduced_field(red, TangentState(0.0, q[:1], v[:1]))
        full = acceleration(sys, 0.0, q, v)
        assert reduced.dv_or_dp[0] == pytest.approx(full[0], rel=1e-6, abs=1e-8), f"at q={q}, v={v}"


@pytest.mark.parametrize("case", ["coupled", "billiard"])
def test_reduced_derivatives_match_central_differences(case, rng):
    if case == "coupled":
        sys, cyc = coupled_system(), CyclicStructure(2, (1,))
    else:
        bundle = build_billiard(BilliardParams(c=0.2))
        sys, cyc = bundle.polar.sys, bundle.cyclic
    for _ in range(10):
        t, x = rng.uniform(0.0, 2.0), np.array([rng.uniform(0.3, 1.0)])
        red = routh_reduce(sys, cyc, [rng.normal()])
        pairs = [
            (red.reduced_mass_dq(t, x), central_gradient(lambda xx: red.reduced_mass(t, xx), x)),
            (red.reduced_mass_dt(t, x), central_derivative(lambda tt: red.reduced_mass(tt, x), t)),
            (red.effective_potential_dq(t, x), central_gradient(lambda xx: red.effective_potential(t, xx), x)),
            (red.effective_potential_dt(t, x), central_derivative(lambda tt: red.effective_potential(tt, x), t)),
        ]
        for analytic, numeric in pairs:
            assert np.allclose(np.ravel(analytic), np.ravel(numeric), rtol=1e-6, atol=1e-7), f"{case} at t={t}, x={x}"


@pytest.mark.parametrize("r", [0.5, 0.05, 0.02])
def test_billiard_reduced_field_near_the_origin(r):
    """r'' = mu^2/(m^2 g^2 r^3) - c r_dot/m - 2 c r mu/(m^2 g) with g = exp(c t/m)"""
    p = BilliardParams(m=1.5, c=0.1)
    t, rd, mu = 1.2, -0.4, 0.3
    red = routh_reduce(build_billiard(p).polar.sys, CyclicStructure(2, (1,)), [mu])
    g = p.growth(t)
    expected = mu**2 / (p.m**2 * g**2 * r**3) - p.c * rd / p.m - 2.0 * p.c * r * mu / (p.m**2 * g)
    field = reduced_field(red, TangentState(t, [r], [rd]))
    assert field.dv_or_dp[0] == pytest.approx(expected, rel=1e-10), f"at r={r}"


def test_disk_reduced_field_example():
    """m=1, c=1, mu1=1, r=1: r'' = mu1^2/r^3 - 2 c r mu1 = -1"""
    red = routh_reduce(build_rolling_disk(DiskParams(m=1.0, c=1.0)).polar.sys, CyclicStructure(3, (1, 2)), [1.0, 0.0])
    field = reduced_field(red, TangentState(0.0, [1.0], [0.37]))
    assert field.dv_or_dp[0] == pytest.approx(-1.0, abs=1e-7), f"Expected -1, got {field.dv_or_dp}"


def test_disk_reduced_field_free_radial_motion():
    """With no dissipation and mu1 = 0 the radius moves freely"""
    red = routh_reduce(build_rolling_disk(DiskParams(c=1e-300)).polar.sys, CyclicStructure(3, (1, 2)), [0.0, 0.7])
    field = reduced_field(red, TangentState(0.0, [1.3], [0.4]))
    assert field.dv_or_dp[0] == pytest.approx(0.0, abs=1e-7)


def test_billiard_reduced_field_pure_dissipation():
    p = BilliardParams(m=2.0, c=0.3)
    red = routh_reduce(build_billiard(p).polar.sys, CyclicStructure(2, (1,)), [0.0])
    field = reduced_field(red, TangentState(1.5, [0.6], [0.8]))
    assert field.dv_or_dp[0] == pytest.approx(-0.8 * p.c / p.m, rel=1e-6)


def test_singular_cyclic_block_is_a_regularity_error():
    sys = MechanicalSystem(n=2, mass=lambda t, q: np.diag([1.0, q[0] ** 2]))
    red = routh_reduce(sys, CyclicStructure(2, (1,)), [1.0])
    with pytest.raises(RegularityError):
        red.theta_dot(0.0, np.array([0.0]), np.array([1.0]))


# =============================================================================
# REDUCED EXECUTION AND RECONSTRUCTION
# =============================================================================


def test_constant_shape_reconstruction(cfg):
    """Diagonal constant mass with x at rest: theta(t) = theta0 + mu / M_theta (t - t0)"""
    sys = MechanicalSystem(n=2, mass=lambda t, q: np.diag([1.0, 2.0]))
    hs = HybridSystem(sys, continuous_only=True)
    cyc = CyclicStructure(2, (1,))
    s0 = TangentState(0.0, [1.0, 0.3], [0.0, 0.75])
    record = run_reduced_hybrid_flow(hs, cyc, s0, 2.0, cfg)
    assert len(record.arcs) == 1 and not record.events
    assert np.allclose(record.mu_sequence[0], [1.5])
    states = reconstruct(sys, cyc, record, np.array([0.3]), cfg)
    for s in states:
        assert s.q[1] == pytest.approx(0.3 + 0.75 * s.t, abs=1e-9), f"theta off at t={s.t}"
        assert s.q[0] == pytest.approx(1.0)


def test_reconstruct_requires_momentum_sequence(cfg):
    bundle = build_billiard(BilliardParams())
    record = run_hybrid_flow(bundle.polar, bundle.to_polar(bundle.default_initial), 0.2, cfg)
    with pytest.raises(ValueError):
        reconstruct(bundle.polar.sys, bundle.cyclic, record, np.array([0.0]), cfg)


def test_billiard_reduced_run_keeps_momentum(cfg):
    bundle = build_billiard(BilliardParams(c=0.005), t_end=3.0)
    s0 = bundle.to_polar(bundle.default_initial)
    record = run_reduced_hybrid_flow(
        bundle.polar, bundle.cyclic, s0, 3.0, cfg, rule=bundle.momentum_rule, shape_reset=bundle.shape_reset
    )
    assert len(record.events) >= 2, "Expected wall impacts"
    mus = np.array(record.mu_sequence)
    assert np.allclose(mus, mus[0], rtol=0, atol=1e-12), "Billiard momentum changed at an impact"
    residuals = [ev.rule_residual for ev in record.events]
    assert max(residuals) <= 1e-9, f"Identity rule disagrees with the lifted impact: {residuals}"
    assert all(ev.isotropy_preserved is True for ev in record.events)


def test_disk_reduced_run_flips_orbital_momentum(cfg):
    """On the rolling slice with no spin, mu1 changes sign at each impact and mu2 stays put"""
    bundle = build_rolling_disk(DiskParams(c=1e-12))
    s0 = bundle.to_polar(TangentState(0.0, [0.5, 2.0, 0.0], [0.0, -0.8, 0.0]))
    record = run_reduced_hybrid_flow(bundle.polar, bundle.cyclic, s0, 6.0, cfg, rule=bundle.momentum_rule)
    assert len(record.events) >= 2
    for before, after in zip(record.mu_sequence, record.mu_sequence[1:]):
        assert after[0] == pytest.approx(-before[0], rel=1e-8), f"mu1 {before[0]} -> {after[0]}"
        assert after[1] == pytest.approx(before[1], abs=1e-12)


# =============================================================================
# CLASSIFICATION AND HYBRID CONSTANTS
# =============================================================================


def test_billiard_momentum_map_is_hybrid(cfg):
    bundle = build_billiard(BilliardParams(c=0.005), t_end=3.0)
    record = run_hybrid_flow(bundle.polar, bundle.to_polar(bundle.default_initial), 3.0, cfg)
    report = classify_momentum_map(bundle.polar, bundle.cyclic, record, cfg)
    assert report.verdict == HYBRID, report.summary()


def test_disk_momentum_map_is_generalized(cfg):
    bundle = build_rolling_disk(DiskParams(c=0.01))
    record = run_hybrid_flow(bundle.polar, bundle.to_polar(bundle.default_initial), 6.0, cfg)
    report = classify_momentum_map(bundle.polar, bundle.cyclic, record, cfg)
    assert report.verdict == GENERALIZED, report.summary()
    assert report.max_violation > 1e-3


def test_position_dependent_impact_is_neither(cfg):
    """Post-impact x momentum scaled by 1 + sin(x)/2: different outcomes from one momentum level"""
    sys = MechanicalSystem(n=2, mass=lambda t, q: np.eye(2), potential=lambda t, q: q[1])
    floor = Guard(label="floor", h=lambda t, q: q[1], h_dq=lambda t, q: np.array([0.0, 1.0]), h_dt=lambda t, q: 0.0)
    law = ImpactLaw.custom(lambda t, q, v: (q, np.array([v[0] * (1.0 + 0.5 * np.sin(q[0])), -v[1]])))
    hs = HybridSystem(sys, ((floor, law),))
    record = run_hybrid_flow(hs, TangentState(0.0, [0.3, 0.5], [1.0, 0.0]), 1.5, cfg)
    report = classify_momentum_map(hs, CyclicStructure(2, (0,)), record, cfg)
    assert report.verdict == NEITHER, report.summary()


def test_classification_needs_events(cfg):
    bundle = build_billiard(BilliardParams())
    record = run_hybrid_flow(bundle.polar, bundle.to_polar(bundle.default_initial), 0.05, cfg)
    with pytest.raises(ValueError):
        classify_momentum_map(bundle.polar, bundle.cyclic, record, cfg)


def test_classification_validates_cyclic_structure(cfg):
    bundle = build_billiard(BilliardParams(c=0.005), t_end=3.0)
    record = run_hybrid_flow(bundle.cartesian, bundle.default_initial, 3.0, cfg)
    assert record.events
    # x is absent from the Cartesian kinetic energy but not from the dissipative force
    with pytest.raises(CyclicStructureError):
        classify_momentum_map(bundle.cartesian, CyclicStructure(2, (0,)), record, cfg)


def test_hybrid_constants(cfg):
    billiard = build_billiard(BilliardParams(c=0.005), t_end=3.0)
    record = run_hybrid_flow(billiard.polar, billiard.to_polar(billiard.default_initial), 3.0, cfg)
    mu = check_hybrid_constant(record, lambda s: momentum_map(billiard.polar.sys, billiard.cyclic, s).mu)
    assert mu.is_constant, f"drift {mu.max_drift:.3e}, jump {mu.max_jump:.3e}"
    constant = check_hybrid_constant(record, lambda s: 4.0)
    assert constant.max_drift == 0.0 and constant.max_jump == 0.0

    disk = build_rolling_disk(DiskParams(c=0.01))
    record = run_hybrid_flow(disk.polar, disk.to_polar(disk.default_initial), 6.0, cfg)
    mu1 = check_hybrid_constant(record, lambda s: momentum_map(disk.polar.sys, disk.cyclic, s).mu[0])
    assert not mu1.is_constant, "mu1 jumps at disk impacts"
    assert mu1.max_jump > 1e-3


def test_annotate_momentum_fills_events(cfg):
    bundle = build_billiard(BilliardParams(), t_end=2.0)
    record = run_hybrid_flow(bundle.polar, bundle.to_polar(bundle.default_initial), 2.0, cfg)
    annotated = annotate_momentum(bundle.polar.sys, bundle.cyclic, record)
    for ev in annotated.events:
        assert ev.mu_pre is not None and np.allclose(ev.mu_pre, ev.mu_post, atol=1e-12)


# =============================================================================
# SYMMETRY CHECKS
# =============================================================================


def _samples(rng, n, count=10):
    return [TangentState(0.0, rng.normal(size=n), rng.normal(size=n)) for _ in range(count)]


def test_free_particle_translation_is_a_symmetry(rng):
    sys = MechanicalSystem(n=1, mass=lambda t, q: np.eye(1))
    report = check_symmetry(sys, lambda q: np.array([1.0]), _samples(rng, 1))
    assert report.is_symmetry
    assert report.max_residual == pytest.approx(0.0, abs=1e-12)
    assert report.max_drift <= 1e-9


@pytest.mark.parametrize("generator", ["rotation", "spin"])
def test_disk_generators_are_symmetries(generator, rng):
    bundle = build_rolling_disk(DiskParams(c=0.2))
    sys = bundle.cartesian.sys
    X = bundle.generators[generator]
    samples = _samples(rng, 3)
    report = check_symmetry(sys, X, samples, NumericsConfig(), monitor_arcs=3)
    assert report.max_residual <= 1e-8, f"{generator}: residual {report.max_residual:.3e}"
    assert report.max_drift <= 1e-7, f"{generator}: drift {report.max_drift:.3e}"
    ham = check_symmetry_hamiltonian(sys, X, [legendre_forward(sys, s) for s in samples])
    assert ham.max_residual <= 1e-8 and ham.max_drift <= 1e-7


def test_linear_potential_breaks_translation_symmetry(rng):
    sys = MechanicalSystem(n=1, mass=lambda t, q: np.eye(1), potential=lambda t, q: q[0])
    report = check_symmetry(sys, lambda q: np.array([1.0]), _samples(rng, 1))
    assert not report.is_symmetry
    assert np.allclose(report.residuals, -1.0, atol=1e-9), f"Expected residual -1, got {report.residuals}"
