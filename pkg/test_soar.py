#!/usr/bin/env python3
"""
Tests for the SOAR iteration, damping schedules and discrepancy functions
"""

import math

import numpy as np
import pytest

from assembly import assemble_mass
from conftest import constant_data
from errors import DimensionMismatch, InvalidBoundary, NonFiniteIterate
from mesh import Mesh
from methods import (ConstantDamping, DynamicDamping, IterState, SoarConfig, SoarMethod, StoppingRule,
                     TerminationReason, c0_constant, discrepancy_morozov, discrepancy_total_energy, norm_omega,
                     norm_P, nu_schedule, soar_preset, soar_step)
from methods.base_method import make_evaluator
from methods.soar import run


def _unit_square_mass():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    square = Mesh(nodes, np.array([[0, 1, 2], [0, 2, 3]]), np.array([[0, 1], [1, 2], [2, 3], [3, 0]]), math.sqrt(2))
    return assemble_mass(square)


def test_c0_constant():
    assert c0_constant(2, 1.0) == pytest.approx(5.013257, abs=1e-6)
    assert c0_constant(2, 3.0) == pytest.approx(3 * math.sqrt(2 * math.pi))
    assert c0_constant(3, 1.0) == pytest.approx(3 * math.sqrt(2 * math.pi))
    with pytest.raises(ValueError):
        c0_constant(4, 1.0)


def test_norms(whole4):
    system, _ = whole4
    area = system.mesh.areas().sum()
    assert norm_omega(system.E, np.zeros(system.m)) == 0.0
    assert norm_omega(system.E, np.ones(system.m)) == pytest.approx(math.sqrt(area))
    assert norm_P(system.M0, np.ones(system.m0)) == pytest.approx(math.sqrt(area))
    with pytest.raises(DimensionMismatch):
        norm_P(system.M0, np.ones(3))


def test_discrepancy_values():
    E = _unit_square_mass()
    ones, zeros = np.ones(4), np.zeros(4)
    assert discrepancy_morozov(zeros, E, 0.3) == pytest.approx(-0.3)
    assert discrepancy_morozov(zeros, E, 0.0) == 0.0
    assert discrepancy_morozov(ones, E, 0.5) == pytest.approx(0.5)
    assert discrepancy_total_energy(zeros, zeros, E, E, 0.0) == 0.0
    assert discrepancy_total_energy(zeros, zeros, E, E, 0.09) == pytest.approx(-0.09)
    assert discrepancy_total_energy(ones, zeros, E, E, 0.25) == pytest.approx(0.75)


def test_stopping_threshold():
    assert StoppingRule(tau=0.01, absorb_c0=True).threshold(2.0) == pytest.approx(0.02)
    explicit = StoppingRule(tau=1.1, absorb_c0=False)
    assert explicit.threshold(1.0) == pytest.approx(1.1 * 2 * math.sqrt(2 * math.pi))
    with pytest.raises(ValueError):
        StoppingRule(tau=0.0).validate()
    with pytest.raises(ValueError):
        StoppingRule(discrepancy='l1').validate()


def test_damping_schedules():
    constant = ConstantDamping(0.05)
    assert constant.at(1.0) == constant.at(1e6) == 0.05
    dynamic = DynamicDamping(r=5.0, t0=1.0)
    assert dynamic.at(1.0) == 5.0
    assert dynamic.at(11.0) == pytest.approx(5.0 / 11.0)
    with pytest.raises(ValueError):
        dynamic.at(0.5)


def _frozen(m, w):
    """Evaluator with a fixed gradient field and zero residual"""
    return lambda p: (np.zeros(m), w.copy())


def _state(p, q, w, t=1.0):
    return IterState(k=0, t=t, p=np.asarray(p, float), q=np.asarray(q, float), w_im=np.asarray(w, float))


def test_force_free_drift(whole4):
    system, fact = whole4
    zero = np.zeros(3)
    config = SoarConfig(dt=0.5, damping=ConstantDamping(0.0))
    state = soar_step(_state([1.0, 2.0, 3.0], [0.2, 0.0, -0.4], zero), system, fact, config, _frozen(3, zero))
    assert np.allclose(state.p, [1.1, 2.0, 2.8])
    assert np.allclose(state.q, [0.2, 0.0, -0.4])
    assert state.k == 1 and state.t == pytest.approx(1.5)


def test_frozen_gradient_step(whole4):
    system, fact = whole4
    g = np.array([1.0, -2.0, 0.5])
    dt = 0.3
    config = SoarConfig(dt=dt, damping=ConstantDamping(0.0))
    state = soar_step(_state([0.0, 1.0, 2.0], np.zeros(3), g), system, fact, config, _frozen(3, g))
    assert np.allclose(state.q, -dt * g)
    assert np.allclose(state.p, np.array([0.0, 1.0, 2.0]) - 0.5 * dt ** 2 * g)


def test_dynamic_damping_uses_both_ends(whole4):
    system, fact = whole4
    g = np.array([0.5, 0.5])
    q0 = np.array([1.0, -1.0])
    dt = 2.0
    config = SoarConfig(dt=dt, damping=DynamicDamping(5.0, 1.0))
    state = soar_step(_state([0.0, 0.0], q0, g), system, fact, config, _frozen(2, g))
    q_half = q0 - 0.5 * dt * (5.0 * q0 + g)
    expected_q = q_half - 0.5 * dt * (5.0 / 3.0 * q_half + g)
    assert np.allclose(state.p, dt * q_half)
    assert np.allclose(state.q, expected_q)


def test_step_is_time_reversible(whole4):
    system, fact = whole4
    rng = np.random.default_rng(1)
    g, p, q = rng.standard_normal((3, 5))
    evaluate = _frozen(5, g)
    forward = soar_step(_state(p, q, g), system, fact, SoarConfig(dt=0.7, damping=ConstantDamping(0.0)), evaluate)
    back = soar_step(forward, system, fact, SoarConfig(dt=-0.7, damping=ConstantDamping(0.0)), evaluate)
    assert np.allclose(back.p, p, rtol=1e-12, atol=1e-14)
    assert np.allclose(back.q, q, rtol=1e-12, atol=1e-14)


def test_step_computes_missing_gradient(square4, example_data):
    system, fact = square4
    loaded = system.with_loads(example_data.g1, example_data.g2)
    config = SoarConfig(dt=0.5)
    state = IterState(k=0, t=1.0, p=np.zeros(system.m0), q=np.zeros(system.m0))
    cached = soar_step(state, loaded, fact, config)
    _, w0 = make_evaluator(loaded, fact)(state.p)
    direct = soar_step(IterState(0, 1.0, state.p, state.q, w_im=w0), loaded, fact, config)
    assert np.allclose(cached.p, direct.p) and np.allclose(cached.q, direct.q)


def test_constant_solution_stops_immediately(whole4):
    system, fact = whole4
    config = SoarConfig(dt=1.0, p0=2.0)
    record = run(system, fact, constant_data(system.mesh, 2.0), config)
    assert record.reason == TerminationReason.DISCREPANCY_MET
    assert record.iterations == 0
    assert abs(record.final_chi) < 1e-10


def test_large_noise_stops_at_zero(square4, example_data):
    system, fact = square4
    noisy = type(example_data)(example_data.nodes, example_data.g1, example_data.g2, delta=1e6)
    record = run(system, fact, noisy, SoarConfig(stopping=StoppingRule(tau=1.0)))
    assert record.iterations == 0
    assert record.final_chi < 0
    assert record.reason == TerminationReason.DISCREPANCY_MET


def test_zero_iteration_budget(square4, example_data):
    system, fact = square4
    record = run(system, fact, example_data, SoarConfig(p0=3.0, stopping=StoppingRule(n_max=0)))
    assert record.reason == TerminationReason.MAX_ITERATIONS
    assert np.array_equal(record.p, np.full(system.m0, 3.0))
    assert len(record.rows) == 1


def test_data_in_foreign_node_order_rejected(square4, example_data):
    system, fact = square4
    reversed_data = type(example_data)(example_data.nodes[::-1].copy(), example_data.g1[::-1].copy(),
                                       example_data.g2[::-1].copy(), delta=example_data.delta)
    with pytest.raises(InvalidBoundary):
        run(system, fact, reversed_data, SoarConfig(stopping=StoppingRule(n_max=1)))


def test_qnormP_is_unsquared_norm(square4, example_data):
    system, fact = square4
    record = run(system, fact, example_data, SoarConfig(q0=2.0, stopping=StoppingRule(n_max=0)))
    area = float(np.ones(system.m0) @ (system.M0 @ np.ones(system.m0)))
    assert record.rows[0].qnormP == pytest.approx(2.0 * math.sqrt(area))


def test_stopping_contract(square4, example_data):
    system, fact = square4
    p_true = np.ones(system.m0)
    record = run(system, fact, example_data, SoarConfig(dt=1.0, stopping=StoppingRule(n_max=5)), p_true=p_true)
    assert [row.k for row in record.rows] == list(range(len(record.rows)))
    if record.reason == TerminationReason.MAX_ITERATIONS:
        assert all(row.chi > 1e-6 for row in record.rows)
        assert record.iterations == 5
    else:
        assert record.final_chi <= 1e-6
    assert all(row.l2err is not None for row in record.rows)


def test_lyapunov_and_total_energy_decrease(square4, example_data):
    system, fact = square4
    loaded = system.with_loads(example_data.g1, example_data.g2)
    evaluate = make_evaluator(loaded, fact)
    config = SoarConfig(dt=0.1, damping=ConstantDamping(1.0))
    state = SoarMethod(config).initial_state(loaded, evaluate)

    def energy(s):
        return 0.5 * s.u_im @ (loaded.E @ s.u_im) + 0.5 * s.q @ (loaded.M0 @ s.q)

    def chi_te(s):
        return discrepancy_total_energy(s.u_im, s.q, loaded.E, loaded.M0, 0.0)

    e_prev, chi_prev = energy(state), chi_te(state)
    e0, chi0 = e_prev, chi_prev
    assert e0 > 0
    for _ in range(200):
        state = soar_step(state, loaded, fact, config, evaluate)
        e, chi = energy(state), chi_te(state)
        assert e <= e_prev + 1e-8 * e0
        assert chi <= chi_prev + 1e-8 * chi0
        e_prev, chi_prev = e, chi
    assert e_prev < e0


def test_blow_up_is_reported(square4, example_data):
    system, fact = square4
    with pytest.raises(NonFiniteIterate) as info:
        run(system, fact, example_data, SoarConfig(dt=1e300, stopping=StoppingRule(n_max=10)))
    assert info.value.k == 1


def test_invalid_config_rejected(square4, example_data):
    system, fact = square4
    with pytest.raises(ValueError):
        run(system, fact, example_data, SoarConfig(dt=0.0))
    with pytest.raises(ValueError):
        run(system, fact, example_data, SoarConfig(damping=DynamicDamping(r=-1.0)))


def test_presets():
    soar1 = soar_preset('SOAR1', eta=0.1)
    assert isinstance(soar1.config.damping, ConstantDamping) and soar1.config.damping.eta == 0.1
    assert soar1.stopping.discrepancy == 'morozov'
    soar4 = soar_preset('soar4', r=5.0)
    assert isinstance(soar4.config.damping, DynamicDamping)
    assert soar4.stopping.discrepancy == 'total_energy'
    assert soar4.name == 'SOAR4'
    with pytest.raises(ValueError):
        soar_preset('SOAR5')


def test_run_record_csv(tmp_path, square4, example_data):
    system, fact = square4
    record = run(system, fact, example_data, SoarConfig(stopping=StoppingRule(n_max=2)))
    path = tmp_path / "run.csv"
    record.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,t,chi,V,qnormP,l2err"
    assert len(lines) == len(record.rows) + 1
    assert lines[1].startswith("0,1.0,") and lines[1].endswith(",")


def test_nu_schedule():
    dt, _ = nu_schedule(0.5, 2)
    assert dt == pytest.approx(2.4)
    with pytest.raises(ValueError):
        nu_schedule(0.5, 1)
    for nu in (0.5, 1.0, 2.0):
        for k in range(2, 1001):
            assert nu_schedule(nu, k)[0] > 0
