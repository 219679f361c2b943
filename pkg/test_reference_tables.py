#!/usr/bin/env python3
"""
Long-running checks against the published result tables
Run with SOAR_TABLE_CHECKS=1; desk-scale meshes (8 rings, measured on the
3x refined mesh).
"""

import os

import pytest

from config import load_config
from experiments import ExperimentSpec, compare_methods, prepare_problem, run_single, run_sweep
from methods import TerminationReason

pytestmark = [
    pytest.mark.tables,
    pytest.mark.skipif(os.environ.get('SOAR_TABLE_CHECKS') != '1', reason='set SOAR_TABLE_CHECKS=1'),
]


@pytest.fixture(scope="module")
def example1():
    return prepare_problem(load_config())


def test_noise_sweep_trend(example1, tmp_path):
    table = run_sweep(ExperimentSpec(load_config(protocol='noise_sweep'), out_dir=tmp_path), example1)
    errors = list(table['l2err'])
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert 7.0 <= errors[0] <= 30.0
    assert 0.4 <= errors[-1] <= 1.6


def test_noise_sweep_is_byte_identical(example1, tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    run_sweep(ExperimentSpec(load_config(protocol='noise_sweep'), out_dir=first), example1)
    run_sweep(ExperimentSpec(load_config(protocol='noise_sweep'), out_dir=second, jobs=3), example1)
    assert (first / 'sweep.csv').read_bytes() == (second / 'sweep.csv').read_bytes()


def test_small_damping_spot_check(example1):
    record, _ = run_single(example1, load_config(protocol='small_damping'))
    assert record.reason == TerminationReason.DISCREPANCY_MET
    assert record.final_l2err <= 0.1
    assert 10 <= record.iterations <= 100


def test_method_iteration_ordering(example1):
    config = load_config(overrides=['compare.methods=["SOAR1", "NESTEROV", "DRM"]',
                                    'compare.delta_primes=[0.05]'])
    table, _ = compare_methods(ExperimentSpec(config), example1)
    iterations = dict(zip(table['method'], table['iternum']))
    assert iterations['SOAR1'] < iterations['Nesterov'] < iterations['DRM']
    assert iterations['DRM'] >= 5 * iterations['SOAR1']
