#!/usr/bin/env python3
"""
Synthetic experiments
Problem preparation (refined measurement mesh, reconstruction mesh, one
factorization), single solves, parameter sweeps and the method comparison grid.
"""

import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from assembly import FemSystem, assemble_system
from data_gen import (BoundaryData, add_noise, example_region, load_boundary_data, make_measurement,
                      sample_true_source, transfer_boundary)
from errors import ConfigError, InverseSourceError, InvalidBoundary
from linsolve import BlockFactorization, factorize_ccbm
from mesh import Mesh, RegionMask, generate_disk_mesh, load_mesh, refine_mesh
from methods import RunRecord, build_method, relative_l2_error
from methods.factory import describe_method

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['sweep_value', 'l2err', 'iternum', 'reason']
COMPARE_COLUMNS = ['method', 'delta_prime', 'l2err', 'iternum', 'reason']

# sweep axis -> configuration key it overrides
AXIS_KEYS = {
    'delta_prime': 'noise.delta_prime',
    'tau': 'stop.tau',
    'dt': 'soar.dt',
    'eta': 'soar.eta',
    'r': 'soar.r',
    'method': 'method.name',
}


def l2err(p_h: np.ndarray, p_true: np.ndarray, M0) -> float:
    """Relative L2 reconstruction error on the permissible region"""
    return relative_l2_error(p_h, p_true, M0)


def row_seed(master_seed: int, row: int) -> int:
    """Independent, reproducible noise seed for row `row` of a table"""
    return int(np.random.SeedSequence([int(master_seed), int(row)]).generate_state(1)[0])


@dataclass
class ExperimentSpec:
    """Effective configuration plus where and how to run a table"""
    config: Dict[str, Any]
    out_dir: Optional[Path] = None
    jobs: int = 1

    @property
    def axis(self) -> str:
        return self.config['sweep.axis']

    @property
    def values(self) -> List[Any]:
        return list(self.config['sweep.values'])

    @property
    def seed(self) -> int:
        return int(self.config['noise.seed'])

    def validate(self):
        if self.axis not in AXIS_KEYS:
            raise ConfigError(f"unknown sweep axis '{self.axis}'", 'sweep.axis')
        if not self.values:
            raise ConfigError("sweep needs at least one value", 'sweep.values')
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if (not self.config['data.path'] and self.config['mesh.measurement'] == 'disk'
                and self.config['mesh.fine_rings'] <= self.config['mesh.coarse_rings']):
            raise ConfigError("measurement mesh must be finer than the reconstruction mesh", 'mesh.fine_rings')


@dataclass(eq=False)
class PreparedProblem:
    """Everything shared by the rows of one experiment"""
    example: str
    mesh: Mesh
    region: RegionMask
    system: FemSystem
    fact: BlockFactorization
    p_true: np.ndarray
    fine_mesh: Optional[Mesh] = None
    exact_fine: Optional[BoundaryData] = None
    file_data: Optional[BoundaryData] = None
    _noisy: Dict[Tuple[float, int], BoundaryData] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def noisy_data(self, delta_prime: float, seed: int) -> BoundaryData:
        """Noisy measurement on the reconstruction mesh, one object per (delta', seed)"""
        if self.file_data is not None:
            return self.file_data
        key = (float(delta_prime), int(seed))
        with self._lock:
            if key not in self._noisy:
                noisy = add_noise(self.exact_fine, delta_prime, seed)
                self._noisy[key] = transfer_boundary(self.fine_mesh, self.mesh, noisy)
                logger.debug(f"Noise delta'={delta_prime:g} seed={seed}: delta={noisy.delta:.6e}")
            return self._noisy[key]


def _align_to_mesh(data: BoundaryData, mesh: Mesh) -> BoundaryData:
    position = {int(n): i for i, n in enumerate(data.nodes)}
    missing = [int(n) for n in mesh.boundary_nodes if int(n) not in position]
    if missing or len(position) != len(mesh.boundary_nodes):
        raise InvalidBoundary(f"boundary data does not match the mesh boundary (e.g. node {missing[:1]})")
    order = [position[int(n)] for n in mesh.boundary_nodes]
    return BoundaryData(nodes=mesh.boundary_nodes.copy(), g1=data.g1[order], g2=data.g2[order],
                        delta=data.delta)


def measurement_mesh(config: Dict[str, Any], mesh: Mesh) -> Mesh:
    """Mesh the exact data is computed on; 'refined' keeps the reconstruction polygon"""
    if config['mesh.measurement'] == 'disk':
        return generate_disk_mesh(config['mesh.radius'], config['mesh.fine_rings'], config['mesh.shape_c2'])
    return refine_mesh(mesh, config['mesh.refine_levels'], config['mesh.shape_c2'])


def prepare_problem(config: Dict[str, Any]) -> PreparedProblem:
    """Meshes, region, assembled system, factorization, ground truth and exact data"""
    example = config['example']
    shape_c2 = config['mesh.shape_c2']
    if config['data.mesh_path']:
        mesh = load_mesh(config['data.mesh_path'], shape_c2)
    else:
        mesh = generate_disk_mesh(config['mesh.radius'], config['mesh.coarse_rings'], shape_c2)
    region = example_region(example, mesh)
    system = assemble_system(mesh, region)
    fact = factorize_ccbm(system, config['mesh.solver'])
    p_true = sample_true_source(example, mesh, region).values

    if config['data.path']:
        data = _align_to_mesh(load_boundary_data(config['data.path']), mesh)
        logger.info(f"Using measured boundary data from {config['data.path']} (delta={data.delta:.6e})")
        return PreparedProblem(example, mesh, region, system, fact, p_true, file_data=data)

    fine_mesh = measurement_mesh(config, mesh)
    exact = make_measurement(fine_mesh, example_region(example, fine_mesh), example, g2=config['data.g2'])
    logger.info(f"Prepared {example}: reconstruction mesh {mesh.n_nodes} nodes (h={mesh.h:.4f}), "
                f"measurement mesh {fine_mesh.n_nodes} nodes (h={fine_mesh.h:.4f}), region {region.m0} nodes")
    return PreparedProblem(example, mesh, region, system, fact, p_true, fine_mesh=fine_mesh, exact_fine=exact)


def run_single(problem: PreparedProblem, config: Dict[str, Any], seed: Optional[int] = None,
               data: Optional[BoundaryData] = None) -> Tuple[RunRecord, BoundaryData]:
    """One method run on the prepared problem"""
    if data is None:
        seed = int(config['noise.seed']) if seed is None else seed
        data = problem.noisy_data(config['noise.delta_prime'], seed)
    method = build_method(config['method.name'], config)
    record = method.run(problem.system, problem.fact, data, p_true=problem.p_true)
    return record, data


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return _json_value(value.item())
    return value


def _records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    return [{k: _json_value(v) for k, v in row.items()} for row in frame.to_dict(orient='records')]


def write_provenance(path: Path, config: Dict[str, Any], **payload):
    """JSON record whose 'config' entry reproduces the run when fed back via --config"""
    record = {'config': config}
    record.update(payload)
    path.write_text(json.dumps(record, indent=2, default=_json_value))


def _failed_row(exc: Exception, **fields) -> Dict[str, Any]:
    fields.update({'l2err': float('nan'), 'iternum': None, 'reason': None, 'error': str(exc)})
    return fields


def _sweep_row(problem: PreparedProblem, spec: ExperimentSpec, index: int, value) -> Dict[str, Any]:
    config = dict(spec.config)
    key = AXIS_KEYS[spec.axis]
    config[key] = str(value) if spec.axis == 'method' else float(value)
    # only a noise sweep draws a new realization per row; other axes share one
    seed = row_seed(spec.seed, index if spec.axis == 'delta_prime' else 0)
    try:
        record, _ = run_single(problem, config, seed=seed)
    except (InverseSourceError, ValueError) as e:
        logger.error(f"Sweep row {index} ({spec.axis}={value}) failed: {e}")
        return _failed_row(e, index=index, sweep_value=value)
    return {'index': index, 'sweep_value': value, 'l2err': record.final_l2err,
            'iternum': record.iterations, 'reason': record.reason.value, 'error': ''}


def _map_rows(func, items, jobs: int) -> List[Dict[str, Any]]:
    if jobs <= 1:
        return [func(*item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda item: func(*item), items))


def _table(rows: List[Dict[str, Any]], columns: List[str]) -> pd.DataFrame:
    frame = pd.DataFrame(rows).sort_values('index', kind='stable').reset_index(drop=True)
    frame['iternum'] = frame['iternum'].astype('Int64')
    if (frame['error'] != '').any():
        columns = columns + ['error']
    return frame[columns]


def run_sweep(spec: ExperimentSpec, problem: Optional[PreparedProblem] = None) -> pd.DataFrame:
    """
    One row per sweep value: sweep_value, l2err, iternum, reason.
    Failed rows keep their place with the message in an extra 'error' column.
    """
    spec.validate()
    problem = problem or prepare_problem(spec.config)
    logger.info(f"Sweep over {spec.axis}: {len(spec.values)} values, method {spec.config['method.name']}")

    items = [(problem, spec, i, value) for i, value in enumerate(spec.values)]
    table = _table(_map_rows(_sweep_row, items, spec.jobs), SWEEP_COLUMNS)

    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / 'sweep.csv', index=False, na_rep='')
        write_provenance(out / 'sweep.json', spec.config, axis=spec.axis, rows=_records(table))
        logger.info(f"Sweep written to {out / 'sweep.csv'}")
    return table


def _compare_cell(problem: PreparedProblem, config: Dict[str, Any], index: int, method: str,
                  delta_prime: float, data: BoundaryData) -> Dict[str, Any]:
    row_config = dict(config)
    row_config['method.name'] = method
    row_config['noise.delta_prime'] = float(delta_prime)
    try:
        record, _ = run_single(problem, row_config, data=data)
    except (InverseSourceError, ValueError) as e:
        logger.error(f"{method} at delta'={delta_prime:g} failed: {e}")
        return _failed_row(e, index=index, method=method, delta_prime=delta_prime)
    return {'index': index, 'method': record.method, 'delta_prime': delta_prime, 'l2err': record.final_l2err,
            'iternum': record.iterations, 'reason': record.reason.value, 'error': ''}


def comparison_grid(table: pd.DataFrame) -> pd.DataFrame:
    """Methods as rows, (delta', L2Err / IterNum) column pairs"""
    if table.empty:
        return pd.DataFrame()
    methods = list(dict.fromkeys(table['method']))
    grid = table.pivot(index='method', columns='delta_prime', values=['l2err', 'iternum'])
    grid = grid.swaplevel(0, 1, axis=1).sort_index(axis=1, level=0, sort_remaining=False)
    return grid.reindex(methods)


def compare_methods(spec: ExperimentSpec, problem: Optional[PreparedProblem] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Every method of compare.methods on identical noisy data for every
    noise fraction of compare.delta_primes. Returns (long table, grid).
    """
    config = spec.config
    methods = [str(m).upper() for m in config['compare.methods']]
    delta_primes = [float(d) for d in config['compare.delta_primes']]
    if not methods or not delta_primes:
        return pd.DataFrame(columns=COMPARE_COLUMNS), pd.DataFrame()

    problem = problem or prepare_problem(config)
    items = []
    for j, delta_prime in enumerate(delta_primes):
        # one BoundaryData object per noise level, consumed by every method
        data = problem.noisy_data(delta_prime, row_seed(spec.seed, j))
        for i, method in enumerate(methods):
            items.append((problem, config, j * len(methods) + i, method, delta_prime, data))
    logger.info(f"Comparing {len(methods)} methods at {len(delta_primes)} noise levels")

    table = _table(_map_rows(_compare_cell, items, spec.jobs), COMPARE_COLUMNS)
    grid = comparison_grid(table)

    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / 'compare.csv', index=False, na_rep='')
        grid.to_csv(out / 'compare_grid.csv')
        write_provenance(out / 'compare.json', config, rows=_records(table))
        if config['output.excel']:
            export_workbook(out / 'compare.xlsx', table, grid, config)
        logger.info(f"Comparison written to {out / 'compare.csv'}")
    return table, grid


def export_workbook(path: Path, table: pd.DataFrame, grid: pd.DataFrame, config: Dict[str, Any]):
    """Excel workbook with the long table, the grid and the configuration"""
    with pd.ExcelWriter(path, engine='openpyxl') as writer:
        table.to_excel(writer, sheet_name='Runs', index=False)
        grid.to_excel(writer, sheet_name='Grid')
        settings = pd.DataFrame({'Key': list(config), 'Value': [str(v) for v in config.values()]})
        settings.to_excel(writer, sheet_name='Config', index=False)
    logger.info(f"Workbook exported to {path}")


def describe_run(config: Dict[str, Any]) -> Dict[str, Any]:
    return describe_method(build_method(config['method.name'], config))
