#!/usr/bin/env python3
"""
SOAR Inverse Source Engine
Reconstructs an elliptic source from Cauchy boundary data with SOAR and
its comparison methods; mesh, data, solve, sweep and compare subcommands
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from config import PROTOCOLS, load_config
from data_gen import add_noise, save_boundary_data, transfer_boundary
from errors import ConfigError, InverseSourceError
from experiments import (ExperimentSpec, compare_methods, describe_run, prepare_problem, run_single,
                         run_sweep, write_provenance)
from mesh import generate_disk_mesh, load_mesh, mesh_info, save_mesh
from methods import RunRecord

logger = logging.getLogger(__name__)

LOG_FILE = 'soar_engine.log'
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class UsageError(Exception):
    pass


class EngineArgumentParser(argparse.ArgumentParser):
    """Usage problems exit with code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = EngineArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON configuration (flat dotted keys or a run.json record)')
    common.add_argument('--protocol', choices=sorted(PROTOCOLS), help='named experiment setting applied before --set')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override one configuration key (repeatable)')
    common.add_argument('--out', default='out', help='output directory (default: out)')
    common.add_argument('--jobs', type=int, default=1, help='parallel sweep rows (default: 1)')
    common.add_argument('--seed', type=int, help='master noise seed (overrides noise.seed)')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings only')

    parser = EngineArgumentParser(prog='soar_engine', description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest='command', required=True)

    mesh = commands.add_parser('mesh', help='generate or inspect a mesh')
    mesh_commands = mesh.add_subparsers(dest='mesh_command', required=True)
    gen = mesh_commands.add_parser('gen', parents=[common], help='structured disk mesh')
    gen.add_argument('--rings', type=int, help='number of rings (default: mesh.coarse_rings)')
    gen.add_argument('--name', default='mesh.txt', help='file name inside the output directory')
    info = mesh_commands.add_parser('info', parents=[common], help='mesh statistics')
    info.add_argument('path', help='MESH2D file')

    commands.add_parser('forward', parents=[common],
                        help='synthetic noisy data on the reconstruction mesh (mesh.txt + data.bdata)')
    commands.add_parser('solve', parents=[common], help='one reconstruction (run.csv + run.json)')
    commands.add_parser('sweep', parents=[common], help='parameter sweep (sweep.csv + sweep.json)')
    commands.add_parser('compare', parents=[common], help='method comparison grid (compare*.csv)')
    return parser


def setup_logging(out_dir: Path, verbose: bool = False, quiet: bool = False) -> List[logging.Handler]:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handlers = [logging.FileHandler(out_dir / LOG_FILE), logging.StreamHandler()]
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    return handlers


def run_report(record: RunRecord, data_delta: float, config: Dict) -> str:
    """Console summary of one reconstruction"""
    l2err = record.final_l2err
    report = f"""
{'='*60}
SOAR INVERSE SOURCE RECONSTRUCTION
Example: {config['example']} | Method: {record.method}
{'='*60}

📊 DATA:
   Noise fraction delta': {config['noise.delta_prime']:g}
   Noise level delta: {data_delta:.6e}
   Seed: {config['noise.seed']}

🎯 RESULT:
   Iterations: {record.iterations}
   Termination: {record.reason.value}
   Final discrepancy: {record.final_chi:.6e}
   L2Err: {'n/a' if l2err is None else f'{l2err:.6f}'}
"""
    for note in record.notes:
        report += f"   Note: {note}\n"
    report += f"\n{'='*60}\n"
    return report


def table_report(title: str, table) -> str:
    return f"\n{'='*60}\n{title}\n{'='*60}\n{table.to_string(index=False)}\n{'='*60}\n"


def cmd_mesh_gen(args, config: Dict, out_dir: Path) -> int:
    rings = args.rings if args.rings is not None else config['mesh.coarse_rings']
    mesh = generate_disk_mesh(config['mesh.radius'], rings, config['mesh.shape_c2'])
    path = out_dir / Path(args.name).name
    save_mesh(mesh, path)
    print(f"✅ Mesh with {mesh.n_nodes} nodes and {mesh.n_triangles} triangles written to {path}")
    return 0


def cmd_mesh_info(args, config: Dict, out_dir: Path) -> int:
    info = mesh_info(load_mesh(args.path, config['mesh.shape_c2']))
    print(json.dumps(info, indent=2))
    return 0


def cmd_forward(args, config: Dict, out_dir: Path) -> int:
    problem = prepare_problem(config)
    if problem.exact_fine is None:
        raise ConfigError("forward generates synthetic data; unset data.path", 'data.path')
    noisy = add_noise(problem.exact_fine, config['noise.delta_prime'], config['noise.seed'])
    coarse = transfer_boundary(problem.fine_mesh, problem.mesh, noisy)
    save_mesh(problem.mesh, out_dir / 'mesh.txt')
    save_boundary_data(coarse, out_dir / 'data.bdata')
    write_provenance(out_dir / 'forward.json', config, delta=coarse.delta,
                     boundary_nodes=int(len(coarse.nodes)))
    print(f"✅ Boundary data (delta={coarse.delta:.6e}) written to {out_dir / 'data.bdata'}")
    return 0


def cmd_solve(args, config: Dict, out_dir: Path) -> int:
    problem = prepare_problem(config)
    record, data = run_single(problem, config)
    record.to_csv(out_dir / 'run.csv')
    write_provenance(out_dir / 'run.json', config, method=describe_run(config), delta=data.delta,
                     summary=record.summary(), p=record.p.tolist())
    print(run_report(record, data.delta, config))
    return 0


def cmd_sweep(args, config: Dict, out_dir: Path) -> int:
    table = run_sweep(ExperimentSpec(config, out_dir=out_dir, jobs=args.jobs))
    print(table_report(f"SWEEP OVER {config['sweep.axis'].upper()} | Method: {config['method.name']}", table))
    return 0


def cmd_compare(args, config: Dict, out_dir: Path) -> int:
    _, grid = compare_methods(ExperimentSpec(config, out_dir=out_dir, jobs=args.jobs))
    title = f"METHOD COMPARISON | Example: {config['example']}"
    print(f"\n{'='*60}\n{title}\n{'='*60}\n{grid.to_string()}\n{'='*60}\n")
    return 0


COMMANDS = {
    'forward': cmd_forward,
    'solve': cmd_solve,
    'sweep': cmd_sweep,
    'compare': cmd_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Exit code 0 on success, 1 on usage/configuration errors, 2 on runtime errors"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError:
        return 1

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"❌ Cannot create output directory {out_dir}: {e}", file=sys.stderr)
        return 2
    handlers = setup_logging(out_dir, args.verbose, args.quiet)

    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"noise.seed={args.seed}")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        config = load_config(args.config, overrides, args.protocol)

        if args.command == 'mesh':
            command = cmd_mesh_gen if args.mesh_command == 'gen' else cmd_mesh_info
        else:
            command = COMMANDS[args.command]
        return command(args, config, out_dir)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return 1
    except (InverseSourceError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ Error: {e}", file=sys.stderr)
        return 2
    finally:
        for handler in handlers:
            logging.getLogger().removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
