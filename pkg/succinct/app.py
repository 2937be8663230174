"""
succinct: exact succinct-state tools.

    python app.py num encode --family Q --p 4 --value -3/4
    python app.py state query --spec data/history_state.json --x 0110
    python app.py circuit decompose --in data/toffoli.circ --out /tmp/stec.circ
    python app.py ham build --variant 4local --circuit data/toffoli.circ --input 11 --out /tmp/h.json
    python app.py verify --ham data/two_level/ham.json --state data/two_level/state.json --lambda 0 --xstar 0
    python app.py run data/two_level/manifest.json
    python app.py fixture make --kind yes --n 3 --seed 7 --out /tmp/yes
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List

import pandas as pd

from algorithms.errors import SuccinctError
from algorithms.files import dump_json
from algorithms.pipeline import OPERATIONS, StepContext, load_manifest, run_pipeline


def render(report: Dict[str, Any], fmt: str) -> str:
    if fmt == 'json':
        return dump_json(report)
    lines: List[str] = []
    for key in sorted(report):
        value = report[key]
        if isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            lines.append(f"{key}:")
            lines.append(pd.DataFrame(value).to_string(index=False))
        elif isinstance(value, dict):
            lines.append(f"{key}:")
            lines.extend(f"  {k}: {v}" for k, v in sorted(value.items()))
        else:
            lines.append(f"{key}: {value}")
    return '\n'.join(lines) + '\n'


def class_text(args: argparse.Namespace) -> str:
    if args.cls:
        return args.cls
    if not args.family:
        return ''
    return f"{args.family}:{args.p}" + (f":{args.flags}" if args.flags else '')


def step_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Map parsed flags onto the argument dict of a pipeline operation."""
    command = args.command
    if command == 'num':
        out = {'class': class_text(args)}
        if args.action == 'encode':
            out['value'] = args.value
        elif args.action == 'decode':
            out['bits'] = args.bits
        else:
            out.update(x=args.x, y=args.y)
        return out
    if command == 'state':
        return {'state': args.spec, 'x': args.x}
    if command == 'circuit':
        return {'circuit': args.input, 'out': args.out, 'unit_expand': args.unit_expand,
                'swap_as_cnots': args.swap_as_cnots}
    if command == 'ham' and args.action == 'build':
        return {'variant': args.variant, 'circuit': args.circuit, 'input': args.input,
                'proof': args.proof, 'out': args.out}
    if command == 'ham':
        return {'op': args.op, 'ham': args.ham, 'state': args.state, 'out': args.out}
    if command == 'verify':
        out = {'ham': args.ham, 'state': args.state, 'lambda': args.lam, 'xstar': args.xstar,
               'a': args.a, 'b': args.b, 'trials': args.trials, 'seed': args.seed,
               'workers': args.workers, 'report': args.report}
        if args.tmax is not None:
            out['tmax'] = args.tmax
        if args.max_jumps is not None:
            out['max_jumps'] = args.max_jumps
        return out
    if command == 'oracle':
        out = {'what': args.what, 'ham': args.ham, 'state': args.state, 'circuit': args.circuit,
               'variant': args.variant, 'input': args.input, 'proof': args.proof}
        if args.data_qubits is not None:
            out['data_qubits'] = args.data_qubits
        return {k: v for k, v in out.items() if v is not None}
    if command == 'fixture':
        return {'kind': args.kind, 'n': args.n, 'seed': args.seed, 'variant': args.variant, 'out': args.out}
    raise ValueError(f"no operation for {command}")


OPERATION_FOR = {
    ('num', 'encode'): 'encode', ('num', 'decode'): 'decode', ('num', 'ratio'): 'ratio',
    ('state', 'query'): 'query',
    ('circuit', 'decompose'): 'decompose', ('circuit', 'sparsify'): 'sparsify', ('circuit', 'preidle'): 'preidle',
    ('ham', 'build'): 'build', ('ham', 'transform'): 'transform',
    ('verify', None): 'verify', ('oracle', 'check'): 'audit', ('fixture', 'make'): 'fixture',
}


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Exact succinct-state encodings, clock Hamiltonians and verification.")
    parser.add_argument('--format', choices=['text', 'json'], default='text', help="report format")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="-v for INFO, -vv for DEBUG")
    commands = parser.add_subparsers(dest='command', required=True)

    num = commands.add_parser('num', help="exact number encodings")
    num.add_argument('action', choices=['encode', 'decode', 'ratio'])
    num.add_argument('--family', choices=['N', 'Q+', 'Q', 'C'])
    num.add_argument('--p', type=int, default=4)
    num.add_argument('--flags', default='', help="comma list, e.g. sqrt,omega or sqrthalf=2")
    num.add_argument('--class', dest='cls', default='', help="full descriptor, e.g. C:3:omega=3")
    num.add_argument('--value')
    num.add_argument('--bits')
    num.add_argument('--x')
    num.add_argument('--y')

    state = commands.add_parser('state', help="amplitude queries")
    state.add_argument('action', choices=['query'])
    state.add_argument('--spec', required=True)
    state.add_argument('--x', required=True)

    circuit = commands.add_parser('circuit', help="circuit rewriting")
    circuit.add_argument('action', choices=['decompose', 'sparsify', 'preidle'])
    circuit.add_argument('--in', dest='input', required=True)
    circuit.add_argument('--out')
    circuit.add_argument('--unit-expand', action='store_true')
    circuit.add_argument('--swap-as-cnots', action='store_true')

    ham = commands.add_parser('ham', help="clock Hamiltonians and transforms")
    ham.add_argument('action', choices=['build', 'transform'])
    ham.add_argument('--variant', choices=['4local', '3local', 'sparse6'], default='4local')
    ham.add_argument('--circuit')
    ham.add_argument('--input', default='')
    ham.add_argument('--proof', default='')
    ham.add_argument('--op', choices=['real', 'fixednode', 'gauge'], default='real')
    ham.add_argument('--ham')
    ham.add_argument('--state')
    ham.add_argument('--out')

    verify = commands.add_parser('verify', help="Markov-chain verification")
    verify.add_argument('--ham', required=True)
    verify.add_argument('--state', required=True)
    verify.add_argument('--lambda', dest='lam', required=True)
    verify.add_argument('--xstar', required=True)
    verify.add_argument('--a', default='1/8')
    verify.add_argument('--b', default='1/4')
    verify.add_argument('--trials', type=int, default=100)
    verify.add_argument('--tmax')
    verify.add_argument('--seed', type=int, default=0)
    verify.add_argument('--max-jumps', type=int)
    verify.add_argument('--workers', type=int, default=1)
    verify.add_argument('--report')

    oracle = commands.add_parser('oracle', help="dense brute-force checks")
    oracle.add_argument('action', choices=['check'])
    oracle.add_argument('--what', choices=['state', 'ham', 'spectrum', 'stoq', 'annihilation'], required=True)
    oracle.add_argument('--ham')
    oracle.add_argument('--state')
    oracle.add_argument('--circuit')
    oracle.add_argument('--variant', choices=['4local', '3local', 'sparse6'])
    oracle.add_argument('--input')
    oracle.add_argument('--proof')
    oracle.add_argument('--data-qubits', type=int, help="restrict the spectrum to legal clock words")

    run = commands.add_parser('run', help="run a manifest")
    run.add_argument('manifest')

    fixture = commands.add_parser('fixture', help="deterministic fixtures")
    fixture.add_argument('action', choices=['make'])
    fixture.add_argument('--kind', choices=['yes', 'no', 'spectrum', 'stationarity', 'circuit'], required=True)
    fixture.add_argument('--variant', choices=['fastpath', 'perturbed', 'nonground'])
    fixture.add_argument('--n', type=int, default=3)
    fixture.add_argument('--seed', type=int, default=0)
    fixture.add_argument('--out', required=True)

    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        if args.command == 'run':
            manifest, base_dir = load_manifest(args.manifest)
            report = run_pipeline(manifest, base_dir)
            print(render(report.to_json(), args.format), end='')
            return report.status

        op = OPERATION_FOR[(args.command, getattr(args, 'action', None))]
        ctx = StepContext(os.getcwd(), getattr(args, 'seed', 0) or 0, 0)
        result, ok = OPERATIONS[op](step_args(args), ctx)
    except (SuccinctError, ValueError) as err:
        print(f"Error: {err}", file=sys.stderr)
        return 2
    except KeyError as err:
        print(f"Error: missing argument {err}", file=sys.stderr)
        return 2

    print(render(result, args.format), end='')
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
