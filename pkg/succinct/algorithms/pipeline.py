"""
Manifest-driven pipeline and fixture generation.

A manifest is a JSON file holding a schema tag, one seed and an ordered list of steps.
Each step names an operation and its arguments; every operation returns a JSON-able
report and whether it passed.  The command-line subcommands call the same operations.
"""

import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .circuit import (CircuitDescriptor, Gate, Registers, pre_idle, spatial_sparsify,
                      toffoli_decompose)
from .clockham import (LOCALITY_BOUNDS, annihilation_check, build_3local, build_4local, build_sparse6,
                       interaction_degree, locality_audit, stoquastic_audit)
from .errors import CapExceeded, ManifestError, StepError, SuccinctError
from .exactnum import (ClassDescriptor, ExactValue, decode, encode, pack, parse_exact, ratio)
from .files import (clockham_to_json, dense_to_json, dump_json, load_circuit, load_ham, load_json,
                    load_state, resolve, save_circuit, state_from_spec)
from .oracle import (ORACLE_QUBIT_CAP, DenseHam, densify_ham, densify_state, restrict, spectrum,
                     stoquastic_check)
from .qstate import basis_strings, clock_step
from .verify import MerlinMessage, VerifierConfig, build_generator, verify
from .xform import SparseHam, complexify_to_real, fixed_node, sign_gauge

logger = logging.getLogger(__name__)

# Configuration
MANIFEST_SCHEMA = 'succinct-manifest/1'
FIXTURE_STREAMS = {'yes': 1, 'no': 2, 'spectrum': 3, 'stationarity': 4, 'circuit': 5}
YES_THRESHOLDS = ('1/8', '1/4')
PERTURBED_LAMBDA = '1/16'
FASTPATH_LAMBDA = '1'
STATIONARITY_HORIZON = 2000

StepOp = Literal['encode', 'decode', 'ratio', 'query', 'decompose', 'sparsify', 'preidle',
                 'build', 'transform', 'verify', 'audit', 'fixture']
INPUT_KEYS = ('circuit', 'ham', 'state')


class Step(BaseModel):
    model_config = ConfigDict(extra='forbid')

    op: StepOp
    args: Dict[str, Any] = Field(default_factory=dict)


class Manifest(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    schema_tag: Literal['succinct-manifest/1'] = Field(alias='schema')
    seed: int = 0
    steps: List[Step]


@dataclass
class StepContext:
    base_dir: str
    seed: int
    index: int

    def path(self, value: str) -> str:
        return resolve(value, self.base_dir)

    def substream_seed(self) -> int:
        """Per-step seed derived from the manifest seed."""
        return int(np.random.SeedSequence([self.seed, self.index]).generate_state(1)[0])


@dataclass
class PipelineReport:
    status: int
    steps: List[Dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        return {'status': self.status, 'steps': self.steps}


def load_manifest(path: str) -> Tuple[Manifest, str]:
    record = load_json(path)
    try:
        manifest = Manifest.model_validate(record)
    except ValidationError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))
    check_references(manifest, base_dir)
    return manifest, base_dir


def check_references(manifest: Manifest, base_dir: str):
    """Every input file exists on disk or is written by an earlier step."""
    produced = set()
    for index, step in enumerate(manifest.steps, 1):
        for key in INPUT_KEYS:
            value = step.args.get(key)
            if isinstance(value, str):
                path = os.path.normpath(resolve(value, base_dir))
                if path not in produced and not os.path.exists(path):
                    raise ManifestError(f"step {index} ({step.op}) references missing file {value}")
        for key in ('out', 'report'):
            value = step.args.get(key)
            if isinstance(value, str):
                produced.add(os.path.normpath(resolve(value, base_dir)))


def run_pipeline(manifest: Manifest, base_dir: str) -> PipelineReport:
    """Run steps in order; StepError on a structural failure, status 1 on a rejection or failed audit."""
    report = PipelineReport(0)
    for index, step in enumerate(manifest.steps, 1):
        ctx = StepContext(base_dir, manifest.seed, index)
        try:
            result, ok = OPERATIONS[step.op](step.args, ctx)
        except (SuccinctError, ValueError, KeyError) as exc:
            raise StepError(index, f"{step.op}: {exc}") from exc
        report.steps.append({'index': index, 'op': step.op, 'ok': ok, 'result': result})
        logger.info("step %d (%s): %s", index, step.op, 'ok' if ok else 'failed')
        if not ok:
            report.status = 1
    return report


# operations

def op_encode(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    value = parse_exact(str(args['value']))
    if args.get('class'):
        cls = ClassDescriptor.parse(args['class'])
        return {'value': str(value), 'class': str(cls), 'bits': str(encode(value, cls))}, True
    packed = pack(value)
    return {'value': str(value), 'class': packed['class'], 'bits': packed['bits']}, True


def op_decode(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    cls = ClassDescriptor.parse(args['class'])
    value = decode(str(args['bits']), cls)
    return {'value': str(value), 'class': str(cls), 'canonical': str(value.canonical())}, True


def op_ratio(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    cls = ClassDescriptor.parse(args['class'])
    value, out_cls = ratio(parse_exact(str(args['x'])), parse_exact(str(args['y'])), cls)
    return {'value': str(value), 'class': str(out_cls), 'bits': str(encode(value, out_cls)),
            'width': out_cls.width}, True


def op_query(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    state = load_state(ctx.path(args['state']))
    x = str(args['x'])
    value = state(x)
    packed = pack(value)
    return {'x': x, 'value': str(value), 'class': packed['class'], 'bits': packed['bits'],
            'scale': str(state.scale)}, True


def op_decompose(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    c = load_circuit(ctx.path(args['circuit']))
    stec = toffoli_decompose(c)
    if args.get('out'):
        save_circuit(ctx.path(args['out']), stec.expanded)
    return {'toffolis': c.K, 'gates': stec.expanded.K, 'hadamards': stec.expanded.count('H')}, True


def op_sparsify(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    c = load_circuit(ctx.path(args['circuit']))
    sparse = spatial_sparsify(c, unit_expand=bool(args.get('unit_expand', False)),
                              swap_as_cnots=bool(args.get('swap_as_cnots', False)))
    if args.get('out'):
        save_circuit(ctx.path(args['out']), sparse)
    return {'qubits': sparse.M, 'operations': sparse.K, 'layout': list(sparse.layout or (0, c.M))}, True


def op_preidle(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    c = load_circuit(ctx.path(args['circuit']))
    padded = pre_idle(c)
    if args.get('out'):
        save_circuit(ctx.path(args['out']), padded)
    return {'gates': c.K, 'padded': padded.K, 'steps': padded.K + 1}, True


def build_clockham(variant: str, c: CircuitDescriptor, x: str, xi: str):
    if variant == '4local':
        return build_4local(c, x, xi)
    if variant == '3local':
        return build_3local(toffoli_decompose(c) if c.count('TOF') else c, x, xi)
    if variant == 'sparse6':
        sparse = c if c.layout is not None else spatial_sparsify(c, unit_expand=True)
        return build_sparse6(sparse, x, xi)
    raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(LOCALITY_BOUNDS)}")


def op_build(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    c = load_circuit(ctx.path(args['circuit']))
    h = build_clockham(args['variant'], c, str(args.get('input', '')), str(args.get('proof', '')))
    if args.get('out'):
        dump_json(clockham_to_json(h), ctx.path(args['out']))
    local_ok = locality_audit(h)
    result = {'variant': h.variant, 'terms': len(h.terms), 'data_qubits': h.data_qubits,
              'clock_qubits': h.clock_qubits, 'locality': h.locality, 'locality_ok': local_ok,
              'interaction_degree': interaction_degree(h)}
    if h.variant != '3local':
        result['non_stoquastic_terms'] = stoquastic_audit(h)
        local_ok = local_ok and not result['non_stoquastic_terms']
    return result, local_ok


def op_transform(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    H, header = load_ham(ctx.path(args['ham']))
    kind = args['op']
    if kind == 'real':
        out = complexify_to_real(H)
    elif kind in ('fixednode', 'gauge'):
        xi = load_state(ctx.path(args['state']))
        out = fixed_node(H, xi) if kind == 'fixednode' else sign_gauge(H, xi)
    else:
        raise ValueError(f"unknown transform {kind!r}; expected real, fixednode or gauge")
    dense = densify_ham(out)
    if args.get('out'):
        dump_json(dense_to_json(dense, kind), ctx.path(args['out']))
    return {'op': kind, 'qubits': out.n, 'nonzeros': len(dense.entries), 'source': header.get('variant')}, True


def _verifier_config(args: Dict[str, Any], ctx: StepContext) -> VerifierConfig:
    t_max = args.get('tmax')
    return VerifierConfig(
        a=parse_exact(str(args.get('a', YES_THRESHOLDS[0]))),
        b=parse_exact(str(args.get('b', YES_THRESHOLDS[1]))),
        t_max=Fraction(str(t_max)) if t_max is not None else None,
        trials=int(args.get('trials', 100)),
        seed=int(args['seed']) if 'seed' in args else ctx.substream_seed(),
        max_jumps=int(args['max_jumps']) if args.get('max_jumps') is not None else None,
        workers=int(args.get('workers', 1)),
    )


def op_verify(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    H, _ = load_ham(ctx.path(args['ham']))
    xi = load_state(ctx.path(args['state']))
    msg = MerlinMessage(parse_exact(str(args['lambda'])), xi, str(args['xstar']))
    verdict = verify(H, msg, _verifier_config(args, ctx))
    report = verdict.to_report()
    if args.get('report'):
        dump_json(report, ctx.path(args['report']))
    return report, verdict.accepted


def op_audit(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    """Oracle checks: state, ham, spectrum, stoq, annihilation."""
    what = args['what']
    if what == 'state':
        state = load_state(ctx.path(args['state']))
        dense, scale = densify_state(state)
        return {'what': what, 'support': len(dense.amplitudes), 'scale': str(scale),
                'norm_squared': str(dense.norm_squared())}, dense.norm_squared() == 1
    if what == 'annihilation':
        c = load_circuit(ctx.path(args['circuit']))
        h = build_clockham(args['variant'], c, str(args.get('input', '')), str(args.get('proof', '')))
        check = annihilation_check(h)
        ok = check.full_ok if h.variant == 'sparse6' else check.legal_ok
        return {'what': what, 'variant': h.variant, 'expectation': str(check.expectation),
                'legal_residual': check.legal_residual, 'full_residual': check.full_residual}, ok
    H, header = load_ham(ctx.path(args['ham']))
    dense = densify_ham(H)
    if what == 'ham':
        return {'what': what, 'nonzeros': len(dense.entries), 'hermitian': dense.is_hermitian()}, dense.is_hermitian()
    if what == 'stoq':
        ok = stoquastic_check(dense)
        return {'what': what, 'stoquastic': ok}, ok
    if what == 'spectrum':
        data_qubits = args.get('data_qubits')
        if data_qubits is not None:
            dense, basis = restrict(dense, lambda x: _legal_clock(x, int(data_qubits)))
            spec = spectrum(dense, basis)
        else:
            spec = spectrum(dense)
        count = int(args.get('count', 8))
        return {'what': what, 'dimension': len(spec.basis), 'eigenvalues': [float(v) for v in spec.eigenvalues[:count]],
                'residual': spec.residual, 'ground_energy': spec.ground_energy}, True
    raise ValueError(f"unknown audit {what!r}")


def _legal_clock(x: str, data_qubits: int) -> bool:
    try:
        clock_step(x[data_qubits:])
    except SuccinctError:
        return False
    return True


def op_fixture(args: Dict[str, Any], ctx: StepContext) -> Tuple[Dict[str, Any], bool]:
    written = make_fixture(args['kind'], ctx.path(args.get('out', '.')), n=int(args.get('n', 3)),
                           seed=int(args.get('seed', ctx.seed)), variant=args.get('variant'))
    return {'kind': args['kind'], 'files': [os.path.basename(p) for p in written]}, True


OPERATIONS: Dict[str, Callable[[Dict[str, Any], StepContext], Tuple[Dict[str, Any], bool]]] = {
    'encode': op_encode, 'decode': op_decode, 'ratio': op_ratio, 'query': op_query,
    'decompose': op_decompose, 'sparsify': op_sparsify, 'preidle': op_preidle,
    'build': op_build, 'transform': op_transform, 'verify': op_verify, 'audit': op_audit,
    'fixture': op_fixture,
}


# fixtures

def _rng(kind: str, seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, FIXTURE_STREAMS[kind]]))


def _exact(q) -> ExactValue:
    q = sympy.Rational(q)
    return ExactValue.of(Fraction(int(q.p), int(q.q)))


def _literal(q) -> str:
    q = sympy.Rational(q)
    return str(q.p) if q.q == 1 else f"{q.p}/{q.q}"


def ground_state_instance(n: int, rng: np.random.Generator) -> Tuple[sympy.Matrix, sympy.Matrix]:
    """
    A real Hamiltonian with an exact ground state: H = P B P with P the projector
    orthogonal to a rational xi and B diagonally dominant, hence positive definite.
    The ground energy is 0 and the kernel is exactly span(xi).
    """
    dim = 2 ** n
    signs = rng.choice([-1, 1], size=dim)
    xi = sympy.Matrix([int(s) * int(v) for s, v in zip(signs, rng.integers(1, 4, size=dim))])
    B = sympy.zeros(dim, dim)
    for i in range(dim):
        for j in range(i + 1, dim):
            if rng.random() < 0.5:
                B[i, j] = B[j, i] = int(rng.integers(-2, 3))
    for i in range(dim):
        B[i, i] = sum(abs(B[i, j]) for j in range(dim) if j != i) + 1 + int(rng.integers(0, 3))
    P = sympy.eye(dim) - xi * xi.T / (xi.T * xi)[0, 0]
    return P * B * P, xi


def _dense_from_matrix(matrix: sympy.Matrix, n: int) -> DenseHam:
    strings = list(basis_strings(n))
    entries = {}
    for i, x in enumerate(strings):
        for j, y in enumerate(strings):
            if matrix[i, j] != 0:
                entries[(x, y)] = _exact(matrix[i, j])
    return DenseHam(n, entries)


def _table_spec(xi: sympy.Matrix, n: int) -> Dict[str, Any]:
    strings = list(basis_strings(n))
    return {'kind': 'table', 'n': n, 'label': 'xi',
            'amplitudes': {x: _literal(xi[i]) for i, x in enumerate(strings) if xi[i] != 0}}


def _verify_manifest(seed: int, lam: str, xstar: str, trials: int = 100, **extra) -> Dict[str, Any]:
    args = {'ham': 'ham.json', 'state': 'state.json', 'lambda': lam, 'xstar': xstar,
            'a': YES_THRESHOLDS[0], 'b': YES_THRESHOLDS[1], 'trials': trials, 'report': 'report.json'}
    args.update(extra)
    return {'schema': MANIFEST_SCHEMA, 'seed': seed, 'steps': [{'op': 'verify', 'args': args}]}


def _first_illegal(H: DenseHam, xi_spec: Dict[str, Any], n: int) -> Optional[str]:
    state = state_from_spec(xi_spec)
    F = fixed_node(SparseHam.from_dense(n, H.entries), state)
    g = build_generator(F, MerlinMessage(ExactValue.of(0), state, '0' * n))
    for x in basis_strings(n):
        if not state(x).is_zero and not g.legality(x).legal:
            return x
    return None


def accepting_circuit(n_inputs: int, m: int, p: int, depth: int, rng: np.random.Generator) -> CircuitDescriptor:
    """
    Deterministically accepting verifier: a random reversible block, its inverse,
    then X on a zero ancilla that serves as the output.
    """
    registers = Registers(n_inputs, 0, m + 1, p)
    M = registers.total
    output = n_inputs + 1
    work = [q for q in range(1, M + 1) if q != output]
    block: List[Gate] = []
    for _ in range(depth):
        kind = ['X', 'CNOT', 'TOF'][int(rng.integers(0, 3))] if len(work) >= 3 else 'X'
        arity = {'X': 1, 'CNOT': 2, 'TOF': 3}[kind]
        qubits = tuple(int(q) for q in rng.choice(work, size=arity, replace=False))
        block.append(Gate(kind, qubits))
    gates = block + list(reversed(block)) + [Gate('X', (output,))]
    return CircuitDescriptor(registers, (), None, output).with_gates(gates)


def make_fixture(kind: str, out_dir: str, n: int = 3, seed: int = 0, variant: Optional[str] = None) -> List[str]:
    """
    Write one deterministic fixture family member into out_dir.

        yes           exact ground state, lambda* = lambda_0 = 0
        no            variant fastpath (lambda* > b), perturbed (lambda* != lambda_0)
                      or nonground (xi not an eigenvector, x* illegal)
        spectrum      random complex Hermitian hamfile for the doubling check
        stationarity  yes instance with a single long trajectory
        circuit       deterministically accepting Toffoli verifier
    """
    if n > ORACLE_QUBIT_CAP:
        raise CapExceeded(f"fixtures on {n} qubits exceed the oracle cap of {ORACLE_QUBIT_CAP}")
    if kind not in FIXTURE_STREAMS:
        raise ValueError(f"unknown fixture kind {kind!r}")
    os.makedirs(out_dir, exist_ok=True)
    rng = _rng(kind, seed)
    written: List[str] = []

    def write(name: str, record: Any) -> None:
        path = os.path.join(out_dir, name)
        dump_json(record, path)
        written.append(path)

    if kind == 'circuit':
        c = accepting_circuit(max(n - 2, 1), 1, 0, 1, rng)
        path = os.path.join(out_dir, 'accept.circ')
        save_circuit(path, c)
        written.append(path)
        inputs = ''.join(str(int(b)) for b in rng.integers(0, 2, size=c.roles.count('x')))
        write('manifest.json', {'schema': MANIFEST_SCHEMA, 'seed': seed, 'steps': [
            {'op': 'audit', 'args': {'what': 'annihilation', 'variant': v, 'circuit': 'accept.circ',
                                     'input': inputs}} for v in ('4local', '3local', 'sparse6')]})
        return written

    if kind == 'spectrum':
        dim = 2 ** n
        entries = {}
        strings = list(basis_strings(n))
        for i in range(dim):
            entries[(strings[i], strings[i])] = ExactValue.of(int(rng.integers(-3, 4)))
            for j in range(i + 1, dim):
                re, im = (int(v) for v in rng.integers(-2, 3, size=2))
                if re or im:
                    entries[(strings[i], strings[j])] = ExactValue.of(re, im)
                    entries[(strings[j], strings[i])] = ExactValue.of(re, -im)
        write('ham.json', dense_to_json(DenseHam(n, entries), 'dense'))
        write('manifest.json', {'schema': MANIFEST_SCHEMA, 'seed': seed, 'steps': [
            {'op': 'audit', 'args': {'what': 'spectrum', 'ham': 'ham.json', 'count': dim}},
            {'op': 'transform', 'args': {'op': 'real', 'ham': 'ham.json', 'out': 'real.json'}},
            {'op': 'audit', 'args': {'what': 'spectrum', 'ham': 'real.json', 'count': 2 * dim}}]})
        return written

    H_matrix, xi = ground_state_instance(n, rng)
    H = _dense_from_matrix(H_matrix, n)
    spec_check = spectrum(H)
    if spec_check.gap < 1e-9:
        logger.warning("%s fixture (seed %d) has a degenerate ground level", kind, seed)
    strings = list(basis_strings(n))
    xstar = strings[max(range(len(strings)), key=lambda i: (abs(xi[i]), -i))]
    spec = _table_spec(xi, n)
    lam = '0'

    if kind == 'no':
        variant = variant or 'perturbed'
        if variant == 'fastpath':
            lam = FASTPATH_LAMBDA
        elif variant == 'perturbed':
            lam = PERTURBED_LAMBDA
        elif variant == 'nonground':
            index = int(rng.integers(0, len(strings)))
            xi[index] = xi[index] + (1 if xi[index] > 0 else -1)
            spec = _table_spec(xi, n)
            xstar = _first_illegal(H, spec, n) or xstar
        else:
            raise ValueError(f"unknown no-fixture variant {variant!r}")

    write('ham.json', dense_to_json(H, 'dense'))
    write('state.json', spec)
    if kind == 'stationarity':
        write('manifest.json', _verify_manifest(seed, lam, xstar, trials=1, tmax=STATIONARITY_HORIZON,
                                                max_jumps=100000))
    else:
        write('manifest.json', _verify_manifest(seed, lam, xstar))
    logger.info("wrote %s fixture (%s) with %d files to %s", kind, variant or '-', len(written), out_dir)
    return written
