"""
On-disk formats: circuit text files, JSON state specs and JSON hamfiles.

Every JSON file is written with sorted keys and two-space indentation so that
identical inputs give byte-identical outputs.  Relative paths inside a spec are
resolved against the directory of the file that names them.
"""

import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .circuit import CircuitDescriptor, dumps, parse, toffoli_decompose
from .errors import FileFormatError
from .exactnum import ExactValue, pack, parse_exact, unpack
from .qstate import (AmplitudeQuery, HybridSpec, SubsetSpec, history_query_classical,
                     history_query_stec, pushforward_circuit, subset_query, table_query, tensor)
from .xform import SparseHam

logger = logging.getLogger(__name__)

# Configuration
DATA_DIR = os.path.join(os.path.dirname(__file__), '..', 'data')
HAMFILE_FORMAT = 'succinct-ham/1'


def resolve(path: str, base_dir: Optional[str] = None) -> str:
    if os.path.isabs(path) or base_dir is None:
        return path
    return os.path.join(base_dir, path)


def dump_json(obj: Any, path: Optional[str] = None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2) + '\n'
    if path is not None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            f.write(text)
    return text


def load_json(path: str) -> Any:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON ({exc})") from exc
    except FileNotFoundError as exc:
        raise FileFormatError(f"{path}: no such file") from exc


# circuits

def load_circuit(path: str) -> CircuitDescriptor:
    try:
        with open(path, 'r') as f:
            return parse(f.read())
    except FileNotFoundError as exc:
        raise FileFormatError(f"{path}: no such file") from exc


def save_circuit(path: str, c: CircuitDescriptor):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        f.write(dumps(c))


# exact values

def exact_from_json(value: Any) -> ExactValue:
    """Literal strings ('-3/4', '1/2+i', 'sqrt(1/3)'), integers or packed {bits, class} records."""
    if isinstance(value, dict):
        return unpack(value)
    if isinstance(value, bool):
        raise FileFormatError(f"{value!r} is not an exact value")
    if isinstance(value, int):
        return ExactValue.of(value)
    if isinstance(value, str):
        try:
            return parse_exact(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise FileFormatError(f"bad exact literal {value!r}: {exc}") from exc
    raise FileFormatError(f"{value!r} is not an exact value")


# state specs

def subset_from_spec(spec: Dict[str, Any]) -> SubsetSpec:
    if 'pattern' in spec:
        return SubsetSpec.from_pattern(spec['pattern'])
    if 'members' in spec:
        return SubsetSpec.from_members(int(spec['n']), spec['members'])
    raise FileFormatError("subset specs need 'members' (with 'n') or 'pattern'")


def state_from_spec(spec: Dict[str, Any], base_dir: Optional[str] = None) -> AmplitudeQuery:
    """
    Build a query from a state spec.  Kinds:

        subset   {members, n} or {pattern}, optional exact
        table    {n, amplitudes: {bits: literal}}
        history  {circuit, input, proof, variant: classical|stec, exact}
        circuit  {state: <spec>, circuit, step}
        tensor   {parts: [<spec>, ...]}
    """
    kind = spec.get('kind')
    try:
        if kind == 'subset':
            return subset_query(subset_from_spec(spec), bool(spec.get('exact', False)))
        if kind == 'table':
            amplitudes = {x: exact_from_json(v) for x, v in spec['amplitudes'].items()}
            return table_query(int(spec['n']), amplitudes, spec.get('label', 'table'))
        if kind == 'history':
            c = load_circuit(resolve(spec['circuit'], base_dir))
            x, xi = spec.get('input', ''), spec.get('proof', '')
            exact = bool(spec.get('exact', False))
            if spec.get('variant', 'classical') == 'stec':
                return history_query_stec(HybridSpec.for_circuit(toffoli_decompose(c), x, xi),
                                          exact_amplitude=exact)
            return history_query_classical(HybridSpec.for_circuit(c, x, xi), exact_amplitude=exact)
        if kind == 'circuit':
            inner = state_from_spec(spec['state'], base_dir)
            c = load_circuit(resolve(spec['circuit'], base_dir))
            step = int(spec.get('step', c.K))
            return pushforward_circuit(inner, c.with_gates(c.gates[:step]))
        if kind == 'tensor':
            parts = [state_from_spec(part, base_dir) for part in spec['parts']]
            if not parts:
                raise FileFormatError("tensor specs need at least one part")
            out = parts[0]
            for part in parts[1:]:
                out = tensor(out, part)
            return out
    except KeyError as exc:
        raise FileFormatError(f"{kind} spec is missing {exc}") from exc
    except ValueError as exc:
        raise FileFormatError(f"{kind} spec: {exc}") from exc
    raise FileFormatError(f"unknown state kind {kind!r}")


def load_state(path: str) -> AmplitudeQuery:
    return state_from_spec(load_json(path), os.path.dirname(os.path.abspath(path)))


# hamfiles

Term = Tuple[Sequence[int], Dict[Tuple[str, str], ExactValue], str]


def ham_to_json(terms: Iterable[Term], qubits: int, variant: str) -> Dict[str, Any]:
    records = []
    locality = 0
    for support, matrix, label in terms:
        locality = max(locality, len(support))
        entries = []
        for (row, col), value in sorted(matrix.items()):
            if value.is_zero:
                continue
            packed = pack(value)
            entries.append([row, col, packed['bits'], packed['class']])
        records.append({'support': list(support), 'label': label, 'entries': entries})
    return {'format': HAMFILE_FORMAT, 'qubits': qubits, 'locality': locality, 'variant': variant,
            'terms': records}


def clockham_to_json(h) -> Dict[str, Any]:
    return ham_to_json(((t.support, t.matrix, t.label) for t in h.terms), h.total_qubits, h.variant)


def dense_to_json(dense, variant: str) -> Dict[str, Any]:
    """A whole-register operator as a single term over every qubit."""
    support = list(range(1, dense.n + 1))
    return ham_to_json([(support, dict(dense.entries), variant)], dense.n, variant)


def ham_from_json(record: Dict[str, Any], source: str = 'hamfile') -> Tuple[SparseHam, Dict[str, Any]]:
    if record.get('format') != HAMFILE_FORMAT:
        raise FileFormatError(f"{source}: format {record.get('format')!r}, expected {HAMFILE_FORMAT!r}")
    try:
        n = int(record['qubits'])
        terms: List[Tuple[Tuple[int, ...], Dict[Tuple[str, str], ExactValue]]] = []
        for index, term in enumerate(record['terms']):
            support = tuple(int(q) for q in term['support'])
            if any(not 1 <= q <= n for q in support):
                raise FileFormatError(f"{source}: term {index} has support outside 1..{n}")
            matrix = {}
            for item in term['entries']:
                row, col = item[0], item[1]
                if len(row) != len(support) or len(col) != len(support):
                    raise FileFormatError(f"{source}: term {index} entry ({row}, {col}) does not match its support")
                # hand-written files may give a literal instead of bits and class
                if len(item) == 3:
                    matrix[(row, col)] = exact_from_json(item[2])
                else:
                    matrix[(row, col)] = unpack({'bits': item[2], 'class': item[3]})
            terms.append((support, matrix))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{source}: malformed hamfile ({exc})") from exc
    header = {k: record.get(k) for k in ('format', 'qubits', 'locality', 'variant')}
    sparse = SparseHam.from_terms(n, terms, f"{source}:{record.get('variant')}")
    return sparse, header


def load_ham(path: str) -> Tuple[SparseHam, Dict[str, Any]]:
    return ham_from_json(load_json(path), path)
