"""
Circuit descriptors: parsing, Toffoli -> Clifford+T expansion with block tracking,
the row-snake sparsification and pre-idling.

Text format, one record per line, '#' starts a comment:

    REG n w m p        register sizes (input, proof, zero ancilla, plus ancilla)
    ROLES xxw00++      optional explicit per-qubit roles over {x, w, 0, +}
    OUT q              output qubit (defaults to 1)
    ROWS K N           written by spatial_sparsify
    <KIND> <idx...>    gates, 1-based indices: X CNOT TOF H T TDG ID SWAP
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import CircuitSyntaxError, IndexOutOfRange, NonClassicalGate, NonToffoliGate

logger = logging.getLogger(__name__)

GATE_ARITY = {'X': 1, 'CNOT': 2, 'TOF': 3, 'H': 1, 'T': 1, 'TDG': 1, 'ID': 1, 'SWAP': 2}
CLASSICAL_KINDS = frozenset({'X', 'CNOT', 'TOF', 'ID', 'SWAP'})
ROLE_CHARS = frozenset('xw0+')

# Toffoli[a, b; c] as 15 gates on wires (a, b, c) = (control, control, target)
TOFFOLI_BLOCK: Tuple[Tuple[str, str], ...] = (
    ('T', 'a'), ('CNOT', 'ab'), ('TDG', 'b'), ('CNOT', 'ab'), ('T', 'b'),
    ('H', 'c'), ('CNOT', 'bc'), ('TDG', 'c'), ('CNOT', 'ac'), ('T', 'c'),
    ('CNOT', 'bc'), ('TDG', 'c'), ('CNOT', 'ac'), ('T', 'c'), ('H', 'c'),
)
BLOCK_LENGTH = len(TOFFOLI_BLOCK)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: Tuple[int, ...]
    position: int = 0

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {GATE_ARITY[self.kind]} qubit(s)")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind} repeats a qubit: {self.qubits}")

    @property
    def is_classical(self) -> bool:
        return self.kind in CLASSICAL_KINDS

    def apply_classical(self, bits: str) -> str:
        """Image of a basis string under a classical gate."""
        q = [i - 1 for i in self.qubits]
        if self.kind == 'ID':
            return bits
        out = list(bits)
        if self.kind == 'X':
            out[q[0]] = '1' if out[q[0]] == '0' else '0'
        elif self.kind == 'CNOT':
            if out[q[0]] == '1':
                out[q[1]] = '1' if out[q[1]] == '0' else '0'
        elif self.kind == 'TOF':
            if out[q[0]] == '1' and out[q[1]] == '1':
                out[q[2]] = '1' if out[q[2]] == '0' else '0'
        elif self.kind == 'SWAP':
            out[q[0]], out[q[1]] = out[q[1]], out[q[0]]
        else:
            raise NonClassicalGate(f"{self.kind} at position {self.position} is not a permutation")
        return ''.join(out)

    def inverse(self) -> 'Gate':
        flipped = {'T': 'TDG', 'TDG': 'T'}.get(self.kind, self.kind)
        return replace(self, kind=flipped)

    def __str__(self) -> str:
        return ' '.join([self.kind] + [str(q) for q in self.qubits])


@dataclass(frozen=True)
class Registers:
    n: int = 0
    w: int = 0
    m: int = 0
    p: int = 0

    @property
    def total(self) -> int:
        return self.n + self.w + self.m + self.p

    def roles(self) -> str:
        return 'x' * self.n + 'w' * self.w + '0' * self.m + '+' * self.p


@dataclass(frozen=True)
class CircuitDescriptor:
    registers: Registers
    gates: Tuple[Gate, ...] = ()
    roles: Optional[str] = None
    output_qubit: int = 1
    layout: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if self.roles is None:
            object.__setattr__(self, 'roles', self.registers.roles())
        if len(self.roles) != self.registers.total or set(self.roles) - ROLE_CHARS:
            raise ValueError(f"roles {self.roles!r} do not describe {self.registers.total} qubits")
        if self.roles.count('+') % 2:
            raise ValueError("the plus-ancilla count must be even")
        if self.M and not 1 <= self.output_qubit <= self.M:
            raise IndexOutOfRange(f"output qubit {self.output_qubit} outside 1..{self.M}")
        for gate in self.gates:
            for q in gate.qubits:
                if not 1 <= q <= self.M:
                    raise IndexOutOfRange(f"{gate} (position {gate.position}) uses qubit outside 1..{self.M}")

    @property
    def M(self) -> int:
        return self.registers.total

    @property
    def K(self) -> int:
        return len(self.gates)

    @property
    def is_classical(self) -> bool:
        return all(g.is_classical for g in self.gates)

    def with_gates(self, gates: Iterable[Gate], **changes) -> 'CircuitDescriptor':
        numbered = tuple(replace(g, position=i) for i, g in enumerate(gates, 1))
        return replace(self, gates=numbered, **changes)

    def prefix(self, k: int) -> Tuple[Gate, ...]:
        return self.gates[:k]

    def count(self, *kinds: str) -> int:
        return sum(1 for g in self.gates if g.kind in kinds)


@dataclass(frozen=True)
class StecDescriptor:
    """A Toffoli circuit and its 15-gates-per-block Clifford+T expansion."""
    base: CircuitDescriptor
    expanded: CircuitDescriptor

    @staticmethod
    def block_map(j: int) -> Tuple[int, int]:
        """Expanded position j (1-based) -> (block, offset), both 1-based."""
        if j < 1:
            raise ValueError("positions are 1-based")
        return (j - 1) // BLOCK_LENGTH + 1, (j - 1) % BLOCK_LENGTH + 1

    @staticmethod
    def split_prefix(j: int) -> Tuple[int, int]:
        """A prefix of j expanded gates = (completed Toffoli blocks, gates into the next block)."""
        return divmod(j, BLOCK_LENGTH)


def parse(text: str) -> CircuitDescriptor:
    registers: Optional[Registers] = None
    roles: Optional[str] = None
    output = 1
    layout = None
    gates: List[Gate] = []
    gate_lines: List[int] = []

    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0].upper()
        args = tokens[1:]
        try:
            if kind == 'REG':
                if registers is not None or len(args) != 4:
                    raise CircuitSyntaxError(line_no, "REG takes four sizes and appears once")
                registers = Registers(*(int(a) for a in args))
                if min(registers.n, registers.w, registers.m, registers.p) < 0:
                    raise CircuitSyntaxError(line_no, "register sizes are nonnegative")
            elif kind == 'ROLES':
                if len(args) != 1:
                    raise CircuitSyntaxError(line_no, "ROLES takes one role string")
                roles = args[0]
            elif kind == 'OUT':
                if len(args) != 1:
                    raise CircuitSyntaxError(line_no, "OUT takes one qubit index")
                output = int(args[0])
            elif kind == 'ROWS':
                if len(args) != 2:
                    raise CircuitSyntaxError(line_no, "ROWS takes K and N")
                layout = (int(args[0]), int(args[1]))
            elif kind in GATE_ARITY:
                if registers is None:
                    raise CircuitSyntaxError(line_no, "gate before the REG header")
                if len(args) != GATE_ARITY[kind]:
                    raise CircuitSyntaxError(line_no, f"{kind} takes {GATE_ARITY[kind]} index(es)")
                qubits = tuple(int(a) for a in args)
                if len(set(qubits)) != len(qubits):
                    raise CircuitSyntaxError(line_no, f"{kind} repeats a qubit")
                for q in qubits:
                    if not 1 <= q <= registers.total:
                        raise IndexOutOfRange(f"line {line_no}: qubit {q} outside 1..{registers.total}")
                gates.append(Gate(kind, qubits, len(gates) + 1))
                gate_lines.append(line_no)
            else:
                raise CircuitSyntaxError(line_no, f"unknown record {tokens[0]!r}")
        except ValueError as exc:
            raise CircuitSyntaxError(line_no, str(exc)) from exc

    if registers is None:
        registers = Registers()
    try:
        return CircuitDescriptor(registers, tuple(gates), roles, output, layout)
    except ValueError as exc:
        raise CircuitSyntaxError(0, str(exc)) from exc


def dumps(c: CircuitDescriptor) -> str:
    r = c.registers
    lines = [f"REG {r.n} {r.w} {r.m} {r.p}"]
    if c.roles != r.roles():
        lines.append(f"ROLES {c.roles}")
    if c.output_qubit != 1:
        lines.append(f"OUT {c.output_qubit}")
    if c.layout is not None:
        lines.append(f"ROWS {c.layout[0]} {c.layout[1]}")
    lines.extend(str(g) for g in c.gates)
    return '\n'.join(lines) + '\n'


def toffoli_decompose(c: CircuitDescriptor) -> StecDescriptor:
    expanded: List[Gate] = []
    for gate in c.gates:
        if gate.kind != 'TOF':
            raise NonToffoliGate(f"{gate} at position {gate.position} is not a Toffoli")
        wires = dict(zip('abc', gate.qubits))
        for kind, labels in TOFFOLI_BLOCK:
            expanded.append(Gate(kind, tuple(wires[w] for w in labels)))
    logger.info("expanded %d Toffoli gates into %d Clifford+T gates", c.K, len(expanded))
    return StecDescriptor(c, c.with_gates(expanded))


def lower_swaps(c: CircuitDescriptor) -> CircuitDescriptor:
    gates: List[Gate] = []
    for gate in c.gates:
        if gate.kind == 'SWAP':
            a, b = gate.qubits
            gates += [Gate('CNOT', (a, b)), Gate('CNOT', (b, a)), Gate('CNOT', (a, b))]
        else:
            gates.append(gate)
    return c.with_gates(gates)


def invert(c: CircuitDescriptor) -> CircuitDescriptor:
    return c.with_gates(g.inverse() for g in reversed(c.gates))


def spatial_sparsify(c: CircuitDescriptor, unit_expand: bool = False,
                     swap_as_cnots: bool = False) -> CircuitDescriptor:
    """
    Lay the K gates out on K rows of N qubits: R_1 acts on row 1, then for each
    later j a SWAP layer moves row j-1 into row j before R_j acts there.  With
    unit_expand each R_j is followed by N-1 identity steps so the operation count
    is (2K-1)N.  Input and proof live in row 1 only; the + column is a coin in
    every row and every other column of rows > 1 starts in |0>.
    """
    for gate in c.gates:
        if not gate.is_classical:
            raise NonClassicalGate(f"{gate} at position {gate.position} cannot be sparsified")
    K, N = c.K, c.M
    if K == 0:
        return c

    def at(row: int, q: int) -> int:
        return (row - 1) * N + q

    gates: List[Gate] = []
    for row, gate in enumerate(c.gates, 1):
        if row > 1:
            for q in range(N, 0, -1):
                a, b = at(row - 1, q), at(row, q)
                if swap_as_cnots:
                    gates += [Gate('CNOT', (a, b)), Gate('CNOT', (b, a)), Gate('CNOT', (a, b))]
                else:
                    gates.append(Gate('SWAP', (a, b)))
        gates.append(Gate(gate.kind, tuple(at(row, q) for q in gate.qubits)))
        if unit_expand:
            idle = [q for q in range(1, N + 1) if q not in gate.qubits][:N - 1]
            idle += [gate.qubits[0]] * (N - 1 - len(idle))
            gates += [Gate('ID', (at(row, q),)) for q in idle]

    roles = c.roles + ''.join('+' if r == '+' else '0' for r in c.roles) * (K - 1)
    counts = {ch: roles.count(ch) for ch in 'xw0+'}
    registers = Registers(counts['x'], counts['w'], counts['0'], counts['+'])
    sparse = CircuitDescriptor(registers, (), roles, at(K, c.output_qubit), (K, N))
    logger.info("sparsified K=%d gates on N=%d qubits into %d operations", K, N, len(gates))
    return sparse.with_gates(gates)


def idle_padding(K: int) -> int:
    """Identity gates needed so that K' + 1 is a perfect square."""
    root = math.isqrt(K + 1)
    if root * root == K + 1:
        return 0
    return (root + 1) ** 2 - (K + 1)


def pre_idle(c: CircuitDescriptor) -> CircuitDescriptor:
    pad = idle_padding(c.K)
    if pad and not c.M:
        raise ValueError("cannot idle a circuit without qubits")
    idles = [Gate('ID', (i % c.M + 1,)) for i in range(pad)]
    return c.with_gates(idles + list(c.gates))


def gate_incidence(c: CircuitDescriptor) -> Dict[int, int]:
    counts = {q: 0 for q in range(1, c.M + 1)}
    for gate in c.gates:
        for q in gate.qubits:
            counts[q] += 1
    return counts
