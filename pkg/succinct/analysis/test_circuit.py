import sys
import os
# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import itertools
import math

import numpy as np
import pytest

from algorithms.circuit import (BLOCK_LENGTH, Gate, StecDescriptor, dumps, gate_incidence, idle_padding,
                                invert, lower_swaps, parse, pre_idle, spatial_sparsify, toffoli_decompose)
from algorithms.errors import (CircuitSyntaxError, IndexOutOfRange, NonClassicalGate, NonToffoliGate)
from algorithms.files import DATA_DIR, load_circuit
from algorithms.oracle import DenseState, accept_probability, initial_state, simulate
from algorithms.qstate import basis_strings

PARITY = "REG 2 0 1 0\nOUT 3\nCNOT 1 3\nCNOT 2 3\n"


def test_parse_header_and_gates():
    c = parse("# a comment\nREG 2 0 1 0\nOUT 3\nTOF 1 2 3  # trailing\n")
    assert (c.M, c.K, c.output_qubit, c.roles) == (3, 1, 3, 'xx0')
    assert c.gates[0] == Gate('TOF', (1, 2, 3), 1)
    assert c.is_classical


def test_parse_errors_carry_line_numbers():
    with pytest.raises(CircuitSyntaxError) as info:
        parse("REG 1 0 0 0\nFOO 1\n")
    assert info.value.line_no == 2
    with pytest.raises(CircuitSyntaxError):
        parse("X 1\nREG 1 0 0 0\n")
    with pytest.raises(CircuitSyntaxError):
        parse("REG 2 0 0 0\nCNOT 1 1\n")
    with pytest.raises(IndexOutOfRange):
        parse("REG 1 0 0 0\nX 2\n")
    # the plus ancillas come in pairs
    with pytest.raises(CircuitSyntaxError):
        parse("REG 1 0 0 1\n")


def test_dumps_keeps_layout_and_roles():
    sparse = spatial_sparsify(parse(PARITY))
    again = parse(dumps(sparse))
    assert again == sparse
    assert again.layout == (2, 3)


def test_decomposition_shape():
    c = load_circuit(os.path.join(DATA_DIR, 'toffoli.circ'))
    stec = toffoli_decompose(c)
    assert stec.expanded.K == BLOCK_LENGTH * c.K == 15
    assert [g.kind for g in stec.expanded.gates].count('H') == 2
    assert stec.expanded.count('T', 'TDG') == 7
    assert stec.expanded.gates[-1].position == 15
    assert StecDescriptor.block_map(16) == (2, 1)
    assert StecDescriptor.block_map(15) == (1, 15)
    assert StecDescriptor.split_prefix(16) == (1, 1)
    with pytest.raises(ValueError):
        StecDescriptor.block_map(0)


def test_decomposed_block_is_a_toffoli():
    c = parse("REG 3 0 0 0\nTOF 1 2 3\n")
    stec = toffoli_decompose(c)
    tof = c.gates[0]
    for x in basis_strings(3):
        assert simulate(stec.expanded, DenseState.basis(x)) == DenseState.basis(tof.apply_classical(x))


def test_decompose_rejects_other_gates():
    with pytest.raises(NonToffoliGate):
        toffoli_decompose(parse(PARITY))


def test_sparsify_counts():
    c = parse(PARITY)
    K, N = c.K, c.M
    assert spatial_sparsify(c).K == K + (K - 1) * N
    assert spatial_sparsify(c, swap_as_cnots=True).K == K + 3 * (K - 1) * N
    expanded = spatial_sparsify(c, unit_expand=True)
    assert expanded.K == (2 * K - 1) * N
    assert expanded.M == K * N
    assert expanded.roles == 'xx0000'
    assert expanded.output_qubit == 6


def test_sparsify_preserves_the_output():
    c = parse(PARITY)
    sparse = spatial_sparsify(c, unit_expand=True)
    for x, expected in (('10', 1), ('01', 1), ('11', 0), ('00', 0)):
        assert accept_probability(c, initial_state(c, x)) == expected
        assert accept_probability(sparse, initial_state(sparse, x)) == expected


def test_sparsify_rejects_quantum_gates():
    with pytest.raises(NonClassicalGate):
        spatial_sparsify(parse("REG 1 0 0 0\nH 1\n"))


def test_pre_idle():
    assert idle_padding(3) == 0
    assert idle_padding(5) == 3
    assert idle_padding(0) == 0
    c = parse("REG 2 0 0 0\n" + "CNOT 1 2\n" * 5)
    padded = pre_idle(c)
    assert padded.K == 8
    assert [g.kind for g in padded.gates[:3]] == ['ID'] * 3
    assert padded.gates[3].kind == 'CNOT'
    assert pre_idle(parse("REG 1 0 0 0\nX 1\nX 1\nX 1\n")).K == 3


def test_invert_and_lower_swaps():
    c = parse("REG 2 0 0 0\nT 1\nH 2\nSWAP 1 2\n")
    inverse = invert(c)
    assert [str(g) for g in inverse.gates] == ['SWAP 1 2', 'H 2', 'TDG 1']
    lowered = lower_swaps(c)
    assert lowered.count('SWAP') == 0
    assert lowered.count('CNOT') == 3
    for x in basis_strings(2):
        swapped = parse("REG 2 0 0 0\nSWAP 1 2\n")
        assert simulate(lower_swaps(swapped), DenseState.basis(x)) == DenseState.basis(x[::-1])


def test_gate_incidence():
    counts = gate_incidence(spatial_sparsify(parse(PARITY)))
    # every wire of row 1 is swapped once, row 2 also sees its CNOT
    assert counts[1] == 2 and counts[3] == 2
    assert counts[5] == 2 and counts[6] == 2


@pytest.mark.parametrize('wires', list(itertools.permutations(range(1, 5), 3)))
def test_decomposed_block_on_every_wire_assignment(wires):
    c = parse("REG 4 0 0 0\nTOF {} {} {}\n".format(*wires))
    stec = toffoli_decompose(c)
    for x in basis_strings(4):
        assert simulate(stec.expanded, DenseState.basis(x)) == simulate(c, DenseState.basis(x))


@pytest.mark.parametrize('K', range(101))
def test_pre_idle_reaches_a_square(K):
    c = parse("REG 1 0 1 0\nOUT 2\n" + "CNOT 1 2\n" * K)
    padded = pre_idle(c)
    root = math.isqrt(padded.K + 1)
    assert root * root == padded.K + 1
    assert padded.K - K == idle_padding(K)
    for x in '01':
        assert accept_probability(padded, initial_state(padded, x)) == accept_probability(c, initial_state(c, x))


def random_classical(case):
    rng = np.random.default_rng(case)
    lines = ["REG 2 0 1 0", "OUT 3"]
    for _ in range(int(rng.integers(1, 4))):
        kind = str(rng.choice(['X', 'CNOT', 'TOF']))
        arity = {'X': 1, 'CNOT': 2, 'TOF': 3}[kind]
        lines.append(' '.join([kind] + [str(int(q) + 1) for q in rng.choice(3, size=arity, replace=False)]))
    return parse('\n'.join(lines) + '\n')


@pytest.mark.parametrize('case', range(10))
def test_sparsify_on_random_circuits(case):
    c = random_classical(case)
    sparse = spatial_sparsify(c, unit_expand=True)
    assert sparse.K == (2 * c.K - 1) * c.M
    for x in basis_strings(2):
        assert accept_probability(sparse, initial_state(sparse, x)) == accept_probability(c, initial_state(c, x))
    # swap in, the gate and its idles, swap out
    assert max(gate_incidence(sparse).values()) <= 5
