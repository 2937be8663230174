import sys
import os
# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import numpy as np
import pytest

from algorithms.circuit import parse, spatial_sparsify, toffoli_decompose
from algorithms.clockham import (annihilation_check, as_sparse, build_3local, build_4local, build_sparse6,
                                 history_vector, illegal_clock_energy, interaction_degree,
                                 legal_subspace_predicate, locality_audit, stoquastic_audit)
from algorithms.errors import CapExceeded, ComplexEntries, LocalityExceeded, NonToffoliGate
from algorithms.files import DATA_DIR, clockham_to_json, ham_from_json, load_circuit
from algorithms.oracle import densify_ham, restrict, spectrum, stoquastic_check
from algorithms.pipeline import accepting_circuit


@pytest.fixture
def toffoli():
    return load_circuit(os.path.join(DATA_DIR, 'toffoli.circ'))


def test_4local_accepting_history_is_annihilated(toffoli):
    h = build_4local(toffoli, '11')
    assert h.total_qubits == 4
    assert h.locality == 4 and locality_audit(h)
    assert stoquastic_audit(h) == []
    report = annihilation_check(h)
    assert report.expectation.is_zero
    assert report.legal_ok


def test_history_is_a_null_vector_on_legal_words():
    c = parse("REG 2 0 1 0\nOUT 3\nTOF 1 2 3\nX 3\nX 3\n")
    h = build_4local(c, '11')
    dense, basis = restrict(densify_ham(as_sparse(h)), legal_subspace_predicate(h))
    assert len(basis) == 4 * 2 ** 3
    values = spectrum(dense, basis).eigenvalues
    assert np.min(np.abs(values)) < 1e-9


def test_4local_rejecting_input_costs_energy(toffoli):
    report = annihilation_check(build_4local(toffoli, '10'))
    assert report.expectation.sign() > 0
    assert not report.legal_ok


def test_4local_is_stoquastic_as_a_matrix(toffoli):
    dense = densify_ham(as_sparse(build_4local(toffoli, '11')))
    assert dense.is_hermitian()
    assert stoquastic_check(dense)


def test_4local_needs_classical_gates():
    with pytest.raises(NonToffoliGate):
        build_4local(parse("REG 1 0 0 0\nH 1\n"), '1')


def test_clock_penalties():
    c = parse("REG 2 0 1 0\nOUT 3\nTOF 1 2 3\nTOF 1 2 3\n")
    h = build_4local(c, '11')
    assert illegal_clock_energy(h, '110' + '01') == 2 ** 12
    assert illegal_clock_energy(h, '110' + '10') == 0
    assert not h.is_legal('110' + '01')
    assert interaction_degree(h) == 4


def test_3local_on_the_decomposed_toffoli(toffoli):
    h = build_3local(toffoli_decompose(toffoli), '11')
    assert h.clock_qubits == 15
    assert h.locality <= 3 and locality_audit(h)
    # T and H hops are not stoquastic
    assert stoquastic_audit(h)
    assert annihilation_check(h).legal_ok


def test_3local_small_circuit():
    c = parse("REG 1 0 0 0\nT 1\nT 1\n")
    h = build_3local(c, '1')
    report = annihilation_check(h)
    assert report.legal_ok
    # hops leak into the illegal clock word 01
    assert not report.full_ok
    with pytest.raises(ComplexEntries):
        stoquastic_check(densify_ham(as_sparse(h)))


def test_3local_rejects_toffolis(toffoli):
    with pytest.raises(LocalityExceeded):
        build_3local(toffoli, '11')


def test_sparse6_annihilates_on_the_full_space(toffoli):
    sparse = spatial_sparsify(toffoli, unit_expand=True)
    h = build_sparse6(sparse, '11')
    assert h.locality <= 6 and locality_audit(h)
    assert stoquastic_audit(h) == []
    assert annihilation_check(h).full_ok
    spec = spectrum(densify_ham(as_sparse(h)))
    assert abs(spec.ground_energy) < 1e-9


def test_sparse6_needs_a_layout(toffoli):
    with pytest.raises(ValueError):
        build_sparse6(toffoli, '11')


def test_history_vector_cap(toffoli):
    h = build_4local(toffoli, '11')
    assert len(history_vector(h).amplitudes) == 2
    with pytest.raises(CapExceeded):
        history_vector(h, cap=2)


def test_hamfile_round_trip(toffoli):
    h = build_4local(toffoli, '11')
    record = clockham_to_json(h)
    assert record['locality'] == 4 and record['variant'] == '4local'
    loaded, header = ham_from_json(record)
    assert header['qubits'] == 4
    assert densify_ham(loaded) == densify_ham(as_sparse(h))


def test_proof_register_selects_the_witness():
    c = load_circuit(os.path.join(DATA_DIR, 'parity_witness.circ'))
    assert c.roles == 'xw0'
    assert annihilation_check(build_4local(c, '0', '1')).legal_ok
    assert not annihilation_check(build_4local(c, '0', '0')).legal_ok
    # proof qubits carry no input penalty
    assert not any(t.label == 'in[2]' for t in build_4local(c, '0', '1').terms)


@pytest.mark.parametrize('seed', range(10))
def test_accepting_circuits_with_coins_are_annihilated(seed):
    c = accepting_circuit(1, 0, 2, 1, np.random.default_rng(seed))
    assert c.roles == 'x0++'
    assert c.M + c.K <= 8
    h = build_4local(c, str(seed % 2))
    assert locality_audit(h)
    assert stoquastic_audit(h) == []
    assert annihilation_check(h).legal_ok
    dense, basis = restrict(densify_ham(as_sparse(h)), legal_subspace_predicate(h))
    assert np.min(np.abs(spectrum(dense, basis).eigenvalues)) < 1e-9
