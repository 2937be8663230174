import sys
import os
# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import math
from fractions import Fraction

import numpy as np
import pytest

from algorithms.errors import ComplexEntries, ConvergenceFailure, ZeroAmplitudeVisited
from algorithms.exactnum import ExactValue, IntervalValue
from algorithms.files import DATA_DIR, load_ham, load_state
from algorithms.oracle import densify_ham, spectrum, stoquastic_check
from algorithms.pipeline import make_fixture
from algorithms.qstate import basis_strings, table_query
from algorithms.xform import (FixedNodePartition, SparseHam, complexify_to_real, fixed_node,
                              hermiticity_spot_check, sign_gauge)


def ev(re, im=0):
    return ExactValue.of(re, im)


def symmetric(n, diagonal, upper):
    """Real symmetric SparseHam from its diagonal and upper off-diagonal entries."""
    entries = {(x, x): ev(v) for x, v in diagonal.items()}
    for (x, y), v in upper.items():
        entries[(x, y)] = entries[(y, x)] = ev(v)
    return SparseHam.from_dense(n, entries)


@pytest.fixture
def mixed():
    """Two-qubit real H with one positive-class pair (10, 11) under xi."""
    H = symmetric(2, {'00': 1, '01': 2, '10': 0, '11': 1},
                  {('00', '01'): 1, ('00', '10'): -1, ('01', '11'): 2, ('10', '11'): 1})
    xi = table_query(2, {'00': ev(1), '01': ev(-1), '10': ev(2), '11': ev(1)}, 'xi')
    return H, xi


def vector(xi):
    return {x: xi(x) for x in basis_strings(xi.n) if not xi(x).is_zero}


def test_complexify_case_table():
    pauli_y = SparseHam.from_dense(1, {('0', '1'): ev(0, -1), ('1', '0'): ev(0, 1)})
    real = complexify_to_real(pauli_y)
    assert real.n == 2 and real.real
    assert real.entry('00', '11') == 1
    assert real.entry('01', '10') == -1
    assert real.entry('00', '10') == 0
    assert real.row_support('00') == ('11',)
    assert hermiticity_spot_check(real, basis_strings(2))


def test_complexify_doubles_the_spectrum():
    H = SparseHam.from_dense(1, {('0', '0'): ev(1), ('0', '1'): ev(1, 1), ('1', '0'): ev(1, -1),
                                 ('1', '1'): ev(-1)})
    assert not H.real
    values = spectrum(densify_ham(complexify_to_real(H))).eigenvalues
    root3 = math.sqrt(3)
    assert np.allclose(values, [-root3, -root3, root3, root3])


@pytest.mark.parametrize('seed', range(20))
def test_complexify_spectrum_fixture(tmp_path, seed):
    make_fixture('spectrum', str(tmp_path), n=2, seed=seed)
    H, _ = load_ham(str(tmp_path / 'ham.json'))
    original = spectrum(densify_ham(H)).eigenvalues
    doubled = spectrum(densify_ham(complexify_to_real(H))).eigenvalues
    assert np.allclose(doubled, np.repeat(original, 2), atol=1e-9)


def test_fixed_node_keeps_a_stoquastic_operator():
    H, _ = load_ham(os.path.join(DATA_DIR, 'two_level', 'ham.json'))
    xi = load_state(os.path.join(DATA_DIR, 'two_level', 'state.json'))
    assert densify_ham(fixed_node(H, xi)) == densify_ham(H)


def test_fixed_node_entries(mixed):
    H, xi = mixed
    F = fixed_node(H, xi)
    partition = FixedNodePartition(xi, H)
    assert partition.classify('10', '11') == 'P'
    assert partition.classify('00', '01') == 'N'
    assert partition.classify('00', '11') == 'Zero'
    assert F.entry('10', '11') == 0
    assert F.entry('00', '01') == 1
    assert F.entry('10', '10') == Fraction(1, 2)
    assert F.entry('11', '11') == 3
    assert '11' not in F.row_support('10')


def test_fixed_node_agrees_with_h_on_xi(mixed):
    H, xi = mixed
    F = fixed_node(H, xi)
    assert F.apply(vector(xi)) == H.apply(vector(xi))


def test_fixed_node_bounds_the_ground_energy(mixed):
    H, xi = mixed
    lowest = spectrum(densify_ham(H)).ground_energy
    assert spectrum(densify_ham(fixed_node(H, xi))).ground_energy >= lowest - 1e-9


def test_gauge_makes_fixed_node_stoquastic(mixed):
    H, xi = mixed
    F = fixed_node(H, xi)
    gauged = densify_ham(sign_gauge(F, xi))
    assert stoquastic_check(gauged)
    assert not stoquastic_check(densify_ham(H))
    # conjugating twice gives F back
    assert densify_ham(sign_gauge(sign_gauge(F, xi), xi)) == densify_ham(F)


@pytest.mark.parametrize('seed', range(20))
def test_yes_fixture_is_annihilated(tmp_path, seed):
    make_fixture('yes', str(tmp_path), n=3, seed=seed)
    H, _ = load_ham(str(tmp_path / 'ham.json'))
    xi = load_state(str(tmp_path / 'state.json'))
    assert H.apply(vector(xi)) == {}
    F = fixed_node(H, xi)
    assert F.apply(vector(xi)) == {}
    assert stoquastic_check(densify_ham(sign_gauge(F, xi)))
    # F lies above H, whose ground energy is 0
    assert spectrum(densify_ham(F)).ground_energy == pytest.approx(0, abs=1e-9)


def test_zero_and_complex_amplitudes(mixed):
    H, _ = mixed
    holed = table_query(2, {'01': ev(1), '10': ev(1), '11': ev(1)})
    with pytest.raises(ZeroAmplitudeVisited):
        fixed_node(H, holed).entry('00', '00')
    with pytest.raises(ZeroAmplitudeVisited):
        sign_gauge(H, holed).entry('00', '01')
    complex_xi = table_query(2, {x: ev(1, 1) for x in basis_strings(2)})
    with pytest.raises(ComplexEntries):
        fixed_node(H, complex_xi).entry('00', '00')


def test_incompatible_radicals_fall_back_to_intervals():
    H = symmetric(2, {}, {('00', '01'): 1, ('00', '10'): 1})
    xi = table_query(2, {'00': ev(1), '01': ExactValue.sqrt(3), '10': ExactValue.sqrt(5), '11': ev(1)})
    F = fixed_node(H, xi)
    diagonal = F.entry('00', '00')
    assert isinstance(diagonal, IntervalValue)
    assert math.isclose(float(diagonal), math.sqrt(3) + math.sqrt(5))
    with pytest.raises(ConvergenceFailure):
        densify_ham(F)
