import sys
import os
# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from fractions import Fraction

import pytest

from algorithms.exactnum import ExactValue
from algorithms.files import DATA_DIR, load_ham, load_state
from algorithms.pipeline import make_fixture
from algorithms.qstate import basis_strings, table_query
from algorithms.verify import (MerlinMessage, VerifierConfig, build_generator, gillespie_run,
                               legality_check, occupation_frequencies, run_trials,
                               stationary_distribution, total_variation, verify)
from algorithms.xform import SparseHam, fixed_node

A, B = ExactValue.of(Fraction(1, 8)), ExactValue.of(Fraction(1, 4))


def config(**changes):
    settings = dict(a=A, b=B, t_max=Fraction(5), trials=20, seed=5)
    settings.update(changes)
    return VerifierConfig(**settings)


@pytest.fixture
def two_level():
    H, _ = load_ham(os.path.join(DATA_DIR, 'two_level', 'ham.json'))
    xi = load_state(os.path.join(DATA_DIR, 'two_level', 'state.json'))
    return H, xi


def message(xi, lam, xstar='0'):
    return MerlinMessage(ExactValue.of(lam), xi, xstar)


def test_config_validation():
    with pytest.raises(ValueError):
        VerifierConfig(a=B, b=A)
    with pytest.raises(ValueError):
        config(trials=0)
    assert VerifierConfig(a=A, b=B).horizon(3) == 27


def test_threshold_fast_reject(two_level):
    H, xi = two_level
    verdict = verify(H, message(xi, 1), config())
    assert not verdict.accepted
    assert verdict.outcomes == ()
    assert verdict.trace == ('threshold',)
    assert 'exceeds' in verdict.reason


def test_ground_state_message_is_accepted(two_level):
    H, xi = two_level
    verdict = verify(H, message(xi, 0), config())
    assert verdict.accepted
    assert verdict.survival_fraction == 1
    assert all(o.reason == 'horizon' and o.time == 5 for o in verdict.outcomes)
    report = verdict.to_report()
    assert report['accepted'] and report['rejections'] == {}
    assert len(report['trials']) == 20


def test_wrong_energy_is_rejected_at_the_start(two_level):
    H, xi = two_level
    verdict = verify(H, message(xi, Fraction(1, 16)), config())
    assert not verdict.accepted
    assert verdict.survival_fraction == 0
    for outcome in verdict.outcomes:
        assert outcome.reason.startswith('Illegal(BalanceResidual')
        assert outcome.time == 0 and outcome.jumps == 0
    (reason, count), = verdict.to_report()['rejections'].items()
    assert count == 20


def test_legality_reasons():
    flip = SparseHam.from_dense(1, {('0', '1'): ExactValue.of(1), ('1', '0'): ExactValue.of(1)})
    xi = table_query(1, {'0': ExactValue.of(1), '1': ExactValue.of(1)})
    # the raw operator, not its fixed-node form, has a negative rate
    g = build_generator(flip, message(xi, -1))
    assert legality_check(g, '0').reason == 'NegativeRate'

    g = build_generator(fixed_node(flip, xi), message(xi, 1))
    assert legality_check(g, '0').legal
    assert g.rates('0') == {}

    holed = table_query(1, {'0': ExactValue.of(1)})
    g = build_generator(fixed_node(flip, holed), message(holed, 0))
    assert legality_check(g, '1').reason == 'ZeroAmplitude'


def test_absorbing_state_survives():
    H = SparseHam.from_dense(1, {('1', '1'): ExactValue.of(1)})
    xi = table_query(1, {'0': ExactValue.of(1)})
    g = build_generator(fixed_node(H, xi), message(xi, 0))
    outcome = gillespie_run(g, '0', config())
    assert outcome.survived and outcome.reason == 'absorbing'
    assert outcome.time == 5 and outcome.jumps == 0


def test_start_outside_the_support():
    H = SparseHam.from_dense(1, {('1', '1'): ExactValue.of(1)})
    xi = table_query(1, {'0': ExactValue.of(1)})
    verdict = verify(H, message(xi, 0, '1'), config())
    assert not verdict.accepted
    assert verdict.reason.startswith('ZeroAmplitudeVisited')


def test_complex_hamiltonian_is_made_real():
    pauli_y = SparseHam.from_dense(1, {('0', '1'): ExactValue.of(0, -1), ('1', '0'): ExactValue.of(0, 1)})
    xi = table_query(1, {'0': ExactValue.of(1), '1': ExactValue.of(0, -1)})
    verdict = verify(pauli_y, message(xi, -1), config(trials=5))
    assert verdict.accepted
    assert verdict.trace[0] == 'complexified to 2 qubits, start 00'
    assert {o.final_state for o in verdict.outcomes} <= {'00', '11'}


def test_trials_are_reproducible(two_level):
    H, xi = two_level
    g = build_generator(fixed_node(H, xi), message(xi, 0))
    first = run_trials(g, '0', config(seed=42))
    second = run_trials(g, '0', config(seed=42))
    threaded = run_trials(g, '0', config(seed=42, workers=4))
    assert first == second == threaded
    assert run_trials(g, '0', config(seed=43)) != first


def test_jump_budget(two_level):
    H, xi = two_level
    g = build_generator(fixed_node(H, xi), message(xi, 0))
    outcome = gillespie_run(g, '0', config(t_max=Fraction(1000), max_jumps=3))
    assert outcome.reason == 'jump budget'
    assert outcome.jumps == 3


def test_occupation_approaches_xi_squared(two_level):
    H, xi = two_level
    g = build_generator(fixed_node(H, xi), message(xi, 0))
    outcome = gillespie_run(g, '0', config(t_max=Fraction(20000), seed=2024))
    assert outcome.survived
    pi = stationary_distribution(xi, ['0', '1'])
    assert pi['0'] == pytest.approx(0.5)
    assert total_variation(occupation_frequencies(outcome), pi) < 0.05


def reachable(g, start):
    seen, frontier = {start}, [start]
    while frontier:
        for y in g.rates(frontier.pop()):
            if y not in seen:
                seen.add(y)
                frontier.append(y)
    return sorted(seen)


def test_yes_instance_is_legal_and_stationary(tmp_path):
    make_fixture('stationarity', str(tmp_path), n=3, seed=2024)
    H, _ = load_ham(str(tmp_path / 'ham.json'))
    xi = load_state(str(tmp_path / 'state.json'))
    support = [x for x in basis_strings(3) if not xi(x).is_zero]
    g = build_generator(fixed_node(H, xi), message(xi, 0, support[0]))
    for x in support:
        assert legality_check(g, x).legal
        assert g.balance_residual(x).sign() == 0
    outcome = gillespie_run(g, support[0], config(t_max=Fraction(10 ** 9), max_jumps=10 ** 5, seed=17))
    assert outcome.survived and outcome.reason == 'jump budget'
    assert outcome.jumps == 10 ** 5
    # the chain is reversible, so each class it can reach is closed
    pi = stationary_distribution(xi, reachable(g, support[0]))
    assert total_variation(occupation_frequencies(outcome), pi) < 0.05
