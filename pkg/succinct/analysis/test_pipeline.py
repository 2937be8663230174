import sys
import os
# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import json
import shutil

import numpy as np
import pytest

from algorithms.errors import CapExceeded, ManifestError, StepError
from algorithms.files import DATA_DIR, dump_json, load_json
from algorithms.pipeline import StepContext, load_manifest, make_fixture, run_pipeline


def run(path):
    manifest, base_dir = load_manifest(str(path))
    return run_pipeline(manifest, base_dir)


@pytest.fixture
def two_level(tmp_path):
    target = tmp_path / 'two_level'
    shutil.copytree(os.path.join(DATA_DIR, 'two_level'), target)
    return target


def test_encode_manifest():
    report = run(os.path.join(DATA_DIR, 'encode_manifest.json'))
    assert report.status == 0
    first, second, third = (step['result'] for step in report.steps)
    assert first['bits'] == '1 0 0011 0100'
    assert second['class'].startswith('C:')
    assert third['bits'] == '011 101' and third['width'] == 6


def test_two_level_manifest(two_level):
    report = run(two_level / 'manifest.json')
    assert report.status == 0
    assert [step['op'] for step in report.steps] == ['audit', 'audit', 'transform', 'verify']
    assert all(step['ok'] for step in report.steps)
    verdict = load_json(str(two_level / 'out' / 'report.json'))
    assert verdict['accepted'] and verdict['survival_fraction'] == '1'
    assert load_json(str(two_level / 'out' / 'fixed_node.json'))['variant'] == 'fixednode'


def test_rejection_sets_status(two_level):
    report = run(two_level / 'reject_manifest.json')
    assert report.status == 1
    assert report.steps[0]['ok'] is False
    assert report.steps[0]['result']['trace'] == ['threshold']


def test_toffoli_manifest(tmp_path):
    for name in ('toffoli.circ', 'history_state.json', 'toffoli_manifest.json'):
        shutil.copy(os.path.join(DATA_DIR, name), tmp_path / name)
    report = run(tmp_path / 'toffoli_manifest.json')
    assert report.status == 0
    query, decompose, build = (step['result'] for step in report.steps[:3])
    assert query['value'] == '1'
    assert decompose['gates'] == 15 and decompose['hadamards'] == 2
    assert build['locality'] == 4 and build['non_stoquastic_terms'] == []
    assert (tmp_path / 'out' / 'toffoli_stec.circ').exists()


def test_corrupted_hamfile_names_the_step(two_level):
    record = load_json(str(two_level / 'ham.json'))
    record['terms'][0]['entries'][0] = ['00', '0', '1']
    dump_json(record, str(two_level / 'ham.json'))
    with pytest.raises(StepError) as info:
        run(two_level / 'manifest.json')
    assert info.value.index == 1


def test_manifest_validation(tmp_path):
    bad_op = {'schema': 'succinct-manifest/1', 'steps': [{'op': 'explode', 'args': {}}]}
    dump_json(bad_op, str(tmp_path / 'bad_op.json'))
    with pytest.raises(ManifestError):
        load_manifest(str(tmp_path / 'bad_op.json'))

    bad_schema = {'schema': 'something-else', 'steps': []}
    dump_json(bad_schema, str(tmp_path / 'bad_schema.json'))
    with pytest.raises(ManifestError):
        load_manifest(str(tmp_path / 'bad_schema.json'))

    missing = {'schema': 'succinct-manifest/1', 'steps': [
        {'op': 'audit', 'args': {'what': 'ham', 'ham': 'nowhere.json'}}]}
    dump_json(missing, str(tmp_path / 'missing.json'))
    with pytest.raises(ManifestError):
        load_manifest(str(tmp_path / 'missing.json'))


def test_outputs_of_earlier_steps_count_as_inputs(tmp_path):
    shutil.copy(os.path.join(DATA_DIR, 'toffoli.circ'), tmp_path / 'toffoli.circ')
    chained = {'schema': 'succinct-manifest/1', 'steps': [
        {'op': 'sparsify', 'args': {'circuit': 'toffoli.circ', 'out': 'sparse.circ', 'unit_expand': True}},
        {'op': 'build', 'args': {'variant': 'sparse6', 'circuit': 'sparse.circ', 'input': '11'}}]}
    dump_json(chained, str(tmp_path / 'chained.json'))
    report = run(tmp_path / 'chained.json')
    assert report.status == 0
    assert report.steps[1]['result']['locality_ok']


def test_substream_seeds():
    a = StepContext('.', 11, 1).substream_seed()
    assert a == StepContext('.', 11, 1).substream_seed()
    assert a != StepContext('.', 11, 2).substream_seed()


def test_fixtures_are_reproducible(tmp_path):
    first = make_fixture('no', str(tmp_path / 'a'), n=3, seed=7, variant='perturbed')
    second = make_fixture('no', str(tmp_path / 'b'), n=3, seed=7, variant='perturbed')
    for p, q in zip(first, second):
        with open(p) as f, open(q) as g:
            assert f.read() == g.read()
    other = make_fixture('no', str(tmp_path / 'c'), n=3, seed=8, variant='perturbed')
    assert load_json(other[0]) != load_json(first[0])


@pytest.mark.parametrize('kind, variant, status', [
    ('yes', None, 0),
    ('no', 'fastpath', 1),
    ('no', 'perturbed', 1),
    ('no', 'nonground', 1),
])
def test_fixture_verdicts(tmp_path, kind, variant, status):
    make_fixture(kind, str(tmp_path), n=3, seed=2024, variant=variant)
    report = run(tmp_path / 'manifest.json')
    assert report.status == status
    saved = load_json(str(tmp_path / 'report.json'))
    assert saved['accepted'] == (status == 0)


def test_spectrum_fixture_doubles(tmp_path):
    make_fixture('spectrum', str(tmp_path), n=2, seed=2024)
    report = run(tmp_path / 'manifest.json')
    assert report.status == 0
    original = report.steps[0]['result']['eigenvalues']
    doubled = report.steps[2]['result']['eigenvalues']
    assert np.allclose(doubled, np.repeat(original, 2), atol=1e-9)


@pytest.mark.parametrize('seed', range(10))
def test_circuit_fixture_is_annihilated(tmp_path, seed):
    make_fixture('circuit', str(tmp_path), n=3, seed=seed)
    report = run(tmp_path / 'manifest.json')
    assert [step['result']['variant'] for step in report.steps] == ['4local', '3local', 'sparse6']
    assert report.status == 0


def test_stationarity_fixture(tmp_path):
    make_fixture('stationarity', str(tmp_path), n=3, seed=2024)
    manifest = load_json(str(tmp_path / 'manifest.json'))
    args = manifest['steps'][0]['args']
    assert args['trials'] == 1 and args['tmax'] == 2000
    assert run(tmp_path / 'manifest.json').status == 0


def test_fixture_cap(tmp_path):
    with pytest.raises(CapExceeded):
        make_fixture('yes', str(tmp_path), n=15)


def test_fixture_files_are_sorted_json(tmp_path):
    written = make_fixture('yes', str(tmp_path), n=2, seed=1)
    with open(written[0]) as f:
        text = f.read()
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + '\n'
