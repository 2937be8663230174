import sys
import os
# Add parent directory to path to import algorithms
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import json
import re

from algorithms.files import DATA_DIR
import app
from app import main


def test_num_encode(capsys):
    assert main(['--format', 'json', 'num', 'encode', '--family', 'Q', '--p', '4', '--value', '-3/4']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out['bits'] == '1 0 0011 0100'
    assert out['class'] == 'Q:4'


def test_num_decode_text(capsys):
    assert main(['num', 'decode', '--class', 'N:3', '--bits', '110']) == 0
    assert 'value: 6' in capsys.readouterr().out


def test_bad_width_is_a_usage_error(capsys):
    assert main(['num', 'decode', '--class', 'N:3', '--bits', '1101']) == 2
    assert capsys.readouterr().err.startswith('Error:')


def test_state_query(capsys):
    spec = os.path.join(DATA_DIR, 'history_state.json')
    assert main(['--format', 'json', 'state', 'query', '--spec', spec, '--x', '1100']) == 0
    assert json.loads(capsys.readouterr().out)['value'] == '1'


def test_verify_exit_codes(capsys):
    ham = os.path.join(DATA_DIR, 'two_level', 'ham.json')
    state = os.path.join(DATA_DIR, 'two_level', 'state.json')
    common = ['verify', '--ham', ham, '--state', state, '--xstar', '0', '--trials', '10', '--tmax', '3']
    assert main(['--format', 'json'] + common + ['--lambda', '0']) == 0
    assert json.loads(capsys.readouterr().out)['accepted'] is True
    assert main(common + ['--lambda', '1']) == 1


def test_oracle_annihilation(capsys):
    circuit = os.path.join(DATA_DIR, 'toffoli.circ')
    code = main(['oracle', 'check', '--what', 'annihilation', '--variant', 'sparse6',
                 '--circuit', circuit, '--input', '11'])
    assert code == 0
    assert 'full_residual: 0' in capsys.readouterr().out


def test_run_manifest(capsys):
    assert main(['run', os.path.join(DATA_DIR, 'encode_manifest.json')]) == 0
    out = capsys.readouterr().out
    assert 'status: 0' in out


def test_missing_manifest(capsys):
    assert main(['run', os.path.join(DATA_DIR, 'no_such_manifest.json')]) == 2


def test_usage_examples_name_committed_files():
    paths = re.findall(r'data/[\w/.]+', app.__doc__)
    assert paths
    for path in paths:
        assert os.path.exists(os.path.join(DATA_DIR, path[len('data/'):]))
