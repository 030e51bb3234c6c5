import os

import pytest

from fitosim.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

SHORT = 'workload.run_duration_ns=1000000'

def test_run_writes_its_artifacts(tmp_path, capsys):
	out = str(tmp_path / 'run')
	assert main(['--preset', 'paper-2.3', '--set', SHORT, '--out', out, '-q']) == EXIT_OK
	assert sorted(os.listdir(out)) == ['config.yaml', 'metrics.csv', 'summary.txt', 'trace.jsonl']
	assert 'FITO' in capsys.readouterr().out

def test_paired_run(tmp_path):
	out = str(tmp_path / 'paired')
	assert main(['--preset', 'paper-2.3', '--mode', 'paired', '--set', SHORT, '--out', out, '-q']) == EXIT_OK
	assert os.path.isfile(os.path.join(out, 'fito', 'trace.jsonl'))
	assert os.path.isfile(os.path.join(out, 'bilateral', 'summary.txt'))
	assert os.path.isfile(os.path.join(out, 'comparison.csv'))

def test_bad_configuration_exits_with_one(tmp_path):
	out = str(tmp_path / 'bad')
	assert main(['--preset', 'paper-2.3', '--set', 'latency.bogus=1', '--out', out, '-q']) == EXIT_CONFIG
	assert main(['--preset', 'missing', '-q']) == EXIT_CONFIG
	assert not os.path.exists(out)

def test_unwritable_output_exits_with_two(tmp_path):
	blocker = tmp_path / 'blocker'
	blocker.write_text('')
	out = str(blocker / 'run')
	assert main(['--preset', 'paper-2.3', '--set', SHORT, '--out', out, '-q']) == EXIT_RUNTIME

def test_unexpected_failure_exits_with_two(tmp_path, monkeypatch):
	def broken(config, output_dir=None):
		raise ValueError('broken run')
	monkeypatch.setattr('fitosim.cli.execute', broken)
	out = str(tmp_path / 'run')
	assert main(['--preset', 'paper-2.3', '--set', SHORT, '--out', out, '-q']) == EXIT_RUNTIME

def test_sweep_writes_one_directory_per_point(tmp_path):
	out = str(tmp_path / 'sweep')
	args = ['--preset', 'oracle-4', '--set', SHORT, '--out', out, '-q',
			'--sweep', 'workload.mutation_rate_per_s=0,1000']
	assert main(args) == EXIT_OK
	assert os.path.isfile(os.path.join(out, 'mutation_rate_per_s=0', 'trace.jsonl'))
	assert os.path.isfile(os.path.join(out, 'mutation_rate_per_s=1000', 'metrics.csv'))
	with open(os.path.join(out, 'sweep.csv')) as f:
		lines = f.read().splitlines()
	assert len(lines) == 3
	assert lines[0].startswith('field,value,mode')
	assert lines[2].startswith('workload.mutation_rate_per_s,1000,fito')

def test_sweep_needs_a_numeric_field(tmp_path):
	out = str(tmp_path / 'sweep')
	assert main(['--preset', 'oracle-4', '--out', out, '-q', '--sweep', 'mode=1,2']) == EXIT_CONFIG
	assert main(['--preset', 'oracle-4', '--out', out, '-q', '--sweep', 'seed=a,b']) == EXIT_CONFIG

def test_list_presets(capsys):
	assert main(['--list-presets']) == EXIT_OK
	assert 'flp-3.2' in capsys.readouterr().out.split()

if __name__ == '__main__':
	pytest.main(['test_cli.py'])
