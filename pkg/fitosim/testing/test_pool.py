import base64
import zlib

import pytest

from fitosim.config import ExperimentConfig
from fitosim.errors import ConfigError
from fitosim.pool import SweepPool, parse_sweep, point_name, sweep_csv, sweep_tasks, unpack_files
from fitosim.utils import LogFun, sec2hms, split_uri
from fitosim.worker import run_point

from .conftest import make_config

def test_parse_sweep():
	assert parse_sweep('workload.mutation_rate_per_s=1000, 1e4,2.5') == \
		('workload.mutation_rate_per_s', [1000, 10000, 2.5])
	for bad in ('novalues', 'seed=', 'seed=1,x'):
		with pytest.raises(ConfigError):
			parse_sweep(bad)

def test_sweep_tasks():
	tasks = sweep_tasks(make_config(), 'latency.mmio_read_rtt_ns', [500, 1000])
	assert [t['name'] for t in tasks] == ['mmio_read_rtt_ns=500', 'mmio_read_rtt_ns=1000']
	assert [t['index'] for t in tasks] == [0, 1]
	# Derived latencies follow the swept value
	assert tasks[1]['config']['latency']['one_way_ns'] == 500
	with pytest.raises(ConfigError):
		sweep_tasks(make_config(), 'flags.wc_enabled', [0, 1])
	assert point_name('seed', 3) == 'seed=3'

def test_serial_sweep_keeps_failures_in_place():
	tasks = sweep_tasks(make_config(**{'workload.run_duration_ns': 10**5}), 'seed', [1, 2])
	tasks.insert(1, {'index': 9, 'field': 'seed', 'value': -1, 'name': 'seed=-1',
					 'config': dict(tasks[0]['config'], seed=-1)})
	with SweepPool() as pool:
		results = pool.map(tasks)
	assert len(results) == 3
	assert isinstance(results[1], ConfigError)
	assert [r['value'] for r in (results[0], results[2])] == [1, 2]
	assert 'trace.jsonl' in results[0]['files']
	lines = sweep_csv(results).splitlines()
	assert len(lines) == 3
	assert lines[1].startswith('seed,1,fito')

def test_unknown_pool_mode():
	with pytest.raises(ValueError):
		SweepPool('threads')

def test_worker_compresses_its_files():
	task = sweep_tasks(make_config(**{'workload.run_duration_ns': 10**5}), 'seed', [4])[0]
	plain, packed = run_point(task), run_point(task, compress=True)
	assert all(isinstance(v, bytes) for v in packed['files'].values())
	assert unpack_files(packed['files']) == plain['files']
	# Serpent ships bytes as base64 dictionaries
	wire = dict((name, {'data': base64.b64encode(blob).decode('ascii'), 'encoding': 'base64'})
				for name, blob in packed['files'].items())
	assert unpack_files(wire) == plain['files']
	assert plain['score'] == packed['score']

def test_unpack_leaves_text_alone():
	assert unpack_files({'a.txt': 'x', 'b.txt': zlib.compress(b'y')}) == {'a.txt': 'x', 'b.txt': 'y'}

def test_utils():
	assert split_uri('PYRO:simworker@localhost:21000') == ('simworker', 'localhost', 21000)
	with pytest.raises(ValueError):
		split_uri('simworker-localhost')
	assert sec2hms(3725) == '1h:02m:05s'
	res, elapsed = LogFun(int)('x')
	assert isinstance(res, ValueError)
	assert elapsed == '0h:00m:00s'
	assert LogFun(ExperimentConfig)()[0] == ExperimentConfig()

if __name__ == '__main__':
	pytest.main(['test_pool.py'])
