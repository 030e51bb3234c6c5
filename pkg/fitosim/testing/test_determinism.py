import pytest

from fitosim.engine import Engine
from fitosim.simulation import execute, run

from .conftest import make_config

MS = 10**6

LOADED = {'workload.mutation_rate_per_s': 1e5, 'protocol.cores': 2,
		  'workload.fault_episodes': [{'kind': 'crash', 'start_ns': MS // 2}],
		  'latency.watchdog_period_ns': 400000}

@pytest.mark.parametrize('mode', ['fito', 'bilateral'])
def test_same_seed_same_trace(mode):
	config = make_config(mode=mode, **LOADED)
	assert run(config).trace.dumps() == run(config).trace.dumps()

def test_seed_changes_the_trace():
	a = run(make_config(seed=1, **LOADED)).trace.dumps()
	b = run(make_config(seed=2, **LOADED)).trace.dumps()
	assert a != b

@pytest.mark.parametrize('mode', ['fito', 'bilateral'])
def test_online_counters_match_the_trace(mode):
	result = run(make_config(mode=mode, **LOADED))
	assert result.summary.restarts >= 1
	assert result.replay_matches()
	assert result.counter_mismatches() == []

def test_message_records_can_be_left_out():
	full = run(make_config(**LOADED))
	lean = run(make_config(**dict(LOADED, **{'trace.messages': False})))
	assert len(lean.trace) < len(full.trace)
	assert lean.summary.requests_completed == full.summary.requests_completed
	assert lean.state == full.state

def test_paired_runs_share_the_workload(tmp_path):
	paired = execute(make_config(mode='paired', **LOADED), str(tmp_path))
	first = [r.records[0] for r in (paired.fito.trace, paired.bilateral.trace)]
	assert first[0].get('fingerprint') == first[1].get('fingerprint')
	assert first[0].get('seed') == first[1].get('seed')
	assert (tmp_path / 'comparison.txt').exists()
	assert (tmp_path / 'fito' / 'config.yaml').read_text().startswith('mode: fito')

def test_named_streams_are_independent():
	a, b = Engine(seed=5), Engine(seed=5)
	b.rng('other').random(1000)
	assert a.rng('mutations').random() == b.rng('mutations').random()

if __name__ == '__main__':
	pytest.main(['test_determinism.py'])
