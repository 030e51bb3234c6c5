import numpy as np
import pytest

from fitosim import trace as tr
from fitosim.engine import Engine
from fitosim.errors import ConfigError
from fitosim.simulation import run
from fitosim.workload import (AgentLiveness, FaultInjector, Trigger, mutation_times, partition, poisson_arrivals,
							  trigger_sources)

from .conftest import make_config

def test_poisson_arrivals_have_the_configured_rate(engine):
	times = mutation_times(1e6, 10**8, engine.rng('mutations'))
	assert np.all(np.diff(times) >= 0)
	assert times[-1] < 10**8
	# 1e5 expected arrivals, sd ~316
	assert abs(len(times) - 10**5) < 1500

def test_zero_rate_yields_nothing(engine):
	assert list(poisson_arrivals(0, 10**9, engine.rng('x'))) == []

def test_mutation_stream_depends_only_on_the_seed():
	a = mutation_times(1e5, 10**7, Engine(seed=3).rng('mutations'))
	b = mutation_times(1e5, 10**7, Engine(seed=3).rng('mutations'))
	assert a.tolist() == b.tolist()

def test_partition_deals_resources_round_robin(host):
	cores = partition(host, 2)
	assert cores[0]['threads'] == ['thread-0', 'thread-2']
	assert cores[1]['threads'] == ['thread-1', 'thread-3']
	assert cores[1]['pages'] == ['page-1']

def test_trigger_sources_peek_ahead(engine, host):
	source = trigger_sources(engine, host, 2, {'scheduling': 1.0})[1]
	peeked = source.peek()
	assert source.next() == peeked
	assert peeked.component == 'scheduling'
	assert peeked.event == 'thread-blocked'
	assert peeked.resources[0] in ('thread-1', 'thread-3')

def test_alternative_trigger_is_a_different_resource(engine, host):
	source = trigger_sources(engine, host, 1, {'scheduling': 1.0})[0]
	actual = source.peek()
	for _ in range(20):
		other = source.alternative(actual, engine.rng('predictor'))
		assert other.component == actual.component
		assert other.resources != actual.resources

def test_component_without_resources_is_rejected(engine, host):
	with pytest.raises(ConfigError):
		trigger_sources(engine, host, 1, {'rpc': 1.0})

def test_trigger_equality():
	assert Trigger('memory', ['page-0']) == Trigger('memory', ['page-0'])
	assert Trigger('memory', ['page-0']) != Trigger('memory', ['page-1'])
	assert len({Trigger('memory', ['page-0']), Trigger('memory', ['page-0']), Trigger('rpc', ['flow-0'])}) == 2
	assert Trigger('rpc', ['flow-0']).to_dict() == {'component': 'rpc', 'event': 'rpc-arrived',
													'resources': ['flow-0']}

def test_closed_loop_throughput_is_the_inverse_overhead():
	config = make_config(**{'protocol.compute_distribution': 'constant'}).with_flags(False)
	result = run(config)
	# One client, 13175 ns per request
	assert result.summary.throughput_req_per_s == pytest.approx(1e9 / 13175, rel=0.01)

def test_open_loop_arrivals():
	config = make_config(**{'workload.loop': 'open', 'workload.event_arrival_rate_per_s': 1e5,
							 'protocol.cores': 4})
	result = run(config)
	# 200 expected arrivals in 2 ms, sd ~14
	assert 130 < result.driver.issued < 270
	assert result.driver.completed <= result.driver.issued
	cores = set(r.get('core') for r in result.trace.of_kind(tr.REQUEST_COMPLETE))
	assert cores == {0, 1, 2, 3}

def test_liveness_follows_crash_and_slow():
	live = AgentLiveness()
	live.slow(until=500)
	assert not live.participates(499)
	assert live.participates(500)
	live.crash()
	assert not live.participates(1000)
	live.revive()
	assert live.participates(1000)

def test_fault_injector_applies_episodes(engine, trace):
	live = AgentLiveness()
	injector = FaultInjector(engine, trace, live)
	injector.inject_episode('slow', 100, 400)
	injector.inject_episode('crash', 1000, 0)
	engine.run_until(200)
	assert live.slow_until == 500
	assert injector.classify_kill() == 'false-positive'
	engine.run_until(2000)
	assert injector.classify_kill() == 'true-positive'
	phases = [(r.get('episode_kind'), r.get('phase')) for r in trace.of_kind(tr.EPISODE_MARKER)]
	assert phases == [('slow', 'start'), ('slow', 'end'), ('crash', 'start')]

def test_overlapping_episodes_of_one_kind_are_rejected(engine, trace):
	injector = FaultInjector(engine, trace, AgentLiveness())
	injector.inject_episode('slow', 0, 1000)
	injector.inject_episode('crash', 500, 0)
	with pytest.raises(ConfigError):
		injector.inject_episode('slow', 999, 10)

if __name__ == '__main__':
	pytest.main(['test_workload.py'])
