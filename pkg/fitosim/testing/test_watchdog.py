import pytest

from fitosim import trace as tr
from fitosim.checks import restart_delays
from fitosim.config import LatencyConfig, load_config
from fitosim.fito import Watchdog
from fitosim.simulation import run

MS = 10**6

SLOW_ONLY = [{'kind': 'slow', 'start_ns': 6 * MS, 'duration_ns': 25 * MS}]

@pytest.fixture
def watchdog(engine, trace, host):
	wd = Watchdog(engine, trace, host, LatencyConfig(watchdog_period_ns=1000))
	wd.start()
	return wd

def test_tick_is_a_quarter_period():
	assert LatencyConfig(watchdog_period_ns=1000).watchdog_tick_ns == 250
	assert LatencyConfig(watchdog_period_ns=1000, watchdog_tick_ns=100).watchdog_tick_ns == 100

def test_kill_after_a_full_silent_period(engine, trace, host, watchdog):
	engine.run_until(1000)
	# Silence of exactly one period is tolerated
	assert watchdog.state.kills == 0
	engine.run_until(1250)
	assert watchdog.state.kills == 1
	kill = next(trace.of_kind(tr.WATCHDOG_KILL))
	assert kill.at == 1250
	assert kill.get('silent_ns') == 1250
	assert kill.get('classification') == 'unknown'
	assert host.incarnation == 1
	restart = next(trace.of_kind(tr.AGENT_RESTART))
	assert restart.get('rebuilt_from') == 'host-snapshot'
	assert restart.get('undone_commits') == 0
	assert len(list(trace.of_kind(tr.WATCHDOG_ARM))) == 2

def test_contact_keeps_the_agent_alive(engine, host, watchdog):
	for t in range(500, 5000, 500):
		engine.run_until(t)
		host.note_agent_contact()
	assert watchdog.state.kills == 0
	assert watchdog.state.last_heartbeat_at == 4000

def test_classifier_labels_the_kill(engine, host, watchdog):
	watchdog.classifier = lambda: 'true-positive'
	engine.run_until(1250)
	assert watchdog.state.true_positive_kills == 1
	assert watchdog.state.false_positive_kills == 0

def test_slow_agent_is_killed_when_the_period_is_short():
	config = load_config(preset='flp-3.2').replace(**{'workload.run_duration_ns': 40 * MS,
													  'workload.fault_episodes': SLOW_ONLY})
	result = run(config)
	kills = list(result.trace.of_kind(tr.WATCHDOG_KILL))
	assert [k.get('classification') for k in kills] == ['false-positive']
	# Last contact just before the 6 ms episode, ticks every 5 ms
	assert kills[0].at == 30 * MS
	assert result.summary.kills_false_positive == 1

def test_slow_agent_survives_a_longer_period():
	config = load_config(preset='flp-3.2').replace(**{'workload.run_duration_ns': 40 * MS,
													  'workload.fault_episodes': SLOW_ONLY,
													  'latency.watchdog_period_ns': 40 * MS})
	assert config.latency.watchdog_tick_ns == 10 * MS
	result = run(config)
	assert result.summary.kills_false_positive == 0
	assert result.summary.restarts == 0

def test_crashed_agent_is_restarted_within_two_periods():
	config = load_config(preset='flp-3.2')
	result = run(config)
	period = config.latency.watchdog_period_ns
	delays, unrestarted = restart_delays(result.trace)
	assert unrestarted == []
	assert len(delays) == 1
	assert period <= delays[0] <= 2 * period
	assert result.summary.kills_true_positive == 1
	assert result.score.total == 4
	# Requests resume once the new incarnation is up
	after = [r for r in result.trace.of_kind(tr.REQUEST_COMPLETE) if r.at > 50 * MS + delays[0]]
	assert after

if __name__ == '__main__':
	pytest.main(['test_watchdog.py'])
