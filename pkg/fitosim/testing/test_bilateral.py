import pytest

from fitosim import interconnect as ic
from fitosim import trace as tr
from fitosim.bilateral import COMPLETED, NOT_COMPLETED, BilateralProtocol
from fitosim.simulation import run

from .conftest import make_config, overheads

MS = 10**6

def bilateral_config(**dotted):
	dotted.setdefault('mode', 'bilateral')
	dotted.setdefault('protocol.compute_distribution', 'constant')
	return make_config(**dotted)

@pytest.fixture
def swap(engine, trace, link, host, config):
	return BilateralProtocol(engine, trace, link, host, config.for_mode('bilateral'))

def test_peer_answers_through_the_link(engine, link, host, swap):
	view = {'target': 1}
	frame = swap.initiate_swap(['thread-0'], nic_view=view)
	engine.run_until(375)
	assert swap.peer.reflected == 1
	assert link.posted[ic.NIC_TO_HOST] == 1
	assert not frame.participated
	assert swap.peer.pairs == []
	engine.run_until(750)
	assert frame.outcome == COMPLETED
	assert swap.peer.pairs == swap.host_pairs == [frame.pair]
	assert host.state()['thread-0'] == [0, view]
	assert swap.peer.views == {'thread-0': 0}

def test_reflected_frame_completes_even_if_the_peer_dies(engine, host, swap):
	frame = swap.initiate_swap(['thread-0'], nic_view={'target': 2})
	engine.run_until(375)
	swap.peer.liveness.crash()
	engine.run_until(750)
	assert frame.outcome == COMPLETED
	assert swap.peer.pairs == swap.host_pairs == [frame.pair]
	assert host.restarts == 0

def test_absent_peer_changes_nothing(engine, trace, host, swap):
	swap.peer.liveness.crash()
	frame = swap.initiate_swap(['thread-0'], nic_view={'target': 3})
	engine.run_until(750)
	assert frame.outcome == NOT_COMPLETED
	assert swap.peer.pairs == swap.host_pairs == []
	assert host.state()['thread-0'] == [0, None]
	assert host.restarts == 1
	restart, = trace.of_kind(tr.AGENT_RESTART)
	assert restart.get('snapshot_record') is None
	assert restart.get('undone_commits') == 0
	assert swap.liveness.participates(engine.now())

def test_frames_resolve_one_round_trip_after_they_start():
	result = run(bilateral_config(**{'workload.mutation_rate_per_s': 1e5}))
	resolved = list(result.trace.of_kind(tr.SWAP_RESOLVE))
	assert resolved
	assert all(r.get('resolved_at') - r.get('initiated_at') == 750 for r in resolved)
	assert all(r.get('outcome') == COMPLETED for r in resolved)

def test_request_cost_is_one_frame_plus_enforcement():
	result = run(bilateral_config())
	assert set(overheads(result)) == {750 + 3400}

def test_no_aborts_and_no_timeouts_under_contention():
	result = run(bilateral_config(**{'workload.mutation_rate_per_s': 2e5, 'protocol.cores': 2}))
	summary = result.summary
	assert summary.aborted == 0
	assert summary.watchdog_arms == 0
	assert summary.requests_dropped == 0
	assert summary.mutations > 0
	assert result.score.total == 0
	assert result.protocol.host_pairs == result.protocol.peer.pairs
	assert result.replay_matches()
	assert result.counter_mismatches() == []

def test_mutations_wait_for_the_frame_holding_their_resource():
	result = run(bilateral_config(**{'workload.mutation_rate_per_s': 2e5}))
	deferred = list(result.trace.of_kind(tr.MUTATE_DEFERRED))
	assert deferred
	assert result.host.deferred == len(deferred)

def test_crash_is_noticed_within_two_round_trips():
	config = bilateral_config(**{'workload.fault_episodes': [{'kind': 'crash', 'start_ns': MS}]})
	result = run(config)
	summary = result.summary
	assert summary.swaps_not_completed >= 1
	assert summary.detection_latency_max_ns <= 2 * 750
	restarts = list(result.trace.of_kind(tr.AGENT_RESTART))
	assert len(restarts) == 1
	assert restarts[0].get('rebuilt_from') == 'swap-ledger'
	# The peer resumes from the ledger it shares with the host; nothing is rebuilt
	assert restarts[0].get('snapshot_record') is None
	assert not any(s.get('purpose') == 'rebuild' for s in result.trace.of_kind(tr.SNAPSHOT))
	assert not result.score.c4_forward_recovery
	assert restarts[0].get('reason') == 'swap-not-completed'
	assert result.score.total == 0
	# Requests caught by the crash are retried, none is lost
	assert summary.requests_dropped == 0
	assert result.counter_mismatches() == []

def test_keepalive_frames_can_be_disabled():
	result = run(bilateral_config(**{'protocol.keepalive': False}))
	frames = list(result.trace.of_kind(tr.SWAP_INITIATE))
	assert frames
	assert all(f.get('purpose') == 'request' for f in frames)

def test_slow_peer_misses_frames():
	config = bilateral_config(**{'workload.fault_episodes': [{'kind': 'slow', 'start_ns': MS, 'duration_ns': 5000}]})
	result = run(config)
	outcomes = [r.get('outcome') for r in result.trace.of_kind(tr.SWAP_RESOLVE)]
	assert NOT_COMPLETED in outcomes
	assert outcomes[-1] == COMPLETED

if __name__ == '__main__':
	pytest.main(['test_bilateral.py'])
