import math

import pytest

from fitosim import trace as tr
from fitosim.config import ResourceCounts
from fitosim.engine import Engine
from fitosim.errors import HostStateError, TransactionError
from fitosim.host import ABORTED, COMMITTED, INVALIDATED, PENDING, HostKernel, Transaction
from fitosim.trace import Trace
from fitosim.workload import gen_mutations

def open_txn(host, resources, payload='decision'):
	snap = host.snapshot(resources)
	txn = Transaction(host.transactions.new_id(), snap, host.engine.now(), payload, host.incarnation)
	host.transactions.add(txn)
	return txn

def test_resources_are_named_by_family(host):
	assert host.resource_ids('threads') == ['thread-0', 'thread-1', 'thread-2', 'thread-3']
	assert host.resource_ids('pages') == ['page-0', 'page-1']
	with pytest.raises(HostStateError):
		host.mutate('flow-0')

def test_commit_installs_the_decision(host):
	txn = open_txn(host, ['thread-1'], payload={'target': 0})
	outcome = host.attempt_commit(txn)
	assert outcome.result == COMMITTED
	assert host.state()['thread-1'] == [0, {'target': 0}]
	assert txn.status == COMMITTED

def test_stale_observation_aborts(host, trace):
	txn = open_txn(host, ['thread-0', 'thread-2'])
	host.mutate('thread-2')
	outcome = host.attempt_commit(txn)
	assert (outcome.result, outcome.aborted_on) == (ABORTED, 'thread-2')
	record = list(trace.of_kind(tr.COMMIT_OUTCOME))[-1]
	assert record.get('current_version') == 1
	assert dict(record.get('observed'))['thread-2'] == 0
	assert record.get('validated_by') == 'version-compare'
	assert host.state()['thread-0'] == [0, None]

def test_terminal_transactions_cannot_commit_again(host):
	txn = open_txn(host, ['thread-0'])
	host.attempt_commit(txn)
	with pytest.raises(TransactionError):
		host.attempt_commit(txn)

def test_restart_invalidates_pending_decisions(host, engine):
	txn = open_txn(host, ['thread-0'])
	with pytest.raises(HostStateError):
		host.restart_agent()
	host.mark_agent_dead()
	report = host.restart_agent()
	assert report.invalidated == 1
	assert report.incarnation == host.incarnation == 1
	assert txn.status == INVALIDATED

	# The dead incarnation's decision still lands later: counted, not applied
	outcome = host.attempt_commit(txn)
	assert outcome.result == INVALIDATED
	assert host.late_arrivals == 1
	assert host.state()['thread-0'] == [0, None]

def test_restart_record_describes_forward_recovery(host, trace):
	host.mark_agent_dead()
	host.restart_agent(reason='watchdog')
	record = next(trace.of_kind(tr.AGENT_RESTART))
	assert record.get('rebuilt_from') == 'host-snapshot'
	assert record.get('undone_commits') == 0
	assert trace.records[record.get('snapshot_record')].get('purpose') == 'rebuild'

def test_restart_without_rebuild_resumes_from_the_ledger(host, trace):
	commit = open_txn(host, ['thread-1'])
	host.attempt_commit(commit)
	host.mark_agent_dead()
	report = host.restart_agent(reason='swap-not-completed', rebuild=False)
	assert report.snapshot is None
	record = next(trace.of_kind(tr.AGENT_RESTART))
	assert record.get('rebuilt_from') == 'swap-ledger'
	assert record.get('snapshot_record') is None
	assert record.get('undone_commits') == 0
	assert not any(s.get('purpose') == 'rebuild' for s in trace.of_kind(tr.SNAPSHOT))
	assert host.state()['thread-1'][1] == commit.decision_payload

def test_decision_of_an_older_incarnation_is_invalidated(host):
	txn = open_txn(host, ['thread-0'])
	txn.incarnation = host.incarnation - 1
	assert host.attempt_commit(txn).result == INVALIDATED
	assert host.invalidated == 1

def test_held_resources_defer_mutations_until_release(host, trace):
	host.hold(['thread-0'], swap_id=9)
	assert host.request_mutation('thread-0') is None
	assert host.request_mutation('thread-1') == 1
	with pytest.raises(HostStateError):
		host.hold(['thread-0'], swap_id=10)
	assert host.release(['thread-0']) == [1]
	assert host.state()['thread-0'][0] == 1
	assert next(trace.of_kind(tr.MUTATE_DEFERRED)).get('swap_id') == 9

def test_new_transactions_start_pending(host):
	assert open_txn(host, ['page-1']).status == PENDING
	assert len(host.transactions.pending()) == 1

def test_abort_rate_matches_the_poisson_oracle():
	""" 1 - exp(-rate * W) with rate 1e5/s and W = 4 us is 0.3297 """
	rate, window, n = 1e5, 4000, 10**5
	engine = Engine(seed=11)
	trace  = Trace(engine)
	host   = HostKernel(engine, trace, ResourceCounts(threads=1))
	gen_mutations(engine, host, rate, window * (n + 1))

	outcomes = []
	def step(event):
		action, txn = event.payload
		if action == 'close':
			outcomes.append(host.attempt_commit(txn).result)
		if len(outcomes) < n:
			engine.schedule(window, 'oracle', ('close', open_txn(host, ['thread-0'])))
	engine.register('oracle', step)
	engine.schedule(0, 'oracle', ('open', None))
	engine.run_until(window * (n + 1))

	p = 1 - math.exp(-rate * window * 1e-9)
	assert p == pytest.approx(0.3297, abs=1e-4)
	observed = outcomes.count(ABORTED) / float(len(outcomes))
	sigma = math.sqrt(p * (1 - p) / len(outcomes))
	assert len(outcomes) == n
	assert abs(observed - p) <= 3 * sigma

if __name__ == '__main__':
	pytest.main(['test_host.py'])
