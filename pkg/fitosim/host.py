""" Host kernel model. Kernel objects (threads, pages, RPC flows) are abstract
	versioned resources; the host is the source of truth for all of them.

	A decision computed on the SmartNIC is a :class:`Transaction` carrying the versions
	it observed. :meth:`HostKernel.attempt_commit` applies it only if none of those
	versions moved in the meantime, otherwise the transaction aborts and host state is
	left untouched.
"""
import logging

from . import trace as tr
from .errors import HostStateError, TransactionError

log = logging.getLogger(__name__)

# Transaction status
PENDING     = 'Pending'
COMMITTED   = 'Committed'
ABORTED     = 'Aborted'
INVALIDATED = 'Invalidated'

TERMINAL = frozenset([COMMITTED, ABORTED, INVALIDATED])

# Resource families and the prefix of their ids
FAMILIES = (('threads', 'thread'), ('pages', 'page'), ('flows', 'flow'))

def resource_family(resource_id):
	""" ``'thread-3'`` -> ``'threads'`` """
	prefix = resource_id.rsplit('-', 1)[0]
	for family, p in FAMILIES:
		if p == prefix:
			return family
	raise HostStateError('Unknown resource family for {!r}'.format(resource_id))

class ResourceState(object):
	""" Versioned kernel object. Only mutations move the version. """
	__slots__ = ('resource_id', 'version', 'last_mutated_at', 'decision')

	def __init__(self, resource_id):
		self.resource_id     = resource_id
		self.version         = 0
		self.last_mutated_at = 0
		self.decision        = None

class HostSnapshot(object):
	""" Versions of a set of resources as of ``taken_at`` (T1)

		:ivar int taken_at: Virtual time of the snapshot
		:ivar tuple entries: ``(resource_id, version)`` pairs
		:ivar int record: Index of the ``snapshot`` trace record
	"""
	__slots__ = ('taken_at', 'entries', 'record')

	def __init__(self, taken_at, entries, record=None):
		self.taken_at = taken_at
		self.entries  = tuple(entries)
		self.record   = record

	def versions(self):
		return dict(self.entries)

	def restrict(self, resource_ids):
		""" Sub-snapshot over ``resource_ids``, keeping the original time and record """
		versions = self.versions()
		try:
			return HostSnapshot(self.taken_at, [(r, versions[r]) for r in resource_ids], self.record)
		except KeyError as err:
			raise HostStateError('Resource {} is not part of the snapshot'.format(err))

	def as_list(self):
		return [[r, v] for r, v in self.entries]

class Transaction(object):
	""" One offloaded decision moving through the pipeline

		:ivar int txn_id: Unique id
		:ivar list target_resources: ``(resource_id, observed_version)`` pairs
		:ivar int t1_observed: Time the observed versions were captured
		:ivar int t2_decided: Time the NIC created the transaction
		:ivar int t3_arrived: Time the host attempted the commit
		:ivar object decision_payload: Opaque decision, JSON-native
		:ivar str status: Pending, Committed, Aborted or Invalidated
		:ivar int incarnation: Agent incarnation that produced the decision
	"""
	__slots__ = ('txn_id', 'target_resources', 't1_observed', 't2_decided', 't3_arrived', 'decision_payload',
				 'status', 'incarnation', 'snapshot_record', 'request_id', 'core', 'prestaged')

	def __init__(self, txn_id, snapshot, t2_decided, decision_payload, incarnation, request_id=None, core=None,
				 prestaged=False):
		self.txn_id           = txn_id
		self.target_resources = list(snapshot.entries)
		self.t1_observed      = snapshot.taken_at
		self.t2_decided       = t2_decided
		self.t3_arrived       = None
		self.decision_payload = decision_payload
		self.status           = PENDING
		self.incarnation      = incarnation
		self.snapshot_record  = snapshot.record
		self.request_id       = request_id
		self.core             = core
		self.prestaged        = prestaged

	@property
	def window(self):
		""" Vulnerability window ``t3 - t1`` (``None`` before arrival) """
		if self.t3_arrived is None:
			return None
		return self.t3_arrived - self.t1_observed

	@property
	def resource_ids(self):
		return [r for r, _ in self.target_resources]

	def finalize(self, status):
		if self.status != PENDING:
			raise TransactionError('Transaction {} is already {}'.format(self.txn_id, self.status))
		self.status = status

	def to_message(self):
		""" Wire form of a pending transaction (the decision ring entry). The receiver builds
			its own copy with :meth:`from_message`.
		"""
		return {'txn': self.txn_id, 'observed': [[r, v] for r, v in self.target_resources], 't1': self.t1_observed,
				't2': self.t2_decided, 'payload': self.decision_payload, 'incarnation': self.incarnation,
				'snapshot_record': self.snapshot_record, 'request': self.request_id, 'core': self.core,
				'prestaged': self.prestaged}

	@classmethod
	def from_message(cls, body):
		snapshot = HostSnapshot(body['t1'], [(r, v) for r, v in body['observed']], body.get('snapshot_record'))
		return cls(body['txn'], snapshot, body['t2'], body['payload'], body['incarnation'],
				   request_id=body.get('request'), core=body.get('core'), prestaged=body.get('prestaged', False))

class CommitOutcome(object):
	""" Result of a commit attempt

		:ivar str result: Committed, Aborted or Invalidated
		:ivar str aborted_on: First stale resource of an aborted transaction
	"""
	__slots__ = ('txn_id', 'result', 'aborted_on', 'committed_at')

	def __init__(self, txn_id, result, aborted_on, committed_at):
		self.txn_id       = txn_id
		self.result       = result
		self.aborted_on   = aborted_on
		self.committed_at = committed_at

	def __repr__(self):
		return 'CommitOutcome({}, {}, aborted_on={})'.format(self.txn_id, self.result, self.aborted_on)

class RecoveryReport(object):
	""" What :meth:`HostKernel.restart_agent` did

		:ivar int incarnation: The new agent incarnation
		:ivar int restarted_at: Virtual time of the restart
		:ivar int downtime_ns: Time from the agent being marked dead until it is usable again
		:ivar int invalidated: Pending transactions of the dead incarnation
		:ivar HostSnapshot snapshot: Full snapshot the agent is rebuilt from (``None`` without rebuild)
	"""
	def __init__(self, incarnation, restarted_at, downtime_ns, invalidated, snapshot, reason):
		self.incarnation  = incarnation
		self.restarted_at = restarted_at
		self.downtime_ns  = downtime_ns
		self.invalidated  = invalidated
		self.snapshot     = snapshot
		self.reason       = reason

class TransactionLog(object):
	""" Transactions by id. The host keeps one for the decisions that reached it and the
		NIC agent keeps its own for the ones it created; ids are handed out by the agent.
	"""
	def __init__(self):
		self._next_id = 0
		self._txns    = {}

	def new_id(self):
		txn_id = self._next_id
		self._next_id += 1
		return txn_id

	def add(self, txn):
		if txn.txn_id in self._txns:
			raise TransactionError('Transaction {} is already known'.format(txn.txn_id))
		self._txns[txn.txn_id] = txn
		self._next_id = max(self._next_id, txn.txn_id + 1)
		return txn

	def get(self, txn_id, default=None):
		return self._txns.get(txn_id, default)

	def pop(self, txn_id):
		return self._txns.pop(txn_id, None)

	def clear(self):
		""" Forget every transaction. Ids keep counting up. """
		self._txns.clear()

	def __contains__(self, txn_id):
		return txn_id in self._txns

	def pending(self, incarnation=None):
		return [t for t in self._txns.values()
				if t.status == PENDING and (incarnation is None or t.incarnation == incarnation)]

	def __len__(self):
		return len(self._txns)

	def __iter__(self):
		return iter(self._txns.values())

class HostKernel(object):
	""" Host kernel state and the commit / recovery primitives of the offload API.

		:param Engine engine: Event loop
		:param Trace trace: Trace recorder
		:param ResourceCounts resource_counts: Number of threads, pages and flows
		:param int restart_ns: Time an agent restart takes before the new incarnation is usable
	"""
	def __init__(self, engine, trace, resource_counts, restart_ns=0):
		self.engine     = engine
		self.trace      = trace
		self.restart_ns = restart_ns
		self.resources  = {}
		for family, prefix in FAMILIES:
			for i in range(getattr(resource_counts, family)):
				rid = '{}-{}'.format(prefix, i)
				self.resources[rid] = ResourceState(rid)

		self.transactions = TransactionLog()
		self.incarnation  = 0
		self.agent_alive  = True
		self.dead_since   = None
		self.last_contact_at = 0

		self._held     = {}
		self._deferred = []
		self._restart_listeners = []

		self.mutations   = 0
		self.deferred    = 0
		self.committed   = 0
		self.aborted     = 0
		self.invalidated = 0
		self.late_arrivals = 0
		self.restarts    = 0

	def resource_ids(self, family=None):
		""" Resource ids in creation order, optionally restricted to one family """
		if family is None:
			return list(self.resources)
		return [r for r in self.resources if resource_family(r) == family]

	def _resource(self, resource_id):
		try:
			return self.resources[resource_id]
		except KeyError:
			raise HostStateError('Unknown resource {!r}'.format(resource_id))

	# State changes

	def mutate(self, resource_id):
		""" The kernel changes a resource under the agent's feet

			:return int: The new version
		"""
		state = self._resource(resource_id)
		now = self.engine.now()
		state.version += 1
		state.last_mutated_at = now
		self.mutations += 1
		self.trace.emit(tr.MUTATE, resource=resource_id, version=state.version)
		return state.version

	def request_mutation(self, resource_id):
		""" Mutation coming from the workload. Resources held by an in-flight swap defer it
			until the swap resolves.

			:return int: The new version, or ``None`` if deferred
		"""
		self._resource(resource_id)
		if resource_id in self._held:
			self._deferred.append(resource_id)
			self.deferred += 1
			self.trace.emit(tr.MUTATE_DEFERRED, resource=resource_id, swap_id=self._held[resource_id])
			return None
		return self.mutate(resource_id)

	def holder(self, resource_id):
		return self._held.get(resource_id)

	def hold(self, resource_ids, swap_id):
		for rid in resource_ids:
			self._resource(rid)
			if rid in self._held:
				raise HostStateError('Resource {} is already held by swap {}'.format(rid, self._held[rid]))
		for rid in resource_ids:
			self._held[rid] = swap_id

	def release(self, resource_ids):
		""" Release swap-held resources and apply their deferred mutations in arrival order

			:return list: Versions produced by the deferred mutations
		"""
		released = set(resource_ids)
		for rid in released:
			self._held.pop(rid, None)
		applied, remaining = [], []
		for rid in self._deferred:
			if rid in released:
				applied.append(self.mutate(rid))
			else:
				remaining.append(rid)
		self._deferred = remaining
		return applied

	def snapshot(self, resource_ids=None, purpose='observe'):
		""" Copy the current versions of ``resource_ids`` (all resources if ``None``). This is
			the T1 of any transaction built from it.
		"""
		if resource_ids is None:
			resource_ids = list(self.resources)
		entries = [(rid, self._resource(rid).version) for rid in resource_ids]
		record = self.trace.emit(tr.SNAPSHOT, entries=[[r, v] for r, v in entries], purpose=purpose)
		return HostSnapshot(self.engine.now(), entries, record.index if record is not None else None)

	def attempt_commit(self, txn):
		""" Commit a decision if every observed version is still current. Called at T3.

			:param Transaction txn: A pending transaction
			:return CommitOutcome: The outcome (Invalidated for a dead incarnation)
		"""
		now = self.engine.now()
		if txn.status == INVALIDATED:
			# Decision of a dead incarnation still crossing the link
			self.late_arrivals += 1
			return CommitOutcome(txn.txn_id, INVALIDATED, None, now)
		if txn.status != PENDING:
			raise TransactionError('Transaction {} is already {}'.format(txn.txn_id, txn.status))
		txn.t3_arrived = now

		if txn.incarnation != self.incarnation:
			self._invalidate(txn, 'stale-incarnation')
			return CommitOutcome(txn.txn_id, INVALIDATED, None, now)

		stale = None
		for rid, observed in txn.target_resources:
			if self._resource(rid).version != observed:
				stale = rid
				break

		attrs = dict(txn=txn.txn_id, observed=[[r, v] for r, v in txn.target_resources], t1=txn.t1_observed,
					 t2=txn.t2_decided, t3=now, window=now - txn.t1_observed, snapshot_record=txn.snapshot_record,
					 validated_by='version-compare', incarnation=txn.incarnation, prestaged=txn.prestaged,
					 core=txn.core, request=txn.request_id)
		if stale is None:
			txn.finalize(COMMITTED)
			for rid in txn.resource_ids:
				self.resources[rid].decision = txn.decision_payload
			self.committed += 1
			self.trace.emit(tr.COMMIT_OUTCOME, result=COMMITTED, aborted_on=None, payload=txn.decision_payload,
							**attrs)
		else:
			txn.finalize(ABORTED)
			self.aborted += 1
			self.trace.emit(tr.COMMIT_OUTCOME, result=ABORTED, aborted_on=stale,
							current_version=self.resources[stale].version, **attrs)
		return CommitOutcome(txn.txn_id, txn.status, stale, now)

	def apply_decision(self, resource_ids, payload):
		""" Install a decision without a version check (the bilateral swap commit) """
		for rid in resource_ids:
			self._resource(rid).decision = payload

	def _invalidate(self, txn, reason):
		txn.finalize(INVALIDATED)
		self.invalidated += 1
		self.trace.emit(tr.COMMIT_OUTCOME, txn=txn.txn_id, result=INVALIDATED, aborted_on=None, reason=reason,
						incarnation=txn.incarnation, t1=txn.t1_observed, t2=txn.t2_decided, core=txn.core,
						request=txn.request_id)

	# Agent lifecycle

	def on_restart(self, listener):
		""" Call ``listener(report)`` after every agent restart """
		self._restart_listeners.append(listener)

	def note_agent_contact(self):
		self.last_contact_at = self.engine.now()

	def mark_agent_dead(self):
		if self.agent_alive:
			self.agent_alive = False
			self.dead_since  = self.engine.now()

	def committed_decisions(self):
		return dict((rid, s.decision) for rid, s in self.resources.items())

	def restart_agent(self, reason='watchdog', rebuild=True):
		""" Discard everything the dead agent incarnation derived and start a new one.
			Committed decisions stay committed.

			:param bool rebuild: Rebuild the agent from a full snapshot of host state. Without
								 it the agent resumes from the state it already shares with the
								 host (the bilateral swap ledger).
			:return RecoveryReport: Downtime and discarded-transaction count
		"""
		if self.agent_alive:
			raise HostStateError('Cannot restart a live agent (incarnation {})'.format(self.incarnation))

		now = self.engine.now()
		before = self.committed_decisions()
		dead = self.transactions.pending(self.incarnation)
		for txn in dead:
			self._invalidate(txn, 'agent-restart')
		self.incarnation += 1
		self.restarts    += 1

		snap = self.snapshot(purpose='rebuild') if rebuild else None
		after = self.committed_decisions()
		undone = sum(1 for rid, decision in before.items() if after[rid] != decision)
		downtime = now - self.dead_since + self.restart_ns
		self.trace.emit(tr.AGENT_RESTART, incarnation=self.incarnation, reason=reason, invalidated=len(dead),
						downtime_ns=downtime, rebuilt_from='host-snapshot' if rebuild else 'swap-ledger',
						undone_commits=undone, snapshot_record=snap.record if snap is not None else None)
		log.debug('Agent restarted at t=%d (incarnation %d, %d txn(s) invalidated)', now, self.incarnation, len(dead))

		report = RecoveryReport(self.incarnation, now, downtime, len(dead), snap, reason)
		self.agent_alive = True
		self.dead_since  = None
		for listener in self._restart_listeners:
			listener(report)
		return report

	def state(self):
		""" ``{resource_id: [version, decision]}`` for comparison with a trace replay """
		return dict((rid, [s.version, s.decision]) for rid, s in self.resources.items())
