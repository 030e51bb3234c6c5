""" Forward-in-time-only offload pipeline.

	The host forwards an event with a snapshot of the state it observed (T1), the NIC
	agent computes a decision and creates a transaction (T2), the decision crosses back
	and the host commits it or aborts it on arrival (T3). Only messages cross between the
	two actors; they share no state.

	Latency mitigations (see :class:`~fitosim.config.OptimizationFlags`):

	* write combining of posted messages
	* write-through caching of the decision ring metadata
	* prefetching of decision lines as soon as the decision arrives
	* prestaging of one speculative decision per core

	A :class:`Watchdog` kills and restarts an agent that stays silent for a full period.
"""
import logging

from . import interconnect as ic
from . import trace as tr
from .host import ABORTED, COMMITTED, INVALIDATED, Transaction, TransactionLog
from .workload import DONE, DROPPED, AgentLiveness, partition

log = logging.getLogger(__name__)

# Host memory the agent polls for commit outcomes
OUTCOME_RING = 'txn-outcomes'

def ring_meta_line(i):
	return ('ring-meta', i)

def ring_line(slot, i):
	return ('ring', slot, i)

def slot_line(core, i):
	return ('prestage', core, i)

def make_decision(trigger, core, seq):
	""" Policy stand-in: the decision names the resources it acts on and where to run them """
	return {'component': trigger.component, 'resources': list(trigger.resources), 'target': core, 'seq': seq}

class StagedDecision(object):
	__slots__ = ('predicted', 'payload', 'snapshot', 'staged_at', 'incarnation', 'txn_id')

	def __init__(self, predicted, payload, snapshot, staged_at, incarnation, txn_id):
		self.predicted   = predicted
		self.payload     = payload
		self.snapshot    = snapshot
		self.staged_at   = staged_at
		self.incarnation = incarnation
		self.txn_id      = txn_id

class PrestageSlot(object):
	""" The one speculative decision a core may hold

		:ivar StagedDecision staged: Current staged decision (``None`` when empty)
	"""
	def __init__(self, core_id):
		self.core_id    = core_id
		self.staged     = None
		self.hit_count  = 0
		self.miss_count = 0
		self.empty_count = 0
		self.replaced_count = 0

class WatchdogState(object):
	""" Liveness bookkeeping of the watchdog. Kill classification uses simulator ground
		truth and is for accounting only.
	"""
	def __init__(self, period_ns):
		self.period_ns = period_ns
		self.last_heartbeat_at = 0
		self.kills = 0
		self.true_positive_kills  = 0
		self.false_positive_kills = 0

class OraclePredictor(object):
	""" Predicts each core's next trigger. It is right with probability ``accuracy``;
		otherwise it names another resource of the same component.
	"""
	def __init__(self, sources, accuracy, rng):
		self.sources  = sources
		self.accuracy = accuracy
		self._rng     = rng

	def predict(self, core):
		actual = self.sources[core].peek()
		if self._rng.random() < self.accuracy:
			return actual
		return self.sources[core].alternative(actual, self._rng)

class NicAgent(object):
	""" The offloaded policy agent running on the SmartNIC. It serves jobs (decisions and
		prestaging) one at a time in arrival order.

		:ivar int incarnation: Current incarnation; bumped by every restart
		:ivar AgentLiveness liveness: Physical condition, driven by fault injection
		:ivar HostSnapshot view: State derived from the last rebuild snapshot
		:ivar TransactionLog transactions: Transactions created and not yet polled back
	"""
	TARGET = 'fito-nic'

	def __init__(self, engine, trace, interconnect, config, predictor=None):
		self.engine       = engine
		self.trace        = trace
		self.interconnect = interconnect
		self.transactions = TransactionLog()
		self.latency      = config.latency
		self.protocol     = config.protocol
		self.flags        = config.flags
		self.predictor    = predictor
		self.liveness     = AgentLiveness()
		self.incarnation  = 0
		self.view         = None
		self.heartbeat_interval = self.protocol.heartbeat_interval_ns or max(1, self.latency.watchdog_period_ns // 2)

		self.decisions    = 0
		self.staged       = 0
		self.dropped_jobs = 0
		self.heartbeats   = 0

		self._queue    = []
		self._busy     = False
		self._ready_at = 0
		self._outcomes = []
		self._dma_done = set()
		self._parked   = {}
		self._seq      = 0
		self._compute  = engine.rng('nic-compute')

		engine.register(self.TARGET, self._on_event)
		interconnect.connect(ic.HOST_TO_NIC, self._on_message)

	def start(self):
		if self.protocol.idle_heartbeats:
			self.engine.schedule(self.heartbeat_interval, self.TARGET, ('heartbeat', self.incarnation))

	def compute_ns(self):
		mean = self.latency.nic_compute_ns
		if self.protocol.compute_distribution == 'constant':
			return mean
		return max(1, int(round(self._compute.exponential(mean))))

	def _available_at(self):
		return max(self.liveness.slow_until, self._ready_at)

	# Inbound

	def _on_message(self, msg):
		payload = msg.payload
		if self.liveness.crashed or payload.get('incarnation') != self.incarnation:
			self.dropped_jobs += 1
			return

		if msg.kind == ic.EVENT:
			request = payload['request']
			if payload.get('dma') and request not in self._dma_done:
				self._parked[request] = payload
			else:
				self._dma_done.discard(request)
				self._enqueue(('decide', payload))
		elif msg.kind == ic.OUTCOME:
			self._outcomes.append(payload)
			outcomes, ready_at = self.poll_txns()
			self.engine.schedule_at(ready_at, self.TARGET, ('outcomes', (self.incarnation, outcomes)))

	def on_dma(self, request):
		""" The page-table entry set of ``request`` landed in NIC memory """
		if self.liveness.crashed:
			return
		payload = self._parked.pop(request, None)
		if payload is None:
			self._dma_done.add(request)
		else:
			self._enqueue(('decide', payload))

	def poll_txns(self):
		""" POLL_TXNS: collect the commit outcomes that crossed back since the last poll.
			Each outcome is returned exactly once.

			:return tuple: (outcomes, time at which the poll read completes)
		"""
		_, ready_at = self.interconnect.blocking_read(ic.HOST_TO_NIC, OUTCOME_RING)
		outcomes, self._outcomes = self._outcomes, []
		for outcome in outcomes:
			self.transactions.pop(outcome['txn'])
		return outcomes, ready_at

	# FIFO server

	def _enqueue(self, job):
		self._queue.append(job)
		self._start_next()

	def _start_next(self):
		if self._busy or not self._queue:
			return
		if self.liveness.crashed:
			self.dropped_jobs += len(self._queue)
			del self._queue[:]
			return

		self._busy = True
		start = self._available_at()
		if start > self.engine.now():
			self.engine.schedule_at(start, self.TARGET, ('wake', self.incarnation))
			return
		job = self._queue.pop(0)
		self.engine.schedule(self.compute_ns(), self.TARGET, ('done', (self.incarnation, job)))

	def _on_event(self, event):
		action, data = event.payload
		if action == 'wake':
			if data == self.incarnation:
				self._busy = False
				self._start_next()
		elif action == 'done':
			incarnation, job = data
			if incarnation != self.incarnation:
				return
			if self.liveness.crashed:
				self._busy = False
				self.dropped_jobs += 1 + len(self._queue)
				del self._queue[:]
				return
			if self.engine.now() < self._available_at():
				# Slowed down while computing
				self.engine.schedule_at(self._available_at(), self.TARGET, event.payload)
				return
			self._busy = False
			self._finish(job)
			self._start_next()
		elif action == 'outcomes':
			incarnation, outcomes = data
			if incarnation != self.incarnation or self.liveness.crashed:
				return
			for outcome in outcomes:
				if outcome['redecide']:
					self._enqueue(('decide', outcome))
				elif self.flags.prestaging_enabled and outcome.get('snapshot') is not None:
					self._enqueue(('stage', outcome))
		elif action == 'heartbeat':
			self._heartbeat(data)

	def _heartbeat(self, incarnation):
		if incarnation != self.incarnation or self.liveness.crashed:
			return
		if self.engine.now() < self._available_at():
			self.engine.schedule_at(self._available_at(), self.TARGET, ('heartbeat', incarnation))
			return
		self.heartbeats += 1
		self.interconnect.post_write(ic.NIC_TO_HOST, {'incarnation': self.incarnation}, 8, kind=ic.HEARTBEAT,
									 combine=False)
		self.trace.emit(tr.HEARTBEAT, incarnation=self.incarnation)
		self.engine.schedule(self.heartbeat_interval, self.TARGET, ('heartbeat', incarnation))

	def _finish(self, job):
		kind, info = job
		self._seq += 1
		if kind == 'decide':
			trigger  = info['trigger']
			payload  = make_decision(trigger, info['core'], self._seq)
			snapshot = info['snapshot'].restrict(trigger.resources)
			txn = self.txn_create(payload, snapshot, request_id=info['request'], core=info['core'])
			self.txns_commit([txn])
		else:
			self._stage(info)

	# Transaction API

	def txn_create(self, decision_payload, snapshot, request_id=None, core=None):
		""" TXN_CREATE: open a transaction observing ``snapshot``. T2 is now. """
		now = self.engine.now()
		txn = Transaction(self.transactions.new_id(), snapshot, now, decision_payload, self.incarnation,
						  request_id=request_id, core=core)
		self.transactions.add(txn)
		self.trace.emit(tr.TXN_CREATE, txn=txn.txn_id, t1=txn.t1_observed, t2=now, resources=txn.resource_ids,
						incarnation=self.incarnation, request=request_id, core=core, prestaged=False)
		return txn

	def txns_commit(self, txns):
		""" TXNS_COMMIT: publish a batch of decisions to the host and notify it

			:return list: The transactions sent (empty batch is a no-op)
		"""
		if not txns:
			return []

		shared, lines = self.protocol.txn_shared_lines, self.protocol.txn_read_lines
		for txn in txns:
			slot = txn.txn_id % self.protocol.ring_slots
			for i in range(shared, lines):
				self.interconnect.store(ic.NIC_TO_HOST, ring_line(slot, i), txn.txn_id)

		ids = [t.txn_id for t in txns]
		body = {'txns': [t.to_message() for t in txns], 'incarnation': self.incarnation}
		self.interconnect.post_write(ic.NIC_TO_HOST, body, self.protocol.decision_size_bytes * len(ids),
									 kind=ic.DECISION)
		if self.interconnect.wc_enabled:
			self.interconnect.wc_flush(ic.NIC_TO_HOST)
		if self.protocol.msix_notify:
			self.interconnect.deliver_msix(FitoHost.TARGET, {'txns': ids, 'incarnation': self.incarnation})
		self.decisions += len(ids)
		return txns

	def _stage(self, outcome):
		core      = outcome['core']
		predicted = self.predictor.predict(core)
		payload   = make_decision(predicted, core, self._seq)
		for i in range(self.protocol.prestage_slot_lines):
			self.interconnect.store(ic.NIC_TO_HOST, slot_line(core, i), self._seq)
		# The id is reserved now; the host opens the transaction if the prediction is used
		body = {'core': core, 'predicted': predicted, 'payload': payload, 'snapshot': outcome['snapshot'],
				'staged_at': self.engine.now(), 'incarnation': self.incarnation, 'txn': self.transactions.new_id()}
		self.interconnect.post_write(ic.NIC_TO_HOST, body, self.protocol.decision_size_bytes, kind=ic.STAGED)
		if self.interconnect.wc_enabled:
			self.interconnect.wc_flush(ic.NIC_TO_HOST)
		self.staged += 1

	def reset(self, report):
		""" New incarnation rebuilt from the host's full snapshot """
		self.incarnation = report.incarnation
		self.view        = report.snapshot
		self.liveness.revive()
		self._ready_at   = self.engine.now() + self.latency.agent_restart_ns
		self.dropped_jobs += len(self._queue)
		self.transactions.clear()
		self._queue    = []
		self._busy     = False
		self._outcomes = []
		self._dma_done = set()
		self._parked   = {}
		self.start()

class _InFlight(object):
	""" Host-side state of one request waiting on the pipeline """
	__slots__ = ('request', 'on_done', 'phase', 'txn_id')

	def __init__(self, request, on_done):
		self.request = request
		self.on_done = on_done
		self.phase   = 'waiting'
		self.txn_id  = None

class FitoHost(object):
	""" Host half of the pipeline: forwards events, commits decisions on arrival, joins
		the MSI-X notification, reads the decision lines and enforces the decision.
	"""
	TARGET = 'fito-host'

	def __init__(self, engine, trace, interconnect, host, config):
		self.engine       = engine
		self.trace        = trace
		self.interconnect = interconnect
		self.host         = host
		self.latency      = config.latency
		self.protocol     = config.protocol
		self.flags        = config.flags
		self.workload     = config.workload
		self.dma_sink     = None
		self.slots        = [PrestageSlot(core) for core in range(self.protocol.cores)]
		self._core_resources = [sum(res.values(), []) for res in partition(host, self.protocol.cores)]

		self.reforwarded = 0
		self._inflight    = {}
		self._await_msix  = {}
		self._msix_early  = set()

		self._map_memory()
		engine.register(self.TARGET, self._on_event)
		interconnect.connect(ic.NIC_TO_HOST, self._on_message)

	def _map_memory(self):
		ix, p = self.interconnect, self.protocol
		ix.map_address(ic.HOST_TO_NIC, OUTCOME_RING, None)
		for i in range(p.txn_shared_lines):
			ix.map_address(ic.NIC_TO_HOST, ring_meta_line(i), i)
		for slot in range(p.ring_slots):
			for i in range(p.txn_shared_lines, p.txn_read_lines):
				ix.map_address(ic.NIC_TO_HOST, ring_line(slot, i), None)
		for core in range(p.cores):
			for i in range(p.prestage_slot_lines):
				ix.map_address(ic.NIC_TO_HOST, slot_line(core, i), None)

	def _decision_lines(self, txn_id):
		slot = txn_id % self.protocol.ring_slots
		return [ring_line(slot, i) for i in range(self.protocol.txn_shared_lines, self.protocol.txn_read_lines)]

	def _read_lines(self, txn_id):
		return [ring_meta_line(i) for i in range(self.protocol.txn_shared_lines)] + self._decision_lines(txn_id)

	# Request path

	def request_decision(self, request, on_done):
		""" Get a decision for ``request`` and enforce it; ``on_done(request, status)``
			is called once enforcement finishes.
		"""
		flight = _InFlight(request, on_done)
		self._inflight[request.request_id] = flight
		if self.flags.prestaging_enabled:
			hit, staged = self.consume_prestaged(request.core, request.trigger)
			request.prestage = 'hit' if hit else ('miss' if staged is not None else 'empty')
			if hit:
				self._commit_prestaged(flight, staged)
				return
		self.forward_event(flight)

	def forward_event(self, flight):
		""" Snapshot the trigger's resources (T1) and forward the event to the agent

			:return int: Id of the event message
		"""
		request  = flight.request
		trigger  = request.trigger
		snapshot = self.host.snapshot(trigger.resources)
		dma = trigger.component == 'memory'
		if dma:
			self.interconnect.dma_transfer(ic.HOST_TO_NIC, self.workload.pte_set_bytes, self.dma_sink,
										   request.request_id)
		body = {'request': request.request_id, 'core': request.core, 'trigger': trigger, 'snapshot': snapshot,
				'incarnation': self.host.incarnation, 'dma': dma}
		msg_id = self.interconnect.post_write(ic.HOST_TO_NIC, body, self.protocol.event_size_bytes, kind=ic.EVENT)
		if self.interconnect.wc_enabled:
			self.interconnect.wc_flush(ic.HOST_TO_NIC)
		return msg_id

	def _on_message(self, msg):
		payload = msg.payload
		current = payload.get('incarnation') == self.host.incarnation
		if current:
			self.host.note_agent_contact()

		if msg.kind == ic.DECISION:
			for entry in payload['txns']:
				self._on_decision(self.host.transactions.add(Transaction.from_message(entry)))
		elif msg.kind == ic.STAGED and current and self.flags.prestaging_enabled:
			self.prestage_decision(payload['core'], payload['predicted'], payload['payload'], payload['snapshot'],
								   payload['staged_at'], payload['incarnation'], txn_id=payload['txn'])

	def _on_decision(self, txn):
		outcome = self.host.attempt_commit(txn)
		notified = txn.txn_id in self._msix_early
		self._msix_early.discard(txn.txn_id)
		if outcome.result == INVALIDATED:
			return
		flight = self._inflight.get(txn.request_id)
		if outcome.result == COMMITTED:
			flight.txn_id = txn.txn_id
			flight.phase  = 'committed'
			self.prefetch_txns(txn)
			self._send_outcome(txn, flight, redecide=False)
			if not self.protocol.msix_notify or notified:
				self._enforce(flight, self._read_lines(txn.txn_id))
			else:
				self._await_msix[txn.txn_id] = flight
		else:
			self._retry(flight, txn)

	def _on_msix(self, body):
		for txn_id in body['txns']:
			flight = self._await_msix.pop(txn_id, None)
			if flight is not None:
				self._enforce(flight, self._read_lines(txn_id))
			elif txn_id not in self.host.transactions:
				# Interrupt overtook the decision
				self._msix_early.add(txn_id)

	@property
	def early_interrupts(self):
		""" Interrupts still waiting for the decision they announced """
		return len(self._msix_early)

	def _retry(self, flight, txn):
		request = flight.request
		request.attempts += 1
		limit = self.protocol.retry_limit
		if limit is not None and request.attempts > limit:
			self._send_outcome(txn, flight, redecide=False)
			self._finish(flight, DROPPED)
			return
		if self.protocol.retry_mode == 'agent-redecide':
			self._send_outcome(txn, flight, redecide=True)
		else:
			self._send_outcome(txn, flight, redecide=False)
			self.forward_event(flight)

	def _send_outcome(self, txn, flight, redecide):
		""" Publish the commit outcome for the agent's POLL_TXNS. The message carries the
			fresh state the agent re-decides or prestages from.
		"""
		self.interconnect.store(ic.HOST_TO_NIC, OUTCOME_RING, txn.txn_id)
		request = flight.request
		snapshot = None
		if redecide:
			snapshot = self.host.snapshot(request.trigger.resources)
		elif self.flags.prestaging_enabled:
			snapshot = self.host.snapshot(self._core_resources[request.core], purpose='prestage')
		body = {'txn': txn.txn_id, 'result': txn.status, 'core': request.core, 'request': request.request_id,
				'trigger': request.trigger, 'snapshot': snapshot, 'redecide': redecide,
				'incarnation': self.host.incarnation}
		self.interconnect.post_write(ic.HOST_TO_NIC, body, self.protocol.decision_size_bytes, kind=ic.OUTCOME)
		if redecide and self.interconnect.wc_enabled:
			self.interconnect.wc_flush(ic.HOST_TO_NIC)

	def _enforce(self, flight, lines):
		flight.phase = 'enforcing'
		done = self.interconnect.read_many(ic.NIC_TO_HOST, lines)
		self.engine.schedule_at(done + self.workload.request_service_model.enforcement_ns, self.TARGET,
								('complete', flight))

	def _finish(self, flight, status):
		flight.phase = 'done'
		del self._inflight[flight.request.request_id]
		flight.on_done(flight.request, status, txn=flight.txn_id)

	def _on_event(self, event):
		action, data = event.payload
		if action == 'msix':
			self._on_msix(data)
		elif action == 'complete':
			self._finish(data, DONE)

	# Latency mitigations

	def prefetch_txns(self, txn):
		""" PREFETCH_TXNS: start reading the decision lines before the host needs them

			:return int: Time the lines are available, ``None`` if prefetching is off
		"""
		if not self.flags.prefetching_enabled:
			return None
		return self.interconnect.prefetch(ic.NIC_TO_HOST, self._decision_lines(txn.txn_id))

	def prestage_decision(self, core_id, predicted, payload, snapshot, staged_at, incarnation, txn_id=None):
		""" Install a speculative decision for ``core_id``. The latest prediction wins.

			:param int txn_id: Transaction id the agent reserved for the decision
		"""
		slot = self.slots[core_id]
		replaced = slot.staged is not None
		if replaced:
			slot.replaced_count += 1
		slot.staged = StagedDecision(predicted, payload, snapshot, staged_at, incarnation, txn_id)
		self.trace.emit(tr.PRESTAGE, action='stage', core=core_id, predicted=predicted.resources,
						staged_at=staged_at, replaced=replaced)
		self.interconnect.prefetch(ic.NIC_TO_HOST, [slot_line(core_id, i)
													for i in range(self.protocol.prestage_slot_lines)])

	def consume_prestaged(self, core_id, trigger):
		""" Take the staged decision of ``core_id`` for the actual ``trigger``

			:return tuple: (hit, staged decision or ``None`` if the slot was empty)
		"""
		slot = self.slots[core_id]
		staged, slot.staged = slot.staged, None
		if staged is None:
			slot.empty_count += 1
			return False, None

		hit = staged.predicted == trigger and staged.incarnation == self.host.incarnation
		if hit:
			slot.hit_count += 1
		else:
			slot.miss_count += 1
		self.trace.emit(tr.PRESTAGE, action='hit' if hit else 'miss', core=core_id,
						predicted=staged.predicted.resources, actual=trigger.resources)
		return hit, staged

	def _commit_prestaged(self, flight, staged):
		request = flight.request
		now = self.engine.now()
		txn_id = staged.txn_id if staged.txn_id is not None else self.host.transactions.new_id()
		txn = Transaction(txn_id, staged.snapshot.restrict(request.trigger.resources), staged.staged_at,
						  staged.payload, staged.incarnation, request_id=request.request_id, core=request.core,
						  prestaged=True)
		self.host.transactions.add(txn)
		self.trace.emit(tr.TXN_CREATE, txn=txn.txn_id, t1=txn.t1_observed, t2=txn.t2_decided,
						resources=txn.resource_ids, incarnation=txn.incarnation, request=request.request_id,
						core=request.core, prestaged=True, created_at=now)
		outcome = self.host.attempt_commit(txn)
		if outcome.result == COMMITTED:
			flight.txn_id = txn.txn_id
			self._send_outcome(txn, flight, redecide=False)
			self._enforce(flight, [slot_line(request.core, i) for i in range(self.protocol.prestage_slot_lines)])
		elif outcome.result == ABORTED:
			self._retry(flight, txn)
		else:
			self.forward_event(flight)

	def on_restart(self, report):
		""" Drop what the dead incarnation left on the host and re-forward every request
			still waiting for a decision
		"""
		for slot in self.slots:
			slot.staged = None
		self.interconnect.reset_caches()
		self._msix_early.clear()
		for flight in list(self._inflight.values()):
			if flight.phase == 'waiting':
				self.reforwarded += 1
				self.forward_event(flight)

class Watchdog(object):
	""" Kills and restarts the agent when the host has not heard from it for a full
		period. Checked every ``watchdog_tick_ns``.

		:param callable classifier: Returns ``'true-positive'`` or ``'false-positive'`` for a
									kill happening now (ground truth, accounting only)
	"""
	TARGET = 'watchdog'

	def __init__(self, engine, trace, host, latency, classifier=None):
		self.engine     = engine
		self.trace      = trace
		self.host       = host
		self.tick_ns    = latency.watchdog_tick_ns
		self.state      = WatchdogState(latency.watchdog_period_ns)
		self.classifier = classifier
		engine.register(self.TARGET, self._on_event)

	def start(self):
		self.arm()
		self.engine.schedule(self.tick_ns, self.TARGET)

	def arm(self):
		self.host.note_agent_contact()
		self.trace.emit(tr.WATCHDOG_ARM, period_ns=self.state.period_ns, incarnation=self.host.incarnation)

	def _on_event(self, event):
		self.watchdog_tick()
		self.engine.schedule(self.tick_ns, self.TARGET)

	def watchdog_tick(self):
		""" Kill the agent if its last sign of life is older than one period

			:return RecoveryReport: Report of the restart, ``None`` if no kill
		"""
		now = self.engine.now()
		self.state.last_heartbeat_at = self.host.last_contact_at
		silent = now - self.state.last_heartbeat_at
		if silent <= self.state.period_ns:
			return None

		label = self.classifier() if self.classifier is not None else 'unknown'
		self.state.kills += 1
		if label == 'true-positive':
			self.state.true_positive_kills += 1
		elif label == 'false-positive':
			self.state.false_positive_kills += 1
		self.trace.emit(tr.WATCHDOG_KILL, incarnation=self.host.incarnation, silent_ns=silent,
						classification=label)
		log.info('Watchdog kill at t=%d ns after %d ns of silence (%s)', now, silent, label)

		self.host.mark_agent_dead()
		report = self.host.restart_agent(reason='watchdog')
		self.arm()
		return report

class FitoProtocol(object):
	""" Both actors of the pipeline plus the watchdog, wired over one interconnect

		:param list sources: Per-core trigger sources (for the prestage predictor)
		:param callable classifier: Kill classifier, see :class:`Watchdog`
	"""
	def __init__(self, engine, trace, interconnect, host, config, sources, classifier=None):
		predictor = OraclePredictor(sources, config.protocol.prestage_accuracy, engine.rng('prestage-predictor'))
		self.nic      = NicAgent(engine, trace, interconnect, config, predictor)
		self.host     = FitoHost(engine, trace, interconnect, host, config)
		self.watchdog = Watchdog(engine, trace, host, config.latency, classifier)
		self.host.dma_sink = self.nic.on_dma
		host.on_restart(self.nic.reset)
		host.on_restart(self.host.on_restart)

	@property
	def liveness(self):
		return self.nic.liveness

	def start(self):
		self.watchdog.start()
		self.nic.start()

	def request_decision(self, request, on_done):
		self.host.request_decision(request, on_done)
