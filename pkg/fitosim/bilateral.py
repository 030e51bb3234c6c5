""" Bilateral swap protocol. Host and NIC exchange their state views in one frame at
	the link boundary: the host's current view goes out, the NIC's decision comes back,
	and the pair is committed on both sides in a single step, or on neither.

	A frame always resolves exactly one round-trip after it starts, whether the peer took
	part or not, so there is no timeout and no abort path.
"""
import logging

from . import interconnect as ic
from . import trace as tr
from .errors import SimulationError
from .fito import make_decision
from .host import HostSnapshot
from .workload import DONE, AgentLiveness

log = logging.getLogger(__name__)

COMPLETED     = 'Completed'
NOT_COMPLETED = 'NotCompleted'

class SwapFrame(object):
	""" One bilateral exchange

		:ivar int swap_id: Unique id
		:ivar list resources: Resources exchanged (empty for keepalive frames)
		:ivar int initiated_at: Start of the frame (``None`` while queued)
		:ivar int window_ns: One round-trip
		:ivar HostSnapshot host_view: Host state sent to the peer
		:ivar object nic_view: Peer decision sent back (``None`` if the peer did not take part)
		:ivar str outcome: Completed or NotCompleted once resolved
	"""
	__slots__ = ('swap_id', 'resources', 'initiator', 'purpose', 'initiated_at', 'window_ns', 'host_view', 'nic_view',
				 'participated', 'outcome', 'resolved_at', 'flight')

	def __init__(self, swap_id, resources, window_ns, initiator='host', purpose='request', nic_view=None, flight=None):
		self.swap_id      = swap_id
		self.resources    = list(resources)
		self.initiator    = initiator
		self.purpose      = purpose
		self.initiated_at = None
		self.window_ns    = window_ns
		self.host_view    = None
		self.nic_view     = nic_view
		self.participated = False
		self.outcome      = None
		self.resolved_at  = None
		self.flight       = flight

	@property
	def pair(self):
		""" The exchanged pair, identical on both sides of a completed frame """
		return (self.swap_id, self.host_view.entries, self.nic_view)

class SwapLedger(object):
	""" Resolved frames in resolution order, with a completed-swap count per resource """
	def __init__(self):
		self.frames = []
		self.epochs = {}

	def record(self, frame):
		self.frames.append(frame)
		if frame.outcome == COMPLETED:
			for rid in frame.resources:
				self.epochs[rid] = self.epochs.get(rid, 0) + 1

	def count(self, outcome):
		return sum(1 for f in self.frames if f.outcome == outcome)

	def __len__(self):
		return len(self.frames)

class SwapPeer(object):
	""" NIC side of the exchange. It only reflects frames while alive and not slow, and
		commits a reflected pair when the frame closes.

		:ivar list pairs: Exchanged pairs committed by the NIC
		:ivar dict views: Last exchanged version of every resource (the NIC's ledger)
	"""
	TARGET = 'bilateral-peer'

	def __init__(self, engine, interconnect, decision_bytes=64):
		self.engine         = engine
		self.interconnect   = interconnect
		self.decision_bytes = decision_bytes
		self.liveness       = AgentLiveness()
		self.incarnation    = 0
		self.pairs          = []
		self.views          = {}
		self.reflected      = 0
		self._seq           = 0
		engine.register(self.TARGET, self._on_event)
		interconnect.connect(ic.HOST_TO_NIC, self._on_request)

	def reflect(self, body):
		""" The NIC's view for the frame described by ``body``: the view the initiator
			proposed, or a fresh decision for the request's trigger
		"""
		view = body.get('nic_view')
		if view is None and body.get('trigger') is not None:
			self._seq += 1
			view = make_decision(body['trigger'], body.get('core'), self._seq)
		return view

	def _on_request(self, msg):
		# The peer's half of the exchange happens at the reflection instant
		body = msg.payload
		if not self.liveness.participates(self.engine.now()):
			return
		view = self.reflect(body)
		self.reflected += 1
		self.interconnect.post_write(ic.NIC_TO_HOST, {'swap': body['swap'], 'nic_view': view}, self.decision_bytes,
									 kind=ic.SWAP_REPLY, combine=False)
		self.engine.schedule_at(body['resolves_at'], self.TARGET, ('commit', (body, view)))

	def _on_event(self, event):
		action, (body, view) = event.payload
		if action == 'commit':
			self.commit(body['swap'], body['host_view'], view)

	def commit(self, swap_id, host_view, nic_view):
		self.pairs.append((swap_id, tuple(host_view), nic_view))
		for rid, version in host_view:
			self.views[rid] = version

	def reset(self, report):
		""" A new incarnation resumes from the ledger it already holds """
		self.incarnation = report.incarnation
		self.liveness.revive()

class _Flight(object):
	__slots__ = ('request', 'on_done')

	def __init__(self, request, on_done):
		self.request = request
		self.on_done = on_done

class BilateralProtocol(object):
	""" Swap-based offload: every request is served by one frame, and a keepalive train of
		empty frames keeps the peer observed when no request is in flight.

		:ivar SwapLedger ledger: Every resolved frame
		:ivar list host_pairs: Exchanged pairs committed by the host
	"""
	TARGET = 'bilateral'

	def __init__(self, engine, trace, interconnect, host, config):
		self.engine       = engine
		self.trace        = trace
		self.interconnect = interconnect
		self.host         = host
		self.window_ns    = config.latency.mmio_read_rtt_ns
		self.backoff_ns   = config.protocol.swap_backoff_ns
		if self.backoff_ns is None:
			self.backoff_ns = self.window_ns
		self.keepalive      = config.protocol.keepalive
		self.enforcement_ns = config.workload.request_service_model.enforcement_ns
		self.event_bytes    = config.protocol.event_size_bytes
		self.decision_bytes = config.protocol.decision_size_bytes

		self.peer       = SwapPeer(engine, interconnect, self.decision_bytes)
		self.ledger     = SwapLedger()
		self.host_pairs = []
		self.restarts   = 0
		self._next_id   = 0
		self._waiting   = []
		self._open      = {}
		self._outage    = False

		engine.register(self.TARGET, self._on_event)
		interconnect.connect(ic.NIC_TO_HOST, self._on_reply)
		host.on_restart(self.peer.reset)

	@property
	def liveness(self):
		return self.peer.liveness

	def start(self):
		if self.keepalive:
			self.initiate_swap([], purpose='keepalive')

	def request_decision(self, request, on_done):
		self.bilateral_decision_loop(request, on_done)

	def bilateral_decision_loop(self, request, on_done):
		""" Serve one workload event with one frame. The host's view and the NIC's decision
			cross in the same frame, so the decision is valid when it lands.
		"""
		return self.initiate_swap(request.trigger.resources, flight=_Flight(request, on_done))

	# Frames

	def initiate_swap(self, resource_ids, nic_view=None, initiator='host', purpose='request', flight=None):
		""" Start a frame over ``resource_ids``, or queue it behind the frame holding one of them

			:return SwapFrame: Handle of the frame
		"""
		frame = SwapFrame(self._next_id, resource_ids, self.window_ns, initiator, purpose, nic_view, flight)
		self._next_id += 1
		blockers = [self.host.holder(r) for r in frame.resources if self.host.holder(r) is not None]
		if blockers or any(set(frame.resources) & set(w.resources) for w in self._waiting):
			self._waiting.append(frame)
			self.trace.emit(tr.SWAP_QUEUED, swap=frame.swap_id, resources=frame.resources, blocked_by=blockers)
			return frame
		self._start(frame)
		return frame

	def _start(self, frame):
		now = self.engine.now()
		frame.initiated_at = now
		if frame.resources:
			self.host.hold(frame.resources, frame.swap_id)
			frame.host_view = self.host.snapshot(frame.resources, purpose='swap')
		else:
			frame.host_view = HostSnapshot(now, [])
		self.trace.emit(tr.SWAP_INITIATE, swap=frame.swap_id, resources=frame.resources, initiator=frame.initiator,
						purpose=frame.purpose, host_view=frame.host_view.as_list(),
						resolves_at=now + frame.window_ns)
		request = frame.flight.request if frame.flight is not None else None
		body = {'swap': frame.swap_id, 'host_view': frame.host_view.entries, 'nic_view': frame.nic_view,
				'trigger': request.trigger if request is not None else None,
				'core': request.core if request is not None else None, 'resolves_at': now + frame.window_ns}
		self._open[frame.swap_id] = frame
		self.interconnect.post_write(ic.HOST_TO_NIC, body, self.event_bytes, kind=ic.SWAP_REQUEST, combine=False)
		self.engine.schedule(frame.window_ns, self.TARGET, ('deadline', frame))

	def _on_reply(self, msg):
		body = msg.payload
		frame = self._open.get(body['swap'])
		if frame is None or frame.outcome is not None:
			return
		frame.participated = True
		frame.nic_view = body['nic_view']

	def resolve_swap(self, frame):
		""" Close ``frame`` exactly one round-trip after it started. Both sides commit the
			exchanged pair, or nothing changes. Deferred mutations are applied afterwards.

			:return SwapFrame: The resolved frame
		"""
		now = self.engine.now()
		if frame.outcome is not None:
			raise SimulationError('Swap {} is already resolved'.format(frame.swap_id))
		if now != frame.initiated_at + frame.window_ns:
			raise SimulationError('Swap {} resolved at t={} instead of t={}'.format(
				frame.swap_id, now, frame.initiated_at + frame.window_ns))

		frame.resolved_at = now
		self._open.pop(frame.swap_id, None)
		if frame.participated:
			frame.outcome = COMPLETED
			if frame.resources:
				self.host.apply_decision(frame.resources, frame.nic_view)
			self.host_pairs.append(frame.pair)
			self.host.note_agent_contact()
			self._outage = False
		else:
			frame.outcome = NOT_COMPLETED

		self.ledger.record(frame)
		self.trace.emit(tr.SWAP_RESOLVE, swap=frame.swap_id, outcome=frame.outcome, resources=frame.resources,
						purpose=frame.purpose, initiated_at=frame.initiated_at, resolved_at=now,
						host_view=frame.host_view.as_list(),
						nic_view=frame.nic_view if frame.outcome == COMPLETED else None)

		if frame.outcome == NOT_COMPLETED and not self._outage:
			# The peer's absence is a fact of this frame; one restart per outage
			self._outage = True
			self.host.mark_agent_dead()
			self.host.restart_agent(reason='swap-not-completed', rebuild=False)
			self.restarts += 1
			log.debug('Peer missed swap %d at t=%d; agent restarted', frame.swap_id, now)

		if frame.resources:
			self.host.release(frame.resources)
			self._start_waiting()
		return frame

	def _start_waiting(self):
		waiting, self._waiting = self._waiting, []
		for frame in waiting:
			busy = any(self.host.holder(r) is not None for r in frame.resources)
			if busy or any(set(frame.resources) & set(w.resources) for w in self._waiting):
				self._waiting.append(frame)
			else:
				self._start(frame)

	def _on_event(self, event):
		action, frame = event.payload
		if action == 'deadline':
			# Close after every message due at this instant has landed
			self.engine.schedule(0, self.TARGET, ('resolve', frame))
		elif action == 'resolve':
			self.resolve_swap(frame)
			self._after(frame)
		elif action == 'retry':
			self.initiate_swap(frame.resources, initiator=frame.initiator, purpose=frame.purpose,
							   flight=frame.flight)
		elif action == 'complete':
			frame.flight.on_done(frame.flight.request, DONE, swap=frame.swap_id)

	def _after(self, frame):
		if frame.purpose == 'keepalive':
			delay = 0 if frame.outcome == COMPLETED else self.backoff_ns
			self.engine.schedule(delay, self.TARGET, ('retry', frame))
		elif frame.flight is not None:
			if frame.outcome == COMPLETED:
				self.engine.schedule(self.enforcement_ns, self.TARGET, ('complete', frame))
			else:
				frame.flight.request.attempts += 1
				self.engine.schedule(self.backoff_ns, self.TARGET, ('retry', frame))
