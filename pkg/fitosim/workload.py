""" Event streams that drive the protocols: host state mutations, requests whose
	critical path contains one offload decision, and injected agent faults.

	All randomness comes from named engine streams, so a stream's draws do not depend
	on which other streams a run uses.
"""
import logging

import numpy as np

from . import trace as tr
from .config import COMPONENT_RESOURCES
from .errors import ConfigError

log = logging.getLogger(__name__)

# Event kind forwarded for each offloaded component
EVENT_KINDS = {'scheduling': 'thread-blocked', 'memory': 'page-fault', 'rpc': 'rpc-arrived'}

# Request completion status
DONE    = 'ok'
DROPPED = 'dropped'

def poisson_arrivals(rate_per_s, duration_ns, rng, chunk=4096):
	""" Arrival times (ns) of a Poisson process over ``[0, duration_ns)``. Inter-arrival
		gaps are drawn in numpy chunks and consumed lazily.

		:param float rate_per_s: Rate of the process (0 yields nothing)
		:param int duration_ns: Horizon
		:param numpy.random.Generator rng: Random stream
	"""
	if rate_per_s <= 0:
		return
	scale = 1e9 / rate_per_s
	t = 0.0
	while True:
		times = t + np.cumsum(rng.exponential(scale, size=chunk))
		t = float(times[-1])
		for at in np.floor(times).astype(np.int64).tolist():
			if at >= duration_ns:
				return
			yield at

def mutation_times(rate_per_s, duration_ns, rng):
	""" All arrival times of :func:`poisson_arrivals` as an array """
	return np.fromiter(poisson_arrivals(rate_per_s, duration_ns, rng), dtype=np.int64)

class MutationSource(object):
	""" Poisson mutations of the host resources. ``rate_per_s`` is the rate of each
		resource; the aggregate process picks its target uniformly.

		:ivar int count: Mutations issued so far
	"""
	TARGET = 'mutations'

	def __init__(self, engine, host, rate_per_s, duration_ns, chunk=4096):
		self.engine    = engine
		self.host      = host
		self.count     = 0
		self._resources = host.resource_ids()
		aggregate = rate_per_s * len(self._resources)
		self._times    = poisson_arrivals(aggregate, duration_ns, engine.rng('mutations'), chunk)
		self._targets  = engine.rng('mutation-targets')
		self._chunk    = chunk
		self._picks    = []
		engine.register(self.TARGET, self._on_event)
		self._schedule_next()

	def _pick(self):
		if not self._picks:
			self._picks = self._targets.integers(0, len(self._resources), size=self._chunk).tolist()[::-1]
		return self._resources[self._picks.pop()]

	def _schedule_next(self):
		at = next(self._times, None)
		if at is not None:
			self.engine.schedule_at(at, self.TARGET, self._pick())

	def _on_event(self, event):
		self.host.request_mutation(event.payload)
		self.count += 1
		self._schedule_next()

def gen_mutations(engine, host, rate_per_s, duration_ns):
	""" Schedule Poisson mutations of every host resource at ``rate_per_s`` each

		:return MutationSource: The running source
	"""
	return MutationSource(engine, host, rate_per_s, duration_ns)

class Trigger(object):
	""" What makes the host ask the agent for a decision """
	__slots__ = ('component', 'event', 'resources')

	def __init__(self, component, resources):
		self.component = component
		self.event     = EVENT_KINDS[component]
		self.resources = list(resources)

	def to_dict(self):
		return {'component': self.component, 'event': self.event, 'resources': list(self.resources)}

	def __eq__(self, other):
		return (isinstance(other, Trigger) and self.component == other.component and
				self.resources == other.resources)

	def __ne__(self, other):
		return not self == other

	def __hash__(self):
		return hash((self.component, tuple(self.resources)))

	def __repr__(self):
		return 'Trigger({}, {})'.format(self.component, self.resources)

def partition(host, cores):
	""" Resource ids of each core: ``[{family: [ids]}]``, dealt round-robin """
	return [dict((family, host.resource_ids(family)[core::cores]) for family in COMPONENT_RESOURCES.values())
			for core in range(cores)]

class TriggerSource(object):
	""" Trigger stream of one core. The next trigger is always drawn one step ahead so
		that it can be peeked at.
	"""
	def __init__(self, core, resources, component_mix, rng):
		self.core      = core
		self.resources = resources
		self._rng      = rng
		mix = [(c, w) for c, w in sorted(component_mix.items())
			   if w > 0 and resources[COMPONENT_RESOURCES[c]]]
		if not mix:
			raise ConfigError('Core {} owns no resource of any weighted component'.format(core),
							  field='workload.component_mix')
		self.components = [c for c, _ in mix]
		weights = np.array([w for _, w in mix], dtype=float)
		self._p = weights / weights.sum()
		self._next = self._draw()

	def _draw(self):
		component = self.components[int(self._rng.choice(len(self.components), p=self._p))]
		ids = self.resources[COMPONENT_RESOURCES[component]]
		return Trigger(component, [ids[int(self._rng.integers(len(ids)))]])

	def peek(self):
		return self._next

	def next(self):
		current, self._next = self._next, self._draw()
		return current

	def alternative(self, trigger, rng):
		""" A trigger of the same component on a different resource (used by a wrong
			prediction, drawn from ``rng``). Falls back to a resource nobody triggers.
		"""
		ids = [r for r in self.resources[COMPONENT_RESOURCES[trigger.component]] if r not in trigger.resources]
		if not ids:
			return Trigger(trigger.component, ['none'])
		return Trigger(trigger.component, [ids[int(rng.integers(len(ids)))]])

def trigger_sources(engine, host, cores, component_mix):
	return [TriggerSource(core, res, component_mix, engine.rng('triggers-{}'.format(core)))
			for core, res in enumerate(partition(host, cores))]

class Request(object):
	""" One client request. Its critical path holds exactly one offload decision. """
	__slots__ = ('request_id', 'core', 'issued_at', 'trigger', 'trigger_at', 'attempts', 'prestage')

	def __init__(self, request_id, core, issued_at):
		self.request_id = request_id
		self.core       = core
		self.issued_at  = issued_at
		self.trigger    = None
		self.trigger_at = None
		self.attempts   = 0
		self.prestage   = 'off'

class RequestDriver(object):
	""" Feeds requests to a protocol, one in service per core.

		* closed loop: one client per core; a new request is issued as soon as the previous
		  one completes
		* open loop: Poisson arrivals at ``event_arrival_rate_per_s``, spread uniformly
		  over the cores and queued FIFO per core

		Every request first spends ``app_service_ns`` on the host, then triggers a decision.

		:param protocol: Object with ``request_decision(request, on_done)``
	"""
	TARGET = 'requests'

	def __init__(self, engine, trace, protocol, sources, workload):
		self.engine   = engine
		self.trace    = trace
		self.protocol = protocol
		self.sources  = sources
		self.service  = workload.request_service_model
		self.loop     = workload.loop
		self.duration = workload.run_duration_ns
		self.issued    = 0
		self.completed = 0
		self.dropped   = 0
		self._queues  = [[] for _ in sources]
		self._busy    = [False] * len(sources)
		engine.register(self.TARGET, self._on_event)

		if self.loop == 'closed':
			for core in range(len(sources)):
				self._issue(core)
		else:
			self._arrivals = poisson_arrivals(workload.event_arrival_rate_per_s, self.duration,
											  engine.rng('arrivals'))
			self._cores    = engine.rng('arrival-cores')
			self._schedule_arrival()

	def _schedule_arrival(self):
		at = next(self._arrivals, None)
		if at is not None:
			self.engine.schedule_at(at, self.TARGET, ('arrival', None))

	def _issue(self, core):
		request = Request(self.issued, core, self.engine.now())
		self.issued += 1
		self._queues[core].append(request)
		self._serve(core)

	def _serve(self, core):
		if self._busy[core] or not self._queues[core]:
			return
		self._busy[core] = True
		request = self._queues[core].pop(0)
		self.engine.schedule(self.service.app_service_ns, self.TARGET, ('trigger', request))

	def _on_event(self, event):
		action, request = event.payload
		if action == 'arrival':
			self._issue(int(self._cores.integers(len(self.sources))))
			self._schedule_arrival()
		elif action == 'trigger':
			request.trigger    = self.sources[request.core].next()
			request.trigger_at = self.engine.now()
			self.protocol.request_decision(request, self._on_done)

	def _on_done(self, request, status, **details):
		now = self.engine.now()
		if status == DONE:
			self.completed += 1
		else:
			self.dropped += 1
		self.trace.emit(tr.REQUEST_COMPLETE, request=request.request_id, core=request.core, status=status,
						component=request.trigger.component, issued_at=request.issued_at,
						trigger_at=request.trigger_at, overhead_ns=now - request.trigger_at,
						latency_ns=now - request.issued_at, attempts=request.attempts, prestage=request.prestage,
						**details)
		self._busy[request.core] = False
		if self.loop == 'closed':
			self._issue(request.core)
		else:
			self._serve(request.core)

def gen_requests(engine, trace, protocol, sources, workload):
	""" Start the request stream of ``workload`` (closed or open loop) against ``protocol``

		:return RequestDriver: The running driver
	"""
	return RequestDriver(engine, trace, protocol, sources, workload)

class AgentLiveness(object):
	""" Physical condition of the NIC agent. Fault injection writes it; the agent's own
		behaviour follows it. Protocol code on the host never reads it.

		:ivar bool crashed: The live incarnation is dead (cleared only by a restart)
		:ivar int slow_until: The agent does nothing before this time
	"""
	def __init__(self):
		self.crashed    = False
		self.slow_until = 0

	def crash(self):
		self.crashed = True

	def slow(self, until):
		self.slow_until = max(self.slow_until, until)

	def revive(self):
		""" A fresh incarnation is not crashed. Slowness is a property of the device and stays. """
		self.crashed = False

	def participates(self, at):
		return not self.crashed and at >= self.slow_until

class FaultInjector(object):
	""" Applies crash and slow episodes to an agent and keeps the ground truth that
		diagnostics use to classify kills.
	"""
	TARGET = 'faults'

	def __init__(self, engine, trace, liveness, episodes=()):
		self.engine   = engine
		self.trace    = trace
		self.liveness = liveness
		self.episodes = []
		engine.register(self.TARGET, self._on_event)
		for episode in episodes:
			self.inject_episode(episode.kind, episode.start_ns, episode.duration_ns)

	def inject_episode(self, kind, start, duration):
		""" Schedule an episode. Same-kind episodes must not overlap. """
		if kind not in ('crash', 'slow'):
			raise ConfigError('Unknown episode kind {!r}'.format(kind), field='workload.fault_episodes')
		for other in self.episodes:
			if other['kind'] == kind and start < other['start'] + max(other['duration'], 1) and \
					other['start'] < start + max(duration, 1):
				raise ConfigError('Overlapping {} episodes at {} ns'.format(kind, start),
								  field='workload.fault_episodes')

		episode = {'id': len(self.episodes), 'kind': kind, 'start': int(start), 'duration': int(duration)}
		self.episodes.append(episode)
		self.engine.schedule_at(start, self.TARGET, ('start', episode))
		if duration > 0:
			self.engine.schedule_at(start + duration, self.TARGET, ('end', episode))
		return episode

	def _on_event(self, event):
		phase, episode = event.payload
		if phase == 'start':
			if episode['kind'] == 'crash':
				self.liveness.crash()
			else:
				self.liveness.slow(episode['start'] + episode['duration'])
			log.debug('%s episode %d starts at t=%d', episode['kind'], episode['id'], episode['start'])
		self.trace.emit(tr.EPISODE_MARKER, episode=episode['id'], episode_kind=episode['kind'], phase=phase,
						start=episode['start'], duration=episode['duration'])

	def classify_kill(self):
		""" Ground truth for a kill happening now """
		return 'true-positive' if self.liveness.crashed else 'false-positive'
