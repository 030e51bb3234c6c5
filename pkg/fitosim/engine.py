""" Deterministic discrete-event engine. Virtual time is an integer number of
	nanoseconds and events are dispatched in ``(fire_at, sequence)`` order, so two
	events scheduled for the same instant run in insertion order.

	.. code-block:: python
		:linenos:

		engine = Engine(seed=42)
		engine.register('echo', lambda ev: print(engine.now(), ev.payload))
		engine.schedule(750, 'echo', 'hello')
		engine.run_until(10**6)
"""
import heapq
import logging
import zlib

import numpy as np

from .errors import SimulationError

log = logging.getLogger(__name__)

# All random streams use this bit generator
RNG_ALGORITHM = 'PCG64'

class SimEvent(object):
	""" One scheduled event. The object returned by :meth:`Engine.schedule` doubles as
		the handle used to cancel it.

		:ivar int fire_at: Virtual time (ns) at which the event fires
		:ivar int sequence: Insertion counter, unique per engine
		:ivar str target: Name of the handler the event is dispatched to
		:ivar object payload: Opaque event body
	"""
	__slots__ = ('fire_at', 'sequence', 'target', 'payload', 'cancelled')

	def __init__(self, fire_at, sequence, target, payload):
		self.fire_at   = fire_at
		self.sequence  = sequence
		self.target    = target
		self.payload   = payload
		self.cancelled = False

	def __lt__(self, other):
		return (self.fire_at, self.sequence) < (other.fire_at, other.sequence)

	def __repr__(self):
		return 'SimEvent(fire_at={}, sequence={}, target={!r})'.format(self.fire_at, self.sequence, self.target)

class Engine(object):
	""" Single-threaded event loop shared by every module of a run.

		:ivar int seed: Master seed. Every named random stream is derived from it.
		:ivar int scheduled: Number of events ever scheduled
		:ivar int dispatched: Number of events handed to a handler
		:ivar int cancelled: Number of events dropped because they were cancelled

		.. Tip:: ``scheduled == dispatched + cancelled + pending`` holds at any point
				 between two dispatches.
	"""
	def __init__(self, seed=0):
		self.seed       = int(seed)
		self.scheduled  = 0
		self.dispatched = 0
		self.cancelled  = 0
		self._now       = 0
		self._queue     = []
		self._handlers  = {}
		self._streams   = {}
		self._finished  = False
		self._current   = None

	def now(self):
		""" Current virtual time in ns """
		return self._now

	@property
	def pending(self):
		""" Number of events still queued (cancelled ones included until popped) """
		return len(self._queue)

	@property
	def current(self):
		""" The event being dispatched, or ``None`` outside a handler """
		return self._current

	def register(self, target, handler):
		""" Register the callable that receives events addressed to ``target``

			:param str target: Module identifier
			:param callable handler: Called as ``handler(event)``
		"""
		if target in self._handlers:
			raise SimulationError('Target {!r} is already registered'.format(target))
		self._handlers[target] = handler

	def schedule(self, delay, target, payload=None):
		""" Schedule an event ``delay`` ns from now

			:param int delay: Non-negative offset in ns. A zero delay fires after the event
							  currently being dispatched.
			:param str target: Module identifier the event is addressed to
			:param object payload: Event body
			:return SimEvent: Handle of the scheduled event
		"""
		if self._finished:
			raise SimulationError('Cannot schedule on a finished simulation')
		delay = int(delay)
		if delay < 0:
			raise SimulationError('Negative delay {} for target {!r}'.format(delay, target))

		event = SimEvent(self._now + delay, self.scheduled, target, payload)
		self.scheduled += 1
		heapq.heappush(self._queue, event)
		return event

	def schedule_at(self, fire_at, target, payload=None):
		""" Schedule an event at an absolute time that must not be in the past """
		return self.schedule(int(fire_at) - self._now, target, payload)

	def cancel(self, event):
		""" Cancel a pending event. Cancelling twice or after dispatch is a no-op. """
		if event is not None and not event.cancelled and event.fire_at >= self._now:
			event.cancelled = True

	def run_until(self, deadline):
		""" Dispatch every event with ``fire_at <= deadline`` and advance the clock to
			``deadline``.

			:param int deadline: Inclusive horizon in ns
			:return int: Number of events dispatched by this call
		"""
		deadline = int(deadline)
		if deadline < self._now:
			raise SimulationError('Deadline {} is in the past (now={})'.format(deadline, self._now))

		steps = 0
		queue = self._queue
		while queue and queue[0].fire_at <= deadline:
			event = heapq.heappop(queue)
			if event.cancelled:
				self.cancelled += 1
				continue

			handler = self._handlers.get(event.target)
			if handler is None:
				raise SimulationError('No handler registered', event)

			self._now     = event.fire_at
			self._current = event
			try:
				handler(event)
			except SimulationError:
				raise
			except Exception as err:
				log.error('Handler for %r failed at t=%d: %s', event.target, event.fire_at, err)
				raise SimulationError('{}: {}'.format(type(err).__name__, err), event)
			finally:
				self._current = None
			self.dispatched += 1
			steps += 1

		self._now = deadline
		return steps

	def finish(self):
		""" Mark the run as finished. Further scheduling is rejected. """
		self._finished = True

	def rng(self, name):
		""" Return the random stream called ``name``. Streams are independent of each
			other and of the order in which they are first requested, so adding a new
			stream never perturbs existing ones.

			:param str name: Stream name (e.g. ``'mutations'``)
			:return numpy.random.Generator: The seeded generator
		"""
		stream = self._streams.get(name)
		if stream is None:
			key    = zlib.crc32(name.encode('utf-8'))
			seq    = np.random.SeedSequence(entropy=self.seed, spawn_key=(key,))
			stream = np.random.Generator(np.random.PCG64(seq))
			self._streams[name] = stream
		return stream
