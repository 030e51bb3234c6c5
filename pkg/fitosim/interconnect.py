""" PCIe boundary between the host and the SmartNIC.

	The link is modelled as two ordered one-way channels (``host->nic`` and
	``nic->host``) plus the operations the offload pipeline uses on top of them:

	* posted MMIO writes, optionally batched by a write-combining (WC) buffer
	* blocking MMIO reads served from a write-through (WT) cache when possible
	* software prefetch into the WT cache
	* DMA bulk transfers with an affine cost model
	* MSI-X interrupt delivery

	Every cost comes from :class:`~fitosim.config.LatencyConfig`.
"""
import logging
import math

from . import trace as tr
from .errors import InterconnectError

log = logging.getLogger(__name__)

HOST_TO_NIC = 'host->nic'
NIC_TO_HOST = 'nic->host'
DIRECTIONS  = (HOST_TO_NIC, NIC_TO_HOST)

# Message kinds
EVENT       = 'event'
DECISION    = 'decision'
OUTCOME     = 'outcome'
STAGED      = 'staged'
HEARTBEAT   = 'heartbeat'
SWAP_REQUEST = 'swap-request'
SWAP_REPLY  = 'swap-reply'

def _check_direction(direction):
	if direction not in DIRECTIONS:
		raise InterconnectError('Unknown direction {!r}'.format(direction))

class Message(object):
	""" One message crossing the link

		:ivar int id: Unique id per interconnect
		:ivar str direction: ``host->nic`` or ``nic->host``
		:ivar str kind: Message kind (event, decision, swap-request, ...)
		:ivar int size_bytes: Payload size
		:ivar object payload: Message body handed to the receiver
		:ivar int enqueued_at: Time the sender posted it
		:ivar int delivered_at: Time it reached the receiver (``None`` while in flight)
	"""
	__slots__ = ('id', 'direction', 'kind', 'size_bytes', 'payload', 'enqueued_at', 'delivered_at')

	def __init__(self, id, direction, kind, size_bytes, payload, enqueued_at):
		self.id           = id
		self.direction    = direction
		self.kind         = kind
		self.size_bytes   = size_bytes
		self.payload      = payload
		self.enqueued_at  = enqueued_at
		self.delivered_at = None

class WcBuffer(object):
	""" Write-combining buffer of one direction. Holds at most the configured batch
		capacity; a flush sends all pending messages in one transfer.
	"""
	def __init__(self):
		self.pending   = []
		self.opened_at = None
		self.timer     = None

	def __len__(self):
		return len(self.pending)

class CacheEntry(object):
	__slots__ = ('value', 'cached_at', 'ready_at')

	def __init__(self, value, cached_at, ready_at):
		self.value     = value
		self.cached_at = cached_at
		self.ready_at  = ready_at

class WtCache(object):
	""" Write-through cache on the reading side of one direction. A producer write
		drops the entry before the new value becomes visible, so a read never returns
		a value older than the last write.
	"""
	def __init__(self):
		self.entries    = {}
		self.hit_count  = 0
		self.miss_count = 0

	def invalidate(self, address):
		self.entries.pop(address, None)

	def clear(self):
		self.entries.clear()

class Interconnect(object):
	""" The PCIe link shared by both actors of a run.

		:param Engine engine: Event loop
		:param Trace trace: Trace recorder
		:param LatencyConfig latency: Cost parameters
		:param bool wc_enabled: Combine posted writes (both directions)
		:param bool wt_enabled: Cache MMIO reads (both directions)
		:param bool prefetching_enabled: Honour :meth:`prefetch` requests
	"""
	TARGET = 'interconnect'

	def __init__(self, engine, trace, latency, wc_enabled=False, wt_enabled=False, prefetching_enabled=False):
		self.engine  = engine
		self.trace   = trace
		self.latency = latency
		self.wc_enabled          = wc_enabled
		self.wt_enabled          = wt_enabled
		self.prefetching_enabled = prefetching_enabled

		self._next_id       = 0
		self._receivers     = {}
		self._wc            = dict((d, WcBuffer()) for d in DIRECTIONS)
		self._caches        = dict((d, WtCache()) for d in DIRECTIONS)
		self._memory        = dict((d, {}) for d in DIRECTIONS)
		self._last_delivery = dict((d, 0) for d in DIRECTIONS)

		# Accounting
		self.transactions = dict((d, 0) for d in DIRECTIONS)
		self.posted       = dict((d, 0) for d in DIRECTIONS)
		self.delivered    = dict((d, 0) for d in DIRECTIONS)
		self.buffered     = dict((d, 0) for d in DIRECTIONS)
		self.dma_bytes    = dict((d, 0) for d in DIRECTIONS)
		self.reads        = 0

		engine.register(self.TARGET, self._on_event)

	@property
	def one_way_ns(self):
		return self.latency.one_way_ns

	@property
	def rtt_ns(self):
		return self.latency.mmio_read_rtt_ns

	def cache(self, direction):
		""" The WT cache holding values that travel in ``direction`` """
		return self._caches[direction]

	def connect(self, direction, receiver):
		""" Route delivered messages of ``direction`` to ``receiver(message)`` """
		_check_direction(direction)
		self._receivers[direction] = receiver

	def post_write(self, direction, payload, size_bytes, kind=EVENT, combine=True):
		""" Posted (fire-and-forget) write. The sender never blocks.

			:param str direction: ``host->nic`` or ``nic->host``
			:param object payload: Message body
			:param int size_bytes: Message size
			:param str kind: Message kind
			:param bool combine: Allow the WC buffer to hold the message (if WC is enabled)
			:return int: Message id
		"""
		_check_direction(direction)
		now = self.engine.now()
		msg = Message(self._next_id, direction, kind, int(size_bytes), payload, now)
		self._next_id += 1
		self.posted[direction] += 1
		self.trace.emit(tr.MSG_ENQUEUE, id=msg.id, direction=direction, msg_kind=kind, size_bytes=msg.size_bytes)

		if self.wc_enabled and combine:
			buf = self._wc[direction]
			if not buf.pending:
				buf.opened_at = now
				buf.timer = self.engine.schedule(self.latency.wc_flush_timeout_ns, self.TARGET,
												 ('wc-timeout', direction))
			buf.pending.append(msg)
			self.buffered[direction] += 1
			if len(buf.pending) >= self.latency.wc_batch_capacity_messages:
				self.wc_flush(direction)
		else:
			self.transactions[direction] += 1
			self._send([msg], direction)
		return msg.id

	def wc_flush(self, direction):
		""" Send every message buffered for ``direction`` as one transfer

			:return list: Ids of the flushed messages, in enqueue order
		"""
		_check_direction(direction)
		buf = self._wc[direction]
		if not buf.pending:
			return []

		batch, buf.pending, buf.opened_at = buf.pending, [], None
		self.engine.cancel(buf.timer)
		buf.timer = None
		self.transactions[direction] += 1
		self._send(batch, direction)
		log.debug('WC flush of %d message(s) %s at t=%d', len(batch), direction, self.engine.now())
		return [m.id for m in batch]

	def pending(self, direction):
		""" Number of messages still sitting in the WC buffer """
		return len(self._wc[direction])

	def _send(self, batch, direction):
		# Channels are FIFO: a batch never overtakes an earlier one
		at = max(self.engine.now() + self.latency.one_way_ns, self._last_delivery[direction])
		self._last_delivery[direction] = at
		self.engine.schedule_at(at, self.TARGET, ('deliver', batch))

	def _on_event(self, event):
		action, data = event.payload
		if action == 'deliver':
			self._deliver(data)
		elif action == 'wc-timeout':
			# A flush triggered by capacity cancels the timer, so this fires only for a live batch
			self.wc_flush(data)
		elif action == 'dma-done':
			callback, payload = data
			if callback is not None:
				callback(payload)

	def _deliver(self, batch):
		now = self.engine.now()
		for msg in batch:
			msg.delivered_at = now
			self.delivered[msg.direction] += 1
			self.trace.emit(tr.MSG_DELIVER, id=msg.id, direction=msg.direction, msg_kind=msg.kind,
							enqueued_at=msg.enqueued_at)
			receiver = self._receivers.get(msg.direction)
			if receiver is not None:
				receiver(msg)

	# Memory-mapped regions read across the link

	def map_address(self, direction, address, value=None):
		""" Expose ``address`` to the peer reading in ``direction``. Mapping an address again
			behaves like :meth:`store`.
		"""
		_check_direction(direction)
		self.store(direction, address, value)

	def store(self, direction, address, value):
		""" Producer-side write of a mapped value. The reader's cached copy is dropped first. """
		self._caches[direction].invalidate(address)
		self._memory[direction][address] = value

	def blocking_read(self, direction, address):
		""" Blocking MMIO read of a value travelling in ``direction``

			:param str direction: Direction the value travels (``nic->host`` for a host read)
			:param object address: Mapped address
			:return tuple: (value, completion time in ns)
		"""
		return self._read_at(direction, address, self.engine.now())

	def read_many(self, direction, addresses):
		""" Serial blocking reads issued back to back, as a CPU walking a structure would

			:return int: Completion time of the last read
		"""
		done = self.engine.now()
		for address in addresses:
			_, done = self._read_at(direction, address, done)
		return done

	def _read_at(self, direction, address, issue_at):
		memory = self._memory.get(direction)
		if memory is None or address not in memory:
			raise InterconnectError('Read of unmapped address {!r} ({})'.format(address, direction))

		cache = self._caches[direction]
		self.reads += 1
		entry = cache.entries.get(address) if self.wt_enabled else None
		if entry is not None:
			# A prefetch still in flight only hides part of the round-trip
			cache.hit_count += 1
			return entry.value, max(issue_at, entry.ready_at)

		cache.miss_count += 1
		done = issue_at + self.latency.mmio_read_rtt_ns
		if self.wt_enabled:
			cache.entries[address] = CacheEntry(memory[address], issue_at, done)
		return memory[address], done

	def prefetch(self, direction, addresses):
		""" Start reads early so that later blocking reads hit the WT cache. Needs both
			prefetching and WT caching; otherwise a no-op.

			:return int: Time at which every prefetched line is available (``None`` if disabled)
		"""
		if not (self.prefetching_enabled and self.wt_enabled):
			return None

		now   = self.engine.now()
		cache = self._caches[direction]
		memory = self._memory[direction]
		ready, issued = now, 0
		for address in addresses:
			if address not in memory:
				raise InterconnectError('Prefetch of unmapped address {!r}'.format(address))
			entry = cache.entries.get(address)
			if entry is None:
				entry = cache.entries[address] = CacheEntry(memory[address], now, now + self.latency.mmio_read_rtt_ns)
				issued += 1
			ready = max(ready, entry.ready_at)
		self.trace.emit(tr.PREFETCH, direction=direction, lines=issued, ready_at=ready)
		return ready

	def dma_transfer(self, direction, size_bytes, callback=None, payload=None):
		""" Bulk transfer: ``dma_setup_ns + ceil(size / bandwidth)``

			:param int size_bytes: Bytes to move (> 0)
			:param callable callback: Called as ``callback(payload)`` on completion
			:return int: Completion time
		"""
		_check_direction(direction)
		if size_bytes <= 0:
			raise InterconnectError('DMA of {} bytes'.format(size_bytes))

		cost = self.latency.dma_setup_ns + int(math.ceil(size_bytes / self.latency.dma_bandwidth_bytes_per_ns))
		done = self.engine.now() + cost
		self.dma_bytes[direction] += size_bytes
		self.transactions[direction] += 1
		self.engine.schedule_at(done, self.TARGET, ('dma-done', (callback, payload)))
		return done

	def deliver_msix(self, target, payload=None):
		""" Raise an MSI-X interrupt. The handler registered for ``target`` receives
			``('msix', payload)`` after the end-to-end interrupt latency. No coalescing.

			:return SimEvent: Handle of the interrupt event
		"""
		self.trace.emit(tr.MSIX, target=target, fires_at=self.engine.now() + self.latency.msix_end_to_end_ns)
		return self.engine.schedule(self.latency.msix_end_to_end_ns, target, ('msix', payload))

	def decision_loop_ns(self):
		""" Length of the decision loop under the configured accounting mode """
		if self.latency.decision_loop_accounting == 'posted':
			return self.latency.one_way_ns + self.latency.msix_issue_ns
		return self.latency.msix_end_to_end_ns

	def reset_caches(self):
		""" Drop every cached line (used when an agent incarnation is discarded) """
		for cache in self._caches.values():
			cache.clear()
