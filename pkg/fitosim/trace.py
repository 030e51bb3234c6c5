""" Append-only event trace. Every protocol-visible state change writes exactly one
	:class:`TraceRecord`; metrics, the FITO scorer and the replay oracles are all
	computed from it.

	On disk a trace is line-delimited JSON, one record per line::

		{"at":375,"attributes":{"direction":"host->nic","id":0},"kind":"msg-deliver"}
"""
import json

from .errors import TraceError

# Record kinds
MUTATE          = 'mutate'
MUTATE_DEFERRED = 'mutate-deferred'
SNAPSHOT        = 'snapshot'
MSG_ENQUEUE     = 'msg-enqueue'
MSG_DELIVER     = 'msg-deliver'
MSIX            = 'msix'
TXN_CREATE      = 'txn-create'
COMMIT_OUTCOME  = 'commit-outcome'
PRESTAGE        = 'prestage'
PREFETCH        = 'prefetch'
HEARTBEAT       = 'heartbeat'
WATCHDOG_ARM    = 'watchdog-arm'
WATCHDOG_KILL   = 'watchdog-kill'
SWAP_INITIATE   = 'swap-initiate'
SWAP_QUEUED     = 'swap-queued'
SWAP_RESOLVE    = 'swap-resolve'
AGENT_RESTART   = 'agent-restart'
REQUEST_COMPLETE = 'request-complete'
EPISODE_MARKER  = 'episode-marker'
RUN_START       = 'run-start'
RUN_END         = 'run-end'

KINDS = frozenset([MUTATE, MUTATE_DEFERRED, SNAPSHOT, MSG_ENQUEUE, MSG_DELIVER, MSIX, TXN_CREATE,
				   COMMIT_OUTCOME, PRESTAGE, PREFETCH, HEARTBEAT, WATCHDOG_ARM, WATCHDOG_KILL,
				   SWAP_INITIATE, SWAP_QUEUED, SWAP_RESOLVE, AGENT_RESTART, REQUEST_COMPLETE,
				   EPISODE_MARKER, RUN_START, RUN_END])

# Kinds that only describe interconnect traffic. They can be left out of long runs.
MESSAGE_KINDS = frozenset([MSG_ENQUEUE, MSG_DELIVER, MSIX, HEARTBEAT, PREFETCH])

class TraceRecord(object):
	""" One trace entry

		:ivar int index: Position of the record in the trace
		:ivar int at: Virtual time in ns
		:ivar str kind: One of :data:`KINDS`
		:ivar dict attributes: Kind-specific named values
	"""
	__slots__ = ('index', 'at', 'kind', 'attributes')

	def __init__(self, index, at, kind, attributes):
		self.index      = index
		self.at         = at
		self.kind       = kind
		self.attributes = attributes

	def get(self, name, default=None):
		return self.attributes.get(name, default)

	def to_json(self):
		""" Serialize into one canonical JSON line (without newline) """
		return json.dumps({'at': self.at, 'kind': self.kind, 'attributes': self.attributes},
						  sort_keys=True, separators=(',', ':'))

	def __repr__(self):
		return 'TraceRecord(#{}, at={}, kind={!r}, {})'.format(self.index, self.at, self.kind, self.attributes)

class Trace(object):
	""" In-memory trace bound to an engine clock.

		:param Engine engine: Engine providing the timestamps (``None`` for a loaded trace)
		:param bool messages: Keep interconnect traffic records (see :data:`MESSAGE_KINDS`)
	"""
	def __init__(self, engine=None, messages=True):
		self.records    = []
		self._engine    = engine
		self._messages  = messages
		self._observers = []

	def subscribe(self, observer):
		""" Call ``observer(record)`` on every appended record """
		self._observers.append(observer)

	def emit(self, kind, **attributes):
		""" Append a record stamped with the engine clock

			:param str kind: Record kind
			:return TraceRecord: The new record, or ``None`` if the kind is filtered out
		"""
		if not self._messages and kind in MESSAGE_KINDS:
			return None
		return self.append(self._engine.now(), kind, attributes)

	def append(self, at, kind, attributes):
		""" Append a fully formed record. Time must not go backwards. """
		if kind not in KINDS:
			raise TraceError('Unknown record kind {!r}'.format(kind))
		if self.records and at < self.records[-1].at:
			raise TraceError('Record {!r} at t={} precedes t={}'.format(kind, at, self.records[-1].at))

		record = TraceRecord(len(self.records), at, kind, attributes)
		self.records.append(record)
		for observer in self._observers:
			observer(record)
		return record

	@property
	def complete(self):
		""" True if the trace opens with ``run-start`` and closes with ``run-end`` """
		return (len(self.records) >= 2 and self.records[0].kind == RUN_START and
				self.records[-1].kind == RUN_END)

	def require_complete(self):
		if not self.complete:
			raise TraceError('Trace is truncated: missing run-start or run-end record')

	def of_kind(self, *kinds):
		""" Iterate over the records of the given kinds """
		return (r for r in self.records if r.kind in kinds)

	def __len__(self):
		return len(self.records)

	def __iter__(self):
		return iter(self.records)

	def dumps(self):
		""" Return the whole trace as JSON lines """
		return ''.join(r.to_json() + '\n' for r in self.records)

	def write(self, path):
		""" Write the trace as JSON lines """
		with open(path, 'w', newline='\n') as f:
			for record in self.records:
				f.write(record.to_json())
				f.write('\n')

	@classmethod
	def loads(cls, text):
		""" Build a trace from JSON lines """
		trace = cls()
		for lineno, line in enumerate(text.splitlines(), start=1):
			if not line.strip():
				continue
			try:
				obj = json.loads(line)
				trace.append(int(obj['at']), obj['kind'], obj['attributes'])
			except (ValueError, KeyError, TypeError) as err:
				raise TraceError('Malformed trace line {}: {}'.format(lineno, err))
		return trace

	@classmethod
	def read(cls, path):
		""" Load a trace written by :meth:`write` """
		with open(path) as f:
			return cls.loads(f.read())
