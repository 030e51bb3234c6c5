""" Exceptions raised by fitosim. Everything derives from :class:`FitoSimError` so
	that the command line can map failures onto exit codes in one place.
"""

class FitoSimError(Exception):
	""" Base class for all simulator errors """
	pass

class ConfigError(FitoSimError):
	""" The experiment configuration does not parse or validate

		:ivar str field: Dotted path of the offending field (or ``None``)
		:ivar int line: Line in the config file where the field is defined (or ``None``)
	"""
	def __init__(self, message, field=None, line=None):
		self.field = field
		self.line  = line
		where = ''
		if field is not None:
			where = ' [{}]'.format(field)
		if line is not None:
			where += ' (line {})'.format(line)
		FitoSimError.__init__(self, '{}{}'.format(message, where))

class SimulationError(FitoSimError):
	""" A handler failed while dispatching an event. The run is aborted.

		:ivar SimEvent event: The event being dispatched when the error happened
	"""
	def __init__(self, message, event=None):
		self.event = event
		if event is not None:
			message = '{} (event #{} at t={} ns, target={})'.format(message, event.sequence,
																	  event.fire_at, event.target)
		FitoSimError.__init__(self, message)

class InterconnectError(FitoSimError):
	""" Misconfigured use of the PCIe model (unmapped address, empty DMA, ...) """
	pass

class HostStateError(FitoSimError):
	""" Unknown resource or illegal agent lifecycle transition on the host """
	pass

class TransactionError(FitoSimError):
	""" Illegal transaction status transition (e.g. double commit) """
	pass

class TraceError(FitoSimError):
	""" The trace is truncated or malformed """
	pass

class CompareError(FitoSimError):
	""" Two traces cannot be compared (different seed or workload) """
	pass
