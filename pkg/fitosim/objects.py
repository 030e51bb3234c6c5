import logging
from multiprocessing import Process

import Pyro4

from .utils import split_uri

log = logging.getLogger(__name__)

@Pyro4.expose
class Closeable(object):
	""" Base class for the remote objects of a distributed sweep (job manager, simulation
		workers). They can be closed remotely through :meth:`shutdown`.

		:ivar Pyro4.core.Daemon _daemon: Daemon serving this object
	"""
	def __init__(self, daemon):
		self._daemon = daemon

	@Pyro4.oneway   # in case call returns much later than daemon.shutdown
	def shutdown(self):
		""" Shutdown this object from a proxy by shutting down its daemon """
		log.info('Shutting down %s...', type(self).__name__)
		self._daemon.shutdown()

def run_object(cls, args=None):
	""" Serve a :class:`Closeable` in a Pyro4 daemon until it is shut down

		:param class cls: Class to serve. It provides ``parse_args(args)``.
		:param list args: Command-line arguments parsed by the class
	"""
	if cls is None:
		raise TypeError('NoneType cannot be run as Pyro daemon')

	args = cls.parse_args(args=args)
	if args.uri:
		args.name, args.address, args.port = split_uri(args.uri)

	daemon = Pyro4.Daemon(host=args.address, port=args.port)
	obj    = Pyro4.expose(cls)(daemon)
	if not isinstance(obj, Closeable):
		daemon.close()
		raise TypeError('{} must be a subclass of objects.Closeable'.format(cls))

	uri = daemon.register(obj, objectId=args.name)
	print(args.msg)
	print('   {}'.format(uri))
	log.info('Pyro daemon running at %s', uri)

	daemon.requestLoop()

	# Only reached once the daemon is shut down remotely
	daemon.close()

def spawn_object(cls, args=None):
	""" Serve ``cls`` in a new local process

		:return multiprocessing.Process: The new process
	"""
	p = Process(target=run_object, args=(cls, args))
	p.start()
	return p
