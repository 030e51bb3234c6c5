import logging
import time

import Pyro4

from .objects import spawn_object
from .utils import get_uri, is_connected, split_uri

log = logging.getLogger(__name__)

LOCAL_ADDRESSES = ('localhost', '127.0.0.1')

class SimProxy(Pyro4.Proxy):
	""" Proxy to a job manager or simulation worker with the usual conveniences """
	@property
	def connected(self):
		""" True if this proxy is reachable """
		return is_connected(self)

	@property
	def uri(self):
		return get_uri(self)

	def close(self):
		""" Release the Pyro connection """
		self._pyroRelease()

def connect_to(uri, obj_cls=None, wait_s=10.0):
	""" Connect to a URI and return its proxy. If the URI is local and nothing answers,
		serve ``obj_cls`` there in a new process.

		:param str uri: The URI to connect to
		:param class obj_cls: Class to spawn when the local object is missing
		:param float wait_s: How long to wait for a spawned object to come up
		:return tuple: (SimProxy, Process or None)
	"""
	proxy = SimProxy(uri)
	_, address, _ = split_uri(uri)
	if proxy.connected:
		return proxy, None

	if address not in LOCAL_ADDRESSES or obj_cls is None:
		raise ConnectionError('Unreachable object at {}'.format(uri))

	prc = spawn_object(obj_cls, ['--uri', uri])
	deadline = time.time() + wait_s
	proxy = SimProxy(uri)
	while not proxy.connected:
		if time.time() > deadline or not prc.is_alive():
			prc.terminate()
			raise ConnectionError('Spawned {} did not come up at {}'.format(obj_cls.__name__, uri))
		time.sleep(0.1)
	log.warning('Opened default %s at %s', obj_cls.__name__, uri)
	return proxy, prc
