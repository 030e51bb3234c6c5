import argparse
import logging
from copy import copy
from queue import Queue
from threading import Lock, Thread

import Pyro4

from .objects import Closeable, run_object
from .proxy import SimProxy

log = logging.getLogger(__name__)

class WorkerQueue(Queue):
	''' Queue of idle simulation workers. It combines a traditional Queue with a Set so
		that checking whether a worker is already registered does not drain the queue.
	'''
	def _init(self, maxsize):
		Queue._init(self, maxsize)
		self._uris = set()

	def add(self, uri):
		''' Register a worker through its URI

			:param str uri: A fully formed URI address
		'''
		self._add_proxy(SimProxy(uri))

	def _add_proxy(self, proxy):
		""" Add a worker to this WorkerQueue

			:param SimProxy proxy: The proxy that identifies the worker
		"""
		uri = proxy.uri
		if not proxy.connected:
			raise ConnectionError('Worker {} is not available'.format(uri))

		if not proxy.is_worker:
			log.warning('Proxy %s is not a simulation worker', uri)
			return

		log.info('Worker %s is available', uri)
		self._uris.add(uri)
		Queue._put(self, proxy)

	def __getitem__(self, uri):
		""" Take the worker identified by ``uri`` out of the queue

			.. Warning:: Only use this with the job manager's *mutex* held

			:param str uri: URI of the worker to access
			:return SimProxy: Proxy to the worker or None if absent
		"""
		found = None
		for _ in range(self.qsize()):
			p = self.get_nowait()
			if p.uri == uri:
				found = p
				self._uris.remove(uri)
				break
			self.put_nowait(p)
		return found

	def __contains__(self, uri):
		return uri in self._uris

	def __len__(self):
		return self.qsize()

	def __bool__(self):
		return not self.empty()

@Pyro4.expose
@Pyro4.behavior(instance_mode="single")
class JobManager(Closeable):
	''' Queues sweep points across the registered simulation workers.

		:ivar WorkerQueue _idle: Queue with idle workers
		:ivar dict _running: Maps URIs to busy workers
		:ivar dict _results: Maps task positions to their results

		To serve a job manager, run ``python -m fitosim.scheduler``. To use it from another
		process:

		.. code-block:: Python
			:linenos:

			jobs = SimProxy('PYRO:jobmgr@localhost:20000')
			jobs.add_worker('PYRO:simworker@localhost:21000')
			jobs.add_worker('PYRO:simworker@localhost:21001')

			results = jobs.map(tasks)

		.. Warning:: :meth:`map` runs one thread per task in flight, so at most
					 ``min(# tasks, # workers)`` points run at a time
	'''
	def __init__(self, daemon):
		Closeable.__init__(self, daemon)
		self._idle    = WorkerQueue()
		self._running = {}
		self._results = {}

		# The mutex must be held to change the pool of workers
		self._mutex = Lock()
		self._shut  = False

	@property
	def workers(self):
		''' URIs of the workers registered in this job manager '''
		uris = copy(self._idle._uris)
		uris.update(self._running.keys())
		return set(uris)

	def add_worker(self, uri):
		''' Register a worker through its URI. Registering it twice is a no-op. '''
		with self._mutex:
			if uri not in self.workers:
				self._idle.add(uri)

	def close_worker(self, uri):
		""" Shut down a registered worker (thread-safe) """
		with self._mutex:
			self._close_worker(uri)

	def _close_worker(self, uri):
		if uri in self._running:
			log.warning('Worker %s is shutting down while still running a point', uri)
			proxy = self._running.pop(uri)
		else:
			proxy = self._idle[uri]
		self._shutdown_proxy(uri, proxy)
		log.info('Worker %s has been closed', uri)

	@Pyro4.oneway
	def shutdown(self):
		""" Shutdown the job manager and all its workers """
		with self._mutex:
			for uri in self.workers:
				self._close_worker(uri)
			self._shut = True
		log.info('Job manager has been closed')
		Closeable.shutdown(self)

	def _shutdown_proxy(self, uri, proxy):
		""" Shutdown a worker and release the connection (mutex held) """
		if proxy is None:
			log.warning('Worker %s is not registered', uri)
			return
		proxy.shutdown()
		proxy.close()

	def __contains__(self, uri):
		return uri in self.workers

	def __len__(self):
		return len(self._idle) + len(self._running)

	def map(self, tasks):
		''' Run every sweep point on the workers and block until all results are back.
			A point that fails comes back as its exception.

			:param list tasks: Task dicts built by :func:`fitosim.pool.sweep_tasks`
			:return list: Results in task order
		'''
		if not self._idle:
			raise RuntimeError('No workers available')

		self._results.clear()
		threads = []
		for position, task in enumerate(tasks):
			with self._mutex:
				if self._shut:
					break

				# Blocks while every worker is busy
				worker = self._idle.get(block=True)
				wrk_id = worker.uri

				# Mark the worker as running before its thread starts
				thread = Thread(target=self._run_task, args=(wrk_id, position, task))
				threads.append(thread)
				self._running[wrk_id] = worker
				thread.start()

		for thread in threads:
			thread.join()

		return [self._results.get(i, RuntimeError('Point was not run')) for i in range(len(tasks))]

	def _run_task(self, wrk_id, position, task):
		''' Run one point on a worker (called from its own thread)

			:param str wrk_id: Worker URI that will run the task
			:param int position: Position of the task in the submitted list
			:param dict task: The sweep point
		'''
		worker = self._running.get(wrk_id, None)
		if worker is None:
			self._results[position] = RuntimeError('Worker was unavailable at evaluation time')
			return

		try:
			result = worker.run(task)
		except Exception as err:
			log.error('Point %s failed on %s: %s', task.get('name'), wrk_id, err)
			# Only builtin exceptions survive the trip back to the client
			result = RuntimeError('{}: {}'.format(type(err).__name__, err))
		self._results[position] = result

		self._running.pop(wrk_id)
		self._idle.put_nowait(worker)

	@staticmethod
	def parse_args(args=None):
		""" Parse the command line of a job manager """
		return _get_args_parser().parse_args(args)

def _get_args_parser():
	''' Options of a job manager process

		.. Tip:: To see options available, run ``python -m fitosim.scheduler -h``
	'''
	parser = argparse.ArgumentParser(prog='fitosim.scheduler')
	parser.add_argument('--uri', '-u', nargs='?', default='', help='Job manager URI', type=str)
	parser.add_argument('--address', '-a', nargs='?', default='localhost', help='IP address', type=str)
	parser.add_argument('--port', '-p', nargs='?', default=20000, help='TCP port', type=int)
	parser.add_argument('--name', '-n', nargs='?', default='jobmgr', help='Job manager name', type=str)
	parser.add_argument('--msg', '-m', nargs='?', default='Job manager ready to run sweep points:',
						help='Message to display when object is started', type=str)
	return parser

if __name__ == '__main__':
	logging.basicConfig(level=logging.INFO, format='%(message)s')
	run_object(JobManager)
