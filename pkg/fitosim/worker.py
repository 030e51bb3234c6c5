""" Simulation workers of a distributed sweep. Serve one per core with::

		python -m fitosim.worker --uri PYRO:simworker@localhost:21000

	and register it with a job manager (see :mod:`fitosim.scheduler`).
"""
import abc
import argparse
import logging
import zlib

import Pyro4

from .config import validate
from .objects import Closeable, run_object
from .simulation import artifacts, execute

log = logging.getLogger(__name__)

def run_point(task, compress=False):
	""" Run one sweep point

		:param dict task: Task built by :func:`fitosim.pool.sweep_tasks`
		:param bool compress: zlib-compress the artifact files (for the wire)
		:return dict: ``{index, field, value, name, rows, score, files}``
	"""
	result = execute(validate(task['config']))
	runs = [result.fito, result.bilateral] if hasattr(result, 'fito') else [result]
	files = artifacts(result)
	if compress:
		files = dict((name, zlib.compress(text.encode('utf-8'))) for name, text in files.items())
	return {'index': task['index'], 'field': task['field'], 'value': task['value'], 'name': task['name'],
			'rows': [dict(r.summary.as_row()) for r in runs], 'score': [str(r.score) for r in runs],
			'files': files}

@Pyro4.expose
class BaseWorker(Closeable, metaclass=abc.ABCMeta):
	""" Anything a job manager can hand sweep points to """
	@abc.abstractmethod
	def run(self, task):
		""" Method called by the job manager for every point """

	@property
	def is_worker(self):
		return True

	@staticmethod
	def parse_args(args=None):
		return _get_args_parser().parse_args(args)

class SimWorker(BaseWorker):
	""" Runs one sweep point per call on a private engine. Artifact files travel back
		compressed; serpent carries the bytes.
	"""
	def run(self, task):
		log.info('Running point %s', task.get('name'))
		return run_point(task, compress=True)

def _get_args_parser():
	parser = argparse.ArgumentParser(prog='fitosim.worker')
	parser.add_argument('--uri', '-u', nargs='?', default='', help='Worker URI', type=str)
	parser.add_argument('--address', '-a', nargs='?', default='localhost', help='IP address', type=str)
	parser.add_argument('--port', '-p', nargs='?', default=21000, help='TCP port', type=int)
	parser.add_argument('--name', '-n', nargs='?', default='simworker', help='Worker name', type=str)
	parser.add_argument('--msg', '-m', nargs='?', default='Simulation worker ready to run sweep points:',
						help='Message to display when object is started', type=str)
	return parser

def run_worker(cls=SimWorker, args=None):
	""" Serve a worker class in a Pyro4 daemon """
	run_object(cls, args)

if __name__ == '__main__':
	logging.basicConfig(level=logging.INFO, format='%(message)s')
	run_worker()
