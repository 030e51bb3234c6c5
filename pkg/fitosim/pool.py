""" Parameter sweeps. One sweep point is one resolved configuration run on a private
	engine; :class:`SweepPool` runs the points in serial, parallel or distributed mode and
	hands back, per point, the metrics rows and the artifact files to write.

	**Serial Mode**: All points are run in order in this process:

	.. code-block:: python
		:linenos:

		from fitosim.config import load_config
		from fitosim.pool import SweepPool, sweep_tasks

		tasks = sweep_tasks(load_config(preset='oracle-4'), 'workload.mutation_rate_per_s', [1e3, 1e4, 1e5])
		with SweepPool() as pool:
			results = pool.smap(tasks)

	**Parallel Mode**: Points are run in local processes (``ncpu`` of them).

	**Distributed Mode**: Points are queued by a :class:`~fitosim.scheduler.JobManager`
	across :class:`~fitosim.worker.SimWorker` processes of one or many machines. Local
	URIs that nobody answers are spawned automatically and cleaned up on exit.

	.. Tip:: Every mode returns the same list, ordered like the tasks, so the combined
			 CSV does not depend on how the sweep was run.
"""
import logging
import multiprocessing as mp
import zlib

import serpent

from .config import numeric_field
from .diagnostics import metrics_csv
from .errors import ConfigError
from .proxy import connect_to, SimProxy
from .scheduler import JobManager
from .utils import LogFun
from .worker import SimWorker, run_point

log = logging.getLogger(__name__)

DEFAULT_JOB_MANAGER = 'PYRO:jobmgr@localhost:20000'
DEFAULT_WORKERS     = ('PYRO:simworker@localhost:21000',)

def parse_sweep(text):
	""" Split ``FIELD=v1,v2,...`` into the field and its numeric values """
	if '=' not in text:
		raise ConfigError('Sweep {!r} is not of the form FIELD=v1,v2,...'.format(text))
	field, raw = text.split('=', 1)
	values = [v.strip() for v in raw.split(',') if v.strip()]
	if not values:
		raise ConfigError('Sweep has no values', field=field.strip())
	parsed = []
	for v in values:
		try:
			number = float(v)
		except ValueError:
			raise ConfigError('Sweep value {!r} is not a number'.format(v), field=field.strip())
		parsed.append(int(number) if number.is_integer() else number)
	return field.strip(), parsed

def point_name(field, value):
	""" Directory name of a sweep point """
	return '{}={}'.format(field.split('.')[-1], value)

def sweep_tasks(config, field, values):
	""" One task per value. ``field`` must be numeric in ``config``.

		:return list: Serializable task dicts ``{index, field, value, name, config}``
	"""
	numeric_field(config, field)
	tasks = []
	for i, value in enumerate(values):
		point = config.replace(**{field: value})
		tasks.append({'index': i, 'field': field, 'value': value, 'name': point_name(field, value),
					  'config': point.to_dict()})
	return tasks

def unpack_files(files):
	""" Inverse of the compression done by remote workers. Serpent ships bytes as base64
		dicts, which :func:`serpent.tobytes` turns back into bytes.
	"""
	out = {}
	for name, content in files.items():
		if isinstance(content, dict):
			content = serpent.tobytes(content)
		if isinstance(content, (bytes, bytearray)):
			content = zlib.decompress(bytes(content)).decode('utf-8')
		out[name] = content
	return out

def sweep_csv(results):
	""" Combined CSV of a sweep: one line per point and mode, prefixed by the swept value """
	rows, extra = [], []
	for res in results:
		if isinstance(res, Exception):
			continue
		for row in res['rows']:
			rows.append(row)
			extra.append({'field': res['field'], 'value': res['value']})
	return metrics_csv(rows, extra)

def show_progress(task, result, i, N, t, msg='Sweep point'):
	""" Print a statement to report progress in the pool

		:param dict task: The task
		:param object result: The result object. If it is an exception, then flag error
		:param int i: Index for this task
		:param int N: Total number of tasks
		:param str t: Elapsed time
	"""
	if isinstance(result, Exception):
		log.error('%s %s failed. ERROR: %s', msg, task['name'], result)
	else:
		print('{} {} ({}/{} - {:0.1f}%) - Elapsed time {}...\t\tSUCCESS'.format(
			msg, task['name'], i + 1, N, 100 * (1.0 * (i + 1) / N), t))

class SweepPool(object):
	""" Unique interface to run sweep points in serial, parallel or distributed mode.
		Failed points come back as the exception they raised.

		:ivar str _mode: ``serial``, ``parallel`` or ``distributed`` (used by :meth:`map`)
		:ivar dict _procs: Local processes spawned for the distributed mode
	"""
	MODES = ('serial', 'parallel', 'distributed')

	def __init__(self, mode='serial'):
		if mode not in self.MODES:
			raise ValueError('Unknown pool mode {!r}'.format(mode))
		self._mode  = mode
		self._procs = {}

	def __enter__(self):
		return self

	def __exit__(self, exc_type, exc_val, exc_tb):
		""" Shutdown spawned job managers and workers before leaving the ``with`` block """
		self.shutdown()
		return False

	def shutdown(self):
		for uri, proc in self._procs.items():
			proxy = SimProxy(uri)
			if proxy.connected:
				proxy.shutdown()
				proxy.close()
			proc.terminate()
		self._procs.clear()

	def map(self, tasks, ncpu=1, job_mgr=DEFAULT_JOB_MANAGER, workers=DEFAULT_WORKERS):
		""" Run ``tasks`` with the mode given at construction """
		if self._mode == 'serial':
			return self.smap(tasks)
		elif self._mode == 'parallel':
			return self.pmap(tasks, ncpu=ncpu)
		return self.dmap(tasks, job_mgr=job_mgr, workers=workers)

	def smap(self, tasks, msg='Sweep point'):
		""" Run tasks in order in this process

			:return list: One result (or exception) per task
		"""
		results, N = [], len(tasks)
		for i, task in enumerate(tasks):
			res, telapsed = LogFun(run_point)(task)
			show_progress(task, res, i, N, telapsed, msg=msg)
			results.append(res)
		return results

	def pmap(self, tasks, ncpu=1, msg='Sweep point'):
		""" Run tasks in ``ncpu`` local processes (at most one less than the CPU count) """
		results, N = [], len(tasks)
		if N == 0:
			return results
		maxcpu = max(mp.cpu_count() - 1, 1)
		ncores = min(ncpu, N, maxcpu)
		pool   = mp.Pool(ncores)
		try:
			futures = [pool.apply_async(LogFun(run_point), args=(task,)) for task in tasks]
			for i, (task, future) in enumerate(zip(tasks, futures)):
				res, telapsed = future.get()
				show_progress(task, res, i, N, telapsed, msg=msg)
				results.append(res)
		finally:
			pool.close()
			pool.join()
		return results

	def dmap(self, tasks, job_mgr=DEFAULT_JOB_MANAGER, workers=DEFAULT_WORKERS, msg='Sweep point'):
		""" Run tasks through a job manager and its simulation workers

			:param str job_mgr: URI of the job manager
			:param list workers: URIs of the workers to register
		"""
		try:
			job_mgr_p = self._new_proxy(job_mgr, JobManager)
			for worker in workers:
				worker_p = self._new_proxy(worker, SimWorker)
				job_mgr_p.add_worker(worker)
				worker_p.close()
		except Exception:
			self.shutdown()
			raise

		# Blocks until every point is back
		raw = job_mgr_p.map(tasks)
		job_mgr_p.close()

		results, N = [], len(tasks)
		for i, (task, res) in enumerate(zip(tasks, raw)):
			if isinstance(res, dict):
				res = dict(res, files=unpack_files(res['files']))
			elif not isinstance(res, Exception):
				res = RuntimeError(str(res))
			show_progress(task, res, i, N, 'n/a', msg=msg)
			results.append(res)
		return results

	def _new_proxy(self, uri, obj_type=None):
		proxy, proc = connect_to(uri, obj_type)
		if proc is not None:
			self._procs[uri] = proc
		return proxy
