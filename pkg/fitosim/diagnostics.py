""" Analysis of finished runs. Everything here works on a :class:`~fitosim.trace.Trace`
	alone, so a trace file written by one run can be scored, summarized, compared and
	replayed later without the simulator state.
"""
import bisect
import csv
import io
import logging
import math
from collections import OrderedDict

import numpy as np

from . import trace as tr
from .errors import CompareError, TraceError

log = logging.getLogger(__name__)

# Evidence kept per FITO criterion
MAX_EVIDENCE = 5

def log2_bucket(value):
	""" Bucket of a non-negative integer: ``[2**(b-1), 2**b)``, bucket 0 holds 0 """
	return int(value).bit_length()

def histogram(values):
	""" Power-of-two histogram

		:return list: ``(low, high, count)`` for every non-empty bucket, ``high`` exclusive
	"""
	counts = {}
	for v in values:
		b = log2_bucket(v)
		counts[b] = counts.get(b, 0) + 1
	return [(0 if b == 0 else 2 ** (b - 1), 2 ** b if b else 1, counts[b]) for b in sorted(counts)]

def percentiles(values, qs=(50, 90, 99)):
	""" Order-statistic percentiles (always a sample value) plus the maximum """
	if len(values) == 0:
		return dict(('p{}'.format(q), None) for q in qs), None
	arr = np.asarray(values, dtype=np.int64)
	ps = np.percentile(arr, qs, method='inverted_cdf')
	return dict(('p{}'.format(q), int(p)) for q, p in zip(qs, ps)), int(arr.max())

class FitoScore(object):
	""" Four-criterion verdict. A criterion is true only if the trace exhibits it, and
		every true criterion cites the records that witness it.
	"""
	CRITERIA = ('c1_clocks', 'c2_timeouts', 'c3_abort_resolution', 'c4_forward_recovery')

	def __init__(self):
		self.evidence = OrderedDict((c, []) for c in self.CRITERIA)

	def cite(self, criterion, record):
		refs = self.evidence[criterion]
		if len(refs) < MAX_EVIDENCE:
			refs.append(record.index)

	@property
	def c1_clocks(self):
		return bool(self.evidence['c1_clocks'])

	@property
	def c2_timeouts(self):
		return bool(self.evidence['c2_timeouts'])

	@property
	def c3_abort_resolution(self):
		return bool(self.evidence['c3_abort_resolution'])

	@property
	def c4_forward_recovery(self):
		return bool(self.evidence['c4_forward_recovery'])

	@property
	def total(self):
		return sum(1 for refs in self.evidence.values() if refs)

	def __str__(self):
		marks = ', '.join('{}={}'.format(c, 'yes' if refs else 'no') for c, refs in self.evidence.items())
		return 'FITO {}/4 ({})'.format(self.total, marks)

def fito_score(trace):
	""" Score a complete trace against the four FITO criteria

		* clocks: a commit was validated by comparing version/sequence metadata
		* timeouts: a watchdog was armed
		* abort resolution: a stale decision was aborted in favour of newer host state
		* forward recovery: the agent was rebuilt from a full host snapshot taken at the
		  restart, with no committed decision undone
	"""
	trace.require_complete()
	score = FitoScore()
	resources = trace.records[0].get('resources')
	for record in trace:
		kind = record.kind
		if kind == tr.COMMIT_OUTCOME:
			if record.get('validated_by') in ('version-compare', 'timestamp-compare'):
				score.cite('c1_clocks', record)
			if record.get('result') == 'Aborted':
				observed = dict(record.get('observed') or [])
				stale = record.get('aborted_on')
				if stale in observed and record.get('current_version', -1) > observed[stale]:
					score.cite('c3_abort_resolution', record)
		elif kind == tr.WATCHDOG_ARM:
			score.cite('c2_timeouts', record)
		elif kind == tr.AGENT_RESTART:
			if record.get('undone_commits') == 0 and _rebuilt_from_host(trace, record, resources):
				score.cite('c4_forward_recovery', record)
	return score

def _rebuilt_from_host(trace, restart, resources):
	""" The restart points back at a rebuild snapshot of every resource, taken at the
		restart instant
	"""
	index = restart.get('snapshot_record')
	if not isinstance(index, int) or not 0 <= index < restart.index:
		return False
	snap = trace.records[index]
	if snap.kind != tr.SNAPSHOT or snap.get('purpose') != 'rebuild' or snap.at != restart.at:
		return False
	return resources is None or sorted(r for r, _ in snap.get('entries', [])) == sorted(resources)

class MetricsSummary(object):
	""" Aggregated metrics of one run. :meth:`as_row` gives the CSV row. """
	COLUMNS = ('mode', 'seed', 'fingerprint', 'flags', 'duration_ns', 'requests_completed', 'requests_dropped',
			   'throughput_req_per_s', 'mean_overhead_ns', 'offload_tax_ns', 'decision_loop_ns', 'committed', 'aborted',
			   'invalidated', 'abort_rate', 'expected_abort_rate', 'window_mean_ns', 'window_p50_ns', 'window_p90_ns',
			   'window_p99_ns', 'window_max_ns', 'kills_true_positive', 'kills_false_positive', 'restarts',
			   'watchdog_arms', 'detection_latency_mean_ns', 'detection_latency_max_ns', 'prestage_hits',
			   'prestage_misses', 'prestage_hit_rate', 'swaps_completed', 'swaps_not_completed', 'mutations',
			   'transactions_host_to_nic', 'transactions_nic_to_host', 'cache_hits', 'cache_misses')

	def __init__(self, **values):
		self.values = OrderedDict((c, values.get(c)) for c in self.COLUMNS)
		self.window_histogram   = values.get('window_histogram', [])
		self.detection_latencies = values.get('detection_latencies', [])

	def __getattr__(self, name):
		values = self.__dict__.get('values')
		if values is not None and name in values:
			return values[name]
		raise AttributeError(name)

	def __eq__(self, other):
		return (isinstance(other, MetricsSummary) and self.values == other.values and
				self.window_histogram == other.window_histogram and
				self.detection_latencies == other.detection_latencies)

	def __ne__(self, other):
		return not self == other

	def as_row(self):
		return OrderedDict((k, _fmt(v)) for k, v in self.values.items())

	def to_text(self):
		""" Human-readable two-column table """
		width = max(len(c) for c in self.COLUMNS)
		lines = ['{:<{w}}  {}'.format(k, v, w=width) for k, v in self.as_row().items()]
		if self.window_histogram:
			lines.append('')
			lines.append('vulnerability window histogram (ns)')
			for low, high, count in self.window_histogram:
				lines.append('  [{:>10}, {:>10})  {}'.format(low, high, count))
		return '\n'.join(lines) + '\n'

def _fmt(value):
	if isinstance(value, float):
		return '{:.6g}'.format(value)
	return '' if value is None else value

class OnlineMetrics(object):
	""" Folds trace records into metrics as they are appended. Subscribe it to a live
		trace to get the online side of the double-entry check; :func:`summarize` runs the
		same fold over a finished trace.
	"""
	def __init__(self):
		self.start = None
		self.end   = None
		self.completed = 0
		self.dropped   = 0
		self.overheads = []
		self.windows   = []
		self.targets   = []
		self.results   = {'Committed': 0, 'Aborted': 0, 'Invalidated': 0}
		self.kills     = {'true-positive': 0, 'false-positive': 0}
		self.restarts  = 0
		self.arms      = 0
		self.mutations = 0
		self.prestage  = {'hit': 0, 'miss': 0}
		self.swaps     = {'Completed': 0, 'NotCompleted': 0}
		self.detection = []
		self._crashed  = False
		self._waiting_crashes = []

	def __call__(self, record):
		self.observe(record)

	def observe(self, record):
		kind = record.kind
		if kind == tr.RUN_START:
			self.start = record
		elif kind == tr.RUN_END:
			self.end = record
		elif kind == tr.MUTATE:
			self.mutations += 1
		elif kind == tr.REQUEST_COMPLETE:
			if record.get('status') == 'ok':
				self.completed += 1
				self.overheads.append(record.get('overhead_ns'))
			else:
				self.dropped += 1
		elif kind == tr.COMMIT_OUTCOME:
			result = record.get('result')
			self.results[result] += 1
			if result != 'Invalidated':
				self.windows.append(record.get('window'))
				self.targets.append(len(record.get('observed')))
		elif kind == tr.PRESTAGE:
			action = record.get('action')
			if action in self.prestage:
				self.prestage[action] += 1
		elif kind == tr.WATCHDOG_ARM:
			self.arms += 1
		elif kind == tr.WATCHDOG_KILL:
			self.kills['true-positive' if self._crashed else 'false-positive'] += 1
			self._detect(record)
		elif kind == tr.AGENT_RESTART:
			self.restarts += 1
			self._crashed = False
		elif kind == tr.SWAP_RESOLVE:
			self.swaps[record.get('outcome')] += 1
			if record.get('outcome') == 'NotCompleted':
				self._detect(record)
		elif kind == tr.EPISODE_MARKER:
			if record.get('episode_kind') == 'crash' and record.get('phase') == 'start':
				self._crashed = True
				self._waiting_crashes.append(record.at)

	def _detect(self, record):
		# First externally visible reaction after each crash
		for crash_at in self._waiting_crashes:
			self.detection.append(record.at - crash_at)
		self._waiting_crashes = []

	def summary(self):
		if self.start is None or self.end is None:
			raise TraceError('Trace is truncated: missing run-start or run-end record')
		start, end = self.start, self.end
		duration = end.at - start.at
		committed, aborted = self.results['Committed'], self.results['Aborted']
		decided  = committed + aborted
		pcts, wmax = percentiles(self.windows)
		mean_overhead = float(np.mean(self.overheads)) if self.overheads else None
		enforcement = start.get('enforcement_ns', 0)
		rate = start.get('mutation_rate_per_s', 0.0)
		hits, misses = self.prestage['hit'], self.prestage['miss']
		return MetricsSummary(
			mode=start.get('mode'), seed=start.get('seed'), fingerprint=start.get('fingerprint'),
			flags=start.get('flags'), duration_ns=duration,
			requests_completed=self.completed, requests_dropped=self.dropped,
			throughput_req_per_s=self.completed * 1e9 / duration if duration else 0.0,
			mean_overhead_ns=mean_overhead,
			offload_tax_ns=mean_overhead - enforcement if mean_overhead is not None else None,
			decision_loop_ns=start.get('decision_loop_ns'),
			committed=committed, aborted=aborted, invalidated=self.results['Invalidated'],
			abort_rate=aborted / decided if decided else None,
			expected_abort_rate=expected_abort_rate(self.windows, self.targets, rate) if decided else None,
			window_mean_ns=float(np.mean(self.windows)) if self.windows else None,
			window_p50_ns=pcts['p50'], window_p90_ns=pcts['p90'], window_p99_ns=pcts['p99'], window_max_ns=wmax,
			window_histogram=histogram(self.windows),
			kills_true_positive=self.kills['true-positive'], kills_false_positive=self.kills['false-positive'],
			restarts=self.restarts, watchdog_arms=self.arms,
			detection_latencies=list(self.detection),
			detection_latency_mean_ns=float(np.mean(self.detection)) if self.detection else None,
			detection_latency_max_ns=max(self.detection) if self.detection else None,
			prestage_hits=hits, prestage_misses=misses,
			prestage_hit_rate=hits / (hits + misses) if hits + misses else None,
			swaps_completed=self.swaps['Completed'], swaps_not_completed=self.swaps['NotCompleted'],
			mutations=self.mutations,
			transactions_host_to_nic=end.get('transactions_host_to_nic'),
			transactions_nic_to_host=end.get('transactions_nic_to_host'),
			cache_hits=end.get('cache_hits'), cache_misses=end.get('cache_misses'))

def summarize(trace):
	""" Metrics of a complete trace """
	trace.require_complete()
	metrics = OnlineMetrics()
	for record in trace:
		metrics.observe(record)
	return metrics.summary()

def expected_abort_rate(windows, targets, rate_per_s):
	""" Mean probability that at least one of ``k`` targets mutates inside a window ``W``,
		``1 - exp(-rate * k * W)``, over the given transactions
	"""
	if len(windows) == 0:
		return None
	w = np.asarray(windows, dtype=float) * 1e-9
	k = np.asarray(targets, dtype=float)
	return float(np.mean(1.0 - np.exp(-rate_per_s * k * w)))

def abort_rate_sigma(p, n):
	""" Standard deviation of an empirical rate over ``n`` Bernoulli trials """
	return math.sqrt(p * (1.0 - p) / n) if n else float('nan')

def replay(trace):
	""" Rebuild the final host state from the trace alone

		:return dict: ``{resource_id: [version, decision]}``
	"""
	trace.require_complete()
	state = dict((rid, [0, None]) for rid in trace.records[0].get('resources', []))
	for record in trace:
		kind = record.kind
		if kind == tr.MUTATE:
			entry = state[record.get('resource')]
			entry[0] += 1
			if entry[0] != record.get('version'):
				raise TraceError('Record #{} jumps {} to version {}'.format(record.index, record.get('resource'),
																		   record.get('version')))
		elif kind == tr.COMMIT_OUTCOME and record.get('result') == 'Committed':
			for rid, _ in record.get('observed'):
				state[rid][1] = record.get('payload')
		elif kind == tr.SWAP_RESOLVE and record.get('outcome') == 'Completed':
			for rid in record.get('resources'):
				state[rid][1] = record.get('nic_view')
	return state

def abort_soundness_violations(trace):
	""" Aborted outcomes without a witnessing mutation of the stale resource between the
		transaction's snapshot and its outcome (in trace order)

		:return list: Offending commit-outcome records
	"""
	mutations = {}
	for record in trace.of_kind(tr.MUTATE):
		mutations.setdefault(record.get('resource'), []).append(record.index)

	bad = []
	for record in trace.of_kind(tr.COMMIT_OUTCOME):
		if record.get('result') != 'Aborted':
			continue
		indices = mutations.get(record.get('aborted_on'), [])
		lo = record.get('snapshot_record')
		i = bisect.bisect_right(indices, lo if lo is not None else -1)
		if i == len(indices) or indices[i] > record.index:
			bad.append(record)
	return bad

def unbounded_swaps(trace, window_ns):
	""" Swap resolutions that did not happen exactly one window after initiation """
	return [r for r in trace.of_kind(tr.SWAP_RESOLVE) if r.get('resolved_at') - r.get('initiated_at') != window_ns]

class ComparisonReport(object):
	""" Side-by-side metrics of two runs of the same workload """
	def __init__(self, left, right, left_score, right_score):
		self.left, self.right = left, right
		self.left_score, self.right_score = left_score, right_score
		self.rows = []
		for column in MetricsSummary.COLUMNS:
			a, b = left.values[column], right.values[column]
			delta = b - a if _numeric(a) and _numeric(b) else None
			self.rows.append((column, a, b, delta))
		self.rows.append(('fito_score', left_score.total, right_score.total, right_score.total - left_score.total))

	@property
	def detection_ratio(self):
		""" Mean detection latency of the left run over that of the right run """
		a, b = self.left.detection_latency_mean_ns, self.right.detection_latency_mean_ns
		if not a or not b:
			return None
		return a / b

	def properties(self):
		""" No-abort / no-timeout flags of each side """
		return OrderedDict([
			('{}_no_abort'.format(self.left.mode), self.left.aborted == 0),
			('{}_no_timeout'.format(self.left.mode), self.left.watchdog_arms == 0),
			('{}_no_abort'.format(self.right.mode), self.right.aborted == 0),
			('{}_no_timeout'.format(self.right.mode), self.right.watchdog_arms == 0)])

	def to_text(self):
		labels = (self.left.mode, self.right.mode)
		width = max(len(c) for c, _, _, _ in self.rows)
		lines = ['{:<{w}}  {:>16}  {:>16}  {:>16}'.format('metric', labels[0], labels[1], 'delta', w=width)]
		for column, a, b, delta in self.rows:
			lines.append('{:<{w}}  {:>16}  {:>16}  {:>16}'.format(column, _fmt(a), _fmt(b), _fmt(delta), w=width))
		lines.append('')
		for name, value in self.properties().items():
			lines.append('{:<{w}}  {}'.format(name, 'yes' if value else 'no', w=width))
		ratio = self.detection_ratio
		if ratio is not None:
			lines.append('{:<{w}}  {:.6g}'.format('detection_ratio', ratio, w=width))
		return '\n'.join(lines) + '\n'

	def to_csv(self):
		out = io.StringIO()
		writer = csv.writer(out, lineterminator='\n')
		writer.writerow(['metric', self.left.mode, self.right.mode, 'delta'])
		for column, a, b, delta in self.rows:
			writer.writerow([column, _fmt(a), _fmt(b), _fmt(delta)])
		return out.getvalue()

def _numeric(value):
	return isinstance(value, (int, float)) and not isinstance(value, bool)

def compare(left, right):
	""" Compare two traces of the same seed and workload

		:raises CompareError: if the seeds or workload fingerprints differ
	"""
	left.require_complete()
	right.require_complete()
	a, b = left.records[0], right.records[0]
	if a.get('seed') != b.get('seed'):
		raise CompareError('Traces use different seeds ({} vs {})'.format(a.get('seed'), b.get('seed')))
	if a.get('fingerprint') != b.get('fingerprint'):
		raise CompareError('Traces run different workloads ({} vs {})'.format(a.get('fingerprint'),
																			   b.get('fingerprint')))
	return ComparisonReport(summarize(left), summarize(right), fito_score(left), fito_score(right))

def metrics_csv(rows, extra=None):
	""" CSV text with one line per row. ``rows`` are :meth:`MetricsSummary.as_row` dicts;
		``extra`` is a list of dicts prepended to them (sweep values).
	"""
	extra = extra or [{} for _ in rows]
	header = list(extra[0].keys()) + list(MetricsSummary.COLUMNS) if rows else list(MetricsSummary.COLUMNS)
	out = io.StringIO()
	writer = csv.DictWriter(out, fieldnames=header, lineterminator='\n')
	writer.writeheader()
	for values, row in zip(extra, rows):
		line = OrderedDict(values)
		line.update(row)
		writer.writerow(line)
	return out.getvalue()
