""" One simulated run, end to end: build the actors for the configured mode, drive them
	with the workload until ``run_duration_ns``, then close the trace and aggregate it.

	.. code-block:: python
		:linenos:

		from fitosim.config import load_config
		from fitosim.simulation import run

		result = run(load_config(preset='paper-2.3'))
		print(result.summary.mean_overhead_ns, result.score)
"""
import logging
import os
from collections import OrderedDict

from . import interconnect as ic
from . import trace as tr
from .bilateral import BilateralProtocol, COMPLETED, NOT_COMPLETED
from .config import OptimizationFlags
from .diagnostics import ComparisonReport, OnlineMetrics, fito_score, metrics_csv, replay
from .engine import Engine
from .errors import ConfigError, FitoSimError
from .fito import FitoProtocol
from .host import HostKernel
from .interconnect import Interconnect
from .trace import Trace
from .workload import FaultInjector, gen_mutations, gen_requests, trigger_sources

log = logging.getLogger(__name__)

class RunResult(object):
	""" Everything a finished run leaves behind

		:ivar ExperimentConfig config: The resolved configuration
		:ivar Trace trace: The complete trace
		:ivar MetricsSummary summary: Metrics folded online while the run progressed
		:ivar FitoScore score: FITO verdict of the trace
		:ivar dict state: Final host state ``{resource_id: [version, decision]}``
	"""
	def __init__(self, config, engine, trace, host, interconnect, protocol, driver, mutations, injector, online):
		self.config       = config
		self.engine       = engine
		self.trace        = trace
		self.host         = host
		self.interconnect = interconnect
		self.protocol     = protocol
		self.driver       = driver
		self.mutations    = mutations
		self.injector     = injector
		self.summary      = online.summary()
		self.score        = fito_score(trace)
		self.state        = host.state()

	@property
	def mode(self):
		return self.config.mode

	def replay_matches(self):
		""" True if replaying the trace rebuilds the final host state """
		return replay(self.trace) == self.state

	def counter_mismatches(self):
		""" Online counters of the actors that disagree with the trace aggregation

			:return list: ``(name, counter value, trace value)`` tuples
		"""
		s, host = self.summary, self.host
		pairs = [('committed', host.committed, s.committed), ('aborted', host.aborted, s.aborted),
				 ('invalidated', host.invalidated, s.invalidated), ('mutations', host.mutations, s.mutations),
				 ('restarts', host.restarts, s.restarts),
				 ('requests_completed', self.driver.completed, s.requests_completed),
				 ('requests_dropped', self.driver.dropped, s.requests_dropped)]
		if self.mode == 'fito':
			wd = self.protocol.watchdog.state
			pairs += [('kills', wd.kills, s.kills_true_positive + s.kills_false_positive),
					  ('kills_true_positive', wd.true_positive_kills, s.kills_true_positive),
					  ('kills_false_positive', wd.false_positive_kills, s.kills_false_positive)]
			hits = sum(slot.hit_count for slot in self.protocol.host.slots)
			misses = sum(slot.miss_count for slot in self.protocol.host.slots)
			pairs += [('prestage_hits', hits, s.prestage_hits), ('prestage_misses', misses, s.prestage_misses)]
		else:
			ledger = self.protocol.ledger
			pairs += [('swaps_completed', ledger.count(COMPLETED), s.swaps_completed),
					  ('swaps_not_completed', ledger.count(NOT_COMPLETED), s.swaps_not_completed)]
		return [p for p in pairs if p[1] != p[2]]

class PairedResult(object):
	""" FITO and bilateral runs of the same seed and workload """
	def __init__(self, fito, bilateral):
		self.fito      = fito
		self.bilateral = bilateral
		self.report    = ComparisonReport(fito.summary, bilateral.summary, fito.score, bilateral.score)

def _run_start_attributes(config, host, interconnect):
	return dict(seed=config.seed, mode=config.mode, fingerprint=config.workload.fingerprint(),
				flags=config.flags.label if config.mode == 'fito' else 'n/a', preset=config.preset,
				resources=host.resource_ids(), cores=config.protocol.cores,
				mutation_rate_per_s=config.workload.mutation_rate_per_s,
				enforcement_ns=config.workload.request_service_model.enforcement_ns,
				app_service_ns=config.workload.request_service_model.app_service_ns,
				rtt_ns=config.latency.mmio_read_rtt_ns, one_way_ns=config.latency.one_way_ns,
				watchdog_period_ns=config.latency.watchdog_period_ns,
				decision_loop_ns=interconnect.decision_loop_ns())

def _run_end_attributes(engine, interconnect):
	caches = [interconnect.cache(d) for d in ic.DIRECTIONS]
	return dict(transactions_host_to_nic=interconnect.transactions[ic.HOST_TO_NIC],
				transactions_nic_to_host=interconnect.transactions[ic.NIC_TO_HOST],
				messages_host_to_nic=interconnect.posted[ic.HOST_TO_NIC],
				messages_nic_to_host=interconnect.posted[ic.NIC_TO_HOST],
				dma_bytes=sum(interconnect.dma_bytes.values()),
				cache_hits=sum(c.hit_count for c in caches), cache_misses=sum(c.miss_count for c in caches),
				events_scheduled=engine.scheduled, events_dispatched=engine.dispatched,
				events_pending=engine.pending)

def run(config):
	""" Execute one run of ``config.mode`` (``fito`` or ``bilateral``)

		:param ExperimentConfig config: Resolved configuration
		:return RunResult: The finished run
	"""
	if config.mode not in ('fito', 'bilateral'):
		raise ConfigError('run() needs a single protocol mode, got {!r}'.format(config.mode), field='mode')

	engine = Engine(config.seed)
	trace  = Trace(engine, messages=config.trace.messages)
	online = OnlineMetrics()
	trace.subscribe(online)

	# Bilateral frames cross an unbuffered channel
	flags = config.flags if config.mode == 'fito' else OptimizationFlags.all(False)
	interconnect = Interconnect(engine, trace, config.latency, wc_enabled=flags.wc_enabled,
								wt_enabled=flags.wt_enabled, prefetching_enabled=flags.prefetching_enabled)
	host = HostKernel(engine, trace, config.workload.resource_counts, config.latency.agent_restart_ns)
	sources = trigger_sources(engine, host, config.protocol.cores, config.workload.component_mix)
	trace.emit(tr.RUN_START, **_run_start_attributes(config, host, interconnect))

	if config.mode == 'fito':
		protocol = FitoProtocol(engine, trace, interconnect, host, config, sources)
	else:
		protocol = BilateralProtocol(engine, trace, interconnect, host, config)
	injector = FaultInjector(engine, trace, protocol.liveness, config.workload.fault_episodes)
	if config.mode == 'fito':
		protocol.watchdog.classifier = injector.classify_kill

	mutations = gen_mutations(engine, host, config.workload.mutation_rate_per_s, config.workload.run_duration_ns)
	protocol.start()
	driver = gen_requests(engine, trace, protocol, sources, config.workload)

	steps = engine.run_until(config.workload.run_duration_ns)
	trace.emit(tr.RUN_END, **_run_end_attributes(engine, interconnect))
	engine.finish()
	log.debug('Run %s seed=%d: %d events, %d records', config.mode, config.seed, steps, len(trace))
	return RunResult(config, engine, trace, host, interconnect, protocol, driver, mutations, injector, online)

def run_paired(config):
	""" Run the same seed and workload under both protocols """
	return PairedResult(run(config.for_mode('fito')), run(config.for_mode('bilateral')))

def run_artifacts(result, prefix=''):
	""" Files of one run: config.yaml, trace.jsonl, metrics.csv and summary.txt

		:return OrderedDict: ``{relative path: text}``
	"""
	summary = '{}\n{}\n'.format(result.summary.to_text(), result.score)
	return OrderedDict([(prefix + 'config.yaml', result.config.to_yaml()),
						(prefix + 'trace.jsonl', result.trace.dumps()),
						(prefix + 'metrics.csv', metrics_csv([result.summary.as_row()])),
						(prefix + 'summary.txt', summary)])

def paired_artifacts(paired):
	""" Per-mode run directories plus comparison.txt and comparison.csv """
	files = OrderedDict([('config.yaml', paired.fito.config.for_mode('paired').to_yaml())])
	files.update(run_artifacts(paired.fito, 'fito/'))
	files.update(run_artifacts(paired.bilateral, 'bilateral/'))
	files['comparison.txt'] = paired.report.to_text()
	files['comparison.csv'] = paired.report.to_csv()
	return files

def artifacts(result):
	if isinstance(result, PairedResult):
		return paired_artifacts(result)
	return run_artifacts(result)

def write_artifacts(files, out_dir):
	""" Write ``{relative path: text or bytes}`` below ``out_dir`` """
	for name, content in files.items():
		path = os.path.join(out_dir, *name.split('/'))
		os.makedirs(os.path.dirname(path), exist_ok=True)
		if isinstance(content, bytes):
			with open(path, 'wb') as f:
				f.write(content)
		else:
			with open(path, 'w', newline='\n') as f:
				f.write(content)

def execute(config, out_dir=None):
	""" Run ``config`` in its own mode and write its artifacts (if ``out_dir`` is given)

		:return RunResult or PairedResult: The result
	"""
	result = run_paired(config) if config.mode == 'paired' else run(config)
	if out_dir:
		try:
			write_artifacts(artifacts(result), out_dir)
		except OSError as err:
			raise FitoSimError('Cannot write artifacts to {}: {}'.format(out_dir, err))
	return result
