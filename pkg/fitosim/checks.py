""" Self-verifying presets. Every shipped preset has a check that performs the runs it
	needs (for instance the flags all-off counterpart of an all-on run) and reports one
	pass/fail line per property.

	.. code-block:: python
		:linenos:

		from fitosim.checks import run_checks
		from fitosim.config import load_config

		results = run_checks(load_config(preset='paper-2.3'))
		print('\\n'.join(str(r) for r in results))
"""
import logging

from . import interconnect as ic
from . import trace as tr
from .diagnostics import abort_rate_sigma, abort_soundness_violations, unbounded_swaps
from .engine import Engine
from .interconnect import Interconnect
from .simulation import run, run_paired
from .trace import Trace

log = logging.getLogger(__name__)

# Link measurements the latency model is calibrated against
MEASURED_READ_RTT_NS = 750
MEASURED_MSIX_NS     = 1600

# Per-decision overhead targets (ns)
ALL_OFF_OVERHEAD_NS = 13300
ALL_OFF_TOLERANCE   = 0.2
ALL_ON_OVERHEAD_NS  = (3300, 4000)

THROUGHPUT_RATIO    = (3.0, 4.0)
MIN_DETECTION_RATIO = 1e4
ORACLE_SIGMAS       = 3.0
ORACLE_MIN_SAMPLES  = 10**5

class CheckResult(object):
	""" Verdict on one property

		:ivar str name: Property checked
		:ivar bool passed: Verdict
		:ivar str detail: Measured values
	"""
	__slots__ = ('name', 'passed', 'detail')

	def __init__(self, name, passed, detail=''):
		self.name   = name
		self.passed = bool(passed)
		self.detail = detail

	def __str__(self):
		return '[{}] {}: {}'.format('PASS' if self.passed else 'FAIL', self.name, self.detail)

	def __repr__(self):
		return 'CheckResult({!r}, {})'.format(self.name, self.passed)

def all_passed(results):
	return all(r.passed for r in results)

def measure_link(latency, seed=0):
	""" Time one cold MMIO read and one MSI-X delivery on an idle link

		:return tuple: (read completion, interrupt handler time), both from t=0
	"""
	engine = Engine(seed)
	link = Interconnect(engine, Trace(engine), latency, wt_enabled=True)
	link.map_address(ic.NIC_TO_HOST, 'idle-link', 0)
	_, read_done = link.blocking_read(ic.NIC_TO_HOST, 'idle-link')

	fired = []
	engine.register('idle-link', lambda event: fired.append(engine.now()))
	link.deliver_msix('idle-link')
	engine.run_until(latency.msix_end_to_end_ns)
	return read_done, fired[0] if fired else None

def integrity(label, result):
	""" Replay, double-entry and abort-soundness checks of a finished run """
	checks = [CheckResult('{} replay'.format(label), result.replay_matches(),
						  'final state of {} resources'.format(len(result.state)))]
	mismatches = result.counter_mismatches()
	checks.append(CheckResult('{} online counters'.format(label), not mismatches,
							  'consistent' if not mismatches else ', '.join(
								  '{} {} vs {}'.format(*m) for m in mismatches)))
	if result.mode == 'fito':
		bad = abort_soundness_violations(result.trace)
		checks.append(CheckResult('{} abort soundness'.format(label), not bad,
								  '{} unwitnessed aborts'.format(len(bad))))
	return checks

def _between(value, low, high):
	return value is not None and low <= value <= high

def check_latency_table(config):
	""" Cold read and MSI-X timings, and the per-decision overhead of the all-off and
		all-on pipelines
	"""
	config = config.for_mode('fito')
	read_done, msix_at = measure_link(config.latency, config.seed)
	checks = [CheckResult('cold read', read_done == MEASURED_READ_RTT_NS, '{} ns'.format(read_done)),
			  CheckResult('msix delivery', msix_at == MEASURED_MSIX_NS, '{} ns'.format(msix_at))]

	off, on = run(config.with_flags(False)), run(config.with_flags(True))
	low, high = ALL_OFF_OVERHEAD_NS * (1 - ALL_OFF_TOLERANCE), ALL_OFF_OVERHEAD_NS * (1 + ALL_OFF_TOLERANCE)
	checks.append(CheckResult('all-off overhead', _between(off.summary.mean_overhead_ns, low, high),
							  '{:.0f} ns (expected {} ns +/- {:.0%})'.format(
								  off.summary.mean_overhead_ns or 0, ALL_OFF_OVERHEAD_NS, ALL_OFF_TOLERANCE)))
	checks.append(CheckResult('all-on overhead', _between(on.summary.mean_overhead_ns, *ALL_ON_OVERHEAD_NS),
							  '{:.0f} ns (expected [{}, {}] ns)'.format(on.summary.mean_overhead_ns or 0,
																	  *ALL_ON_OVERHEAD_NS)))

	again = run(config.with_flags(True))
	checks.append(CheckResult('determinism', again.trace.dumps() == on.trace.dumps(),
							  '{} records, seed {}'.format(len(on.trace), config.seed)))
	return checks + integrity('all-off', off) + integrity('all-on', on)

def check_throughput_ratio(config):
	""" Throughput of the all-on pipeline over the all-off one """
	config = config.for_mode('fito')
	off, on = run(config.with_flags(False)), run(config.with_flags(True))
	a, b = off.summary.throughput_req_per_s, on.summary.throughput_req_per_s
	ratio = b / a if a else None
	checks = [CheckResult('throughput ratio', _between(ratio, *THROUGHPUT_RATIO),
						  '{:.3g} ({:.0f} vs {:.0f} req/s, expected [{}, {}])'.format(
							  ratio or 0, b, a, *THROUGHPUT_RATIO))]
	return checks + integrity('all-off', off) + integrity('all-on', on)

def check_abort_oracle(config):
	""" Empirical abort rate against ``1 - exp(-rate * k * W)`` over the measured windows """
	result = run(config.for_mode('fito'))
	s = result.summary
	decided = s.committed + s.aborted
	if not decided:
		return [CheckResult('abort oracle', False, 'no decided transactions')]
	sigma = abort_rate_sigma(s.expected_abort_rate, decided)
	delta = abs(s.abort_rate - s.expected_abort_rate)
	checks = [CheckResult('abort oracle', delta <= ORACLE_SIGMAS * sigma,
						  'observed {:.5f}, expected {:.5f}, sigma {:.2g}, n={}'.format(
							  s.abort_rate, s.expected_abort_rate, sigma, decided)),
			  CheckResult('oracle sample size', decided >= ORACLE_MIN_SAMPLES,
						  '{} transactions (need {})'.format(decided, ORACLE_MIN_SAMPLES))]
	return checks + integrity('fito', result)

def restart_delays(trace):
	""" Time from each crash to the first agent restart that follows it """
	delays, waiting = [], []
	for record in trace.of_kind(tr.EPISODE_MARKER, tr.AGENT_RESTART):
		if record.kind == tr.AGENT_RESTART:
			delays.extend(record.at - t for t in waiting)
			waiting = []
		elif record.get('episode_kind') == 'crash' and record.get('phase') == 'start':
			waiting.append(record.at)
	return delays, waiting

def check_watchdog_tradeoff(config):
	""" A slow agent gets killed, a crashed one gets restarted within two periods, and a
		longer period does not kill more
	"""
	config = config.for_mode('fito')
	period = config.latency.watchdog_period_ns
	result = run(config)
	s = result.summary
	checks = [CheckResult('false-positive kill', s.kills_false_positive >= 1,
						  '{} false-positive kills at period {} ns'.format(s.kills_false_positive, period))]

	delays, unrestarted = restart_delays(result.trace)
	crashed = any(e.kind == 'crash' for e in config.workload.fault_episodes)
	if crashed:
		ok = not unrestarted and bool(delays) and max(delays) <= 2 * period
		checks.append(CheckResult('crash restart', ok, 'restart after {} ns (bound {} ns){}'.format(
			max(delays) if delays else None, 2 * period, ', {} crashes never restarted'.format(
				len(unrestarted)) if unrestarted else '')))

	longer = run(config.replace(**{'latency.watchdog_period_ns': 2 * period, 'latency.watchdog_tick_ns': None}))
	checks.append(CheckResult('longer period', longer.summary.kills_false_positive <= s.kills_false_positive,
							  '{} false-positive kills at period {} ns'.format(
								  longer.summary.kills_false_positive, 2 * period)))
	return checks + integrity('fito', result)

def check_bilateral_contrast(config):
	""" Paired runs: no aborts or timeouts in bilateral mode, bounded frames, FITO verdicts
		and the detection-latency contrast
	"""
	paired = run_paired(config)
	fito, bilateral = paired.fito, paired.bilateral
	rtt, period = config.latency.mmio_read_rtt_ns, config.latency.watchdog_period_ns
	f, b = fito.summary, bilateral.summary
	late = unbounded_swaps(bilateral.trace, rtt)
	checks = [
		CheckResult('bilateral aborts', b.aborted == 0, '{} aborted'.format(b.aborted)),
		CheckResult('bilateral timeouts', b.watchdog_arms == 0, '{} watchdog arms'.format(b.watchdog_arms)),
		CheckResult('bounded swaps', not late, '{} of {} frames off the one-RTT resolution'.format(
			len(late), b.swaps_completed + b.swaps_not_completed)),
		CheckResult('fito verdict', fito.score.total == 4, str(fito.score)),
		CheckResult('bilateral verdict', bilateral.score.total == 0, str(bilateral.score))]

	if config.workload.fault_episodes:
		checks.append(CheckResult('bilateral detection', _between(b.detection_latency_max_ns, 0, 2 * rtt),
								  'max {} ns (bound {} ns)'.format(b.detection_latency_max_ns, 2 * rtt)))
		checks.append(CheckResult('fito detection', _between(f.detection_latency_max_ns, 0, 2 * period),
								  'max {} ns (bound {} ns)'.format(f.detection_latency_max_ns, 2 * period)))
		ratio = paired.report.detection_ratio
		checks.append(CheckResult('detection ratio', ratio is not None and ratio >= MIN_DETECTION_RATIO,
								  '{} (need >= {:g})'.format('{:.4g}'.format(ratio) if ratio else None,
															 MIN_DETECTION_RATIO)))
	return checks + integrity('fito', fito) + integrity('bilateral', bilateral)

def check_generic(config):
	""" Integrity of a plain run of ``config`` (presets without a dedicated check) """
	if config.mode == 'paired':
		paired = run_paired(config)
		return integrity('fito', paired.fito) + integrity('bilateral', paired.bilateral)
	return integrity(config.mode, run(config))

CHECKS = {
	'paper-2.3':   check_latency_table,
	'paper-2.6':   check_throughput_ratio,
	'oracle-4':    check_abort_oracle,
	'flp-3.2':     check_watchdog_tradeoff,
	'bilateral-5': check_bilateral_contrast,
}

def run_checks(config):
	""" Run the check of ``config.preset`` (or the generic one)

		:param ExperimentConfig config: Resolved configuration
		:return list: :class:`CheckResult` objects
	"""
	check = CHECKS.get(config.preset, check_generic)
	log.info('Checking preset %s with %s', config.preset, check.__name__)
	return check(config)
