""" Command-line experiment runner. It only resolves the configuration, calls into the
	library and reports; every simulation step lives in the modules it imports.

	.. code-block:: bash

		fitosim --preset paper-2.3 --set flags.wc_enabled=false --out runs/wc-off
		fitosim --preset bilateral-5 --seed 42
		fitosim --preset oracle-4 --sweep workload.mutation_rate_per_s=1000,10000,100000 --pool parallel --ncpu 3
		fitosim --preset flp-3.2 --check

	Exit codes: 0 ok, 1 configuration error, 2 runtime error, 3 failed ``--check``.
"""
import argparse
import logging
import os
import sys

from .checks import all_passed, run_checks
from .config import list_presets, load_config
from .errors import ConfigError, FitoSimError
from .pool import DEFAULT_JOB_MANAGER, SweepPool, parse_sweep, sweep_csv, sweep_tasks
from .simulation import execute, write_artifacts
from .utils import LogFun

log = logging.getLogger(__name__)

EXIT_OK      = 0
EXIT_CONFIG  = 1
EXIT_RUNTIME = 2
EXIT_CHECK   = 3

# Columns printed for each sweep point
SWEEP_COLUMNS = ('mode', 'requests_completed', 'mean_overhead_ns', 'abort_rate', 'expected_abort_rate',
				 'kills_false_positive', 'detection_latency_max_ns')

def _get_args_parser():
	''' Options of the experiment runner

		.. Tip:: To see options available, run ``fitosim -h``
	'''
	parser = argparse.ArgumentParser(prog='fitosim', description='FITO vs bilateral offload simulator')
	parser.add_argument('--config', '-c', default=None, help='YAML experiment config', type=str)
	parser.add_argument('--preset', default=None, help='Shipped preset (see --list-presets)', type=str)
	parser.add_argument('--set', '-s', action='append', default=[], metavar='DOTTED=VALUE',
						help='Override a config field, e.g. latency.mmio_read_rtt_ns=750 (repeatable)')
	parser.add_argument('--seed', default=None, help='Seed override', type=int)
	parser.add_argument('--out', '-o', default=None, help='Output directory override', type=str)
	parser.add_argument('--mode', choices=('fito', 'bilateral', 'paired'), default=None, help='Protocol mode')
	parser.add_argument('--sweep', default=None, metavar='FIELD=v1,v2,...', help='Run one point per value')
	parser.add_argument('--check', action='store_true', help='Run the acceptance checks of the preset')
	parser.add_argument('--pool', choices=SweepPool.MODES, default='serial', help='How sweep points run')
	parser.add_argument('--ncpu', default=1, type=int, help='Processes of a parallel sweep')
	parser.add_argument('--job-manager', default=DEFAULT_JOB_MANAGER, help='Job manager URI (distributed sweep)')
	parser.add_argument('--workers', nargs='*', default=['PYRO:simworker@localhost:21000'],
						help='Worker URIs (distributed sweep)')
	parser.add_argument('--list-presets', action='store_true', help='List the shipped presets and exit')
	parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
	parser.add_argument('--quiet', '-q', action='store_true', help='Errors only')
	return parser

def parse_args(args=None):
	return _get_args_parser().parse_args(args)

def configure_logging(args):
	level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.INFO
	logging.basicConfig(level=level, format='%(message)s')

def _run(config):
	result, telapsed = LogFun(execute)(config, config.output_dir)
	if isinstance(result, Exception):
		raise result
	if hasattr(result, 'report'):
		print(result.report.to_text())
		print('fito:      {}'.format(result.fito.score))
		print('bilateral: {}'.format(result.bilateral.score))
	else:
		print(result.summary.to_text())
		print(result.score)
	log.info('Artifacts written to %s (elapsed %s)', config.output_dir, telapsed)
	return EXIT_OK

def _sweep(config, args):
	field, values = parse_sweep(args.sweep)
	tasks = sweep_tasks(config, field, values)
	with SweepPool(args.pool) as pool:
		results = pool.map(tasks, ncpu=args.ncpu, job_mgr=args.job_manager, workers=args.workers)

	failed = 0
	for task, res in zip(tasks, results):
		if isinstance(res, Exception):
			failed += 1
			continue
		write_artifacts(res['files'], os.path.join(config.output_dir, res['name']))
		for row in res['rows']:
			print('{:<28} {}'.format(res['name'], '  '.join('{}={}'.format(c, row.get(c)) for c in SWEEP_COLUMNS)))

	os.makedirs(config.output_dir, exist_ok=True)
	with open(os.path.join(config.output_dir, 'sweep.csv'), 'w', newline='') as f:
		f.write(sweep_csv(results))
	if failed:
		log.error('%d of %d sweep points failed', failed, len(tasks))
		return EXIT_RUNTIME
	return EXIT_OK

def _check(config):
	results = run_checks(config)
	for res in results:
		print(res)
	if all_passed(results):
		print('All {} checks passed'.format(len(results)))
		return EXIT_OK
	print('{} of {} checks failed'.format(sum(1 for r in results if not r.passed), len(results)))
	return EXIT_CHECK

def main(argv=None):
	""" Entry point of the ``fitosim`` command

		:param list argv: Arguments (defaults to ``sys.argv[1:]``)
		:return int: Exit status
	"""
	args = parse_args(argv)
	configure_logging(args)
	try:
		if args.list_presets:
			print('\n'.join(list_presets()))
			return EXIT_OK
		overrides = list(args.set)
		if args.mode:
			overrides.append(('mode', args.mode))
		config = load_config(args.config, args.preset, overrides, args.seed, args.out)
		if args.check:
			return _check(config)
		if args.sweep:
			return _sweep(config, args)
		return _run(config)
	except ConfigError as err:
		log.error('Configuration error: %s', err)
		return EXIT_CONFIG
	except (FitoSimError, OSError) as err:
		log.error('Run failed: %s', err)
		return EXIT_RUNTIME
	except Exception as err:
		log.exception('Run failed: %s', err)
		return EXIT_RUNTIME

if __name__ == '__main__':
	sys.exit(main())
