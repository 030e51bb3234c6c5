import pytest

from fitosim.checks import CHECKS, CheckResult, all_passed, measure_link, run_checks
from fitosim.config import LatencyConfig, list_presets, load_config

MS = 10**6

def names(results):
	return [r.name for r in results]

def test_idle_link_matches_the_measurements():
	assert measure_link(LatencyConfig()) == (750, 1600)
	assert measure_link(LatencyConfig(mmio_read_rtt_ns=1000, msix_end_to_end_ns=2000)) == (1000, 2000)

def test_every_preset_has_a_check():
	assert sorted(CHECKS) == list_presets()

def test_check_result_text():
	assert str(CheckResult('cold read', True, '750 ns')) == '[PASS] cold read: 750 ns'
	assert str(CheckResult('cold read', False, '9 ns')) == '[FAIL] cold read: 9 ns'
	assert all_passed([CheckResult('a', True)])
	assert not all_passed([CheckResult('a', True), CheckResult('b', False)])

def test_latency_table_on_a_short_run():
	config = load_config(preset='paper-2.3', overrides=[('workload.run_duration_ns', 2 * MS)])
	results = run_checks(config)
	assert names(results)[:5] == ['cold read', 'msix delivery', 'all-off overhead', 'all-on overhead',
								  'determinism']
	assert all_passed(results), '\n'.join(str(r) for r in results)

@pytest.mark.parametrize('preset', list_presets())
def test_preset_passes_its_checks(preset):
	results = run_checks(load_config(preset=preset))
	assert all_passed(results), '\n'.join(str(r) for r in results)

def test_bilateral_contrast():
	assert 'detection ratio' in names(run_checks(load_config(preset='bilateral-5')))

def test_short_oracle_run_lacks_samples():
	config = load_config(preset='oracle-4', overrides=[('workload.run_duration_ns', MS)])
	results = dict((r.name, r) for r in run_checks(config))
	assert not results['oracle sample size'].passed
	assert results['fito replay'].passed
	assert results['fito abort soundness'].passed

def test_generic_check_without_preset():
	config = load_config(overrides=[('workload.run_duration_ns', MS), ('mode', 'paired')])
	results = run_checks(config)
	assert names(results) == ['fito replay', 'fito online counters', 'fito abort soundness',
							  'bilateral replay', 'bilateral online counters']
	assert all_passed(results)

if __name__ == '__main__':
	pytest.main(['test_checks.py'])
