import pytest
import yaml

from fitosim.config import (ExperimentConfig, LatencyConfig, deep_merge, list_presets, load_config, numeric_field,
							parse_override, validate)
from fitosim.errors import ConfigError

def write(tmp_path, text, name='exp.yaml'):
	path = tmp_path / name
	path.write_text(text)
	return str(path)

def test_shipped_presets():
	assert list_presets() == ['bilateral-5', 'flp-3.2', 'oracle-4', 'paper-2.3', 'paper-2.6']
	for name in list_presets():
		config = load_config(preset=name)
		assert config.preset == name

def test_preset_values():
	config = load_config(preset='paper-2.3')
	assert config.latency.mmio_read_rtt_ns == 750
	assert config.latency.one_way_ns == 375
	assert config.flags.label == 'all-on'
	assert config.protocol.prestage_accuracy == 0.95
	assert load_config(preset='bilateral-5').mode == 'paired'

def test_unknown_preset():
	with pytest.raises(ConfigError) as err:
		load_config(preset='nope')
	assert err.value.field == 'preset'

def test_precedence_of_sources(tmp_path):
	path = write(tmp_path, 'preset: paper-2.3\nseed: 9\nlatency:\n  msix_end_to_end_ns: 1000\n')
	config = load_config(path, overrides=['latency.mmio_read_rtt_ns=900', ('flags.wc_enabled', False)], seed=11,
						 output_dir='out')
	assert config.preset == 'paper-2.3'
	assert config.seed == 11
	assert config.output_dir == 'out'
	assert config.latency.msix_end_to_end_ns == 1000
	assert config.latency.mmio_read_rtt_ns == 900
	assert config.latency.one_way_ns == 450
	assert not config.flags.wc_enabled
	# Untouched preset values survive the merge
	assert config.protocol.prestage_accuracy == 0.95

def test_unknown_key_names_the_field(tmp_path):
	path = write(tmp_path, 'latency:\n  mmio_read_rtt_ns: 750\n  bogus: 1\n')
	with pytest.raises(ConfigError) as err:
		load_config(path)
	assert err.value.field == 'latency.bogus'
	assert err.value.line == 3

def test_invalid_value_reports_its_line(tmp_path):
	path = write(tmp_path, 'mode: fito\nseed: 1\nlatency:\n  mmio_read_rtt_ns: -5\n')
	with pytest.raises(ConfigError) as err:
		load_config(path)
	assert err.value.field == 'latency.mmio_read_rtt_ns'
	assert err.value.line == 4
	assert '(line 4)' in str(err.value)

def test_broken_yaml(tmp_path):
	with pytest.raises(ConfigError):
		load_config(write(tmp_path, 'latency: [1, 2\n'))
	with pytest.raises(ConfigError):
		load_config(write(tmp_path, '- 1\n- 2\n', name='list.yaml'))
	with pytest.raises(ConfigError):
		load_config(str(tmp_path / 'missing.yaml'))

def test_cross_field_checks():
	with pytest.raises(ConfigError):
		ExperimentConfig().replace(**{'protocol.txn_shared_lines': 11})
	with pytest.raises(ConfigError):
		ExperimentConfig().replace(**{'workload.loop': 'open'})
	with pytest.raises(ConfigError):
		ExperimentConfig().replace(**{'workload.component_mix': {'rpc': 1.0}})
	with pytest.raises(ConfigError):
		ExperimentConfig().replace(**{'workload.fault_episodes': [{'kind': 'crash', 'start_ns': 10**12}]})
	with pytest.raises(ConfigError):
		ExperimentConfig().replace(**{'workload.fault_episodes': [
			{'kind': 'slow', 'start_ns': 0, 'duration_ns': 100}, {'kind': 'slow', 'start_ns': 50}]})
	lopsided = ExperimentConfig().replace(**{'latency.one_way_ns': 400})
	assert lopsided.latency.one_way_ns == 400
	for mode in ('bilateral', 'paired'):
		with pytest.raises(ConfigError) as err:
			lopsided.for_mode(mode)
		assert 'one_way_ns' in str(err.value)

def test_derived_latencies_follow_copies():
	latency = LatencyConfig(mmio_read_rtt_ns=1000)
	assert latency.one_way_ns == 500
	assert latency.watchdog_tick_ns == 5 * 10**6
	config = ExperimentConfig().replace(**{'latency.mmio_read_rtt_ns': 1000})
	assert config.latency.one_way_ns == 500
	config = config.replace(**{'latency.mmio_read_rtt_ns': 2000, 'latency.watchdog_period_ns': 4000})
	assert config.latency.one_way_ns == 1000
	assert config.latency.watchdog_tick_ns == 1000
	explicit = ExperimentConfig().replace(**{'latency.one_way_ns': 100}).replace(**{'latency.mmio_read_rtt_ns': 2000})
	assert explicit.latency.one_way_ns == 100

def test_mode_and_flag_copies():
	config = load_config(preset='paper-2.3')
	assert config.for_mode('bilateral').mode == 'bilateral'
	off = config.with_flags(False)
	assert off.flags.label == 'all-off'
	assert off.seed == config.seed and off.preset == config.preset

def test_yaml_round_trip():
	config = load_config(preset='flp-3.2')
	assert load_config(overrides=[]) == ExperimentConfig()
	assert validate(yaml.safe_load(config.to_yaml())) == config

def test_overrides_parse_as_yaml():
	assert parse_override('a.b=3') == ('a.b', 3)
	assert parse_override('flags.wc_enabled=false') == ('flags.wc_enabled', False)
	assert parse_override('x=[1, 2]') == ('x', [1, 2])
	assert parse_override('x=') == ('x', None)
	with pytest.raises(ConfigError):
		parse_override('novalue')

def test_deep_merge_keeps_the_base():
	base = {'a': {'b': 1, 'c': 2}}
	merged = deep_merge(base, {'a': {'b': 3}})
	assert merged == {'a': {'b': 3, 'c': 2}}
	assert base == {'a': {'b': 1, 'c': 2}}

def test_numeric_field():
	config = ExperimentConfig()
	assert numeric_field(config, 'workload.mutation_rate_per_s') == 0.0
	assert numeric_field(config, 'latency.one_way_ns') == 375
	with pytest.raises(ConfigError):
		numeric_field(config, 'flags.wc_enabled')
	with pytest.raises(ConfigError):
		numeric_field(config, 'mode')
	with pytest.raises(ConfigError):
		numeric_field(config, 'latency.nope')

if __name__ == '__main__':
	pytest.main(['test_config.py'])
