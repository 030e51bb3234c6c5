""" Experiment configuration. A run is fully described by one :class:`ExperimentConfig`,
	loaded from YAML and validated with pydantic. Values are resolved in this order::

		preset  <-  config file  <-  --set dotted.path=value  <-  --seed / --out

	The resolved document is echoed next to the run artifacts so that every output
	directory can be reproduced on its own.
"""
import copy
import hashlib
import json
import logging
import os
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

log = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')

# Offloaded components and the resource family each one drives
COMPONENT_RESOURCES = {'scheduling': 'threads', 'memory': 'pages', 'rpc': 'flows'}

class _Model(BaseModel):
	model_config = ConfigDict(extra='forbid')

class LatencyConfig(_Model):
	""" Interconnect cost parameters. Defaults are the PCIe measurements of the
		offload framework being modelled (750 ns MMIO read, 1600 ns MSI-X).
	"""
	mmio_read_rtt_ns: int = Field(750, gt=0)
	msix_end_to_end_ns: int = Field(1600, ge=0)
	one_way_ns: Optional[int] = Field(None, gt=0)
	wc_batch_capacity_messages: int = Field(8, gt=0)
	wc_flush_timeout_ns: int = Field(1000, ge=0)
	dma_setup_ns: int = Field(1000, gt=0)
	dma_bandwidth_bytes_per_ns: float = Field(2.0, gt=0)
	watchdog_period_ns: int = Field(20 * 10**6, gt=0)
	watchdog_tick_ns: Optional[int] = Field(None, gt=0)
	nic_compute_ns: int = Field(300, gt=0)
	msix_issue_ns: int = Field(51, ge=0)
	decision_loop_accounting: Literal['end-to-end', 'posted'] = 'end-to-end'
	agent_restart_ns: int = Field(0, ge=0)

	@model_validator(mode='after')
	def _derive(self):
		# Symmetric split of the measured round-trip unless overridden
		if self.one_way_ns is None:
			object.__setattr__(self, 'one_way_ns', max(1, self.mmio_read_rtt_ns // 2))
		if self.watchdog_tick_ns is None:
			object.__setattr__(self, 'watchdog_tick_ns', max(1, self.watchdog_period_ns // 4))
		return self

class OptimizationFlags(_Model):
	""" Latency mitigations of the FITO pipeline. All-false is the unoptimized baseline. """
	wc_enabled: bool = True
	wt_enabled: bool = True
	prestaging_enabled: bool = True
	prefetching_enabled: bool = True

	@classmethod
	def all(cls, enabled):
		return cls(wc_enabled=enabled, wt_enabled=enabled, prestaging_enabled=enabled,
				   prefetching_enabled=enabled)

	@property
	def label(self):
		values = [self.wc_enabled, self.wt_enabled, self.prestaging_enabled, self.prefetching_enabled]
		if all(values):
			return 'all-on'
		if not any(values):
			return 'all-off'
		return '+'.join(n for n, v in zip(('wc', 'wt', 'prestage', 'prefetch'), values) if v)

class ProtocolConfig(_Model):
	""" Knobs of both protocols that are not interconnect latencies """
	cores: int = Field(1, gt=0)
	retry_mode: Literal['agent-redecide', 'auto-retry'] = 'agent-redecide'
	retry_limit: Optional[int] = Field(None, ge=0)
	prestage_accuracy: float = Field(1.0, ge=0.0, le=1.0)
	compute_distribution: Literal['exponential', 'constant'] = 'exponential'
	msix_notify: bool = True
	idle_heartbeats: bool = True
	heartbeat_interval_ns: Optional[int] = Field(None, gt=0)
	txn_read_lines: int = Field(10, ge=0)
	txn_shared_lines: int = Field(4, ge=0)
	prestage_slot_lines: int = Field(1, ge=0)
	ring_slots: int = Field(64, gt=0)
	event_size_bytes: int = Field(64, gt=0)
	decision_size_bytes: int = Field(64, gt=0)
	keepalive: bool = True
	swap_backoff_ns: Optional[int] = Field(None, ge=0)

	@model_validator(mode='after')
	def _check_lines(self):
		if self.txn_shared_lines > self.txn_read_lines:
			raise ValueError('txn_shared_lines cannot exceed txn_read_lines')
		return self

class ServiceModel(_Model):
	""" Per-request cost composition used by the throughput experiments

		:ivar int app_service_ns: Application work per request, outside the decision
		:ivar int enforcement_ns: On-host cost of enforcing one decision (context switch,
								  page table update, ...). A purely on-host policy pays only this.
	"""
	app_service_ns: int = Field(0, ge=0)
	enforcement_ns: int = Field(3400, ge=0)

class Episode(_Model):
	""" Injected fault. ``crash`` kills the running agent incarnation at ``start_ns``;
		``slow`` keeps the agent alive but unresponsive for ``duration_ns``.
	"""
	kind: Literal['crash', 'slow']
	start_ns: int = Field(ge=0)
	duration_ns: int = Field(0, ge=0)

class ResourceCounts(_Model):
	threads: int = Field(8, ge=0)
	pages: int = Field(0, ge=0)
	flows: int = Field(0, ge=0)

class WorkloadConfig(_Model):
	""" Event streams that drive either protocol """
	mutation_rate_per_s: float = Field(0.0, ge=0)
	event_arrival_rate_per_s: float = Field(0.0, ge=0)
	loop: Literal['closed', 'open'] = 'closed'
	request_service_model: ServiceModel = Field(default_factory=ServiceModel)
	run_duration_ns: int = Field(20 * 10**6, gt=0)
	fault_episodes: List[Episode] = Field(default_factory=list)
	resource_counts: ResourceCounts = Field(default_factory=ResourceCounts)
	component_mix: Dict[Literal['scheduling', 'memory', 'rpc'], float] = Field(
		default_factory=lambda: {'scheduling': 1.0})
	pte_set_bytes: int = Field(4096, gt=0)

	@model_validator(mode='after')
	def _check(self):
		if self.loop == 'open' and self.event_arrival_rate_per_s <= 0:
			raise ValueError('open-loop workloads need event_arrival_rate_per_s > 0')
		if not self.component_mix or sum(self.component_mix.values()) <= 0:
			raise ValueError('component_mix needs at least one positive weight')
		for component, weight in self.component_mix.items():
			if weight < 0:
				raise ValueError('negative weight for component {}'.format(component))
			family = COMPONENT_RESOURCES[component]
			if weight > 0 and getattr(self.resource_counts, family) == 0:
				raise ValueError('component {} needs resource_counts.{} > 0'.format(component, family))

		# Episodes of the same kind must not overlap and must start inside the run
		for kind in ('crash', 'slow'):
			episodes = sorted((e for e in self.fault_episodes if e.kind == kind), key=lambda e: e.start_ns)
			for prev, nxt in zip(episodes, episodes[1:]):
				if nxt.start_ns < prev.start_ns + max(prev.duration_ns, 1):
					raise ValueError('overlapping {} episodes at {} ns'.format(kind, nxt.start_ns))
		for e in self.fault_episodes:
			if e.start_ns >= self.run_duration_ns:
				raise ValueError('episode at {} ns starts after the run ends'.format(e.start_ns))
		return self

	def fingerprint(self):
		""" Stable hash identifying the workload (used to pair traces) """
		blob = json.dumps(self.model_dump(mode='json'), sort_keys=True)
		return hashlib.sha256(blob.encode('utf-8')).hexdigest()[:16]

class TraceConfig(_Model):
	messages: bool = True

class ExperimentConfig(_Model):
	""" Everything needed to reproduce a run """
	mode: Literal['fito', 'bilateral', 'paired'] = 'fito'
	seed: int = Field(0, ge=0, lt=2**64)
	output_dir: str = 'fitosim-out'
	preset: Optional[str] = None
	latency: LatencyConfig = Field(default_factory=LatencyConfig)
	flags: OptimizationFlags = Field(default_factory=OptimizationFlags)
	protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
	workload: WorkloadConfig = Field(default_factory=WorkloadConfig)
	trace: TraceConfig = Field(default_factory=TraceConfig)

	@model_validator(mode='after')
	def _check_swap_window(self):
		# A swap reply has to be back before its frame closes
		if self.mode != 'fito' and 2 * self.latency.one_way_ns > self.latency.mmio_read_rtt_ns:
			raise ValueError('{} mode needs latency.one_way_ns <= mmio_read_rtt_ns / 2'.format(self.mode))
		return self

	def to_dict(self):
		return self.model_dump(mode='json')

	def to_yaml(self):
		return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

	def _explicit(self):
		# Derived latencies (one_way_ns, watchdog_tick_ns) are recomputed by copies
		return self.model_dump(mode='json', exclude_unset=True)

	def replace(self, **dotted):
		""" Return a copy with dotted-path fields replaced, e.g.
			``config.replace(**{'flags.wc_enabled': False})``
		"""
		data = self._explicit()
		for path, value in dotted.items():
			set_dotted(data, path, value)
		return validate(data)

	def with_flags(self, enabled):
		""" Copy with every optimization switched on or off """
		data = self._explicit()
		data['flags'] = OptimizationFlags.all(enabled).model_dump()
		return validate(data)

	def for_mode(self, mode):
		data = self._explicit()
		data['mode'] = mode
		return validate(data)

def list_presets():
	""" Names of the presets shipped with the package """
	return sorted(os.path.splitext(f)[0] for f in os.listdir(PRESET_DIR) if f.endswith('.yaml'))

def load_preset(name):
	""" Raw dictionary of a shipped preset """
	path = os.path.join(PRESET_DIR, '{}.yaml'.format(name))
	if not os.path.exists(path):
		raise ConfigError('Unknown preset {!r} (available: {})'.format(name, ', '.join(list_presets())),
						  field='preset')
	with open(path) as f:
		data = yaml.safe_load(f) or {}
	data['preset'] = name
	return data

def set_dotted(data, path, value):
	""" Set ``data['a']['b'] = value`` for ``path='a.b'``, creating dictionaries on the way """
	keys = path.split('.')
	node = data
	for key in keys[:-1]:
		child = node.get(key)
		if child is None:
			child = node[key] = {}
		elif not isinstance(child, dict):
			raise ConfigError('Cannot descend into non-mapping value', field=path)
		node = child
	node[keys[-1]] = value

def parse_override(text):
	""" Split ``dotted.path=value``. The value is parsed as YAML so numbers, booleans and
		lists keep their type.
	"""
	if '=' not in text:
		raise ConfigError('Override {!r} is not of the form dotted.path=value'.format(text))
	path, raw = text.split('=', 1)
	path = path.strip()
	try:
		value = yaml.safe_load(raw) if raw.strip() else None
	except yaml.YAMLError as err:
		raise ConfigError('Cannot parse value {!r}: {}'.format(raw, err), field=path)
	return path, value

def deep_merge(base, extra):
	""" Recursively merge ``extra`` into a copy of ``base`` """
	merged = copy.deepcopy(base)
	for key, value in extra.items():
		if isinstance(value, dict) and isinstance(merged.get(key), dict):
			merged[key] = deep_merge(merged[key], value)
		else:
			merged[key] = copy.deepcopy(value)
	return merged

def _line_of(text, loc):
	""" Line (1-based) where the field ``loc`` is defined in the YAML ``text`` """
	if text is None:
		return None
	try:
		node = yaml.compose(text)
	except yaml.YAMLError:
		return None

	line = None
	for key in loc:
		if isinstance(node, yaml.MappingNode):
			match = [(k, v) for k, v in node.value if k.value == str(key)]
			if not match:
				break
			node = match[0][1]
			line = match[0][0].start_mark.line + 1
		elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
			node = node.value[key]
			line = node.start_mark.line + 1
		else:
			break
	return line

def validate(data, source_text=None):
	""" Validate a raw dictionary into an :class:`ExperimentConfig`

		:param dict data: Raw configuration
		:param str source_text: YAML the data came from, used to report line numbers
		:return ExperimentConfig: The validated configuration
	"""
	try:
		return ExperimentConfig.model_validate(data)
	except ValidationError as err:
		first = err.errors()[0]
		loc   = [p for p in first['loc'] if not (isinstance(p, str) and p.startswith('function-'))]
		field = '.'.join(str(p) for p in loc) or None
		raise ConfigError(first['msg'], field=field, line=_line_of(source_text, loc))

def load_config(path=None, preset=None, overrides=(), seed=None, output_dir=None):
	""" Resolve an experiment configuration from its sources

		:param str path: YAML config file (optional)
		:param str preset: Preset name (optional; a ``preset:`` key in the file also works)
		:param list overrides: ``dotted.path=value`` strings
		:param int seed: Seed override
		:param str output_dir: Output directory override
		:return ExperimentConfig: The resolved configuration
	"""
	text, from_file = None, {}
	if path is not None:
		try:
			with open(path) as f:
				text = f.read()
		except OSError as err:
			raise ConfigError('Cannot read config file: {}'.format(err))
		try:
			from_file = yaml.safe_load(text) or {}
		except yaml.YAMLError as err:
			mark = getattr(err, 'problem_mark', None)
			raise ConfigError('Invalid YAML: {}'.format(err), line=mark.line + 1 if mark else None)
		if not isinstance(from_file, dict):
			raise ConfigError('Config file must contain a mapping at the top level')

	preset = preset or from_file.get('preset')
	data = load_preset(preset) if preset else {}
	data = deep_merge(data, from_file)
	if preset:
		data['preset'] = preset

	for item in overrides:
		key, value = parse_override(item) if isinstance(item, str) else item
		set_dotted(data, key, value)
	if seed is not None:
		data['seed'] = seed
	if output_dir is not None:
		data['output_dir'] = output_dir

	config = validate(data, source_text=text)
	log.debug('Resolved config (preset=%s, seed=%d)', config.preset, config.seed)
	return config

def numeric_field(config, path):
	""" Return the current value of a numeric field, rejecting anything else

		:param ExperimentConfig config: Resolved configuration
		:param str path: Dotted field path (e.g. ``workload.mutation_rate_per_s``)
	"""
	node = config
	for key in path.split('.'):
		if isinstance(node, BaseModel) and key in type(node).model_fields:
			node = getattr(node, key)
		elif isinstance(node, dict) and key in node:
			node = node[key]
		else:
			raise ConfigError('Unknown field', field=path)
	if isinstance(node, bool) or not isinstance(node, (int, float)):
		raise ConfigError('Field is not numeric (value {!r})'.format(node), field=path)
	return node
