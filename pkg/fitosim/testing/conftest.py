import pytest

from fitosim import trace as tr
from fitosim.config import ExperimentConfig, LatencyConfig, ResourceCounts
from fitosim.engine import Engine
from fitosim.host import HostKernel
from fitosim.interconnect import Interconnect
from fitosim.trace import Trace

# Short runs keep the suite fast; 2 ms is several hundred decisions
SHORT_RUN_NS = 2 * 10**6

def make_config(**dotted):
	""" Default configuration with dotted-path overrides, e.g.
		``make_config(**{'flags.wc_enabled': False})``
	"""
	dotted.setdefault('workload.run_duration_ns', SHORT_RUN_NS)
	return ExperimentConfig().replace(**dotted)

def overheads(result):
	return [r.get('overhead_ns') for r in result.trace.of_kind(tr.REQUEST_COMPLETE) if r.get('status') == 'ok']

@pytest.fixture
def engine():
	return Engine(seed=7)

@pytest.fixture
def trace(engine):
	return Trace(engine)

@pytest.fixture
def latency():
	return LatencyConfig()

@pytest.fixture
def link(engine, trace, latency):
	return Interconnect(engine, trace, latency)

@pytest.fixture
def host(engine, trace):
	return HostKernel(engine, trace, ResourceCounts(threads=4, pages=2, flows=0))

@pytest.fixture
def config():
	return make_config()
