import pytest

from fitosim.engine import Engine
from fitosim.errors import SimulationError

def record_into(engine, target, seen):
	engine.register(target, lambda ev: seen.append((engine.now(), ev.payload)))

def test_events_fire_in_time_then_insertion_order(engine):
	seen = []
	record_into(engine, 'sink', seen)
	engine.schedule(500, 'sink', 'b')
	engine.schedule(100, 'sink', 'a')
	engine.schedule(500, 'sink', 'c')
	engine.run_until(1000)
	assert seen == [(100, 'a'), (500, 'b'), (500, 'c')]
	assert engine.now() == 1000

def test_zero_delay_runs_after_the_current_event(engine):
	seen = []
	def first(ev):
		engine.schedule(0, 'sink', 'follow-up')
		seen.append((engine.now(), ev.payload))
	engine.register('first', first)
	record_into(engine, 'sink', seen)
	engine.schedule(10, 'first', 'first')
	engine.schedule(10, 'sink', 'queued-before')
	engine.run_until(10)
	assert seen == [(10, 'first'), (10, 'queued-before'), (10, 'follow-up')]

def test_run_until_is_inclusive_and_keeps_later_events(engine):
	seen = []
	record_into(engine, 'sink', seen)
	engine.schedule(100, 'sink', 1)
	engine.schedule(101, 'sink', 2)
	assert engine.run_until(100) == 1
	assert engine.pending == 1
	engine.run_until(200)
	assert [p for _, p in seen] == [1, 2]

def test_cancelled_events_are_skipped(engine):
	seen = []
	record_into(engine, 'sink', seen)
	handle = engine.schedule(50, 'sink', 'cancelled')
	engine.schedule(60, 'sink', 'kept')
	engine.cancel(handle)
	engine.run_until(100)
	assert [p for _, p in seen] == ['kept']
	assert engine.scheduled == engine.dispatched + engine.cancelled + engine.pending

def test_negative_delay_and_past_deadline_are_rejected(engine):
	engine.register('sink', lambda ev: None)
	with pytest.raises(SimulationError):
		engine.schedule(-1, 'sink')
	engine.run_until(100)
	with pytest.raises(SimulationError):
		engine.run_until(50)

def test_handler_failure_names_the_event(engine):
	def broken(ev):
		raise KeyError('boom')
	engine.register('broken', broken)
	engine.schedule(750, 'broken')
	with pytest.raises(SimulationError) as info:
		engine.run_until(1000)
	assert info.value.event.fire_at == 750
	assert info.value.event.target == 'broken'
	assert 'KeyError' in str(info.value)

def test_missing_handler_and_double_registration(engine):
	engine.schedule(1, 'nobody')
	with pytest.raises(SimulationError):
		engine.run_until(10)
	engine.register('x', lambda ev: None)
	with pytest.raises(SimulationError):
		engine.register('x', lambda ev: None)

def test_finished_engine_rejects_scheduling(engine):
	engine.register('sink', lambda ev: None)
	engine.finish()
	with pytest.raises(SimulationError):
		engine.schedule(1, 'sink')

def test_named_streams_are_independent_of_request_order():
	a, b = Engine(seed=42), Engine(seed=42)
	first = a.rng('mutations').integers(0, 10**9, size=5).tolist()
	b.rng('triggers-0').random(100)
	second = b.rng('mutations').integers(0, 10**9, size=5).tolist()
	assert first == second

def test_streams_differ_across_names_and_seeds():
	e = Engine(seed=1)
	x = e.rng('a').random(4).tolist()
	y = e.rng('b').random(4).tolist()
	z = Engine(seed=2).rng('a').random(4).tolist()
	assert x != y
	assert x != z
	assert e.rng('a') is e.rng('a')

if __name__ == '__main__':
	pytest.main(['test_engine.py'])
