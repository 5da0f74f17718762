from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fishlab.detector import FrequencySketch
from fishlab.errors import EmptySketchError
from oracles import exact_count

keys_st = st.lists(st.integers(min_value=0, max_value=40).map(lambda i: str(i).encode()), max_size=600)


def _counts(sk: FrequencySketch) -> dict[bytes, float]:
    return dict(sk.entries)


def test_inserts_below_capacity():
    sk = FrequencySketch(capacity=2)
    for k in (b"a", b"a", b"b"):
        sk.observe(k)
    assert _counts(sk) == {b"a": 2, b"b": 1}


def test_replace_min_inherits_count():
    sk = FrequencySketch(capacity=2)
    for k in (b"a", b"a", b"b"):
        sk.observe(k)
    assert sk.observe(b"c") == b"b"
    assert _counts(sk) == {b"a": 2, b"c": 2}


def test_replace_min_tie_evicts_oldest_insert():
    sk = FrequencySketch(capacity=2)
    for k in (b"a", b"b"):
        sk.observe(k)
    assert sk.observe(b"c") == b"a"


def test_decay_runs_before_counting():
    sk = FrequencySketch(capacity=4, epoch_size=3, alpha=0.5)
    for _ in range(4):
        sk.observe(b"a")
    assert _counts(sk) == {b"a": 2.5}
    assert sk.decays == 1


def test_decay_scales_counters_and_mass():
    sk = FrequencySketch(capacity=4, alpha=0.2, entries={b"a": 10.0, b"b": 4.0}, total_mass=14.0)
    sk.decay_epoch()
    assert sk.entries[b"a"] == pytest.approx(2.0)
    assert sk.entries[b"b"] == pytest.approx(0.8)
    assert sk.total_mass == pytest.approx(2.8)


def test_decay_identity_and_annihilation():
    one = FrequencySketch(alpha=1.0, entries={b"a": 3.0}, total_mass=3.0)
    zero = FrequencySketch(alpha=0.0, entries={b"a": 3.0}, total_mass=3.0)
    for sk in (one, zero):
        sk.decay_epoch()
    assert one.entries == {b"a": 3.0} and one.total_mass == 3.0
    assert zero.entries == {b"a": 0.0} and zero.total_mass == 0.0


def test_frequency_examples():
    sk = FrequencySketch(entries={b"a": 2.0, b"b": 0.8}, total_mass=2.8)
    assert sk.frequency(b"a") == pytest.approx(2.0 / 2.8, abs=1e-9)
    assert round(sk.frequency(b"a"), 3) == 0.714
    assert sk.frequency(b"zzz") is None


def test_frequency_of_sole_entry():
    sk = FrequencySketch()
    for _ in range(5):
        sk.observe(b"a")
    assert sk.frequency(b"a") == 1.0
    assert sk.top_frequency() == 1.0


def test_top_frequency():
    sk = FrequencySketch(entries={b"a": 2.0, b"b": 0.8}, total_mass=2.8)
    assert round(sk.top_frequency(), 3) == 0.714


def test_top_frequency_empty():
    with pytest.raises(EmptySketchError):
        FrequencySketch().top_frequency()


def test_frequency_zero_mass_after_full_decay():
    sk = FrequencySketch(epoch_size=1, alpha=0.0)
    sk.observe(b"a")
    sk.decay_epoch()
    assert sk.frequency(b"a") == 0.0


@pytest.mark.parametrize("kwargs", [{"capacity": 0}, {"epoch_size": 0}, {"alpha": 1.5}, {"alpha": -0.1}])
def test_invalid_parameters(kwargs):
    with pytest.raises(ValueError):
        FrequencySketch(**kwargs)


@settings(max_examples=150, deadline=None)
@given(stream=keys_st, capacity=st.sampled_from([1, 3, 8, 64]), epoch=st.integers(1, 50),
       alpha=st.sampled_from([0.0, 0.2, 0.5, 1.0]))
def test_size_bound_and_decay_count(stream, capacity, epoch, alpha):
    sk = FrequencySketch(capacity=capacity, epoch_size=epoch, alpha=alpha)
    for k in stream:
        sk.observe(k)
        assert len(sk.entries) <= capacity
        assert 0 <= sk.tuples_in_epoch <= epoch
        assert sk.total_mass >= 0
    assert sk.decays == (max(len(stream) - 1, 0)) // epoch


def _min_at_insertion_run(stream: list[bytes], capacity: int) -> tuple[FrequencySketch, dict[bytes, float]]:
    sk = FrequencySketch(capacity=capacity, alpha=1.0)
    inherited: dict[bytes, float] = {}
    for k in stream:
        if k not in sk:
            inherited[k] = sk.min_count() if len(sk) >= capacity else 0.0
        sk.observe(k)
    return sk, inherited


@settings(max_examples=150, deadline=None)
@given(stream=keys_st, capacity=st.sampled_from([2, 8, 64]))
def test_overcount_bound_without_decay(stream, capacity):
    sk, inherited = _min_at_insertion_run(stream, capacity)
    truth = exact_count(stream)
    for k, c in sk.entries.items():
        assert truth[k] <= c <= truth[k] + inherited[k]


@settings(max_examples=100, deadline=None)
@given(stream=keys_st)
def test_exact_when_capacity_covers_keys(stream):
    sk = FrequencySketch(capacity=64, alpha=1.0)
    for k in stream:
        sk.observe(k)
    assert _counts(sk) == dict(exact_count(stream))


def test_overcount_bound_on_zipf_streams():
    rng = random.Random(0)
    keys = [str(i).encode() for i in range(300)]
    weights = [1 / (i + 1) for i in range(300)]
    for capacity in (8, 64):
        stream = rng.choices(keys, weights=weights, k=10_000)
        sk, inherited = _min_at_insertion_run(stream, capacity)
        truth = exact_count(stream)
        for k, c in sk.entries.items():
            assert truth[k] <= c <= truth[k] + inherited[k]
