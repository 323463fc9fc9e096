import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from gsc_dw import rng


def test_splitmix_reference_stream():
    # published SplitMix64 outputs for state 0
    assert [rng.draw(0, t) for t in range(2)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]


@given(st.integers(0, 2**63), st.lists(st.integers(0, 10**6), min_size=1, max_size=20))
def test_array_matches_scalar(seed, trials):
    keys = rng.stream_keys(seed, np.array(trials))
    assert keys.tolist() == [rng.stream_key(seed, t) for t in trials]
    draws = rng.draw_array(keys, 7)
    assert draws.tolist() == [rng.draw(k, 7) for k in keys.tolist()]
    for n in (1, 3, 1000):
        b = rng.bounded_array(draws, n)
        assert b.tolist() == [rng.bounded(int(u), n) for u in draws.tolist()]
        assert np.all(b < n)


def test_streams_are_order_independent():
    all_keys = rng.stream_keys(11, 100)
    np.testing.assert_array_equal(rng.stream_keys(11, np.arange(40, 60)), all_keys[40:60])
    assert len(set(all_keys.tolist())) == 100
    assert not np.array_equal(rng.stream_keys(12, 100), all_keys)


def test_bounded_is_roughly_uniform():
    u = rng.draw_array(rng.stream_keys(3, 60_000), 0)
    counts = np.bincount(rng.bounded_array(u, 6).astype(np.int64), minlength=6)
    assert np.all(np.abs(counts - 10_000) < 500)
