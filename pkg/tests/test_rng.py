import numpy as np
from hypothesis import given, strategies as st

from ifsdim.rng import MASK64, Substream, mix64, raw_block, substream_key, uniform_block


def splitmix_reference(state, n):
    """Textbook sequential SplitMix64."""
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


def test_published_vectors():
    assert [int(v) for v in raw_block(0, 0, 2)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]
    assert [int(v) for v in raw_block(1234567, 0, 5)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423,
        4593380528125082431, 16408922859458223821,
    ]
    assert substream_key(0, 0) == 0x48218226FF3CD4BF


@given(st.integers(0, MASK64), st.integers(0, 1000))
def test_counter_matches_sequential(key, start):
    ref = splitmix_reference(key, start + 4)[start:]
    assert [int(v) for v in raw_block(key, start, 4)] == ref


@given(st.integers(0, MASK64))
def test_scalar_and_vector_mix_agree(z):
    ref = splitmix_reference((z - 0x9E3779B97F4A7C15) & MASK64, 1)[0]
    assert mix64(z) == ref


def test_uniforms_in_unit_interval_and_reproducible():
    a = Substream(3, 9).uniforms(10_000)
    b = Substream(3, 9).uniforms(10_000)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() < 1.0
    assert abs(a.mean() - 0.5) < 0.02


def test_substreams_differ():
    assert not np.array_equal(Substream(0, 0).uniforms(16), Substream(0, 1).uniforms(16))
    assert not np.array_equal(Substream(0, 0).uniforms(16), Substream(1, 0).uniforms(16))


def test_blocks_are_position_addressed():
    key = substream_key(5, 2)
    whole = uniform_block(key, 0, 100)
    assert np.array_equal(whole[40:60], uniform_block(key, 40, 20))


def test_choice_without_replacement():
    pick = Substream(1, 0).choice_without_replacement(50, 20)
    assert len(set(pick.tolist())) == 20
    assert pick.min() >= 0 and pick.max() < 50
