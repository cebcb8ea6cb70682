import numpy as np

from persistlab.rng import BLOCK_TRIALS, GENERATOR_ID, block_sizes, map_blocks, stream, tag_of


def _draw(gen, rows):
    return gen.standard_normal((rows, 3))


def test_stream_is_deterministic_and_tag_separated():
    a = stream(7, 1, 2).standard_normal(5)
    np.testing.assert_array_equal(a, stream(7, 1, 2).standard_normal(5))
    assert not np.allclose(a, stream(7, 1, 3).standard_normal(5))
    assert not np.allclose(a, stream(8, 1, 2).standard_normal(5))


def test_block_sizes():
    assert block_sizes(0) == []
    assert block_sizes(BLOCK_TRIALS) == [BLOCK_TRIALS]
    assert block_sizes(BLOCK_TRIALS + 3) == [BLOCK_TRIALS, 3]


def test_workers_do_not_change_results():
    one = np.vstack(map_blocks(_draw, 11, 1000, tags=(4,), workers=1))
    four = np.vstack(map_blocks(_draw, 11, 1000, tags=(4,), workers=4))
    np.testing.assert_array_equal(one, four)


def test_trial_prefix_stable():
    # trial i lives in block i // BLOCK_TRIALS whatever the total
    small = np.vstack(map_blocks(_draw, 5, 300))
    big = np.vstack(map_blocks(_draw, 5, 900))
    np.testing.assert_array_equal(small[:BLOCK_TRIALS], big[:BLOCK_TRIALS])


def test_tag_of_stable():
    assert tag_of("sinai") == tag_of("sinai")
    assert tag_of("a") != tag_of("b")
    assert 0 <= tag_of("a long label that is truncated") < 2**31
    assert GENERATOR_ID.startswith("philox")
