"""Tests for derived random streams."""

from __future__ import annotations

import numpy as np
import pytest

from bprelab.streams import ReplicaStreams, as_streams, concat_blocks, derived_generator, tag_key


def _draws(streams: ReplicaStreams, n: int) -> np.ndarray:
    return concat_blocks(streams.map_blocks(lambda g, size: g.random(size), n))


class TestReplicaStreams:
    def test_blocks_partition(self):
        streams = ReplicaStreams(1, block_size=4)
        assert streams.blocks(10) == [(0, 4), (1, 4), (2, 2)]
        assert streams.blocks(8) == [(0, 4), (1, 4)]
        assert streams.blocks(0) == []

    def test_workers_do_not_change_draws(self):
        one = _draws(ReplicaStreams(7, "t", block_size=16, workers=1), 100)
        many = _draws(ReplicaStreams(7, "t", block_size=16, workers=4), 100)
        np.testing.assert_array_equal(one, many)

    def test_tags_and_seeds_separate_streams(self):
        base = _draws(ReplicaStreams(7, "a"), 10)
        assert not np.array_equal(base, _draws(ReplicaStreams(7, "b"), 10))
        assert not np.array_equal(base, _draws(ReplicaStreams(8, "a"), 10))

    def test_child(self):
        parent = ReplicaStreams(7, "run", block_size=32, workers=2)
        child = parent.child("sigma2")
        assert child.tag == "run/sigma2"
        assert (child.block_size, child.workers) == (32, 2)
        assert not np.array_equal(_draws(parent, 5), _draws(child, 5))

    def test_blocks_are_independent_of_count(self):
        # the first block is the same whether 10 or 100 replicas are asked for
        streams = ReplicaStreams(3, block_size=10)
        np.testing.assert_array_equal(_draws(streams, 10), _draws(streams, 100)[:10])

    @pytest.mark.parametrize("kwargs", [{"root_seed": -1}, {"root_seed": 2**64}, {"root_seed": 1, "block_size": 0}, {"root_seed": 1, "workers": 0}])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ReplicaStreams(**kwargs)


class TestHelpers:
    def test_tag_key_is_stable(self):
        assert tag_key("survival") == tag_key("survival")
        assert 0 <= tag_key("survival") < 2**32
        assert tag_key("survival") != tag_key("tau-tail")

    def test_derived_generator(self):
        a = derived_generator(5, "x", 2).random(3)
        b = derived_generator(5, "x", 2).random(3)
        np.testing.assert_array_equal(a, b)

    def test_as_streams(self):
        streams = ReplicaStreams(9, "keep")
        assert as_streams(streams, "other") is streams
        assert as_streams(4, "tag") == ReplicaStreams(4, "tag")
        assert as_streams(None, "tag").root_seed == 0

    def test_concat_empty(self):
        assert concat_blocks([]).size == 0
