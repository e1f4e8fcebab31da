from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affectfuse.ingest import AudioClip
from affectfuse.seqmap import (
    FUNCTIONALS,
    FeatureSequence,
    build_column_map,
    maps_for_clip,
    maps_from_sequence,
    pad_columns,
    pad_min_length,
    pad_tile_sequence,
    padded_width,
    read_map_binary,
    summarize_holistic,
    tile_map,
    write_map_binary,
)

import oracles


def _seq(n, rng=None, cid="c"):
    rng = rng or np.random.default_rng(n)
    return FeatureSequence(cid, rng.normal(size=(n, 34)))


class TestPadMinLength:
    def test_long_unchanged(self):
        s = _seq(19)
        assert pad_min_length(s) is s

    def test_short_replicates_last(self):
        s = _seq(10)
        p = pad_min_length(s)
        assert len(p) == 16 and p.original_length == 10
        np.testing.assert_array_equal(p.vectors[:10], s.vectors)
        for k in range(10, 16):
            np.testing.assert_array_equal(p.vectors[k], s.vectors[9])

    def test_boundary(self):
        s = _seq(16)
        assert len(pad_min_length(s)) == 16

    @given(st.integers(1, 40), st.integers(1, 40))
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, n, m):
        once = pad_min_length(_seq(n), m)
        twice = pad_min_length(once, m)
        np.testing.assert_array_equal(once.vectors, twice.vectors)
        assert len(once) == max(n, m)


class TestHolistic:
    def test_constant(self):
        s = FeatureSequence("c", np.tile(np.arange(34.0), (7, 1)))
        h = summarize_holistic(s)
        vals = h.values.reshape(10, 34)
        names = list(h.functional_names)
        assert len(h.values) == 340
        assert np.all(vals[names.index("std")] == 0) and np.all(vals[names.index("range")] == 0)
        for f in ("min", "max", "mean"):
            np.testing.assert_array_equal(vals[names.index(f)], np.arange(34.0))

    def test_two_vectors_mean(self, rng):
        a, b = rng.normal(size=34), rng.normal(size=34)
        h = summarize_holistic(FeatureSequence("c", np.stack([a, b])), ["mean"])
        np.testing.assert_allclose(h.values, (a + b) / 2, rtol=0, atol=1e-15)

    def test_against_recomputation(self, rng):
        s = FeatureSequence("c", rng.normal(size=(50, 34)) * rng.uniform(0.1, 10, 34))
        h = summarize_holistic(s)
        for fi, name in enumerate(h.functional_names):
            for d in range(34):
                ref = oracles.functional(name, list(s.vectors[:, d]))
                assert abs(h.values[fi * 34 + d] - ref) < 1e-9, (name, d)

    def test_ignores_padding(self, rng):
        s = _seq(5, rng)
        np.testing.assert_array_equal(summarize_holistic(pad_min_length(s)).values, summarize_holistic(s).values)

    def test_unknown_functional(self):
        with pytest.raises(ValueError, match="bogus"):
            summarize_holistic(_seq(3), ["mean", "bogus"])

    def test_default_set(self):
        assert len(FUNCTIONALS) == 10


class TestColumnMap:
    def test_shapes(self):
        s = _seq(19)
        m = build_column_map(s)
        assert m.shape == (34, 19)
        np.testing.assert_array_equal(m[:, 0], s.vectors[0])

    def test_single_frame(self):
        s = _seq(1)
        np.testing.assert_array_equal(build_column_map(s)[:, 0], s.vectors[0])

    @pytest.mark.parametrize("n,expected", [(19, 34), (60, 68), (170, 170), (1, 34), (34, 34), (35, 51)])
    def test_padded_width(self, n, expected):
        padded, width = pad_columns(np.zeros((34, n)))
        assert width == expected == padded.shape[1]

    def test_pad_replicates_last_column(self, rng):
        m = rng.normal(size=(34, 60))
        padded, _ = pad_columns(m)
        np.testing.assert_array_equal(padded[:, :60], m)
        for j in range(60, 68):
            np.testing.assert_array_equal(padded[:, j], m[:, -1])

    def test_no_pad_returns_same(self):
        m = np.zeros((34, 170))
        padded, _ = pad_columns(m)
        assert padded is m

    @given(st.integers(1, 2000))
    def test_width_properties(self, n):
        w = padded_width(n)
        assert w % 17 == 0 and w >= 34 and w >= n
        if n >= 34:
            assert w - n < 17


class TestTiles:
    @pytest.mark.parametrize("width,count", [(34, 1), (68, 3), (170, 9)])
    def test_counts(self, width, count):
        assert len(tile_map(np.zeros((34, width)))) == count == (width - 17) // 17

    def test_overlap(self, rng):
        m = rng.normal(size=(34, 170))
        tiles = tile_map(m)
        np.testing.assert_array_equal(tiles[1], m[:, 17:51])
        np.testing.assert_array_equal(tiles[0][:, 17:], tiles[1][:, :17])

    def test_reconstruct_columns(self, rng):
        m = rng.normal(size=(34, 119))
        tiles = tile_map(m)
        for c in range(119):
            for t, tile in enumerate(tiles):
                if 17 * t <= c < 17 * t + 34:
                    np.testing.assert_array_equal(tile[:, c - 17 * t], m[:, c])

    @pytest.mark.parametrize("width", [33, 40, 17])
    def test_bad_width(self, width):
        with pytest.raises(ValueError):
            tile_map(np.zeros((34, width)))

    def test_pad_sequence(self, rng):
        tiles = [rng.normal(size=(34, 34)) for _ in range(3)]
        seq = pad_tile_sequence(tiles)
        assert len(seq) == 8 and seq.pre_pad_tile_count == 3
        for k in range(3, 8):
            np.testing.assert_array_equal(seq.tiles[k], tiles[2])

    @pytest.mark.parametrize("count", [8, 9])
    def test_pad_sequence_long(self, count):
        assert len(pad_tile_sequence([np.zeros((34, 34))] * count)) == count

    def test_pad_sequence_idempotent(self, rng):
        once = pad_tile_sequence([rng.normal(size=(34, 34)) for _ in range(2)])
        twice = pad_tile_sequence(list(once.tiles))
        np.testing.assert_array_equal(once.tiles, twice.tiles)

    def test_pad_sequence_empty(self):
        with pytest.raises(ValueError):
            pad_tile_sequence([])


class TestMapsForClip:
    def test_one_second(self, rng):
        seq = maps_for_clip(AudioClip("c", rng.normal(size=16000) * 0.1, 16000))
        assert len(seq) == 8 and seq.pre_pad_tile_count == 1
        assert all(np.array_equal(seq.tiles[0], t) for t in seq.tiles)

    @pytest.mark.parametrize("n,tiles,data_tiles", [(170, 9, 9), (60, 8, 3), (19, 8, 1), (500, 29, 29)])
    def test_from_sequence(self, n, tiles, data_tiles):
        s = _seq(n)
        maps = maps_from_sequence(s)
        assert len(maps) == tiles and maps.pre_pad_tile_count == data_tiles
        assert maps.pre_pad_tile_count == (padded_width(n) - 17) // 17
        for k in range(data_tiles, tiles):
            np.testing.assert_array_equal(maps.tiles[k], maps.tiles[data_tiles - 1])

    def test_uses_unpadded_sequence(self):
        s = _seq(10)
        a = maps_from_sequence(s)
        b = maps_from_sequence(pad_min_length(s))
        np.testing.assert_array_equal(a.tiles, b.tiles)

    def test_binary_round_trip(self, tmp_path):
        maps = maps_from_sequence(_seq(60))
        write_map_binary(tmp_path / "m.afm", maps)
        raw = (tmp_path / "m.afm").read_bytes()
        assert raw[:4] == b"AFM1" and int.from_bytes(raw[4:8], "little") == 8
        np.testing.assert_allclose(read_map_binary(tmp_path / "m.afm"), maps.tiles.astype(np.float32))
