import numpy as np
import pytest
from conftest import make_scenario
from hypothesis import given, settings
from hypothesis import strategies as st

from mapfsel.features import (NUM_CHANNELS, PAD_VALUES, AugmentDecision, FeatureTensor, RescaleError,
                              RescaleSpec, apply_augment, apply_stats, assemble, augment, crop,
                              expand_group_specs, fit_stats, rescale, read_tensor, sample_augment,
                              write_tensor)
from mapfsel.grid import Grid


def tensor(h, w, rng, blocked=None):
    obst = np.zeros((h, w), bool) if blocked is None else np.asarray(blocked, bool)
    chans = rng.random((NUM_CHANNELS, h, w)) * 10
    chans[0] = obst
    for ch in (1, 2, 3, 4, 5, 6):
        chans[ch][obst] = 0
    return FeatureTensor(chans, obstacle=obst)


def normalized(h, w, rng, blocked=None):
    t = tensor(h, w, rng, blocked)
    return apply_stats(t, fit_stats([t]))


class TestAssemble:
    def test_channels_of_a_tiny_scenario(self):
        sc = make_scenario(["..", "@."], [((0, 0), (1, 1))])
        t = assemble(sc)
        assert t.channels.shape == (7, 2, 2) and not t.normalized
        assert t.channels[0].tolist() == [[0, 0], [1, 0]]
        assert t.channels[1].tolist() == [[1, 0], [0, 0]]
        assert t.channels[2].tolist() == [[0, 0], [0, 1]]
        assert t.channels[3].tolist() == [[1, 1], [0, 1]]
        assert not t.channels[4].any() and not t.channels[5].any()
        assert t.channels[6].tolist() == [[1, 1], [0, 1]]


class TestNormalization:
    def test_max_maps_to_100(self, rng):
        ts = [tensor(4, 5, rng, rng.random((4, 5)) < 0.3) for _ in range(3)]
        stats = fit_stats(ts)
        for t in ts:
            out = apply_stats(t, stats).channels
            free = ~t.obstacle
            for ch in (1, 2, 4, 5):
                assert out[ch][free].max() <= 100 + 1e-9
        top = max(float(t.channels[3][~t.obstacle].max()) for t in ts)
        assert top == stats.maxima[3]
        assert max(apply_stats(t, stats).channels[3][~t.obstacle].max() for t in ts) == pytest.approx(100)

    def test_all_zero_channel_stays_zero(self, rng):
        t = tensor(3, 3, rng)
        t.channels[4] = 0
        out = apply_stats(t, fit_stats([t])).channels
        assert not out[4].any() and np.isfinite(out).all()

    def test_obstacle_values(self, rng):
        blocked = [[1, 0, 0], [0, 0, 0], [0, 0, 1]]
        out = normalized(3, 3, rng, blocked).channels
        obst = np.asarray(blocked, bool)
        assert (out[0][obst] == 100).all() and (out[0][~obst] == 0).all()
        for ch in (3, 6):
            assert (out[ch][obst] == 200).all()
        for ch in (1, 2, 4, 5):
            assert (out[ch][obst] == 0).all()

    def test_fit_needs_data(self):
        with pytest.raises(ValueError):
            fit_stats([])


class TestRescale:
    def test_pad_2x2_into_4(self, rng):
        t = normalized(2, 2, rng)
        out = rescale(t, RescaleSpec("ppppppp", 4))
        assert out.shape == (7, 4, 4)
        for ch in range(7):
            assert np.array_equal(out[ch, 1:3, 1:3], t.channels[ch])
            border = np.ones((4, 4), bool)
            border[1:3, 1:3] = False
            assert (out[ch][border] == PAD_VALUES[ch]).all()
        assert (out[3][0] == 200).all() and (out[0][0] == 100).all()

    def test_odd_padding_goes_bottom_right(self, rng):
        t = normalized(1, 2, rng)
        out = rescale(t, RescaleSpec("ppppppp", 4))
        assert np.array_equal(out[:, 1:2, 1:3], t.channels)

    def test_spec_parsing(self):
        assert RescaleSpec.parse("ppp rrrp").methods == "ppprrrp"
        assert RescaleSpec.parse("PPPRRRP").interp_channels == (3, 4, 5)
        for bad in ("ppp", "pppxrrp", "pppprrrp"):
            with pytest.raises(ValueError):
                RescaleSpec.parse(bad)

    def test_oversized_map_with_padding_fails(self, rng):
        with pytest.raises(RescaleError):
            rescale(normalized(5, 3, rng), RescaleSpec("ppprrrp", 4))
        assert rescale(normalized(5, 3, rng), RescaleSpec("rrrrrrr", 4)).shape == (7, 4, 4)

    @given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 12), st.floats(0, 200))
    def test_constant_plane_stays_constant(self, h, w, target, value):
        t = FeatureTensor(np.full((7, h, w), value), normalized=True, obstacle=np.zeros((h, w), bool))
        out = rescale(t, RescaleSpec("rrrrrrr", target))
        assert np.allclose(out, value)

    @settings(max_examples=50)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 6), st.integers(0, 2 ** 31))
    def test_crop_inverts_padding(self, h, w, extra, seed):
        target = max(h, w) + extra
        t = normalized(h, w, np.random.default_rng(seed))
        out = rescale(t, RescaleSpec("ppppppp", target))
        assert np.array_equal(crop(out, h, w), t.channels)

    def test_identity_resize(self, rng):
        t = normalized(4, 4, rng)
        assert np.array_equal(rescale(t, RescaleSpec("rrrrrrr", 4)), t.channels)

    def test_group_specs(self):
        specs = expand_group_specs()
        assert len(specs) == len(set(specs)) == 16
        assert "ppprrrp" in specs and "ppppppp" in specs and "rrrrrrr" in specs
        for s in specs:
            assert s[0] == s[1] == s[2] and s[4] == s[5]


class TestAugment:
    def square(self, side, rng):
        return rescale(normalized(side, side, rng, rng.random((side, side)) < 0.3), RescaleSpec("ppppppp", side))

    def test_identity(self, rng):
        x = self.square(5, rng)
        assert np.array_equal(apply_augment(x, AugmentDecision()), x)
        assert np.array_equal(augment(x, rng, p=0.0), x)

    def test_flip_is_involution(self, rng):
        x = self.square(5, rng)
        once = apply_augment(x, AugmentDecision(flip=True))
        assert np.array_equal(apply_augment(once, AugmentDecision(flip=True)), x)

    def test_four_rotations(self, rng):
        x = self.square(4, rng)
        y = apply_augment(apply_augment(x, AugmentDecision(rotations=1)), AugmentDecision(rotations=3))
        assert np.array_equal(y, x)

    def test_erase_fills_pad_values(self, rng):
        x = self.square(6, rng)
        y = apply_augment(x, AugmentDecision(erase=(1, 2, 3, 2)))
        for ch in range(7):
            assert (y[ch, 1:4, 2:4] == PAD_VALUES[ch]).all()
        mask = np.ones((6, 6), bool)
        mask[1:4, 2:4] = False
        assert np.array_equal(y[:, mask], x[:, mask])

    @settings(max_examples=50)
    @given(st.integers(2, 8), st.integers(0, 2 ** 31))
    def test_flip_rotate_preserve_values(self, side, seed):
        rng = np.random.default_rng(seed)
        x = self.square(side, rng)
        d = sample_augment(side, rng, p=0.7)
        y = apply_augment(x, AugmentDecision(d.flip, d.rotations))
        assert y.shape == x.shape
        for ch in range(7):
            assert np.array_equal(np.sort(y[ch], axis=None), np.sort(x[ch], axis=None))
        assert set(np.unique(augment(x, rng, 1.0)[0])) <= {0.0, 100.0}
        assert 0 <= d.rotations <= 3

    def test_sampled_rotations_are_nontrivial(self):
        rng = np.random.default_rng(5)
        ks = {sample_augment(8, rng, p=1.0).rotations for _ in range(200)}
        assert ks == {1, 2, 3}

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            apply_augment(np.zeros((7, 2, 3)), AugmentDecision(flip=True))


class TestExport:
    def test_round_trip(self, tmp_path, rng):
        x = rescale(normalized(3, 3, rng), RescaleSpec("ppprrrp", 5))
        write_tensor(tmp_path / "x.bin", x)
        assert (tmp_path / "x.bin").stat().st_size == 7 * 5 * 5 * 4
        assert np.array_equal(read_tensor(tmp_path / "x.bin", 5), x.astype(np.float32))

    def test_pipeline_is_deterministic(self, tmp_path):
        sc = make_scenario(Grid.from_rows(["....", ".@..", "...."]), [((0, 0), (2, 3)), ((2, 0), (0, 3))])
        blobs = []
        for k in range(2):
            t = assemble(sc)
            x = rescale(apply_stats(t, fit_stats([t])), RescaleSpec("ppprrrp", 8))
            write_tensor(tmp_path / f"{k}.bin", x)
            blobs.append((tmp_path / f"{k}.bin").read_bytes())
        assert blobs[0] == blobs[1]


def test_erasing_leaves_input_untouched(rng):
    x = rng.random((7, 4, 4))
    before = x.copy()
    apply_augment(x, AugmentDecision(erase=(0, 0, 2, 2)))
    assert np.array_equal(x, before)
