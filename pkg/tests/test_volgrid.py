import json
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medevalkit.errors import NoAdmissibleVolumes, ValidationError
from medevalkit.volgrid import (
    CT_WINDOWS,
    DegenerateVolumeWarning,
    StackCriteria,
    VoxelVolume,
    decode_png,
    filter_volumes,
    normalize_mr_volume,
    read_study,
    render_sequence,
    sample_equidistant,
    vision_token_count,
    window_ct_slice,
    write_sequence,
    write_volume,
    zstack,
)


def hand_window(v, lo, hi):
    """Exact rational oracle: round-half-up of 255 * clamp((v - lo) / (hi - lo))."""
    t = (Fraction(v) - Fraction(lo)) / (Fraction(hi) - Fraction(lo))
    t = min(max(t, Fraction(0)), Fraction(1))
    x = 255 * t
    return int(x + Fraction(1, 2)) if x >= 0 else 0


def ct(series_id="S", n=6, h=8, w=8, fill=0, thickness=None, orientation="AXIAL"):
    vox = np.full((n, h, w), fill, dtype=np.int16)
    return VoxelVolume(series_id, "CT", vox, slice_thickness_mm=thickness or [1.0] * n,
                       orientation=orientation)


class TestWindowing:
    @pytest.mark.parametrize("channel, hu, expected", [
        (0, -1024, 0), (0, 1024, 255),
        (1, -135, 0), (1, 215, 255),
        (2, 0, 0), (2, 80, 255),
        (1, 40, 128),
    ])
    def test_channel_endpoints_and_midpoint(self, channel, hu, expected):
        out = window_ct_slice(np.array([[hu]], dtype=float))
        assert out[0, 0, channel] == expected

    def test_saturation(self):
        assert window_ct_slice(np.array([[3000.0]]))[0, 0].tolist() == [255, 255, 255]
        assert window_ct_slice(np.array([[-3000.0]]))[0, 0].tolist() == [0, 0, 0]

    def test_matches_rational_oracle(self):
        hu = np.arange(-1100, 1100, 7, dtype=float).reshape(1, -1)
        out = window_ct_slice(hu)
        for c, w in enumerate(CT_WINDOWS):
            expected = [hand_window(int(v), w.lo_hu, w.hi_hu) for v in hu[0]]
            assert out[0, :, c].tolist() == expected

    def test_non_finite_names_position(self):
        hu = np.zeros((3, 4))
        hu[2, 1] = np.nan
        with pytest.raises(ValidationError, match=r"\(2, 1\)"):
            window_ct_slice(hu)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-5000, 5000), min_size=2, max_size=50))
    def test_monotone_and_clamped(self, values):
        v = np.sort(np.array(values))[None, :]
        out = window_ct_slice(v).astype(int)
        assert (np.diff(out[0], axis=0) >= 0).all()
        for c, w in enumerate(CT_WINDOWS):
            assert (out[0, v[0] <= w.lo_hu, c] == 0).all()
            assert (out[0, v[0] >= w.hi_hu, c] == 255).all()


class TestMR:
    def vol(self, voxels):
        arr = np.asarray(voxels, dtype=float)
        return VoxelVolume("M", "MR", arr, slice_thickness_mm=[1.0] * arr.shape[0])

    def test_max_and_midpoint(self):
        out = normalize_mr_volume(self.vol([[[0, 50, 100]]]))
        assert out[0, 0, 2].tolist() == [255, 255, 255]
        assert out[0, 0, 1].tolist() == [128, 128, 128]
        assert out[0, 0, 0].tolist() == [0, 0, 0]

    def test_constant_volume_zero_with_warning(self):
        with pytest.warns(DegenerateVolumeWarning):
            out = normalize_mr_volume(self.vol(np.full((2, 3, 3), 7.0)))
        assert not out.any()

    def test_scale_is_volume_global(self):
        vox = np.zeros((2, 2, 2))
        vox[0] = [[10, 20], [30, 40]]
        vox[1] = [[40, 50], [60, 70]]
        out = normalize_mr_volume(self.vol(vox))
        assert out[0, 1, 1].tolist() == out[1, 0, 0].tolist()
        assert (out[..., 0] == out[..., 1]).all() and (out[..., 1] == out[..., 2]).all()

    def test_rejects_ct(self):
        with pytest.raises(ValidationError):
            normalize_mr_volume(ct())


class TestFilter:
    def test_oversize(self):
        _, rejected = filter_volumes([ct(h=600, w=600)])
        assert rejected[0][1] == ["max 512×512"]

    def test_too_few_slices(self):
        _, rejected = filter_volumes([ct(n=4, h=512, w=512)])
        assert rejected[0][1] == ["min 5 slices"]

    def test_sagittal(self):
        _, rejected = filter_volumes([ct(n=40, h=256, w=256, orientation="SAGITTAL")])
        assert rejected[0][1] == ["axial orientation"]

    def test_mixed_thickness(self):
        _, rejected = filter_volumes([ct(n=5, thickness=[1, 1, 1, 2, 1])])
        assert rejected[0][1] == ["uniform slice thickness"]

    def test_admitted_boundary(self):
        admitted, rejected = filter_volumes([ct(n=5, h=512, w=512)])
        assert len(admitted) == 1 and not rejected

    def test_custom_criteria(self):
        admitted, _ = filter_volumes([ct(n=3)], StackCriteria(min_slices=3))
        assert len(admitted) == 1


class TestZstack:
    def test_single(self):
        assert zstack([ct(n=10)]) == [("S", z) for z in range(10)]

    def test_series_order(self):
        got = zstack([ct("B", n=2), ct("A", n=3)])
        assert got == [("A", 0), ("A", 1), ("A", 2), ("B", 0), ("B", 1)]

    def test_duplicate(self):
        with pytest.raises(ValidationError, match="duplicate"):
            zstack([ct("A"), ct("A")])

    def test_empty(self):
        assert zstack([]) == []


class TestSampling:
    def test_at_cap(self):
        assert sample_equidistant(85) == list(range(85))

    def test_169(self):
        assert sample_equidistant(169, 85) == list(range(0, 169, 2))

    def test_under_cap(self):
        assert sample_equidistant(3, 85) == [0, 1, 2]

    @given(st.integers(1, 10_000), st.integers(2, 500))
    def test_properties(self, n, cap):
        idx = sample_equidistant(n, cap)
        assert len(idx) == min(n, cap)
        assert all(b > a for a, b in zip(idx, idx[1:]))
        assert idx[0] == 0 and idx[-1] == n - 1

    def test_bad_args(self):
        with pytest.raises(ValueError):
            sample_equidistant(0)
        with pytest.raises(ValueError):
            sample_equidistant(5, cap=1)


@pytest.mark.parametrize("n, tokens", [(85, 21_760), (126, 32_256), (0, 0)])
def test_vision_tokens(n, tokens):
    assert vision_token_count(n) == tokens


class TestRender:
    def test_under_cap_passthrough(self):
        vol = VoxelVolume("S", "CT", np.random.default_rng(0).integers(-1000, 1000, (30, 512, 512)),
                          slice_thickness_mm=[1.0] * 30)
        seq = render_sequence([vol])
        assert len(seq) == 30
        assert all(e.image.shape == (896, 896, 3) and e.image.dtype == np.uint8 for e in seq.entries)
        assert [e.global_index for e in seq.entries] == list(range(30))

    def test_stacked_cap(self):
        seq = render_sequence([ct("A", n=100, h=4, w=4), ct("B", n=70, h=4, w=4)], size=16)
        assert len(seq) == 85
        assert seq.source_series == ["A", "B"]
        assert seq.entries[0].global_index == 0 and seq.entries[-1].global_index == 169
        assert vision_token_count(len(seq)) <= 21_760

    def test_mr_gray(self):
        vox = np.random.default_rng(1).random((6, 10, 12)) * 900
        seq = render_sequence([VoxelVolume("M", "MR", vox, slice_thickness_mm=[2.0] * 6)], size=32)
        for e in seq.entries:
            assert (e.image[..., 0] == e.image[..., 1]).all() and (e.image[..., 1] == e.image[..., 2]).all()

    def test_deterministic(self):
        vols = [ct("A", n=9, fill=40), ct("B", n=6, fill=-500)]
        a = render_sequence(vols, cap=5, size=24)
        b = render_sequence(vols, cap=5, size=24)
        assert [e.image.tobytes() for e in a.entries] == [e.image.tobytes() for e in b.entries]

    def test_no_admissible(self):
        with pytest.raises(NoAdmissibleVolumes, match="min 5 slices"):
            render_sequence([ct(n=2)])

    def test_degenerate_mr_recorded(self):
        vol = VoxelVolume("M", "MR", np.ones((5, 4, 4)), slice_thickness_mm=[1.0] * 5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            seq = render_sequence([vol], size=8)
        assert seq.warnings and not any(e.image.any() for e in seq.entries)


def test_disk_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    vol = VoxelVolume("S1", "CT", rng.integers(-1024, 2000, (6, 20, 30)).astype(np.int16),
                      spacing=(0.5, 0.5), slice_thickness_mm=[1.25] * 6)
    write_volume(vol, tmp_path / "study")
    [back] = read_study(tmp_path / "study")
    assert back.dims == (30, 20, 6)
    np.testing.assert_array_equal(back.voxels, vol.voxels)
    seq = render_sequence([back], size=40)
    rec = write_sequence(seq, tmp_path / "out", "study")
    assert rec["files"][0] == "study/0000_S1_0000.png"
    assert rec["vision_tokens"] == 6 * 256
    line = json.loads((tmp_path / "out" / "manifest.jsonl").read_text())
    assert line["global_indices"] == list(range(6))
    png = decode_png((tmp_path / "out" / rec["files"][3]).read_bytes())
    np.testing.assert_array_equal(png, seq.entries[3].image)
