import colorsys
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medevalkit.errors import ValidationError
from medevalkit.slidegrid import (
    MagnificationDistribution,
    PatchSet,
    Patch,
    SlidePyramid,
    TissueMask,
    choose_magnification,
    extract_patches,
    grid_candidates,
    load_slide_dir,
    process_slide,
    subsample_patches,
    tissue_mask,
    write_patchset,
    write_slide_dir,
)
from medevalkit.volgrid import decode_png, vision_token_count

from conftest import many_patch_slide


class TestTissueMask:
    def test_square_overlap_and_leakage(self, synthetic_slide):
        slide, _ = synthetic_slide
        mask = tissue_mask(slide).grid
        truth = np.zeros_like(mask)
        truth[400:600, 400:600] = True
        overlap = (mask & truth).sum() / truth.sum()
        leakage = (mask & ~truth).sum() / (~truth).sum()
        assert overlap >= 0.95
        assert leakage <= 0.01

    def test_stage1_matches_colorsys(self, synthetic_slide):
        slide, img = synthetic_slide
        cand = tissue_mask(slide).stages["candidate"]
        rng = np.random.default_rng(9)
        for y, x in rng.integers(0, 1000, (300, 2)):
            h, s, v = colorsys.rgb_to_hsv(*(img[y, x] / 255.0))
            assert cand[y, x] == (s >= 0.07 and 0.05 <= v <= 0.98)

    @pytest.mark.parametrize("value", [255, 0])
    def test_blank_slides_are_empty(self, value):
        img = np.full((300, 300, 3), value, dtype=np.uint8)
        assert not tissue_mask(SlidePyramid.from_arrays("b", {5: img})).grid.any()

    def test_stage_monotonicity(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (200, 200, 3), dtype=np.uint8)
        m = tissue_mask(SlidePyramid.from_arrays("n", {5: img}))
        assert not (m.grid & ~m.stages["morphology"]).any()
        assert not (m.stages["morphology"] & ~m.stages["candidate"]).any()

    def test_small_component_removed(self):
        img = np.full((200, 200, 3), 250, dtype=np.uint8)
        img[10:16, 10:16] = (230, 150, 200)   # 36 cells < 64
        img[100:120, 100:120] = (230, 150, 200)
        grid = tissue_mask(SlidePyramid.from_arrays("c", {5: img})).grid
        assert not grid[10:16, 10:16].any()
        assert grid[102:118, 102:118].all()

    def test_mask_from_higher_level(self):
        img20 = np.full((800, 800, 3), 250, dtype=np.uint8)
        img20[0:400, 0:400] = (230, 150, 200)
        slide = SlidePyramid.from_arrays("h", {20: img20})
        grid = tissue_mask(slide).grid
        assert grid.shape == (200, 200)
        assert grid[5:95, 5:95].all() and not grid[110:, 110:].any()


class TestMagnification:
    def test_deterministic(self):
        d = MagnificationDistribution()
        assert {choose_magnification(d, 1234) for _ in range(5)} == {choose_magnification(d, 1234)}

    def test_frequencies(self):
        d = MagnificationDistribution()
        rng = np.random.default_rng(20240101)
        draws = np.array([choose_magnification(d, rng) for _ in range(100_000)])
        for mag, p in zip((5, 10, 20), (0.34, 0.33, 0.33)):
            assert abs((draws == mag).mean() - p) <= 0.01

    def test_degenerate(self):
        d = MagnificationDistribution(1.0, 0.0, 0.0)
        assert all(choose_magnification(d, s) == 5 for s in range(50))

    def test_invalid(self):
        with pytest.raises(ValidationError):
            MagnificationDistribution(0.5, 0.5, 0.5)


def mask_of(grid):
    return TissueMask(np.asarray(grid, dtype=bool))


class TestGrid:
    def test_full_mask(self):
        cells = grid_candidates(mask_of(np.ones((1000, 1000))), 20)
        assert cells == [(r, c) for r in range(5) for c in range(5)]

    def test_single_footprint(self):
        g = np.zeros((1000, 1000), dtype=bool)
        g[224:448, 448:672] = True
        assert grid_candidates(mask_of(g), 20) == [(1, 2)]
        g = np.zeros((1000, 1000), dtype=bool)
        g[:896, :896] = True
        assert grid_candidates(mask_of(g), 5) == [(0, 0)]

    def test_empty(self):
        assert grid_candidates(mask_of(np.zeros((500, 500))), 10) == []

    def test_fraction_threshold_bruteforce(self):
        # 10x cells are 448 mask px wide; 44 columns = 9.8% of a cell, 45 = 10.04%
        g = np.zeros((448, 896), dtype=bool)
        g[:, :44] = True
        g[:, 448:448 + 45] = True
        fractions = [g[:, :448].mean(), g[:, 448:].mean()]
        assert fractions[0] < 0.10 <= fractions[1]
        assert grid_candidates(mask_of(g), 10) == [(0, 1)]

    def test_bad_magnification(self):
        with pytest.raises(ValidationError):
            grid_candidates(mask_of(np.ones((10, 10))), 40)


class TestExtract:
    def test_single(self, synthetic_slide):
        slide, _ = synthetic_slide
        ps = extract_patches(slide, [(0, 0)], 5)
        assert len(ps) == 1
        assert decode_png(ps.patches[0].png_bytes).shape == (896, 896, 3)

    def test_row_major(self, synthetic_slide):
        slide, _ = synthetic_slide
        ps = extract_patches(slide, [(0, 3), (0, 1)], 20)
        assert ps.positions == [(0, 1), (0, 3)]

    def test_right_edge_padding(self, synthetic_slide):
        slide, img = synthetic_slide
        ps = extract_patches(slide, [(0, 1)], 5)
        px = decode_png(ps.patches[0].png_bytes)
        np.testing.assert_array_equal(px[:, :104], img[:896, 896:1000])
        assert not px[:, 104:].any()

    def test_upsampled_patch_matches_region(self, synthetic_slide):
        slide, _ = synthetic_slide
        ps = extract_patches(slide, [(2, 2)], 20)
        px = decode_png(ps.patches[0].png_bytes)
        np.testing.assert_array_equal(px, slide.read_region(20, 2 * 896, 2 * 896, 896, 896))

    def test_failed_read_recorded(self):
        calls = []

        def reader(i, x, y, w, h):
            calls.append((x, y))
            if x > 0:
                raise OSError("bad tile")
            return np.zeros((h, w, 3), dtype=np.uint8)

        from medevalkit.slidegrid import SlideLevel
        slide = SlidePyramid("f", [SlideLevel(5, 2000, 900)], reader)
        ps = extract_patches(slide, [(0, 0), (0, 1)], 5)
        assert ps.positions == [(0, 0)]
        assert len(ps.errors) == 1 and "bad tile" in ps.errors[0]

    def test_empty_candidates(self, synthetic_slide):
        with pytest.raises(ValidationError):
            extract_patches(synthetic_slide[0], [], 5)


def fake_patchset(n):
    cols = 20
    return PatchSet(20, [Patch(i // cols, i % cols, bytes([i % 256])) for i in range(n)], cap=None)


class TestSubsample:
    def test_under_cap(self):
        ps = fake_patchset(100)
        assert subsample_patches(ps, 126, 0).positions == ps.positions

    def test_over_cap(self):
        ps = fake_patchset(200)
        out = subsample_patches(ps, 126, 7)
        assert len(out) == 126
        assert out.positions == sorted(out.positions)
        assert set(out.positions) <= set(ps.positions)

    def test_seed_determinism(self):
        ps = fake_patchset(300)
        assert subsample_patches(ps, 126, 5).positions == subsample_patches(ps, 126, 5).positions
        assert subsample_patches(ps, 126, 5).positions != subsample_patches(ps, 126, 6).positions

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 400), st.integers(1, 200), st.integers(0, 2**32 - 1))
    def test_subsequence(self, n, cap, seed):
        ps = fake_patchset(n)
        out = subsample_patches(ps, cap, seed).positions
        it = iter(ps.positions)
        assert all(p in it for p in out)
        assert len(out) == min(n, cap)
        assert vision_token_count(len(subsample_patches(ps, 126, seed))) <= 32_256


class TestPipeline:
    def test_matches_extract_then_subsample(self):
        slide = many_patch_slide(rows=12, cols=12)
        ps = process_slide(slide, seed=11)
        rng = np.random.default_rng(11)
        mask = tissue_mask(slide)
        mag = choose_magnification(MagnificationDistribution(), rng)
        full = extract_patches(slide, grid_candidates(mask, mag), mag)
        ref = subsample_patches(full, 126, rng)
        assert ps.magnification == mag
        assert ps.positions == ref.positions
        assert [p.png_bytes for p in ps.patches] == [p.png_bytes for p in ref.patches]

    def test_cap_and_determinism(self):
        slide = many_patch_slide()
        dist = MagnificationDistribution(0.0, 0.0, 1.0)
        a = process_slide(slide, seed=3, dist=dist)
        b = process_slide(slide, seed=3, dist=dist)
        assert len(a) == 126 and a.positions == b.positions
        assert len(set(a.positions)) == 126

    def test_directory_roundtrip(self, tmp_path, synthetic_slide):
        _, img = synthetic_slide
        write_slide_dir(tmp_path / "slide", "S9", {5: img}, caption="colon biopsy")
        slide = load_slide_dir(tmp_path / "slide")
        assert slide.caption == "colon biopsy"
        ps = process_slide(slide, seed=1, dist=MagnificationDistribution(0, 0, 1))
        manifest = write_patchset(ps, tmp_path / "out", "S9")
        assert manifest["magnification"] == 20 and manifest["seed"] == 1
        first = manifest["patches"][0]["file"]
        assert first.startswith("S9/20x/") and (tmp_path / "out" / first).is_file()
        on_disk = json.loads((tmp_path / "out" / "S9" / "manifest.json").read_text())
        assert [(p["row"], p["col"]) for p in on_disk["patches"]] == ps.positions
