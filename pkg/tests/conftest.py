from pathlib import Path

import numpy as np
import pytest

from medevalkit.slidegrid import SlidePyramid

PINK = (230, 150, 200)


def square_slide(size=1000, top=400, left=400, side=200, caption="colon biopsy", seed=0):
    """White 5x slide with a single pink tissue square; light noise on both."""
    rng = np.random.default_rng(seed)
    img = np.full((size, size, 3), 250, dtype=np.int16)
    img[top:top + side, left:left + side] = PINK
    img += rng.integers(-3, 4, img.shape, dtype=np.int16)
    img = np.clip(img, 0, 255).astype(np.uint8)
    return SlidePyramid.from_arrays("synthetic", {5: img}, caption=caption), img


@pytest.fixture
def synthetic_slide():
    return square_slide()


def many_patch_slide(rows=15, cols=15, caption="skin excision"):
    """5x slide fully covered by tissue: rows*cols cells at 20x (224 px per cell)."""
    img = np.empty((rows * 224, cols * 224, 3), dtype=np.uint8)
    img[...] = PINK
    yy, xx = np.mgrid[0:img.shape[0], 0:img.shape[1]]
    img[..., 1] = (100 + (yy // 224 * 7 + xx // 224 * 3) % 100).astype(np.uint8)
    return SlidePyramid.from_arrays("tiled", {5: img}, caption=caption)


@pytest.fixture(scope="session")
def fixture_dir():
    return Path(__file__).resolve().parent.parent / "data" / "fixtures"


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
