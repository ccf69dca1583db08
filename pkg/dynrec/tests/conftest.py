"""
Shared fixtures for the dynrec test suite.
"""
import numpy as np
import pytest

from dynrec.designs import DesignBatch, DesignFamily, DesignKind, ObservationBatch, Panel


def completion_panel(truths, n, seed=0, sigma_xi=0.0):
    """Uniform completion samples of a list of truth matrices."""
    rng = np.random.default_rng(seed)
    dims = truths[0].shape
    family = DesignFamily(DesignKind.COMPLETION, dims)
    batches = []
    for truth in truths:
        cells = rng.integers(0, dims[0] * dims[1], size=n)
        rows, cols = np.divmod(cells, dims[1])
        designs = DesignBatch(family.kind, dims, rows=rows, cols=cols)
        y = designs.predict(truth) + sigma_xi * rng.standard_normal(n)
        batches.append(ObservationBatch(designs, y))
    return Panel(family, tuple(batches))


def full_coverage_batch(truth, repeats=1):
    """Every entry of ``truth`` observed ``repeats`` times, noiselessly."""
    m1, m2 = truth.shape
    rows, cols = np.divmod(np.tile(np.arange(m1 * m2), repeats), m2)
    designs = DesignBatch(DesignKind.COMPLETION, (m1, m2), rows=rows, cols=cols)
    return ObservationBatch(designs, designs.predict(truth))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def low_rank_truths(rng):
    """A slowly rotating rank-2 path of ten 12x9 matrices."""
    u = np.linalg.qr(rng.standard_normal((12, 4)))[0]
    v = np.linalg.qr(rng.standard_normal((9, 4)))[0]
    truths = []
    for t in np.linspace(0.0, 1.0, 10):
        c, s = np.cos(t * np.pi / 2), np.sin(t * np.pi / 2)
        ut = c * u[:, :2] + s * u[:, 2:]
        vt = c * v[:, :2] + s * v[:, 2:]
        truths.append((ut * np.array([6.0, 3.0])) @ vt.T)
    return truths


@pytest.fixture
def small_panel(low_rank_truths):
    return completion_panel(low_rank_truths, n=60, seed=7, sigma_xi=0.1)


@pytest.fixture(autouse=True)
def sequential_threads(settings):
    """Tests run single-threaded unless they opt in."""
    settings.DYNREC = {**settings.DYNREC, 'THREADS': 1}
