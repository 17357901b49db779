import numpy as np
import pytest

from wastefinder.rng import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def small_field():
    """A tiny valid spectrogram-field factory for dataset tests."""
    from wastefinder.dataengine.spectrogram import SpectrogramField

    def build(h=8, w=8, fill=0.3, valid=None, seed=0):
        r = make_rng(seed)
        values = np.full((h, w, 2, 12), fill, dtype=np.float32)
        values += 0.01 * r.standard_normal(values.shape).astype(np.float32)
        v = np.ones((h, w), dtype=bool) if valid is None else valid
        return SpectrogramField(values=np.abs(values), valid=v)

    return build
