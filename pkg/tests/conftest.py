"""Shared builders for the test suite."""

import numpy as np
import pytest

from heg.graph import build_graph
from heg.synth import SynthSpec, gaussian_dataset


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


def continuous_graphs(seed, num_videos=4, frames=11, objects_min=2,
                      objects_max=4, feature_dim=6, stride=5):
    """Graphs with standard-normal features; safe for gradient checks."""
    spec = SynthSpec(num_videos=num_videos, frames_per_video=frames,
                     objects_min=objects_min, objects_max=objects_max,
                     feature_dim=feature_dim, seed=seed)
    return [build_graph(seq, store.lookup, stride)
            for seq, store in gaussian_dataset(spec)]


@pytest.fixture
def small_graphs():
    return continuous_graphs(seed=11)
