import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bovw.corpus import DatasetManifest, load_manifest
from bovw.features import DescriptorSet
from bovw.harness import DescriptorStore, GridParams
from bovw.synth import TextureSpec, generate_corpus


def random_descriptor_set(n: int, seed: int, source: str = "") -> DescriptorSet:
    rng = np.random.default_rng(seed)
    return DescriptorSet(
        keypoints=rng.integers(8, 64, (n, 2)).astype(np.int32),
        descriptors=rng.integers(0, 256, (n, 128)).astype(np.uint8),
        source_image=source or f"synthetic-{seed}",
    )


MICRO_SPECS = (
    TextureSpec("stripes_h", "grating", 0.11, 0.0),
    TextureSpec("stripes_d", "grating", 0.11, 60.0),
    TextureSpec("blocks", "checker", 0.08, 0.0),
)


@pytest.fixture(scope="session")
def micro_corpus(tmp_path_factory) -> DatasetManifest:
    """Tiny 3-class texture corpus for harness-level tests."""
    root = tmp_path_factory.mktemp("micro_corpus")
    manifest_path = generate_corpus(root, MICRO_SPECS, images_per_class=8, size=48,
                                    seed=5, name="micro")
    return load_manifest(manifest_path)


@pytest.fixture(scope="session")
def micro_store(micro_corpus) -> DescriptorStore:
    store = DescriptorStore(GridParams())
    store.pool(micro_corpus)
    return store
