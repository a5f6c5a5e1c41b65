import numpy as np
import pytest

from augvoc.config import desk_profile
from augvoc.data import make_synthetic_corpus, write_corpus


@pytest.fixture(scope="session")
def corpus12():
    """12 one-second synthetic clips, shared read-only across the suite."""
    return make_synthetic_corpus(n_clips=12, seed=7, sample_rate=22050,
                                 duration=1.0)


@pytest.fixture(scope="session")
def corpus_dir(corpus12, tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus")
    write_corpus(corpus12, str(path))
    return str(path)


@pytest.fixture()
def tiny_cfg(corpus_dir, tmp_path):
    """Desk profile shrunk to a few-second training run."""
    def make(**overrides):
        base = dict(
            data_dir=corpus_dir,
            out_dir=str(tmp_path / overrides.pop("run_name", "run")),
            max_iterations=6,
            batch_size=4,
            val_clips=2,
            checkpoint_every=3,
            validate_every=3,
            log_wall_time=False,
        )
        base.update(overrides)
        return desk_profile(**base)
    return make


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
