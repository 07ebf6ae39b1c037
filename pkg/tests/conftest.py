import numpy as np
import pytest

from modsense import model, nncore, sigsynth


@pytest.fixture(scope="session")
def tiny_dataset():
    """Small 3-class dataset shared by model-level tests."""
    spec = sigsynth.DatasetSpec(
        schemes=("BPSK", "QPSK", "GFSK"),
        snr_grid_db=(10, 18),
        sps_set=(4,),
        length_set=(64,),
        frames_per_cell=12,
        master_seed=11,
    )
    return sigsynth.generate_dataset(spec)


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset):
    """A quickly trained small model; accuracy is not asserted here."""
    data = model.amp_phase_dataset(tiny_dataset)
    cfg = model.ClassifierConfig(depth=2, cells=8, input_dim=2,
                                 n_classes=3, keep_prob=1.0, seed=3)
    tcfg = model.TrainConfig(minibatch=18, epochs=3, lr=0.01,
                             snr_min_train=None)
    return model.train(data, cfg, tcfg)


def random_params(depth, cells, input_dim, n_classes, seed, dtype=np.float64):
    """Float64 parameter set for numerics tests (gradient checks)."""
    layers, dense = nncore.init_params(depth, cells, input_dim, n_classes,
                                       seed, dtype=dtype)
    rng = np.random.default_rng(seed + 1000)
    for p in layers:
        p.b += rng.normal(scale=0.1, size=p.b.shape)
    dense.b += rng.normal(scale=0.1, size=dense.b.shape)
    return layers, dense
