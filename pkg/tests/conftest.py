import os
from pathlib import Path

import numpy as np
import pytest

from mfrc.data import RatingDataset

_DATA_FILES = {
    "ml-100k": ("ml-100k", "u.data"),
    "ml-1m": ("ml-1m", "ratings.dat"),
}


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run the long MovieLens-1M reproduction tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="opt in with --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def find_rating_file(name: str):
    """Locate an official MovieLens rating file.

    Looks under $MFRC_DATA_DIR and the repo-level data/ directory; the
    toolkit never downloads data itself.
    """
    sub, fname = _DATA_FILES[name]
    roots = []
    env = os.environ.get("MFRC_DATA_DIR")
    if env:
        roots.append(Path(env))
    roots.append(Path(__file__).resolve().parent.parent / "data")
    for root in roots:
        for candidate in (root / sub / fname, root / name / fname, root / fname):
            if candidate.exists():
                return candidate
    return None


def require_rating_file(name: str) -> Path:
    path = find_rating_file(name)
    if path is None:
        pytest.skip(f"MovieLens file for {name} not found; place it under data/{name}/ "
                    f"or point MFRC_DATA_DIR at a directory containing it")
    return path


def synthetic_dataset(num_users=30, num_items=40, n_ratings=500, seed=0,
                      structured=True) -> RatingDataset:
    """Random rating data with learnable user/item structure.

    Ratings follow a clipped-rounded additive model (global level plus
    user and item effects plus noise) so factor models have signal to
    fit; ``structured=False`` gives uniform ratings instead.
    """
    rng = np.random.default_rng(seed)
    n_ratings = min(n_ratings, num_users * num_items)
    cells = rng.choice(num_users * num_items, size=n_ratings, replace=False)
    users = cells // num_items
    items = cells % num_items
    if structured:
        u_eff = rng.normal(0.0, 0.8, num_users)
        i_eff = rng.normal(0.0, 0.8, num_items)
        raw = 3.0 + u_eff[users] + i_eff[items] + rng.normal(0.0, 0.4, n_ratings)
        ratings = np.clip(np.round(raw), 1.0, 5.0)
    else:
        ratings = rng.integers(1, 6, n_ratings).astype(float)
    return RatingDataset.from_arrays(users, items, ratings,
                                     num_users=num_users, num_items=num_items)


@pytest.fixture
def toy():
    return synthetic_dataset()


@pytest.fixture(scope="session")
def ml100k():
    import mfrc
    return mfrc.ingest(require_rating_file("ml-100k"), "ml-100k")


@pytest.fixture(scope="session")
def ml1m():
    import mfrc
    return mfrc.ingest(require_rating_file("ml-1m"), "ml-1m")
