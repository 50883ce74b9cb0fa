import pathlib

import numpy as np
import pytest

from nnvqe.integrals import IntegralSet, read_fcidump

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

_cache = {}


def load_fixture(name: str) -> IntegralSet:
    if name not in _cache:
        _cache[name] = read_fcidump(FIXTURES / f"{name}.fcidump")
    return _cache[name]


def random_integrals(rng, n_orb: int, n_elec: int = 2, ms2: int | None = None,
                     scale: float = 1.0) -> IntegralSet:
    """Random symmetric integrals; not physical, but exercise every code path."""
    h1 = rng.standard_normal((n_orb, n_orb)) * scale
    h1 = 0.5 * (h1 + h1.T)
    g = rng.standard_normal((n_orb,) * 4) * scale
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    if ms2 is None:
        ms2 = n_elec % 2
    return IntegralSet(n_orb=n_orb, n_elec=n_elec, ms2=ms2,
                       e_core=float(rng.standard_normal()), h1=h1, h2=g / 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(11)
