import numpy as np

from fkburger import parallel
from fkburger.matching import hitting_times
from fkburger.params import params_from_p


def _block(r0, count, p, seed):
    return hitting_times(params_from_p(p), "J", 1000, seed, r0, count)


def test_chunks_cover():
    assert parallel.chunks(10, 4) == [(0, 4), (4, 4), (8, 2)]
    assert parallel.chunks(0, 4) == []


def test_worker_count_invariance():
    a = np.concatenate(parallel.run_replicas(_block, 5000, workers=1, chunk=700, p=0.3, seed=2))
    b = np.concatenate(parallel.run_replicas(_block, 5000, workers=4, chunk=700, p=0.3, seed=2))
    c = hitting_times(params_from_p(0.3), "J", 1000, 2, 0, 5000)
    assert np.array_equal(a, b) and np.array_equal(a, c)
