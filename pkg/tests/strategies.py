"""hypothesis 策略：随机网格与指标集"""

from hypothesis import strategies as st

from app.grid_core import GridVector, IndexSet


def grids_of(n: int):
    return st.integers(0, (1 << (n * n)) - 1).map(lambda b: GridVector(n, b))


def grids(min_n: int = 1, max_n: int = 4):
    return st.integers(min_n, max_n).flatmap(grids_of)


def grid_triples(min_n: int = 1, max_n: int = 4):
    return st.integers(min_n, max_n).flatmap(lambda n: st.tuples(grids_of(n), grids_of(n), grids_of(n)))


def index_sets(n: int, min_size: int = 0):
    return st.sets(st.integers(1, n), min_size=min_size).map(lambda s: IndexSet.of(n, s))
