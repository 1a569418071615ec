"""
极值搜索模块
把"避开方形差集的最大子集"看成 F₂^{n²} 上 Cayley 图的最大独立集：
u ~ v 当且仅当 u ⊕ v 属于连接集。提供 n ≤ 3 的精确求解、任意 n 的贪心下界，
以及 n ≤ 2 的穷举对照。
"""

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from config.logger import setup_logging
from config.settings import DEFAULT_RUN_CONFIG
from app.grid_core import (
    ArgumentError,
    DimensionError,
    GridVector,
    GuardError,
    ShapeKind,
    classify_shape,
    format_grid,
    nonempty_index_sets,
    product_vector,
    square_vector,
    unit_vectors,
)
from app.f2_subspace import from_elements, row_reduce, span_enumerate, spiral_basis
from app.pair_search import PointSet, point_set_from_subspace

TAG = __name__
logger = setup_logging()

# 贪心搜索完整遍历全空间的上限，超过则改为按预算随机探测
GREEDY_FULL_UNIVERSE = 1 << 20
# 逐对分类校验的元素个数上限
PAIRWISE_CHECK_MAX = 4096


class CayleyFamily(str, Enum):
    SQUARE_SHAPES = "SquareShapes"
    RECT_SHAPES = "RectShapes"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class CayleySpec:
    """
    Cayley 图描述

    属性:
        n (int): 网格边长
        connection (FrozenSet[int]): 连接集（非零位串）
        family (CayleyFamily): 连接集来源
    """

    n: int
    connection: FrozenSet[int]
    family: CayleyFamily = CayleyFamily.CUSTOM

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError(f"grid side must be positive, got {self.n}")
        if 0 in self.connection:
            raise ArgumentError("connection set must not contain the zero vector")
        if not self.connection:
            raise ArgumentError("connection set must be nonempty")
        limit = 1 << (self.n * self.n)
        if any(not 0 < c < limit for c in self.connection):
            raise DimensionError(f"connection vector outside {{0,1}}^{self.n * self.n}")

    @property
    def universe(self) -> int:
        return 1 << (self.n * self.n)


def square_shapes(n: int) -> CayleySpec:
    """连接集 {γ×γ : γ ⊆ [n] 非空}，共 2ⁿ − 1 个"""
    return CayleySpec(n, frozenset(square_vector(g, n).bits for g in nonempty_index_sets(n)),
                      CayleyFamily.SQUARE_SHAPES)


def rect_shapes(n: int) -> CayleySpec:
    """连接集 {γ₁×γ₂ : γ₁, γ₂ 非空}，共 (2ⁿ − 1)² 个"""
    sets = list(nonempty_index_sets(n))
    return CayleySpec(n, frozenset(product_vector(a, b, n).bits for a in sets for b in sets),
                      CayleyFamily.RECT_SHAPES)


def custom_shapes(vectors: Iterable[GridVector]) -> CayleySpec:
    vectors = list(vectors)
    if not vectors:
        raise ArgumentError("custom connection set must be nonempty")
    n = vectors[0].n
    if any(v.n != n for v in vectors):
        raise DimensionError("connection vectors have different grid sizes")
    return CayleySpec(n, frozenset(v.bits for v in vectors), CayleyFamily.CUSTOM)


def family_spec(family: str, n: int) -> CayleySpec:
    if family == CayleyFamily.SQUARE_SHAPES.value:
        return square_shapes(n)
    if family == CayleyFamily.RECT_SHAPES.value:
        return rect_shapes(n)
    raise ArgumentError(f"unknown family {family!r}; custom sets are built from vectors")


class CayleyGraph:
    """
    邻接预言机：u ~ v ⇔ u ⊕ v ∈ 连接集

    对任意 n 可用；n ≤ cayley_max_n 时可以物化为 networkx 图。
    """

    def __init__(self, spec: CayleySpec):
        self.spec = spec
        self.connection = tuple(sorted(spec.connection))

    @property
    def degree(self) -> int:
        return len(self.connection)

    def adjacent(self, u: int, v: int) -> bool:
        return (u ^ v) in self.spec.connection

    def neighbors(self, u: int) -> List[int]:
        return [u ^ c for c in self.connection]

    def to_networkx(self) -> nx.Graph:
        """
        物化整张图

        异常:
            GuardError - n 超过物化上限
        """
        n = self.spec.n
        if n > DEFAULT_RUN_CONFIG["cayley_max_n"]:
            raise GuardError(f"Cayley graph for n={n} is too large to materialize")
        G = nx.Graph()
        G.add_nodes_from(range(self.spec.universe))
        G.add_edges_from((u, u ^ c) for u in range(self.spec.universe) for c in self.connection if u < u ^ c)
        return G


def build_cayley(spec: CayleySpec) -> CayleyGraph:
    return CayleyGraph(spec)


@dataclass
class ComponentSplit:
    """
    连通分支分解

    属性:
        rank (int): 连接集张成子空间 H 的秩
        subgroup (Tuple[int, ...]): H 的全部元素（升序），即含 0 的分支
        representatives (Tuple[int, ...]): 陪集代表元，每个代表元对应一个分支
    """

    rank: int
    subgroup: Tuple[int, ...]
    representatives: Tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.representatives)


def component_split(spec: CayleySpec) -> ComponentSplit:
    """
    Cayley 图的分支就是 H = span(连接集) 的各个陪集，彼此平移同构

    代表元取补充 H 的单位向量的张成；可物化时再用 networkx 核对分支个数。
    """
    n = spec.n
    vectors = [GridVector(n, c) for c in sorted(spec.connection)]
    handle = from_elements(vectors)
    subgroup = tuple(sorted(v.bits for v in span_enumerate(handle)))

    complement: List[GridVector] = []
    basis = list(handle.basis.reduced)
    for e in unit_vectors(n):
        if row_reduce(basis + complement + [e]).rank > len(basis) + len(complement):
            complement.append(e)
    reps = tuple(sorted(v.bits for v in span_enumerate(from_elements(complement, n))))
    split = ComponentSplit(handle.rank, subgroup, reps)

    if n <= DEFAULT_RUN_CONFIG["cayley_max_n"]:
        found = nx.number_connected_components(build_cayley(spec).to_networkx())
        if found != split.count:
            raise GuardError(f"coset split gives {split.count} components, graph has {found}")
    return split


@dataclass
class ExtremalResult:
    """
    极值搜索结果

    属性:
        n (int): 网格边长
        family (CayleyFamily): 连接集来源
        best_size (int): 找到的最大独立集大小
        witness (PointSet): 见证集合（已复核）
        exact (bool): 是否有匹配的上界证明其最优
        bound_method (str): 上界的证明方式
        upper_bound (Optional[int]): 已证明的上界
        trace_length (int): 搜索树结点数
    """

    n: int
    family: CayleyFamily
    best_size: int
    witness: PointSet
    exact: bool
    bound_method: str = ""
    upper_bound: Optional[int] = None
    trace_length: int = 0
    notes: List[str] = field(default_factory=list)


def verify_avoiding(spec: CayleySpec, witness: PointSet) -> bool:
    """对每个元素探测全部连接向量，任何一个落在集合内即不合格"""
    if witness.n != spec.n:
        return False
    members = set(witness.keys)
    return not any((s ^ c) in members for s in witness.keys for c in spec.connection)


def verify_avoiding_pairwise(spec: CayleySpec, witness: PointSet) -> bool:
    """
    逐对分类差集的独立校验；SquareShapes 下任何一对的差都不能是方形
    """
    keys = witness.keys
    if len(keys) > PAIRWISE_CHECK_MAX:
        raise GuardError(f"pairwise scan refused for {len(keys)} elements")
    n = spec.n
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            diff = a ^ b
            if spec.family == CayleyFamily.SQUARE_SHAPES:
                if classify_shape(GridVector(n, diff)).kind == ShapeKind.SQUARE:
                    return False
            elif spec.family == CayleyFamily.RECT_SHAPES:
                if classify_shape(GridVector(n, diff)).kind in (ShapeKind.SQUARE, ShapeKind.RECT):
                    return False
            elif diff in spec.connection:
                return False
    return True


class _Interrupted(Exception):
    pass


class _ComponentSolver:
    """
    单个分支上的最大独立集分支定界

    顶点是分支内下标，邻接用整数位掩码表示。对子问题 R 计算 f(R, need)：
    若 α(R) ≥ need 则返回 α(R)，否则返回一个小于 need 的上界。
    精确值与上界分别缓存。上界取贪心团覆盖数（三角形自由时即 |R| − 贪心匹配数）。
    """

    def __init__(self, adj: List[int], deadline: Optional[float], stop: Optional[threading.Event]):
        self.adj = adj
        self.exact: Dict[int, int] = {}
        self.upper: Dict[int, int] = {}
        self.nodes = 0
        self.deadline = deadline
        self.stop = stop

    def clique_cover(self, R: int) -> int:
        adj = self.adj
        cliques = 0
        while R:
            v = (R & -R).bit_length() - 1
            R &= ~(1 << v)
            cand = R & adj[v]
            while cand:
                u = (cand & -cand).bit_length() - 1
                R &= ~(1 << u)
                cand &= adj[u] & ~(1 << u)
            cliques += 1
        return cliques

    def _check_budget(self):
        self.nodes += 1
        # 第 1 个结点及此后每 1024 个结点检查一次
        if self.nodes & 0x3FF != 1:
            return
        if self.stop is not None and self.stop.is_set():
            raise _Interrupted()
        if self.deadline is not None and time.time() > self.deadline:
            raise _Interrupted()

    def _pick(self, R: int) -> Tuple[int, int]:
        """返回 (顶点, R 内度数)：优先度数 ≤ 1 的顶点，否则取度数最大的"""
        adj = self.adj
        best_v, best_d = -1, -1
        rest = R
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            d = (adj[v] & R).bit_count()
            if d <= 1:
                return v, d
            if d > best_d:
                best_v, best_d = v, d
        return best_v, best_d

    def solve(self, R: int, need: int) -> int:
        if R == 0:
            return 0
        if R in self.exact:
            return self.exact[R]
        ub = self.upper.get(R)
        if ub is not None and ub < need:
            return ub
        self._check_budget()
        bound = self.clique_cover(R)
        if bound < need:
            self.upper[R] = bound
            return bound

        v, d = self._pick(R)
        closed = (self.adj[v] & R) | (1 << v)
        a = 1 + self.solve(R & ~closed, need - 1)
        if d <= 1:
            # 度数 ≤ 1 的顶点总可以放进某个最大独立集
            if a >= need:
                self.exact[R] = a
            else:
                self.upper[R] = a
            return a

        a_exact = a >= need
        need_b = a + 1 if a_exact else need
        b = self.solve(R & ~(1 << v), need_b)
        if b >= need_b:
            self.exact[R] = b
            return b
        if a_exact:
            self.exact[R] = a
            return a
        result = max(a, b)
        self.upper[R] = result
        return result

    def witness(self, R: int, size: int) -> List[int]:
        """沿缓存的精确值回溯出一个大小为 size 的独立集"""
        chosen = []
        while size > 0:
            v, d = self._pick(R)
            closed = (self.adj[v] & R) | (1 << v)
            if d <= 1 or self.solve(R & ~closed, size - 1) >= size - 1:
                chosen.append(v)
                R &= ~closed
                size -= 1
            else:
                R &= ~(1 << v)
        return chosen


def _component_adjacency(spec: CayleySpec, split: ComponentSplit) -> List[int]:
    """在含 0 的分支上建立邻接掩码（由 networkx 子图导出）"""
    G = build_cayley(spec).to_networkx().subgraph(split.subgroup)
    index = {v: i for i, v in enumerate(split.subgroup)}
    adj = [0] * len(split.subgroup)
    for u, v in G.edges():
        adj[index[u]] |= 1 << index[v]
        adj[index[v]] |= 1 << index[u]
    return adj


def _lift(split: ComponentSplit, chosen: Iterable[int]) -> List[int]:
    chosen = tuple(chosen)
    return [r ^ h for r in split.representatives for h in chosen]


def max_avoiding_exact(spec: CayleySpec, timeout: Optional[float] = None,
                       stop: Optional[threading.Event] = None, seed: int = 0) -> ExtremalResult:
    """
    精确最大独立集

    处理流程:
    1. 按陪集分解，只在含 0 的分支上求解（各分支平移同构）
    2. 固定根 0：α(H) = 1 + α(H − N[0])
    3. 以贪心解为初始下界做分支定界
    4. 用陪集代表元把分支上的解平移到每个分支，合并为全局见证并逐对复核

    超时或被中断时退化为 exact = False，返回目前最好的见证。

    参数:
        spec: CayleySpec - n ≤ 3
        timeout: Optional[float] - 超时秒数，None 时取默认配置
        stop: Optional[threading.Event] - 外部停止标志
    """
    n = spec.n
    if n > DEFAULT_RUN_CONFIG["cayley_max_n"]:
        raise GuardError(f"exact extremal search refused for n={n}")
    timeout = DEFAULT_RUN_CONFIG["timeout"] if timeout is None else timeout
    start = time.time()

    split = component_split(spec)
    adj = _component_adjacency(spec, split)
    size = len(adj)
    full = (1 << size) - 1
    solver = _ComponentSolver(adj, start + timeout if timeout else None, stop)

    greedy = _greedy_component(adj, seed)
    root_rest = full & ~(adj[0] | 1)
    notes: List[str] = []
    try:
        value = 1 + solver.solve(root_rest, len(greedy) - 1)
        chosen = [0] + solver.witness(root_rest, value - 1)
        exact = True
    except _Interrupted:
        logger.bind(tag=TAG).warning(f"精确搜索被中断: n={n}, 已展开 {solver.nodes} 个结点")
        notes.append("search interrupted; falling back to the greedy witness")
        chosen = greedy
        exact = False

    upper = solver.clique_cover(full) * split.count
    members = tuple(split.subgroup[i] for i in chosen)
    witness = PointSet(n, _lift(split, members))
    if len(witness) != len(members) * split.count:
        raise GuardError(f"lifted witness has {len(witness)} points, expected {len(members) * split.count}")
    if not verify_avoiding(spec, witness):
        raise GuardError("extremal witness failed re-verification")
    if len(witness) <= PAIRWISE_CHECK_MAX and not verify_avoiding_pairwise(spec, witness):
        raise GuardError("extremal witness failed the pairwise difference scan")
    logger.bind(tag=TAG).debug(
        f"精确搜索耗时: {time.time() - start:.3f}s | 分支大小 {size} × {split.count}, α = {len(chosen)}"
    )
    return ExtremalResult(
        n=n,
        family=spec.family,
        best_size=len(witness),
        witness=witness,
        exact=exact,
        bound_method=(
            "branch and bound on one coset component with root fixed at 0, "
            "greedy clique-cover bounds, lifted over coset representatives"
        ) if exact else "",
        upper_bound=len(witness) if exact else upper,
        trace_length=solver.nodes,
        notes=notes,
    )


def _greedy_component(adj: List[int], seed: int) -> List[int]:
    """分支上的随机顺序贪心，根 0 固定在首位"""
    rng = np.random.default_rng(seed)
    order = [0] + [int(v) + 1 for v in rng.permutation(len(adj) - 1)]
    blocked = 0
    chosen = []
    for v in order:
        if not (blocked >> v) & 1:
            chosen.append(v)
            blocked |= adj[v] | (1 << v)
    return chosen


def _greedy_once(spec: CayleySpec, seed: int, warm: Iterable[int], budget: int) -> List[int]:
    rng = np.random.default_rng(seed)
    chosen = set(warm)
    connection = tuple(spec.connection)

    def free(v: int) -> bool:
        return v not in chosen and all((v ^ c) not in chosen for c in connection)

    if spec.universe <= GREEDY_FULL_UNIVERSE:
        for v in rng.permutation(spec.universe).tolist():
            if free(v):
                chosen.add(v)
    else:
        nbytes = (spec.n * spec.n + 7) // 8
        mask = spec.universe - 1
        for _ in range(budget):
            v = int.from_bytes(rng.bytes(nbytes), "little") & mask
            if free(v):
                chosen.add(v)
    return sorted(chosen)


def avoiding_greedy(spec: CayleySpec, seed: int, warm_start: Optional[PointSet] = None,
                    restarts: int = 1, threads: int = 1, budget: Optional[int] = None) -> ExtremalResult:
    """
    随机顺序贪心下界

    全空间不超过 2^20 时按随机排列遍历全部顶点；更大时按预算随机探测。
    多次重启使用种子 seed, seed+1, …，彼此独立并行，取最大者（并列取种子最小的）。

    参数:
        spec: CayleySpec - 任意 n
        seed: int - 随机种子，相同种子给出相同见证
        warm_start: Optional[PointSet] - 初始集合，必须本身已经避开连接集
    """
    budget = DEFAULT_RUN_CONFIG["budget"] if budget is None else budget
    warm: Tuple[int, ...] = ()
    if warm_start is not None:
        if not verify_avoiding(spec, warm_start):
            raise ArgumentError("warm start set is not independent in the Cayley graph")
        warm = warm_start.keys
    start = time.time()
    seeds = [seed + i for i in range(max(1, restarts))]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        runs = list(pool.map(lambda s: _greedy_once(spec, s, warm, budget), seeds))
    best = max(runs, key=len)
    witness = PointSet(spec.n, best)
    if not verify_avoiding(spec, witness):
        raise GuardError("greedy witness failed re-verification")
    logger.bind(tag=TAG).debug(f"贪心搜索耗时: {time.time() - start:.3f}s | 最好结果 {len(best)}")
    return ExtremalResult(spec.n, spec.family, len(best), witness, exact=False,
                          trace_length=len(seeds))


def spiral_warm_start(n: int) -> PointSet:
    """螺旋子空间的全部元素；n ≤ 3 时它本身避开所有方形差集，n = 4 时不然"""
    return point_set_from_subspace(spiral_basis(n))


def max_avoiding_bruteforce(spec: CayleySpec, root_fixed: bool = True) -> Tuple[int, PointSet]:
    """
    穷举全部子集的对照（n ≤ 2）

    root_fixed 为真时只枚举含 0 的子集。返回 (最大大小, 掩码最小的最优集合)。
    """
    if spec.n > 2:
        raise GuardError(f"brute-force oracle refused for n={spec.n}")
    size = spec.universe
    adj = [sum(1 << (v ^ c) for c in spec.connection) for v in range(size)]
    best, best_mask = 0, 0
    for X in range(1 << size):
        if root_fixed and not X & 1:
            continue
        count = X.bit_count()
        if count <= best:
            continue
        rest = X
        ok = True
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            if adj[v] & X:
                ok = False
                break
        if ok:
            best, best_mask = count, X
    return best, PointSet(spec.n, (v for v in range(size) if (best_mask >> v) & 1))


def result_to_dict(result: ExtremalResult) -> dict:
    return {
        "n": result.n,
        "family": result.family.value,
        "best_size": result.best_size,
        "exact": result.exact,
        "bound_method": result.bound_method,
        "upper_bound": result.upper_bound,
        "trace_length": result.trace_length,
        "notes": list(result.notes),
        "witness": [format_grid(GridVector(result.n, k)) for k in result.witness.keys],
    }


def result_to_json(result: ExtremalResult) -> str:
    return json.dumps(result_to_dict(result), indent=2)
