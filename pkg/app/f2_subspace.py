"""
F₂ 线性代数模块
在 GridVector 上做行化简、秩、成员判定和张成枚举，
并构造螺旋基（密度 1/4 的子空间）以及偶重量子空间。
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from config.logger import setup_logging
from config.settings import DEFAULT_RUN_CONFIG
from app.grid_core import (
    ArgumentError,
    ConstructionError,
    DimensionError,
    GridVector,
    GuardError,
    IndexSet,
    format_grid_blocks,
    from_cells,
    nonempty_index_sets,
    parse_grid_blocks,
    square_vector,
)

TAG = __name__
logger = setup_logging()


@dataclass(frozen=True)
class Basis:
    """
    子空间的一组生成元及其行化简形式

    属性:
        n (int): 网格边长
        elements (Tuple[GridVector, ...]): 原始生成元（保持输入顺序）
        reduced (Tuple[GridVector, ...]): 行化简阶梯形，张成相同子空间
        pivots (Tuple[int, ...]): 每一行的主元位（最高置位）
    """

    n: int
    elements: Tuple[GridVector, ...]
    reduced: Tuple[GridVector, ...]
    pivots: Tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.reduced)

    @property
    def is_independent(self) -> bool:
        return self.rank == len(self.elements)

    def residual(self, v: GridVector) -> int:
        """用阶梯形消去 v，返回余项的位串"""
        if v.n != self.n:
            raise DimensionError(f"grid sizes differ: {self.n} vs {v.n}")
        bits = v.bits
        for row, pivot in zip(self.reduced, self.pivots):
            if (bits >> pivot) & 1:
                bits ^= row.bits
        return bits

    def contains(self, v: GridVector) -> bool:
        return self.residual(v) == 0


def row_reduce(elements: Sequence[GridVector], n: Optional[int] = None) -> Basis:
    """
    F₂ 上的高斯消元（简化阶梯形）

    参数:
        elements: Sequence[GridVector] - 边长一致的向量列表
        n: Optional[int] - 网格边长，elements 为空时必须给出

    返回:
        Basis - 包含阶梯形、秩和主元位置
    """
    if not elements and n is None:
        raise ArgumentError("row_reduce needs at least one vector or an explicit n")
    n = elements[0].n if n is None else n
    rows: Dict[int, int] = {}  # 主元位 -> 行
    for v in elements:
        if v.n != n:
            raise DimensionError(f"grid sizes differ: {n} vs {v.n}")
        bits = v.bits
        for pivot in sorted(rows, reverse=True):
            if (bits >> pivot) & 1:
                bits ^= rows[pivot]
        if not bits:
            continue
        pivot = bits.bit_length() - 1
        for other in rows:
            if (rows[other] >> pivot) & 1:
                rows[other] ^= bits
        rows[pivot] = bits
    pivots = tuple(sorted(rows, reverse=True))
    reduced = tuple(GridVector(n, rows[p]) for p in pivots)
    return Basis(n, tuple(elements), reduced, pivots)


class MembershipMode(str, Enum):
    ROW_REDUCE = "RowReduce"
    PARITY_KERNEL = "ParityKernel"


class MembershipTest(ABC):
    """
    子空间成员判定的抽象基类

    允许用不同的方式实现同一子空间的成员判定。
    """

    @abstractmethod
    def is_member(self, v: GridVector) -> bool:
        pass


class RowReduceMembership(MembershipTest):
    """通过消元余项判定成员"""

    def __init__(self, basis: Basis):
        self.basis = basis

    def is_member(self, v: GridVector) -> bool:
        return self.basis.contains(v)


class ParityKernelMembership(MembershipTest):
    """通过若干奇偶泛函判定成员：v 在核中当且仅当每个泛函的格子和为偶数"""

    def __init__(self, functionals: Sequence[GridVector]):
        self.functionals = tuple(functionals)

    def is_member(self, v: GridVector) -> bool:
        for f in self.functionals:
            if f.n != v.n:
                raise DimensionError(f"grid sizes differ: {f.n} vs {v.n}")
            if (f.bits & v.bits).bit_count() & 1:
                return False
        return True


def create_instance(mode: MembershipMode, basis: Basis,
                    functionals: Sequence[GridVector] = ()) -> MembershipTest:
    """
    创建成员判定实例的工厂函数

    返回:
        MembershipTest - 新创建的判定器
    """
    if mode == MembershipMode.PARITY_KERNEL:
        return ParityKernelMembership(functionals)
    return RowReduceMembership(basis)


@dataclass(frozen=True)
class SubspaceHandle:
    """
    子空间句柄

    属性:
        basis (Basis): 基
        membership_mode (MembershipMode): 成员判定方式
        functionals (Tuple[GridVector, ...]): ParityKernel 模式下的奇偶泛函（格子集合）
    """

    basis: Basis
    membership_mode: MembershipMode = MembershipMode.ROW_REDUCE
    functionals: Tuple[GridVector, ...] = ()
    tester: MembershipTest = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.membership_mode == MembershipMode.PARITY_KERNEL:
            _validate_kernel(self.basis, self.functionals)
        object.__setattr__(
            self, "tester", create_instance(self.membership_mode, self.basis, self.functionals)
        )

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def rank(self) -> int:
        return self.basis.rank

    def contains(self, v: GridVector) -> bool:
        return self.tester.is_member(v)


def _validate_kernel(basis: Basis, functionals: Sequence[GridVector]):
    """
    校验张成空间等于泛函的公共核

    每个基元素都在核中，且 rank(basis) = n² − rank(functionals)，
    则两种成员判定处处一致。
    """
    n = basis.n
    probe = ParityKernelMembership(functionals)
    for v in basis.elements:
        if not probe.is_member(v):
            raise ConstructionError(f"basis element violates a parity functional:\n{v}")
    kernel_dim = n * n - (row_reduce(list(functionals)).rank if functionals else 0)
    if basis.rank != kernel_dim:
        raise ConstructionError(
            f"span rank {basis.rank} differs from kernel dimension {kernel_dim}"
        )


def from_elements(elements: Sequence[GridVector], n: Optional[int] = None) -> SubspaceHandle:
    """由任意生成元构造 RowReduce 模式的子空间句柄"""
    return SubspaceHandle(row_reduce(elements, n))


def diagonal_functional(n: int) -> GridVector:
    return from_cells(n, ((t, t) for t in range(1, n + 1)))


def upper_functional(n: int) -> GridVector:
    return from_cells(n, ((x, y) for x in range(1, n + 1) for y in range(x + 1, n + 1)))


def spiral_elements(n: int) -> List[GridVector]:
    """
    螺旋基的 n² − 2 个元素

    组成:
    1. 严格下三角的所有单点
    2. 对角线上相邻的两点 {(t,t),(t+1,t+1)}
    3. 严格上三角沿对角方向的相邻两点 {(x,y),(x+1,y+1)}
    4. 第 n 列上的 {(x,n),(x+1,n)}，x = n−2, n−4, …
       和第 1 行上的 {(1,y),(1,y+1)}，y = 3, 5, …
       它们把上三角的各条对角线连成一体
    """
    cells = []
    cells += [[(x, y)] for x in range(1, n + 1) for y in range(1, x)]
    cells += [[(t, t), (t + 1, t + 1)] for t in range(1, n)]
    cells += [
        [(x, y), (x + 1, y + 1)]
        for x in range(1, n + 1)
        for y in range(x + 1, n)
    ]
    cells += [[(x, n), (x + 1, n)] for x in range(n - 2, 0, -2)]
    cells += [[(1, y), (1, y + 1)] for y in range(3, n, 2)]
    return [from_cells(n, c) for c in cells]


def spiral_basis(n: int) -> SubspaceHandle:
    """
    构造螺旋基子空间（密度 1/4）

    处理流程:
    1. 生成 n² − 2 个基元素
    2. 行化简并检查秩为 n² − 2
    3. 检查每个元素的对角点数和上三角点数都是偶数
    4. 用两个奇偶泛函建立常数时间成员判定

    参数:
        n: int - 网格边长，n ≥ 2

    返回:
        SubspaceHandle - ParityKernel 模式的子空间句柄

    异常:
        ArgumentError - n < 2
        ConstructionError - 秩不足或奇偶性被破坏（实现缺陷）
    """
    if n < 2:
        raise ArgumentError(f"spiral basis needs n >= 2, got {n}")
    elements = spiral_elements(n)
    basis = row_reduce(elements)
    if len(elements) != n * n - 2 or basis.rank != n * n - 2:
        raise ConstructionError(
            f"spiral basis for n={n}: {len(elements)} elements, rank {basis.rank}"
        )
    handle = SubspaceHandle(
        basis,
        MembershipMode.PARITY_KERNEL,
        (diagonal_functional(n), upper_functional(n)),
    )
    logger.bind(tag=TAG).debug(f"螺旋基构造完成: n={n}, rank={basis.rank}")
    return handle


def parity_membership(handle: SubspaceHandle, v: GridVector) -> bool:
    """
    螺旋子空间的成员判定：对角点数为偶数且严格上三角点数为偶数
    """
    if v.n != handle.n:
        raise DimensionError(f"grid sizes differ: {handle.n} vs {v.n}")
    diag = (v.bits & diagonal_functional(v.n).bits).bit_count()
    upper = (v.bits & upper_functional(v.n).bits).bit_count()
    return diag % 2 == 0 and upper % 2 == 0


def span_enumerate(handle: SubspaceHandle,
                   rank_limit: Optional[int] = None) -> Iterator[GridVector]:
    """
    按 Gray 码顺序枚举张成空间的全部 2^rank 个元素

    相邻两个输出只差一个基向量；第 i 步翻转的是 i 的最低置位对应的基向量。

    异常:
        GuardError - 秩超过上限
    """
    limit = DEFAULT_RUN_CONFIG["span_rank_limit"] if rank_limit is None else rank_limit
    rows = handle.basis.reduced
    if len(rows) > limit:
        raise GuardError(f"span enumeration refused: rank {len(rows)} exceeds limit {limit}")
    bits = 0
    yield GridVector(handle.n, 0)
    for i in range(1, 1 << len(rows)):
        flipped = (i & -i).bit_length() - 1
        bits ^= rows[flipped].bits
        yield GridVector(handle.n, bits)


def even_weight_membership(v: GridVector) -> bool:
    return v.popcount % 2 == 0


def even_weight_handle(n: int) -> SubspaceHandle:
    """偶重量子空间（指数 2），以全格泛函作为奇偶核"""
    cells = [(x, y) for x in range(1, n + 1) for y in range(1, n + 1)]
    elements = [from_cells(n, [cells[i], cells[i + 1]]) for i in range(len(cells) - 1)]
    if not elements:
        raise ArgumentError("even-weight subspace of a 1x1 grid is trivial")
    return SubspaceHandle(
        row_reduce(elements),
        MembershipMode.PARITY_KERNEL,
        (from_cells(n, cells),),
    )


def square_membership_report(handle: SubspaceHandle) -> List[dict]:
    """对每个非空 γ ⊆ [n]，给出 γ×γ 在子空间中的两种判定结果"""
    report = []
    for gamma in nonempty_index_sets(handle.n):
        v = square_vector(gamma, handle.n)
        report.append({
            "gamma": gamma.sorted(),
            "size": len(gamma),
            "member": handle.contains(v),
            "row_reduce_member": handle.basis.contains(v),
        })
    return report


def square_residue_ok(handle: SubspaceHandle) -> bool:
    """检查 γ×γ ∈ 子空间 ⇔ |γ| ≡ 0 (mod 4)"""
    return all(
        row["member"] == row["row_reduce_member"] == (row["size"] % 4 == 0)
        for row in square_membership_report(handle)
    )


def format_basis(basis: Basis) -> str:
    return format_grid_blocks(basis.elements)


def parse_basis(text: str) -> Basis:
    return row_reduce(parse_grid_blocks(text))


def handle_to_json(handle: SubspaceHandle) -> str:
    """句柄序列化：JSON 头记录成员判定方式，基以网格文本块存放"""
    return json.dumps({
        "n": handle.n,
        "membership_mode": handle.membership_mode.value,
        "rank": handle.rank,
        "functionals": [format_grid_blocks([f]) for f in handle.functionals],
        "basis": format_basis(handle.basis),
    }, indent=2)


def handle_from_json(text: str) -> SubspaceHandle:
    data = json.loads(text)
    basis = parse_basis(data["basis"])
    mode = MembershipMode(data["membership_mode"])
    functionals = tuple(v for block in data.get("functionals", []) for v in parse_grid_blocks(block))
    return SubspaceHandle(basis, mode, functionals)
