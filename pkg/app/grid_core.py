"""
网格向量核心模块
把 F₂^{n²} 的元素看作 n×n 的 0/1 网格，提供位并行的加法、乘积集合构造、
差集形状分类以及规范文本格式的解析和输出。

约定:
    - 格子 (x, y) 从 1 开始编号，x 为行号（向下增加），y 为列号（向右增加）
    - 格子 (x, y) 对应整数的第 (x-1)·n + (y-1) 位
"""

from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterable, Iterator, Tuple

import numpy as np


class QdhjError(Exception):
    """工具包所有输入错误的基类"""


class DimensionError(QdhjError):
    """网格边长不一致"""


class ArgumentError(QdhjError):
    """参数不合法（空的 γ、越界下标、不相交要求被破坏等）"""


class GuardError(QdhjError):
    """规模保护：请求的计算超出允许的上限"""


class ConstructionError(QdhjError):
    """内部构造失败，属于正确性缺陷而不是输入错误"""


class GridParseError(QdhjError):
    """
    网格文本解析错误

    属性:
        line (int): 出错的行号（从 1 开始）
        column (int): 出错的列号（从 1 开始）
    """

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True, order=True)
class GridVector:
    """
    F₂^{n²} 中的元素，用 n×n 位网格表示

    属性:
        n (int): 网格边长
        bits (int): 长度为 n² 的位串，格子 (x, y) 在第 (x-1)·n + (y-1) 位

    排序按 (n, bits) 进行，即规范位序。
    """

    n: int
    bits: int

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError(f"grid side must be positive, got {self.n}")
        if self.bits < 0 or self.bits >> (self.n * self.n):
            raise ArgumentError(f"bits outside a {self.n}x{self.n} grid")

    def __xor__(self, other: "GridVector") -> "GridVector":
        return xor_add(self, other)

    def get(self, x: int, y: int) -> bool:
        """读取格子 (x, y) 的值"""
        return bool((self.bits >> cell_index(self.n, x, y)) & 1)

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()

    @property
    def is_zero(self) -> bool:
        return self.bits == 0

    def cells(self) -> Iterator[Tuple[int, int]]:
        """按行优先顺序列出所有置位的格子"""
        bits = self.bits
        while bits:
            low = bits & -bits
            idx = low.bit_length() - 1
            yield idx // self.n + 1, idx % self.n + 1
            bits ^= low

    def __str__(self) -> str:
        return format_grid(self)


@dataclass(frozen=True)
class IndexSet:
    """
    {1, …, n} 的子集，即 γ、γ₁、γ₂

    属性:
        n (int): 全集大小
        members (FrozenSet[int]): 成员
    """

    n: int
    members: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        bad = [i for i in self.members if not 1 <= i <= self.n]
        if bad:
            raise ArgumentError(f"indices {sorted(bad)} outside [1, {self.n}]")

    @classmethod
    def of(cls, n: int, members: Iterable[int]) -> "IndexSet":
        return cls(n, frozenset(members))

    @classmethod
    def from_mask(cls, n: int, mask: int) -> "IndexSet":
        return cls(n, frozenset(i + 1 for i in range(n) if (mask >> i) & 1))

    @property
    def mask(self) -> int:
        return sum(1 << (i - 1) for i in self.members)

    @property
    def is_empty(self) -> bool:
        return not self.members

    def sorted(self) -> list:
        return sorted(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.sorted())) + "}"


class ShapeKind(str, Enum):
    ZERO = "Zero"
    SQUARE = "Square"
    RECT = "Rect"
    OTHER = "Other"


@dataclass(frozen=True)
class Shape:
    """
    差集形状：零、方形 γ×γ、矩形 γ₁×γ₂ 或其他

    属性:
        kind (ShapeKind): 形状类别
        gamma1 (IndexSet): 行支撑（方形/矩形时有效）
        gamma2 (IndexSet): 列支撑（方形/矩形时有效）
    """

    kind: ShapeKind
    gamma1: IndexSet
    gamma2: IndexSet

    def __post_init__(self):
        if self.kind == ShapeKind.SQUARE:
            if self.gamma1 != self.gamma2 or self.gamma1.is_empty:
                raise ArgumentError("Square shape needs equal nonempty supports")
        if self.kind == ShapeKind.RECT:
            if self.gamma1.is_empty or self.gamma2.is_empty:
                raise ArgumentError("Rect shape needs nonempty supports")
            if self.gamma1 == self.gamma2:
                raise ArgumentError("equal supports must be reported as Square")


def cell_index(n: int, x: int, y: int) -> int:
    if not (1 <= x <= n and 1 <= y <= n):
        raise ArgumentError(f"cell ({x},{y}) outside a {n}x{n} grid")
    return (x - 1) * n + (y - 1)


def zero(n: int) -> GridVector:
    return GridVector(n, 0)


def full(n: int) -> GridVector:
    return GridVector(n, (1 << (n * n)) - 1)


def cell(n: int, x: int, y: int) -> GridVector:
    """只有格子 (x, y) 置位的向量"""
    return GridVector(n, 1 << cell_index(n, x, y))


def from_cells(n: int, cells: Iterable[Tuple[int, int]]) -> GridVector:
    """由格子列表构造向量；重复的格子按 F₂ 相加抵消"""
    bits = 0
    for x, y in cells:
        bits ^= 1 << cell_index(n, x, y)
    return GridVector(n, bits)


def unit_vectors(n: int) -> list:
    return [GridVector(n, 1 << i) for i in range(n * n)]


def _check_same_n(a: GridVector, b: GridVector):
    if a.n != b.n:
        raise DimensionError(f"grid sizes differ: {a.n} vs {b.n}")


def xor_add(a: GridVector, b: GridVector) -> GridVector:
    """F₂ 加法，即两个网格的对称差"""
    _check_same_n(a, b)
    return GridVector(a.n, a.bits ^ b.bits)


def and_mask(a: GridVector, b: GridVector) -> GridVector:
    _check_same_n(a, b)
    return GridVector(a.n, a.bits & b.bits)


def popcount(v: GridVector) -> int:
    return v.popcount


def _row_mask(n: int) -> int:
    return (1 << n) - 1


def _product_bits(n: int, row_mask: int, col_mask: int) -> int:
    bits = 0
    for x in range(n):
        if (row_mask >> x) & 1:
            bits |= col_mask << (x * n)
    return bits


def product_vector(gamma1: IndexSet, gamma2: IndexSet, n: int) -> GridVector:
    """
    构造 γ₁×γ₂ 的示性向量

    参数:
        gamma1: IndexSet - 行下标集合
        gamma2: IndexSet - 列下标集合
        n: int - 网格边长

    返回:
        GridVector - 格子 (x, y) 置位当且仅当 x ∈ γ₁ 且 y ∈ γ₂
    """
    if gamma1.n > n or gamma2.n > n:
        raise ArgumentError(f"index sets over [{max(gamma1.n, gamma2.n)}] exceed n={n}")
    return GridVector(n, _product_bits(n, gamma1.mask, gamma2.mask))


def square_vector(gamma: IndexSet, n: int) -> GridVector:
    return product_vector(gamma, gamma, n)


def supports(v: GridVector) -> Tuple[IndexSet, IndexSet]:
    """返回 (行支撑 R, 列支撑 C)"""
    n = v.n
    rows = 0
    cols = 0
    for x in range(n):
        row = (v.bits >> (x * n)) & _row_mask(n)
        if row:
            rows |= 1 << x
            cols |= row
    return IndexSet.from_mask(n, rows), IndexSet.from_mask(n, cols)


def classify_shape(v: GridVector) -> Shape:
    """
    差集形状分类

    计算行支撑 R 和列支撑 C，若 v 恰好等于 R×C 则为方形（R = C）或矩形，
    否则为 Other。方形优先于矩形。
    """
    r, c = supports(v)
    if v.is_zero:
        return Shape(ShapeKind.ZERO, r, c)
    if _product_bits(v.n, r.mask, c.mask) != v.bits:
        return Shape(ShapeKind.OTHER, r, c)
    if r == c:
        return Shape(ShapeKind.SQUARE, r, c)
    return Shape(ShapeKind.RECT, r, c)


def nonempty_index_sets(n: int) -> Iterator[IndexSet]:
    """按掩码升序枚举 [n] 的所有非空子集"""
    for mask in range(1, 1 << n):
        yield IndexSet.from_mask(n, mask)


def brute_force_shape(v: GridVector) -> Shape:
    """穷举所有 (γ₁, γ₂) 候选的形状判定，作为 classify_shape 的对照"""
    n = v.n
    empty = IndexSet(n, frozenset())
    if v.is_zero:
        return Shape(ShapeKind.ZERO, empty, empty)
    for m1 in range(1, 1 << n):
        for m2 in range(1, 1 << n):
            if _product_bits(n, m1, m2) == v.bits:
                g1, g2 = IndexSet.from_mask(n, m1), IndexSet.from_mask(n, m2)
                kind = ShapeKind.SQUARE if m1 == m2 else ShapeKind.RECT
                return Shape(kind, g1, g2)
    r, c = supports(v)
    return Shape(ShapeKind.OTHER, r, c)


def to_array(v: GridVector) -> np.ndarray:
    """转换为 n×n 的 uint8 数组"""
    nbits = v.n * v.n
    raw = np.frombuffer(v.bits.to_bytes((nbits + 7) // 8, "little"), dtype=np.uint8)
    flat = np.unpackbits(raw, bitorder="little")[:nbits]
    return flat.reshape(v.n, v.n)


def from_array(arr: np.ndarray) -> GridVector:
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionError(f"expected a nonempty square array, got shape {arr.shape}")
    flat = (arr.reshape(-1) & 1).astype(np.uint8)
    packed = np.packbits(flat, bitorder="little")
    return GridVector(arr.shape[0], int.from_bytes(packed.tobytes(), "little"))


def parse_grid(text: str) -> GridVector:
    """
    解析规范网格文本

    参数:
        text: str - n 行，每行恰好 n 个 '0'/'1' 字符，第 i 行对应第 i 行格子

    返回:
        GridVector - 解析结果

    异常:
        GridParseError - 非字符串、空输入、行长不一致或出现其他字符时抛出，带行列号
    """
    if not isinstance(text, str):
        raise GridParseError(f"grid text must be a string, got {type(text).__name__}", 1, 1)
    if not text or not text.strip("\n"):
        raise GridParseError("empty grid text", 1, 1)
    body = text[:-1] if text.endswith("\n") else text
    lines = body.split("\n")
    n = len(lines)
    for row, line in enumerate(lines, start=1):
        if len(line) != n:
            raise GridParseError(
                f"expected {n} characters, found {len(line)}", row, min(len(line), n) + 1
            )
        for col, ch in enumerate(line, start=1):
            if ch not in "01":
                raise GridParseError(f"unexpected character {ch!r}", row, col)
    arr = np.array([[ch == "1" for ch in line] for line in lines], dtype=np.uint8)
    return from_array(arr)


def format_grid(v: GridVector) -> str:
    """输出规范网格文本：每行以换行结尾，无额外空白"""
    arr = to_array(v)
    return "".join("".join("1" if b else "0" for b in row) + "\n" for row in arr)


def parse_grid_blocks(text: str) -> list:
    """解析以空行分隔的多个网格文本块"""
    blocks = []
    current = []
    offset = 0
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.strip() == "":
            if current:
                blocks.append((offset, "\n".join(current) + "\n"))
                current = []
            continue
        if not current:
            offset = lineno - 1
        current.append(line)
    if current:
        blocks.append((offset, "\n".join(current) + "\n"))
    vectors = []
    for offset, block in blocks:
        try:
            vectors.append(parse_grid(block))
        except GridParseError as e:
            raise GridParseError(str(e).split(" (line")[0], e.line + offset, e.column) from e
    return vectors


def format_grid_blocks(vectors: Iterable[GridVector]) -> str:
    return "\n".join(format_grid(v) for v in vectors)


def shape_of_pair(a: GridVector, b: GridVector) -> Shape:
    return classify_shape(xor_add(a, b))
