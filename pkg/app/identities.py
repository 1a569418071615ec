"""
恒等式校验模块
校验方形集合族的幂集奇偶恒等式，以及子空间元素两两相加时的
表示次数关系（计数等式与三元组不等式）。
"""

import csv
import hashlib
import io
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.logger import setup_logging
from app.grid_core import (
    ArgumentError,
    DimensionError,
    GridVector,
    IndexSet,
    format_grid,
    square_vector,
)
from app.f2_subspace import from_elements, row_reduce, span_enumerate

TAG = __name__
logger = setup_logging()


def _submasks(mask: int):
    """枚举 mask 的全部子掩码（含 0）"""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def powerset_square_sum(gamma: IndexSet, n: int) -> GridVector:
    """
    对 γ 的所有非空子集 a 求 a×a 的 F₂ 和

    |γ| ≥ 3 时结果为 0；|γ| = 2 时为两个非对角格；|γ| = 1 时为该对角格。
    """
    if gamma.is_empty:
        raise ArgumentError("gamma must be nonempty")
    total = 0
    for sub in _submasks(gamma.mask):
        if sub:
            total ^= square_vector(IndexSet.from_mask(gamma.n, sub), n).bits
    return GridVector(n, total)


def shifted_powerset_sum(gamma1: IndexSet, gamma2: IndexSet, n: int) -> Tuple[GridVector, int]:
    """
    对 γ₁ 的所有子集 a（含空集）求 (a∪γ₂)×(a∪γ₂) 的 F₂ 和

    返回:
        Tuple[GridVector, int] - (和, 被加项个数 2^{|γ₁|})
    """
    if gamma1.members & gamma2.members:
        raise ArgumentError(f"gamma1 {gamma1} and gamma2 {gamma2} must be disjoint")
    base = gamma2.mask
    total = 0
    count = 0
    for sub in _submasks(gamma1.mask):
        total ^= square_vector(IndexSet.from_mask(max(gamma1.n, gamma2.n), sub | base), n).bits
        count += 1
    return GridVector(n, total), count


def cell_multiplicities(gamma: IndexSet) -> Tuple[int, Optional[int]]:
    """
    γ 的非空子集中包含固定对角格 (i,i) 的个数，以及包含固定非对角格 (i,j) 的个数

    返回:
        (2^{|γ|−1}, 2^{|γ|−2})；|γ| = 1 时没有非对角格，第二项为 None
    """
    size = len(gamma)
    if size < 1:
        raise ArgumentError("cell multiplicities need |gamma| >= 1")
    return 1 << (size - 1), (1 << (size - 2)) if size >= 2 else None


def cell_multiplicities_bruteforce(gamma: IndexSet) -> Tuple[int, Optional[int]]:
    """直接枚举子集计数，作为公式的对照"""
    members = gamma.sorted()
    if not members:
        raise ArgumentError("cell multiplicities need |gamma| >= 1")
    i = members[0]
    pair = members[:2] if len(members) >= 2 else None
    diag = off = 0
    for r in range(1, len(members) + 1):
        for sub in combinations(members, r):
            if i in sub:
                diag += 1
            if pair and pair[0] in sub and pair[1] in sub:
                off += 1
    return diag, (off if pair else None)


def predicted_powerset_residual(gamma: IndexSet, n: int) -> GridVector:
    """由重数公式预测的和：重数为奇数的格子"""
    diag, off = cell_multiplicities(gamma)
    cells = 0
    square = square_vector(gamma, n).bits
    for x in gamma.members:
        for y in gamma.members:
            odd = diag % 2 if x == y else (off or 0) % 2
            if odd:
                cells |= 1 << ((x - 1) * n + (y - 1))
    return GridVector(n, cells & square)


@dataclass
class RepCountTable:
    """
    表示次数表

    属性:
        M (int): 元素个数
        n (int): 网格边长
        counts (Dict[int, int]): γ（位串）→ r(γ)，即满足 a_i ⊕ a_j = γ 的无序对数
        violations (List[str]): 被破坏的关系
    """

    M: int
    n: int
    counts: Dict[int, int]
    violations: List[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def max_r(self) -> int:
        return max(self.counts.values(), default=0)

    @property
    def triple_lhs(self) -> int:
        return sum(4 * comb(r, 2) for r in self.counts.values())

    @property
    def triple_rhs(self) -> int:
        return 3 * comb(self.M, 3)

    @property
    def sum_ok(self) -> bool:
        return self.total == comb(self.M, 2)

    @property
    def max_ok(self) -> bool:
        return self.max_r <= self.M // 2

    @property
    def triple_ok(self) -> bool:
        return self.triple_lhs <= self.triple_rhs

    def r(self, gamma: GridVector) -> int:
        return self.counts.get(gamma.bits, 0)

    def summary(self) -> dict:
        return {
            "M": self.M,
            "distinct_gammas": len(self.counts),
            "sum_r": self.total,
            "pairs": comb(self.M, 2),
            "sum_ok": self.sum_ok,
            "max_r": self.max_r,
            "max_ok": self.max_ok,
            "triple_lhs": self.triple_lhs,
            "triple_rhs": self.triple_rhs,
            "triple_ok": self.triple_ok,
            "violations": list(self.violations),
        }


def _check_elements(elements: Sequence[GridVector]) -> int:
    if not elements:
        return 0
    n = elements[0].n
    for v in elements:
        if v.n != n:
            raise DimensionError(f"grid sizes differ: {n} vs {v.n}")
    if len({v.bits for v in elements}) != len(elements):
        raise ArgumentError("elements must be distinct")
    return n


def _count_range(bits: List[int], start: int, stop: int) -> Counter:
    counts = Counter()
    for i in range(start, stop):
        a = bits[i]
        for b in bits[i + 1:]:
            counts[a ^ b] += 1
    return counts


def representation_counts(elements: Sequence[GridVector], threads: int = 1) -> RepCountTable:
    """
    统计所有无序对的和 γ 的表示次数 r(γ)

    校验:
    1. Σ r(γ) = C(M, 2)
    2. r(γ) ≤ ⌊M/2⌋
    3. Σ 4·C(r(γ), 2) ≤ 3·C(M, 3)

    被破坏的关系记录在 violations 中并写入警告日志，不会被静默接受。
    """
    n = _check_elements(elements)
    bits = [v.bits for v in elements]
    M = len(bits)
    workers = max(1, threads)
    bounds = np.linspace(0, M, workers + 1).astype(int).tolist()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda r: _count_range(bits, r[0], r[1]), zip(bounds, bounds[1:])))
    counts = Counter()
    for part in parts:
        counts.update(part)
    table = RepCountTable(M, n, dict(counts))
    if not table.sum_ok:
        table.violations.append(f"sum r = {table.total} != C({M},2) = {comb(M, 2)}")
    if not table.max_ok:
        table.violations.append(f"max r = {table.max_r} > floor(M/2) = {M // 2}")
    if not table.triple_ok:
        table.violations.append(f"triple count {table.triple_lhs} > {table.triple_rhs}")
    for message in table.violations:
        logger.bind(tag=TAG).warning(f"表示次数关系被破坏: {message}")
    return table


def representation_chains(elements: Sequence[GridVector]) -> Dict[int, List[Tuple[int, int]]]:
    """
    每个 γ 的等式链 γ = a_i + a_j = a_k + a_l = …，以 1 起始的下标对给出
    """
    _check_elements(elements)
    chains: Dict[int, List[Tuple[int, int]]] = {}
    for (i, a), (j, b) in combinations(enumerate(elements, start=1), 2):
        chains.setdefault(a.bits ^ b.bits, []).append((i, j))
    return chains


def check_quadruple_rule(elements: Sequence[GridVector]) -> Tuple[int, List[tuple]]:
    """
    交换规则：若 γ = a_m + a_n = a_p + a_q，则 a_m + a_p = a_n + a_q 且 a_m + a_q = a_n + a_p

    返回:
        (检查次数, 违反的 (m, n, p, q) 列表)
    """
    bits = [v.bits for v in elements]
    checks = 0
    bad = []
    for chain in representation_chains(elements).values():
        for (m, n), (p, q) in combinations(chain, 2):
            am, an, ap, aq = bits[m - 1], bits[n - 1], bits[p - 1], bits[q - 1]
            checks += 1
            if am ^ ap != an ^ aq or am ^ aq != an ^ ap:
                bad.append((m, n, p, q))
    return checks, bad


def random_subspace_elements(n: int, m: int, seed: int) -> List[GridVector]:
    """
    随机 m 维子空间的全部 2^m − 1 个非零元素

    前 m 个是独立的基向量，其余按 Gray 码顺序排列。
    """
    if not 1 <= m <= n * n:
        raise ArgumentError(f"dimension {m} outside [1, {n * n}]")
    rng = np.random.default_rng(seed)
    nbytes = (n * n + 7) // 8
    mask = (1 << (n * n)) - 1
    basis: List[GridVector] = []
    while len(basis) < m:
        v = GridVector(n, int.from_bytes(rng.bytes(nbytes), "little") & mask)
        if v.bits and row_reduce(basis + [v]).rank == len(basis) + 1:
            basis.append(v)
    seen = {v.bits for v in basis}
    rest = [v for v in span_enumerate(from_elements(basis)) if v.bits and v.bits not in seen]
    return basis + rest


def gamma_digest(v: GridVector) -> str:
    return hashlib.sha1(format_grid(v).encode("ascii")).hexdigest()[:12]


def table_to_csv(table: RepCountTable) -> str:
    """CSV：每行 γ 的网格文本摘要和 r，最后一行为汇总"""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["gamma", "r"])
    for bits, r in sorted(table.counts.items()):
        writer.writerow([gamma_digest(GridVector(table.n, bits)), r])
    s = table.summary()
    writer.writerow([
        "summary",
        f"sum_r={s['sum_r']};pairs={s['pairs']};sum_ok={s['sum_ok']};max_r={s['max_r']};"
        f"max_ok={s['max_ok']};triple={s['triple_lhs']}<={s['triple_rhs']};triple_ok={s['triple_ok']}",
    ])
    return out.getvalue()
