"""
配对搜索模块
在 {0,1}^{n²} 的稠密子集中寻找差集为矩形 γ₁×γ₂ 或方形 γ×γ 的元素对，
以及有向的组合线，并提供可校验的证书及其 JSON 格式。
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from config.logger import setup_logging
from config.settings import DEFAULT_RUN_CONFIG
from app.grid_core import (
    ArgumentError,
    DimensionError,
    GridVector,
    GuardError,
    IndexSet,
    Shape,
    ShapeKind,
    cell,
    classify_shape,
    format_grid,
    nonempty_index_sets,
    parse_grid,
    product_vector,
    square_vector,
)
from app.f2_subspace import SubspaceHandle, even_weight_handle, span_enumerate

TAG = __name__
logger = setup_logging()

# 物化点集时允许的最大元素个数
MAX_MATERIALIZED = 1 << 24


class Representation(str, Enum):
    TABLE = "table"
    ASSOCIATIVE = "associative"


class PointSet:
    """
    {0,1}^{n²} 的显式子集

    特点:
    - n ≤ 5 时使用全空间位表（numpy 布尔数组），否则使用哈希集合
    - 成员按规范位序（整数升序）排列，保证搜索顺序确定
    - 构造后不可修改
    """

    def __init__(self, n: int, members: Iterable, representation: Optional[Representation] = None):
        self.n = n
        keys = set()
        for m in members:
            if isinstance(m, GridVector):
                if m.n != n:
                    raise DimensionError(f"grid sizes differ: {n} vs {m.n}")
                keys.add(m.bits)
            else:
                keys.add(int(m))
        self.keys: Tuple[int, ...] = tuple(sorted(keys))
        if self.keys and (self.keys[0] < 0 or self.keys[-1] >> (n * n)):
            raise ArgumentError(f"member outside a {n}x{n} grid")
        if representation is None:
            representation = (
                Representation.TABLE if n <= DEFAULT_RUN_CONFIG["table_max_n"]
                else Representation.ASSOCIATIVE
            )
        if representation == Representation.TABLE and n > DEFAULT_RUN_CONFIG["table_max_n"]:
            raise GuardError(f"bit table refused for n={n}")
        self.representation = representation
        self._set = frozenset(self.keys)
        self.table: Optional[np.ndarray] = None
        self.array: Optional[np.ndarray] = None
        if representation == Representation.TABLE:
            self.array = np.array(self.keys, dtype=np.int64)
            self.table = np.zeros(1 << (n * n), dtype=bool)
            self.table[self.array] = True

    @property
    def universe(self) -> int:
        return 1 << (self.n * self.n)

    @property
    def density(self) -> float:
        return len(self.keys) / self.universe

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, v) -> bool:
        bits = v.bits if isinstance(v, GridVector) else int(v)
        if isinstance(v, GridVector) and v.n != self.n:
            return False
        return bits in self._set

    def __iter__(self):
        return (GridVector(self.n, k) for k in self.keys)

    def with_representation(self, representation: Representation) -> "PointSet":
        return PointSet(self.n, self.keys, representation)


def pigeonhole_threshold(S: PointSet) -> Optional[int]:
    """⌈1/δ⌉ = ⌈2^{n²} / |S|⌉；空集返回 None"""
    if not len(S):
        return None
    return -(-S.universe // len(S))


def point_set_from_subspace(handle: SubspaceHandle,
                            representation: Optional[Representation] = None) -> PointSet:
    if handle.rank > MAX_MATERIALIZED.bit_length() - 1:
        raise GuardError(f"subspace of rank {handle.rank} is too large to materialize")
    return PointSet(handle.n, (v.bits for v in span_enumerate(handle)), representation)


def random_point_set(n: int, size: int, seed: int,
                     representation: Optional[Representation] = None) -> PointSet:
    """
    固定种子的随机点集

    参数:
        n: int - 网格边长
        size: int - 元素个数
        seed: int - 随机种子
    """
    universe = 1 << (n * n)
    if not 0 <= size <= universe:
        raise ArgumentError(f"size {size} outside [0, {universe}]")
    if size > MAX_MATERIALIZED:
        raise GuardError(f"random set of size {size} is too large to materialize")
    rng = np.random.default_rng(seed)
    if universe <= 1 << 20:
        keys = rng.choice(universe, size=size, replace=False).tolist()
    else:
        nbytes = (n * n + 7) // 8
        mask = universe - 1
        chosen = set()
        while len(chosen) < size:
            chosen.add(int.from_bytes(rng.bytes(nbytes), "little") & mask)
        keys = list(chosen)
    return PointSet(n, keys, representation)


def translate(S: PointSet, t: GridVector) -> PointSet:
    """平移 S + t；平移不改变任何两点的差集"""
    if t.n != S.n:
        raise DimensionError(f"grid sizes differ: {S.n} vs {t.n}")
    return PointSet(S.n, (k ^ t.bits for k in S.keys), S.representation)


def odd_weight_coset(n: int, representation: Optional[Representation] = None) -> PointSet:
    """奇重量陪集：偶重量子空间平移 (1,1) 格，与之同样稠密、差集完全相同"""
    return translate(point_set_from_subspace(even_weight_handle(n), representation), cell(n, 1, 1))


class CertificateKind(str, Enum):
    RECT_PAIR = "RectPair"
    SQUARE_PAIR = "SquarePair"
    LINE = "Line"


@dataclass(frozen=True)
class Certificate:
    """
    可校验的见证

    属性:
        kind (CertificateKind): 证书类别
        a, b (GridVector): 被搜索集合中的两个元素
        shape (Shape): a ⊕ b 的形状
        oriented (bool): a 在通配格上全为 0 且 b 全为 1
        search (dict): 搜索方式 {"mode", "seed"}
    """

    kind: CertificateKind
    a: GridVector
    b: GridVector
    shape: Shape
    oriented: bool
    search: Dict = field(default_factory=lambda: {"mode": "exhaustive", "seed": None},
                         compare=False)

    @property
    def n(self) -> int:
        return self.a.n


@dataclass
class SearchReport:
    """
    搜索结果

    属性:
        certificates (List[Certificate]): 找到的证书（按 γ 掩码、再按 a 升序）
        complete (bool): 是否穷尽了全部搜索空间且未被 limit 截断
        mode (str): exhaustive / sampled
        seed (Optional[int]): 抽样种子
        probes (int): 成员探测次数
    """

    certificates: List[Certificate]
    complete: bool
    mode: str
    seed: Optional[int] = None
    probes: int = 0


def is_oriented(a: GridVector, b: GridVector) -> bool:
    """a 在差集上全为 0（于是 b 在差集上全为 1，且其余位置相同）"""
    return (a.bits & (a.bits ^ b.bits)) == 0


def _make_certificate(kind: CertificateKind, n: int, a: int, b: int, search: Dict) -> Certificate:
    va, vb = GridVector(n, a), GridVector(n, b)
    return Certificate(kind, va, vb, classify_shape(GridVector(n, a ^ b)), is_oriented(va, vb), dict(search))


def find_rect_pair(S: PointSet, gamma1: IndexSet) -> Optional[Certificate]:
    """
    抽屉原理求矩形差集对

    对每个 i ∈ [n] 和每个 s ∈ S 计算 b = s ⊕ (γ₁×{i})：
    1. 若 b ∈ S，返回 (s, b)，差集为 γ₁×{i}
    2. 否则把 b 记入表中；若 b 已由 (j, t) 记录，返回 (s, t)，差集为 γ₁×{i,j}

    n ≥ ⌈1/δ⌉ 时必然成功；低于阈值时可能返回 None。
    成员按规范位序遍历，i 升序。

    参数:
        S: PointSet - 被搜索的集合
        gamma1: IndexSet - 非空的行集合 γ₁

    返回:
        Optional[Certificate] - 找到的证书，未找到时为 None
    """
    if gamma1.is_empty:
        raise ArgumentError("gamma1 must be nonempty")
    n = S.n
    slabs = [product_vector(gamma1, IndexSet.of(n, [i]), n).bits for i in range(1, n + 1)]
    search = {"mode": "exhaustive", "seed": None}
    if S.representation == Representation.TABLE:
        cert = _rect_pair_table(S, slabs, search)
    else:
        cert = _rect_pair_associative(S, slabs, search)
    threshold = pigeonhole_threshold(S)
    if cert is None and threshold is not None and n >= threshold:
        logger.bind(tag=TAG).error(f"抽屉原理保证被破坏: n={n}, |S|={len(S)}, γ₁={gamma1}")
    return cert


def _rect_pair_associative(S: PointSet, slabs: List[int], search: Dict) -> Optional[Certificate]:
    recorded: Dict[int, Tuple[int, int]] = {}
    for i, g in enumerate(slabs, start=1):
        for s in S.keys:
            b = s ^ g
            if b in S._set:
                return _make_certificate(CertificateKind.RECT_PAIR, S.n, s, b, search)
            hit = recorded.get(b)
            if hit is not None:
                return _make_certificate(CertificateKind.RECT_PAIR, S.n, s, hit[1], search)
            recorded[b] = (i, s)
    return None


def _rect_pair_table(S: PointSet, slabs: List[int], search: Dict) -> Optional[Certificate]:
    """
    位表上的向量化版本，与哈希表版本逐步等价

    第 i 层的碰撞 b = s ⊕ g_i = t ⊕ g_j（j < i）等价于 s ⊕ g_i ⊕ g_j ∈ S，
    因为前面各层的所有 t 都已记录且没有提前返回。
    """
    members = S.array
    if members is None or not len(members):
        return None
    for i, g in enumerate(slabs):
        in_s = S.table[members ^ g]
        collide = np.zeros(len(members), dtype=bool)
        for h in slabs[:i]:
            collide |= S.table[members ^ (g ^ h)]
        hits = np.flatnonzero(in_s | collide)
        if not hits.size:
            continue
        p = int(hits[0])
        s = int(members[p])
        if in_s[p]:
            return _make_certificate(CertificateKind.RECT_PAIR, S.n, s, s ^ g, search)
        for h in slabs[:i]:
            t = s ^ g ^ h
            if S.table[t]:
                return _make_certificate(CertificateKind.RECT_PAIR, S.n, s, t, search)
    return None


def rect_pair_census(S: PointSet) -> List[dict]:
    """
    对每个非空 γ₁ 运行抽屉原理搜索，并记录所得对是否已是矩形组合线
    （其中一个元素在 γ₁×γ₂ 上全为 1，另一个全为 0）
    """
    rows = []
    for gamma1 in nonempty_index_sets(S.n):
        cert = find_rect_pair(S, gamma1)
        row = {"gamma1": gamma1.sorted(), "found": cert is not None}
        if cert is not None:
            row.update({
                "gamma2": cert.shape.gamma2.sorted(),
                "shape": cert.shape.kind.value,
                "line": cert.oriented or is_oriented(cert.b, cert.a),
            })
        rows.append(row)
    return rows


def _normalize_pair(s: int, b: int, q: int) -> Tuple[int, int]:
    """有向时把在通配格上为 0 的元素放在前面，否则较小者在前"""
    if s & q == 0:
        return s, b
    if b & q == 0:
        return b, s
    return (s, b) if s < b else (b, s)


def _square_pairs_for_gamma(S: PointSet, q: int, oriented_only: bool) -> List[Tuple[int, int]]:
    pairs = []
    if S.representation == Representation.TABLE and S.array is not None and len(S.array):
        members = S.array
        partners = members ^ q
        hit = np.flatnonzero(S.table[partners])
        candidates = zip(members[hit].tolist(), partners[hit].tolist())
    else:
        candidates = ((s, s ^ q) for s in S.keys if (s ^ q) in S._set)
    for s, b in candidates:
        a, c = _normalize_pair(s, b, q)
        if a != s:
            continue
        if oriented_only and a & q:
            continue
        pairs.append((a, c))
    return pairs


def _square_search(S: PointSet, limit: int, mode: str, seed: Optional[int], budget: Optional[int],
                   threads: int, oriented_only: bool) -> SearchReport:
    n = S.n
    kind = CertificateKind.LINE if oriented_only else CertificateKind.SQUARE_PAIR
    if mode == "exhaustive":
        if n > DEFAULT_RUN_CONFIG["table_max_n"]:
            raise GuardError(f"exhaustive square search refused for n={n}; use sampled mode")
        search = {"mode": "exhaustive", "seed": None}
        squares = [square_vector(g, n).bits for g in nonempty_index_sets(n)]
        start = time.time()
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            per_gamma = list(pool.map(lambda q: _square_pairs_for_gamma(S, q, oriented_only), squares))
        found = [pair for pairs in per_gamma for pair in pairs]
        logger.bind(tag=TAG).debug(f"方形差集搜索耗时: {time.time() - start:.3f}s | 共 {len(found)} 对")
        certs = [_make_certificate(kind, n, a, b, search) for a, b in found[:limit]]
        return SearchReport(certs, len(found) <= limit, mode, None, len(S) * len(squares))

    if mode != "sampled":
        raise ArgumentError(f"unknown search mode {mode!r}")
    budget = DEFAULT_RUN_CONFIG["budget"] if budget is None else budget
    seed = DEFAULT_RUN_CONFIG["seed"] if seed is None else seed
    search = {"mode": "sampled", "seed": seed}
    rng = np.random.default_rng(seed)
    seen = set()
    certs: List[Certificate] = []
    probes = 0
    if len(S):
        while probes < budget and len(certs) < limit:
            mask = int(rng.integers(1, 1 << n))
            s = S.keys[int(rng.integers(0, len(S)))]
            q = square_vector(IndexSet.from_mask(n, mask), n).bits
            probes += 1
            b = s ^ q
            if b not in S._set:
                continue
            a, c = _normalize_pair(s, b, q)
            if oriented_only and a & q:
                continue
            if (a, c) in seen:
                continue
            seen.add((a, c))
            certs.append(_make_certificate(kind, n, a, c, search))
    if probes >= budget:
        logger.bind(tag=TAG).warning(f"抽样预算已用尽: {probes} 次探测，结果不完整")
    return SearchReport(certs, False, mode, seed, probes)


def find_square_pairs(S: PointSet, limit: int, mode: str = "exhaustive", seed: Optional[int] = None,
                      budget: Optional[int] = None, threads: int = 1) -> SearchReport:
    """
    搜索差集为 γ×γ 的元素对

    穷举模式下对每个非空 γ（掩码升序）和每个 s ∈ S 探测 s ⊕ (γ×γ) ∈ S，
    共 |S|·(2ⁿ−1) 次探测；多个 γ 可以并行。
    抽样模式使用固定种子的探测序列，预算用尽时结果标记为不完整。
    """
    return _square_search(S, limit, mode, seed, budget, threads, oriented_only=False)


def find_line(S: PointSet, limit: int, mode: str = "exhaustive", seed: Optional[int] = None,
              budget: Optional[int] = None, threads: int = 1) -> SearchReport:
    """搜索有向的方形组合线：s⁰ 在 γ×γ 上全为 0，s¹ 全为 1，其余位置相同"""
    return _square_search(S, limit, mode, seed, budget, threads, oriented_only=True)


def verify_certificate(cert: Certificate, S: PointSet) -> bool:
    """
    重新计算成员关系、差集形状和方向，全部与记录一致时返回 True
    """
    a, b = cert.a, cert.b
    if a.n != b.n or a.n != S.n or a == b:
        return False
    if a not in S or b not in S:
        return False
    shape = classify_shape(a ^ b)
    if shape != cert.shape:
        return False
    if is_oriented(a, b) != cert.oriented:
        return False
    if cert.kind == CertificateKind.RECT_PAIR:
        return shape.kind in (ShapeKind.SQUARE, ShapeKind.RECT)
    if cert.kind == CertificateKind.SQUARE_PAIR:
        return shape.kind == ShapeKind.SQUARE
    return shape.kind == ShapeKind.SQUARE and cert.oriented


def certificate_to_dict(cert: Certificate) -> dict:
    return {
        "kind": cert.kind.value,
        "n": cert.n,
        "a": format_grid(cert.a),
        "b": format_grid(cert.b),
        "gamma1": cert.shape.gamma1.sorted(),
        "gamma2": cert.shape.gamma2.sorted(),
        "oriented": cert.oriented,
        "search": {"mode": cert.search.get("mode"), "seed": cert.search.get("seed")},
    }


def certificate_to_json(cert: Certificate) -> str:
    return json.dumps(certificate_to_dict(cert), indent=2)


def certificate_from_dict(data: dict) -> Certificate:
    """
    由 JSON 字典还原证书；形状类别由 γ₁、γ₂ 是否相等决定

    异常:
        ArgumentError / GridParseError - 字段缺失或格式错误
    """
    try:
        n = int(data["n"])
        a = parse_grid(data["a"])
        b = parse_grid(data["b"])
        g1 = IndexSet.of(n, data["gamma1"])
        g2 = IndexSet.of(n, data["gamma2"])
        kind = CertificateKind(data["kind"])
        oriented = bool(data["oriented"])
        search = dict(data.get("search") or {})
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ArgumentError(f"malformed certificate: {e}") from e
    if a.n != n or b.n != n:
        raise DimensionError(f"certificate grids do not match n={n}")
    shape_kind = ShapeKind.SQUARE if g1 == g2 else ShapeKind.RECT
    return Certificate(kind, a, b, Shape(shape_kind, g1, g2), oriented, search)


def certificate_from_json(text: str) -> Certificate:
    return certificate_from_dict(json.loads(text))


def certificates_from_json(text: str) -> List[Certificate]:
    """
    读取证书文件：单个证书，或者命令输出的信封
    （result.certificate 或 result.certificates）

    异常:
        ArgumentError - 信封里没有证书
    """
    data = json.loads(text)
    if not isinstance(data, dict) or "result" not in data:
        return [certificate_from_dict(data)]
    result = data["result"]
    if not isinstance(result, dict):
        raise ArgumentError("envelope result is not an object")
    if result.get("certificate") is not None:
        return [certificate_from_dict(result["certificate"])]
    certs = result.get("certificates")
    if not isinstance(certs, list) or not certs:
        raise ArgumentError("envelope carries no certificate")
    return [certificate_from_dict(c) for c in certs]
