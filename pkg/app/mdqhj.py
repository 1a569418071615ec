"""
多维二次密度 Hales-Jewett 归纳机制模块
提供可以直接验证的部分：坐标二分下的切片分解、好串提取、
子空间个数上界 T(m)、组合子空间的乘积以及子空间包含性校验，
并在小规模上演示完整的归纳一步。
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from config.logger import setup_logging
from app.grid_core import ArgumentError, GridParseError, GuardError
from app.pair_search import Certificate, CertificateKind, PointSet

TAG = __name__
logger = setup_logging()

Cell = Tuple[int, int]

# 物化全空间时允许的最大规模
MAX_UNIVERSE = 1 << 22
# 字母矩阵用 uint8 存放
MAX_ALPHABET = 256


def grid_domain(N: int) -> Tuple[Cell, ...]:
    """N×N 网格的全部格子（行优先）"""
    if N < 1:
        raise ArgumentError(f"grid side must be positive, got {N}")
    return tuple((x, y) for x in range(1, N + 1) for y in range(1, N + 1))


def rect_domain(rows: int, cols: int) -> Tuple[Cell, ...]:
    if rows < 1 or cols < 1:
        raise ArgumentError(f"bad rectangle {rows}x{cols}")
    return tuple((x, y) for x in range(1, rows + 1) for y in range(1, cols + 1))


def _as_domain(cells: Iterable[Cell]) -> Tuple[Cell, ...]:
    domain = tuple(sorted(set(cells)))
    if not domain:
        raise ArgumentError("coordinate domain must be nonempty")
    return domain


def _grid_side(coords: Sequence[Cell]) -> Optional[int]:
    N = int(round(len(coords) ** 0.5))
    return N if tuple(coords) == grid_domain(N) else None


@dataclass(frozen=True)
class KString:
    """
    一般字母表上的字：{0,…,k−1}^{coords}

    属性:
        k (int): 字母表大小，k ≥ 2
        coords (Tuple[Cell, ...]): 有序坐标域（行优先）
        letters (Tuple[int, ...]): 每个坐标上的字母
    """

    k: int
    coords: Tuple[Cell, ...]
    letters: Tuple[int, ...]

    def __post_init__(self):
        if not 2 <= self.k <= MAX_ALPHABET:
            raise ArgumentError(f"alphabet size must lie in [2, {MAX_ALPHABET}], got {self.k}")
        if len(self.letters) != len(self.coords):
            raise ArgumentError("every coordinate needs exactly one letter")
        if any(not 0 <= c < self.k for c in self.letters):
            raise ArgumentError(f"letters must lie in [0, {self.k - 1}]")

    def restrict(self, cells: Sequence[Cell]) -> "KString":
        pos = {c: i for i, c in enumerate(self.coords)}
        cells = tuple(cells)
        return KString(self.k, cells, tuple(self.letters[pos[c]] for c in cells))


def parse_kstring(text: str, k: int) -> KString:
    """解析 N 行、每行 N 个 k 进制数字的文本"""
    if not isinstance(text, str):
        raise GridParseError(f"k-string text must be a string, got {type(text).__name__}", 1, 1)
    if not text or not text.strip("\n"):
        raise GridParseError("empty k-string text", 1, 1)
    body = text[:-1] if text.endswith("\n") else text
    lines = body.split("\n")
    N = len(lines)
    letters = []
    for row, line in enumerate(lines, start=1):
        if len(line) != N:
            raise GridParseError(f"expected {N} characters, found {len(line)}", row, min(len(line), N) + 1)
        for col, ch in enumerate(line, start=1):
            if not ch.isdigit() or int(ch) >= k:
                raise GridParseError(f"unexpected character {ch!r} for k={k}", row, col)
            letters.append(int(ch))
    return KString(k, grid_domain(N), tuple(letters))


def format_kstring(s: KString) -> str:
    N = _grid_side(s.coords)
    if N is None:
        raise ArgumentError("text format needs a full N x N coordinate domain")
    return "".join(
        "".join(str(c) for c in s.letters[r * N:(r + 1) * N]) + "\n" for r in range(N)
    )


class KStringSet:
    """
    固定坐标域上的 KString 集合

    以 numpy 矩阵存放（每行一个字，行去重并按字典序排列），
    另用字节串集合做 O(1) 成员判定。构造后不可修改。
    """

    def __init__(self, k: int, coords: Sequence[Cell], matrix: np.ndarray):
        if not 2 <= k <= MAX_ALPHABET:
            raise ArgumentError(f"alphabet size must lie in [2, {MAX_ALPHABET}], got {k}")
        self.k = k
        self.coords = tuple(coords)
        matrix = np.asarray(matrix).reshape(-1, len(self.coords))
        if matrix.size and (matrix.min() < 0 or matrix.max() >= k):
            raise ArgumentError(f"letters must lie in [0, {k - 1}]")
        matrix = matrix.astype(np.uint8)
        self.matrix = np.unique(matrix, axis=0) if len(matrix) else matrix
        self._keys: Set[bytes] = {row.tobytes() for row in self.matrix}

    @classmethod
    def from_strings(cls, k: int, coords: Sequence[Cell], strings: Iterable[KString]) -> "KStringSet":
        rows = []
        for s in strings:
            if s.coords != tuple(coords) or s.k != k:
                raise ArgumentError("all strings must share k and the coordinate domain")
            rows.append(s.letters)
        return cls(k, coords, np.array(rows, dtype=np.uint8).reshape(-1, len(coords)))

    @classmethod
    def universe(cls, k: int, coords: Sequence[Cell]) -> "KStringSet":
        return cls(k, coords, decode_indices(np.arange(_universe_size(k, len(coords))), k, len(coords)))

    def __len__(self) -> int:
        return len(self.matrix)

    def __iter__(self):
        return (KString(self.k, self.coords, tuple(int(c) for c in row)) for row in self.matrix)

    def __contains__(self, item) -> bool:
        if isinstance(item, KString):
            if item.coords != self.coords:
                return False
            item = item.letters
        return np.asarray(item, dtype=np.uint8).tobytes() in self._keys

    def contains_rows(self, rows: np.ndarray) -> np.ndarray:
        return np.fromiter((row.tobytes() in self._keys for row in rows), dtype=bool, count=len(rows))

    @property
    def density(self) -> float:
        return len(self) / self.k ** len(self.coords)

    def without(self, letters: Sequence[int]) -> "KStringSet":
        target = np.asarray(letters, dtype=np.uint8)
        keep = ~np.all(self.matrix == target, axis=1)
        return KStringSet(self.k, self.coords, self.matrix[keep])


def _universe_size(k: int, cells: int) -> int:
    size = k ** cells
    if size > MAX_UNIVERSE:
        raise GuardError(f"universe {k}^{cells} is too large to materialize")
    return size


def decode_indices(indices: np.ndarray, k: int, cells: int) -> np.ndarray:
    """把 [0, k^cells) 中的下标解码为 k 进制字母矩阵，第一个坐标为最高位"""
    if k > MAX_ALPHABET:
        raise ArgumentError(f"alphabet size must be <= {MAX_ALPHABET}, got {k}")
    indices = np.asarray(indices, dtype=np.int64)
    powers = k ** np.arange(cells - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] // powers[None, :]) % k).astype(np.uint8)


def random_kstring_set(k: int, coords: Sequence[Cell], size: int, seed: int) -> KStringSet:
    """固定种子的随机子集，恰好 size 个元素"""
    universe = _universe_size(k, len(coords))
    if not 0 <= size <= universe:
        raise ArgumentError(f"size {size} outside [0, {universe}]")
    rng = np.random.default_rng(seed)
    picks = rng.choice(universe, size=size, replace=False)
    return KStringSet(k, coords, decode_indices(picks, k, len(coords)))


def kstring_set_from_point_set(S: PointSet) -> KStringSet:
    """k = 2 时把 PointSet 转成 KStringSet（格子 (x,y) 取第 (x−1)·n+(y−1) 位）"""
    n = S.n
    cells = n * n
    nbytes = (cells + 7) // 8
    raw = np.frombuffer(b"".join(k.to_bytes(nbytes, "little") for k in S.keys), dtype=np.uint8)
    bits = np.unpackbits(raw.reshape(-1, nbytes), axis=1, bitorder="little")[:, :cells]
    return KStringSet(2, grid_domain(n), bits)


@dataclass(frozen=True)
class Bipartition:
    """坐标域的精确二分 (P, Q)"""

    P: Tuple[Cell, ...]
    Q: Tuple[Cell, ...]


def bipartition(domain: Sequence[Cell], P: Iterable[Cell]) -> Bipartition:
    domain = tuple(domain)
    P = set(P)
    if not P <= set(domain):
        raise ArgumentError("P must be a subset of the coordinate domain")
    return Bipartition(tuple(c for c in domain if c in P), tuple(c for c in domain if c not in P))


def block_bipartition(domain: Sequence[Cell], m: int) -> Bipartition:
    """P 取左上角 m×m 块，Q 为其余全部格子"""
    return bipartition(domain, (c for c in domain if c[0] <= m and c[1] <= m))


def random_bipartition(domain: Sequence[Cell], seed: int) -> Bipartition:
    """随机二分，P 和 Q 都非空"""
    domain = tuple(domain)
    if len(domain) < 2:
        raise ArgumentError("random bipartition needs at least two cells")
    rng = np.random.default_rng(seed)
    size = int(rng.integers(1, len(domain)))
    chosen = rng.choice(len(domain), size=size, replace=False)
    return bipartition(domain, (domain[i] for i in chosen))


@dataclass
class SliceTable:
    """
    切片表

    属性:
        partition (Bipartition): 坐标二分 (P, Q)
        k (int): 字母表大小
        counts (Dict[Tuple[int, ...], int]): z_Q → |E_{z_Q}|
    """

    partition: Bipartition
    k: int
    counts: Dict[Tuple[int, ...], int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def rows(self) -> Dict[Tuple[int, ...], Fraction]:
        """z_Q → 切片密度 |E_{z_Q}| / k^{|P|}"""
        size = self.k ** len(self.partition.P)
        return {z: Fraction(c, size) for z, c in self.counts.items()}


def _columns(coords: Sequence[Cell], cells: Sequence[Cell]) -> List[int]:
    pos = {c: i for i, c in enumerate(coords)}
    return [pos[c] for c in cells]


def slice_decompose(E: KStringSet, P: Iterable[Cell]) -> SliceTable:
    """
    按 Q 上的限制对 E 分组

    参数:
        E: KStringSet - 字的集合
        P: Iterable[Cell] - 坐标域的子集，Q 为其补集

    返回:
        SliceTable - 各切片的精确计数，总数守恒
    """
    part = bipartition(E.coords, P)
    counts: Dict[Tuple[int, ...], int] = {}
    if len(E):
        q_cols = _columns(E.coords, part.Q)
        keys, sizes = np.unique(E.matrix[:, q_cols], axis=0, return_counts=True)
        counts = {tuple(int(c) for c in key): int(size) for key, size in zip(keys, sizes)}
    table = SliceTable(part, E.k, counts)
    if table.total != len(E):
        raise ArgumentError("slice decomposition lost mass")
    return table


def _check_eps(eps) -> Fraction:
    eps = Fraction(eps).limit_denominator(10 ** 9)
    if not 0 < eps <= 1:
        raise ArgumentError(f"eps must lie in (0, 1], got {float(eps)}")
    return eps


def good_strings(table: SliceTable, eps) -> Set[Tuple[int, ...]]:
    """切片密度至少为 ε/2 的 z_Q"""
    eps = _check_eps(eps)
    size = table.k ** len(table.partition.P)
    return {z for z, c in table.counts.items() if 2 * c >= eps * size}


def good_fraction(table: SliceTable, eps) -> Fraction:
    return Fraction(len(good_strings(table, eps)), table.k ** len(table.partition.Q))


def counting_lemma_holds(E: KStringSet, table: SliceTable, eps) -> bool:
    """若 |E| ≥ ε·k^{|coords|}，则好串比例至少 ε/2；前提不成立时视为成立"""
    eps = _check_eps(eps)
    if len(E) < eps * E.k ** len(E.coords):
        return True
    return good_fraction(table, eps) >= eps / 2


def subspace_count_bound(m: int, k: int, d: int) -> int:
    """
    (d−1) 维子空间个数的粗上界 T(m) = (k+d−1)^{m²}

    每个格子或取 k 个固定字母之一，或属于 d−1 个通配集之一。
    """
    if m < 1 or k < 2 or d < 1:
        raise ArgumentError(f"need m >= 1, k >= 2, d >= 1; got m={m}, k={k}, d={d}")
    return (k + d - 1) ** (m * m)


def count_square_subspaces_exhaustive(m: int, k: int, dim: int) -> int:
    """
    穷举 m×m 块中方形通配的 dim 维组合子空间（dim ∈ {0, 1}）并去重计数
    """
    if dim not in (0, 1):
        raise ArgumentError("exhaustive count supports dim 0 and 1 only")
    coords = grid_domain(m)
    bases = decode_indices(np.arange(_universe_size(k, len(coords))), k, len(coords))
    if dim == 0:
        return len({row.tobytes() for row in bases})
    seen = set()
    for mask in range(1, 1 << m):
        alpha = tuple(i + 1 for i in range(m) if (mask >> i) & 1)
        cols = _columns(coords, [(x, y) for x in alpha for y in alpha])
        for row in bases:
            members = []
            for x in range(k):
                inst = row.copy()
                inst[cols] = x
                members.append(inst.tobytes())
            seen.add(frozenset(members))
    return len(seen)



def count_square_lines_exhaustive(m: int, k: int) -> int:
    """m×m 块中方形通配组合线的真实个数，应等于 Σ_{α≠∅} k^{m²−|α|²}"""
    return count_square_subspaces_exhaustive(m, k, 1)


@dataclass(frozen=True)
class CombSubspaceSpec:
    """
    方形通配的组合子空间

    属性:
        k (int): 字母表大小
        base (KString): 基字
        alphas (Tuple[Tuple[int, ...], ...]): 各通配集 α_i（通配格为 α_i×α_i）
    """

    k: int
    base: KString
    alphas: Tuple[Tuple[int, ...], ...]

    @property
    def coords(self) -> Tuple[Cell, ...]:
        return self.base.coords

    @property
    def dimension(self) -> int:
        return len(self.alphas)

    @property
    def wildcards(self) -> Tuple[Tuple[Cell, ...], ...]:
        return tuple(tuple((x, y) for x in a for y in a) for a in self.alphas)


def validate_spec(spec: CombSubspaceSpec) -> Optional[str]:
    """校验方形通配、两两不交和 α 互不相同；合法时返回 None，否则返回原因"""
    domain = set(spec.coords)
    used: Set[Cell] = set()
    if len(set(spec.alphas)) != len(spec.alphas):
        return "wildcard index sets are not pairwise distinct"
    for alpha, cells in zip(spec.alphas, spec.wildcards):
        if not alpha:
            return "empty wildcard index set"
        if not set(cells) <= domain:
            return f"wildcard {list(alpha)} leaves the coordinate domain"
        if used & set(cells):
            return "wildcard cell-sets overlap"
        used |= set(cells)
    return None


def make_spec(base: KString, alphas: Iterable[Iterable[int]]) -> CombSubspaceSpec:
    spec = CombSubspaceSpec(base.k, base, tuple(tuple(sorted(a)) for a in alphas))
    reason = validate_spec(spec)
    if reason:
        raise ArgumentError(reason)
    return spec


def instantiations(spec: CombSubspaceSpec) -> np.ndarray:
    """展开全部 k^d 个实例，返回字母矩阵（第一通配集变化最慢）"""
    base = np.array(spec.base.letters, dtype=np.uint8)
    col_sets = [_columns(spec.coords, cells) for cells in spec.wildcards]
    rows = []
    for xs in product(range(spec.k), repeat=spec.dimension):
        row = base.copy()
        for cols, x in zip(col_sets, xs):
            row[cols] = x
        rows.append(row)
    return np.array(rows, dtype=np.uint8).reshape(-1, len(spec.coords))


def subspace_product(sigma: CombSubspaceSpec, lam: CombSubspaceSpec) -> CombSubspaceSpec:
    """
    σ × λ：σ 在 P 上、λ 在 Q 上，P 与 Q 不交

    结果的实例恰为 {(x, y) : x ∈ σ 的实例, y ∈ λ 的实例}，维数相加。
    """
    if sigma.k != lam.k:
        raise ArgumentError("alphabet sizes differ")
    if set(sigma.coords) & set(lam.coords):
        raise ArgumentError("coordinate domains of the factors overlap")
    coords = _as_domain(sigma.coords + lam.coords)
    letters = dict(zip(sigma.coords, sigma.base.letters))
    letters.update(zip(lam.coords, lam.base.letters))
    base = KString(sigma.k, coords, tuple(letters[c] for c in coords))
    return make_spec(base, sigma.alphas + lam.alphas)


def verify_subspace_in_set(E: KStringSet, spec: CombSubspaceSpec) -> bool:
    """展开全部实例并逐一检查是否属于 E，同时重新校验方形通配和互异性"""
    if validate_spec(spec) is not None:
        return False
    if spec.coords != E.coords or spec.k != E.k:
        return False
    return bool(E.contains_rows(instantiations(spec)).all())


def find_square_lines(E: KStringSet, alpha_range: Optional[Sequence[int]] = None,
                      limit: int = 1) -> List[CombSubspaceSpec]:
    """
    穷举 E 中的一维方形通配子空间 {base ⊕ x(α×α)}

    参数:
        E: KStringSet - 被搜索的集合
        alpha_range: 允许出现在 α 中的下标，默认为坐标域的全部行列号
        limit: int - 最多返回的个数

    返回:
        List[CombSubspaceSpec] - 按 α 掩码、再按基字字典序排列；基字在通配格上取 0
    """
    coords = E.coords
    domain = set(coords)
    if alpha_range is None:
        alpha_range = sorted({c[0] for c in coords} | {c[1] for c in coords})
    alpha_range = sorted(alpha_range)
    found: List[CombSubspaceSpec] = []
    if not len(E):
        return found
    for mask in range(1, 1 << len(alpha_range)):
        alpha = tuple(a for i, a in enumerate(alpha_range) if (mask >> i) & 1)
        cells = [(x, y) for x in alpha for y in alpha]
        if not set(cells) <= domain:
            continue
        cols = _columns(coords, cells)
        bases = E.matrix[np.all(E.matrix[:, cols] == 0, axis=1)]
        ok = np.ones(len(bases), dtype=bool)
        for x in range(1, E.k):
            moved = bases.copy()
            moved[:, cols] = x
            ok &= E.contains_rows(moved)
        for row in bases[ok]:
            base = KString(E.k, coords, tuple(int(c) for c in row))
            found.append(CombSubspaceSpec(E.k, base, (alpha,)))
            if len(found) >= limit:
                return found
    return found


def line_to_spec(cert: Certificate) -> CombSubspaceSpec:
    """把 k = 2 的有向方形组合线证书转成一维组合子空间"""
    if cert.kind != CertificateKind.LINE or not cert.oriented:
        raise ArgumentError("only oriented Line certificates convert to a subspace")
    n = cert.n
    letters = tuple(int(cert.a.get(x, y)) for x, y in grid_domain(n))
    return make_spec(KString(2, grid_domain(n), letters), [cert.shape.gamma1.sorted()])


def spec_to_json(spec: CombSubspaceSpec) -> str:
    N = _grid_side(spec.coords)
    if N is None:
        raise ArgumentError("JSON format needs a full N x N coordinate domain")
    return json.dumps({
        "k": spec.k,
        "N": N,
        "base": format_kstring(spec.base),
        "alphas": [list(a) for a in spec.alphas],
    }, indent=2)


def spec_from_json(text: str) -> CombSubspaceSpec:
    data = json.loads(text)
    try:
        k, N = int(data["k"]), int(data["N"])
        base = parse_kstring(data["base"], k)
        alphas = data["alphas"]
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ArgumentError(f"malformed subspace spec: {e}") from e
    if base.coords != grid_domain(N):
        raise ArgumentError(f"base is not a {N}x{N} grid")
    return make_spec(base, alphas)


def _restricted_set(E: KStringSet, cells: Sequence[Cell], rows: np.ndarray) -> KStringSet:
    return KStringSet(E.k, cells, rows[:, _columns(E.coords, cells)])


@dataclass
class InductionReport:
    """
    归纳一步的演示结果

    属性:
        good_fraction (Fraction): 好串在 k^{|Q|} 中的比例
        sigma_candidates (int): 在好切片中找到的 (d−1) 维子空间个数
        covered_good (int): 至少包含一个候选 σ 的好串个数
        sigma0 (Optional[CombSubspaceSpec]): 选出的 σ₀
        g_density (Fraction): G_{σ₀} 的密度
        pigeon_bound (Fraction): ε / (2·T(m))
        spec (Optional[CombSubspaceSpec]): σ₀ × λ，未找到时为 None
        verified (bool): spec 是否确实包含在 E 中
    """

    good_fraction: Fraction
    sigma_candidates: int = 0
    covered_good: int = 0
    sigma0: Optional[CombSubspaceSpec] = None
    g_density: Fraction = Fraction(0)
    pigeon_bound: Fraction = Fraction(0)
    spec: Optional[CombSubspaceSpec] = None
    verified: bool = False
    notes: List[str] = field(default_factory=list)


def induction_demo(E: KStringSet, m: int, eps, d: int = 2, sigma_limit: int = 256) -> InductionReport:
    """
    小规模演示归纳的一步

    处理流程:
    1. 以左上角 m×m 块为 P 做切片分解，取出好串
    2. 在每个好切片中找 (d−1) 维方形子空间 σ（d = 1 时 σ 为单点）
    3. 对每个 σ 计算 G_σ = {z_Q : 所有 (x, z_Q) ∈ E, x ∈ σ}，取最稠密的 σ₀
    4. 在 G_{σ₀} 中找通配集位于右下块的一维子空间 λ
    5. 组合 σ₀ × λ 并校验其包含在 E 中

    参数:
        E: KStringSet - N×N 网格上的集合
        m: int - 左上块边长，1 ≤ m < N
        eps: 密度参数 ε
        d: int - 目标维数，1 或 2
    """
    N = _grid_side(E.coords)
    if N is None or not 1 <= m < N:
        raise ArgumentError("induction demo needs an N x N domain and 1 <= m < N")
    if d not in (1, 2):
        raise ArgumentError("induction demo supports d = 1 or d = 2")
    eps = _check_eps(eps)
    part = block_bipartition(E.coords, m)
    table = slice_decompose(E, part.P)
    good = good_strings(table, eps)
    report = InductionReport(good_fraction=good_fraction(table, eps))
    report.pigeon_bound = eps / (2 * subspace_count_bound(m, E.k, d))

    q_cols = _columns(E.coords, part.Q)
    p_cols = _columns(E.coords, part.P)
    q_keys = E.matrix[:, q_cols]

    # 每个好串对应的切片
    sigmas: List[CombSubspaceSpec] = []
    seen_sigma = set()
    for z in sorted(good):
        rows = E.matrix[np.all(q_keys == np.array(z, dtype=np.uint8), axis=1)]
        slice_set = _restricted_set(E, part.P, rows)
        if d == 1:
            candidates = [CombSubspaceSpec(E.k, s, ()) for s in slice_set]
        else:
            candidates = find_square_lines(slice_set, range(1, m + 1), limit=sigma_limit)
        for sigma in candidates:
            key = (sigma.base.letters, sigma.alphas)
            if key not in seen_sigma and len(sigmas) < sigma_limit:
                seen_sigma.add(key)
                sigmas.append(sigma)
    report.sigma_candidates = len(sigmas)
    if not sigmas:
        report.notes.append("no (d-1)-dimensional subspace in any good slice")
        return report

    # G_σ：所有实例都与 z_Q 拼成 E 中元素的 z_Q
    q_universe = list(table.counts)
    best: Tuple[int, int, np.ndarray] = (-1, -1, np.zeros((0, len(part.Q)), dtype=np.uint8))
    covered: Set[Tuple[int, ...]] = set()
    for idx, sigma in enumerate(sigmas):
        inst = instantiations(sigma)
        members = []
        for z in q_universe:
            rows = np.zeros((len(inst), len(E.coords)), dtype=np.uint8)
            rows[:, p_cols] = inst
            rows[:, q_cols] = np.array(z, dtype=np.uint8)
            if E.contains_rows(rows).all():
                members.append(z)
        covered |= set(members) & good
        if len(members) > best[0]:
            best = (len(members), idx, np.array(members, dtype=np.uint8).reshape(-1, len(part.Q)))
    report.covered_good = len(covered)
    sigma0 = sigmas[best[1]]
    report.sigma0 = sigma0
    report.g_density = Fraction(best[0], E.k ** len(part.Q))
    logger.bind(tag=TAG).debug(
        f"σ₀ 选定: G 密度 {float(report.g_density):.4f}, 下界 ε/(2T(m)) = {float(report.pigeon_bound):.6f}"
    )

    g_set = KStringSet(E.k, part.Q, best[2])
    lambdas = find_square_lines(g_set, range(m + 1, N + 1), limit=1)
    if not lambdas:
        report.notes.append("no square-wildcard line inside G_sigma0")
        return report
    report.spec = subspace_product(sigma0, lambdas[0])
    report.verified = verify_subspace_in_set(E, report.spec)
    return report
