"""
命令协调模块，负责把命令行参数转成各模块的调用，并汇总成可序列化的结果。
每个命令返回 (结果字典, 是否成功)，由主程序决定退出码和输出位置。
"""

import math
import sys
import threading
import time
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Tuple

project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))
from config.logger import setup_logging
from app.grid_core import (
    ArgumentError,
    DimensionError,
    GridVector,
    IndexSet,
    brute_force_shape,
    classify_shape,
    format_grid,
    nonempty_index_sets,
    parse_grid,
    parse_grid_blocks,
    square_vector,
)
from app.f2_subspace import (
    even_weight_handle,
    handle_to_json,
    square_membership_report,
    square_residue_ok,
    span_enumerate,
    spiral_basis,
)
from app.pair_search import (
    PointSet,
    certificates_from_json,
    certificate_to_dict,
    find_line,
    find_rect_pair,
    find_square_pairs,
    odd_weight_coset,
    point_set_from_subspace,
    random_point_set,
    rect_pair_census,
    verify_certificate,
)
from app.identities import (
    cell_multiplicities,
    check_quadruple_rule,
    powerset_square_sum,
    predicted_powerset_residual,
    random_subspace_elements,
    representation_chains,
    representation_counts,
    shifted_powerset_sum,
    table_to_csv,
)
from app import mdqhj
from app.extremal import (
    avoiding_greedy,
    family_spec,
    max_avoiding_bruteforce,
    max_avoiding_exact,
    result_to_dict,
    spiral_warm_start,
    verify_avoiding,
)

Result = Tuple[Dict[str, Any], bool]


@dataclass
class RunState:
    """
    一次运行的共享状态

    属性:
        stop (threading.Event): 停止标志，由信号处理设置
        started (float): 开始时间
    """

    stop: threading.Event
    started: float


class MainHandle:
    """
    命令协调类

    该类负责:
    1. 按配置构造点集、子空间和 KString 集合
    2. 调用对应模块完成计算
    3. 复核结果并整理成 JSON 友好的字典
    """

    def __init__(self, config):
        self.logger = setup_logging().bind(tag=self.__class__.__name__)
        self.config = config
        self.state = RunState(threading.Event(), time.time())

    def stop(self):
        self.state.stop.set()

    def dispatch(self, command: str) -> Result:
        handler = getattr(self, "cmd_" + command.replace("-", "_"), None)
        if handler is None:
            raise ArgumentError(f"unknown command {command!r}")
        self.logger.info(f"执行命令: {command}")
        start = time.time()
        payload, ok = handler()
        self.logger.debug(f"命令 {command} 耗时: {time.time() - start:.3f}s")
        return payload, ok

    # ---- 输入构造 ----

    def _gammas(self) -> List[IndexSet]:
        cfg = self.config
        if not cfg.gamma:
            return list(nonempty_index_sets(cfg.n))
        gamma = IndexSet.of(cfg.n, cfg.gamma)
        if gamma.is_empty:
            raise ArgumentError("--gamma must name at least one index")
        return [gamma]

    def _random_size(self) -> int:
        cfg = self.config
        if cfg.count is not None:
            return cfg.count
        return math.ceil(cfg.delta * (1 << (cfg.n * cfg.n)))

    def load_set(self) -> PointSet:
        """按 --set-file 或 --set 预设构造点集"""
        cfg = self.config
        if cfg.set_file:
            text = Path(cfg.set_file).read_text(encoding="utf-8")
            vectors = parse_grid_blocks(text)
            if not vectors:
                raise ArgumentError(f"{cfg.set_file} holds no grids")
            return PointSet(vectors[0].n, vectors)
        preset = cfg.set or "random"
        if preset == "spiral":
            return point_set_from_subspace(spiral_basis(cfg.n))
        if preset == "even":
            return point_set_from_subspace(even_weight_handle(cfg.n))
        if preset == "odd":
            return odd_weight_coset(cfg.n)
        if preset == "full":
            return PointSet(cfg.n, range(1 << (cfg.n * cfg.n)))
        if preset == "random":
            return random_point_set(cfg.n, self._random_size(), cfg.seed)
        raise ArgumentError(f"unknown set preset {preset!r}")

    def _set_summary(self, S: PointSet) -> dict:
        return {"n": S.n, "size": len(S), "density": S.density}

    # ---- 命令 ----

    def cmd_subspace(self) -> Result:
        cfg = self.config
        handle = spiral_basis(cfg.n)
        report = square_membership_report(handle)
        payload = {
            "n": cfg.n,
            "rank": handle.rank,
            "span_size": 1 << handle.rank,
            "parity_ok": square_residue_ok(handle),
            "report": report,
            "handle": handle_to_json(handle),
        }
        if cfg.check:
            squares = {square_vector(g, cfg.n).bits for g in nonempty_index_sets(cfg.n)}
            found = sorted(v.bits for v in span_enumerate(handle) if v.bits in squares)
            predicted = sorted(square_vector(IndexSet.of(cfg.n, row["gamma"]), cfg.n).bits
                               for row in report if row["member"])
            payload["span_check"] = {"square_members": len(found), "matches_parity": found == predicted}
        ok = payload["parity_ok"] and payload.get("span_check", {}).get("matches_parity", True)
        return payload, ok

    def cmd_classify(self) -> Result:
        cfg = self.config
        text = Path(cfg.input).read_text(encoding="utf-8") if cfg.input else sys.stdin.read()
        v = parse_grid(text)
        shape = classify_shape(v)
        payload = {
            "kind": shape.kind.value,
            "gamma1": shape.gamma1.sorted(),
            "gamma2": shape.gamma2.sorted(),
        }
        ok = True
        if cfg.check:
            agrees = brute_force_shape(v) == shape
            payload["brute_force_agrees"] = agrees
            ok = agrees
        return payload, ok

    def cmd_rect_pair(self) -> Result:
        S = self.load_set()
        if not self.config.gamma:
            census = rect_pair_census(S)
            return {"set": self._set_summary(S), "census": census}, all(r["found"] for r in census)
        cert = find_rect_pair(S, self._gammas()[0])
        if cert is None:
            return {"set": self._set_summary(S), "certificate": None}, False
        verified = verify_certificate(cert, S)
        return {"set": self._set_summary(S), "certificate": certificate_to_dict(cert),
                "verified": verified}, verified

    def _square_command(self, finder) -> Result:
        cfg = self.config
        S = self.load_set()
        report = finder(S, cfg.limit, mode=cfg.mode, seed=cfg.seed if cfg.mode == "sampled" else None,
                        budget=cfg.budget, threads=cfg.threads)
        verified = all(verify_certificate(c, S) for c in report.certificates)
        payload = {
            "set": self._set_summary(S),
            "complete": report.complete,
            "probes": report.probes,
            "verified": verified,
            "certificates": [certificate_to_dict(c) for c in report.certificates],
        }
        return payload, bool(report.certificates) and verified

    def cmd_square_pairs(self) -> Result:
        return self._square_command(find_square_pairs)

    def cmd_lines(self) -> Result:
        return self._square_command(find_line)

    def cmd_identities(self) -> Result:
        cfg = self.config
        lo, hi = cfg.gamma_size
        if not 1 <= lo <= hi <= cfg.n:
            raise ArgumentError(f"--gamma-size {lo}..{hi} must lie within 1..{cfg.n}")
        rows = []
        ok = True
        indices = range(1, cfg.n + 1)
        for size in range(lo, hi + 1):
            gammas = [IndexSet.of(cfg.n, c) for c in combinations(indices, size)]
            sums = [powerset_square_sum(g, cfg.n) for g in gammas]
            zero = all(s.is_zero for s in sums)
            row = {"size": size, "sets": len(gammas), "all_zero": zero,
                   "multiplicities": list(cell_multiplicities(gammas[0]))}
            if size >= 3:
                ok &= zero
            else:
                predicted = all(s == predicted_powerset_residual(g, cfg.n) and not s.is_zero
                                for g, s in zip(gammas, sums))
                row["residual_matches_prediction"] = predicted
                ok &= predicted
            if size >= 3:
                shifted_zero, shifted_pairs = self._shifted_check(size)
                row["shifted_pairs"] = shifted_pairs
                row["shifted_all_zero"] = shifted_zero
                ok &= shifted_zero
            rows.append(row)
        return {"n": cfg.n, "rows": rows}, ok

    def _shifted_check(self, size: int) -> Tuple[bool, int]:
        """|γ₁| = size，γ₂ 与 γ₁ 不交且 |γ₁| + |γ₂| ≤ n 的全部组合"""
        n = self.config.n
        pairs = 0
        for g1 in combinations(range(1, n + 1), size):
            rest = [i for i in range(1, n + 1) if i not in g1]
            for r in range(0, n - size + 1):
                for g2 in combinations(rest, r):
                    total, _ = shifted_powerset_sum(IndexSet.of(n, g1), IndexSet.of(n, g2), n)
                    pairs += 1
                    if not total.is_zero:
                        return False, pairs
        return True, pairs

    def cmd_repcounts(self) -> Result:
        cfg = self.config
        if cfg.input:
            elements = parse_grid_blocks(Path(cfg.input).read_text(encoding="utf-8"))
        elif cfg.m is not None:
            elements = random_subspace_elements(cfg.n, cfg.m, cfg.seed)
        else:
            raise ArgumentError("repcounts needs --in with grid blocks or --m for a random subspace")
        table = representation_counts(elements, threads=cfg.threads)
        checks, bad = check_quadruple_rule(elements)
        chains = representation_chains(elements)
        payload = dict(table.summary())
        payload.update({
            "chains": {format_grid(GridVector(table.n, g)): pairs for g, pairs in sorted(chains.items())},
            "quadruple_checks": checks,
            "quadruple_violations": [list(q) for q in bad],
            "csv": table_to_csv(table),
        })
        return payload, not table.violations and not bad

    # ---- mdqhj ----

    def _kstring_set(self) -> mdqhj.KStringSet:
        cfg = self.config
        coords = mdqhj.grid_domain(cfg.n)
        size = cfg.count if cfg.count is not None else math.ceil(cfg.eps * cfg.k ** len(coords))
        return mdqhj.random_kstring_set(cfg.k, coords, size, cfg.seed)

    def _partition(self, E: mdqhj.KStringSet, seed: int) -> mdqhj.Bipartition:
        cfg = self.config
        if cfg.m is None:
            return mdqhj.random_bipartition(E.coords, seed)
        return mdqhj.block_bipartition(E.coords, cfg.m)

    def cmd_mdqhj(self) -> Result:
        action = self.config.action or "good"
        handler = getattr(self, "_mdqhj_" + action, None)
        if handler is None:
            raise ArgumentError(f"unknown mdqhj action {action!r}")
        return handler()

    def _mdqhj_decompose(self) -> Result:
        E = self._kstring_set()
        table = mdqhj.slice_decompose(E, self._partition(E, self.config.seed).P)
        rows = [{"z_q": list(z), "count": table.counts[z], "density": str(d)}
                for z, d in sorted(table.rows.items())]
        return {"size": len(E), "P": table.partition.P, "Q": table.partition.Q,
                "total": table.total, "rows": rows}, table.total == len(E)

    def _mdqhj_good(self) -> Result:
        cfg = self.config
        E = self._kstring_set()
        table = mdqhj.slice_decompose(E, self._partition(E, cfg.seed).P)
        good = mdqhj.good_strings(table, cfg.eps)
        holds = mdqhj.counting_lemma_holds(E, table, cfg.eps)
        return {
            "size": len(E),
            "good": [list(z) for z in sorted(good)],
            "good_fraction": str(mdqhj.good_fraction(table, cfg.eps)),
            "lemma_holds": holds,
        }, holds

    def _mdqhj_lemma(self) -> Result:
        """对 seed, seed+1, … 共 limit 个随机集合，分别用块二分和随机二分检查计数引理"""
        cfg = self.config
        failures = []
        trials = 0
        for offset in range(cfg.limit):
            seed = cfg.seed + offset
            E = mdqhj.random_kstring_set(
                cfg.k, mdqhj.grid_domain(cfg.n),
                cfg.count if cfg.count is not None else math.ceil(cfg.eps * cfg.k ** (cfg.n * cfg.n)),
                seed,
            )
            for part in (mdqhj.block_bipartition(E.coords, cfg.m or 1), mdqhj.random_bipartition(E.coords, seed)):
                table = mdqhj.slice_decompose(E, part.P)
                trials += 1
                if table.total != len(E) or not mdqhj.counting_lemma_holds(E, table, cfg.eps):
                    failures.append({"seed": seed, "P": part.P})
            if self.state.stop.is_set():
                break
        return {"trials": trials, "failures": failures}, not failures

    def _mdqhj_demo(self) -> Result:
        cfg = self.config
        E = self._kstring_set()
        report = mdqhj.induction_demo(E, cfg.m or 1, cfg.eps, cfg.d)
        payload = {
            "size": len(E),
            "good_fraction": str(report.good_fraction),
            "sigma_candidates": report.sigma_candidates,
            "covered_good": report.covered_good,
            "g_density": str(report.g_density),
            "pigeon_bound": str(report.pigeon_bound),
            "spec": mdqhj.spec_to_json(report.spec) if report.spec else None,
            "verified": report.verified,
            "notes": report.notes,
        }
        return payload, report.verified

    def _mdqhj_compose(self) -> Result:
        """螺旋子空间中的有向组合线 → 一维组合子空间 → 包含性校验"""
        cfg = self.config
        S = point_set_from_subspace(spiral_basis(cfg.n))
        report = find_line(S, 1, threads=cfg.threads)
        if not report.certificates:
            return {"certificate": None}, False
        cert = report.certificates[0]
        spec = mdqhj.line_to_spec(cert)
        verified = verify_certificate(cert, S) and mdqhj.verify_subspace_in_set(
            mdqhj.kstring_set_from_point_set(S), spec)
        return {"certificate": certificate_to_dict(cert), "spec": mdqhj.spec_to_json(spec),
                "verified": verified}, verified

    def _mdqhj_verify(self) -> Result:
        cfg = self.config
        if not cfg.input:
            raise ArgumentError("mdqhj verify needs --in with a subspace spec")
        spec = mdqhj.spec_from_json(Path(cfg.input).read_text(encoding="utf-8"))
        # 网格边长和字母表都以子空间描述为准
        self.config.n = math.isqrt(len(spec.base.coords))
        self.config.k = spec.k
        if spec.k == 2 and (cfg.set or cfg.set_file):
            E = mdqhj.kstring_set_from_point_set(self.load_set())
        else:
            E = self._kstring_set()
        verified = mdqhj.verify_subspace_in_set(E, spec)
        return {"size": len(E), "verified": verified}, verified

    def _mdqhj_count(self) -> Result:
        cfg = self.config
        m = cfg.m or 2
        rows = []
        ok = True
        for d in (1, 2):
            true_count = mdqhj.count_square_subspaces_exhaustive(m, cfg.k, d - 1)
            bound = mdqhj.subspace_count_bound(m, cfg.k, d)
            rows.append({"d": d, "dimension": d - 1, "count": true_count, "bound": bound})
            ok &= true_count <= bound
        return {"m": m, "k": cfg.k, "rows": rows}, ok

    # ---- extremal / verify ----

    def cmd_extremal(self) -> Result:
        cfg = self.config
        spec = family_spec(cfg.family, cfg.n)
        if cfg.method == "exact":
            result = max_avoiding_exact(spec, timeout=cfg.timeout, stop=self.state.stop, seed=cfg.seed)
        else:
            warm = None
            if cfg.set == "spiral" and cfg.n >= 2:
                candidate = spiral_warm_start(cfg.n)
                if verify_avoiding(spec, candidate):
                    warm = candidate
                else:
                    self.logger.warning(f"螺旋子空间在 n={cfg.n} 时含有方形差集，不能作为初始解")
            result = avoiding_greedy(spec, cfg.seed, warm_start=warm, restarts=cfg.limit,
                                     threads=cfg.threads, budget=cfg.budget)
        payload = result_to_dict(result)
        ok = True
        if cfg.check and cfg.n <= 2:
            oracle, _ = max_avoiding_bruteforce(spec)
            payload["oracle"] = oracle
            ok = not result.exact or oracle == result.best_size
        return payload, ok

    def cmd_verify(self) -> Result:
        cfg = self.config
        if not cfg.input:
            raise ArgumentError("verify needs --in with a certificate")
        certs = certificates_from_json(Path(cfg.input).read_text(encoding="utf-8"))
        if len({c.n for c in certs}) != 1:
            raise DimensionError("certificates in one file must share a grid size")
        if not cfg.set_file and cfg.n != certs[0].n:
            self.config.n = certs[0].n
        S = self.load_set()
        checks = [verify_certificate(c, S) for c in certs]
        verified = all(checks)
        return {"kind": certs[0].kind.value, "count": len(certs), "checks": checks, "verified": verified}, verified
