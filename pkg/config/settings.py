import os
from typing import Dict, Any


def _env_threads() -> int:
    raw = os.environ.get("QDHJ_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


DEFAULT_RUN_CONFIG: Dict[str, Any] = {
    "n": 4,
    "k": 2,
    "delta": 0.25,
    "eps": 0.3,
    "seed": 0,
    "mode": "exhaustive",
    "limit": 64,
    "threads": _env_threads(),
    "budget": 200_000,       # 抽样模式下的探测次数上限
    "timeout": 600.0,        # 精确搜索超时（秒）
    "span_rank_limit": 30,   # 子空间完全枚举的秩上限
    "table_max_n": 5,        # n ≤ 5 时使用全空间位表
    "cayley_max_n": 3,       # 物化 Cayley 图的 n 上限
}
