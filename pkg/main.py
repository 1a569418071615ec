"""
QDHJ 工具箱主程序
提供螺旋子空间、差集形状、配对搜索、恒等式、多维归纳和极值搜索的命令行入口。
结果以 JSON 写到标准输出或 --out，日志写到标准错误。
支持优雅退出（Ctrl+C）。
"""

import argparse
import json
import signal
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from app.grid_core import GridParseError, QdhjError
from app.handle import MainHandle
from config.logger import setup_logging
from config.settings import DEFAULT_RUN_CONFIG

COMMANDS = (
    "subspace", "classify", "rect-pair", "square-pairs", "lines",
    "identities", "repcounts", "mdqhj", "extremal", "verify",
)

EXIT_OK = 0
EXIT_NOT_FOUND = 1
EXIT_USAGE = 2


@dataclass
class RunConfig:
    """
    一次运行的完整配置，只凭它就能复现结果

    属性:
        command (str): 命令名
        n, k (int): 网格边长和字母表大小
        delta, eps (float): 密度参数
        gamma (List[int]): 指定的 γ，为空时表示全部
        gamma_size (Tuple[int, int]): γ 大小范围
        seed (int): 随机种子
        mode (str): exhaustive / sampled
    """

    command: str
    n: int = DEFAULT_RUN_CONFIG["n"]
    k: int = DEFAULT_RUN_CONFIG["k"]
    delta: float = DEFAULT_RUN_CONFIG["delta"]
    eps: float = DEFAULT_RUN_CONFIG["eps"]
    gamma: List[int] = field(default_factory=list)
    gamma_size: Tuple[int, int] = (1, 1)
    seed: int = DEFAULT_RUN_CONFIG["seed"]
    mode: str = DEFAULT_RUN_CONFIG["mode"]
    limit: int = DEFAULT_RUN_CONFIG["limit"]
    threads: int = DEFAULT_RUN_CONFIG["threads"]
    budget: int = DEFAULT_RUN_CONFIG["budget"]
    timeout: float = DEFAULT_RUN_CONFIG["timeout"]
    m: Optional[int] = None
    d: int = 2
    action: Optional[str] = None
    family: str = "SquareShapes"
    method: str = "exact"
    count: Optional[int] = None
    check: bool = False
    set: Optional[str] = None
    set_file: Optional[str] = None
    input: Optional[str] = None
    output: Optional[str] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["gamma_size"] = list(self.gamma_size)
        return data


def _gamma_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--gamma expects a comma list of integers, got {text!r}")


def _size_range(text: str) -> Tuple[int, int]:
    try:
        lo, _, hi = text.partition("..")
        return int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--gamma-size expects a..b, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdhj", description="QDHJ grid toolkit")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--n", type=int, default=DEFAULT_RUN_CONFIG["n"])
    parser.add_argument("--k", type=int, default=DEFAULT_RUN_CONFIG["k"])
    parser.add_argument("--delta", type=float, default=DEFAULT_RUN_CONFIG["delta"])
    parser.add_argument("--eps", type=float, default=DEFAULT_RUN_CONFIG["eps"])
    parser.add_argument("--gamma", type=_gamma_list, default=[])
    parser.add_argument("--gamma-size", type=_size_range, default=(1, 1))
    parser.add_argument("--seed", type=int, default=DEFAULT_RUN_CONFIG["seed"])
    parser.add_argument("--mode", choices=("exhaustive", "sampled"), default=DEFAULT_RUN_CONFIG["mode"])
    parser.add_argument("--limit", type=int, default=DEFAULT_RUN_CONFIG["limit"])
    parser.add_argument("--threads", type=int, default=DEFAULT_RUN_CONFIG["threads"])
    parser.add_argument("--budget", type=int, default=DEFAULT_RUN_CONFIG["budget"])
    parser.add_argument("--timeout", type=float, default=DEFAULT_RUN_CONFIG["timeout"])
    parser.add_argument("--m", type=int, default=None)
    parser.add_argument("--d", type=int, choices=(1, 2), default=2)
    parser.add_argument("--action", choices=("decompose", "good", "lemma", "demo", "compose", "verify", "count"))
    parser.add_argument("--family", choices=("SquareShapes", "RectShapes"), default="SquareShapes")
    parser.add_argument("--method", choices=("exact", "greedy"), default="exact")
    parser.add_argument("--count", type=int, default=None)
    parser.add_argument("--check", action="store_true")
    parser.add_argument("--set", choices=("spiral", "even", "odd", "full", "random"), default=None)
    parser.add_argument("--set-file", default=None)
    parser.add_argument("--in", dest="input", default=None)
    parser.add_argument("--out", dest="output", default=None)
    parser.add_argument("--quiet", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command, n=args.n, k=args.k, delta=args.delta, eps=args.eps,
        gamma=args.gamma, gamma_size=args.gamma_size, seed=args.seed, mode=args.mode,
        limit=args.limit, threads=max(1, args.threads), budget=args.budget, timeout=args.timeout,
        m=args.m, d=args.d, action=args.action, family=args.family, method=args.method,
        count=args.count, check=args.check, set=args.set, set_file=args.set_file,
        input=args.input, output=args.output,
    )


class ToolkitApp:
    """
    工具箱主类

    负责:
    - 解析配置并交给 MainHandle 执行
    - 把结果连同配置和时间戳写成 JSON
    - 把异常映射为退出码
    """

    def __init__(self, config: RunConfig, quiet: bool = False):
        setup_logging("WARNING" if quiet else None)
        self.logger = setup_logging().bind(tag=self.__class__.__name__)
        self.config = config
        self.main_handle = MainHandle(config)

    def render(self, payload: dict, ok: bool) -> str:
        document = {
            "command": self.config.command,
            "ok": ok,
            "result": payload,
            "config": self.config.to_dict(),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        return json.dumps(document, indent=2, ensure_ascii=False, default=str)

    def run(self) -> int:
        """执行命令，返回退出码"""
        try:
            payload, ok = self.main_handle.dispatch(self.config.command)
        except GridParseError as e:
            self.logger.error(f"输入格式错误: {e}")
            return EXIT_USAGE
        except UnicodeDecodeError as e:
            self.logger.error(f"输入文件不是 UTF-8 文本: {e}")
            return EXIT_USAGE
        except (QdhjError, json.JSONDecodeError, OSError) as e:
            self.logger.error(f"运行失败: {e}")
            return EXIT_USAGE

        text = self.render(payload, ok)
        if self.config.output:
            Path(self.config.output).write_text(text + "\n", encoding="utf-8")
            self.logger.info(f"结果已写入 {self.config.output}")
        else:
            print(text)
        return EXIT_OK if ok else EXIT_NOT_FOUND

    def stop(self):
        """停止长时间搜索"""
        self.logger.info("正在停止...")
        self.main_handle.stop()


def signal_handler(app):
    """信号处理函数"""
    def _handler(signum, frame):
        print("\n正在退出...", file=sys.stderr)
        app.stop()
    return _handler


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    app = ToolkitApp(config_from_args(args), quiet=args.quiet)

    # 注册信号处理
    signal.signal(signal.SIGINT, signal_handler(app))
    signal.signal(signal.SIGTERM, signal_handler(app))

    return app.run()


if __name__ == "__main__":
    sys.exit(main())
