import os
import sys
from loguru import logger
from typing import Dict, Any

DEFAULT_LOG_CONFIG: Dict[str, Any] = {
    "log_format": "<green>{time:YY-MM-DD HH:mm:ss.SSS}</green> - "
                 "[<light-blue>{extra[tag]}</light-blue>] - "
                 "<level>{level}</level> - "
                 "<light-green>{message}</light-green>",
    "log_format_simple": "{time:YYYY-MM-DD HH:mm:ss.SSS} - "
                        "{extra[tag]} - {level} - {message}",
    "log_level": os.environ.get("QDHJ_LOG_LEVEL", "INFO"),
    "console_level": os.environ.get("QDHJ_LOG_LEVEL", "INFO"),
    "log_dir": "logs",
    "log_file": "qdhj.log",
    "rotation": "100 MB",
    "retention": "7 days",
    "compression": "zip",
    "enqueue": False,
    "backtrace": True,  # 记录异常堆栈
    "diagnose": True,   # 显示诊断信息
}

_configured = False


def setup_logging(console_level: str = None):
    """
    配置日志输出格式和级别，返回共享的 loguru logger

    控制台日志写到 stderr，保证 stdout 只输出 JSON 结果。
    重复调用不会重复添加 sink，除非显式指定新的控制台级别。
    """
    global _configured
    log_config = DEFAULT_LOG_CONFIG

    if _configured and console_level is None:
        return logger

    os.makedirs(log_config["log_dir"], exist_ok=True)

    logger.remove()
    logger.configure(extra={"tag": "qdhj"})

    # 输出到控制台
    logger.add(
        sys.stderr,
        format=log_config["log_format"],
        level=console_level or log_config["console_level"],
        backtrace=log_config["backtrace"],
        diagnose=log_config["diagnose"],
    )

    # 输出到文件
    logger.add(
        os.path.join(log_config["log_dir"], log_config["log_file"]),
        format=log_config["log_format_simple"],
        level=log_config["log_level"],
        rotation=log_config["rotation"],
        retention=log_config["retention"],
        compression=log_config["compression"],
        enqueue=log_config["enqueue"],
    )

    _configured = True
    return logger
