"""
日志工具模块
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger
from crackfield.utils.config import load_config

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logger(level: Optional[str] = None, log_path: Optional[str] = None, enable_file: bool = True):
    """
    设置日志

    Args:
        level: 日志级别，默认取配置中的LOG_LEVEL
        log_path: 日志目录，默认取配置中的LOG_PATH
        enable_file: 是否写日志文件

    Returns:
        loguru logger
    """
    config = load_config()
    level = (level or config.log_level).upper()

    # 移除默认处理器
    logger.remove()

    # 日志走stderr，stdout留给命令的结果摘要
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)

    if enable_file:
        directory = Path(log_path or config.log_path)
        directory.mkdir(parents=True, exist_ok=True)
        logger.add(
            directory / "crackfield_{time:YYYY-MM-DD}.log",
            format=FILE_FORMAT,
            level=level,
            rotation="00:00",  # 每天轮转
            retention="7 days",  # 保留7天
            compression="zip",  # 压缩旧日志
            encoding="utf-8",
        )

    return logger


# 导出全局logger实例
log = setup_logger()
