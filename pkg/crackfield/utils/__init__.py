"""
工具模块初始化
"""

from .config import load_config, Config, RunConfig, ensure_directories
from .logger import setup_logger, log

__all__ = ['load_config', 'Config', 'RunConfig', 'ensure_directories', 'setup_logger', 'log']
