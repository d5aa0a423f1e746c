"""
UI模块初始化
"""

from .cli_app import create_app

__all__ = ['create_app']
