"""
crackfield包初始化
"""

__version__ = "0.1.0"
__author__ = "crackfield developers"
__description__ = "反平面(Mode III)裂纹晶格实验室 - 预测子、截断问题求解与格林函数诊断"

from crackfield.core import (
    LatticeDomain,
    ScalarField,
    PredictorSpec,
    get_potential,
    solve_corrector,
    solve_crack_green,
)

from crackfield.utils import (
    load_config,
    Config,
    setup_logger
)

__all__ = [
    'LatticeDomain',
    'ScalarField',
    'PredictorSpec',
    'get_potential',
    'solve_corrector',
    'solve_crack_green',
    'load_config',
    'Config',
    'setup_logger'
]
