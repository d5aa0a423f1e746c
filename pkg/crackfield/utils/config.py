"""
配置管理模块
进程级配置来自环境变量（.env），单次运行的配置来自命令行参数和YAML配置文件
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

# 加载环境变量
load_dotenv()

# 默认实验参数
DEFAULT_RADIUS = 256.0
DEFAULT_K = 0.4
DEFAULT_TOL = 1e-8


class Config(BaseModel):
    """进程级配置"""

    output_dir: str = Field(default="./output", description="默认输出目录")
    threads: int = Field(default=1, ge=1, description="并行求解的最大线程数")

    # 日志配置
    log_level: str = Field(default="INFO", description="日志级别")
    log_path: str = Field(default="./logs", description="日志路径")


def load_config() -> Config:
    """加载配置"""
    return Config(
        output_dir=os.getenv("CRACKFIELD_OUTPUT_DIR", "./output"),
        threads=int(os.getenv("CRACKFIELD_THREADS", "1")),
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        log_path=os.getenv("LOG_PATH", "./logs"),
    )


class RunConfig(BaseModel):
    """
    单次运行的配置

    字段既可以来自命令行参数，也可以来自YAML配置文件；
    命令行参数优先于配置文件，配置文件优先于默认值。
    """

    command: Literal["solve", "greens", "converge", "sinclair", "stability"] = "solve"
    radius: float = Field(default=DEFAULT_RADIUS, gt=0, description="区域半径R（晶格单位）")
    k: float = Field(default=DEFAULT_K, ge=0, description="应力强度因子K")
    order: Literal[0, 1, 2] = Field(default=0, description="预测子阶数")
    c2: Union[float, Literal["auto"], None] = Field(default=None, description="û2幅值，或auto进行二分标定")
    potential: Literal["gaussian", "quadratic"] = Field(default="gaussian", description="对势选择")
    tol: float = Field(default=DEFAULT_TOL, gt=0, description="梯度ℓ∞收敛阈值")
    max_iter: int = Field(default=5000, ge=1, description="最大迭代次数")
    window: Optional[Tuple[float, float]] = Field(default=None, description="拟合窗口[r_min, r_max]")
    shells_per_octave: int = Field(default=4, ge=1, description="每个倍频程的壳层数")
    output: Optional[str] = Field(default=None, description="输出目录")
    format: Literal["json", "csv"] = Field(default="json", description="报告格式")
    threads: int = Field(default=1, ge=1, description="线程数上限")
    seed: int = Field(default=0, description="探测向量随机种子")

    # greens
    source: Optional[Tuple[int, int]] = Field(default=None, description="格林函数源点(a, b)")
    mu: bool = Field(default=True, description="是否启用Ĝ1,μ修正")
    source_radii: List[float] = Field(default_factory=lambda: [32.0, 48.0, 64.0])

    # converge
    radii: List[float] = Field(default_factory=lambda: [32.0, 64.0, 128.0, 256.0])
    orders: List[Literal[0, 1, 2]] = Field(default_factory=lambda: [0, 2])
    fast: bool = Field(default=False, description="快速模式：半径{16,32,64}，参考128")

    # sinclair
    sinclair_terms: int = Field(default=2, ge=0, description="Sinclair级数截断N")

    # stability
    k_values: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.45, 0.5])
    probes: int = Field(default=4, ge=1, description="Rayleigh商探测向量数")

    @field_validator("window")
    @classmethod
    def _check_window(cls, value):
        if value is not None and not (0 < value[0] < value[1]):
            raise ValueError(f"拟合窗口必须满足 0 < r_min < r_max: {value}")
        return value

    @field_validator("radii")
    @classmethod
    def _check_radii(cls, value):
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"半径列表必须严格递增: {value}")
        return value

    @model_validator(mode="after")
    def _check_command(self):
        if self.command == "converge" and not self.fast and len(self.radii) < 3:
            raise ValueError("converge 至少需要3个半径")
        if self.command == "solve" and self.order == 2 and self.c2 is None:
            raise ValueError("order=2 需要指定 --c2 数值或 auto")
        return self

    @property
    def fit_window(self) -> Tuple[float, float]:
        """拟合窗口；默认[16, R/4]，小区域时下限退到R/8"""
        if self.window is not None:
            return self.window
        return default_window(self.radius)

    @property
    def convergence_radii(self) -> List[float]:
        if self.fast:
            return [16.0, 32.0, 64.0, 128.0]
        return list(self.radii)

    @classmethod
    def from_sources(cls, file_path: Optional[str] = None, **overrides: Any) -> "RunConfig":
        """
        合并配置文件和命令行参数

        Args:
            file_path: YAML配置文件路径
            overrides: 命令行给出的字段（值为None的字段忽略）

        Returns:
            校验后的RunConfig
        """
        data: Dict[str, Any] = {}
        if file_path:
            with open(file_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
            if not isinstance(data, dict):
                raise ValueError(f"配置文件格式错误: {file_path}")
        data.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**data)


def default_window(radius: float) -> Tuple[float, float]:
    """默认拟合窗口"""
    return (min(16.0, radius / 8.0), radius / 4.0)


def get_project_root() -> Path:
    """获取项目根目录"""
    return Path(__file__).parent.parent.parent


def ensure_directories(output_dir: Optional[str] = None) -> Path:
    """确保输出目录存在"""
    config = load_config()
    directory = Path(output_dir or config.output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory
