"""
预测子模块
复平方根映射ω、预测子û0/û1/û2、Sinclair级数，以及û1所满足的连续介质方程的校验
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from crackfield.core.lattice import LatticeDomain, ScalarField, Site
from crackfield.utils.logger import log

PointLike = Union[Site, Tuple[float, float], Sequence[float], np.ndarray]


def as_point(x: PointLike) -> Tuple[np.ndarray, np.ndarray]:
    """把格点或坐标统一成 (x1, x2) 数组"""
    if isinstance(x, Site):
        x1, x2 = x.x
    else:
        x1, x2 = x[0], x[1]
    return np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)


def _polar(x: PointLike, allow_origin: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    x1, x2 = as_point(x)
    r = np.hypot(x1, x2)
    if not allow_origin and np.any(r == 0):
        raise ValueError("r = 0 处无定义")
    return r, np.arctan2(x2, x1)


def _scalar(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class PredictorSpec:
    """
    预测子参数

    Attributes:
        K: 应力强度因子（K >= 0）
        C2: û2的幅值，order=2时必须给定（或先标定）
        phi4_at_0: φ⁗(0)
        order: 预测子阶数 0/1/2
    """

    K: float = 0.4
    C2: Optional[float] = None
    phi4_at_0: float = -18.0
    order: int = 0

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"K必须非负: {self.K}")
        if self.order not in (0, 1, 2):
            raise ValueError(f"预测子阶数只能是0、1、2: {self.order}")

    @property
    def u1_prefactor(self) -> float:
        """û1的前置系数 -(K³/64)φ⁗(0)"""
        return -(self.K ** 3 / 64.0) * self.phi4_at_0

    def with_c2(self, c2: float) -> "PredictorSpec":
        return PredictorSpec(K=self.K, C2=c2, phi4_at_0=self.phi4_at_0, order=self.order)

    def with_order(self, order: int) -> "PredictorSpec":
        return PredictorSpec(K=self.K, C2=self.C2, phi4_at_0=self.phi4_at_0, order=order)


@dataclass(frozen=True)
class SinclairSeries:
    """Sinclair级数 Σ c_j r^{1/2-j} sin((1-2j)θ/2)"""

    coefficients: Tuple[float, ...] = field(default=(0.4,))

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @property
    def length(self) -> int:
        """截断阶数N"""
        return len(self.coefficients) - 1

    def with_coefficient(self, j: int, value: float) -> "SinclairSeries":
        coefficients: List[float] = list(self.coefficients)
        while len(coefficients) <= j:
            coefficients.append(0.0)
        coefficients[j] = value
        return SinclairSeries(tuple(coefficients))


def omega(x: PointLike) -> Tuple:
    """
    复平方根映射 ω(x) = √r (cos θ/2, sin θ/2)，θ ∈ (-π, π)

    Args:
        x: 点或格点；不能落在闭的负x1半轴上

    Returns:
        (ω1, ω2)
    """
    x1, x2 = as_point(x)
    if np.any((x2 == 0) & (x1 <= 0)):
        raise ValueError("点落在裂纹 Γ0 上，ω 无定义")
    r = np.hypot(x1, x2)
    theta = np.arctan2(x2, x1)
    root = np.sqrt(r)
    return _scalar(root * np.cos(theta / 2)), _scalar(root * np.sin(theta / 2))


def u_hat0(m: PointLike, spec: PredictorSpec):
    """û0 = K ω2"""
    return _scalar(spec.K * np.asarray(omega(m)[1]))


def u_hat1(x: PointLike, spec: PredictorSpec):
    """
    非线性修正预测子
    û1 = -(K³/64)φ⁗(0) r^{-1/2} (log r sin(θ/2) + sin(5θ/2)/6)

    r < 1 时按原式求值，不做正则化。
    """
    r, theta = _polar(x)
    value = spec.u1_prefactor * r ** -0.5 * (np.log(r) * np.sin(theta / 2) + np.sin(2.5 * theta) / 6.0)
    return _scalar(value)


def u_hat2_profile(x: PointLike):
    """û2的形状函数 r^{-1/2} sin(θ/2) = ω2(x)/|x|"""
    r, theta = _polar(x)
    return _scalar(r ** -0.5 * np.sin(theta / 2))


def u_hat2(x: PointLike, spec: PredictorSpec):
    """û2 = C2 r^{-1/2} sin(θ/2)"""
    if spec.C2 is None:
        raise ValueError("û2需要先给定或标定C2")
    return _scalar(spec.C2 * np.asarray(u_hat2_profile(x)))


def sinclair_eval(x: PointLike, series: SinclairSeries):
    """截断的Sinclair级数"""
    r, theta = _polar(x)
    total = np.zeros_like(r)
    for j, c in enumerate(series.coefficients):
        if c != 0.0:
            total = total + c * r ** (0.5 - j) * np.sin((1 - 2 * j) * theta / 2)
    return _scalar(total)


def predictor_field(domain: LatticeDomain, spec: PredictorSpec) -> ScalarField:
    """
    u_pred^{(i)} = Σ_{k<=i} û_k，在区域内和钳制所需的网格点上求值

    Args:
        domain: 截断区域
        spec: 预测子参数

    Returns:
        覆盖整个网格的标量场
    """
    if spec.order == 2 and spec.C2 is None:
        raise ValueError("order=2 需要C2")
    point = (domain.x1, domain.x2)
    values = np.asarray(u_hat0(point, spec), dtype=float)
    if spec.order >= 1:
        values = values + u_hat1(point, spec)
    if spec.order == 2:
        values = values + u_hat2(point, spec)
    log.debug(f"预测子场: R={domain.radius}, K={spec.K}, order={spec.order}, C2={spec.C2}")
    return ScalarField(domain, values)


def sinclair_field(domain: LatticeDomain, series: SinclairSeries) -> ScalarField:
    return ScalarField(domain, np.asarray(sinclair_eval((domain.x1, domain.x2), series), dtype=float))


def omega2_field(domain: LatticeDomain) -> ScalarField:
    return ScalarField(domain, np.asarray(omega((domain.x1, domain.x2))[1], dtype=float))


# ---------------------------------------------------------------------------
# 连续介质校验：û1 满足 -Δû1 = div H（Γ0上Neumann条件）

def grad_u_hat0(x: PointLike, spec: PredictorSpec) -> Tuple:
    """∇û0 = (K/2) r^{-1/2} (-sin(θ/2), cos(θ/2))"""
    r, theta = _polar(x)
    scale = 0.5 * spec.K * r ** -0.5
    return _scalar(-scale * np.sin(theta / 2)), _scalar(scale * np.cos(theta / 2))


def flux_H(x: PointLike, spec: PredictorSpec) -> Tuple:
    """H = φ⁗(0)/6 ((∂1û0)³, (∂2û0)³)"""
    g1, g2 = grad_u_hat0(x, spec)
    c = spec.phi4_at_0 / 6.0
    return _scalar(c * np.asarray(g1) ** 3), _scalar(c * np.asarray(g2) ** 3)


def flux_H_polar(r, theta, spec: PredictorSpec) -> Tuple:
    """H的极坐标分量 (G_r, G_θ)"""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c = spec.phi4_at_0 * spec.K ** 3 / 192.0 * r ** -1.5
    g_r = c * (3 * np.sin(theta / 2) + np.sin(2.5 * theta))
    g_theta = c * (3 * np.cos(theta / 2) + np.cos(2.5 * theta))
    return _scalar(g_r), _scalar(g_theta)


def div_H(x: PointLike, spec: PredictorSpec):
    """div H = -(K³/64)φ⁗(0) r^{-5/2} (sin(θ/2) + sin(5θ/2))"""
    r, theta = _polar(x)
    return _scalar(spec.u1_prefactor * r ** -2.5 * (np.sin(theta / 2) + np.sin(2.5 * theta)))


def u_hat1_pde_residual(x: PointLike, spec: PredictorSpec, step: float) -> float:
    """
    用中心差分计算 -Δû1 - div H

    Args:
        x: 采样点（离裂纹足够远，使差分模板不跨过Γ0）
        spec: 预测子参数
        step: 相对步长，实际步长 h = step·|x|

    Returns:
        残差，应为 O(h²)
    """
    x1, x2 = (float(v) for v in as_point(x))
    h = step * math.hypot(x1, x2)

    def u1(p1, p2):
        return u_hat1((p1, p2), spec)

    laplacian = (u1(x1 + h, x2) + u1(x1 - h, x2) + u1(x1, x2 + h) + u1(x1, x2 - h) - 4.0 * u1(x1, x2)) / (h * h)
    divergence = (
        (flux_H((x1 + h, x2), spec)[0] - flux_H((x1 - h, x2), spec)[0])
        + (flux_H((x1, x2 + h), spec)[1] - flux_H((x1, x2 - h), spec)[1])
    ) / (2.0 * h)
    return -laplacian - divergence
