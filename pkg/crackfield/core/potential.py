"""
对势与能量模块
对势φ及其导数、能量差泛函、能量梯度（力）、Hessian作用
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from crackfield.core.lattice import (
    BondField,
    LatticeDomain,
    ScalarField,
    divergence,
    grad_field,
)
from crackfield.utils.logger import log

MAX_DERIVATIVE_ORDER = 4


class PairPotential:
    """反平面对势 φ，要求满足镜像对称 φ(-r) = φ(r)"""

    name = "base"
    even = True

    def derivative(self, r, order: int = 0):
        """
        φ的第order阶导数

        Args:
            r: 标量或数组
            order: 0..4

        Returns:
            与r同形状的结果
        """
        if order not in range(MAX_DERIVATIVE_ORDER + 1):
            raise ValueError(f"不支持的导数阶数: {order}")
        return self._derivative(np.asarray(r, dtype=float), order)

    def _derivative(self, r: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, r):
        return self.derivative(r, 0)

    @property
    def fourth_at_zero(self) -> float:
        return float(self.derivative(0.0, 4))


class GaussianPotential(PairPotential):
    """φ(r) = (1 - exp(-3r²)) / 6，φ''(0) = 1，φ⁗(0) = -18"""

    name = "gaussian"

    def _derivative(self, r: np.ndarray, order: int) -> np.ndarray:
        r2 = r * r
        e = np.exp(-3.0 * r2)
        if order == 0:
            return (1.0 - e) / 6.0
        if order == 1:
            return r * e
        if order == 2:
            return (1.0 - 6.0 * r2) * e
        if order == 3:
            return (36.0 * r2 - 18.0) * r * e
        return (-18.0 + 216.0 * r2 - 216.0 * r2 * r2) * e


class QuadraticPotential(PairPotential):
    """φ(r) = r²/2，能量退化为 ½‖Du‖²"""

    name = "quadratic"

    def _derivative(self, r: np.ndarray, order: int) -> np.ndarray:
        if order == 0:
            return 0.5 * r * r
        if order == 1:
            return r.copy()
        if order == 2:
            return np.ones_like(r)
        return np.zeros_like(r)


POTENTIALS = {"gaussian": GaussianPotential, "quadratic": QuadraticPotential}


def get_potential(name: str) -> PairPotential:
    try:
        return POTENTIALS[name]()
    except KeyError:
        raise ValueError(f"未知的对势: {name}") from None


def phi_derivatives(r: float, order: int) -> float:
    """默认对势的解析导数"""
    return float(GaussianPotential().derivative(r, order))


class EnergyAssembly:
    """
    广义能量差泛函 E(u_pred, u) 的装配

    E(u_pred, u) = Σ_m Σ_{ρ∈R(m)} φ(D_ρ u_pred(m) + D_ρ u(m)) - φ(D_ρ û0(m))，
    只对至少一个端点在区域内的键求和；每条物理键以两个方向各出现一次。
    自由变量是区域内格点上的u，区域外u = 0。
    """

    def __init__(self, domain: LatticeDomain, potential: PairPotential,
                 predictor: ScalarField, reference: Optional[ScalarField] = None):
        """
        初始化装配

        Args:
            domain: 截断区域
            potential: 对势
            predictor: 预测子 u_pred（区域内外都要有值）
            reference: 能量参考 û0，默认与predictor相同
        """
        for field in (predictor, reference):
            if field is not None and not domain.same_geometry(field.domain):
                raise ValueError("预测子与区域不匹配")
        self.domain = domain
        self.potential = potential
        self.predictor = predictor
        self.reference = reference if reference is not None else predictor

        self.predictor_bonds = domain.bond_differences(predictor.values)
        self.reference_bonds = domain.bond_differences(self.reference.values)
        self.reference_energy = 2.0 * float(np.sum(potential(self.reference_bonds)))
        self._free_incidence = domain.free_incidence

        log.debug(f"能量装配完成: 键数={self.predictor_bonds.size}, 对势={potential.name}")

    def _free(self, u) -> np.ndarray:
        if isinstance(u, ScalarField):
            if not self.domain.same_geometry(u.domain):
                raise ValueError("修正量与装配的区域不匹配")
            return u.free_values()
        x = np.asarray(u, dtype=float)
        if x.shape != (self.domain.n_free,):
            raise ValueError(f"自由变量长度应为 {self.domain.n_free}，实际 {x.shape}")
        return x

    def bonds(self, u) -> np.ndarray:
        """总位移在每条物理键上的差分"""
        return self.predictor_bonds + self._free_incidence @ self._free(u)

    def energy_vector(self, x) -> float:
        d = self.bonds(x)
        return 2.0 * float(np.sum(self.potential(d) - self.potential(self.reference_bonds)))

    def gradient_vector(self, x) -> np.ndarray:
        d = self.bonds(x)
        return 2.0 * (self._free_incidence.T @ self.potential.derivative(d, 1))

    def hessian_vector(self, x, v) -> np.ndarray:
        weights = self.potential.derivative(self.bonds(x), 2)
        return 2.0 * (self._free_incidence.T @ (weights * (self._free_incidence @ v)))

    def total_field(self, u: ScalarField) -> ScalarField:
        """u_pred + u（区域外即预测子）"""
        return self.predictor + u.with_zero_exterior()


def energy(assembly: EnergyAssembly, u: ScalarField) -> float:
    """能量差 E(u_pred, u)"""
    return assembly.energy_vector(u)


def grad_energy(assembly: EnergyAssembly, u: ScalarField) -> ScalarField:
    """
    能量的一阶变分

    区域内分量为 Σ_ρ φ'(D_ρ u_tot(m-ρ)) - φ'(D_ρ u_tot(m))，区域外为零
    """
    return ScalarField.from_free(assembly.domain, assembly.gradient_vector(u))


def hessian_apply(assembly: EnergyAssembly, u: ScalarField, v: ScalarField) -> ScalarField:
    """二阶变分 δ²E(u)[v, ·]，键权重为 φ''"""
    return ScalarField.from_free(assembly.domain, assembly.hessian_vector(assembly._free(u), assembly._free(v)))


def stress_field(u_total: ScalarField, potential: PairPotential) -> BondField:
    """∇V(Du)：对每个活跃键取φ'"""
    du = grad_field(u_total)
    return BondField(u_total.domain, potential.derivative(du.values, 1))


def forces(u_total: ScalarField, potential: Optional[PairPotential] = None) -> ScalarField:
    """
    力的大小 |Div ∇V(Du_total)|

    Args:
        u_total: 总位移（区域外为预测子值）
        potential: 对势，默认为GaussianPotential

    Returns:
        区域内的力场，区域外为零
    """
    potential = potential or GaussianPotential()
    residual = divergence(stress_field(u_total, potential))
    return ScalarField(u_total.domain, np.abs(residual.with_zero_exterior().values))


def linear_residual(u_corr: ScalarField) -> ScalarField:
    """线性残差 |Div ∇²V(0) D ū| = |Div D ū|（∇²V(0) = Id）"""
    residual = divergence(grad_field(u_corr))
    return ScalarField(u_corr.domain, np.abs(residual.with_zero_exterior().values))
