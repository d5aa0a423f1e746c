"""
晶格模块
带裂纹的二维方晶格：格点、相互作用模板、截断区域，以及离散梯度/散度
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, FrozenSet, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from crackfield.utils.logger import log

Direction = Tuple[int, int]

E1: Direction = (1, 0)
E2: Direction = (0, 1)
MINUS_E1: Direction = (-1, 0)
MINUS_E2: Direction = (0, -1)

# 4-向量分量的固定顺序
DIRECTIONS: Tuple[Direction, ...] = (E1, E2, MINUS_E1, MINUS_E2)
DIRECTION_NAMES: Tuple[str, ...] = ("e1", "e2", "-e1", "-e2")

# R=256时的参考原子数，只用于记录对比
REPORTED_ATOMS_R256 = 200772


@dataclass(frozen=True, order=True)
class Site:
    """格点 m=(a, b)，物理位置 x(m) = (a - 1/2, b - 1/2)"""

    a: int
    b: int

    @property
    def x(self) -> Tuple[float, float]:
        return (self.a - 0.5, self.b - 0.5)

    @property
    def radius(self) -> float:
        return math.hypot(*self.x)

    def shift(self, rho: Direction) -> "Site":
        return Site(self.a + rho[0], self.b + rho[1])

    @property
    def on_upper_face(self) -> bool:
        """是否属于Γ+（x1 < 0, x2 = 1/2）"""
        return self.a <= 0 and self.b == 1

    @property
    def on_lower_face(self) -> bool:
        """是否属于Γ-（x1 < 0, x2 = -1/2）"""
        return self.a <= 0 and self.b == 0


def site_near(x1: float, x2: float) -> Site:
    """返回离点(x1, x2)最近的格点"""
    return Site(int(math.floor(x1)) + 1, int(math.floor(x2)) + 1)


def sites_in_ball(radius: float) -> List[Site]:
    """
    截断区域 Λ_R = B_R ∩ Λ 中的所有格点

    Args:
        radius: 球半径R（以裂尖为中心，欧氏范数，|x(m)| <= R）

    Returns:
        按(a, b)字典序排列的格点列表
    """
    if radius <= 0:
        raise ValueError(f"半径必须为正: {radius}")
    a_max = int(math.floor(radius + 0.5))
    a = np.arange(-a_max + 1, a_max + 1)
    aa, bb = np.meshgrid(a, a, indexing="ij")
    # 用整数坐标 (2a-1)^2 + (2b-1)^2 <= 4R^2 判断
    inside = (2 * aa - 1) ** 2 + (2 * bb - 1) ** 2 <= 4.0 * radius * radius
    return [Site(int(i), int(j)) for i, j in zip(aa[inside], bb[inside])]


def site_count_report(radius: float) -> dict:
    """记录|Λ_R|与πR²，R=256时附上参考原子数"""
    count = len(sites_in_ball(radius))
    report = {"radius": radius, "count": count, "pi_r2": math.pi * radius * radius}
    if radius == 256:
        report["reported"] = REPORTED_ATOMS_R256
        log.info(f"R=256: 计数 {count}，参考值 {REPORTED_ATOMS_R256}")
    return report


def stencil(m: Site) -> FrozenSet[Direction]:
    """
    相互作用模板 R(m)

    Args:
        m: 格点

    Returns:
        裂纹面外为全部4个方向；Γ+上去掉-e2，Γ-上去掉e2
    """
    if m.on_upper_face:
        return frozenset((E1, E2, MINUS_E1))
    if m.on_lower_face:
        return frozenset((E1, MINUS_E1, MINUS_E2))
    return frozenset(DIRECTIONS)


def bond_active(m: Site, rho: Direction) -> bool:
    return rho in stencil(m)


def mirror(m: Site) -> Site:
    """关于裂纹所在直线的镜像：x2 取反，即 (a, b) -> (a, 1 - b)"""
    return Site(m.a, 1 - m.b)


class ClampPolicy:
    """区域外格点取值的策略"""

    def exterior_values(self, domain: "LatticeDomain") -> np.ndarray:
        raise NotImplementedError


class ZeroClamp(ClampPolicy):
    """区域外取零（H⁰(Λ_R)中的修正量）"""

    def exterior_values(self, domain: "LatticeDomain") -> np.ndarray:
        return np.zeros(domain.shape)


class FieldClamp(ClampPolicy):
    """区域外取给定场的值（预测子或格林函数的Dirichlet数据）"""

    def __init__(self, field: Union["ScalarField", np.ndarray]):
        self.values = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)

    def exterior_values(self, domain: "LatticeDomain") -> np.ndarray:
        if self.values.shape != domain.shape:
            raise ValueError(f"边界数据形状 {self.values.shape} 与区域 {domain.shape} 不匹配")
        return self.values.copy()


class LatticeDomain:
    """
    截断区域 Λ_R

    所有场存储在覆盖球 B_R 的方形网格上，外加一圈光环格点（halo），
    数组下标 [i, j] 对应格点 (a, b) = (i + 1 - L, j + 1 - L)。
    球内格点是自由变量，球外格点的值由钳制策略给出。
    构造后不再修改。
    """

    def __init__(self, radius: float):
        """
        初始化区域

        Args:
            radius: 半径R（晶格单位）
        """
        if radius <= 0:
            raise ValueError(f"半径必须为正: {radius}")
        self.radius = float(radius)
        self.half_width = int(math.floor(self.radius + 0.5)) + 1
        size = 2 * self.half_width

        coords = np.arange(1 - self.half_width, self.half_width + 1)
        aa, bb = np.meshgrid(coords, coords, indexing="ij")
        self.coords = coords
        self.x1 = aa - 0.5
        self.x2 = bb - 0.5
        self.r = np.hypot(self.x1, self.x2)
        self.theta = np.arctan2(self.x2, self.x1)
        self.interior = (2 * aa - 1) ** 2 + (2 * bb - 1) ** 2 <= 4.0 * self.radius ** 2

        # 竖直键 (i, j)-(i, j+1)：下端点在Γ-上时断开
        lower_b = coords[:-1]
        self.vertical_active = ~((aa[:, :-1] <= 0) & (lower_b[None, :] == 0))

        mask = np.zeros((size, size, 4), dtype=bool)
        mask[:-1, :, 0] = True
        mask[:, :-1, 1] = self.vertical_active
        mask[1:, :, 2] = True
        mask[:, 1:, 3] = self.vertical_active
        self.direction_mask = mask

        self.free_index = np.flatnonzero(self.interior.ravel())
        self.n_free = int(self.free_index.size)

        for array in (self.x1, self.x2, self.r, self.theta, self.interior, self.vertical_active, self.direction_mask):
            array.setflags(write=False)

        log.info(f"晶格区域初始化: R={self.radius}, 自由格点数={self.n_free}, 网格={size}x{size}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x1.shape

    def same_geometry(self, other: "LatticeDomain") -> bool:
        return self.radius == other.radius

    def index(self, m: Site) -> Tuple[int, int]:
        """格点在网格数组中的下标"""
        i = m.a + self.half_width - 1
        j = m.b + self.half_width - 1
        if not (0 <= i < self.shape[0] and 0 <= j < self.shape[1]):
            raise ValueError(f"格点 {m} 不在区域网格内")
        return i, j

    def contains(self, m: Site) -> bool:
        try:
            return bool(self.interior[self.index(m)])
        except ValueError:
            return False

    def sites(self) -> List[Site]:
        """区域内格点，按(a, b)字典序"""
        i, j = np.nonzero(self.interior)
        offset = 1 - self.half_width
        return [Site(int(p + offset), int(q + offset)) for p, q in zip(i, j)]

    @cached_property
    def halo(self) -> np.ndarray:
        """区域外但与区域内格点有活跃键相连的格点"""
        touched = np.zeros(self.shape, dtype=bool)
        inner = self.interior
        touched[1:, :] |= inner[:-1, :]
        touched[:-1, :] |= inner[1:, :]
        touched[:, 1:] |= inner[:, :-1] & self.vertical_active
        touched[:, :-1] |= inner[:, 1:] & self.vertical_active
        return touched & ~inner

    def crack_faces(self) -> Tuple[List[Site], List[Site]]:
        """区域内的裂纹面格点 (Γ+, Γ-)"""
        sites = self.sites()
        return [m for m in sites if m.on_upper_face], [m for m in sites if m.on_lower_face]

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """
        自由格点的邻居表

        Returns:
            (n_free, 4) 的网格扁平下标，方向顺序 (e1, e2, -e1, -e2)，断开的键记为 -1
        """
        size = self.shape[1]
        i, j = np.unravel_index(self.free_index, self.shape)
        table = np.full((self.n_free, 4), -1, dtype=np.int64)
        for k, (da, db) in enumerate(DIRECTIONS):
            ok = self.direction_mask[i, j, k]
            table[ok, k] = (i[ok] + da) * size + (j[ok] + db)
        return table

    @cached_property
    def bond_incidence(self) -> sp.csr_matrix:
        """
        物理键的关联矩阵

        每行对应一条至少有一个端点在区域内的活跃键 (p, q)，q = p + e1 或 p + e2，
        在q列为+1、p列为-1，因此 (B u)_b = D_ρ u(p)。
        有向键求和等于物理键求和的两倍。
        """
        size = self.shape[1]
        flat = np.arange(size * size).reshape(self.shape)
        inner = self.interior

        p_h, q_h = flat[:-1, :], flat[1:, :]
        keep_h = inner[:-1, :] | inner[1:, :]
        p_v, q_v = flat[:, :-1], flat[:, 1:]
        keep_v = (inner[:, :-1] | inner[:, 1:]) & self.vertical_active

        p = np.concatenate([p_h[keep_h], p_v[keep_v]])
        q = np.concatenate([q_h[keep_h], q_v[keep_v]])
        n_bonds = p.size
        rows = np.concatenate([np.arange(n_bonds), np.arange(n_bonds)])
        cols = np.concatenate([q, p])
        data = np.concatenate([np.ones(n_bonds), -np.ones(n_bonds)])
        return sp.csr_matrix((data, (rows, cols)), shape=(n_bonds, size * size))

    @cached_property
    def free_incidence(self) -> sp.csr_matrix:
        return self.bond_incidence[:, self.free_index].tocsr()

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """自由格点上的 -Div D（带裂纹掩码、区域外为零）"""
        b_free = self.free_incidence
        return (2.0 * (b_free.T @ b_free)).tocsr()

    def bond_differences(self, values: np.ndarray) -> np.ndarray:
        """全网格场在每条物理键上的差分"""
        return self.bond_incidence @ np.asarray(values, dtype=float).ravel()


@dataclass(eq=False)
class ScalarField:
    """格点上的标量场（反平面位移），区域外的值即钳制值"""

    domain: LatticeDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValueError(f"场的形状 {self.values.shape} 与区域 {self.domain.shape} 不匹配")

    @classmethod
    def zeros(cls, domain: LatticeDomain) -> "ScalarField":
        return cls(domain, np.zeros(domain.shape))

    @classmethod
    def from_function(cls, domain: LatticeDomain, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        """在每个网格点的物理位置上求值"""
        return cls(domain, np.broadcast_to(func(domain.x1, domain.x2), domain.shape).copy())

    @classmethod
    def from_free(cls, domain: LatticeDomain, vector: np.ndarray, clamp: Optional[ClampPolicy] = None) -> "ScalarField":
        """
        由自由格点向量构造场

        Args:
            domain: 区域
            vector: 长度为n_free的向量
            clamp: 区域外的取值策略，默认为零

        Returns:
            标量场
        """
        values = (clamp or ZeroClamp()).exterior_values(domain)
        values.ravel()[domain.free_index] = vector
        return cls(domain, values)

    def free_values(self) -> np.ndarray:
        return self.values.ravel()[self.domain.free_index].copy()

    def at(self, m: Site) -> float:
        return float(self.values[self.domain.index(m)])

    def with_zero_exterior(self) -> "ScalarField":
        return ScalarField(self.domain, np.where(self.domain.interior, self.values, 0.0))

    def mirror(self) -> "ScalarField":
        """u∘mirror：数组沿b方向翻转"""
        return ScalarField(self.domain, self.values[:, ::-1].copy())

    def embed(self, target: LatticeDomain) -> "ScalarField":
        """
        把修正量零延拓到更大的同心区域

        Args:
            target: 半径不小于当前区域的区域

        Returns:
            target上的场，当前区域外为零
        """
        offset = target.half_width - self.domain.half_width
        if offset < 0:
            raise ValueError("目标区域比当前区域小")
        values = np.zeros(target.shape)
        size = self.domain.shape[0]
        inner = self.with_zero_exterior().values
        values[offset:offset + size, offset:offset + size] = inner
        return ScalarField(target, values)

    def _check(self, other: "ScalarField"):
        if not self.domain.same_geometry(other.domain):
            raise ValueError("两个场定义在不同区域上")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return ScalarField(self.domain, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return ScalarField(self.domain, self.values - other.values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.domain, -self.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.domain, scalar * self.values)

    __rmul__ = __mul__


@dataclass(eq=False)
class BondField:
    """每个格点上按 (e1, e2, -e1, -e2) 排列的4-向量，断开的键处恒为零"""

    domain: LatticeDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.where(self.domain.direction_mask, np.asarray(self.values, dtype=float), 0.0)

    def at(self, m: Site) -> np.ndarray:
        return self.values[self.domain.index(m)].copy()

    def magnitude(self) -> ScalarField:
        """|g(m)|（4-向量的欧氏范数）"""
        return ScalarField(self.domain, np.linalg.norm(self.values, axis=-1))

    def dot(self, other: "BondField") -> float:
        return float(np.sum(self.values * other.values))


def grad(u: ScalarField, m: Site) -> np.ndarray:
    """
    离散梯度 Du(m)

    Args:
        u: 标量场（区域外读钳制值）
        m: 格点

    Returns:
        4-向量，活跃方向为 u(m+ρ) - u(m)，断开方向为0
    """
    active = stencil(m)
    base = u.at(m)
    return np.array([u.at(m.shift(rho)) - base if rho in active else 0.0 for rho in DIRECTIONS])


def grad_field(u: ScalarField) -> BondField:
    """对网格上每个格点计算Du"""
    domain = u.domain
    values = np.zeros(domain.shape + (4,))
    dx = u.values[1:, :] - u.values[:-1, :]
    dy = (u.values[:, 1:] - u.values[:, :-1]) * domain.vertical_active
    values[:-1, :, 0] = dx
    values[:, :-1, 1] = dy
    values[1:, :, 2] = -dx
    values[:, 1:, 3] = -dy
    return BondField(domain, values)


def divergence(g: BondField) -> ScalarField:
    """
    负离散散度 (-Div g)(m) = Σ_ρ [g_ρ(m-ρ) - g_ρ(m)]

    区域内格点只读取一圈光环内的值；网格边界上的结果无意义。
    """
    v = g.values
    out = -v.sum(axis=-1)
    out[1:, :] += v[:-1, :, 0]
    out[:, 1:] += v[:, :-1, 1]
    out[:-1, :] += v[1:, :, 2]
    out[:, :-1] += v[:, 1:, 3]
    return ScalarField(g.domain, out)


def laplace_residual(u: ScalarField) -> ScalarField:
    """-Div Du，只保留区域内格点"""
    return divergence(grad_field(u)).with_zero_exterior()


def hdot1_norm(u: ScalarField) -> float:
    """Ḣ¹半范数 ‖Du‖_ℓ²（对有向键求和）"""
    return float(np.sqrt(np.sum(grad_field(u).values ** 2)))
