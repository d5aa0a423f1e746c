"""
格林函数模块
无裂纹晶格格林函数差 G(0)-G(m)、带裂纹的格林函数预测子Ĝ0/Ĝ1、截断区域上的格林函数列，
以及余项 Ḡ1 的混合导数诊断
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from crackfield.core.analysis import DecayReport, radial_shells
from crackfield.core.lattice import (
    E2,
    FieldClamp,
    LatticeDomain,
    ScalarField,
    Site,
    divergence,
    grad_field,
    mirror,
    site_near,
    stencil,
)
from crackfield.core.predictors import PointLike, as_point, omega, omega2_field
from crackfield.core.solver import SolveSettings, solve_linear_masked
from crackfield.utils.logger import log

LOG_PREFACTOR = 1.0 / (4.0 * math.pi)


@dataclass(frozen=True)
class CutoffProfile:
    """
    截断函数 μ(m, s) = η̂(|m| / |s|^α)

    η̂ 在 [0, 1/2] 上为1、[1, ∞) 上为0，中间用五次光滑阶跃连接（C²）。
    """

    alpha: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"截断指数α必须在 (0, 1] 内: {self.alpha}")

    def __call__(self, t):
        s = np.clip(2.0 * np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
        value = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)
        return float(value) if np.ndim(value) == 0 else value

    def derivative(self, t):
        s = np.clip(2.0 * np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
        value = -2.0 * 30.0 * s * s * (1.0 - s) ** 2
        return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# 无裂纹格林函数

def _hom_integrand(k: float, m1: int, m2: int) -> float:
    half = math.sin(0.5 * k)
    d = 4.0 * half * half
    if d == 0.0:
        return 0.0
    q = math.sqrt(d * (d + 4.0))
    one_minus_tn = -math.expm1(m2 * math.log1p(0.5 * (d - q)))
    numerator = 2.0 * math.sin(0.5 * m1 * k) ** 2 + math.cos(m1 * k) * one_minus_tn
    return numerator / q


def g_hom_diff(m: Tuple[int, int], tol: float = 1e-13) -> float:
    """
    G(0) - G(m)，G是标准五点拉普拉斯 4 - 2cos k1 - 2cos k2 的格林函数

    对k2的积分有闭式，剩下一维积分用自适应求积。G(0)-G(e1) = 1/4，G(0)-G((1,1)) = 1/π。

    Args:
        m: 整数向量
        tol: 求积的绝对和相对容差

    Returns:
        G(0) - G(m)
    """
    m1, m2 = abs(int(m[0])), abs(int(m[1]))
    if m1 == 0 and m2 == 0:
        return 0.0
    if m1 < m2:
        m1, m2 = m2, m1
    limit = 200 + 20 * (m1 + m2)
    value, error = quad(_hom_integrand, 0.0, math.pi, args=(m1, m2), epsabs=tol, epsrel=tol, limit=limit)
    if error > 1e3 * tol * max(1.0, abs(value)):
        log.warning(f"G(0)-G({m1},{m2}) 求积误差估计偏大: {error:.2e}")
    return value / math.pi


def g_hom_diff_trapezoid(m: Tuple[int, int], n: int = 512) -> float:
    """G(0) - G(m) 的二维中点法则（只用于交叉检验，误差 O(n⁻²)）"""
    if n < 2 or n % 2:
        raise ValueError(f"n必须是正偶数: {n}")
    k = -math.pi + (np.arange(n) + 0.5) * (2.0 * math.pi / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    symbol = 4.0 - 2.0 * np.cos(k1) - 2.0 * np.cos(k2)
    integrand = (1.0 - np.cos(k1 * m[0] + k2 * m[1])) / symbol
    return float(integrand.mean())


# ---------------------------------------------------------------------------
# 带裂纹的格林函数预测子

def _log_kernel(z1, z2):
    return -LOG_PREFACTOR * np.log(np.hypot(z1, z2))


def g_hat0(m: PointLike, s: PointLike) -> float:
    """
    Ĝ0(m, s) = F(ω(s) - ω(m)) + F(ω*(s) - ω(m))，F(x) = -(1/4π) log|x|，ω* = (-ω1, ω2)

    镜像项给出Γ0上的Neumann条件。m = s 时对数奇异，抛出ValueError。
    """
    if np.allclose(as_point(m), as_point(s)):
        raise ValueError("Ĝ0 在 m = s 处奇异")
    w1m, w2m = omega(m)
    w1s, w2s = omega(s)
    return float(_log_kernel(w1s - w1m, w2s - w2m) + _log_kernel(-w1s - w1m, w2s - w2m))


def g_hat0_field(domain: LatticeDomain, s: Site) -> ScalarField:
    """整个网格上的 Ĝ0(·, s)，m = s 处取0"""
    w1m, w2m = omega((domain.x1, domain.x2))
    w1s, w2s = omega(s)
    with np.errstate(divide="ignore"):
        values = _log_kernel(w1s - w1m, w2s - w2m) + _log_kernel(-w1s - w1m, w2s - w2m)
    values = np.where(np.isfinite(values), values, 0.0)
    return ScalarField(domain, values)


def g_hat1_s(s: PointLike) -> float:
    """Ĝ1^s(s) = -2 ω2(s) / |s|"""
    x1, x2 = as_point(s)
    return float(-2.0 * omega(s)[1] / np.hypot(x1, x2))


def g_hat1_amplitude(s: PointLike) -> float:
    """
    余项修正中Ĝ1^s的实际幅值 ω2(s) / (2π|s|)

    由 F = -(1/4π) log 的Taylor展开得到，等于 -g_hat1_s(s) / (4π)；
    g_hat1_s 的闭式相对这个对数核差一个因子 -4π。
    """
    return -LOG_PREFACTOR * g_hat1_s(s)


def mu_cutoff(m: PointLike, s: PointLike, profile: Optional[CutoffProfile] = None):
    """μ(m, s) = η̂(|m| / |s|^α)"""
    profile = profile or CutoffProfile()
    rm = np.hypot(*as_point(m))
    rs = float(np.hypot(*as_point(s)))
    return profile(rm / rs ** profile.alpha)


# ---------------------------------------------------------------------------
# 截断区域上的格林函数

@dataclass
class GreensColumn:
    """一列格林函数 G(·, s) 与对应的预测子Ĝ0(·, s)"""

    source: Site
    values: ScalarField
    g_hat0: ScalarField

    @property
    def domain(self) -> LatticeDomain:
        return self.values.domain

    @property
    def remainder(self) -> ScalarField:
        """Ḡ0 = G - Ĝ0"""
        return self.values - self.g_hat0

    def residual_linf(self) -> float:
        """区域内 |-Div D G - δ_s| 的最大值"""
        residual = divergence(grad_field(self.values)).values.copy()
        residual[self.domain.index(self.source)] -= 1.0
        return float(np.max(np.abs(residual[self.domain.interior])))


def solve_crack_green(s: Site, domain: LatticeDomain, settings: Optional[SolveSettings] = None) -> GreensColumn:
    """
    求解 -Div D G(·, s) = δ_s（区域内），区域外 G = Ĝ0(·, s)

    Args:
        s: 源点，必须在区域内且 |s| <= R/2
        domain: 截断区域
        settings: 线性求解参数

    Returns:
        格林函数列
    """
    if not domain.contains(s):
        raise ValueError(f"源点 {s} 不在区域内")
    if s.radius > domain.radius / 2:
        raise ValueError(f"源点 {s} 的半径 {s.radius:.2f} 超过 R/2 = {domain.radius / 2}")

    rhs = ScalarField.zeros(domain)
    rhs.values[domain.index(s)] = 1.0
    predictor = g_hat0_field(domain, s)
    values = solve_linear_masked(domain, rhs, FieldClamp(predictor), settings)
    log.debug(f"格林函数列求解完成: s={s}, R={domain.radius}")
    return GreensColumn(source=s, values=values, g_hat0=predictor)


def g_hat1_m(domain: LatticeDomain, settings: Optional[SolveSettings] = None) -> ScalarField:
    """
    Ĝ1^m：-Div D Ĝ1^m = Div D ω2（区域内），区域外为零

    ω2是奇函数，解也是奇函数，不需要平移常数。
    """
    rhs = -divergence(grad_field(omega2_field(domain)))
    solution = solve_linear_masked(domain, rhs, settings=settings)
    log.info(f"Ĝ1^m 求解完成: R={domain.radius}")
    return solution


def g_hat1(domain: LatticeDomain, s: Site, settings: Optional[SolveSettings] = None,
           g1m: Optional[ScalarField] = None) -> ScalarField:
    """乘积形式 Ĝ1(·, s) = Ĝ1^m(·) Ĝ1^s(s)"""
    g1m = g1m if g1m is not None else g_hat1_m(domain, settings)
    return g1m * g_hat1_s(s)


def g_hat1_mu_field(domain: LatticeDomain, s: Site, g1m: ScalarField,
                    profile: Optional[CutoffProfile] = None) -> ScalarField:
    """
    余项里减去的 μ(·, s) Ĝ1^m(·) 乘以修正幅值 g_hat1_amplitude(s)

    Args:
        domain: 截断区域
        s: 源点
        g1m: Ĝ1^m
        profile: 截断函数

    Returns:
        整个网格上的修正场
    """
    weight = mu_cutoff((domain.x1, domain.x2), s.x, profile) * g_hat1_amplitude(s)
    return ScalarField(domain, weight * g1m.values)


def gbar1_mu(column: GreensColumn, g1m: ScalarField, profile: Optional[CutoffProfile] = None) -> ScalarField:
    """Ḡ1,μ = G - Ĝ0 - μ Ĝ1^m·g_hat1_amplitude(s)"""
    return column.remainder - g_hat1_mu_field(column.domain, column.source, g1m, profile)


def _solve_columns(sources: Sequence[Site], domain: LatticeDomain, settings: Optional[SolveSettings],
                   threads: int) -> List[GreensColumn]:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda s: solve_crack_green(s, domain, settings), sources))


def gbar1_diagnostic(s: Site, domain: LatticeDomain, profile: Optional[CutoffProfile] = None,
                     use_mu: bool = True, settings: Optional[SolveSettings] = None,
                     g1m: Optional[ScalarField] = None, threads: int = 2) -> DecayReport:
    """
    余项的混合导数 |D1 D2 Ḡ(ℓ, s)|·|ℓ|^{1/2} 在 |ℓ| <= |s|/16 上的最大值

    Ḡ1,μ = G - Ĝ0 - μ Ĝ1^m·g_hat1_amplitude(s)；use_mu=False 时为 Ḡ0 = G - Ĝ0。
    D2 取s方向e2的差分，D1 取ℓ处的（带掩码）4-向量梯度。

    Args:
        s: 源点
        domain: 截断区域，s与s+e2都要满足 |·| <= R/2
        profile: 截断函数
        use_mu: 是否减去 μĜ1
        settings: 线性求解参数
        g1m: 预先算好的Ĝ1^m
        threads: 并行求解两列的线程数

    Returns:
        衰减报告，meta["statistic"] 是加权最大值
    """
    profile = profile or CutoffProfile()
    near = s.radius / 16.0
    if near < 2.0:
        raise ValueError(f"|s|/16 = {near:.2f} 太小，近场区域没有足够的格点")
    s_up = s.shift(E2)

    columns = _solve_columns([s, s_up], domain, settings, threads)
    if use_mu:
        g1m = g1m if g1m is not None else g_hat1_m(domain, settings)
        remainders = [gbar1_mu(column, g1m, profile) for column in columns]
    else:
        remainders = [column.remainder for column in columns]

    mixed = grad_field(remainders[1] - remainders[0]).magnitude().values
    region = domain.interior & (domain.r <= near)
    weighted = mixed[region] * np.sqrt(domain.r[region])
    statistic = float(weighted.max())

    shells = radial_shells(weighted, domain.r[region], 0.5, near, 1)
    label = "gbar1_mixed" if use_mu else "gbar0_mixed"
    log.info(f"{label}: s={s}, |s|={s.radius:.2f}, 统计量={statistic:.4e}")
    return DecayReport(label=label, shells=shells, slope=None, window=(0.5, near),
                       meta={"R": domain.radius, "source": [s.a, s.b], "source_radius": s.radius,
                             "statistic": statistic, "use_mu": use_mu, "alpha": profile.alpha})


def gbar1_scaling(domain: LatticeDomain, source_radii: Sequence[float], theta: float = math.pi / 2,
                  profile: Optional[CutoffProfile] = None, use_mu: bool = True,
                  settings: Optional[SolveSettings] = None, threads: int = 2) -> dict:
    """
    沿射线θ改变|s|，统计量随|s|的log-log斜率

    Returns:
        {"reports", "source_radius", "statistic", "slope"}
    """
    g1m = g_hat1_m(domain, settings) if use_mu else None
    reports = []
    for r in source_radii:
        s = site_near(r * math.cos(theta), r * math.sin(theta))
        reports.append(gbar1_diagnostic(s, domain, profile, use_mu, settings, g1m, threads))
    radii = [report.meta["source_radius"] for report in reports]
    stats = [report.meta["statistic"] for report in reports]
    slope = None
    if len(reports) >= 2 and min(stats) > 0:
        slope = float(np.polyfit(np.log(radii), np.log(stats), 1)[0])
    log.info(f"余项统计量随|s|的斜率: {slope}")
    return {"reports": reports, "source_radius": radii, "statistic": stats, "slope": slope}


def g_hat0_mixed_bound(pairs: Sequence[Tuple[Site, Site]]) -> Dict[str, object]:
    """
    |D1 D2 Ĝ0(m, s)|·(1 + |ω(m)||ω(s)||ω(m) - ω(s)|²) 的上界估计

    Args:
        pairs: (m, s) 格点对，模板内的点不能重合

    Returns:
        {"ratios": 每对的加权值, "bound": 最大值}
    """
    ratios = []
    for m, s in pairs:
        rho_m = sorted(stencil(m))
        rho_s = sorted(stencil(s))
        mixed = np.zeros((len(rho_m), len(rho_s)))
        for i, rho in enumerate(rho_m):
            for j, sigma in enumerate(rho_s):
                mp, sp_ = m.shift(rho), s.shift(sigma)
                if mp in (s, sp_) or m in (s, sp_):
                    raise ValueError(f"格点对 ({m}, {s}) 太近，模板重合")
                mixed[i, j] = g_hat0(mp.x, sp_.x) - g_hat0(mp.x, s.x) - g_hat0(m.x, sp_.x) + g_hat0(m.x, s.x)
        w_m = np.hypot(*omega(m.x))
        w_s = np.hypot(*omega(s.x))
        gap = np.hypot(omega(m.x)[0] - omega(s.x)[0], omega(m.x)[1] - omega(s.x)[1])
        ratios.append(float(np.linalg.norm(mixed) * (1.0 + w_m * w_s * gap ** 2)))
    return {"ratios": ratios, "bound": max(ratios) if ratios else 0.0}


def greens_symmetry_report(domain: LatticeDomain, sources: Sequence[Site],
                           settings: Optional[SolveSettings] = None, threads: int = 1) -> dict:
    """
    G(s_i, s_j) 与 G(s_j, s_i) 的最大差，以及第一个源点处的镜像对称误差

    Returns:
        {"sources", "max_asymmetry", "mirror_asymmetry"}
    """
    if len(sources) < 2:
        raise ValueError("至少需要两个源点")
    first = sources[0]
    columns = _solve_columns(list(sources) + [mirror(first)], domain, settings, threads)
    asymmetry = 0.0
    for i, ci in enumerate(columns[:-1]):
        for cj in columns[i + 1:-1]:
            asymmetry = max(asymmetry, abs(ci.values.at(cj.source) - cj.values.at(ci.source)))
    interior = domain.interior
    mirrored = columns[-1].values.mirror().values
    mirror_error = float(np.max(np.abs(mirrored - columns[0].values.values)[interior]))
    log.info(f"格林函数对称性: 最大非对称={asymmetry:.3e}, 镜像误差={mirror_error:.3e}")
    return {"sources": [[s.a, s.b] for s in sources], "max_asymmetry": asymmetry,
            "mirror_asymmetry": mirror_error}
