"""
分析模块
径向壳层衰减率估计、û2常数的二分标定、R收敛性研究、Sinclair级数不完备性实验
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from tqdm import tqdm

from crackfield.core.lattice import BondField, LatticeDomain, ScalarField, grad_field, hdot1_norm
from crackfield.core.potential import EnergyAssembly, PairPotential, forces, linear_residual
from crackfield.core.predictors import (
    PredictorSpec,
    SinclairSeries,
    predictor_field,
    sinclair_field,
    u_hat2_profile,
)
from crackfield.core.solver import SolveReport, SolveSettings, minimize, stability_check
from crackfield.utils.config import default_window
from crackfield.utils.logger import log


class CalibrationError(RuntimeError):
    """二分标定找不到变号区间"""


@dataclass
class Shell:
    """一个径向壳层的统计量"""

    r_mid: float
    max_abs: float
    mean: float
    count: int

    def to_dict(self) -> dict:
        return {"r_mid": self.r_mid, "max": self.max_abs, "mean": self.mean, "count": self.count}

    @classmethod
    def from_dict(cls, data: dict) -> "Shell":
        return cls(r_mid=float(data["r_mid"]), max_abs=float(data["max"]),
                   mean=float(data["mean"]), count=int(data["count"]))


@dataclass
class DecayReport:
    """
    衰减报告

    Attributes:
        label: 物理量名称
        shells: 壳层统计
        slope: 壳层最大值的log-log最小二乘斜率（无法拟合时为None）
        window: 拟合窗口 [r_min, r_max]
        meta: R、K、阶数等元数据
    """

    label: str
    shells: List[Shell]
    slope: Optional[float]
    window: Tuple[float, float]
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "meta": {"label": self.label, **self.meta},
            "shells": [shell.to_dict() for shell in self.shells],
            "slope": self.slope,
            "window": [float(self.window[0]), float(self.window[1])],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecayReport":
        meta = dict(data.get("meta", {}))
        label = meta.pop("label", "")
        return cls(label=label, shells=[Shell.from_dict(s) for s in data["shells"]],
                   slope=data.get("slope"), window=tuple(data["window"]), meta=meta)


@dataclass
class ConvergenceReport:
    """R收敛性报告：‖ū^R - ū^{R_ref}‖_Ḣ¹ 与拟合阶"""

    order: int
    radii: List[float]
    errors: List[float]
    fitted_order: Optional[float]
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"meta": {"order": self.order, **self.meta}, "radii": list(self.radii),
                "errors": list(self.errors), "fitted_order": self.fitted_order}

    @classmethod
    def from_dict(cls, data: dict) -> "ConvergenceReport":
        meta = dict(data.get("meta", {}))
        order = int(meta.pop("order"))
        return cls(order=order, radii=[float(r) for r in data["radii"]],
                   errors=[float(e) for e in data["errors"]], fitted_order=data.get("fitted_order"), meta=meta)


@dataclass
class CorrectorResult:
    """一次修正量求解的结果"""

    domain: LatticeDomain
    spec: PredictorSpec
    predictor: ScalarField
    corrector: ScalarField
    report: SolveReport
    assembly: EnergyAssembly

    @property
    def total(self) -> ScalarField:
        return self.assembly.total_field(self.corrector)


# ---------------------------------------------------------------------------
# 壳层衰减

def radial_shells(values: np.ndarray, radii: np.ndarray, r_lo: float, r_hi: float,
                  shells_per_octave: int = 4) -> List[Shell]:
    """
    对数等距壳层 [2^{k/n}, 2^{(k+1)/n}) 上的最大值与均值

    Args:
        values: 非负数值（一维）
        radii: 对应的半径
        r_lo, r_hi: 只统计完全落在 [r_lo, r_hi] 中的壳层
        shells_per_octave: 每个倍频程的壳层数n，n=1即二进壳层

    Returns:
        非空壳层列表
    """
    n = int(shells_per_octave)
    k_lo = int(math.ceil(n * math.log2(r_lo) - 1e-9))
    k_hi = int(math.floor(n * math.log2(r_hi) + 1e-9))
    shells = []
    for k in range(k_lo, k_hi):
        lo, hi = 2.0 ** (k / n), 2.0 ** ((k + 1) / n)
        selected = values[(radii >= lo) & (radii < hi)]
        if selected.size:
            shells.append(Shell(r_mid=math.sqrt(lo * hi), max_abs=float(selected.max()),
                                mean=float(selected.mean()), count=int(selected.size)))
    return shells


def fit_slope(shells: Sequence[Shell]) -> Optional[float]:
    """log(max) 对 log(r_mid) 的最小二乘斜率"""
    maxima = np.array([s.max_abs for s in shells])
    if len(shells) < 2 or np.any(maxima <= 0):
        return None
    r_mid = np.array([s.r_mid for s in shells])
    return float(np.polyfit(np.log(r_mid), np.log(maxima), 1)[0])


def shell_decay(field: Union[ScalarField, BondField], window: Optional[Tuple[float, float]] = None,
                label: str = "", shells_per_octave: int = 4, meta: Optional[dict] = None) -> DecayReport:
    """
    区域内格点上 |field| 的壳层衰减

    Args:
        field: 标量场或键场（取4-向量范数）
        window: 拟合窗口，默认 [16, R/4]（小区域时下限取R/8）
        label: 物理量名称
        shells_per_octave: 每个倍频程的壳层数
        meta: 附加元数据

    Returns:
        衰减报告；壳层最大值为零时斜率为None
    """
    domain = field.domain
    magnitude = field.magnitude().values if isinstance(field, BondField) else np.abs(field.values)
    window = tuple(window) if window is not None else default_window(domain.radius)
    if window[0] < 2 or window[1] > domain.radius / 2 or window[0] >= window[1]:
        raise ValueError(f"拟合窗口 {window} 必须落在 [2, R/2] = [2, {domain.radius / 2}] 内")

    inside = domain.interior
    shells = radial_shells(magnitude[inside], domain.r[inside], window[0], window[1], shells_per_octave)
    if len(shells) < 3:
        raise ValueError(f"拟合窗口 {window} 内只有 {len(shells)} 个壳层，至少需要3个")
    slope = fit_slope(shells)
    if slope is None:
        log.warning(f"{label or '场'} 在窗口内为零，无法拟合斜率")
    else:
        log.info(f"{label or '场'} 衰减斜率 {slope:.3f}（窗口 {window[0]:g}-{window[1]:g}）")
    return DecayReport(label=label, shells=shells, slope=slope, window=window,
                       meta={"R": domain.radius, **(meta or {})})


# ---------------------------------------------------------------------------
# 修正量求解

def make_spec(K: float, order: int, potential: PairPotential, C2: Optional[float] = None) -> PredictorSpec:
    """按对势的φ⁗(0)构造预测子参数"""
    return PredictorSpec(K=K, C2=C2, phi4_at_0=potential.fourth_at_zero, order=order)


def solve_corrector(domain: LatticeDomain, spec: PredictorSpec, potential: PairPotential,
                    settings: Optional[SolveSettings] = None, predictor: Optional[ScalarField] = None,
                    u_init: Optional[ScalarField] = None) -> CorrectorResult:
    """
    以 u_pred 为边界条件求截断问题的修正量ū

    Args:
        domain: 截断区域
        spec: 预测子参数
        potential: 对势
        settings: 求解参数
        predictor: 自定义预测子（如Sinclair级数），默认 predictor_field(domain, spec)
        u_init: 初值

    Returns:
        求解结果
    """
    predictor = predictor if predictor is not None else predictor_field(domain, spec)
    reference = predictor_field(domain, spec.with_order(0))
    assembly = EnergyAssembly(domain, potential, predictor, reference)
    corrector, report = minimize(assembly, u_init, settings)
    return CorrectorResult(domain, spec, predictor, corrector, report, assembly)


def decay_reports(result: CorrectorResult, potential: PairPotential,
                  window: Optional[Tuple[float, float]] = None, shells_per_octave: int = 4) -> Dict[str, DecayReport]:
    """
    三类衰减：修正量梯度|Dū|、预测子的力|Div∇V(Du_pred)|、线性残差|Div Dū|
    """
    meta = {"K": result.spec.K, "order": result.spec.order, "c2": result.spec.C2}
    return {
        "corrector_gradient": shell_decay(grad_field(result.corrector), window, "corrector_gradient",
                                          shells_per_octave, meta),
        "forces": shell_decay(forces(result.predictor, potential), window, "forces", shells_per_octave, meta),
        "linear_residual": shell_decay(linear_residual(result.corrector), window, "linear_residual",
                                       shells_per_octave, meta),
    }


def gradient_slope(result: CorrectorResult, window: Optional[Tuple[float, float]] = None,
                   shells_per_octave: int = 4) -> Optional[float]:
    return shell_decay(grad_field(result.corrector), window, "corrector_gradient", shells_per_octave).slope


# ---------------------------------------------------------------------------
# û2 常数标定

def annulus_mask(domain: LatticeDomain, r_lo: float, r_hi: float) -> np.ndarray:
    return domain.interior & (domain.r >= r_lo) & (domain.r <= r_hi)


def c2_projection(corrector: ScalarField, annulus: Optional[Tuple[float, float]] = None) -> float:
    """修正量在环形区域上对û2形状函数 ω2/|x| 的投影"""
    domain = corrector.domain
    r_lo, r_hi = annulus or (domain.radius / 4, domain.radius / 2)
    mask = annulus_mask(domain, r_lo, r_hi)
    profile = np.asarray(u_hat2_profile((domain.x1[mask], domain.x2[mask])))
    return float(np.sum(corrector.values[mask] * profile))


def calibrate_c2(domain: LatticeDomain, spec: PredictorSpec, potential: PairPotential,
                 settings: Optional[SolveSettings] = None, bracket: Tuple[float, float] = (-1.0, 1.0),
                 xtol: float = 1e-8, annulus: Optional[Tuple[float, float]] = None) -> float:
    """
    二分法标定 û2 的常数C2

    a(C) 是以 û0 + û1 + C r^{-1/2} sin(θ/2) 为边界条件的修正量在环形区域
    r ∈ [R/4, R/2] 上对形状函数的投影，返回 a 的根。

    Args:
        domain: 截断区域
        spec: 预测子参数（C2不需要给定）
        potential: 对势
        settings: 求解参数
        bracket: 初始区间，不变号时以同一中心放大10倍重试一次
        xtol: 根的绝对容差
        annulus: 投影的环形区域

    Returns:
        C2
    """
    cache: Dict[float, float] = {}
    state: Dict[str, Optional[ScalarField]] = {"last": None}
    progress = tqdm(desc="标定C2", unit="solve", disable=None)

    def amplitude(c2: float) -> float:
        if c2 in cache:
            return cache[c2]
        result = solve_corrector(domain, spec.with_c2(c2).with_order(2), potential, settings, u_init=state["last"])
        if not result.report.converged:
            log.warning(f"C2={c2:.6g} 处的求解未收敛")
        state["last"] = result.corrector
        cache[c2] = c2_projection(result.corrector, annulus)
        progress.update(1)
        log.debug(f"a({c2:.10g}) = {cache[c2]:.6e}")
        return cache[c2]

    try:
        lo, hi = bracket
        if amplitude(lo) * amplitude(hi) > 0:
            center, half = 0.5 * (lo + hi), 5.0 * (hi - lo)
            log.warning(f"区间 [{lo}, {hi}] 内a(C)不变号，扩大到 [{center - half}, {center + half}]")
            lo, hi = center - half, center + half
            if amplitude(lo) * amplitude(hi) > 0:
                raise CalibrationError(f"扩大后的区间 [{lo}, {hi}] 内a(C)仍不变号")
        root = float(bisect(amplitude, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))
    finally:
        progress.close()
    log.info(f"C2标定完成: C2={root:.10g}（{len(cache)}次求解）")
    return root


# ---------------------------------------------------------------------------
# 收敛性研究

def _common_bond_mask(small: LatticeDomain, target: LatticeDomain) -> np.ndarray:
    """两端都在小区域内的有向键"""
    inside = ScalarField(small, small.interior.astype(float)).embed(target).values > 0
    mask = np.zeros(target.shape + (4,), dtype=bool)
    mask[:-1, :, 0] = inside[:-1, :] & inside[1:, :]
    mask[:, :-1, 1] = inside[:, :-1] & inside[:, 1:]
    mask[1:, :, 2] = inside[1:, :] & inside[:-1, :]
    mask[:, 1:, 3] = inside[:, 1:] & inside[:, :-1]
    return mask


def convergence_study(radii: Sequence[float], order: int, spec: PredictorSpec, potential: PairPotential,
                      settings: Optional[SolveSettings] = None, region: Literal["reference", "common"] = "reference",
                      threads: int = 1) -> ConvergenceReport:
    """
    ‖ū^R - ū^{R_ref}‖_Ḣ¹ 随R的收敛

    Args:
        radii: 递增的半径，最后一个是参考解
        order: 预测子阶数
        spec: 预测子参数；order=2且C2为None时在参考半径上标定
        potential: 对势
        settings: 求解参数
        region: "reference" 在参考区域上度量（ū^R零延拓），"common" 只在最小区域内度量
        threads: 并行求解的线程数

    Returns:
        收敛报告
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"至少需要3个严格递增的半径: {radii}")
    domains = [LatticeDomain(r) for r in radii]
    spec = spec.with_order(order)
    if order == 2 and spec.C2 is None:
        spec = spec.with_c2(calibrate_c2(domains[-1], spec, potential, settings))

    def run(domain: LatticeDomain) -> CorrectorResult:
        return solve_corrector(domain, spec, potential, settings)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(tqdm(pool.map(run, domains), total=len(domains), desc=f"收敛性 order={order}", disable=None))

    failed = [r.domain.radius for r in results if not r.report.converged]
    if failed:
        log.warning(f"以下半径的求解未收敛: {failed}")

    reference = results[-1].corrector
    ref_domain = domains[-1]
    common = _common_bond_mask(domains[0], ref_domain) if region == "common" else None
    errors = []
    for result in results[:-1]:
        diff = reference - result.corrector.embed(ref_domain)
        if common is None:
            errors.append(hdot1_norm(diff))
        else:
            values = grad_field(diff).values
            errors.append(float(np.sqrt(np.sum(values[common] ** 2))))

    fitted = float(np.polyfit(np.log(radii[:-1]), np.log(errors), 1)[0]) if min(errors) > 0 else None
    log.info(f"收敛性 order={order}: 误差={['%.3e' % e for e in errors]}, 拟合阶={fitted}")
    return ConvergenceReport(order=order, radii=radii[:-1], errors=errors, fitted_order=fitted,
                             meta={"R_ref": radii[-1], "K": spec.K, "c2": spec.C2, "region": region,
                                   "converged": not failed})


# ---------------------------------------------------------------------------
# Sinclair 级数实验

@dataclass
class SinclairReport:
    """Sinclair级数与完整一阶展开的比较"""

    coefficients: List[float]
    objective: Dict[str, float]
    slope_order0: Optional[float]
    slope_sinclair: Optional[float]
    slope_full: Optional[float]
    c2: Optional[float]
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def improvement(self) -> Optional[float]:
        """Sinclair相对0阶的斜率改善（正值表示衰减更快）"""
        if self.slope_order0 is None or self.slope_sinclair is None:
            return None
        return self.slope_order0 - self.slope_sinclair

    def to_dict(self) -> dict:
        return {"meta": dict(self.meta), "coefficients": list(self.coefficients), "objective": dict(self.objective),
                "slope_order0": self.slope_order0, "slope_sinclair": self.slope_sinclair,
                "slope_full": self.slope_full, "c2": self.c2, "improvement": self.improvement}

    def table(self) -> List[dict]:
        """对比表的行"""
        return [
            {"boundary_condition": "u0", "slope": self.slope_order0},
            {"boundary_condition": f"sinclair_N{len(self.coefficients) - 1}", "slope": self.slope_sinclair},
            {"boundary_condition": "u0+u1+u2", "slope": self.slope_full},
        ]


def far_field_energy(corrector: ScalarField, annulus: Optional[Tuple[float, float]] = None) -> float:
    """修正量在环形区域上的Ḣ¹能量 Σ|Dū|²"""
    domain = corrector.domain
    r_lo, r_hi = annulus or (domain.radius / 4, domain.radius / 2)
    mask = annulus_mask(domain, r_lo, r_hi)
    return float(np.sum(grad_field(corrector).values[mask] ** 2))


def sinclair_experiment(domain: LatticeDomain, n_terms: int, spec: PredictorSpec, potential: PairPotential,
                        settings: Optional[SolveSettings] = None, window: Optional[Tuple[float, float]] = None,
                        grid_points: int = 9, grid_span: float = 1.0, shells_per_octave: int = 4,
                        include_full: bool = True) -> SinclairReport:
    """
    Sinclair型柔性边界条件的不完备性实验

    固定 c0 = K，依次对 c1..cN 做网格扫描再用黄金分割细化，目标是修正量的远场能量；
    比较最优Sinclair边界条件、û0、以及 û0+û1+û2 下 |Dū| 的衰减斜率。

    Args:
        domain: 截断区域
        n_terms: 级数截断N（N=0即û0）
        spec: 预测子参数（order=2比较时用其C2，C2为None则标定）
        potential: 对势
        settings: 求解参数
        window: 斜率拟合窗口
        grid_points: 每个系数的扫描点数
        grid_span: 扫描范围 [-span, span]
        shells_per_octave: 每个倍频程的壳层数
        include_full: 是否计算完整一阶展开的斜率

    Returns:
        实验报告
    """
    if n_terms < 0:
        raise ValueError(f"级数截断必须非负: {n_terms}")
    base = solve_corrector(domain, spec.with_order(0), potential, settings)
    slope0 = gradient_slope(base, window, shells_per_octave)
    series = SinclairSeries((spec.K,))
    objective: Dict[str, float] = {}
    best = base

    for j in range(1, n_terms + 1):
        cache: Dict[float, CorrectorResult] = {}

        def evaluate(c: float) -> float:
            c = float(c)
            if c not in cache:
                trial = series.with_coefficient(j, c)
                cache[c] = solve_corrector(domain, spec.with_order(0), potential, settings,
                                           predictor=sinclair_field(domain, trial))
            return far_field_energy(cache[c].corrector)

        grid = np.linspace(-grid_span, grid_span, grid_points)
        values = [evaluate(c) for c in tqdm(grid, desc=f"Sinclair c{j} 扫描", disable=None)]
        k = int(np.argmin(values))
        if 0 < k < grid_points - 1:
            bracket = (grid[k - 1], grid[k], grid[k + 1])
        else:
            bracket = (grid[k - 1], grid[k]) if k > 0 else (grid[1], grid[0])
        refined = minimize_scalar(evaluate, bracket=bracket, method="golden", options={"xtol": 1e-4})
        c_best = float(refined.x)
        evaluate(c_best)
        series = series.with_coefficient(j, c_best)
        best = cache[c_best]
        objective[f"c{j}"] = far_field_energy(best.corrector)
        log.info(f"Sinclair c{j} = {c_best:.6g}，远场能量 {objective[f'c{j}']:.6e}")

    slope_sinclair = slope0 if n_terms == 0 else gradient_slope(best, window, shells_per_octave)

    slope_full, c2 = None, spec.C2
    if include_full:
        full_spec = make_spec(spec.K, 2, potential, spec.C2)
        if full_spec.C2 is None:
            full_spec = full_spec.with_c2(calibrate_c2(domain, full_spec, potential, settings))
        c2 = full_spec.C2
        slope_full = gradient_slope(solve_corrector(domain, full_spec, potential, settings), window, shells_per_octave)

    return SinclairReport(coefficients=list(series.coefficients), objective=objective, slope_order0=slope0,
                          slope_sinclair=slope_sinclair, slope_full=slope_full, c2=c2,
                          meta={"R": domain.radius, "K": spec.K, "N": n_terms})


# ---------------------------------------------------------------------------
# 稳定性

def stability_scan(domain: LatticeDomain, k_values: Sequence[float], potential: PairPotential,
                   settings: Optional[SolveSettings] = None, probes: int = 4, seed: int = 0) -> List[dict]:
    """不同K下0阶修正量的最小Rayleigh商（K_G ≈ 0.49 附近仅作参考）"""
    rows = []
    previous: Optional[ScalarField] = None
    for K in tqdm(sorted(k_values), desc="稳定性扫描", disable=None):
        result = solve_corrector(domain, make_spec(K, 0, potential), potential, settings, u_init=previous)
        previous = result.corrector
        lam = stability_check(result.assembly, result.corrector, probes=probes, seed=seed)
        rows.append({"K": float(K), "lambda_min": lam, "converged": result.report.converged})
        if lam <= 0:
            log.warning(f"K={K} 时失去稳定性: λ={lam:.4g}")
    return rows
