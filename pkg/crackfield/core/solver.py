"""
求解器模块
截断区域上的非线性能量极小化（预条件非线性共轭梯度）、带裂纹掩码的拉普拉斯线性求解、稳定性检查
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from scipy.optimize import line_search
from scipy.sparse.linalg import LinearOperator, cg, factorized, lobpcg

from crackfield.core.lattice import ClampPolicy, LatticeDomain, ScalarField, ZeroClamp
from crackfield.core.potential import EnergyAssembly
from crackfield.utils.logger import log


class SolverError(RuntimeError):
    """线性求解超出迭代上限或线搜索失败"""


@dataclass(frozen=True)
class SolveSettings:
    """
    求解参数

    Attributes:
        tol_linf: 梯度ℓ∞停止阈值
        max_iter: 非线性CG最大迭代次数
        wolfe_c1: 充分下降参数
        wolfe_c2: 曲率参数（CG常用0.1）
        restart_every: 每隔多少步重启为最速下降方向，None表示自由变量个数
        preconditioner: "laplacian" 用分解后的掩码拉普拉斯做预条件，"none" 不用
        linear_rtol: 线性求解的相对残差
        linear_max_iter: 线性求解最大迭代次数
    """

    tol_linf: float = 1e-8
    max_iter: int = 5000
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.1
    restart_every: Optional[int] = None
    preconditioner: Literal["laplacian", "none"] = "laplacian"
    linear_rtol: float = 1e-10
    linear_max_iter: int = 50000

    def __post_init__(self):
        if self.tol_linf <= 0:
            raise ValueError(f"tol_linf 必须为正: {self.tol_linf}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter 必须为正: {self.max_iter}")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("Wolfe参数需满足 0 < c1 < c2 < 1")


@dataclass
class SolveReport:
    """非线性求解报告"""

    iterations: int
    residual_linf: float
    energy: float
    converged: bool
    energy_history: List[float] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_linf": self.residual_linf,
            "energy": self.energy,
            "converged": self.converged,
            "message": self.message,
        }


def _laplacian_preconditioner(domain: LatticeDomain) -> Callable[[np.ndarray], np.ndarray]:
    solve = factorized(domain.laplacian.tocsc())
    return lambda g: solve(np.asarray(g, dtype=float))


def _secant_step(derivative: Callable[[float], float], slope0: float, c2: float,
                 max_steps: int = 60) -> Optional[float]:
    """
    只用方向导数的线搜索（近似Wolfe条件）

    能量值受舍入误差影响而无法判断下降时使用：先倍增找到导数变号的区间，
    再用割线/二分收缩到 |φ'(α)| <= c2|φ'(0)|。
    """
    lo, d_lo = 0.0, slope0
    hi = 1.0
    d_hi = derivative(hi)
    steps = 0
    while d_hi < 0 and steps < max_steps:
        if abs(d_hi) <= c2 * abs(slope0):
            return hi
        lo, d_lo = hi, d_hi
        hi *= 2.0
        d_hi = derivative(hi)
        steps += 1
    if d_hi < 0:
        return None
    for _ in range(max_steps):
        alpha = hi - d_hi * (hi - lo) / (d_hi - d_lo) if d_hi != d_lo else 0.5 * (lo + hi)
        if not lo < alpha < hi:
            alpha = 0.5 * (lo + hi)
        d_alpha = derivative(alpha)
        if abs(d_alpha) <= c2 * abs(slope0):
            return alpha
        if d_alpha < 0:
            lo, d_lo = alpha, d_alpha
        else:
            hi, d_hi = alpha, d_alpha
    return None


def minimize(assembly: EnergyAssembly, u_init: Optional[ScalarField] = None,
             settings: Optional[SolveSettings] = None) -> Tuple[ScalarField, SolveReport]:
    """
    求截断问题 ū ∈ argmin{E(u_pred, u) | u ∈ H⁰(Λ_R)} 的临界点

    Polak-Ribière+ 非线性共轭梯度，强Wolfe线搜索；能量因舍入无法比较时退回只用导数的割线搜索。
    每隔restart_every步或失去下降性时重启。

    Args:
        assembly: 能量装配
        u_init: 初值（区域外为零），默认零场
        settings: 求解参数

    Returns:
        (修正量ū, 求解报告)；超过max_iter时返回最后的迭代值且converged=False
    """
    settings = settings or SolveSettings()
    domain = assembly.domain
    x = np.zeros(domain.n_free) if u_init is None else assembly._free(u_init)
    restart_every = settings.restart_every or max(domain.n_free, 1)

    if domain.n_free == 0:
        return ScalarField.zeros(domain), SolveReport(0, 0.0, 0.0, True, [0.0], "无自由变量")
    if settings.preconditioner == "laplacian":
        precondition = _laplacian_preconditioner(domain)
    else:
        precondition = np.asarray

    f = assembly.energy_vector(x)
    g = assembly.gradient_vector(x)
    z = precondition(g)
    d = -z
    history = [f]
    residual = float(np.max(np.abs(g))) if g.size else 0.0
    log.info(f"开始极小化: 自由变量={domain.n_free}, 初始能量={f:.6e}, 初始残差={residual:.3e}")

    iteration = 0
    message = "达到最大迭代次数"
    converged = residual <= settings.tol_linf
    while not converged and iteration < settings.max_iter:
        slope = float(g @ d)
        if slope >= 0:
            d = -z
            slope = float(g @ d)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            alpha, _, _, f_new, _, _ = line_search(
                assembly.energy_vector, assembly.gradient_vector, x, d,
                gfk=g, old_fval=f, c1=settings.wolfe_c1, c2=settings.wolfe_c2,
            )

        if alpha is None:
            alpha = _secant_step(lambda a: float(assembly.gradient_vector(x + a * d) @ d), slope, settings.wolfe_c2)
            if alpha is None:
                if not np.array_equal(d, -z):
                    log.debug(f"第{iteration}步线搜索失败，重启为预条件最速下降方向")
                    d = -z
                    continue
                log.error(f"线搜索失败: 迭代={iteration}, 残差={residual:.3e}")
                raise SolverError(f"线搜索失败（迭代 {iteration}，残差 {residual:.3e}）")
            f_new = assembly.energy_vector(x + alpha * d)

        x = x + alpha * d
        g_new = assembly.gradient_vector(x)
        z_new = precondition(g_new)
        iteration += 1

        beta = max(0.0, float(g_new @ (z_new - z)) / float(g @ z))
        if iteration % restart_every == 0:
            beta = 0.0
        d = -z_new + beta * d
        f, g, z = float(f_new), g_new, z_new
        history.append(f)

        residual = float(np.max(np.abs(g)))
        log.debug(f"NCG 第{iteration}步: α={alpha:.3e}, 能量={f:.12e}, 残差={residual:.3e}")
        converged = residual <= settings.tol_linf

    if converged:
        message = "收敛"
        log.info(f"极小化收敛: 迭代={iteration}, 残差={residual:.3e}, 能量={f:.10e}")
    else:
        log.warning(f"极小化未收敛: 迭代={iteration}, 残差={residual:.3e}")

    report = SolveReport(iterations=iteration, residual_linf=residual, energy=f,
                         converged=converged, energy_history=history, message=message)
    return ScalarField.from_free(domain, x), report


def solve_linear_masked(domain: LatticeDomain, rhs: ScalarField, boundary: Optional[ClampPolicy] = None,
                        settings: Optional[SolveSettings] = None) -> ScalarField:
    """
    求解 -Div Du = rhs（区域内），区域外 u = 边界值

    对角预条件共轭梯度。

    Args:
        domain: 截断区域
        rhs: 右端项（只用区域内的值）
        boundary: 区域外的Dirichlet数据，默认零
        settings: 求解参数（linear_rtol, linear_max_iter）

    Returns:
        解场，区域外为边界值
    """
    settings = settings or SolveSettings()
    if not domain.same_geometry(rhs.domain):
        raise ValueError("右端项与区域不匹配")
    boundary = boundary or ZeroClamp()

    exterior = boundary.exterior_values(domain)
    exterior.ravel()[domain.free_index] = 0.0
    b = rhs.free_values() - 2.0 * (domain.free_incidence.T @ domain.bond_differences(exterior))

    matrix = domain.laplacian
    inv_diag = 1.0 / matrix.diagonal()
    jacobi = LinearOperator(matrix.shape, matvec=lambda v: inv_diag * v, dtype=float)

    if not np.any(b):
        solution = np.zeros(domain.n_free)
    else:
        solution, info = cg(matrix, b, rtol=settings.linear_rtol, atol=0.0,
                            maxiter=settings.linear_max_iter, M=jacobi)
        if info != 0:
            log.error(f"线性求解未收敛: info={info}")
            raise SolverError(f"共轭梯度超过迭代上限 {settings.linear_max_iter}")
    residual = float(np.linalg.norm(matrix @ solution - b) / max(np.linalg.norm(b), 1e-300))
    log.debug(f"线性求解完成: 相对残差={residual:.3e}")
    return ScalarField.from_free(domain, solution, boundary)


def stability_check(assembly: EnergyAssembly, u: ScalarField, probes: int = 4,
                    seed: int = 0, tol: float = 1e-6, max_iter: int = 500) -> float:
    """
    最小Rayleigh商 δ²E(u)[v,v] / ‖Dv‖²

    以掩码拉普拉斯为质量矩阵解广义特征值问题（LOBPCG，拉普拉斯分解作预条件）。

    Args:
        assembly: 能量装配
        u: 收敛的修正量
        probes: 初始探测向量个数（块大小）
        seed: 探测向量随机种子
        tol: 特征值容差
        max_iter: LOBPCG最大迭代次数

    Returns:
        估计的最小特征值λ；λ > 0 表示强稳定
    """
    domain = assembly.domain
    x = assembly._free(u)
    n = domain.n_free
    hessian = LinearOperator((n, n), matvec=lambda v: assembly.hessian_vector(x, np.ravel(v)), dtype=float)
    solve = factorized(domain.laplacian.tocsc())
    preconditioner = LinearOperator((n, n), matvec=lambda v: solve(np.ravel(v)), dtype=float)

    rng = np.random.default_rng(seed)
    block = rng.standard_normal((n, max(1, probes)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        values, _ = lobpcg(hessian, block, B=domain.laplacian, M=preconditioner,
                           largest=False, tol=tol, maxiter=max_iter)
    smallest = float(np.min(values))
    log.info(f"稳定性检查: 最小Rayleigh商 λ={smallest:.6f}")
    return smallest
