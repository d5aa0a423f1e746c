"""
命令行界面
solve / greens / converge / sinclair / stability 五个批处理命令
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from crackfield import __version__
from crackfield.core import (
    CalibrationError,
    LatticeDomain,
    SolveSettings,
    SolverError,
    Site,
    calibrate_c2,
    convergence_study,
    decay_reports,
    g_hat1_m,
    gbar1_diagnostic,
    gbar1_mu,
    gbar1_scaling,
    get_potential,
    grad_field,
    greens_symmetry_report,
    make_spec,
    shell_decay,
    sinclair_experiment,
    site_count_report,
    site_near,
    solve_corrector,
    solve_crack_green,
    stability_scan,
)
from crackfield.utils import ensure_directories, load_config, log, setup_logger
from crackfield.utils.config import RunConfig
from crackfield.utils.report import write_decay_reports, write_field_csv, write_json, write_rows_csv

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def _parse_c2(value: str):
    if value.lower() == "auto":
        return "auto"
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"C2必须是数值或auto: {value}") from None


def _parse_switch(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"无法识别的开关值: {value}")


class CrackFieldApp:
    """命令行应用主类"""

    def __init__(self):
        self.config = load_config()
        self.parser = self._build_parser()
        self.converged = True

    def _build_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", help="YAML配置文件")
        common.add_argument("--radius", type=float, help="区域半径R（默认256）")
        common.add_argument("--k", type=float, help="应力强度因子K（默认0.4）")
        common.add_argument("--order", type=int, choices=[0, 1, 2], help="预测子阶数")
        common.add_argument("--c2", type=_parse_c2, help="û2的常数，或auto")
        common.add_argument("--potential", choices=["gaussian", "quadratic"], help="对势")
        common.add_argument("--tol", type=float, help="梯度ℓ∞收敛阈值（默认1e-8）")
        common.add_argument("--max-iter", dest="max_iter", type=int, help="非线性CG最大迭代次数")
        common.add_argument("--window", type=float, nargs=2, metavar=("R_MIN", "R_MAX"), help="斜率拟合窗口")
        common.add_argument("--shells-per-octave", dest="shells_per_octave", type=int, help="每个倍频程的壳层数")
        common.add_argument("--output", help="输出目录（默认 $CRACKFIELD_OUTPUT_DIR/<命令>）")
        common.add_argument("--format", choices=["json", "csv"], help="衰减报告格式")
        common.add_argument("--threads", type=int, help="并行求解的线程数上限")
        common.add_argument("--seed", type=int, help="探测向量的随机种子")
        common.add_argument("--log-level", dest="log_level", help="日志级别")

        parser = argparse.ArgumentParser(prog="crackfield", description="反平面裂纹晶格实验室")
        parser.add_argument("--version", action="version", version=f"crackfield {__version__}")
        commands = parser.add_subparsers(dest="command", required=True)

        commands.add_parser("solve", parents=[common], help="求解截断问题并输出衰减报告")

        greens = commands.add_parser("greens", parents=[common], help="带裂纹格林函数与余项诊断")
        greens.add_argument("--source", type=int, nargs=2, metavar=("A", "B"), help="源点格点(a, b)")
        greens.add_argument("--mu", type=_parse_switch, help="on: 减去Ĝ1,μ；off: 只看Ḡ0")
        greens.add_argument("--source-radii", dest="source_radii", type=float, nargs="+", help="标度实验的|s|")

        converge = commands.add_parser("converge", parents=[common], help="R收敛性研究")
        converge.add_argument("--radii", type=float, nargs="+", help="递增的半径，最后一个为参考")
        converge.add_argument("--orders", type=int, nargs="+", choices=[0, 1, 2], help="预测子阶数")
        converge.add_argument("--fast", action="store_true", default=None, help="半径16,32,64，参考128")

        sinclair = commands.add_parser("sinclair", parents=[common], help="Sinclair级数不完备性实验")
        sinclair.add_argument("--terms", dest="sinclair_terms", type=int, help="级数截断N")

        stability = commands.add_parser("stability", parents=[common], help="不同K下的稳定性扫描")
        stability.add_argument("--k-values", dest="k_values", type=float, nargs="+", help="K的取值")
        stability.add_argument("--probes", type=int, help="探测向量个数")
        return parser

    # ------------------------------------------------------------------
    # 公共部件

    def _settings(self, run: RunConfig) -> SolveSettings:
        return SolveSettings(tol_linf=run.tol, max_iter=run.max_iter)

    def _output_dir(self, run: RunConfig) -> Path:
        return ensure_directories(run.output or str(Path(self.config.output_dir) / run.command))

    def _meta(self, run: RunConfig, **extra) -> dict:
        return {"R": run.radius, "K": run.k, "order": run.order, "tol": run.tol,
                "potential": run.potential, "version": __version__, **extra}

    def _track(self, converged: bool, what: str):
        if not converged:
            self.converged = False
            log.warning(f"{what} 未收敛")

    def _resolve_c2(self, run: RunConfig, domain: LatticeDomain, potential) -> Optional[float]:
        if run.c2 == "auto":
            spec = make_spec(run.k, 2, potential)
            return calibrate_c2(domain, spec, potential, self._settings(run))
        return run.c2

    # ------------------------------------------------------------------
    # 命令

    def cmd_solve(self, run: RunConfig) -> Dict[str, object]:
        """求解截断问题，写出修正量快照、求解报告和三类衰减报告"""
        potential = get_potential(run.potential)
        domain = LatticeDomain(run.radius)
        site_count_report(run.radius)
        c2 = self._resolve_c2(run, domain, potential) if run.order == 2 else None
        spec = make_spec(run.k, run.order, potential, c2)

        result = solve_corrector(domain, spec, potential, self._settings(run))
        self._track(result.report.converged, "修正量求解")

        out = self._output_dir(run)
        reports = decay_reports(result, potential, run.fit_window, run.shells_per_octave)
        for report in reports.values():
            report.meta.update(self._meta(run, c2=c2))
        write_decay_reports(reports, out, run.format)
        write_field_csv(result.corrector, out / "corrector.csv")
        summary = {"meta": self._meta(run, c2=c2), "solve": result.report.to_dict(),
                   "slopes": {name: report.slope for name, report in reports.items()}}
        write_json(summary, out / "summary.json")
        return summary

    def cmd_greens(self, run: RunConfig) -> Dict[str, object]:
        """单列格林函数、余项分解、对称性检查与Ḡ1诊断"""
        domain = LatticeDomain(run.radius)
        settings = self._settings(run)
        source = Site(*run.source) if run.source else site_near(0.0, run.radius / 4)
        out = self._output_dir(run)

        column = solve_crack_green(source, domain, settings)
        residual = column.residual_linf()
        write_field_csv(column.values, out / "green_column.csv")
        write_field_csv(column.remainder, out / "gbar0.csv")

        probes = [source, site_near(run.radius / 8, run.radius / 8), site_near(-run.radius / 6, 2.5)]
        symmetry = greens_symmetry_report(domain, probes, settings, run.threads)

        g1m = g_hat1_m(domain, settings)
        if run.mu:
            write_field_csv(gbar1_mu(column, g1m), out / "gbar1_mu.csv")
        window = run.fit_window
        g1m_reports = {
            "g_hat1_m_value": shell_decay(g1m, window, "g_hat1_m_value", run.shells_per_octave),
            "g_hat1_m_gradient": shell_decay(grad_field(g1m), window, "g_hat1_m_gradient", run.shells_per_octave),
        }

        diagnostics = {}
        if source.radius / 16 >= 2 and source.shift((0, 1)).radius <= run.radius / 2:
            diagnostics["gbar_mixed"] = gbar1_diagnostic(source, domain, use_mu=run.mu, settings=settings,
                                                         g1m=g1m, threads=run.threads)
        else:
            log.warning(f"源点 {source} 不满足Ḡ1诊断的条件，跳过")
        for report in list(g1m_reports.values()) + list(diagnostics.values()):
            report.meta.update(self._meta(run, source=list(run.source or (source.a, source.b))))
        write_decay_reports({**g1m_reports, **diagnostics}, out, run.format)

        scaling = None
        if max(run.source_radii) + 1 <= run.radius / 2:
            scaling = gbar1_scaling(domain, run.source_radii, use_mu=run.mu, settings=settings, threads=run.threads)
            scaling = {key: value for key, value in scaling.items() if key != "reports"}
        else:
            log.warning(f"|s| = {max(run.source_radii)} 超过 R/2，跳过标度实验")

        summary = {"meta": self._meta(run, source=[source.a, source.b], mu=run.mu),
                   "residual_linf": residual, "symmetry": symmetry,
                   "slopes": {name: report.slope for name, report in g1m_reports.items()},
                   "gbar_statistic": {k: r.meta["statistic"] for k, r in diagnostics.items()},
                   "scaling": scaling}
        write_json(summary, out / "summary.json")
        return summary

    def cmd_converge(self, run: RunConfig) -> Dict[str, object]:
        """各预测子阶数的R收敛性"""
        potential = get_potential(run.potential)
        settings = self._settings(run)
        radii = run.convergence_radii
        c2 = run.c2 if isinstance(run.c2, float) else None
        reports = {}
        for order in run.orders:
            spec = make_spec(run.k, order, potential, c2)
            report = convergence_study(radii, order, spec, potential, settings, threads=run.threads)
            self._track(report.meta["converged"], f"order={order} 的收敛性研究")
            report.meta.update(self._meta(run, order=order))
            reports[f"order{order}"] = report.to_dict()
        summary = {"meta": self._meta(run, radii=radii), "studies": reports,
                   "fitted_orders": {k: v["fitted_order"] for k, v in reports.items()}}
        write_json(summary, self._output_dir(run) / "convergence.json")
        return summary

    def cmd_sinclair(self, run: RunConfig) -> Dict[str, object]:
        """Sinclair级数与完整展开的对比表"""
        potential = get_potential(run.potential)
        domain = LatticeDomain(run.radius)
        c2 = run.c2 if isinstance(run.c2, float) else None
        spec = make_spec(run.k, 0, potential, c2)
        report = sinclair_experiment(domain, run.sinclair_terms, spec, potential, self._settings(run),
                                     window=run.fit_window, shells_per_octave=run.shells_per_octave)
        out = self._output_dir(run)
        data = report.to_dict()
        data["meta"].update(self._meta(run))
        write_json(data, out / "sinclair.json")
        write_rows_csv(report.table(), out / "sinclair_table.csv")
        return data

    def cmd_stability(self, run: RunConfig) -> Dict[str, object]:
        """δ²E 的最小Rayleigh商随K的变化"""
        potential = get_potential(run.potential)
        domain = LatticeDomain(run.radius)
        rows = stability_scan(domain, run.k_values, potential, self._settings(run), run.probes, run.seed)
        for row in rows:
            self._track(row["converged"], f"K={row['K']} 的求解")
        out = self._output_dir(run)
        write_rows_csv(rows, out / "stability.csv")
        summary = {"meta": self._meta(run, seed=run.seed), "rows": rows}
        write_json(summary, out / "stability.json")
        return summary

    # ------------------------------------------------------------------

    def run(self, argv: Optional[List[str]] = None) -> int:
        """
        解析参数并执行命令

        Args:
            argv: 命令行参数，默认sys.argv[1:]

        Returns:
            退出码：0全部收敛，1数值失败或未收敛，2配置错误
        """
        args = vars(self.parser.parse_args(argv))
        config_file = args.pop("config", None)
        log_level = args.pop("log_level", None)
        if log_level:
            setup_logger(level=log_level, log_path=self.config.log_path)
        if args.get("threads") is None:
            args["threads"] = self.config.threads

        try:
            run = RunConfig.from_sources(config_file, **args)
        except (ValidationError, ValueError, OSError) as e:
            print(f"配置错误: {e}", file=sys.stderr)
            return EXIT_CONFIG

        log.info(f"执行命令 {run.command}: R={run.radius}, K={run.k}, order={run.order}")
        handler = getattr(self, f"cmd_{run.command}")
        self.converged = True
        try:
            handler(run)
        except (SolverError, CalibrationError, ArithmeticError) as e:
            log.error(f"数值求解失败: {e}")
            print(f"数值求解失败: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        except ValueError as e:
            log.error(f"参数错误: {e}")
            print(f"参数错误: {e}", file=sys.stderr)
            return EXIT_CONFIG

        if not self.converged:
            return EXIT_NUMERICAL
        log.info(f"命令 {run.command} 完成")
        return EXIT_OK


def create_app() -> CrackFieldApp:
    """创建命令行应用"""
    return CrackFieldApp()


def main(argv: Optional[List[str]] = None) -> int:
    return create_app().run(argv)
