"""
报告读写模块
衰减报告的JSON/CSV格式、收敛性与实验汇总的JSON、场快照CSV
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np

from crackfield.core.analysis import DecayReport, Shell
from crackfield.core.lattice import ScalarField
from crackfield.utils.logger import log

SHELL_COLUMNS = ["label", "r_mid", "max", "mean", "count", "slope", "r_min", "r_max"]


def _to_builtin(value: Any) -> Any:
    """numpy标量转成json可写的内置类型"""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_json(data: Any, path: Union[str, Path]) -> Path:
    """写JSON文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_to_builtin(data), f, ensure_ascii=False, indent=2)
    log.info(f"已写出: {path}")
    return path


def write_decay_reports(reports: Dict[str, DecayReport], directory: Union[str, Path], fmt: str = "json") -> List[Path]:
    """
    写出一组衰减报告

    Args:
        reports: 名称 -> 报告
        directory: 输出目录
        fmt: "json" 每个报告一个文件；"csv" 每个报告一个文件，每个壳层一行

    Returns:
        写出的文件路径
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, report in reports.items():
        if fmt == "json":
            paths.append(write_json(report.to_dict(), directory / f"{name}.json"))
        elif fmt == "csv":
            paths.append(write_decay_csv(report, directory / f"{name}.csv"))
        else:
            raise ValueError(f"不支持的报告格式: {fmt}")
    return paths


def write_decay_csv(report: DecayReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SHELL_COLUMNS)
        writer.writeheader()
        for shell in report.shells:
            writer.writerow({"label": report.label, **shell.to_dict(), "slope": report.slope,
                             "r_min": report.window[0], "r_max": report.window[1]})
    log.info(f"已写出: {path}")
    return path


def read_report(path: Union[str, Path]) -> DecayReport:
    """读回JSON或CSV格式的衰减报告"""
    path = Path(path)
    if path.suffix == ".json":
        with open(path, "r", encoding="utf-8") as f:
            return DecayReport.from_dict(json.load(f))
    if path.suffix == ".csv":
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
        if not rows:
            raise ValueError(f"空报告: {path}")
        slope = rows[0]["slope"]
        return DecayReport(
            label=rows[0]["label"],
            shells=[Shell.from_dict(row) for row in rows],
            slope=float(slope) if slope not in ("", "None") else None,
            window=(float(rows[0]["r_min"]), float(rows[0]["r_max"])),
        )
    raise ValueError(f"无法识别的报告文件: {path}")


def write_rows_csv(rows: Iterable[dict], path: Union[str, Path]) -> Path:
    """把字典列表写成CSV（稳定性扫描、Sinclair对比表）"""
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()) if rows else [])
        writer.writeheader()
        writer.writerows(_to_builtin(rows))
    log.info(f"已写出: {path}")
    return path


def write_field_csv(field: ScalarField, path: Union[str, Path], interior_only: bool = True) -> Path:
    """场快照：每行 a, b, value"""
    domain = field.domain
    mask = domain.interior if interior_only else np.ones(domain.shape, dtype=bool)
    i, j = np.nonzero(mask)
    offset = 1 - domain.half_width
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["a", "b", "value"])
        for p, q in zip(i, j):
            writer.writerow([int(p + offset), int(q + offset), repr(float(field.values[p, q]))])
    log.info(f"已写出场快照: {path}（{i.size}个格点）")
    return path
