"""CMOS 对比评测分析：矩阵读写、单样本 t 检验与一维 MDS"""
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from utils.exceptions import AnalysisError

logger = logging.getLogger(__name__)

# 评分量表 {-2, -1, 0, +1, +2}，正值表示 A 优于 B
CMOS_SCALE = (-2, -1, 0, 1, 2)
SIGNIFICANCE_LEVEL = 0.05
_SYMMETRY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class CmosMatrix:
    """systems 的两两 CMOS，scores[i, j] = CMOS(A_i vs A_j)，缺失为 NaN"""
    systems: Tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        systems = tuple(self.systems)
        scores = np.array(self.scores, dtype=np.float64)
        if len(set(systems)) != len(systems):
            raise AnalysisError("系统名称重复")
        if len(systems) < 2:
            raise AnalysisError("CMOS 矩阵至少需要两个系统")
        if scores.shape != (len(systems), len(systems)):
            raise AnalysisError(f"矩阵形状 {scores.shape} 与系统数 {len(systems)} 不符")
        np.fill_diagonal(scores, 0.0)
        object.__setattr__(self, 'systems', systems)
        object.__setattr__(self, 'scores', scores)

    def score(self, a: str, b: str) -> float:
        return float(self.scores[self.systems.index(a), self.systems.index(b)])

    def missing_pairs(self) -> List[Tuple[str, str]]:
        n = len(self.systems)
        return [
            (self.systems[i], self.systems[j])
            for i, j in combinations(range(n), 2)
            if np.isnan(self.scores[i, j])
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.scores, index=list(self.systems), columns=list(self.systems))


@dataclass(frozen=True)
class MdsResult:
    coordinates: Dict[str, float]
    ordering: Tuple[str, ...]
    reference: str


def complete_antisymmetric(systems: Sequence[str], raw: np.ndarray) -> np.ndarray:
    """用反对称关系补齐另一半三角；两半都给出时检查是否一致"""
    n = len(systems)
    scores = np.full((n, n), np.nan)
    for i, j in combinations(range(n), 2):
        upper, lower = raw[i, j], raw[j, i]
        if np.isnan(upper) and np.isnan(lower):
            continue
        if not np.isnan(upper) and not np.isnan(lower) and abs(upper + lower) > _SYMMETRY_TOL:
            raise AnalysisError(
                f"({systems[i]}, {systems[j]}) 与 ({systems[j]}, {systems[i]}) 不满足反对称: {upper} vs {lower}"
            )
        value = upper if not np.isnan(upper) else -lower
        scores[i, j], scores[j, i] = value, -value
    np.fill_diagonal(scores, 0.0)
    return scores


def load_cmos(path) -> CmosMatrix:
    """读取方阵 CSV（首行首列为系统名），可只给上三角"""
    try:
        df = pd.read_csv(path, index_col=0)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise AnalysisError(f"无法读取 CMOS 矩阵 {path}: {e}") from e

    df.index = [str(name).strip() for name in df.index]
    df.columns = [str(name).strip() for name in df.columns]
    systems = list(dict.fromkeys(list(df.index) + list(df.columns)))
    if len(systems) < 2:
        raise AnalysisError(f"{path}: 至少需要两个系统才能构成比较对")

    try:
        full = df.reindex(index=systems, columns=systems).apply(pd.to_numeric, errors='raise')
    except (TypeError, ValueError) as e:
        raise AnalysisError(f"{path}: 矩阵含非数值项: {e}") from e
    scores = complete_antisymmetric(systems, full.to_numpy(dtype=np.float64))
    logger.info(f"从 {path} 加载 {len(systems)} 个系统的 CMOS 矩阵")
    return CmosMatrix(tuple(systems), scores)


def save_cmos(matrix: CmosMatrix, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix.to_frame().to_csv(path, float_format="%.6g", lineterminator="\n")


def one_sample_ttest(ratings: Sequence[float], mu0: float = 0.0) -> Tuple[float, float]:
    """t = (均值 - mu0) / (s / √n)，s 为样本标准差；双侧 p 值（自由度 n-1）"""
    x = np.asarray(ratings, dtype=np.float64)
    if x.size < 2:
        raise AnalysisError("t 检验至少需要两个评分")
    if np.ptp(x) == 0:
        raise AnalysisError("评分方差为 0，无法进行 t 检验")
    n = x.size
    t = (x.mean() - mu0) / (x.std(ddof=1) / np.sqrt(n))
    p = 2.0 * stats.t.sf(abs(t), df=n - 1)
    return float(t), float(min(p, 1.0))


def load_cmos_trials(path) -> pd.DataFrame:
    """读取逐次评分：system_a, system_b, rating"""
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise AnalysisError(f"无法读取评分文件 {path}: {e}") from e
    missing = {"system_a", "system_b", "rating"} - set(df.columns)
    if missing:
        raise AnalysisError(f"{path}: 缺少列 {', '.join(sorted(missing))}")
    df = df[["system_a", "system_b", "rating"]].copy()
    df["system_a"] = df["system_a"].astype(str).str.strip()
    df["system_b"] = df["system_b"].astype(str).str.strip()
    return df


def cmos_from_trials(trials: pd.DataFrame) -> Tuple[CmosMatrix, pd.DataFrame]:
    """把逐次评分汇总为 CMOS 矩阵，并对每个比较对做 t 检验（mu0 = 0）"""
    bad = trials[~trials["rating"].isin(CMOS_SCALE)]
    if not bad.empty:
        raise AnalysisError(f"评分超出量表 {CMOS_SCALE}: {sorted(bad['rating'].unique().tolist())}")
    if (trials["system_a"] == trials["system_b"]).any():
        raise AnalysisError("同一系统不能与自身比较")

    systems = list(dict.fromkeys(list(trials["system_a"]) + list(trials["system_b"])))
    index = {name: i for i, name in enumerate(systems)}

    # 反向的比较对取相反数后并入 (i<j) 方向
    pairs: Dict[Tuple[int, int], List[float]] = {}
    for a, b, rating in trials[["system_a", "system_b", "rating"]].itertuples(index=False):
        i, j = index[a], index[b]
        key, sign = ((i, j), 1.0) if i < j else ((j, i), -1.0)
        pairs.setdefault(key, []).append(sign * float(rating))

    n = len(systems)
    raw = np.full((n, n), np.nan)
    rows = []
    for (i, j), ratings in sorted(pairs.items()):
        raw[i, j] = float(np.mean(ratings))
        try:
            t, p = one_sample_ttest(ratings, 0.0)
        except AnalysisError:
            t, p = float("nan"), float("nan")
        rows.append({
            "system_a": systems[i],
            "system_b": systems[j],
            "n": len(ratings),
            "cmos": raw[i, j],
            "t": t,
            "p": p,
            "significant": bool(p < SIGNIFICANCE_LEVEL) if not np.isnan(p) else False,
        })

    matrix = CmosMatrix(tuple(systems), complete_antisymmetric(systems, raw))
    return matrix, pd.DataFrame(rows, columns=["system_a", "system_b", "n", "cmos", "t", "p", "significant"])


def mds_1d(matrix: CmosMatrix, reference: str) -> MdsResult:
    """经典 MDS 一维投影，相异度 d(A,B) = |CMOS(A,B)|，方向使参考系统坐标最大"""
    if reference not in matrix.systems:
        raise AnalysisError(f"参考系统 '{reference}' 不在矩阵中: {', '.join(matrix.systems)}")
    missing = matrix.missing_pairs()
    if missing:
        a, b = missing[0]
        raise AnalysisError(f"缺少比较对 ({a}, {b})，MDS 需要完整矩阵")

    d = np.abs(matrix.scores)
    if not np.any(d > 0):
        raise AnalysisError("所有相异度均为 0，无法进行 MDS")

    n = len(matrix.systems)
    centering = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * centering @ (d ** 2) @ centering
    eigvals, eigvecs = np.linalg.eigh(b)
    top = int(np.argmax(eigvals))
    coords = eigvecs[:, top] * np.sqrt(max(eigvals[top], 0.0))

    ref_idx = matrix.systems.index(reference)
    if np.isclose(coords[ref_idx], coords.min()):
        coords = -coords
    elif not np.isclose(coords[ref_idx], coords.max()):
        # 参考系统位于中间，只能让其坐标为正
        if coords[ref_idx] < 0:
            coords = -coords
        logger.warning(f"参考系统 {reference} 不在一维投影的端点上")

    coordinates = {name: float(coords[i]) for i, name in enumerate(matrix.systems)}
    ordering = tuple(sorted(matrix.systems, key=lambda name: (coordinates[name], name)))
    return MdsResult(coordinates=coordinates, ordering=ordering, reference=reference)
