# services/plot_renderer.py
"""
純粹的繪圖引擎，負責把結果表格畫成靜態 SVG。
不處理模擬，只接收表格並交給 ResultStore 寫檔。
"""
import io
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

import config  # noqa: E402
from services.result_store import ResultStore  # noqa: E402

logger = logging.getLogger(__name__)


class PlotRenderer:
    def __init__(self, result_store: ResultStore):
        """
        初始化繪圖器。
        Args:
            result_store (ResultStore): 用於寫出 SVG 檔案。
        """
        self.store = result_store

    @staticmethod
    def _color(r: float) -> str:
        for key, color in config.R_COLOR_MAP.items():
            if np.isclose(key, r):
                return color
        return config.DEFAULT_LINE_COLOR

    def _save(self, fig, relative_path: str) -> str | None:
        try:
            buffer = io.BytesIO()
            # 不寫入日期，重跑時 SVG 內容不變
            fig.savefig(buffer, format=config.PLOT_FORMAT, metadata={"Date": None})
            return self.store.write_bytes(buffer.getvalue(), relative_path)
        except Exception as e:
            logger.error(f"輸出圖檔失敗 ({relative_path}): {e}", exc_info=True)
            return None
        finally:
            plt.close(fig)

    def _figure(self, title: str, xlabel: str, ylabel: str):
        fig, ax = plt.subplots(figsize=config.PLOT_FIGSIZE, dpi=config.PLOT_DPI)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return fig, ax

    def render_rates(self, table: pd.DataFrame, relative_path: str, column: str = "gamma_bit") -> str | None:
        """Γ 對 α²（每個 r、knob 一條線）；單一 α² 時改畫 Γ 對 knob。"""
        if table.empty:
            logger.warning(f"{relative_path}: 表格為空，略過繪圖")
            return None
        model = f"{column}_model"
        knob = str(table["kappa_ratio_name"].iloc[0])
        by_knob = table["alpha_sq"].nunique() == 1 and table["kappa_ratio_value"].nunique() > 1
        x, group_keys = ("kappa_ratio_value", ["r"]) if by_knob else ("alpha_sq", ["r", "kappa_ratio_value"])
        label = "Γ_bit" if column == "gamma_bit" else "Γ_phase"
        fig, ax = self._figure(f"{label} ({knob})", knob if by_knob else "|α|²", f"{label} / κ₂")

        for keys, group in table.groupby(group_keys):
            keys = keys if isinstance(keys, tuple) else (keys,)
            r = keys[0]
            group = group.sort_values(x)
            values = group[column].where(group[column] > 0)
            legend = f"r = {r:g}" if by_knob else f"r = {r:g}, {knob} = {keys[1]:g}"
            ax.plot(group[x], values, marker="o", color=self._color(r), label=legend)
            if model in group and group[model].notna().any():
                ax.plot(group[x], group[model].where(group[model] > 0), linestyle=config.MODEL_LINE_STYLE,
                        color=self._color(r))
        ax.set_yscale("log")
        if by_knob and (table["kappa_ratio_value"] > 0).any():
            ax.set_xscale("symlog", linthresh=float(table.loc[table["kappa_ratio_value"] > 0, "kappa_ratio_value"].min()))
        ax.legend(fontsize="small")
        return self._save(fig, relative_path)

    def render_zgate(self, table: pd.DataFrame, relative_path: str) -> str | None:
        """p_Z 對 T，模型值以虛線疊加。"""
        fig, ax = self._figure("Z(θ) phase-flip probability", "T κ₂", "p_Z")
        for (alpha_sq, r), group in table.groupby(["alpha_sq", "r"]):
            group = group.sort_values("t_gate")
            ax.plot(group["t_gate"], group["p_z"], marker="o", color=self._color(r), label=f"|α|² = {alpha_sq:g}, r = {r:g}")
            ax.plot(group["t_gate"], group["p_z_model"], linestyle=config.MODEL_LINE_STYLE, color=self._color(r))
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.legend(fontsize="small")
        return self._save(fig, relative_path)

    def render_bias(self, table: pd.DataFrame, relative_path: str) -> str | None:
        fig, ax = self._figure("bit-flip probability at T_opt", "|α|²", "p_X")
        for r, group in table.groupby("r"):
            group = group.sort_values("alpha_sq")
            ax.plot(group["alpha_sq"], group["p_x"].where(group["p_x"] > 0), marker="o",
                    color=self._color(r), label=f"r = {r:g}")
        ax.set_yscale("log")
        ax.legend(fontsize="small")
        return self._save(fig, relative_path)

    def render_prep(self, table: pd.DataFrame, relative_path: str) -> str | None:
        fig, ax = self._figure("fidelity to the squeezed cat", "t κ", "F")
        for name, group in table.groupby("initial"):
            ax.plot(group["time"], group["fidelity"], label=str(name))
        ax.set_ylim(0.0, 1.02)
        ax.legend(fontsize="small")
        return self._save(fig, relative_path)

    def render_two_mode(self, table: pd.DataFrame, relative_path: str) -> str | None:
        fig, ax = self._figure("two-mode vs effective model", "t κ₂", "trace distance")
        ax.plot(table["time"], table["trace_distance"], color=config.DEFAULT_LINE_COLOR)
        return self._save(fig, relative_path)

    def render_trajectory(self, table: pd.DataFrame, relative_path: str) -> str | None:
        fig, ax = self._figure("logical expectation values", "t κ₂", "⟨σ⟩")
        for (alpha_sq, r), group in table.groupby(["alpha_sq", "r"]):
            color = self._color(r)
            ax.plot(group["time"], group["sigma_z"], color=color, label=f"σ_Z, |α|² = {alpha_sq:g}, r = {r:g}")
            ax.plot(group["time"], group["sigma_x"], color=color, linestyle=config.MODEL_LINE_STYLE,
                    label=f"σ_X, |α|² = {alpha_sq:g}, r = {r:g}")
        ax.legend(fontsize="small")
        return self._save(fig, relative_path)

    def render_tables(self, tables: dict[str, pd.DataFrame], prefix: str = "") -> list[str]:
        """依表格名稱選擇對應圖表，回傳成功寫出的路徑。"""
        paths = []
        for name, table in tables.items():
            if table is None or table.empty:
                continue
            target = f"{prefix}{name}.{config.PLOT_FORMAT}"
            if name == "rates":
                if table["gamma_bit"].notna().any():
                    paths.append(self.render_rates(table, f"{prefix}rates_bit.{config.PLOT_FORMAT}", "gamma_bit"))
                if table["gamma_phase"].notna().any():
                    paths.append(self.render_rates(table, f"{prefix}rates_phase.{config.PLOT_FORMAT}", "gamma_phase"))
            elif name == "zgate":
                paths.append(self.render_zgate(table, target))
            elif name == "bias_scan":
                paths.append(self.render_bias(table, target))
            elif name == "prep":
                paths.append(self.render_prep(table, target))
            elif name == "two_mode":
                paths.append(self.render_two_mode(table, target))
            elif name == "trajectory":
                paths.append(self.render_trajectory(table, target))
        return [path for path in paths if path]
