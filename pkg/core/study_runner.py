# core/study_runner.py
"""
依情境執行已驗證的 StudyConfig，產生結果表格與摘要文件，
以及內建圖表網格的通過 / 失敗檢查。
此模組不寫檔；輸出交給 services.result_store。
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

import config
from core.circuit import (
    CircuitParams,
    displaced_frame_amplitudes,
    pump_plan,
    skpo_check,
    two_mode_validation,
)
from core.errors import InvalidParameterError
from core.fock import FockSpace, fock_state, ket_to_dm, required_dim, thermal_state
from core.lindblad import EvolutionConfig, NoiseParams, build_master_equation, evolve
from core.observables import logical_z, parity_jx
from core.rates import RateGrid, gamma_vs_r, kerr_crossover, knob_rate_ratio, study, working_space
from core.state_prep import DarkOpParams, unconditional_convergence
from core.states import CodeParams, logical_basis, squeezed_cat
from core.study_config import StudyConfig, load_figure
from core.zgate import bias_preservation_scan, pz_model, scan_gate_times, t_opt, t_opt_numeric

logger = logging.getLogger(__name__)

ENGINE_FIELDS = ("sample_count", "rel_tol", "abs_tol", "method", "check_positivity")


@dataclass(eq=False)
class StudyOutcome:
    study: StudyConfig
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    documents: dict[str, dict] = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.errors


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: object = None
    expected: object = None

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value, "expected": self.expected}


def _engine(study: StudyConfig, **defaults) -> dict:
    engine = {key: value for key, value in study.engine.items() if key in ENGINE_FIELDS}
    for key, value in defaults.items():
        engine.setdefault(key, value)
    return engine


def _error(point, e: Exception) -> dict:
    return {"point": point, "error": str(e), "category": getattr(e, "category", "runtime-failure")}


# --- Scenario runners ---
def run_rates(study_cfg: StudyConfig) -> StudyOutcome:
    grid = RateGrid(alpha_sq=study_cfg.grid["alpha_sq"], r=study_cfg.grid["r"], knob=study_cfg.grid["knob"])
    measure = tuple(study_cfg.params.get("measure", ["bit", "phase"]))
    table = study(study_cfg.scenario, grid, _engine(study_cfg, method=config.DEFAULT_RATE_METHOD),
                  threads=study_cfg.resolved_threads(), measure=measure, dim=study_cfg.engine.get("dim"),
                  raise_on_error=False, noise_overrides=study_cfg.noise)
    outcome = StudyOutcome(study_cfg, tables={"rates": table}, errors=list(table.attrs.get("errors", [])))
    if "bit" in measure:
        outcome.tables["gamma_vs_r"] = gamma_vs_r(table)
    return outcome


def run_zgate(study_cfg: StudyConfig) -> StudyOutcome:
    params = study_cfg.params
    kappa_minus = params.get("kappa_minus", 0.0)
    theta = params.get("theta", config.ZGATE_DEFAULT_THETA)
    noise = NoiseParams(kappa1=kappa_minus, **{k: v for k, v in study_cfg.noise.items() if k != "kappa1"})
    engine = _engine(study_cfg)
    outcome = StudyOutcome(study_cfg)

    tables, summary = [], []
    if "t_gate" in study_cfg.grid:
        points = sorted((a, r) for a in study_cfg.grid["alpha_sq"] for r in study_cfg.grid["r"])
        for i, (alpha_sq, r) in enumerate(points):
            logger.info(f"[{i + 1}/{len(points)}] Z 閘掃描 α² = {alpha_sq}, r = {r}")
            code = CodeParams.from_alpha_sq(alpha_sq, r)
            try:
                table = scan_gate_times(code, noise, study_cfg.grid["t_gate"], theta, engine,
                                        study_cfg.resolved_threads(), study_cfg.engine.get("dim"))
            except Exception as e:
                logger.error(f"Z 閘掃描失敗 (α² = {alpha_sq}, r = {r}): {e}", exc_info=True)
                outcome.errors.append(_error([alpha_sq, r], e))
                continue
            tables.append(table)
            entry = {"alpha_sq": alpha_sq, "r": r, "min_p_z": float(table["p_z"].min()),
                     "t_at_min_p_z": float(table.loc[table["p_z"].idxmin(), "t_gate"])}
            if kappa_minus > 0:
                t_model = t_opt(code, kappa_minus, noise.kappa2)
                entry.update({"t_opt_model": t_model,
                              "t_opt_numeric": t_opt_numeric(code, kappa_minus, noise.kappa2),
                              "min_p_z_model": pz_model(code, kappa_minus, noise.kappa2, t_model)})
            summary.append(entry)
        if tables:
            outcome.tables["zgate"] = pd.concat(tables, ignore_index=True)
        outcome.documents["zgate_summary"] = {"points": summary}

    if params.get("bias_scan"):
        try:
            bias, slopes = bias_preservation_scan(params.get("bias_alpha_sq", study_cfg.grid["alpha_sq"]),
                                                  params.get("bias_r", study_cfg.grid["r"]),
                                                  kappa_minus, engine, study_cfg.resolved_threads())
            outcome.tables["bias_scan"] = bias
            outcome.tables["bias_slopes"] = slopes
        except Exception as e:
            logger.error(f"偏置掃描失敗: {e}", exc_info=True)
            outcome.errors.append(_error("bias_scan", e))
    return outcome


def _prep_initial(space: FockSpace, name: str, n_th: float):
    if name == "vacuum":
        return ket_to_dm(fock_state(space, 0))
    if name == "fock1":
        return ket_to_dm(fock_state(space, 1))
    return thermal_state(space, n_th)


def run_prep(study_cfg: StudyConfig) -> StudyOutcome:
    settings = {**config.PREP_DEFAULTS, **study_cfg.params}
    p = DarkOpParams(settings["mu0"], settings["mu1"], settings["nu"], settings["r"], settings["phi"])
    mean_photons = abs(p.nu / p.mu1) * math.exp(2.0 * p.r) + math.sinh(p.r) ** 2
    space = FockSpace(study_cfg.engine.get("dim") or required_dim(mean_photons, p.r))
    cfg = EvolutionConfig(t_final=settings["t_final"], **_engine(study_cfg, method="auto"))
    outcome = StudyOutcome(study_cfg)

    rows, summary = [], {}
    initials = study_cfg.grid.get("initial", list(config.PREP_INITIAL_STATES))
    for i, name in enumerate(initials):
        logger.info(f"[{i + 1}/{len(initials)}] 無條件收斂: 初始態 {name}")
        try:
            result = unconditional_convergence(space, p, _prep_initial(space, name, settings["n_th"]), cfg)
        except Exception as e:
            logger.error(f"初始態 {name} 演化失敗: {e}", exc_info=True)
            outcome.errors.append(_error(name, e))
            continue
        rows.extend({"initial": name, "time": t, "fidelity": f} for t, f in zip(result.times, result.fidelity))
        summary[name] = {"final_fidelity": result.final_fidelity, "final_purity": result.final_purity,
                         "target_sign": result.target_sign, "candidates": result.candidate_fidelities}
    outcome.tables["prep"] = pd.DataFrame(rows, columns=["initial", "time", "fidelity"])
    outcome.documents["prep_summary"] = {"dim": space.dim, "initials": summary}
    return outcome


def run_circuit(study_cfg: StudyConfig) -> StudyOutcome:
    params = study_cfg.params
    cp = CircuitParams(**params["circuit"])
    code = CodeParams(alpha=params["alpha"], r=params.get("r", 0.0))
    outcome = StudyOutcome(study_cfg)

    plan = pump_plan(cp, code)
    frames = {}
    for index, (omega_k, eps_k) in enumerate(
            [(plan.omega_1, plan.eps_1), (plan.omega_2, plan.eps_2), (plan.omega_3, plan.eps_3)], start=1):
        frame = displaced_frame_amplitudes(cp, index, omega_k, eps_k)
        frames[f"pump_{index}"] = {"magnitudes": frame.magnitudes, "resonant": frame.resonant}
    document = {"pump_plan": plan.as_dict(), "displaced_frame": frames}

    cfg = EvolutionConfig(t_final=study_cfg.engine.get("t_final", 5.0), **_engine(study_cfg))
    waste_dim = params.get("waste_dim", config.WASTE_DIM)
    try:
        report = two_mode_validation(cp, code, cfg, waste_dim=waste_dim, storage_dim=study_cfg.engine.get("dim"))
        outcome.tables["two_mode"] = pd.DataFrame({"time": report.times, "trace_distance": report.trace_distance})
        document["two_mode"] = {"final_trace_distance": report.final_trace_distance,
                                "max_trace_distance": report.max_trace_distance,
                                "waste_top_population": report.waste_top_population,
                                "storage_dim": report.storage_dim, "waste_dim": report.waste_dim}
    except Exception as e:
        logger.error(f"雙模驗證失敗: {e}", exc_info=True)
        outcome.errors.append(_error("two_mode", e))

    sweep = []
    for ratio in study_cfg.grid.get("kappa_w_ratio", []):
        swept = CircuitParams(**{**params["circuit"], "kappa_w": ratio * cp.g3})
        try:
            report = two_mode_validation(swept, code, cfg, waste_dim=waste_dim)
            sweep.append({"kappa_w_ratio": ratio, "max_trace_distance": report.max_trace_distance,
                          "final_trace_distance": report.final_trace_distance})
        except Exception as e:
            logger.error(f"κ_w/g₃ = {ratio} 驗證失敗: {e}", exc_info=True)
            outcome.errors.append(_error(["kappa_w_ratio", ratio], e))
    if sweep:
        document["kappa_w_sweep"] = sweep

    if "skpo_kerr" in params and "skpo_eps2" in params:
        alpha_sq = params["skpo_eps2"] / params["skpo_kerr"]
        n_bar = alpha_sq * math.exp(2.0 * code.r) + math.sinh(code.r) ** 2
        skpo = skpo_check(FockSpace(required_dim(n_bar, code.r)), code, params["skpo_kerr"], params["skpo_eps2"])
        document["skpo"] = {"energy": skpo.energy, "residual_plus": skpo.residuals[1],
                            "residual_minus": skpo.residuals[-1], "gap": skpo.gap,
                            "factored_mismatch": skpo.factored_mismatch}
    outcome.documents["circuit"] = document
    return outcome


def _custom_initial(space: FockSpace, code: CodeParams, name: str):
    if name == "vacuum":
        return ket_to_dm(fock_state(space, 0))
    if name in ("plus", "minus"):
        return ket_to_dm(squeezed_cat(space, code, +1 if name == "plus" else -1).ket)
    zero, one = logical_basis(space, code)
    return ket_to_dm(zero if name == "zero" else one)


def run_custom(study_cfg: StudyConfig) -> StudyOutcome:
    """單一初始邏輯態在自訂雜訊下的演化軌跡。"""
    initial = study_cfg.params.get("initial", "zero")
    noise = NoiseParams(**study_cfg.noise)
    cfg = EvolutionConfig(t_final=study_cfg.engine.get("t_final", 10.0), **_engine(study_cfg))
    outcome = StudyOutcome(study_cfg)
    frames = []
    for alpha_sq in study_cfg.grid["alpha_sq"]:
        for r in study_cfg.grid["r"]:
            code = CodeParams.from_alpha_sq(alpha_sq, r)
            try:
                space = working_space(code, study_cfg.engine.get("dim"))
                me = build_master_equation(space, code, noise)
                traj = evolve(me, _custom_initial(space, code, initial), cfg,
                              {"sigma_z": logical_z(space, code), "sigma_x": parity_jx(space)})
            except Exception as e:
                logger.error(f"自訂情境失敗 (α² = {alpha_sq}, r = {r}): {e}", exc_info=True)
                outcome.errors.append(_error([alpha_sq, r], e))
                continue
            frames.append(pd.DataFrame({"alpha_sq": alpha_sq, "r": r, "time": traj.times,
                                        "sigma_z": traj.observables["sigma_z"],
                                        "sigma_x": traj.observables["sigma_x"]}))
    outcome.tables["trajectory"] = (pd.concat(frames, ignore_index=True) if frames else
                                    pd.DataFrame(columns=["alpha_sq", "r", "time", "sigma_z", "sigma_x"]))
    return outcome


RUNNERS = {
    **{scenario: run_rates for scenario in config.RATE_SCENARIOS},
    "zgate": run_zgate,
    "prep": run_prep,
    "circuit": run_circuit,
    "custom": run_custom,
}


def run_study(study_cfg: StudyConfig) -> StudyOutcome:
    logger.info(f"--- 開始執行情境 {study_cfg.scenario} ({study_cfg.label or 'unnamed'}) ---")
    outcome = RUNNERS[study_cfg.scenario](study_cfg)
    status = "完成" if outcome.complete else f"部分完成，{len(outcome.errors)} 個錯誤"
    logger.info(f"--- 情境 {study_cfg.scenario} {status} ---")
    return outcome


# --- Figure checks ---
def _rows(table: pd.DataFrame, **conditions) -> pd.DataFrame:
    mask = np.ones(len(table), dtype=bool)
    for column, value in conditions.items():
        mask &= np.isclose(table[column].to_numpy(dtype=float), value)
    return table[mask]


def _by_label(outcomes: list[StudyOutcome], label: str) -> StudyOutcome:
    for outcome in outcomes:
        if outcome.study.label == label:
            return outcome
    raise InvalidParameterError(f"找不到標籤為 '{label}' 的研究結果")


def _check_fig1(outcomes, checks) -> list[CheckResult]:
    bits = _by_label(outcomes, "bit").tables["rates"]
    at = _rows(bits, alpha_sq=checks["monotone_alpha_sq"]).sort_values("r")
    rates = at["gamma_bit"].to_numpy()
    results = [CheckResult("bit_rate_decreasing_in_r", bool(np.all(np.diff(rates) < 0)),
                           [float(x) for x in rates], "strictly decreasing")]

    gammas = _by_label(outcomes, "bit").tables["gamma_vs_r"].set_index("r")["gamma"]
    g0, g5 = gammas.get(0.0, math.nan), gammas.get(0.5, math.nan)
    low, high = checks["gamma_r0_range"]
    results.append(CheckResult("gamma_grows_with_r", bool(g5 > g0), {"r0": g0, "r0.5": g5}, "gamma(0.5) > gamma(0)"))
    results.append(CheckResult("gamma_r0_range", bool(low <= g0 <= high), g0, [low, high]))

    phase = _by_label(outcomes, "phase").tables["rates"]
    deviation = (phase["gamma_phase"] / phase["gamma_phase_model"] - 1.0).abs()
    results.append(CheckResult("phase_rate_matches_model", bool((deviation < checks["phase_model_tol"]).all()),
                               float(deviation.max()), f"< {checks['phase_model_tol']}"))
    at = _rows(phase, alpha_sq=checks["phase_alpha_sq"]).set_index("r")["gamma_phase"]
    spread = abs(at.get(0.5, math.nan) / at.get(0.0, math.nan) - 1.0)
    results.append(CheckResult("phase_rate_r_independent", bool(spread < checks["phase_r_tol"]),
                               spread, f"< {checks['phase_r_tol']}"))
    return results


def _model_factor(row: pd.Series) -> float:
    return float(row["gamma_bit"] / row["gamma_bit_model"])


def _check_fig2(outcomes, checks) -> list[CheckResult]:
    table = outcomes[0].tables["rates"]
    factor = checks["model_factor"]
    results = []
    for r in sorted(table["r"].unique()):
        row = _rows(table, alpha_sq=checks["alpha_sq"], r=r, kappa_ratio_value=checks["model_knob"]).iloc[0]
        ratio = _model_factor(row)
        results.append(CheckResult(f"dephasing_model_r{r:g}", bool(1 / factor <= ratio <= factor),
                                   ratio, [1 / factor, factor]))
    onset = knob_rate_ratio(table, checks["alpha_sq"], 0.0, checks["onset_high"], checks["onset_low"])
    results.append(CheckResult("dephasing_onset", bool(onset >= checks["onset_ratio"]), onset,
                               f">= {checks['onset_ratio']}"))
    return results


def _check_fig3(outcomes, checks) -> list[CheckResult]:
    table = outcomes[0].tables["rates"]
    factor = checks["model_factor"]
    row = _rows(table, alpha_sq=checks["alpha_sq"], r=0.0, kappa_ratio_value=checks["model_knob"]).iloc[0]
    ratio = _model_factor(row)
    squeezed = knob_rate_ratio(table, checks["alpha_sq"], checks["transition_r"], checks["transition_knob"])
    plain = knob_rate_ratio(table, checks["alpha_sq"], 0.0, checks["transition_knob"])
    return [
        CheckResult("gain_model_r0", bool(1 / factor <= ratio <= factor), ratio, [1 / factor, factor]),
        CheckResult("gain_transition_shift", bool(squeezed < plain), {"squeezed": squeezed, "plain": plain},
                    "squeezed ratio < plain ratio"),
    ]


def _check_fig4(outcomes, checks) -> list[CheckResult]:
    table = outcomes[0].tables["rates"]
    crossover = kerr_crossover(table, checks["alpha_sq"], checks["r"])
    low, high = checks["window"]
    return [CheckResult("kerr_crossover", crossover is not None and low <= crossover <= high, crossover, [low, high])]


def _check_fig5(outcomes, checks) -> list[CheckResult]:
    results = []
    table = _by_label(outcomes, "nonadiabatic").tables["zgate"]
    max_drive = checks.get("model_max_drive", config.ZGATE_DRIVE_WARN)
    # 只在 ε_Z/κ₂ ≤ max_drive 的點比較模型；更短的閘時間超出絕熱近似
    subset = table[table["r"].isin(checks["model_r"]) & (table["epsilon_z"] <= max_drive + 1e-12)]
    deviation = (subset["p_z"] / subset["p_z_model"] - 1.0).abs()
    results.append(CheckResult(
        "pz_matches_nonadiabatic_model", bool(not subset.empty and (deviation < checks["model_tol"]).all()),
        float(deviation.max()) if not subset.empty else None,
        f"< {checks['model_tol']} for ε_Z ≤ {max_drive:g}"))

    optimum = _by_label(outcomes, "optimum")
    point = optimum.documents["zgate_summary"]["points"][0]
    scan = _rows(optimum.tables["zgate"], alpha_sq=point["alpha_sq"], r=point["r"]).sort_values("t_gate")
    t_grid = scan["t_gate"].to_numpy()
    t_min = point["t_at_min_p_z"]
    interior = bool(t_grid[0] < t_min < t_grid[-1])
    results.append(CheckResult("pz_minimum_is_interior", interior, t_min, [float(t_grid[0]), float(t_grid[-1])]))
    gap = abs(t_min / point["t_opt_model"] - 1.0)
    results.append(CheckResult("pz_minimum_near_t_opt", bool(interior and gap < checks["minimum_tol"]), gap,
                               f"< {checks['minimum_tol']}"))

    bias = _by_label(outcomes, "bias")
    decreasing = all(np.all(np.diff(group.sort_values("alpha_sq")["p_x"].to_numpy()) < 0)
                     for _, group in bias.tables["bias_scan"].groupby("r"))
    results.append(CheckResult("px_decreasing_in_alpha_sq", bool(decreasing), None, "strictly decreasing"))
    slopes = _rows(bias.tables["bias_slopes"], r=checks["slope_r"])
    expected = math.exp(2.0 * checks["slope_r"])
    ratio = float(slopes["slope_ratio"].iloc[0]) if not slopes.empty else math.nan
    results.append(CheckResult("bias_slope_ratio", bool(abs(ratio / expected - 1.0) <= checks["slope_ratio_tol"]),
                               ratio, expected))
    return results


FIGURE_CHECKS = {"fig1": _check_fig1, "fig2": _check_fig2, "fig3": _check_fig3, "fig4": _check_fig4,
                 "fig5": _check_fig5}


def reproduce(figure_id: str, threads: int | None = None, plot: bool = False) -> tuple[list[StudyOutcome], dict]:
    """執行圖表內建網格並評估檢查項目，回傳 (各研究結果, checks 文件)。"""
    studies, checks = load_figure(figure_id)
    if threads is not None or plot:
        studies = [replace(s, threads=threads or s.threads, plot=plot or s.plot) for s in studies]
    outcomes = []
    for i, study_cfg in enumerate(studies):
        logger.info(f"[{i + 1}/{len(studies)}] {figure_id}: {study_cfg.label}")
        outcomes.append(run_study(study_cfg))
    try:
        results = FIGURE_CHECKS[figure_id](outcomes, checks)
    except Exception as e:
        logger.error(f"{figure_id} 檢查無法完成: {e}", exc_info=True)
        results = [CheckResult("evaluation", False, str(e), "all checks evaluated")]
    document = {"figure": figure_id, "passed": all(r.passed for r in results),
                "checks": [r.as_dict() for r in results]}
    logger.info(f"{figure_id} 檢查結果: {'通過' if document['passed'] else '未通過'}")
    return outcomes, document
