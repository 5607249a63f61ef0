# core/study_config.py
"""
研究設定檔 (JSON) 的讀取與驗證。
所有欄位在任何模擬開始前就檢查完畢；未知欄位一律視為錯誤，並以模糊比對提示最接近的合法欄位。
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field

from thefuzz import process as fuzzy_process

import config
from core.circuit import CircuitParams
from core.errors import InvalidParameterError, StudyConfigError
from core.fock import required_dim
from core.states import CodeParams

logger = logging.getLogger(__name__)

TOP_KEYS = ("schema_version", "scenario", "label", "grid", "engine", "noise", "params", "output", "plot", "threads")
ENGINE_KEYS = ("sample_count", "rel_tol", "abs_tol", "method", "check_positivity", "t_final", "dim")
NOISE_KEYS = ("kappa2", "kappa1", "n_th", "kappa_phi", "kerr")

GRID_KEYS = {
    **{scenario: ("alpha_sq", "r", "knob") for scenario in config.RATE_SCENARIOS},
    "zgate": ("alpha_sq", "r", "t_gate"),
    "prep": ("initial",),
    "circuit": ("kappa_w_ratio",),
    "custom": ("alpha_sq", "r"),
}
PARAM_KEYS = {
    **{scenario: ("measure",) for scenario in config.RATE_SCENARIOS},
    "zgate": ("kappa_minus", "theta", "bias_scan", "bias_alpha_sq", "bias_r"),
    "prep": ("mu0", "mu1", "nu", "r", "phi", "t_final", "n_th"),
    "circuit": ("circuit", "alpha", "r", "waste_dim", "skpo_kerr", "skpo_eps2"),
    "custom": ("initial",),
}
CIRCUIT_KEYS = ("g3", "kappa_w", "e_j", "lam", "omega_a", "omega_w", "phi_a", "phi_c", "phi_w",
                "eta", "omega_c", "kappa_a", "kappa_c")
REQUIRED_GRID = {
    **{scenario: ("alpha_sq", "r", "knob") for scenario in config.RATE_SCENARIOS},
    "zgate": ("alpha_sq", "r"),
    "prep": (),
    "circuit": (),
    "custom": ("alpha_sq", "r"),
}


@dataclass(frozen=True)
class StudyConfig:
    scenario: str
    grid: dict = field(default_factory=dict)
    engine: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: str | None = None
    plot: bool = False
    threads: int | None = None
    label: str | None = None
    schema_version: int = config.CONFIG_SCHEMA_VERSION

    def as_dict(self) -> dict:
        return asdict(self)

    def resolved_threads(self) -> int:
        """環境變數 SCQ_THREADS 優先，其次設定檔，預設 1。"""
        if config.SCQ_THREADS > 0:
            return config.SCQ_THREADS
        return self.threads or 1


def _reject_unknown(section: dict, allowed: tuple, where: str):
    for key in section:
        if key in allowed:
            continue
        suggestion = fuzzy_process.extractOne(key, allowed, score_cutoff=60)
        hint = f"，您是不是要用 '{suggestion[0]}'？" if suggestion else ""
        raise StudyConfigError(f"未知的欄位 '{key}'{hint}", field=f"{where}.{key}" if where else key)


def _number(value, where: str, minimum: float | None = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StudyConfigError(f"必須是數值，收到 {value!r}", field=where)
    value = float(value)
    if not math.isfinite(value):
        raise StudyConfigError("必須是有限值", field=where)
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise StudyConfigError(f"必須 {'>' if strict else '≥'} {minimum:g}，收到 {value:g}", field=where)
    return value


def _number_list(values, where: str, minimum: float | None = None, strict: bool = False) -> list[float]:
    if not isinstance(values, list) or not values:
        raise StudyConfigError("必須是非空的數值列表", field=where)
    return [_number(v, f"{where}[{i}]", minimum, strict) for i, v in enumerate(values)]


def _validate_grid(scenario: str, grid: dict) -> dict:
    _reject_unknown(grid, GRID_KEYS[scenario], "grid")
    for key in REQUIRED_GRID[scenario]:
        if key not in grid:
            raise StudyConfigError("缺少必要欄位", field=f"grid.{key}")
    out = {}
    for key, values in grid.items():
        where = f"grid.{key}"
        if key == "initial":
            allowed = config.PREP_INITIAL_STATES
            if not isinstance(values, list) or not values or any(v not in allowed for v in values):
                raise StudyConfigError(f"必須是 {allowed} 的非空子集", field=where)
            out[key] = list(values)
        elif key in ("alpha_sq", "t_gate", "kappa_w_ratio"):
            out[key] = _number_list(values, where, 0.0, strict=True)
        elif key == "knob" and scenario == "rates-kerr":
            out[key] = _number_list(values, where)
        else:
            out[key] = _number_list(values, where, 0.0)
    return out


def _validate_engine(engine: dict) -> dict:
    _reject_unknown(engine, ENGINE_KEYS, "engine")
    out = dict(engine)
    if "method" in out and out["method"] not in config.EVOLUTION_METHODS:
        raise StudyConfigError(f"必須是 {config.EVOLUTION_METHODS} 之一", field="engine.method")
    if "sample_count" in out:
        if not isinstance(out["sample_count"], int) or out["sample_count"] < 2:
            raise StudyConfigError("必須是 ≥ 2 的整數", field="engine.sample_count")
    for key in ("rel_tol", "abs_tol"):
        if key in out:
            value = _number(out[key], f"engine.{key}", 0.0, strict=True)
            if value > 1e-2:
                raise StudyConfigError("必須 ≤ 1e-2", field=f"engine.{key}")
    if "t_final" in out:
        _number(out["t_final"], "engine.t_final", 0.0, strict=True)
    if "dim" in out and (not isinstance(out["dim"], int) or out["dim"] < 2):
        raise StudyConfigError("必須是 ≥ 2 的整數", field="engine.dim")
    if "check_positivity" in out and not isinstance(out["check_positivity"], bool):
        raise StudyConfigError("必須是布林值", field="engine.check_positivity")
    return out


def _check_propagator_fit(scenario: str, grid: dict, engine: dict, params: dict):
    """明確指定 propagator 時，網格上每一點的截斷維度都必須在上限內。"""
    if engine.get("method") != "propagator" or scenario not in config.RATE_SCENARIOS + ("zgate", "custom"):
        return
    points = [(a, r) for a in grid.get("alpha_sq", []) for r in grid.get("r", [])]
    points += [(a, r) for a in params.get("bias_alpha_sq", []) for r in params.get("bias_r", [])]
    for alpha_sq, r in points:
        code = CodeParams.from_alpha_sq(alpha_sq, r)
        dim = max(required_dim(code.cutoff_photons, r), engine.get("dim") or 0)
        if dim > config.PROPAGATOR_MAX_DIM:
            raise StudyConfigError(
                f"α² = {alpha_sq}, r = {r} 需要 N = {dim}，超過 propagator 上限 "
                f"{config.PROPAGATOR_MAX_DIM}；請改用 \"auto\" 或 \"dopri5\"", field="engine.method")


def _validate_noise(noise: dict) -> dict:
    _reject_unknown(noise, NOISE_KEYS, "noise")
    out = {}
    for key, value in noise.items():
        out[key] = _number(value, f"noise.{key}", None if key == "kerr" else 0.0)
    if "kappa2" in out and out["kappa2"] <= 0:
        raise StudyConfigError("必須 > 0", field="noise.kappa2")
    return out


def _validate_params(scenario: str, params: dict) -> dict:
    _reject_unknown(params, PARAM_KEYS[scenario], "params")
    out = dict(params)
    if "measure" in out:
        measure = out["measure"]
        if not isinstance(measure, list) or not measure or any(m not in ("bit", "phase") for m in measure):
            raise StudyConfigError("必須是 ['bit', 'phase'] 的非空子集", field="params.measure")
    if "initial" in out and scenario == "custom" and out["initial"] not in config.CUSTOM_INITIAL_STATES:
        raise StudyConfigError(f"必須是 {config.CUSTOM_INITIAL_STATES} 之一", field="params.initial")
    for key in ("kappa_minus", "r", "n_th", "waste_dim"):
        if key in out:
            _number(out[key], f"params.{key}", 0.0)
    for key in ("t_final", "alpha", "skpo_kerr", "skpo_eps2"):
        if key in out:
            _number(out[key], f"params.{key}", 0.0, strict=True)
    if scenario == "zgate" and out.get("bias_scan") and not out.get("kappa_minus", 0.0) > 0:
        raise StudyConfigError("偏置掃描需要 κ₋ > 0 才有最佳閘時間", field="params.kappa_minus")
    if "waste_dim" in out and (not isinstance(out["waste_dim"], int) or out["waste_dim"] < 2):
        raise StudyConfigError("必須是 ≥ 2 的整數", field="params.waste_dim")
    for key in ("bias_alpha_sq", "bias_r"):
        if key in out:
            _number_list(out[key], f"params.{key}", 0.0, strict=key == "bias_alpha_sq")
    if scenario == "circuit":
        circuit = out.get("circuit")
        if not isinstance(circuit, dict):
            raise StudyConfigError("必須是物件", field="params.circuit")
        _reject_unknown(circuit, CIRCUIT_KEYS, "params.circuit")
        for key in CIRCUIT_KEYS[:9]:
            if key not in circuit:
                raise StudyConfigError("缺少必要欄位", field=f"params.circuit.{key}")
        for key, value in circuit.items():
            if value is not None:
                _number(value, f"params.circuit.{key}")
        if "alpha" not in out:
            raise StudyConfigError("缺少必要欄位", field="params.alpha")
        try:
            CircuitParams(**circuit)
        except InvalidParameterError as e:
            raise StudyConfigError(str(e), field="params.circuit")
    return out


def parse_config(data: dict, source: str = "<memory>") -> StudyConfig:
    """驗證已解析的 JSON 物件並建立 StudyConfig。"""
    if not isinstance(data, dict):
        raise StudyConfigError("設定檔最上層必須是物件", field=source)
    _reject_unknown(data, TOP_KEYS, "")

    version = data.get("schema_version", config.CONFIG_SCHEMA_VERSION)
    if version != config.CONFIG_SCHEMA_VERSION:
        raise StudyConfigError(f"不支援的版本 {version}，目前為 {config.CONFIG_SCHEMA_VERSION}", field="schema_version")

    scenario = data.get("scenario")
    if scenario not in config.SCENARIOS:
        suggestion = fuzzy_process.extractOne(str(scenario), config.SCENARIOS, score_cutoff=60)
        hint = f"，您是不是要用 '{suggestion[0]}'？" if suggestion else ""
        raise StudyConfigError(f"未知的情境 {scenario!r}{hint}", field="scenario")

    for section in ("grid", "engine", "noise", "params"):
        if not isinstance(data.get(section, {}), dict):
            raise StudyConfigError("必須是物件", field=section)

    threads = data.get("threads")
    if threads is not None and (not isinstance(threads, int) or isinstance(threads, bool) or threads < 1):
        raise StudyConfigError("必須是 ≥ 1 的整數", field="threads")
    plot = data.get("plot", False)
    if not isinstance(plot, bool):
        raise StudyConfigError("必須是布林值", field="plot")

    study = StudyConfig(
        scenario=scenario,
        grid=_validate_grid(scenario, data.get("grid", {})),
        engine=_validate_engine(data.get("engine", {})),
        noise=_validate_noise(data.get("noise", {})),
        params=_validate_params(scenario, data.get("params", {})),
        output=data.get("output"),
        plot=plot,
        threads=threads,
        label=data.get("label"),
        schema_version=version,
    )
    _check_propagator_fit(scenario, study.grid, study.engine, study.params)
    logger.info(f"設定檔 {source} 驗證完成: scenario = {scenario}")
    return study


def load_config(path: str) -> StudyConfig:
    """讀取並驗證 JSON 設定檔。"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise StudyConfigError(f"找不到設定檔 '{path}'", field="config")
    except json.JSONDecodeError as e:
        raise StudyConfigError(f"JSON 格式錯誤 (第 {e.lineno} 行): {e.msg}", field="config")
    return parse_config(data, source=path)


def load_figure(figure_id: str, grids_file: str = config.FIGURE_GRIDS_FILE) -> tuple[list[StudyConfig], dict]:
    """讀取內建圖表網格，回傳 (研究設定列表, 檢查參數)。"""
    if figure_id not in config.FIGURE_IDS:
        raise StudyConfigError(f"未知的圖表 '{figure_id}'，可用: {config.FIGURE_IDS}", field="figure")
    with open(grids_file, 'r', encoding='utf-8') as f:
        figures = json.load(f)
    entry = figures[figure_id]
    studies = [parse_config(item, source=f"{figure_id}[{i}]") for i, item in enumerate(entry["studies"])]
    return studies, entry.get("checks", {})
