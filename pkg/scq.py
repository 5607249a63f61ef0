# scq.py
"""
命令列進入點：
    python scq.py rates|zgate|prep|circuit|run --config <path> [--out <dir>] [--plot] [--threads N]
    python scq.py reproduce <fig1..fig5> [--out <dir>] [--plot] [--threads N]
結束碼：0 成功；2 設定錯誤；3 執行失敗或結果不完整。
"""
import argparse
import dataclasses
import json
import logging
import os
import sys
import threading

import config
from core.errors import StudyConfigError
from core.study_config import StudyConfig, load_config
from core.study_runner import StudyOutcome, reproduce, run_study
from services.plot_renderer import PlotRenderer
from services.result_store import ResultStore

# --- 初始化 ---
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)

# 各子命令可接受的情境；run 不限制
SUBCOMMAND_SCENARIOS = {
    "rates": config.RATE_SCENARIOS,
    "zgate": ("zgate",),
    "prep": ("prep",),
    "circuit": ("circuit",),
    "run": config.SCENARIOS,
}

# --- 服務延遲初始化 ---
_services = {}
_locks = {
    "result_store": threading.Lock(),
    "plot_renderer": threading.Lock(),
}


# --- Service Getters ---
def get_result_store(output_dir: str) -> ResultStore:
    with _locks["result_store"]:
        key = os.path.abspath(output_dir)
        if _services.get("result_store_dir") != key:
            logger.info("Initializing ResultStore...")
            _services["result_store"] = ResultStore(output_dir)
            _services["result_store_dir"] = key
            _services.pop("plot_renderer", None)
    return _services["result_store"]


def get_plot_renderer(output_dir: str) -> PlotRenderer:
    store = get_result_store(output_dir)
    with _locks["plot_renderer"]:
        if "plot_renderer" not in _services:
            logger.info("Initializing PlotRenderer...")
            _services["plot_renderer"] = PlotRenderer(result_store=store)
    return _services["plot_renderer"]


def _report_failure(category: str, message: str):
    """機器可讀的錯誤類別寫到 stderr（單行 JSON）。"""
    print(json.dumps({"error_category": category, "message": message}, ensure_ascii=False), file=sys.stderr)


def write_outcome(output_dir: str, outcome: StudyOutcome, prefix: str, plot: bool) -> list[str]:
    """寫出單一研究的所有表格與文件；回傳寫出失敗的檔名。"""
    store = get_result_store(output_dir)
    failed = []
    for name, table in outcome.tables.items():
        if store.write_table(table, f"{prefix}{name}.csv") is None:
            failed.append(f"{prefix}{name}.csv")
    for name, document in outcome.documents.items():
        if store.write_json(document, f"{prefix}{name}.json") is None:
            failed.append(f"{prefix}{name}.json")
    if plot:
        paths = get_plot_renderer(output_dir).render_tables(outcome.tables, prefix)
        logger.info(f"已輸出 {len(paths)} 張圖")
    return failed


def _apply_overrides(study_cfg: StudyConfig, args) -> StudyConfig:
    changes = {}
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.plot:
        changes["plot"] = True
    return dataclasses.replace(study_cfg, **changes) if changes else study_cfg


def _finish(store: ResultStore, resolved: dict, errors: list[dict]) -> int:
    if errors:
        store.write_manifest(resolved, "incomplete", errors, "runtime-failure")
        _report_failure("runtime-failure", f"{len(errors)} 個網格點失敗，結果不完整")
        return config.EXIT_RUNTIME_FAILURE
    store.write_manifest(resolved, "complete")
    return config.EXIT_OK


def cmd_study(args) -> int:
    """rates / zgate / prep / circuit / run 共用流程。"""
    try:
        study_cfg = _apply_overrides(load_config(args.config), args)
        allowed = SUBCOMMAND_SCENARIOS[args.command]
        if study_cfg.scenario not in allowed:
            raise StudyConfigError(f"子命令 '{args.command}' 不接受情境 '{study_cfg.scenario}'", field="scenario")
    except StudyConfigError as e:
        logger.error(f"設定檔驗證失敗: {e}")
        _report_failure(e.category, str(e))
        return config.EXIT_CONFIG_INVALID

    output_dir = args.out or study_cfg.output or config.DEFAULT_OUTPUT_DIR
    store = get_result_store(output_dir)
    resolved = study_cfg.as_dict()
    try:
        outcome = run_study(study_cfg)
        prefix = f"{study_cfg.label}/" if study_cfg.label else ""
        failed = write_outcome(output_dir, outcome, prefix, study_cfg.plot)
    except Exception as e:
        category = getattr(e, "category", "runtime-failure")
        logger.error(f"執行情境 {study_cfg.scenario} 時發生錯誤: {e}", exc_info=True)
        store.write_manifest(resolved, "failed", [{"point": None, "error": str(e), "category": category}], category)
        _report_failure(category, str(e))
        return config.EXIT_RUNTIME_FAILURE
    errors = outcome.errors + [{"point": path, "error": "寫檔失敗", "category": "runtime-failure"} for path in failed]
    return _finish(store, resolved, errors)


def cmd_reproduce(args) -> int:
    """執行內建圖表網格，輸出 CSV、SVG、checks.json。"""
    if args.figure not in config.FIGURE_IDS:
        message = f"未知的圖表 '{args.figure}'，可用: {', '.join(config.FIGURE_IDS)}"
        logger.error(message)
        _report_failure("config-invalid", message)
        return config.EXIT_CONFIG_INVALID

    output_dir = os.path.join(args.out or config.DEFAULT_OUTPUT_DIR, args.figure)
    store = get_result_store(output_dir)
    resolved = {"figure": args.figure}
    try:
        outcomes, checks = reproduce(args.figure, threads=args.threads, plot=args.plot)
        resolved["studies"] = [outcome.study.as_dict() for outcome in outcomes]
        errors = []
        for outcome in outcomes:
            failed = write_outcome(output_dir, outcome, f"{outcome.study.label}/", outcome.study.plot)
            errors.extend(outcome.errors)
            errors.extend({"point": path, "error": "寫檔失敗", "category": "runtime-failure"} for path in failed)
        store.write_json(checks, "checks.json")
    except StudyConfigError as e:
        logger.error(f"內建網格設定錯誤: {e}")
        _report_failure(e.category, str(e))
        return config.EXIT_CONFIG_INVALID
    except Exception as e:
        category = getattr(e, "category", "runtime-failure")
        logger.error(f"重現 {args.figure} 時發生錯誤: {e}", exc_info=True)
        store.write_manifest(resolved, "failed", [{"point": None, "error": str(e), "category": category}], category)
        _report_failure(category, str(e))
        return config.EXIT_RUNTIME_FAILURE
    return _finish(store, resolved, errors)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scq", description="squeezed cat qubit simulation studies")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="輸出目錄（預設 SCQ_OUTPUT_DIR 或 results）")
        p.add_argument("--plot", action="store_true", help="同時輸出 SVG 圖")
        p.add_argument("--threads", type=int, help="平行工作數（環境變數 SCQ_THREADS 優先）")

    for name in SUBCOMMAND_SCENARIOS:
        p = sub.add_parser(name, help=f"{name} study")
        p.add_argument("--config", required=True, help="JSON 研究設定檔")
        common(p)
        p.set_defaults(func=cmd_study)

    p = sub.add_parser("reproduce", help="run a bundled figure grid and its checks")
    p.add_argument("figure", help=f"one of {', '.join(config.FIGURE_IDS)}")
    common(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    # 每次執行各自計時與記錄已寫出的檔案
    _services.clear()
    if args.threads is not None and args.threads < 1:
        _report_failure("config-invalid", "--threads 必須 ≥ 1")
        return config.EXIT_CONFIG_INVALID
    return args.func(args)


if __name__ == '__main__':
    sys.exit(main())
