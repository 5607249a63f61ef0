# reproduce_all.py
"""
本地批次處理進入點，依序重現所有內建圖表網格並輸出 CSV、SVG 與 checks.json。
"""
import logging
import sys

import config
import scq

logger = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    logger.info("--- 開始執行批次圖表重現任務 ---")
    extra = list(argv if argv is not None else sys.argv[1:])

    total = len(config.FIGURE_IDS)
    success_count = 0
    for i, figure_id in enumerate(config.FIGURE_IDS):
        logger.info(f"[{i+1}/{total}] 正在重現圖表: {figure_id}")
        try:
            code = scq.main(["reproduce", figure_id, "--plot", *extra])
        except Exception as e:
            logger.error(f"重現 {figure_id} 時發生未預期錯誤: {e}", exc_info=True)
            continue
        if code == config.EXIT_OK:
            success_count += 1
        else:
            logger.error(f"{figure_id} 未完整結束 (exit {code})")

    logger.info("--- 任務完成 ---")
    logger.info(f"總計處理: {total} 張圖表，完整結束: {success_count} 張。")
    return config.EXIT_OK if success_count == total else config.EXIT_RUNTIME_FAILURE


if __name__ == "__main__":
    sys.exit(main())
