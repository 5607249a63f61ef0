# core/parallel.py
"""
網格點的執行池。各點彼此獨立，由共享佇列取工作；結果依輸入順序回傳。
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, Iterable

logger = logging.getLogger(__name__)


@dataclass
class PointOutcome:
    key: Any
    result: Any = None
    error: Exception | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_points(func: Callable, keys: Iterable, threads: int = 1, label: str = "grid") -> list[PointOutcome]:
    keys = list(keys)
    total = len(keys)
    outcomes = [PointOutcome(key) for key in keys]
    threads = max(1, min(int(threads), total or 1))
    logger.info(f"--- 開始執行 {label}: {total} 個網格點，{threads} 個執行緒 ---")

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(func, key): index for index, key in enumerate(keys)}
        for done, future in enumerate(as_completed(futures), start=1):
            index = futures[future]
            try:
                outcomes[index].result = future.result()
                logger.info(f"[{done}/{total}] {label} 完成: {keys[index]}")
            except Exception as e:
                outcomes[index].error = e
                logger.error(f"[{done}/{total}] {label} 失敗 {keys[index]}: {e}", exc_info=True)

    failed = sum(1 for outcome in outcomes if not outcome.ok)
    logger.info(f"--- {label} 完成，成功 {total - failed} / {total} ---")
    return outcomes
