# services/result_store.py
"""
封裝所有結果檔案的寫入與讀取。
每個檔案先寫到同目錄的暫存檔，再以 os.replace 原子地改名，中斷時不會留下半個 CSV。
"""
import io
import json
import logging
import os
import tempfile
import time
from datetime import datetime, timezone

import numpy as np
import pandas as pd

import config

logger = logging.getLogger(__name__)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    raise TypeError(f"無法序列化 {type(value).__name__}")


class ResultStore:
    def __init__(self, output_dir: str):
        """
        初始化輸出目錄。
        Args:
            output_dir (str): 結果根目錄，不存在時自動建立。
        """
        self.output_dir = output_dir
        os.makedirs(self.output_dir, exist_ok=True)
        self.written = []
        self.started_at = datetime.now(timezone.utc)
        self._clock = time.monotonic()
        logger.info(f"結果目錄: {os.path.abspath(self.output_dir)}")

    def path(self, relative_path: str) -> str:
        return os.path.join(self.output_dir, relative_path)

    def _atomic_write(self, relative_path: str, payload: bytes) -> str:
        target = self.path(relative_path)
        os.makedirs(os.path.dirname(target) or ".", exist_ok=True)
        fd, temp_path = tempfile.mkstemp(dir=os.path.dirname(target) or ".", suffix=".tmp")
        try:
            with os.fdopen(fd, 'wb') as f:
                f.write(payload)
            os.replace(temp_path, target)
        except Exception:
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise
        self.written.append(relative_path)
        return target

    def write_table(self, table: pd.DataFrame, relative_path: str) -> str | None:
        """寫出 CSV；浮點數一律以 %.10e 表示。"""
        try:
            buffer = io.StringIO()
            table.to_csv(buffer, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n")
            target = self._atomic_write(relative_path, buffer.getvalue().encode('utf-8'))
            logger.info(f"已寫出 {len(table)} 列至 {target}")
            return target
        except Exception as e:
            logger.error(f"寫出表格失敗 ({relative_path}): {e}", exc_info=True)
            return None

    def write_json(self, document: dict, relative_path: str) -> str | None:
        try:
            text = json.dumps(document, indent=2, ensure_ascii=False, sort_keys=True, default=_json_default)
            target = self._atomic_write(relative_path, (text + "\n").encode('utf-8'))
            logger.info(f"已寫出 {target}")
            return target
        except Exception as e:
            logger.error(f"寫出 JSON 失敗 ({relative_path}): {e}", exc_info=True)
            return None

    def write_bytes(self, payload: bytes, relative_path: str) -> str | None:
        try:
            return self._atomic_write(relative_path, payload)
        except Exception as e:
            logger.error(f"寫出檔案失敗 ({relative_path}): {e}", exc_info=True)
            return None

    def read_table(self, relative_path: str) -> pd.DataFrame | None:
        """讀回先前寫出的 CSV；不存在時回傳 None。"""
        try:
            if not self.check_exists(relative_path):
                logger.warning(f"結果檔不存在: {self.path(relative_path)}")
                return None
            return pd.read_csv(self.path(relative_path))
        except Exception as e:
            logger.error(f"讀取表格失敗 ({relative_path}): {e}")
            return None

    def check_exists(self, relative_path: str) -> bool:
        try:
            return os.path.isfile(self.path(relative_path))
        except Exception as e:
            logger.error(f"檢查檔案存在性失敗 ({relative_path}): {e}")
            return False

    def write_manifest(self, resolved_config: dict, status: str, errors: list[dict] | None = None,
                       error_category: str | None = None) -> str | None:
        """run_manifest.json：完整設定、版本、起始時間、耗時、狀態與已寫出檔案。"""
        manifest = {
            "scq_version": config.APP_VERSION,
            "config": resolved_config,
            "started_at": self.started_at.isoformat(),
            "wall_time_seconds": round(time.monotonic() - self._clock, 3),
            "status": status,
            "files": sorted(self.written),
            "errors": errors or [],
        }
        if error_category:
            manifest["error_category"] = error_category
        return self.write_json(manifest, "run_manifest.json")
