import json
import os
import tempfile
from typing import Any, Optional

from ..core.config import Settings


class StorageHandler:
    """Process-wide handle on the results directory tree"""

    _instance = None
    _root = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(StorageHandler, cls).__new__(cls)
            cls._initialize_root()
        return cls._instance

    @classmethod
    def _initialize_root(cls):
        """Resolve the results root from settings"""
        cls._root = os.path.abspath(Settings().results_dir)

    @classmethod
    def reset(cls) -> None:
        cls._instance = None
        cls._root = None

    def root(self) -> str:
        if self._root is None:
            self._initialize_root()
        return self._root

    def path(self, *parts: str) -> str:
        return os.path.join(self.root(), *parts)

    def write_text(self, path: str, text: str) -> str:
        """Write atomically: a temp file in the same directory, then rename"""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        handle, temp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(handle, "w", encoding="utf-8") as out:
                out.write(text)
            os.replace(temp, path)
        except BaseException:
            if os.path.exists(temp):
                os.remove(temp)
            raise
        return path

    def read_text(self, path: str) -> Optional[str]:
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as handle:
            return handle.read()

    def write_json(self, path: str, payload: Any) -> str:
        return self.write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def read_json(self, path: str) -> Optional[Any]:
        text = self.read_text(path)
        return None if text is None else json.loads(text)
