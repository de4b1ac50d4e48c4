"""Run directory layout: JSON documents through orjson, tables through pandas CSV."""

import logging
from pathlib import Path

import orjson
import pandas as pd

from windflex.errors import DataValidationError

log = logging.getLogger(__name__)

MARKER = "INCOMPLETE"
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def dumps(doc) -> bytes:
    return orjson.dumps(doc, option=JSON_OPTIONS) + b"\n"


class RunDir:
    """One run's artifacts under ``root``; carries an INCOMPLETE marker until ``finish``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def begin(self) -> "RunDir":
        self.root.mkdir(parents=True, exist_ok=True)
        self.path(MARKER).write_text("run in progress\n")
        return self

    def finish(self) -> None:
        self.path(MARKER).unlink(missing_ok=True)
        log.info("[artifacts] run complete: %s", self.root)

    @property
    def complete(self) -> bool:
        return self.root.exists() and not self.path(MARKER).exists()

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def sub(self, name: str) -> "RunDir":
        return RunDir(self.root / name)

    def write_json(self, name: str, doc) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(dumps(doc))
        return p

    def read_json(self, name: str):
        p = self.path(name)
        if not p.exists():
            raise DataValidationError(f"missing artifact {p}; run the earlier stage first")
        return orjson.loads(p.read_bytes())

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(p, index=False, float_format="%.17g", lineterminator="\n")
        return p

    def read_csv(self, name: str, **kwargs) -> pd.DataFrame:
        p = self.path(name)
        if not p.exists():
            raise DataValidationError(f"missing artifact {p}; run the earlier stage first")
        return pd.read_csv(p, float_precision="round_trip", **kwargs)
