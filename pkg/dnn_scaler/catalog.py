"""
Calibration catalog and scenario file loading.

The bundled catalog (``data/catalog.json``) holds one row per DNN and dataset
with measured base, BS=32 and MTL=8 throughputs. Rows are turned into
calibrated models here, and their model latencies across MTL 1..N form the
reference rows for matrix completion.
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import logging

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from dnn_scaler.config import ControllerSettings
from dnn_scaler.errors import ConfigError, SchemaError, UnknownDnnError
from dnn_scaler.perfmodel import DnnModels, PowerModel, calibrate_batching, calibrate_mt
from dnn_scaler.schemas import CatalogEntry, Scenario

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
BUNDLED_CATALOG = DATA_DIR / "catalog.json"
SCENARIO_DIR = DATA_DIR / "scenarios"


class LatencyRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dnn_id: str
    dataset_tag: str = "default"
    latencies: List[float] = Field(..., min_length=1, description="ms for MTL 1..N")


class LatencyRowsFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rows: List[LatencyRow] = Field(..., min_length=1)


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read '{path}': {e.strerror or e}", error_data={"path": str(path)}) from e


def _validate(adapter: TypeAdapter, path: Path):
    try:
        return adapter.validate_json(_read(path))
    except ValidationError as e:
        logger.warning(f"_validate: {path} failed schema validation ({e.error_count()} errors)")
        raise SchemaError(str(path), e) from e


class Catalog:
    """Lookup table of calibration rows keyed by (dnn_id, dataset_tag)."""

    def __init__(self, entries: Sequence[CatalogEntry], source: str = "<memory>"):
        self.source = source
        self._entries: Dict[Tuple[str, str], CatalogEntry] = {}
        for entry in entries:
            if entry.key in self._entries:
                raise ConfigError(f"duplicate catalog entry {entry.key} in {source}")
            self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def get(self, dnn_id: str, dataset_tag: Optional[str] = None) -> CatalogEntry:
        """
        Resolve a catalog row.

        A missing or 'default' dataset tag matches when the DNN id has
        exactly one row.

        Raises:
            UnknownDnnError: no row matches.
        """
        entry = self._entries.get((dnn_id, dataset_tag or "default"))
        if entry is not None:
            return entry
        if dataset_tag in (None, "default"):
            matches = [e for e in self._entries.values() if e.id == dnn_id]
            if len(matches) == 1:
                return matches[0]
        raise UnknownDnnError(
            f"unknown DNN '{dnn_id}' (dataset '{dataset_tag}') in {self.source}",
            error_data={
                "dnn_id": dnn_id,
                "dataset_tag": dataset_tag or "default",
                "choices": [{"id": e.id, "dataset_tag": e.dataset_tag} for e in self._entries.values()],
            },
        )

    def models(self, entry: CatalogEntry, settings: ControllerSettings) -> DnnModels:
        """Calibrated batching, MT and power models; per-entry sigma/u1 win over settings."""
        sigma = entry.sigma if entry.sigma is not None else settings.sigma
        return DnnModels(
            batching=calibrate_batching(entry.batching_points, sigma=sigma),
            mt=calibrate_mt(entry.mt_points, sigma=sigma,
                            launch_delay=settings.launch_delay_ms, terminate_delay=settings.terminate_delay_ms),
            power=PowerModel(p_idle=settings.p_idle, p_max=settings.p_max,
                             u1=entry.u1 if entry.u1 is not None else settings.u1,
                             batching_slope=settings.batching_util_slope),
        )

    def latency_rows(self, settings: ControllerSettings, n: int,
                     exclude: Optional[Tuple[str, str]] = None) -> List[List[float]]:
        """Noise-free MT latencies for MTL 1..n of every row except ``exclude``."""
        rows = []
        for entry in self._entries.values():
            if entry.key == exclude:
                continue
            mt = self.models(entry, settings).mt
            rows.append([mt.mean_latency(k) for k in range(1, n + 1)])
        return rows


def load_catalog(path: Optional[str] = None) -> Catalog:
    """Load a catalog file, or the bundled one when ``path`` is None."""
    source = Path(path) if path else BUNDLED_CATALOG
    entries = _validate(TypeAdapter(List[CatalogEntry]), source)
    logger.info(f"load_catalog: {len(entries)} entries from {source}")
    return Catalog(entries, source=str(source))


def load_latency_rows(path: str, n: int) -> List[List[float]]:
    """Fully observed latency rows from a fixture file, truncated to MTL 1..n."""
    doc = _validate(TypeAdapter(LatencyRowsFile), Path(path))
    rows = []
    for row in doc.rows:
        if len(row.latencies) < n:
            raise ConfigError(f"latency row for '{row.dnn_id}' covers MTL 1..{len(row.latencies)}, need 1..{n}",
                              error_data={"path": path})
        if any(v <= 0 for v in row.latencies):
            raise ConfigError(f"latency row for '{row.dnn_id}' has non-positive values", error_data={"path": path})
        rows.append(list(row.latencies[:n]))
    return rows


def load_scenario(path: str) -> Scenario:
    scenario = _validate(TypeAdapter(Scenario), Path(path))
    logger.info(f"load_scenario: {len(scenario.jobs)} jobs from {path}")
    return scenario


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. 'workload'."""
    path = SCENARIO_DIR / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))
        raise ConfigError(f"no bundled scenario '{name}'; available: {available}")
    return path
