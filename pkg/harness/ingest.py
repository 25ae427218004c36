"""Dataset ingestion and Monte Carlo train/test splits."""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from config.settings import Settings
from core.exceptions import ConfigurationError, IngestionError
from core.logging import get_logger
from core.rng import stream
from network.dataset import Dataset, Standardizer

logger = get_logger('Harness')


def _parse_row(cells: List[str]) -> Optional[List[float]]:
    try:
        return [float(cell) for cell in cells]
    except ValueError:
        return None


def load_dataset(path: Union[str, Path], name: Optional[str] = None) -> Dataset:
    """Read a comma-separated numeric file; the last column is the target.

    A single non-numeric first row is treated as a header. Row numbers in
    errors are 1-based file lines.

    Raises:
        IngestionError: missing file, ragged rows, non-numeric or non-finite
            cells, or fewer than 2 data rows
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError("file not found", path=str(path))

    rows: List[List[float]] = []
    width: Optional[int] = None
    with open(path, 'r', newline='', encoding='utf-8-sig') as f:
        for line_no, cells in enumerate(csv.reader(f), start=1):
            cells = [cell.strip() for cell in cells]
            if not cells or all(cell == '' for cell in cells):
                continue
            values = _parse_row(cells)
            if values is None:
                if line_no == 1:
                    continue  # header
                raise IngestionError("non-numeric cell", row=line_no, path=str(path))
            if width is None:
                width = len(values)
                if width < 2:
                    raise IngestionError(
                        "need at least one feature column and a target column", row=line_no, path=str(path)
                    )
            elif len(values) != width:
                raise IngestionError(
                    f"ragged row: {len(values)} columns, expected {width}", row=line_no, path=str(path)
                )
            if not all(np.isfinite(values)):
                raise IngestionError("NaN or infinite cell", row=line_no, path=str(path))
            rows.append(values)

    if len(rows) < 2:
        raise IngestionError(f"need at least 2 data rows, found {len(rows)}", path=str(path))
    table = np.asarray(rows, dtype=np.float64)
    return Dataset(table[:, :-1], table[:, -1], name=name or path.stem)


def resolve_dataset(dataset: str) -> Tuple[Path, Dict]:
    """Map a registry name or a file path to (path, registry entry or {})."""
    entry = Settings.load_dataset_entry(dataset)
    if entry:
        return Settings.dataset_path(dataset), entry
    path = Path(dataset)
    stem = path.stem.lower()
    for name in Settings.get_all_datasets():
        candidate = Settings.load_dataset_entry(name)
        if Path(candidate.get('file', '')).stem.lower() == stem:
            return path, candidate
    return path, {}


def verify_shape(data: Dataset, entry: Dict) -> None:
    """Check a loaded dataset against its registered row/feature counts."""
    if not entry:
        return
    expected = (entry.get('rows'), entry.get('features'))
    actual = (data.row_count, data.feature_count)
    if expected != actual:
        raise IngestionError(
            f"{entry.get('name', data.name)} should have {expected[0]} rows x {expected[1]} features, "
            f"got {actual[0]} x {actual[1]}"
        )


@dataclass(frozen=True, eq=False)
class Split:
    run_id: int
    train_indices: np.ndarray
    test_indices: np.ndarray

    def apply(self, data: Dataset) -> Tuple[Dataset, Dataset]:
        """Train/test datasets, inputs standardized with train statistics only."""
        train = data.subset(self.train_indices, name=f"{data.name}-train")
        test = data.subset(self.test_indices, name=f"{data.name}-test")
        scaler = Standardizer.fit(train)
        return scaler.transform(train), scaler.transform(test)


def monte_carlo_splits(
    data: Dataset,
    runs: int,
    train_fraction: float = 0.8,
    master_seed: int = 0,
) -> List[Split]:
    """Run ``i``'s split depends on (master_seed, i) only.

    Train size is ``round(train_fraction * n)``, clamped so both parts are
    non-empty. Index lists are sorted.
    """
    if runs < 1:
        raise ConfigurationError(f"runs must be >= 1, got {runs}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError(f"train_fraction must be in (0, 1), got {train_fraction}")

    n = data.row_count
    train_size = min(n - 1, max(1, int(round(train_fraction * n))))
    splits = []
    for run_id in range(runs):
        order = stream(master_seed, "split", run_id).permutation(n)
        splits.append(Split(
            run_id=run_id,
            train_indices=np.sort(order[:train_size]),
            test_indices=np.sort(order[train_size:]),
        ))
    return splits


def format_splits(splits: List[Split]) -> List[str]:
    """``run_id,part,indices`` lines (indices space separated)."""
    lines = []
    for split in splits:
        for part, indices in (("train", split.train_indices), ("test", split.test_indices)):
            lines.append(f"{split.run_id},{part},{' '.join(str(int(i)) for i in indices)}")
    return lines
