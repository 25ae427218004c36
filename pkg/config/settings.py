"""Configuration management for nevo_gspt."""

import os
from typing import Dict, List, Optional
from pathlib import Path
import yaml
from dotenv import load_dotenv, dotenv_values

# Load environment variables
load_dotenv()


class Settings:
    """Application settings."""

    # Application Configuration
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_DIR: str = os.getenv('LOG_DIR', 'logs')

    # Data and results locations
    DATA_DIR: str = os.getenv('DATA_DIR', 'data')
    RESULTS_DIR: str = os.getenv('RESULTS_DIR', 'results')

    # Experiment defaults
    DEFAULT_JOBS: int = int(os.getenv('DEFAULT_JOBS', '0'))  # 0 = all cores
    DEFAULT_SEED: int = int(os.getenv('DEFAULT_SEED', '0'))

    @classmethod
    def _load_registry(cls) -> Dict:
        config_file = Path(__file__).parent / 'datasets.yaml'
        if not config_file.exists():
            return {}

        with open(config_file, 'r') as f:
            config = yaml.safe_load(f)
            return config or {}

    @classmethod
    def load_dataset_entry(cls, dataset_name: str) -> Dict:
        """Load a dataset's registry entry from the YAML file.

        Args:
            dataset_name: Registry name (e.g., 'airfoil', 'ld50')

        Returns:
            Dictionary with the registry entry, empty if unknown
        """
        return cls._load_registry().get(dataset_name, {})

    @classmethod
    def get_all_datasets(cls) -> List[str]:
        """Get list of all registered datasets.

        Returns:
            List of dataset names
        """
        return list(cls._load_registry().keys())

    @classmethod
    def dataset_path(cls, dataset_name: str) -> Optional[Path]:
        """Resolve the on-disk path of a registered dataset.

        Args:
            dataset_name: Registry name

        Returns:
            Path under DATA_DIR, or None if the name is not registered
        """
        entry = cls.load_dataset_entry(dataset_name)
        if not entry:
            return None
        return Path(cls.DATA_DIR) / entry.get('file', f"{dataset_name}.csv")

    @classmethod
    def resolve_jobs(cls, jobs: Optional[int] = None) -> int:
        """Turn a requested worker count into a concrete one (0 = all cores)."""
        requested = cls.DEFAULT_JOBS if jobs is None else jobs
        if requested <= 0:
            return os.cpu_count() or 1
        return requested

    @staticmethod
    def load_experiment_manifest(path: str) -> Dict[str, str]:
        """Read a flat key=value experiment manifest.

        Args:
            path: Manifest file path

        Returns:
            Mapping of manifest keys to raw string values (empty values dropped)
        """
        values = dotenv_values(path)
        return {key.strip().lower(): value for key, value in values.items() if value is not None}


settings = Settings()
