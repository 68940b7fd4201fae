from .config import ServiceConfig
from .csvio import ingest_csv, write_rows_csv

__all__ = ["ServiceConfig", "ingest_csv", "write_rows_csv"]
