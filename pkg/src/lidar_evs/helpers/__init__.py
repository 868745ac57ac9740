from .object_storage_uploader import ObjectStorageUploader
from .output_writer import format_metrics_table, write_json_report, write_markdown_report

__all__ = ["ObjectStorageUploader", "format_metrics_table", "write_json_report", "write_markdown_report"]
