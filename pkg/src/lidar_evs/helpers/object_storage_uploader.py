from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable

from ..models import UploadResult

logger = logging.getLogger(__name__)

_CONTENT_TYPES = {
    ".json": "application/json",
    ".md": "text/markdown",
    ".xyz": "text/plain",
}


def content_type_for(path: Path) -> str:
    return _CONTENT_TYPES.get(path.suffix.lower(), "application/octet-stream")


class ObjectStorageUploader:
    def __init__(self, object_storage_client: Any, namespace: str, bucket: str, prefix: str) -> None:
        self.object_storage_client = object_storage_client
        self.namespace = namespace
        self.bucket = bucket
        self.prefix = prefix.strip("/")

    def object_name_for(self, file_path: Path, run_id: str) -> str:
        parts = [part for part in (self.prefix, run_id, file_path.name) if part]
        return "/".join(parts)

    def upload_file(self, file_path: Path, run_id: str = "") -> UploadResult:
        object_name = self.object_name_for(file_path, run_id)

        with file_path.open("rb") as stream:
            self.object_storage_client.put_object(
                namespace_name=self.namespace,
                bucket_name=self.bucket,
                object_name=object_name,
                put_object_body=stream,
                content_type=content_type_for(file_path),
            )

        return UploadResult(
            namespace=self.namespace,
            bucket=self.bucket,
            object_name=object_name,
            uri=f"oci://{self.bucket}@{self.namespace}/{object_name}",
        )

    def upload_artifacts(self, paths: Iterable[Path], run_id: str) -> list[UploadResult]:
        results = []
        for path in sorted(paths):
            result = self.upload_file(path, run_id)
            logger.info("Uploaded: %s", result.uri)
            results.append(result)
        return results
