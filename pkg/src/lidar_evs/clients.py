from __future__ import annotations

from typing import Any

import oci

from .config import PublishConfig


def create_oci_config(publish: PublishConfig) -> dict[str, Any]:
    config = oci.config.from_file(
        file_location=publish.oci_config_file,
        profile_name=publish.oci_config_profile,
    )

    if publish.oci_region:
        config["region"] = publish.oci_region

    return config


def create_object_storage_client(oci_config: dict[str, Any]) -> Any:
    return oci.object_storage.ObjectStorageClient(oci_config, retry_strategy=oci.retry.DEFAULT_RETRY_STRATEGY)
