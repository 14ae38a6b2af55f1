"""Label-conditioned histology image synthesis.

The compiled core lives in ``histosynth._histosynth``; libtorch is loaded through the
``torch`` package, so it is imported first.
"""

import torch  # noqa: F401  (loads libtorch for the extension)

from ._histosynth import (
    HistosynthError,
    Synthesizer,
    cohen_kappa,
    decode_label_png,
    desk_config,
    encode_label_png,
    fleiss_kappa,
    latent_from_seed,
    lerp,
    lr_at,
    make_blobs,
    median_filter3,
    nuclei_mask,
    segmentation_metrics,
    stain_concentrations,
    train_gan,
    write_blob_dataset,
)
from .client import ServiceClient

__all__ = [
    "HistosynthError",
    "ServiceClient",
    "Synthesizer",
    "cohen_kappa",
    "decode_label_png",
    "desk_config",
    "encode_label_png",
    "fleiss_kappa",
    "latent_from_seed",
    "lerp",
    "lr_at",
    "make_blobs",
    "median_filter3",
    "nuclei_mask",
    "segmentation_metrics",
    "stain_concentrations",
    "train_gan",
    "write_blob_dataset",
]
