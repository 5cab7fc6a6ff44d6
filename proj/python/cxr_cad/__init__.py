"""Chest X-ray three-class CAD pipeline (C++ core)."""

from ._core import (
    CxrError,
    bilateral_filter,
    generate_phantom,
    hist_equalize,
    load_image,
    make_phantoms,
    param_count,
    preprocess,
    remove_diaphragm,
    report,
    run,
    run_preprocess,
    save_image,
    stratified_split,
    vgg16_transfer_param_count,
    wald_ci,
)

__all__ = [
    "CxrError",
    "bilateral_filter",
    "generate_phantom",
    "hist_equalize",
    "load_image",
    "make_phantoms",
    "param_count",
    "preprocess",
    "remove_diaphragm",
    "report",
    "run",
    "run_preprocess",
    "save_image",
    "stratified_split",
    "vgg16_transfer_param_count",
    "wald_ci",
]
