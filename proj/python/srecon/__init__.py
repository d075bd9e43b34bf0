"""Score-based medical image reconstruction toolbox.

Thin Python layer over the C++ core: forward operators (undersampled MRI,
sparse-view CT), variance-exploding diffusion schedules, posterior samplers,
a Charbonnier-TV baseline, and image-quality metrics.
"""

from srecon._core import (
    ald_sample,
    data_consistency,
    dft2,
    fbp,
    gaussian_score_model,
    load_checkpoint_model,
    load_image_file,
    make_phantoms,
    make_schedule,
    mask_gaussian1d,
    mask_gaussian2d,
    mask_poisson_disk,
    mask_radial,
    mri_adjoint,
    mri_forward,
    pc_sample,
    psnr,
    radon,
    receptive_field_of_depth,
    reconstruct_tv,
    save_image_file,
    sparse_view_angles,
    ssim,
    ScoreModel,
)

__all__ = [
    "ald_sample",
    "data_consistency",
    "dft2",
    "fbp",
    "gaussian_score_model",
    "load_checkpoint_model",
    "load_image_file",
    "make_phantoms",
    "make_schedule",
    "mask_gaussian1d",
    "mask_gaussian2d",
    "mask_poisson_disk",
    "mask_radial",
    "mri_adjoint",
    "mri_forward",
    "pc_sample",
    "psnr",
    "radon",
    "receptive_field_of_depth",
    "reconstruct_tv",
    "save_image_file",
    "sparse_view_angles",
    "ssim",
    "ScoreModel",
]
