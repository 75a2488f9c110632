"""Writes reference NIfTI-1 files with nibabel for the reader tests.

Voxel (x, y, z) of every fixture holds 0.25 * (x + 4y + 16z) - 3 before any
datatype scaling.
"""
import nibabel as nib
import numpy as np

x, y, z = np.meshgrid(np.arange(4), np.arange(4), np.arange(4), indexing="ij")
values = (0.25 * (x + 4 * y + 16 * z) - 3.0).astype(np.float32)
affine = np.array(
    [[2.0, 0.0, 0.0, -10.0], [0.0, 3.0, 0.0, 5.0], [0.0, 0.0, 4.0, 7.5], [0.0, 0.0, 0.0, 1.0]]
)

img = nib.Nifti1Image(values, affine)
img.set_sform(affine, code=1)
img.set_qform(affine, code=1)
nib.save(img, "ref_float32.nii")

be = nib.Nifti1Image(values, affine, header=nib.Nifti1Header(endianness=">"))
be.set_sform(affine, code=1)
be.set_data_dtype(np.dtype(">f4"))
nib.save(be, "ref_float32_be.nii")

# int16 storage with slope 0.25 and intercept -3 reproduces the same values
raw = (x + 4 * y + 16 * z).astype(np.int16)
scaled = nib.Nifti1Image(raw, affine)
scaled.set_sform(affine, code=1)
scaled.header.set_data_dtype(np.int16)
scaled.header.set_slope_inter(0.25, -3.0)
nib.save(scaled, "ref_int16_scaled.nii.gz")

# qform only, rotated 90 degrees about z
rot = np.array([[0.0, -2.0, 0.0, 1.0], [2.0, 0.0, 0.0, 2.0], [0.0, 0.0, 2.0, 3.0], [0.0, 0.0, 0.0, 1.0]])
q = nib.Nifti1Image(values, None)
q.set_qform(rot, code=1)
q.set_sform(None, code=0)
nib.save(q, "ref_qform_rot.nii")

mask = ((x + y + z) % 3 == 0).astype(np.uint8)
nib.save(nib.Nifti1Image(mask, affine), "ref_mask_uint8.nii.gz")
