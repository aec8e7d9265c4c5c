#!/usr/bin/env python3
"""Convert the public .mat scene files into the .npy layout hyperseg reads.

Usage: convert_mat.py CUBE.mat GT.mat OUT_DIR NAME

Writes OUT_DIR/NAME_cube.npy (float32, H x W x L) and OUT_DIR/NAME_gt.npy
(int32, H x W). NAME is one of salinas, salinasA, paviaC, paviaU, matching
the file names the acceptance suite looks for under HYPERSEG_DATA.
"""
import argparse
import os

import numpy as np
from scipy.io import loadmat


def only_array(path, ndim):
    arrays = {
        k: v
        for k, v in loadmat(path).items()
        if not k.startswith("__") and isinstance(v, np.ndarray) and v.ndim == ndim
    }
    if len(arrays) != 1:
        raise SystemExit(f"{path}: expected one {ndim}-D array, found {sorted(arrays)}")
    return next(iter(arrays.values()))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("cube")
    parser.add_argument("gt")
    parser.add_argument("out_dir")
    parser.add_argument("name")
    args = parser.parse_args()

    cube = np.ascontiguousarray(only_array(args.cube, 3), dtype="<f4")
    gt = np.ascontiguousarray(only_array(args.gt, 2), dtype="<i4")
    if cube.shape[:2] != gt.shape:
        raise SystemExit(f"cube {cube.shape} and ground truth {gt.shape} disagree")
    os.makedirs(args.out_dir, exist_ok=True)
    np.save(os.path.join(args.out_dir, f"{args.name}_cube.npy"), cube)
    np.save(os.path.join(args.out_dir, f"{args.name}_gt.npy"), gt)
    print(f"{args.name}: cube {cube.shape}, {len(np.unique(gt[gt > 0]))} classes")


if __name__ == "__main__":
    main()
