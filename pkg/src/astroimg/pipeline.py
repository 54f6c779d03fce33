"""End-to-end demo pipeline and the JSON-lines artifact manifest."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from astroimg import denoise, differential, filterbank, morphology, raster, restore, spectrum
from astroimg.core import rescale_unit
from astroimg.segment import ChanVeseParams, chan_vese, markers_from_histogram, random_walker, split_overlapping
from astroimg.synth import demo_scene

__all__ = ["Manifest", "sha256_file", "run_pipeline", "PIPELINE_DEFAULTS"]

# values used by every stage unless overridden
PIPELINE_DEFAULTS = {
    "h": 0.05,
    "shape_sigma": 1.0,
    "filterbank_k": 16,
    "filterbank_patch": 11,
    "filterbank_stride": 1,
    "psf_sigma": 2.0,
    "cv_mu": 0.5,
    "cv_lambda1": 1.0,
    "cv_lambda2": 2.0,
    "cv_max_iter": 200,
    "rw_beta": 90.0,
}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Appends one JSON object per artifact: stage, input_sha256, output, parameters."""

    def __init__(self, path, base: Path | None = None):
        self.path = Path(path)
        self.base = base

    def record(self, stage: str, input_path, output, parameters: dict) -> None:
        out = Path(output)
        if self.base is not None:
            out = Path(os.path.relpath(out, self.base))
        entry = {
            "stage": stage,
            "input_sha256": sha256_file(input_path) if input_path is not None else None,
            "output": out.as_posix(),
            "parameters": parameters,
        }
        with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_pipeline(outdir, image=None, seed: int = 0, threads: int = 1, size: int = 128, log=print) -> Path:
    """Run every stage in order on ``image`` (or the demo scene), one artifact per stage.

    Returns the manifest path. Artifacts are named ``NN_<stage>.<ext>`` inside
    ``outdir``; an existing manifest there is replaced.
    """
    d = PIPELINE_DEFAULTS
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out / "manifest.jsonl", base=out)
    if manifest.path.exists():
        manifest.path.unlink()

    if image is None:
        image = demo_scene(size=size, seed=seed)
        source = {"demo": True, "size": size, "seed": seed}
    else:
        source = {"demo": False}
    src = out / "00_input.f32"
    raster.write_image(src, image)
    manifest.record("input", None, src, source)
    # later stages read back the float32 artifact so reruns from disk agree
    img = raster.read_image(src)

    def emit(stage, path, params, input_path=src):
        manifest.record(stage, input_path, path, params)
        log(f"{stage}: {path.name}")

    p = out / "01_hmaxima.pgm"
    mask = morphology.h_maxima(rescale_unit(img), d["h"])
    raster.write_labels(p, mask.astype(np.int64))
    emit("hmaxima", p, {"h": d["h"], "rescaled": True, "conn": 8})

    p = out / "02_shape_index.f32"
    raster.write_image(p, differential.shape_index(img, d["shape_sigma"]))
    emit("shape-index", p, {"sigma": d["shape_sigma"]})

    p = out / "03_gradients.ppm"
    gf = differential.gradient(img)
    raster.write_rgb(p, differential.orientation_to_rgb(differential.gradient_orientation(gf), differential.gradient_magnitude(gf)))
    emit("gradients", p, {"rendering": "hsv"})

    # one bank from the raw image and one from its centre-surround (LGN) version
    for tag, source_img in (("raw", img), ("lgn", filterbank.lgn_image(img))):
        p = out / f"04_filterbank_{tag}.f32"
        patches = filterbank.extract_patches(source_img, d["filterbank_patch"], d["filterbank_stride"])
        bank = filterbank.kmeans_filterbank(patches, d["filterbank_k"], seed=seed)
        raster.write_image(p, bank.montage())
        emit("filterbank", p, {"k": d["filterbank_k"], "patch": d["filterbank_patch"], "stride": d["filterbank_stride"],
                               "seed": seed, "source": tag})

    p = out / "05_denoise.f32"
    sigma = denoise.estimate_noise_sigma(img)
    h = max(denoise.SLOW_H_FACTOR * sigma, 1e-6)
    nlm = denoise.NlmParams(h=h, weighting=denoise.Weighting.GAUSSIAN, sigma=sigma)
    denoised = denoise.nlm_denoise(img, nlm, threads=threads)
    raster.write_image(p, denoised)
    _write_text(out / "05_sigma.txt", f"{sigma!r}\n")
    emit("denoise", p, {"sigma_est": sigma, "h": h, "weighting": "gaussian", "patch_radius": 3, "search_radius": 10})
    log(f"sigma_est {sigma!r}")

    p = out / "06_deconvolve.f32"
    psf = restore.gaussian_psf(d["psf_sigma"])
    restored, report = restore.self_tuned_wiener(img, psf, threads=threads)
    raster.write_image(p, restored)
    _write_text(out / "06_wiener.csv", report.to_csv())
    emit("deconvolve", p, {"psf_sigma": d["psf_sigma"], "chosen_nsr": report.chosen_nsr})

    p = out / "07_chan_vese.pgm"
    cvp = ChanVeseParams(mu=d["cv_mu"], lambda1=d["cv_lambda1"], lambda2=d["cv_lambda2"], max_iter=d["cv_max_iter"])
    cv = chan_vese(img, cvp)
    raster.write_labels(p, cv.mask)
    _write_text(out / "07_energy.csv", cv.energy_csv())
    emit("segment-cv", p, {"mu": cvp.mu, "lambda1": cvp.lambda1, "lambda2": cvp.lambda2, "max_iter": cvp.max_iter,
                           "iterations_run": cv.iterations_run, "converged": cv.converged})

    p = out / "08_random_walker.pgm"
    labels, _ = random_walker(img, markers_from_histogram(img), beta=d["rw_beta"], threads=threads)
    raster.write_labels(p, labels)
    emit("segment-rw", p, {"beta": d["rw_beta"], "markers": "histogram"})

    p = out / "09_power_spectrum.csv"
    spec = spectrum.radial_average(spectrum.power_spectrum_2d(img))
    _write_text(p, spec.to_csv())
    emit("power-spectrum", p, {"window": None, "nbins": int(spec.counts.size)})

    p = out / "10_watershed.pgm"
    rw_path = out / "08_random_walker.pgm"
    # the random-walker foreground is compact; the Chan-Vese phase keeps background speckle
    fg = (labels == labels.max()).astype(np.int64)
    if fg.any():
        split, _ = split_overlapping(fg)
    else:
        split = np.zeros_like(fg)
    raster.write_labels(p, np.minimum(split, 255))
    emit("watershed-split", p, {"source": rw_path.name, "n_labels": int(split.max())}, input_path=rw_path)
    return manifest.path
