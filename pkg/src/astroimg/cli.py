"""Command-line interface: one subcommand per analysis stage plus ``pipeline``.

Exit codes: 0 success, 2 usage or parameter error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from astroimg import denoise, differential, filterbank, morphology, raster, restore, spectrum
from astroimg.core import rescale_unit
from astroimg.errors import AstroImgError, ParameterError
from astroimg.pipeline import Manifest, run_pipeline
from astroimg.segment import ChanVeseParams, MarkerSet, chan_vese, markers_from_histogram, random_walker, split_overlapping
from astroimg.synth import Noise, SynthGalaxySpec, apply_noise, disk_image, disk_pair_mask, parse_noise, synth_galaxy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _noise_arg(text: str) -> Noise | str:
    if text == "sp":
        return text  # amount supplied with --amount
    try:
        return parse_noise(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _record(args, stage: str, output, parameters: dict, input_path=None) -> None:
    if args.manifest:
        Manifest(args.manifest).record(stage, input_path, output, parameters)


def _write_mask(path, mask) -> None:
    raster.write_labels(path, np.asarray(mask).astype(np.int64))


# ---- subcommands -------------------------------------------------------


def cmd_synth(args) -> None:
    noise = args.noise
    if noise == "sp":
        if args.amount is None:
            raise ParameterError("--noise sp needs --amount")
        noise = Noise("sp", args.amount)
    cx = args.cx if args.cx is not None else args.w // 2
    cy = args.cy if args.cy is not None else args.h // 2
    if args.kind == "galaxy":
        spec = SynthGalaxySpec(width=args.w, height=args.h, center=(cx, cy), axis_ratio=args.axis_ratio,
                               position_angle=args.pa, scale_length=args.scale, peak=args.peak,
                               noise=noise, seed=args.seed, clip=args.clip)
        img = synth_galaxy(spec)
    else:
        if args.kind == "disk":
            clean = disk_image(args.w, args.h, (cx, cy), args.radius, inside=args.peak)
        else:
            clean = args.peak * disk_pair_mask(args.w, args.h, args.radius, args.separation)
        img = apply_noise(clean, noise, args.seed)
        if args.clip:
            img = np.clip(img, 0.0, 1.0)
    raster.write_image(args.output, img)
    params = {k: getattr(args, k) for k in ("kind", "w", "h", "axis_ratio", "pa", "scale", "peak", "radius",
                                            "separation", "seed", "clip")}
    params.update(center=[cx, cy], noise={"kind": noise.kind, "level": noise.level})
    _record(args, "synth", args.output, params)


def cmd_hmaxima(args) -> None:
    img = raster.read_image(args.input)
    if args.minima:
        img = -img
    if not args.raw:
        img = rescale_unit(img)
    mask = morphology.h_maxima(img, args.h, morphology.Connectivity(args.conn))
    _write_mask(args.output, mask)
    print(f"regional maxima pixels {int(mask.sum())}")
    _record(args, "hmaxima", args.output, {"h": args.h, "conn": args.conn, "minima": args.minima,
                                           "rescaled": not args.raw}, args.input)


def cmd_shape_index(args) -> None:
    img = raster.read_image(args.input)
    si = differential.shape_index(img, args.sigma)
    raster.write_image(args.output, si)
    _record(args, "shape-index", args.output, {"sigma": args.sigma}, args.input)
    if args.cap_mask:
        _write_mask(args.cap_mask, differential.cap_mask(si, tol=args.cap_tol))
        _record(args, "shape-index", args.cap_mask, {"sigma": args.sigma, "cap_tol": args.cap_tol}, args.input)


def cmd_gradients(args) -> None:
    img = raster.read_image(args.input)
    gf = differential.gradient(img)
    mag = differential.gradient_magnitude(gf)
    theta = differential.gradient_orientation(gf)
    raster.write_image(args.output, mag)
    _record(args, "gradients", args.output, {"quantity": "magnitude"}, args.input)
    if args.orientation:
        raster.write_image(args.orientation, theta)
        _record(args, "gradients", args.orientation, {"quantity": "orientation"}, args.input)
    if args.rgb:
        raster.write_rgb(args.rgb, differential.orientation_to_rgb(theta, mag))
        _record(args, "gradients", args.rgb, {"quantity": "hsv"}, args.input)


def cmd_filterbank(args) -> None:
    img = raster.read_image(args.input)
    if not args.no_lgn:
        img = filterbank.lgn_image(img, filterbank.DoGParams(args.dog_t, args.dog_dt))
    patches = filterbank.extract_patches(img, args.patch, args.stride)
    bank = filterbank.kmeans_filterbank(patches, args.k, seed=args.seed, max_iter=args.max_iter)
    raster.write_image(args.output, bank.montage())
    params = {k: getattr(args, k) for k in ("k", "patch", "stride", "seed", "max_iter", "dog_t", "dog_dt", "no_lgn")}
    _record(args, "filterbank", args.output, params, args.input)
    if args.centroids_csv:
        lines = ["kernel," + ",".join(f"w{i}" for i in range(bank.patch * bank.patch))]
        for i, c in enumerate(bank.centroids):
            lines.append(f"{i}," + ",".join(repr(float(v)) for v in c.ravel()))
        _write_text(args.centroids_csv, "\n".join(lines) + "\n")
        _record(args, "filterbank", args.centroids_csv, params, args.input)
    print(f"k-means iterations {bank.n_iter}")


def cmd_denoise(args) -> None:
    img = raster.read_image(args.input)
    sigma = denoise.estimate_noise_sigma(img)
    weighting = denoise.Weighting.UNIFORM if args.variant == "fast" else denoise.Weighting.GAUSSIAN
    factor = denoise.FAST_H_FACTOR if args.variant == "fast" else denoise.SLOW_H_FACTOR
    h = args.filter_h if args.filter_h is not None else max(factor * sigma, 1e-6)
    p = denoise.NlmParams(h=h, patch_radius=args.patch_radius, search_radius=args.search_radius,
                          weighting=weighting, sigma_patch=args.sigma_patch, sigma=sigma)
    raster.write_image(args.output, denoise.nlm_denoise(img, p, threads=args.threads))
    print(f"sigma_est {sigma!r}")
    params = {"variant": args.variant, "h": h, "sigma_est": sigma, "patch_radius": args.patch_radius,
              "search_radius": args.search_radius, "sigma_patch": args.sigma_patch}
    _record(args, "denoise", args.output, params, args.input)
    if args.report:
        _write_text(args.report, f"{sigma!r}\n")
        _record(args, "denoise", args.report, params, args.input)


def cmd_deconvolve(args) -> None:
    img = raster.read_image(args.input)
    if args.psf:
        psf = raster.read_image(args.psf)
        psf_desc = {"psf": Path(args.psf).name}
    else:
        psf = restore.gaussian_psf(args.psf_sigma, args.psf_radius)
        psf_desc = {"psf_sigma": args.psf_sigma, "psf_radius": args.psf_radius}
    if args.nsr is not None:
        out = restore.wiener_deconvolve(img, restore.WienerSpec(psf, args.nsr))
        params = dict(psf_desc, nsr=args.nsr)
        report = None
    else:
        if args.nsr_count < 1:
            raise ParameterError("--nsr-count must be >= 1")
        if not 0 < args.nsr_min <= args.nsr_max:
            raise ParameterError("need 0 < --nsr-min <= --nsr-max")
        grid = np.logspace(np.log10(args.nsr_min), np.log10(args.nsr_max), args.nsr_count)
        out, report = restore.self_tuned_wiener(img, psf, grid, threads=args.threads)
        params = dict(psf_desc, nsr_min=args.nsr_min, nsr_max=args.nsr_max, nsr_count=args.nsr_count,
                      chosen_nsr=report.chosen_nsr)
        print(f"chosen_nsr {report.chosen_nsr!r}")
    raster.write_image(args.output, out)
    _record(args, "deconvolve", args.output, params, args.input)
    if args.report:
        if report is None:
            raise ParameterError("--report needs the self-tuned mode (omit --nsr)")
        _write_text(args.report, report.to_csv())
        _record(args, "deconvolve", args.report, params, args.input)


def cmd_segment_cv(args) -> None:
    img = raster.read_image(args.input)
    p = ChanVeseParams(mu=args.mu, lambda1=args.lambda1, lambda2=args.lambda2, dt=args.dt, tol=args.tol,
                       max_iter=args.max_iter)
    res = chan_vese(img, p)
    _write_mask(args.output, res.mask)
    params = {"mu": p.mu, "lambda1": p.lambda1, "lambda2": p.lambda2, "dt": p.dt, "tol": p.tol,
              "max_iter": p.max_iter, "iterations_run": res.iterations_run, "converged": res.converged}
    _record(args, "segment-cv", args.output, params, args.input)
    if args.energy:
        _write_text(args.energy, res.energy_csv())
        _record(args, "segment-cv", args.energy, params, args.input)
    print(f"iterations {res.iterations_run} converged {res.converged}")


def cmd_segment_rw(args) -> None:
    img = raster.read_image(args.input)
    if args.markers:
        markers = MarkerSet.from_array(raster.read_labels(args.markers), derivation="file")
        mdesc = {"markers": Path(args.markers).name}
    else:
        markers = markers_from_histogram(img, args.low_q, args.high_q)
        mdesc = {"markers": "histogram", "low_q": args.low_q, "high_q": args.high_q}
    labels, probs = random_walker(img, markers, beta=args.beta, threads=args.threads)
    _write_mask(args.output, labels)
    params = dict(mdesc, beta=args.beta)
    _record(args, "segment-rw", args.output, params, args.input)
    if args.probs:
        raster.write_image(args.probs, probs.max(axis=0))
        _record(args, "segment-rw", args.probs, params, args.input)


def cmd_watershed_split(args) -> None:
    mask = (raster.read_image(args.input) > args.threshold).astype(np.int64)
    labels, distance = split_overlapping(mask, args.min_distance, args.peak_h, morphology.Connectivity(args.conn))
    if labels.max() > 255 and raster.format_for_path(args.output) is not raster.RasterFormat.F32:
        raise ParameterError(f"{int(labels.max())} labels do not fit a PGM; write .f32 instead")
    _write_mask(args.output, labels)
    params = {"threshold": args.threshold, "min_distance": args.min_distance, "peak_h": args.peak_h,
              "conn": args.conn, "n_labels": int(labels.max())}
    _record(args, "watershed-split", args.output, params, args.input)
    if args.distance:
        raster.write_image(args.distance, distance)
        _record(args, "watershed-split", args.distance, params, args.input)
    print(f"labels {int(labels.max())}")


def cmd_power_spectrum(args) -> None:
    img = raster.read_image(args.input)
    if args.invert:
        img = img.max() - img
    window = None if args.window == "none" else args.window
    p2 = spectrum.power_spectrum_2d(img, window)
    spec = spectrum.radial_average(p2, args.nbins)
    _write_text(args.output, spec.to_csv())
    params = {"window": window, "nbins": int(spec.counts.size), "invert": args.invert}
    _record(args, "power-spectrum", args.output, params, args.input)
    if args.power2d:
        raster.write_image(args.power2d, np.log10(p2 + 1e-300) if args.log else p2)
        _record(args, "power-spectrum", args.power2d, dict(params, log=args.log), args.input)


def cmd_pipeline(args) -> None:
    if args.input is None and not args.demo:
        raise ParameterError("give an input image or --demo")
    if args.input is not None and args.demo:
        raise ParameterError("--demo takes no input image")
    image = raster.read_image(args.input) if args.input else None
    run_pipeline(args.outdir, image=image, seed=args.seed, threads=args.threads, size=args.size)


# ---- parser ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="astroimg", description="Astronomical image analysis toolkit.", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, func, helptext):
        p = sub.add_parser(name, help=helptext, description=helptext, formatter_class=fmt)
        p.set_defaults(func=func)
        p.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
        p.add_argument("--manifest", default=None, help="append a JSON-lines manifest entry per artifact")
        return p

    def io(p, out_help="output raster (.pgm or .f32)"):
        p.add_argument("input", help="input raster (.pgm or .f32)")
        p.add_argument("-o", "--output", required=True, help=out_help)

    p = command("synth", cmd_synth, "Generate a synthetic galaxy, disk, or overlapping-disk image.")
    p.add_argument("-o", "--output", required=True, help="output raster (.pgm or .f32)")
    p.add_argument("--seed", type=int, required=True, help="noise RNG seed")
    p.add_argument("--kind", choices=["galaxy", "disk", "pair"], default="galaxy", help="scene type")
    p.add_argument("--w", type=int, default=128, help="width in pixels")
    p.add_argument("--h", type=int, default=128, help="height in pixels")
    p.add_argument("--cx", type=float, default=None, help="centre x (default width // 2)")
    p.add_argument("--cy", type=float, default=None, help="centre y (default height // 2)")
    p.add_argument("--axis-ratio", type=float, default=0.6, help="galaxy minor/major axis ratio")
    p.add_argument("--pa", type=float, default=0.5, help="galaxy position angle in radians")
    p.add_argument("--scale", type=float, default=10.0, help="galaxy exponential scale length in pixels")
    p.add_argument("--peak", type=float, default=0.9, help="peak (galaxy) or inside (disk) intensity")
    p.add_argument("--radius", type=float, default=20.0, help="disk radius in pixels (disk, pair)")
    p.add_argument("--separation", type=float, default=14.0, help="centre distance for --kind pair")
    p.add_argument("--noise", type=_noise_arg, default="none", help="none, gauss:<sigma>, sp:<amount>, or sp with --amount")
    p.add_argument("--amount", type=float, default=None, help="salt-and-pepper fraction for --noise sp")
    p.add_argument("--clip", action="store_true", help="clamp the result to [0, 1]")

    p = command("hmaxima", cmd_hmaxima, "Regional maxima of contrast at least h (h-maxima transform).")
    io(p, "output mask (.pgm stores 0/1 labels)")
    p.add_argument("--h", type=float, default=0.05, help="contrast threshold, as a fraction of the dynamic range")
    p.add_argument("--conn", type=int, choices=[4, 8], default=8, help="pixel connectivity")
    p.add_argument("--minima", action="store_true", help="find h-minima instead (negates the image)")
    p.add_argument("--raw", action="store_true", help="apply h in raw intensity units (no [0, 1] rescale)")

    p = command("shape-index", cmd_shape_index, "Shape index map from the smoothed Hessian.")
    io(p, "output shape index (.f32; -2 marks flat pixels)")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian scale in pixels")
    p.add_argument("--cap-mask", default=None, help="also write the cap-region mask here")
    p.add_argument("--cap-tol", type=float, default=0.05, help="tolerance around shape index 1 for the cap mask")

    p = command("gradients", cmd_gradients, "Gradient magnitude and orientation.")
    io(p, "output gradient magnitude raster")
    p.add_argument("--orientation", default=None, help="also write orientation in radians (.f32)")
    p.add_argument("--rgb", default=None, help="also write an HSV orientation rendering (.ppm)")

    p = command("filterbank", cmd_filterbank, "Learn a k-means filter bank from image patches.")
    io(p, "output kernel montage raster")
    p.add_argument("--seed", type=int, required=True, help="k-means++ seed")
    p.add_argument("--k", type=int, default=16, help="number of kernels")
    p.add_argument("--patch", type=int, default=11, help="patch side in pixels (odd)")
    p.add_argument("--stride", type=int, default=1, help="patch sampling stride")
    p.add_argument("--max-iter", type=int, default=100, help="Lloyd iteration cap")
    p.add_argument("--dog-t", type=float, default=1.0, help="DoG base scale (variance, pixels^2)")
    p.add_argument("--dog-dt", type=float, default=1.0, help="DoG scale step (variance, pixels^2)")
    p.add_argument("--no-lgn", action="store_true", help="skip the DoG centre-surround stage")
    p.add_argument("--centroids-csv", default=None, help="also write kernel weights as CSV")

    p = command("denoise", cmd_denoise, "Non-local means denoising; prints the noise estimate.")
    io(p)
    p.add_argument("--variant", choices=["fast", "slow"], default="slow", help="fast: uniform patch weights; slow: Gaussian")
    p.add_argument("--filter-h", type=float, default=None, help="filtering strength (default 1.15 or 0.8 times sigma_est)")
    p.add_argument("--patch-radius", type=int, default=3, help="patch radius in pixels")
    p.add_argument("--search-radius", type=int, default=10, help="search window radius in pixels")
    p.add_argument("--sigma-patch", type=float, default=None, help="Gaussian patch weight scale (default patch_radius / 2)")
    p.add_argument("--report", default=None, help="write the noise estimate to this text file")

    p = command("deconvolve", cmd_deconvolve, "Wiener deconvolution, self-tuned unless --nsr is given.")
    io(p)
    p.add_argument("--psf", default=None, help="PSF raster (overrides --psf-sigma)")
    p.add_argument("--psf-sigma", type=float, default=2.0, help="Gaussian PSF sigma in pixels")
    p.add_argument("--psf-radius", type=int, default=None, help="Gaussian PSF radius (default ceil(4 sigma))")
    p.add_argument("--nsr", type=float, default=None, help="fixed noise-to-signal ratio (disables self-tuning)")
    p.add_argument("--nsr-min", type=float, default=1e-4, help="smallest grid candidate")
    p.add_argument("--nsr-max", type=float, default=1.0, help="largest grid candidate")
    p.add_argument("--nsr-count", type=int, default=25, help="number of log-spaced candidates")
    p.add_argument("--report", default=None, help="write the candidate scores as CSV")

    p = command("segment-cv", cmd_segment_cv, "Chan-Vese two-phase segmentation.")
    io(p, "output mask (.pgm stores 0/1 labels)")
    p.add_argument("--mu", type=float, default=0.5, help="length penalty")
    p.add_argument("--lambda1", type=float, default=1.0, help="inside fidelity weight")
    p.add_argument("--lambda2", type=float, default=2.0, help="outside fidelity weight")
    p.add_argument("--dt", type=float, default=0.5, help="time step")
    p.add_argument("--tol", type=float, default=1e-3, help="convergence tolerance on the level set change")
    p.add_argument("--max-iter", type=int, default=200, help="iteration cap")
    p.add_argument("--energy", default=None, help="write the energy trace as CSV")

    p = command("segment-rw", cmd_segment_rw, "Random walker segmentation.")
    io(p, "output label map")
    p.add_argument("--beta", type=float, default=90.0, help="edge weight sharpness")
    p.add_argument("--markers", default=None, help="marker label image (0 = unmarked); default uses histogram tails")
    p.add_argument("--low-q", type=float, default=0.05, help="background quantile for histogram markers")
    p.add_argument("--high-q", type=float, default=0.95, help="foreground quantile for histogram markers")
    p.add_argument("--probs", default=None, help="also write the winning label probability (.f32)")

    p = command("watershed-split", cmd_watershed_split, "Split touching objects by distance-transform watershed.")
    io(p, "output label map")
    p.add_argument("--threshold", type=float, default=0.0, help="pixels above this are foreground")
    p.add_argument("--min-distance", type=float, default=5.0, help="minimum distance between peak markers")
    p.add_argument("--peak-h", type=float, default=1.0, help="h for distance-peak detection, in pixels")
    p.add_argument("--conn", type=int, choices=[4, 8], default=8, help="pixel connectivity")
    p.add_argument("--distance", default=None, help="also write the distance transform (.f32)")

    p = command("power-spectrum", cmd_power_spectrum, "Radially averaged power spectrum as CSV.")
    io(p, "output CSV (bin, freq, power, count)")
    p.add_argument("--window", choices=["none", "hann"], default="none", help="apodisation window")
    p.add_argument("--nbins", type=int, default=None, help="radial bins (default min(W, H) // 2)")
    p.add_argument("--invert", action="store_true", help="invert grey levels first")
    p.add_argument("--power2d", default=None, help="also write the centred 2-D power (.f32)")
    p.add_argument("--log", action="store_true", help="write log10 power for --power2d")

    p = command("pipeline", cmd_pipeline, "Run every stage in order, one artifact per stage.")
    p.add_argument("input", nargs="?", default=None, help="input raster; omit with --demo")
    p.add_argument("--demo", action="store_true", help="use the built-in synthetic galaxy scene")
    p.add_argument("--outdir", default="pipeline_out", help="artifact directory")
    p.add_argument("--seed", type=int, default=0, help="seed for the demo scene and k-means")
    p.add_argument("--size", type=int, default=128, help="demo scene side in pixels")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits 2 on usage errors
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except ParameterError as exc:
        print(f"astroimg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AstroImgError, OSError) as exc:
        print(f"astroimg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
