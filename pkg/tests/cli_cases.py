"""A run of every CLI subcommand on small fixtures, for determinism checks."""

from __future__ import annotations

import os
from pathlib import Path

from astroimg.cli import main

# (argv, files it writes); inputs come from earlier steps, paths are relative to the work dir
STEPS = [
    ("synth --kind galaxy --w 40 --h 40 --scale 5 --noise gauss:0.1 --seed 7 -o g.f32", ["g.f32"]),
    ("synth --kind disk --w 40 --h 40 --radius 10 --noise sp:0.05 --seed 3 -o d.f32", ["d.f32"]),
    ("synth --kind pair --w 64 --h 48 --radius 10 --separation 14 --seed 0 -o p.pgm", ["p.pgm"]),
    ("hmaxima g.f32 -o hm.pgm", ["hm.pgm"]),
    ("shape-index g.f32 -o si.f32 --cap-mask cap.pgm", ["si.f32", "cap.pgm"]),
    ("gradients g.f32 -o gm.f32 --orientation go.f32 --rgb go.ppm", ["gm.f32", "go.f32", "go.ppm"]),
    ("filterbank g.f32 -o fb.f32 --seed 5 --k 4 --patch 5 --stride 3 --centroids-csv fb.csv", ["fb.f32", "fb.csv"]),
    ("denoise g.f32 -o dn.f32 --patch-radius 1 --search-radius 3 --report sigma.txt", ["dn.f32", "sigma.txt"]),
    ("deconvolve g.f32 -o dc.f32 --psf-sigma 1 --report wiener.csv", ["dc.f32", "wiener.csv"]),
    ("segment-cv d.f32 -o cv.pgm --energy energy.csv", ["cv.pgm", "energy.csv"]),
    ("segment-rw d.f32 -o rw.pgm --probs rw.f32", ["rw.pgm", "rw.f32"]),
    ("watershed-split p.pgm -o ws.pgm --distance ws.f32", ["ws.pgm", "ws.f32"]),
    ("power-spectrum g.f32 -o ps.csv --window hann --power2d ps.f32 --log", ["ps.csv", "ps.f32"]),
    ("pipeline --demo --size 48 --outdir pipe", []),
]

PIPELINE_FILES = [
    "00_input.f32", "01_hmaxima.pgm", "02_shape_index.f32", "03_gradients.ppm", "04_filterbank_raw.f32",
    "04_filterbank_lgn.f32", "05_denoise.f32", "05_sigma.txt", "06_deconvolve.f32", "06_wiener.csv",
    "07_chan_vese.pgm", "07_energy.csv", "08_random_walker.pgm", "09_power_spectrum.csv", "10_watershed.pgm",
    "manifest.jsonl",
]


def run_all(workdir, threads: int) -> dict[str, bytes]:
    """Run every step inside ``workdir`` and return the artifacts' bytes by name."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    old = os.getcwd()
    os.chdir(workdir)
    try:
        names = []
        for argv, outputs in STEPS:
            code = main(argv.split() + ["--threads", str(threads), "--manifest", "manifest.jsonl"])
            if code != 0:
                raise AssertionError(f"{argv!r} exited {code}")
            names += outputs
        names += ["manifest.jsonl"] + [f"pipe/{f}" for f in PIPELINE_FILES]
        return {n: Path(n).read_bytes() for n in names}
    finally:
        os.chdir(old)
