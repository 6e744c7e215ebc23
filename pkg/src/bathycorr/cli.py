"""Command-line pipeline: simulate | pair | train | predict | evaluate | section | report.

Configuration comes from an INI-style file (key=value under section headers
named after the subcommands) with CLI flags taking precedence. Validation is
strict — unknown or out-of-range parameters are rejected before any input
file is touched. All outputs are deterministic for a given config and seed:
no timestamps, stable float formatting, sorted file scans.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 numerical
failure (degenerate fits and the like).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation, pairing, simulate, svr
from .backend import backend_name
from .errors import ConfigError, InputError, NumericalError
from .pointcloud import read_cloud, write_cloud

__all__ = ["main", "run"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

_BOOL_STATES = {
    "1": True, "true": True, "yes": True, "on": True,
    "0": False, "false": False, "no": False, "off": False,
}

_SECTION_KEYS = {
    "simulate": {
        "preset", "count", "seed", "refractive_index", "extent_x", "extent_y",
        "depth", "depth_from", "depth_to", "mean_depth", "amplitude",
        "wavelength", "grid_file", "camera_height", "camera_spacing",
        "camera_margin", "cameras_file", "views", "noise_sigma",
        "outlier_rate", "noise_seed",
    },
    "pair": {
        "image_cloud", "reference_cloud", "max_radius", "sign_convention",
        "output",
    },
    "train": {
        "samples", "fraction", "seed", "c", "epsilon", "tol", "max_iter",
        "standardize", "baseline", "min_sample_depth", "max_sample_depth",
    },
    "predict": {"model", "cloud", "output"},
    "evaluate": {
        "reference_cloud", "apparent_cloud", "corrected_cloud", "model",
        "normal_mode", "normal_scale", "projection_scale", "max_depth",
        "bin_width", "train_label", "test_label",
    },
    "section": {"clouds", "polyline", "half_width", "station_step", "name"},
    "report": {"inputs"},
}


class _Cfg:
    """One command's merged view of config-file section + flag overrides."""

    def __init__(self, parser: configparser.ConfigParser | None, section: str,
                 overrides: dict | None = None):
        self.section = section
        self.values: dict[str, str] = {}
        if parser is not None and parser.has_section(section):
            extra = set(parser[section]) - _SECTION_KEYS[section]
            if extra:
                raise ConfigError(
                    f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}"
                )
            self.values.update({k: v for k, v in parser.items(section)})
        for key, value in (overrides or {}).items():
            if value is not None:
                self.values[key] = str(value)

    def raw(self, key, default=None, required=False):
        if key in self.values:
            return self.values[key]
        if required:
            raise ConfigError(f"missing required config key [{self.section}] {key}")
        return default

    def getstr(self, key, default=None, required=False, choices=None):
        v = self.raw(key, default, required)
        if v is not None and choices is not None and v not in choices:
            raise ConfigError(
                f"[{self.section}] {key} must be one of {sorted(choices)}, got {v!r}"
            )
        return v

    def getfloat(self, key, default=None, required=False):
        v = self.raw(key, default, required)
        if v is None:
            return None
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.section}] {key} must be a number, got {v!r}") from None

    def getint(self, key, default=None, required=False):
        v = self.raw(key, default, required)
        if v is None:
            return None
        try:
            return int(str(v))
        except ValueError:
            raise ConfigError(f"[{self.section}] {key} must be an integer, got {v!r}") from None

    def getbool(self, key, default=None):
        v = self.raw(key, default)
        if v is None:
            return None
        if isinstance(v, bool):
            return v
        try:
            return _BOOL_STATES[str(v).lower()]
        except KeyError:
            raise ConfigError(f"[{self.section}] {key} must be a boolean, got {v!r}") from None

    def getpath(self, key, default=None, required=False, must_exist=True):
        v = self.raw(key, default, required)
        if v is None:
            return None
        path = Path(v)
        if must_exist and not path.exists():
            raise ConfigError(f"[{self.section}] {key}: no such file: {path}")
        return path


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


# --------------------------------------------------------------------------
# subcommands


def _cmd_simulate(cfg: _Cfg, out_dir: Path) -> int:
    preset = cfg.getstr("preset", "slope",
                        choices={"slope", "plane", "flat", "sinusoid", "grid"})
    count = cfg.getint("count", 50000)
    _require(count >= 1, "[simulate] count must be >= 1")
    seed = cfg.getint("seed", 0)
    n_refr = cfg.getfloat("refractive_index", simulate.DEFAULT_REFRACTIVE_INDEX)
    _require(n_refr >= 1.0, "[simulate] refractive_index must be >= 1")
    extent_x = cfg.getfloat("extent_x", 200.0)
    extent_y = cfg.getfloat("extent_y", 100.0)
    _require(extent_x > 0 and extent_y > 0, "[simulate] extents must be positive")
    views = cfg.getint("views", 2)
    _require(views >= 2, "[simulate] views must be >= 2")
    sigma = cfg.getfloat("noise_sigma", 0.0)
    rate = cfg.getfloat("outlier_rate", 0.0)
    _require(sigma >= 0, "[simulate] noise_sigma must be >= 0")
    _require(0 <= rate < 1, "[simulate] outlier_rate must be in [0, 1)")
    noise_seed = cfg.getint("noise_seed", seed + 1)

    domain = (0.0, extent_x, 0.0, extent_y)
    if preset == "slope":
        depth_from = cfg.getfloat("depth_from", 1.0)
        depth_to = cfg.getfloat("depth_to", 14.8)
        _require(depth_from > 0 and depth_to > 0, "[simulate] depths must be positive")
        seabed = simulate.SlopeSeabed(depth_from, depth_to, domain)
    elif preset in ("plane", "flat"):
        depth = cfg.getfloat("depth", 5.0)
        _require(depth > 0, "[simulate] depth must be positive")
        seabed = simulate.PlaneSeabed(depth, domain)
    elif preset == "sinusoid":
        mean_depth = cfg.getfloat("mean_depth", 5.0)
        amplitude = cfg.getfloat("amplitude", 1.0)
        wavelength = cfg.getfloat("wavelength", 25.0)
        _require(mean_depth > amplitude >= 0,
                 "[simulate] need mean_depth > amplitude >= 0")
        _require(wavelength > 0, "[simulate] wavelength must be positive")
        seabed = simulate.SinusoidSeabed(mean_depth, amplitude, wavelength, domain)
    else:  # grid
        grid_file = cfg.getpath("grid_file", required=True)
        seabed = simulate.GridSeabed(read_cloud(grid_file))
        domain = seabed.domain

    cameras_file = cfg.getpath("cameras_file", must_exist=True)
    if cameras_file is not None:
        cameras = read_cloud(cameras_file).xyz
    else:
        height = cfg.getfloat("camera_height", 100.0)
        spacing = cfg.getfloat("camera_spacing", 10.0)
        margin = cfg.getfloat("camera_margin", spacing)
        _require(height > 0 and spacing > 0, "[simulate] camera geometry must be positive")
        cameras = simulate.camera_grid(domain, spacing, height, margin)

    scene = simulate.SimScene(cameras, seabed, n_refr)
    result = simulate.simulate_scene(scene, count, seed, k_views=views)
    if sigma > 0 or rate > 0:
        result = simulate.add_noise(result, sigma, rate, noise_seed)

    write_cloud(result.true_cloud, out_dir / "true_cloud.xyz")
    write_cloud(result.apparent_cloud, out_dir / "apparent_cloud.xyz")
    _write_json(out_dir / "simulate_meta.json", {
        "command": "simulate",
        "preset": preset,
        "count": count,
        "seed": seed,
        "views": views,
        "noise_sigma": sigma,
        "outlier_rate": rate,
        "noise_seed": noise_seed if (sigma > 0 or rate > 0) else None,
        "scene": scene.describe(),
    })
    logger.info("simulate: %d points, seabed %s, %d cameras",
                count, seabed.describe()["kind"], cameras.shape[0])
    print(f"simulate: wrote {count} point pairs to {out_dir}")
    return EXIT_OK


def _cmd_pair(cfg: _Cfg, out_dir: Path) -> int:
    image_path = cfg.getpath("image_cloud", required=True)
    reference_path = cfg.getpath("reference_cloud", required=True)
    max_radius = cfg.getfloat("max_radius", 1.0)
    _require(max_radius > 0, "[pair] max_radius must be positive")
    convention = cfg.getstr("sign_convention", "negative-down",
                            choices={"negative-down", "positive-down"})
    output = out_dir / cfg.getstr("output", "samples.csv")

    image = read_cloud(image_path)
    reference = read_cloud(reference_path)
    raw = pairing.reduce_to_reference(image, reference, max_radius)
    filtered = pairing.filter_samples(raw, positive_down=(convention == "positive-down"))
    pairing.write_samples(filtered, output)
    prov = filtered.provenance
    print(
        "pair: {input} reference points -> {retained} samples "
        "(unmatched {removed_unmatched}, rule A {removed_rule_a}, "
        "rule B {removed_rule_b})".format(**prov)
    )
    return EXIT_OK


def _cmd_train(cfg: _Cfg, out_dir: Path) -> int:
    samples_path = cfg.getpath("samples", required=True)
    fraction = cfg.getfloat("fraction", 0.3)
    _require(0 < fraction <= 1, "[train] fraction must be in (0, 1]")
    seed = cfg.getint("seed", 0)
    hp_kwargs = dict(
        c=cfg.getfloat("c", 1.0),
        epsilon=cfg.getfloat("epsilon", 0.0),
        tol=cfg.getfloat("tol", 1e-9),
        max_iter=cfg.getint("max_iter", 100000),
        standardize=bool(cfg.getbool("standardize", False)),
    )
    try:
        hp = svr.SvrHyperparams(**hp_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[train] {exc}") from None
    baseline = cfg.getbool("baseline", True)
    min_depth = cfg.getfloat("min_sample_depth")
    max_depth = cfg.getfloat("max_sample_depth")

    samples = pairing.read_samples(samples_path)
    if min_depth is not None or max_depth is not None:
        depth = -samples.z  # positive meters below surface
        keep = np.ones(len(samples), dtype=bool)
        if min_depth is not None:
            keep &= depth >= min_depth
        if max_depth is not None:
            keep &= depth <= max_depth
        prov = dict(samples.provenance)
        prov["depth_window"] = [min_depth, max_depth]
        prov["retained"] = int(keep.sum())
        samples = pairing.SampleSet(samples.data[keep], prov)
    if len(samples) == 0:
        raise InputError("no training samples after depth windowing")

    train, test = pairing.split_samples(samples, fraction, seed)
    model = svr.fit_svr(train, hp)
    svr.save_model(model, out_dir / "model.txt")

    lines = [
        f"n_input={len(samples)}",
        f"n_train={len(train)}",
        f"n_test={len(test)}",
        f"svr_w={model.w!r}",
        f"svr_b={model.b!r}",
        f"svr_objective={model.training_summary.objective!r}",
        f"svr_iterations={model.training_summary.iterations}",
        f"svr_converged={'true' if model.training_summary.converged else 'false'}",
    ]
    r2_train = evaluation.fitting_score(train.z, svr.predict(model, train.z0))
    lines.append(f"svr_r2_train={r2_train!r}")
    if len(test) >= 2:
        r2_test = evaluation.fitting_score(test.z, svr.predict(model, test.z0))
        lines.append(f"svr_r2_test={r2_test!r}")
    if baseline:
        ls = svr.fit_least_squares(train, hp)
        svr.save_model(ls, out_dir / "baseline_model.txt")
        lines.append(f"baseline_w={ls.w!r}")
        lines.append(f"baseline_b={ls.b!r}")
        if len(test) >= 2:
            r2_ls = evaluation.fitting_score(test.z, svr.predict(ls, test.z0))
            lines.append(f"baseline_r2_test={r2_ls!r}")
    (out_dir / "training_report.txt").write_text("\n".join(lines) + "\n",
                                                 encoding="utf-8")
    print(f"train: w={model.w:.6f} b={model.b:.6f} "
          f"({len(train)} train / {len(test)} test samples)")
    return EXIT_OK


def _cmd_predict(cfg: _Cfg, out_dir: Path) -> int:
    model_path = cfg.getpath("model", required=True)
    cloud_path = cfg.getpath("cloud", required=True)
    output = out_dir / cfg.getstr("output", "corrected_cloud.xyz")
    model = svr.load_model(model_path)
    cloud = read_cloud(cloud_path)
    corrected = svr.correct_cloud(model, cloud)
    write_cloud(corrected, output)
    print(f"predict: corrected {len(cloud)} points -> {output}")
    return EXIT_OK


def _m3c2_params(cfg: _Cfg) -> evaluation.M3c2Params:
    try:
        return evaluation.M3c2Params(
            normal_mode=cfg.getstr("normal_mode", "vertical",
                                   choices={"vertical", "estimated"}),
            normal_scale=cfg.getfloat("normal_scale", 5.0),
            projection_scale=cfg.getfloat("projection_scale", 2.0),
            max_depth=cfg.getfloat("max_depth", 20.0),
        )
    except ValueError as exc:
        raise ConfigError(f"[evaluate] {exc}") from None


def _cmd_evaluate(cfg: _Cfg, out_dir: Path) -> int:
    reference_path = cfg.getpath("reference_cloud", required=True)
    apparent_path = cfg.getpath("apparent_cloud", required=True)
    corrected_path = cfg.getpath("corrected_cloud", must_exist=True)
    model_path = cfg.getpath("model", required=corrected_path is None)
    params = _m3c2_params(cfg)
    bin_width = cfg.getfloat("bin_width", evaluation.DEFAULT_BIN_WIDTH)
    _require(bin_width > 0, "[evaluate] bin_width must be positive")

    reference = read_cloud(reference_path)
    apparent = read_cloud(apparent_path)
    if corrected_path is not None:
        corrected = read_cloud(corrected_path)
    else:
        model = svr.load_model(model_path)
        corrected = svr.correct_cloud(model, apparent)
        corrected = corrected.with_z(corrected.z, label="corrected")
    train_label = cfg.getstr(
        "train_label", model_path.stem if model_path else "corrected"
    )
    test_label = cfg.getstr("test_label", reference.label)

    results = {}
    for tag, compared in (("before", apparent), ("after", corrected)):
        report = evaluation.m3c2_distance(reference, compared, params)
        stats = evaluation.distance_stats(report, bin_width)
        evaluation.write_distances_csv(report, out_dir / f"m3c2_{tag}.csv")
        evaluation.write_stats_json(stats, out_dir / f"stats_{tag}.json", extra={
            "comparison": tag,
            "train_label": train_label,
            "test_label": test_label,
            "reference": reference.label,
            "compared": compared.label,
        })
        evaluation.write_histogram_csv(stats, out_dir / f"histogram_{tag}.csv")
        results[tag] = stats
    print(
        "evaluate: mean {:+.3f} m -> {:+.3f} m, stddev {:.3f} m -> {:.3f} m".format(
            results["before"].gaussian_mean, results["after"].gaussian_mean,
            results["before"].stddev, results["after"].stddev,
        )
    )
    return EXIT_OK


def _cmd_section(cfg: _Cfg, out_dir: Path) -> int:
    polyline_text = cfg.getstr("polyline", required=True)
    try:
        vertices = [
            tuple(float(v) for v in part.split(","))
            for part in polyline_text.split(";") if part.strip()
        ]
        if any(len(v) != 2 for v in vertices):
            raise ValueError
    except ValueError:
        raise ConfigError(
            f"[section] polyline must look like 'x0,y0;x1,y1;...', got {polyline_text!r}"
        ) from None
    _require(len(vertices) >= 2, "[section] polyline needs >= 2 vertices")
    half_width = cfg.getfloat("half_width", 1.0)
    station_step = cfg.getfloat("station_step", 5.0)
    _require(half_width > 0 and station_step > 0,
             "[section] half_width and station_step must be positive")
    name = cfg.getstr("name", "profile")
    cloud_paths = [p.strip() for p in cfg.getstr("clouds", required=True).split(",")
                   if p.strip()]
    _require(len(cloud_paths) >= 1, "[section] clouds must list >= 1 cloud file")
    for p in cloud_paths:
        if not Path(p).exists():
            raise ConfigError(f"[section] clouds: no such file: {p}")

    clouds = [read_cloud(p) for p in cloud_paths]
    try:
        profile = evaluation.extract_section(
            clouds, np.asarray(vertices), half_width, station_step
        )
    except ValueError as exc:
        raise ConfigError(f"[section] {exc}") from None
    out = out_dir / f"section_{name}.csv"
    evaluation.write_section_csv(profile, out)
    print(f"section: {profile.chainage.shape[0]} stations -> {out}")
    return EXIT_OK


def _cmd_report(cfg: _Cfg, out_dir: Path) -> int:
    inputs = cfg.getpath("inputs", str(out_dir), must_exist=True)
    stats_files = sorted(inputs.rglob("stats_*.json"))
    if not stats_files:
        raise InputError(f"no stats_*.json files under {inputs}")
    rows = []
    for path in stats_files:
        payload = json.loads(path.read_text(encoding="utf-8"))
        rows.append({
            "train": payload.get("train_label", ""),
            "test": payload.get("test_label", ""),
            "comparison": payload.get("comparison", ""),
            "gaussian_mean": payload.get("gaussian_mean"),
            "rmse": payload.get("rmse"),
            "stddev": payload.get("stddev"),
            "valid": payload.get("valid"),
            "invalid": payload.get("invalid"),
        })
    rows.sort(key=lambda r: (r["train"], r["test"], r["comparison"]))
    lines = ["train,test,comparison,gaussian_mean,rmse,stddev,valid,invalid"]
    for r in rows:
        lines.append(
            "{train},{test},{comparison},{gaussian_mean!r},{rmse!r},{stddev!r},"
            "{valid},{invalid}".format(**r)
        )
    (out_dir / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # Table-3-like grid: training sets down, test sets across, after-stats cells.
    after = [r for r in rows if r["comparison"] == "after"]
    trains = sorted({r["train"] for r in after})
    tests = sorted({r["test"] for r in after})
    cell = {(r["train"], r["test"]): r for r in after}
    matrix = ["train\\test," + ",".join(tests)]
    for tr in trains:
        cells = [tr]
        for te in tests:
            r = cell.get((tr, te))
            cells.append(
                "" if r is None else
                "mean={gaussian_mean:.3f};rmse={rmse:.3f};std={stddev:.3f}".format(**r)
            )
        matrix.append(",".join(cells))
    (out_dir / "report_matrix.csv").write_text("\n".join(matrix) + "\n",
                                               encoding="utf-8")
    print(f"report: {len(rows)} comparisons, {len(trains)}x{len(tests)} matrix")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "pair": _cmd_pair,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "section": _cmd_section,
    "report": _cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (sections per subcommand)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", default="out", help="output directory")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="bathycorr",
        description="Refraction correction for through-water photogrammetric "
                    "point clouds via linear support vector regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "generate a synthetic true/apparent cloud pair"),
        ("pair", "match an image-based cloud to a reference cloud"),
        ("train", "fit the depth-correction model on paired samples"),
        ("predict", "apply a trained model to a cloud"),
        ("evaluate", "M3C2 before/after comparison against a reference"),
        ("section", "extract cross-section profiles"),
        ("report", "collect evaluation stats into a comparison matrix"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logger.debug("backend: %s", backend_name())
    try:
        parser = None
        if args.config:
            config_path = Path(args.config)
            if not config_path.exists():
                raise ConfigError(f"config file not found: {config_path}")
            parser = configparser.ConfigParser(interpolation=None)
            try:
                parser.read(config_path, encoding="utf-8")
            except configparser.Error as exc:
                raise ConfigError(f"cannot parse config {config_path}: {exc}") from None
        overrides = {"seed": args.seed} if args.command in ("simulate", "train") else {}
        cfg = _Cfg(parser, args.command, overrides)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())
