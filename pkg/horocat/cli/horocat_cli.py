"""
Command-line front end for horocat
Parses an ExperimentConfig, dispatches it to the core modules and writes
a schema-versioned JSON RunReport. Exit codes: 0 all checks pass, 1 a
check failed, 2 bad configuration, 3 an enumeration budget was exceeded.
"""
import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from ..core import coxeter, group_properties as props, truncation
from ..core.discrete_groups import (DEFAULT_ELEMENT_CAP, GeneratedGroup, choose_basepoint, dirichlet_domain,
                                    limit_sample, tiling_check)
from ..core.errors import ConfigError, HorocatError
from ..core.isometries import classify
from ..core.models import TAU_MODEL, Model, ModelPoint, convert, dist
from ..core.presets import load_preset, preset_names
from ..reports.report_generator import ReportGenerator, RunReport, emit_plot_data

LOGGER = logging.getLogger(__name__)

COMMANDS = ("classify", "dirichlet", "limitset", "truncate", "geodesic", "cat0", "compactness", "tits", "census",
            "burnside", "distortion", "additivity", "coxeter", "convert", "dist")
SAMPLED = ("dirichlet", "cat0", "burnside", "tits")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    input: Optional[str] = None
    preset: Optional[str] = None
    radius: int = 6
    seed: Optional[int] = None
    jobs: int = 1
    tolerance: float = TAU_MODEL
    output: Optional[str] = None
    plot_dir: Optional[str] = None
    timings: bool = False
    element_cap: int = DEFAULT_ELEMENT_CAP
    word: Optional[str] = None
    n: int = 20
    samples: int = 50
    depth: int = 8
    cover_radius: float = 2.0
    rank: int = 4
    classify_upto: int = 0
    tits_cone: bool = False
    vector: Optional[Tuple[float, ...]] = None
    point: Optional[Tuple[float, ...]] = None
    other: Optional[Tuple[float, ...]] = None
    model: str = "hyperboloid"
    target: str = "ball"
    level: Optional[float] = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("radius", "jobs", "n", "samples", "depth", "element_cap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be positive")
        if self.tolerance <= 0 or self.cover_radius <= 0:
            raise ConfigError("tolerances and radii must be positive")
        if self.command in SAMPLED and self.seed is None:
            raise ConfigError(f"{self.command} samples randomly and needs --seed")
        if self.input and self.preset:
            raise ConfigError("give either --input or --preset, not both")
        for name in (self.model, self.target):
            try:
                Model.parse(name)
            except ValueError:
                raise ConfigError(f"unknown model {name!r}") from None
        return self

    def to_json(self):
        data = asdict(self)
        for key in ("output", "plot_dir", "timings"):
            data.pop(key)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in data.items()}


def _floats(text):
    try:
        return tuple(float(c) for c in text.replace(" ", "").split(",") if c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="horocat",
                                     description="CAT(0) spaces from isometry groups of hyperbolic lattices")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", "--gens", dest="input", help="group JSON file {gram, generators, cone}")
    parser.add_argument("--preset", help=f"built-in group: {', '.join(preset_names())}")
    parser.add_argument("--radius", type=int, default=6, help="word-ball radius (default: 6)")
    parser.add_argument("--seed", type=int, help="seed for every sampled computation")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for the CAT(0) triangle suite")
    parser.add_argument("--tolerance", type=float, default=TAU_MODEL)
    parser.add_argument("--output", help="report path (default: stdout)")
    parser.add_argument("--plot-dir", help="write CSV/PNG plot data for sampled series here")
    parser.add_argument("--timings", action="store_true", help="record wall-clock timings in the report")
    parser.add_argument("--element-cap", type=int, default=DEFAULT_ELEMENT_CAP)
    parser.add_argument("--verbose", "-v", action="count", default=0)
    parser.add_argument("--word", help="generator word; capitals are inverses")
    parser.add_argument("--n", type=int, default=20, help="largest power for profiles")
    parser.add_argument("--samples", type=int, default=50)
    parser.add_argument("--depth", type=int, default=8, help="limit-set depth")
    parser.add_argument("--cover-radius", type=float, default=2.0)
    parser.add_argument("--rank", type=int, default=4, help="Coxeter rank N + 1")
    parser.add_argument("--classify-upto", type=int, default=0)
    parser.add_argument("--tits-cone", action="store_true")
    parser.add_argument("--vector", type=_floats)
    parser.add_argument("--point", "--from", dest="point", type=_floats)
    parser.add_argument("--other", "--to-point", dest="other", type=_floats)
    parser.add_argument("--model", default="hyperboloid")
    parser.add_argument("--target", "--to", dest="target", default="ball", help="target model for convert")
    parser.add_argument("--level", type=float, help="horoball level override")
    return parser


def config_from_args(args) -> ExperimentConfig:
    values = {k: v for k, v in vars(args).items() if k != "verbose"}
    return ExperimentConfig(**values).validate()


class _Stopwatch:
    def __init__(self, enabled):
        self.enabled = enabled
        self.timings = {}

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        yield
        if self.enabled:
            self.timings[name] = round(time.perf_counter() - start, 6)


def load_group(config: ExperimentConfig) -> Tuple[GeneratedGroup, Optional[tuple]]:
    """(group, basepoint or None) from --input or --preset"""
    if config.input:
        try:
            with open(config.input) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read group file {config.input}: {exc}") from exc
        try:
            return GeneratedGroup.from_json(data, element_cap=config.element_cap), None
        except HorocatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed group file {config.input}: {exc}") from exc
    preset = load_preset(config.preset or "modular")
    return preset.group(element_cap=config.element_cap), preset.basepoint


def _word(config, default="a"):
    if not config.word:
        return default
    if config.preset:
        return load_preset(config.preset).translate(config.word)
    return config.word


def _point(coords, config, name):
    if coords is None:
        raise ConfigError(f"{name} needs a point")
    return ModelPoint.of(Model.parse(config.model), coords).validate(config.tolerance)


class Experiment:
    """
    One horocat run: holds the config, the group and the report being built
    """
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.report = RunReport(config.command, config.to_json(), config.seed)
        self.clock = _Stopwatch(config.timings)
        self.rng = np.random.default_rng(config.seed if config.seed is not None else 0)
        self._group = None
        self._basepoint = None

    @property
    def group(self):
        if self._group is None:
            self._group, self._basepoint = load_group(self.config)
        return self._group

    def basepoint(self):
        group = self.group
        if self._basepoint is None:
            self._basepoint = choose_basepoint(group, self.config.radius, self.rng)
        return self._basepoint

    def domain(self):
        with self.clock.stage("dirichlet"):
            return dirichlet_domain(self.group, self.basepoint(), self.config.radius)

    def truncated(self):
        """(domain, cusps, hull, family)"""
        domain = self.domain()
        with self.clock.stage("cusps"):
            cusps = truncation.detect_cusps(self.group, domain, self.config.radius)
        with self.clock.stage("limit_hull"):
            hull = truncation.LimitHull(limit_sample(self.group, self.config.depth, domain.basepoint))
        with self.clock.stage("horoballs"):
            family = truncation.build_horoball_family(self.group, cusps, self.config.radius, hull,
                                                      level=self.config.level)
        return domain, cusps, hull, family

    def run(self) -> RunReport:
        handler = getattr(self, f"run_{self.config.command.replace('-', '_')}")
        handler()
        if self.config.timings:
            self.report.timings = self.clock.timings
        return self.report

    def run_classify(self):
        g = self.group.element(_word(self.config))
        c = classify(g)
        self.report.results["classification"] = c.to_json()

    def run_dirichlet(self):
        domain = self.domain()
        self.report.results["domain"] = domain.to_json()
        self.report.add_check("side_pairings", domain.certified_locally_finite)
        self.report.add_check("facets_certified", all(b.certified for b in domain.bisectors))
        with self.clock.stage("tiling"):
            tiling = tiling_check(domain, self.group, self.config.radius, self.config.cover_radius, self.rng,
                                  samples=self.config.samples)
        self.report.results["tiling"] = tiling.to_json()
        self.report.add_check("tiling", tiling.passed)

    def run_limitset(self):
        sample = limit_sample(self.group, self.config.depth)
        self.report.results["limit_set"] = sample.to_json()
        directions = sample.directions()
        if len(directions) and directions.shape[1] >= 2:
            self.report.add_series("limit_set", "scatter", x=directions[:, 0], y=directions[:, 1])

    def run_truncate(self):
        _, cusps, _, family = self.truncated()
        disjoint, exact_pairs = truncation.certify_disjoint(family)
        self.report.results["cusps"] = [c.to_json() for c in cusps]
        self.report.results["horoballs"] = family.to_json()
        self.report.add_check("disjoint_horoballs", disjoint, exact_pairs=exact_pairs)
        self.report.add_check("antipodal_points_in_hull", family.step4_satisfied)

    def run_geodesic(self):
        _, _, _, family = self.truncated()
        x = _point(self.config.point, self.config, "geodesic")
        y = _point(self.config.other, self.config, "geodesic")
        path = truncation.truncated_geodesic(x, y, family, tol=min(self.config.tolerance, truncation.SOLVER_TOL))
        self.report.results["geodesic"] = path.to_json()
        avoids = all(not family.contains(path.point_at(t)) for t in np.linspace(0.0, 1.0, 101))
        self.report.add_check("avoids_horoballs", avoids, residual=path.residual)

    def run_cat0(self):
        domain, _, _, family = self.truncated()
        with self.clock.stage("cat0"):
            suite = truncation.cat0_suite(family, domain.basepoint, self.config.samples, self.config.seed,
                                           jobs=self.config.jobs)
        self.report.results["cat0"] = suite.to_json()
        self.report.add_check("comparison", all(r.passed for r in suite.reports),
                              residual=max((r.residual for r in suite.reports), default=0.0))
        self.report.add_check("pure_hyperbolic_strict", suite.pure_failures == 0, failures=suite.pure_failures)
        self.report.add_series("cat0_excess", "hist", excess=[r.excess for r in suite.reports])

    def run_compactness(self):
        domain, cusps, hull, family = self.truncated()
        with self.clock.stage("compactness"):
            before = truncation.compactness_check(domain, hull, None, cusps)
            after = truncation.compactness_check(domain, hull, family, cusps)
        self.report.results["before_truncation"] = before.to_json()
        self.report.results["after_truncation"] = after.to_json()
        if cusps:
            self.report.add_check("unbounded_before_truncation", before.unbounded)
        self.report.add_check("bounded_after_truncation", after.bounded_at_scale)

    def run_tits(self):
        verdict = props.tits_classify(self.group, self.config.radius, seed=self.config.seed)
        self.report.results["tits"] = verdict.to_json()
        self.report.add_check("verdict_established", verdict.kind is not props.TitsKind.INCONCLUSIVE)

    def run_census(self):
        census = props.finite_subgroup_census(self.group, self.config.radius)
        self.report.results["census"] = census.to_json()

    def run_burnside(self):
        report = props.burnside_check(self.group, self.config.radius, self.config.samples, self.config.seed)
        self.report.results["burnside"] = report.to_json()
        self.report.add_check("torsion_closures_finite", report.passed)

    def run_distortion(self):
        profile = props.distortion_profile(self.group, _word(self.config), self.config.n)
        self.report.results["distortion"] = profile.to_json()
        if profile.infinite_order:
            self.report.add_check("undistorted", profile.undistorted)
        self.report.add_series(f"distortion_{profile.word}", "line", n=[r[0] for r in profile.rows],
                               ratio=[r[2] for r in profile.rows])

    def run_additivity(self):
        g = self.group.element(_word(self.config))
        report = props.translation_additivity_check(g, self.config.n)
        self.report.results["additivity"] = report.to_json()
        self.report.add_check("translation_additivity", report.passed)

    def run_coxeter(self):
        rep = coxeter.build_rep(self.config.rank - 1)
        self.report.results["representation"] = rep.to_json()
        self.report.results["wehler_dictionary"] = coxeter.wehler_dictionary(self.config.rank - 1)
        self.report.add_check("signature", rep.degenerate or rep.form.inertia == (1, 0, rep.rank - 1))
        if self.config.classify_upto:
            stats = coxeter.classify_coxeter_words(rep, self.config.classify_upto)
            self.report.results["classification"] = stats.to_json()
        if self.config.tits_cone:
            if self.config.vector is None:
                raise ConfigError("--tits-cone needs --vector")
            verdict = coxeter.tits_cone_membership(rep, _rational(self.config.vector), self.config.radius)
            self.report.results["tits_cone"] = verdict.to_json()

    def run_convert(self):
        p = _point(self.config.point, self.config, "convert")
        self.report.results["converted"] = convert(p, self.config.target).to_json()

    def run_dist(self):
        x = _point(self.config.point, self.config, "dist")
        y = _point(self.config.other, self.config, "dist")
        self.report.results["distance"] = dist(x, y)


def _rational(values):
    return tuple(Fraction(v).limit_denominator(10 ** 9) for v in values)


def run(config: ExperimentConfig) -> RunReport:
    return Experiment(config.validate()).run()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return exc.exit_code

    try:
        report = run(config)
        code = 0 if report.passed else 1
    except HorocatError as exc:
        LOGGER.error("%s: %s", exc.reason, exc)
        report = RunReport(config.command, config.to_json(), config.seed,
                           error={"reason": exc.reason, "message": str(exc)})
        code = exc.exit_code

    if config.output:
        ReportGenerator(report).save_report(config.output)
    else:
        print(report.dumps())
    if config.plot_dir and report.series:
        emit_plot_data(report, config.plot_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
