"""Experiment runner: validate a config, dispatch to the owning module, write the result.

Exit statuses follow ``nilmix.exceptions``: 0 success, 2 schema or degenerate
input, 3 budget, 4 falsification (the result file is still written), 5
precision or an undecided certificate.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from django.core.exceptions import ValidationError
from django.db import DatabaseError
from mpmath import iv
from rest_framework import serializers

from nilmix import __version__
from nilmix.algebra.intervals import certainly_less, decimal_bounds, working_precision
from nilmix.api.encoding import approximate, enclosure, estimate, jsonable
from nilmix.api.serializers import ExperimentConfigSerializer
from nilmix.cocycle import (
    coboundary,
    rigidity_pipeline,
    sample_compatible,
    solution_space_check,
)
from nilmix.cocycle.rigidity import TELESCOPING_CHECKS
from nilmix.conf import get_setting, resolved_settings
from nilmix.diophantine import (
    calibrate_c1,
    calibration_refinement,
    empirical_gap,
    height,
    instance_grid,
    sunit_solutions,
    vector_height,
    waldschmidt_bound,
)
from nilmix.exceptions import (
    EXIT_OK,
    EXIT_SCHEMA,
    BudgetExceeded,
    FalsificationError,
    InternalConsistencyError,
    NilmixError,
)
from nilmix.models import ExperimentRun
from nilmix.nilmanifold import dichotomy_check, dichotomy_suite, mc_correlation, product_integral
from nilmix.rendering.writers import write_csv, write_json
from nilmix.spectrum import (
    anosov_check,
    ergodicity_certificate,
    galois_orbits,
    lemma21_constant,
    simultaneous_spectrum,
)
from nilmix.spectrum.lyapunov import verify_growth
from nilmix.toral import decay_fit, multi_correlation, scaled_shapes, shape_power_law
from nilmix.toral.fitting import N_POWER, RHO_POWER

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    command: str
    precision: int
    seed: int
    jobs: int
    enumeration_budget: int
    sample_budget: int

    @classmethod
    def from_attrs(cls, attrs: Dict[str, Any]) -> "RunContext":
        budget = attrs.get("budget") or {}
        return cls(
            attrs["command"],
            int(attrs.get("precision") or get_setting("PRECISION_BITS")),
            int(attrs.get("seed", get_setting("SEED"))),
            int(attrs.get("jobs") or get_setting("JOBS")),
            int(budget.get("enumeration") or get_setting("ENUMERATION_BUDGET")),
            int(budget.get("samples") or get_setting("SAMPLE_BUDGET")),
        )

    def check_samples(self, samples: int):
        if samples > self.sample_budget:
            raise BudgetExceeded(
                "The sample count exceeds the run's sample budget",
                {"samples": samples, "budget": self.sample_budget},
            )


@dataclass
class CommandResult:
    payload: Dict[str, Any]
    rows: List[Dict[str, Any]]
    columns: Tuple[str, ...]
    falsifications: List[str] = field(default_factory=list)


@dataclass
class RunOutcome:
    exit_status: int
    output: Optional[Path] = None
    message: str = ""


HANDLERS: Dict[str, Callable[[Dict[str, Any], RunContext], CommandResult]] = {}


def handles(command: str):
    def register(handler):
        HANDLERS[command] = handler
        return handler

    return register


@handles("spectrum")
def run_spectrum(inputs, ctx: RunContext) -> CommandResult:
    action = inputs["action"]
    orbits = galois_orbits(simultaneous_spectrum(action, ctx.precision, ctx.seed))
    rows = []
    for index, orbit in enumerate(orbits):
        for character in orbit.members:
            units = [[int(i == k) for i in range(action.rank)] for k in range(action.rank)]
            rows.append(
                {
                    "orbit": index,
                    "field": character.factor.to_json(),
                    "embedding_index": character.embedding_index,
                    "copy": character.copy,
                    "values": [u.to_json() for u in character.values],
                    "embedded": [character.embed(e, ctx.precision) for e in units],
                }
            )
    return CommandResult(
        {"action": action.to_json(), "orbits": len(orbits), "characters": rows},
        rows,
        ("orbit", "field", "embedding_index", "copy", "values", "embedded"),
    )


@handles("ergodic")
def run_ergodic(inputs, ctx: RunContext) -> CommandResult:
    certificate = ergodicity_certificate(inputs["action"], ctx.precision, ctx.seed)
    if not certificate.ergodic:
        logger.info("Action is not ergodic: %s", certificate.counterexample)
    rows = [{"orbit": index, **vars(orbit)} for index, orbit in enumerate(certificate.orbits)]
    return CommandResult(
        certificate.to_json(), rows, ("orbit", "factor", "method", "precision", "candidates_checked")
    )


@handles("anosov")
def run_anosov(inputs, ctx: RunContext) -> CommandResult:
    rows = []
    for z in inputs["elements"]:
        result = anosov_check(inputs["action"], z, ctx.precision)
        rows.append({"z": z, **result.to_json()})
    return CommandResult({"elements": rows}, rows, ("z", "anosov", "method", "witness"))


@handles("lyapunov-constant")
def run_lyapunov(inputs, ctx: RunContext) -> CommandResult:
    radius = inputs["verify_radius"]
    orbits = galois_orbits(simultaneous_spectrum(inputs["action"], seed=ctx.seed))
    rows, falsifications = [], []
    for index, orbit in enumerate(orbits):
        constant = lemma21_constant(orbit, ctx.precision)
        failures = verify_growth(orbit, constant, radius, ctx.precision) if radius else []
        if failures:
            falsifications.append(
                f"Growth inequality fails on orbit {index} at {len(failures)} vectors"
            )
        with working_precision(ctx.precision + 16):
            lower, upper = decimal_bounds(iv.mpf([constant.lower, constant.upper]))
        rows.append(
            {
                "orbit": index,
                "field": orbit.members[0].factor.to_json(),
                "c_lower": lower,
                "c_upper": upper,
                "facet": list(constant.facet),
                "polygon_estimate": None
                if constant.polygon_estimate is None
                else approximate(constant.polygon_estimate),
                "verify_radius": radius,
                "growth_failures": [list(z) for z in failures],
            }
        )
    return CommandResult(
        {"orbits": rows},
        rows,
        ("orbit", "field", "c_lower", "c_upper", "facet", "polygon_estimate", "verify_radius", "growth_failures"),
        falsifications,
    )


@handles("height")
def run_height(inputs, ctx: RunContext) -> CommandResult:
    rows = []
    for index, u in enumerate(inputs["elements"]):
        value = height(u, ctx.precision).to_json()
        rows.append({"kind": "element", "index": index, "input": u.to_json(), **value})
    for index, entries in enumerate(inputs["vectors"]):
        value = vector_height(entries, ctx.precision).to_json()
        rows.append(
            {"kind": "vector", "index": index, "input": [x.to_json() for x in entries], **value}
        )
    return CommandResult(
        {"field": inputs["field"].modulus.to_json(), "heights": rows},
        rows,
        ("kind", "index", "input", "lower", "upper", "degree"),
    )


@handles("waldschmidt")
def run_waldschmidt(inputs, ctx: RunContext) -> CommandResult:
    u_list, params, embedding = inputs["u_list"], inputs.get("params"), inputs["embedding"]
    if inputs["mode"] == "instance":
        u, z = inputs["u"], inputs["z"]
        bound = waldschmidt_bound(u_list, u, z, params, ctx.precision, embedding)
        gap = empirical_gap(u_list, u, z, ctx.precision, embedding)
        with working_precision(ctx.precision + 16):
            violated = certainly_less(gap, bound.bound)
        if violated:
            logger.warning("Gap below the bound at z=%s with the configured constants", z)
        row = {
            "z": z,
            "gap": enclosure(gap),
            "bound": enclosure(bound.bound),
            "proof_route": enclosure(bound.proof_route),
            "holds": not violated,
        }
        return CommandResult(
            {"instance": row, "chain": bound.chain.to_json()},
            [row],
            ("z", "gap", "bound", "proof_route", "holds"),
        )

    u_values, z_max = inputs["u_values"], inputs["z_max"]
    if inputs["refine"]:
        report = calibration_refinement(u_list, u_values, z_max, params, ctx.precision, embedding)
        grids = [("grid", z_max, report["grid"]), ("refined", 2 * z_max, report["refined"])]
    else:
        coarse = calibrate_c1(instance_grid(u_list, u_values, z_max), params, ctx.precision, embedding)
        report = {"grid": coarse.to_json()}
        grids = [("grid", z_max, report["grid"])]
    rows = [
        {
            "grid": name,
            "z_max": size,
            "c1": calibration["c1"],
            "bracket": calibration["bracket"],
            "used": calibration["used"],
            "excluded": len(calibration["excluded"]),
        }
        for name, size, calibration in grids
    ]
    return CommandResult(report, rows, ("grid", "z_max", "c1", "bracket", "used", "excluded"))


@handles("sunit-search")
def run_sunits(inputs, ctx: RunContext) -> CommandResult:
    result = sunit_solutions(
        inputs["instance"], inputs["box"], ctx.precision, ctx.jobs, ctx.enumeration_budget
    )
    if not result.stable:
        logger.warning("Solution count still growing at box %d", result.box)
    rows = [{"box": box, "count": count} for box, count in enumerate(result.counts_by_box)]
    return CommandResult(result.to_json(), rows, ("box", "count"))


def _correlation_row(index: int, step: int, shape, corr_re: str, corr_im: str, radius: str) -> Dict[str, Any]:
    return {
        "index": index,
        "n": step,
        "shape": shape,
        "corr_re": corr_re,
        "corr_im": corr_im,
        "radius": radius,
        "exact": radius == "0",
    }


CORRELATION_COLUMNS = ("index", "n", "shape", "corr_re", "corr_im", "radius", "exact")


@handles("mix-exact")
def run_mix_exact(inputs, ctx: RunContext) -> CommandResult:
    action, functions, shapes = inputs["action"], inputs["functions"], inputs["shapes"]
    steps = inputs["steps"] or list(range(1, len(shapes) + 1))
    model = inputs.get("fit")
    falsifications = []
    if model:
        fit = decay_fit(
            action, functions, shapes, model, steps, ctx.precision, ctx.enumeration_budget, ctx.jobs
        )
        rows = [
            dict(
                _correlation_row(
                    index, step, shape, sample["corr_re"], sample["corr_im"], sample["radius"]
                ),
                N_star=approximate(sample["N_star"]),
            )
            for index, (step, shape, sample) in enumerate(zip(steps, shapes, fit.samples))
        ]
        if fit.estimate is not None:
            if model == N_POWER and fit.estimate <= 0:
                falsifications.append(f"Fitted decay exponent {fit.estimate:.6g} is not positive")
            if model == RHO_POWER and fit.estimate >= 1:
                falsifications.append(f"Fitted decay ratio {fit.estimate:.6g} is not below 1")
        payload = {"correlations": rows, "fit": fit.to_json()}
    else:
        rows = []
        for index, (step, shape) in enumerate(zip(steps, shapes)):
            corr = multi_correlation(
                functions,
                shape,
                action,
                ctx.enumeration_budget,
                ctx.jobs,
                inputs["separation"],
                ctx.precision,
            ).to_json()
            row = _correlation_row(index, step, shape, corr["re"], corr["im"], corr["radius"])
            if corr["separation"] is not None:
                row["separation"] = corr["separation"]
            rows.append(row)
        payload = {"correlations": rows, "fit": None}
    return CommandResult(payload, rows, CORRELATION_COLUMNS, falsifications)


def _expected_value(kind: str, functions) -> Optional[float]:
    if kind == "product":
        return product_integral(functions)
    if kind == "square":
        return functions[0].square_integral()
    return None


@handles("mix-mc")
def run_mix_mc(inputs, ctx: RunContext) -> CommandResult:
    action, functions, samples = inputs["heis_action"], inputs["functions"], inputs["samples"]
    ctx.check_samples(samples * len(inputs["cases"]))
    sigmas = inputs["sigmas"]
    rows, falsifications = [], []
    for index, case in enumerate(inputs["cases"]):
        words = [action.word(z) for z in case["words"]]
        result = mc_correlation(
            functions, words, samples, ctx.seed, ctx.jobs, inputs.get("chunk_size")
        )
        expected = _expected_value(case["expected"], functions)
        row = {
            "case": index,
            "words": case["words"],
            "estimate": estimate(result.estimate, result.stderr),
            "expected": None if expected is None else approximate(expected),
            "deviation_sigmas": None,
            "within": None,
        }
        if expected is not None:
            deviation = abs(result.estimate - expected)
            row["deviation_sigmas"] = approximate(deviation / result.stderr) if result.stderr else None
            row["within"] = result.within(expected, sigmas)
            if not row["within"]:
                falsifications.append(
                    f"Case {index}: estimate {result.estimate:.6g} is more than {sigmas} standard errors from {expected:.6g}"
                )
        rows.append(row)
    return CommandResult(
        {"samples": samples, "seed": ctx.seed, "cases": rows},
        rows,
        ("case", "words", "estimate", "expected", "deviation_sigmas", "within"),
        falsifications,
    )


@handles("shape")
def run_shape(inputs, ctx: RunContext) -> CommandResult:
    action, shape, n_max = inputs["action"], inputs["shape"], inputs["n_max"]
    law = shape_power_law(action, shape, n_max, ctx.precision)
    falsifications = []
    if law.anosov and not law.holds:
        failed = [row["n"] for row in law.rows if not row["holds"]]
        falsifications.append(f"N_* power law fails on an Anosov shape at n = {failed}")
    payload = law.to_json()
    payload["fit"] = None
    if inputs.get("functions"):
        fit = decay_fit(
            action,
            inputs["functions"],
            scaled_shapes(shape, n_max),
            RHO_POWER,
            precision=ctx.precision,
            budget=ctx.enumeration_budget,
            jobs=ctx.jobs,
        )
        payload["fit"] = fit.to_json()
        if law.anosov and fit.estimate is not None and fit.estimate >= 1:
            falsifications.append(f"Fitted decay ratio {fit.estimate:.6g} is not below 1")
    rows = [
        {
            "n": row["n"],
            "log_n_star": {"lower": row["log_n_star"][0], "upper": row["log_n_star"][1]},
            "expected": {"lower": row["expected"][0], "upper": row["expected"][1]},
            "holds": row["holds"],
        }
        for row in law.rows
    ]
    return CommandResult(payload, rows, ("n", "log_n_star", "expected", "holds"), falsifications)


@handles("boxmap-check")
def run_boxmap(inputs, ctx: RunContext) -> CommandResult:
    instances = [dict(instance, family="given") for instance in inputs.get("instances", [])]
    if "suite" in inputs:
        suite = inputs["suite"]
        instances += [
            {"boxmap": s.boxmap, "projection": s.projection, "family": s.family}
            for s in dichotomy_suite(suite["algebraic"], suite["rational"], ctx.seed, suite["side"])
        ]
    trials = len(inputs["u_list"]) if "u_list" in inputs else inputs["trials"]
    # cosine and sine parts of each paired character
    ctx.check_samples(2 * inputs["samples"] * trials * len(instances))
    rows, results, falsifications = [], [], []
    for index, instance in enumerate(instances):
        delta = instance.get("delta", inputs["delta"])
        result = dichotomy_check(
            instance["boxmap"],
            delta,
            instance.get("projection"),
            inputs.get("params"),
            inputs["samples"],
            ctx.seed,
            inputs.get("u_list"),
            inputs.get("g_list"),
            inputs["trials"],
            ctx.precision,
            ctx.enumeration_budget,
            ctx.jobs,
        )
        if result.falsified:
            falsifications.append(f"Instance {index} resolves to {result.label}")
        equidistribution = result.equidistribution
        rows.append(
            {
                "instance": index,
                "family": instance["family"],
                "delta": str(delta),
                "label": result.label,
                "obstruction": result.obstruction.z,
                "paired_character": result.paired_freq,
                "discrepancy": approximate(equidistribution.discrepancy),
                "threshold": approximate(equidistribution.threshold),
                "passed": equidistribution.passed,
            }
        )
        projection = instance.get("projection")
        results.append(
            {
                "family": instance["family"],
                "boxmap": instance["boxmap"].to_json(),
                "projection": projection.to_json() if projection else None,
                **result.to_json(),
            }
        )
    return CommandResult(
        {"instances": results},
        rows,
        (
            "instance",
            "family",
            "delta",
            "label",
            "obstruction",
            "paired_character",
            "discrepancy",
            "threshold",
            "passed",
        ),
        falsifications,
    )


@handles("cocycle")
def run_cocycle(inputs, ctx: RunContext) -> CommandResult:
    action = inputs["action"]
    cocycle = inputs.get("cocycle")
    if "coboundary" in inputs:
        spec = inputs["coboundary"]
        a, b = spec["action"].generators
        cocycle = coboundary(spec["phi"], a, b, spec["constants"])
    rows, falsifications = [], []
    payload: Dict[str, Any] = {"report": None, "solution_space": [], "sampled": []}
    if cocycle is not None:
        report = rigidity_pipeline(
            cocycle,
            inputs.get("telescoping") or TELESCOPING_CHECKS,
            inputs.get("window"),
            precision=ctx.precision,
        )
        payload["report"] = report.to_json()
        rows.append({"check": "constants", "value": [str(v) for v in report.constants], "holds": True})
        rows.append(
            {"check": "sigma_squared", "value": str(report.sigma.value), "holds": report.sigma.value == 0}
        )
        rows.append(
            {"check": "transfer_function", "value": report.phi is not None, "holds": report.phi is not None}
        )
        rows.append({"check": "residual", "value": report.residual_zero, "holds": bool(report.residual_zero)})
        for check in report.telescoping:
            rows.append(
                {"check": f"telescoping n={check['n']} j={check['j']}", "value": check["terms"], "holds": check["holds"]}
            )
        if report.falsified:
            falsifications.append("The cocycle is not cohomologous to a constant cocycle")
    for radius in inputs.get("solution_space") or []:
        space = solution_space_check(action, radius)
        payload["solution_space"].append(space.to_json())
        rows.append(
            {
                "check": f"solution_space radius={radius}",
                "value": f"{space.solutions} = {space.coboundaries} + {space.constants}",
                "holds": space.holds,
            }
        )
        if not space.holds:
            falsifications.append(f"Compatibility solutions exceed coboundaries + constants at radius {radius}")
    sampled = inputs.get("sampled")
    for seed in sampled["seeds"] if sampled else []:
        candidate = sample_compatible(action, sampled["radius"], seed, sampled["spread"])
        report = rigidity_pipeline(candidate, certify=False, precision=ctx.precision)
        payload["sampled"].append(
            {"seed": seed, "sigma_squared": str(report.sigma.value), "falsified": report.falsified}
        )
        rows.append(
            {"check": f"sampled seed={seed}", "value": str(report.sigma.value), "holds": not report.falsified}
        )
        if report.falsified:
            falsifications.append(f"Sampled compatible cocycle (seed {seed}) has σ² = {report.sigma.value}")
    return CommandResult(payload, rows, ("check", "value", "holds"), falsifications)


def config_digest(config: Any) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_config(config: Dict[str, Any], ctx: RunContext, output: Dict[str, Any]) -> Dict[str, Any]:
    """The config with defaults materialized. ``jobs`` is left out: it never changes results."""
    return {
        "command": ctx.command,
        "precision": ctx.precision,
        "seed": ctx.seed,
        "budget": {"enumeration": ctx.enumeration_budget, "samples": ctx.sample_budget},
        "output": output,
        "inputs": config["inputs"],
        "settings": resolved_settings(),
        "version": __version__,
    }


def _output(attrs: Dict[str, Any]) -> Dict[str, Any]:
    output = dict(attrs.get("output") or {})
    if "format" not in output:
        # the suffix of an explicit path decides, JSON otherwise
        suffix = Path(output.get("path", "")).suffix.lower()
        output["format"] = "csv" if suffix == ".csv" else "json"
    output.setdefault("path", f"{attrs['command']}.{output['format']}")
    return output


def write_result(result: CommandResult, resolved: Dict[str, Any]) -> Path:
    output = resolved["output"]
    if output["format"] == "csv":
        return write_csv(result.rows, result.columns, output["path"], resolved)
    document = {
        "command": resolved["command"],
        "version": resolved["version"],
        "config": jsonable(resolved, mark_floats=False),
        "falsifications": result.falsifications,
        "result": jsonable(result.payload),
    }
    return write_json(document, output["path"], mark_floats=False)


def describe_errors(detail: Any, prefix: str = "") -> List[str]:
    """Flatten DRF error details into ``path: message`` lines."""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            lines.extend(describe_errors(value, f"{prefix}{key}." if key != "non_field_errors" else prefix))
        return lines
    if isinstance(detail, list):
        lines = []
        for index, value in enumerate(detail):
            nested = isinstance(value, (dict, list))
            lines.extend(describe_errors(value, f"{prefix}{index}." if nested else prefix))
        return lines
    return [f"{prefix.rstrip('.') or 'config'}: {detail}"]


def record_run(
    command: str,
    digest: str,
    resolved: Optional[Dict[str, Any]],
    outcome: RunOutcome,
):
    if not get_setting("RECORD_RUNS"):
        return
    try:
        ExperimentRun.objects.create(
            command=str(command or "")[:20],
            config_sha256=digest,
            resolved_config=jsonable(resolved or {}, mark_floats=False),
            exit_status=outcome.exit_status,
            output_path=str(outcome.output or ""),
            output_format=(resolved or {}).get("output", {}).get("format", "json"),
            version=__version__,
            message=outcome.message,
        )
    except DatabaseError as e:
        logger.warning("Run not recorded in the ledger: %s", e)


def run(config: Any) -> RunOutcome:
    """Run one experiment config and return its exit status and output path."""
    digest = config_digest(config)
    command = config.get("command") if isinstance(config, dict) else None
    resolved: Optional[Dict[str, Any]] = None
    outcome = RunOutcome(EXIT_OK)
    try:
        serializer = ExperimentConfigSerializer(data=config)
        serializer.is_valid(raise_exception=True)
        attrs = serializer.validated_data
        ctx = RunContext.from_attrs(attrs)
        resolved = resolve_config(config, ctx, _output(attrs))
        logger.info("Running %s with resolved config %s", command, json.dumps(jsonable(resolved, mark_floats=False), sort_keys=True))
        result = HANDLERS[command](attrs["parsed"], ctx)
        outcome.output = write_result(result, resolved)
        if result.falsifications:
            raise FalsificationError("; ".join(result.falsifications), {"count": len(result.falsifications)})
    except serializers.ValidationError as e:
        outcome.exit_status = EXIT_SCHEMA
        outcome.message = "\n".join(describe_errors(e.detail))
    except ValidationError as e:
        outcome.exit_status = EXIT_SCHEMA
        outcome.message = "; ".join(e.messages)
    except NilmixError as e:
        outcome.exit_status = e.exit_code
        outcome.message = e.message
        if e.details:
            outcome.message += f" {json.dumps(jsonable(e.details), sort_keys=True)}"
    except (ArithmeticError, LookupError, TypeError, ValueError) as e:
        # validated input reached a state the computation does not expect
        logger.exception("%s failed after validation", command)
        error = InternalConsistencyError(f"{type(e).__name__}: {e}")
        outcome.exit_status = error.exit_code
        outcome.message = error.message
    if outcome.exit_status == EXIT_OK:
        logger.info("%s finished; wrote %s", command, outcome.output)
    else:
        # a falsification still produced its result file
        log = logger.warning if outcome.output else logger.error
        log("%s exited with status %d: %s", command, outcome.exit_status, outcome.message)
    record_run(command, digest, resolved, outcome)
    return outcome
