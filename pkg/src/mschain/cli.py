"""Scenario-driven command line front end.

Reads a JSON config, runs one of the built-in experiments (chain state and
restrictions, discrimination feasibility, overlap measures, Born sampling,
decoherence sweep), and emits a machine-readable report. Reports are
deterministic down to the byte for a fixed config: keys are sorted and reals
are printed with 12 significant digits.

Exit codes: 0 success, 2 config error, 3 capacity error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chain import (
    MSState,
    Scenario,
    decohere,
    full_chain,
    object_detector_state,
    prepare_gemenge,
    prepare_object_state,
    scenario_digest,
    statistical_restriction,
)
from .discriminate import (
    build_it_observable,
    build_pointer_algebra,
    check_eigen_discrimination,
    numeric_feasibility_oracle,
    recognition_problem,
    superposition_discrimination_problem,
)
from .errors import CapacityError, ConfigError, ValidationError
from .linalg import pure_density
from .metrics import (
    eigen_distribution,
    overlap_bc,
    overlap_tv,
    phase_averaged_purity_information,
    purity_information,
    purity_report,
    transverse_spin,
)
from .sampling import run_trials

COMMANDS = ("chain", "discriminate", "overlap", "born", "decohere", "all")
FORMATS = ("csv", "structured-text")

CONFIG_FIELDS = {
    "a1", "a2", "input_kind", "n_env", "env_overlap", "seed", "trials",
    "command", "output_path", "output_format", "tolerances",
}
TOLERANCE_FIELDS = {"born_sigma", "oracle_feasible", "match"}
DEFAULT_TOLERANCES = {"born_sigma": 4.0, "oracle_feasible": 1e-6, "match": 1e-9}

# Config amplitudes are renormalized when close to unit norm; anything beyond
# this residual is rejected as a typo rather than rounding.
AMPLITUDE_RESIDUAL_TOL = 1e-3

OVERLAP_CONVENTION_NOTE = (
    "two overlap conventions are reported: overlap_min is the sum of pointwise "
    "minima and is the default; overlap_sqrt is the sum of sqrt-products "
    "(Bhattacharyya coefficient). They differ whenever the distributions "
    "differ, e.g. 0.5 vs sqrt(2)/2 for the symmetric spin case; the package's "
    "reference values follow the minimum convention."
)


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    command: str
    output_path: str | None = None
    output_format: str = "structured-text"
    tolerances: tuple[tuple[str, float], ...] = ()

    def tolerance(self, name: str) -> float:
        for key, value in self.tolerances:
            if key == name:
                return value
        return DEFAULT_TOLERANCES[name]


@dataclass(frozen=True)
class ReportRow:
    label: str
    value: object
    expected: object = None
    passed: bool | None = None


@dataclass(frozen=True)
class Report:
    command: str
    digest: str
    scenario: tuple[tuple[str, object], ...]
    version: str
    rows: tuple[ReportRow, ...]
    notes: tuple[str, ...] = ()


def _parse_amplitude(value, name: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, (list, tuple)) and len(value) == 2 \
            and all(isinstance(x, (int, float)) for x in value):
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"field {name!r} must be a number or a [re, im] pair")


def parse_config(text: str, override_command: str | None = None) -> RunConfig:
    """Validate a JSON config and apply the documented defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(data, override_command)


def config_from_dict(data: dict, override_command: str | None = None) -> RunConfig:
    unknown = set(data) - CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")

    a1 = _parse_amplitude(data.get("a1", 2**-0.5), "a1")
    a2 = _parse_amplitude(data.get("a2", 2**-0.5), "a2")
    residual = abs(a1) ** 2 + abs(a2) ** 2 - 1.0
    if abs(residual) > AMPLITUDE_RESIDUAL_TOL:
        raise ConfigError(f"amplitudes not normalized: residual {residual:.6g}")
    scale = (1.0 + residual) ** -0.5
    a1, a2 = a1 * scale, a2 * scale

    command = override_command or data.get("command")
    if command is None:
        raise ConfigError("no command given (config field 'command' or CLI argument)")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")

    output_format = data.get("output_format", "structured-text")
    if output_format not in FORMATS:
        raise ConfigError(f"unknown output_format {output_format!r}")

    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ConfigError("field 'tolerances' must be an object")
    bad = set(tolerances) - TOLERANCE_FIELDS
    if bad:
        raise ConfigError(f"unknown tolerance(s): {', '.join(sorted(bad))}")

    try:
        scenario = Scenario(
            a1=a1,
            a2=a2,
            input_kind=data.get("input_kind", "pure"),
            n_env=int(data.get("n_env", 0)),
            env_overlap=float(data.get("env_overlap", 1.0)),
            seed=int(data.get("seed", 42)),
            trials=int(data.get("trials", 100_000)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc

    return RunConfig(
        scenario=scenario,
        command=command,
        output_path=data.get("output_path"),
        output_format=output_format,
        tolerances=tuple(sorted((k, float(v)) for k, v in tolerances.items())),
    )


def _scenario_echo(s: Scenario) -> tuple[tuple[str, object], ...]:
    return (
        ("a1", [s.a1.real, s.a1.imag]),
        ("a2", [s.a2.real, s.a2.imag]),
        ("env_overlap", s.env_overlap),
        ("input_kind", s.input_kind),
        ("n_env", s.n_env),
        ("seed", s.seed),
        ("trials", s.trials),
    )


_BASIS_NAMES_8 = tuple(
    f"S{1 + (k >> 2)}D{1 + ((k >> 1) & 1)}O{1 + (k & 1)}" for k in range(8)
)


def _chain_rows(config: RunConfig) -> tuple[list[ReportRow], list[str]]:
    scenario = config.scenario
    match_tol = config.tolerance("match")
    rows: list[ReportRow] = []
    notes: list[str] = []
    model = full_chain(scenario)
    if isinstance(model, MSState):
        for k, amp in enumerate(model.vector):
            rows.append(ReportRow(f"chain.amplitude[{_BASIS_NAMES_8[k]}].re", float(amp.real)))
            rows.append(ReportRow(f"chain.amplitude[{_BASIS_NAMES_8[k]}].im", float(amp.imag)))
        restriction = statistical_restriction(model)
    else:
        for i, (branch, p) in enumerate(model.branches):
            rows.append(ReportRow(f"chain.branch[{i}].probability", float(p)))
        restriction = statistical_restriction(model.density(), model.layout)
        notes.extend(model.notes)
    p1, p2 = scenario.probabilities
    expect = {("1", "1"): p1, ("2", "2"): p2, ("1", "2"): None, ("2", "1"): None}
    for (i, j), exp in expect.items():
        val = complex(restriction[int(i) - 1, int(j) - 1])
        if exp is not None:
            rows.append(ReportRow(
                f"chain.restriction[O{i}][O{j}].re", float(val.real), exp,
                bool(abs(val.real - exp) < match_tol),
            ))
        else:
            rows.append(ReportRow(f"chain.restriction[O{i}][O{j}].re", float(val.real)))
        rows.append(ReportRow(f"chain.restriction[O{i}][O{j}].im", float(val.imag)))
    return rows, notes


def _describe_evidence(ev) -> str:
    if ev.kind == "overlap":
        return f"states {ev.i},{ev.j} overlap |<phi_{ev.i}|phi_{ev.j}>|={abs(ev.detail[0]):.6g}"
    if ev.kind == "dependence":
        return f"states {ev.i},{ev.j} pinned equal by a linear dependence"
    return f"states {ev.i},{ev.j} share a required-equal group"


def _discriminate_rows(config: RunConfig) -> tuple[list[ReportRow], list[str]]:
    scenario = config.scenario
    oracle_tol = config.tolerance("oracle_feasible")
    rows: list[ReportRow] = []
    notes: list[str] = []

    problem = superposition_discrimination_problem(scenario.a1, scenario.a2)
    result = check_eigen_discrimination(problem)
    expected = "INFEASIBLE" if abs(scenario.a1 * scenario.a2) > 1e-12 else None
    rows.append(ReportRow("discriminate.verdict", result.verdict, expected,
                          None if expected is None else result.verdict == expected))
    if result.certificate:
        merged: set[int] = set()
        for forced in result.certificate:
            merged.update((forced.group_a, forced.group_b))
        summary = "=".join(f"g{g}" for g in sorted(merged)) + " forced"
        rows.append(ReportRow("discriminate.certificate.summary", summary))
        for k, forced in enumerate(result.certificate):
            text = f"groups {forced.group_a},{forced.group_b}: " + \
                "; ".join(_describe_evidence(ev) for ev in forced.chain)
            rows.append(ReportRow(f"discriminate.certificate[{k}]", text))
    if result.witness is not None:
        _, assignment = result.witness
        for k, g in enumerate(assignment):
            rows.append(ReportRow(f"discriminate.witness.eigenvalue[{k}]", float(g)))

    residual, _ = numeric_feasibility_oracle(problem, (0.0, 1.0, 2.0))
    agrees = (residual < oracle_tol) == result.feasible
    rows.append(ReportRow("discriminate.oracle.min_residual", float(residual)))
    rows.append(ReportRow("discriminate.oracle.agrees", str(agrees), "True", agrees))

    rec = check_eigen_discrimination(recognition_problem())
    rows.append(ReportRow("discriminate.recognition.verdict", rec.verdict, "FEASIBLE",
                          rec.verdict == "FEASIBLE"))
    notes.append("the recognition row refers to the two orthogonal pointer states")
    return rows, notes


def _overlap_pair_rows(label: str, w_pure, w_mixed, expected_tv=None,
                       match_tol: float = 1e-9) -> list[ReportRow]:
    k_tv = overlap_tv(w_pure, w_mixed)
    k_bc = overlap_bc(w_pure, w_mixed)
    rows = [
        ReportRow(f"overlap.{label}.overlap_min", k_tv, expected_tv,
                  None if expected_tv is None else bool(abs(k_tv - expected_tv) < match_tol)),
        ReportRow(f"overlap.{label}.overlap_sqrt", k_bc),
        ReportRow(f"overlap.{label}.purity_information_bits", purity_information(k_tv)),
    ]
    return rows


def _overlap_rows(config: RunConfig) -> tuple[list[ReportRow], list[str]]:
    scenario = config.scenario
    match_tol = config.tolerance("match")
    a1, a2 = scenario.a1, scenario.a2
    rows: list[ReportRow] = []
    notes: list[str] = [OVERLAP_CONVENTION_NOTE]

    rho_pure = pure_density(prepare_object_state(a1, a2))
    rho_mixed = prepare_gemenge(a1, a2).density()

    sx = transverse_spin(0.0)
    expected_sx = 1.0 - abs(a1) * abs(a2) if abs((a1 * a2.conjugate()).imag) < 1e-12 else None
    rows += _overlap_pair_rows("spin_x",
                               eigen_distribution(rho_pure, sx),
                               eigen_distribution(rho_mixed, sx),
                               expected_sx, match_tol)

    pr_pure = purity_report(rho_pure)
    pr_mixed = purity_report(rho_mixed)
    s_tuned = transverse_spin(pr_pure.gamma_star)
    rows += _overlap_pair_rows("spin_tuned",
                               eigen_distribution(rho_pure, s_tuned),
                               eigen_distribution(rho_mixed, s_tuned),
                               1.0 - abs(a1) * abs(a2), match_tol)
    rows.append(ReportRow("overlap.purity_rate.pure", pr_pure.r_p, 2.0 * abs(a1) * abs(a2),
                          bool(abs(pr_pure.r_p - 2.0 * abs(a1) * abs(a2)) < match_tol)))
    rows.append(ReportRow("overlap.purity_rate.mixed", pr_mixed.r_p, 0.0,
                          bool(abs(pr_mixed.r_p) < match_tol)))
    rows.append(ReportRow("overlap.purity_information.phase_averaged_bits",
                          phase_averaged_purity_information(rho_pure, rho_mixed)))
    notes.append("the phase-averaged purity information row is a package-defined "
                 "estimate over a uniform 36-point phase grid")

    sd_pure = object_detector_state(a1, a2)
    rho_d_pure = sd_pure.reduced(("D",))
    rho_d_mixed = np.diag([abs(a1) ** 2, abs(a2) ** 2]).astype(complex)
    alg = build_pointer_algebra("D")
    for name, obs in (("pointer_D", alg.q), ("pointer_D_x", alg.qx), ("pointer_D_y", alg.qy)):
        rows += _overlap_pair_rows(name,
                                   eigen_distribution(rho_d_pure, obs),
                                   eigen_distribution(rho_d_mixed, obs),
                                   1.0, match_tol)

    psi_ms = full_chain(Scenario(a1, a2, "pure"))
    w_ms = full_chain(Scenario(a1, a2, "gemenge")) if min(scenario.probabilities) > 1e-12 else None
    it = build_it_observable("full")
    if w_ms is not None:
        expected_b = 1.0 - abs((a1 * a2.conjugate()).real)
        rows += _overlap_pair_rows("interference_full",
                                   eigen_distribution(psi_ms, it.observable),
                                   eigen_distribution(w_ms.density(), it.observable),
                                   expected_b, match_tol)
    else:
        notes.append("interference overlap skipped: one amplitude vanishes, so the "
                     "mixture coincides with the pure chain state")
    return rows, notes


def _born_rows(config: RunConfig) -> tuple[list[ReportRow], list[str]]:
    scenario = config.scenario
    sigma_bound = config.tolerance("born_sigma")
    rows: list[ReportRow] = []
    stream, report = run_trials(scenario)
    rows.append(ReportRow("born.trials", report.trials))
    rows.append(ReportRow("born.stream_digest", stream.scenario_digest))
    for stat in report.stats:
        tag = f"born.outcome[{stat.value:g}]"
        rows.append(ReportRow(f"{tag}.count", stat.count))
        spread = (stat.expected * (1.0 - stat.expected) / report.trials) ** 0.5
        passed = None
        if spread > 0.0:
            passed = bool(abs(stat.frequency - stat.expected) < sigma_bound * spread)
        rows.append(ReportRow(f"{tag}.frequency", stat.frequency, stat.expected, passed))
        rows.append(ReportRow(f"{tag}.z", stat.z_score))
    rows.append(ReportRow("born.chi_square", report.chi_square))
    rows.append(ReportRow("born.p_value", report.p_value, None,
                          None if report.degenerate else bool(report.p_value > 0.001)))
    rows.append(ReportRow("born.degenerate", str(report.degenerate)))
    return rows, []


def _decohere_rows(config: RunConfig) -> tuple[list[ReportRow], list[str]]:
    scenario = config.scenario
    match_tol = config.tolerance("match")
    eps = scenario.env_overlap
    rows: list[ReportRow] = []
    notes: list[str] = []
    if scenario.input_kind == "gemenge":
        notes.append("decoherence sweep uses the pure chain state built from the "
                     "configured amplitudes")
    ms = full_chain(Scenario(scenario.a1, scenario.a2, "pure"))
    rho0 = ms.density()
    cross = complex(rho0[0, 7])
    for n in range(scenario.n_env + 1):
        result = decohere(ms, n, eps)
        law = float(eps) ** n if n > 0 else 1.0
        rows.append(ReportRow(f"decohere.coherence_factor[{n}]", result.coherence_factor,
                              law, bool(abs(result.coherence_factor - law) < match_tol)))
        if abs(cross) > 1e-12:
            measured = complex(result.reduced_ms[0, 7]) / cross
            rows.append(ReportRow(f"decohere.offdiag_scale[{n}]", float(measured.real),
                                  law, bool(abs(measured - law) < match_tol)))
    if abs(cross) <= 1e-12:
        notes.append("off-diagonal scaling rows skipped: the chain state has no "
                     "pointer coherence to suppress")
    return rows, notes


_COMMAND_BUILDERS = {
    "chain": _chain_rows,
    "discriminate": _discriminate_rows,
    "overlap": _overlap_rows,
    "born": _born_rows,
    "decohere": _decohere_rows,
}


def execute(config: RunConfig) -> Report:
    """Run the configured command and collect a labeled, deterministic report."""
    if config.command == "all":
        rows: list[ReportRow] = []
        notes: list[str] = []
        for name in ("chain", "discriminate", "overlap", "born", "decohere"):
            r, n = _COMMAND_BUILDERS[name](config)
            rows += r
            notes += n
    else:
        rows, notes = _COMMAND_BUILDERS[config.command](config)
    return Report(
        command=config.command,
        digest=scenario_digest(config.scenario),
        scenario=_scenario_echo(config.scenario),
        version=__version__,
        rows=tuple(rows),
        notes=tuple(notes),
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return json.dumps(str(value))
        if value == 0.0:
            value = 0.0  # collapse -0.0 so round trips stay byte-stable
        return f"{value:.12g}"
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot serialize {type(value)}")


def _emit_value(value, indent: int) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_emit_value(value[k], indent + 1)}'
                 for k in sorted(value)]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}  {_emit_value(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    return _fmt(value)


def report_to_dict(report: Report) -> dict:
    return {
        "command": report.command,
        "digest": report.digest,
        "notes": list(report.notes),
        "rows": [
            {"label": r.label, "value": r.value, "expected": r.expected, "passed": r.passed}
            for r in report.rows
        ],
        "scenario": {k: v for k, v in report.scenario},
        "version": report.version,
    }


def render_report(report: Report, output_format: str = "structured-text") -> str:
    """Serialize a report; byte-stable for equal inputs."""
    if output_format == "structured-text":
        return _emit_value(report_to_dict(report), 0) + "\n"
    if output_format == "csv":
        if report.command == "born":
            lines = ["outcome,count,frequency,expected,z"]
            by_tag: dict[str, dict[str, object]] = {}
            for row in report.rows:
                if row.label.startswith("born.outcome["):
                    tag, field = row.label.rsplit(".", 1)
                    by_tag.setdefault(tag, {"expected": row.expected})[field] = row.value
                    if field == "frequency":
                        by_tag[tag]["expected"] = row.expected
            for tag in sorted(by_tag, reverse=True):
                entry = by_tag[tag]
                outcome = tag[len("born.outcome["):-1]
                lines.append(",".join([
                    outcome,
                    _fmt(entry.get("count", 0)),
                    _fmt(entry.get("frequency", 0.0)),
                    _fmt(entry.get("expected", 0.0)),
                    _fmt(entry.get("z", 0.0)),
                ]))
            return "\n".join(lines) + "\n"
        lines = ["label,value,expected,status"]
        for row in report.rows:
            status = "" if row.passed is None else ("pass" if row.passed else "fail")
            expected = "" if row.expected is None else _fmt(row.expected).strip('"')
            lines.append(f"{row.label},{_fmt(row.value).strip(chr(34))},{expected},{status}")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown output format {output_format!r}")


def parse_report(text: str) -> Report:
    """Inverse of the structured-text rendering."""
    data = json.loads(text)
    rows = tuple(
        ReportRow(r["label"], r["value"], r.get("expected"), r.get("passed"))
        for r in data["rows"]
    )
    scenario = tuple(sorted(data["scenario"].items()))
    return Report(data["command"], data["digest"], scenario, data["version"],
                  rows, tuple(data["notes"]))


def emit_report(report: Report, output_format: str, path: str | None) -> str:
    """Render and optionally write a report; returns the rendered text."""
    text = render_report(report, output_format)
    if path is not None:
        with open(path, "w", encoding="ascii", newline="\n") as handle:
            handle.write(text)
    return text


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mschain",
        description="measurement chain simulator and analysis toolkit",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--out", help="output path (defaults to stdout)")
    parser.add_argument("--format", choices=FORMATS, dest="output_format")
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            with open(args.config, "r", encoding="utf-8") as handle:
                text = handle.read()
        else:
            text = "{}"
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in (("seed", args.seed), ("trials", args.trials),
                           ("output_path", args.out), ("output_format", args.output_format)):
            if value is not None:
                data[key] = value
        config = config_from_dict(data, override_command=args.command)
        report = execute(config)
        text = emit_report(report, config.output_format, config.output_path)
        if config.output_path is None:
            sys.stdout.write(text)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
