"""Command-line front end.

Exit codes:

    0  success
    1  parse error (unreadable file, malformed JSON, rational or series)
    2  validation failure (family, reality, quasiorder, cap)
    3  internal consistency failure (a re-check of computed artifacts failed)
    4  a checked criterion does not hold (verify, check-nf, diagnose --crucial)

Spec files are JSON; series files use the canonical line format.
``QUADNF_WORKERS`` sets the number of worker threads for normalization.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .coeffs import CoefficientError
from .conditions import check_space
from .conjugacy import ManifoldSpec, SpecError, Transform, verify_conjugacy
from .gseries import BigradedSeries, HoloSeries, SeriesError
from .quadric import FamilyError

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVALID = 2
EXIT_INTERNAL = 3
EXIT_CRITERION = 4

DEFAULT_CAP = 8


class _Exit(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _Exit(EXIT_PARSE, f"cannot read {path}: {exc.strerror}") from None


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def load_spec(path, cap=None) -> ManifoldSpec:
    """Parse and validate a spec file, mapping failures to exit codes."""
    text = _read(path)
    try:
        data = json.loads(text)
        spec = ManifoldSpec.from_json(data, cap=cap, check=False)
    except (json.JSONDecodeError, CoefficientError, SeriesError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (SpecError, FamilyError)) and exc.condition != "shape":
            raise _Exit(EXIT_INVALID, f"invalid spec [{exc.condition}]: {exc}") from None
        raise _Exit(EXIT_PARSE, f"cannot parse {path}: {exc}") from None
    try:
        spec.validate()
    except SpecError as exc:
        raise _Exit(EXIT_INVALID, f"invalid spec [{exc.condition}]: {exc}") from None
    return spec


def _load_series(path, cls):
    try:
        return cls.loads(_read(path))
    except (SeriesError, CoefficientError, ValueError) as exc:
        raise _Exit(EXIT_PARSE, f"cannot parse {path}: {exc}") from None


def _load_transform(path):
    try:
        return Transform.loads(_read(path))
    except (SeriesError, CoefficientError, ValueError) as exc:
        raise _Exit(EXIT_PARSE, f"cannot parse {path}: {exc}") from None


def _run(fn):
    try:
        code = fn()
    except _Exit as exc:
        if str(exc):
            click.echo(str(exc), err=True)
        sys.exit(exc.code)
    sys.exit(code or EXIT_OK)


@click.group()
def main():
    """Exact formal normal forms for perturbed Hermitian quadrics."""


@main.command()
@click.argument("spec_file")
def validate(spec_file):
    """Validate a manifold spec file."""
    def go():
        spec = load_spec(spec_file)
        click.echo(f"ok: n={spec.n} d={spec.d} cap={spec.cap} terms={len(spec.perturbation)}")
    _run(go)


@main.command()
@click.argument("spec_file")
@click.option("--degree", "degree", type=int, default=None,
              help=f"Quasidegree cap (default: the spec's cap, else {DEFAULT_CAP}).")
@click.option("--mode", type=click.Choice(["full", "weak", "cm"]), default="full")
@click.option("--f0", "f0_file", default=None, help="Series file with f(0, w) (weak mode).")
@click.option("--out", "out_dir", default=".", help="Directory for the artifacts.")
def normalize(spec_file, degree, mode, f0_file, out_dir):
    """Compute the normal form; writes phi.series, transform.series, report.json."""
    from .engine import EngineError, cm_normalize, normalize_formal, normalize_weak

    def go():
        spec = load_spec(spec_file, cap=degree)
        if f0_file and mode != "weak":
            raise _Exit(EXIT_INVALID, "--f0 is only accepted with --mode weak")
        if mode == "cm" and spec.d != 1:
            raise _Exit(EXIT_INVALID, "--mode cm needs d = 1")
        try:
            if mode == "full":
                rep = normalize_formal(spec)
            elif mode == "cm":
                rep = cm_normalize(spec)
            else:
                f0 = _load_series(f0_file, HoloSeries) if f0_file else None
                rep = normalize_weak(spec, f0)
        except SeriesError as exc:
            raise _Exit(EXIT_INVALID, str(exc)) from None
        except EngineError as exc:
            raise _Exit(EXIT_INTERNAL, f"internal consistency: {exc}") from None
        os.makedirs(out_dir, exist_ok=True)
        _write(os.path.join(out_dir, "phi.series"), rep.phi.dumps())
        _write(os.path.join(out_dir, "transform.series"), rep.transform.dumps())
        _write(os.path.join(out_dir, "report.json"), rep.dumps())
        # re-check the emitted artifacts from scratch
        res = verify_conjugacy(spec, rep.transform, rep.phi)
        conds = check_space(rep.phi, spec.family, mode, spec.cap)
        if res or not conds.passed:
            raise _Exit(EXIT_INTERNAL, "internal consistency: "
                        f"conjugacy residual terms={len(res)}, failed={conds.failures()}")
        click.echo(f"ok: mode={mode} cap={spec.cap} phi terms={len(rep.phi)}")
    _run(go)


@main.command()
@click.argument("spec_file")
@click.argument("phi_file")
@click.argument("transform_file")
def verify(spec_file, phi_file, transform_file):
    """Check the conjugacy equation for given artifacts."""
    def go():
        spec = load_spec(spec_file)
        phi = _load_series(phi_file, BigradedSeries)
        t = _load_transform(transform_file)
        try:
            res = verify_conjugacy(spec, t, phi)
        except SeriesError as exc:
            raise _Exit(EXIT_INVALID, str(exc)) from None
        if res:
            click.echo(f"conjugacy residual: {len(res)} nonzero terms")
            return EXIT_CRITERION
        click.echo("ok: conjugacy residual is zero")
    _run(go)


@main.command("check-nf")
@click.argument("spec_file")
@click.argument("phi_file")
@click.option("--space", type=click.Choice(["full", "weak", "cm"]), default="full")
def check_nf(spec_file, phi_file, space):
    """Check normal-form membership of phi (the family is read from the spec)."""
    def go():
        spec = load_spec(spec_file)
        phi = _load_series(phi_file, BigradedSeries)
        try:
            rep = check_space(phi, spec.family, space, phi.cap)
        except SeriesError as exc:
            raise _Exit(EXIT_INVALID, str(exc)) from None
        click.echo(json.dumps(rep.to_json(), indent=2, sort_keys=True))
        return EXIT_OK if rep.passed else EXIT_CRITERION
    _run(go)


@main.command()
@click.argument("spec_file")
@click.option("--phi", "phi_file", default=None, help="phi.series (for --crucial and --growth).")
@click.option("--transform", "transform_file", default=None, help="transform.series (for --growth).")
@click.option("--crucial", is_flag=True, help="Evaluate the convergence criterion.")
@click.option("--growth", is_flag=True, help="Normalized Fischer norm growth profile.")
@click.option("--bigdenom", "bigdenom_cfg", default=None,
              help='Big-denominator probe, config like "m=2,3;q=0;i=1..12".')
@click.option("--op", "op_id", type=click.Choice(["L1-tilde", "Delta-cubed"]), default="L1-tilde")
@click.option("--regularity", "regularity_cfg", default=None,
              help='Regularity probe, config like "m=2,3;q=0".')
@click.option("--seed", type=int, default=0, help="Seed of the sampled jet (--regularity).")
@click.option("--out", "out_dir", default=None, help="Directory for JSON and text artifacts.")
def diagnose(spec_file, phi_file, transform_file, crucial, growth, bigdenom_cfg, op_id,
             regularity_cfg, seed, out_dir):
    """Convergence diagnostics (advisory except --crucial)."""
    from . import diagnostics as dg

    def emit(name, text, js):
        click.echo(text, nl=False)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            _write(os.path.join(out_dir, name + ".txt"), text)
            _write(os.path.join(out_dir, name + ".json"), js)

    def cfg(text, default_range):
        try:
            c = dg.ProbeConfig.parse(text)
        except ValueError as exc:
            raise _Exit(EXIT_PARSE, f"bad probe config: {exc}") from None
        if "i=" not in text:
            c = dg.ProbeConfig(c.m, c.q, default_range)
        return c

    def go():
        chosen = [crucial, growth, bigdenom_cfg is not None, regularity_cfg is not None]
        if sum(chosen) != 1:
            raise _Exit(EXIT_PARSE, "choose exactly one of --crucial, --growth, --bigdenom, --regularity")
        spec = load_spec(spec_file)
        code = EXIT_OK
        if crucial or growth:
            if not phi_file:
                raise _Exit(EXIT_PARSE, "--phi is required")
            phi = _load_series(phi_file, BigradedSeries)
        if crucial:
            res = dg.crucial_residual(phi, spec.family)
            js = json.dumps({"holds": not res, "residual_terms": len(res),
                             "phi11_terms": len(phi.extract_pq(1, 1)),
                             "phi12_terms": len(phi.extract_pq(1, 2))},
                            indent=2, sort_keys=True) + "\n"
            text = (f"crucial criterion: {'holds' if not res else 'fails'} through cap {phi.cap}"
                    f" ({len(res)} residual terms)\n")
            emit("crucial", text, js)
            if out_dir:
                _write(os.path.join(out_dir, "crucial.series"), res.dumps())
            code = EXIT_OK if not res else EXIT_CRITERION
        elif growth:
            t = _load_transform(transform_file) if transform_file else None
            prof = dg.norm_growth(phi, t)
            emit("growth", prof.to_text(), prof.dumps())
        elif bigdenom_cfg is not None:
            table = dg.bigdenom_probe(spec.family, op_id, cfg(bigdenom_cfg, (1, 12)))
            emit("bigdenom", table.to_text(), table.dumps())
        else:
            rep = dg.regularity_probe(spec, cfg(regularity_cfg, (0, 0)), seed=seed)
            emit("regularity", rep.to_text(), rep.dumps())
        return code
    _run(go)


if __name__ == "__main__":
    main()
