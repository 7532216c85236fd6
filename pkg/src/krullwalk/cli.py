"""Command-line front end.

Every command writes one artifact (JSON, or CSV for tables) that embeds the
tool version, the full configuration, the seed and the wall time.  Exit
status: 0 success, 1 usage or input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import __version__
from . import folner, krull, walk
from .groups import FreeAbelian, Magnus, RingSemidirect, Wreath, parse_group_spec, verify_relations
from .krull import ExactnessError, DimensionDeficit
from .ring import Coefficients, LaurentPolynomial

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2


class InputError(Exception):
    pass


class VerificationFailed(Exception):
    def __init__(self, msg: str, artifact: dict):
        super().__init__(msg)
        self.artifact = artifact


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: usage error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def data_path(name: str) -> Path:
    """``builtin:<name>`` resolves to a presentation shipped with the package."""
    if name.startswith("builtin:"):
        stem = name.split(":", 1)[1]
        path = Path(str(resources.files("krullwalk") / "data" / f"{stem}.mod"))
    else:
        path = Path(name)
    if not path.exists():
        raise InputError(f"no such file: {name}")
    return path


def load_pres(name: str) -> krull.ModulePresentation:
    text = data_path(name).read_text()
    try:
        return krull.parse_presentation(text)
    except ValueError as exc:
        raise InputError(f"malformed presentation file {name}: {exc}") from exc


def group_spec(text: str):
    if text.startswith("ring-semidirect:"):
        text = "ring-semidirect:" + str(data_path(text.split(":", 1)[1]))
    try:
        return parse_group_spec(text)
    except (ValueError, KeyError) as exc:
        raise InputError(f"unknown group spec {text!r}: {exc}") from exc


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"expected a comma-separated integer list, got {text!r}") from exc


def _num(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


# -- commands ---------------------------------------------------------------

def cmd_krull_dim(args) -> dict:
    pres = load_pres(args.file)
    rep = krull.krull_report(pres, int_list(args.primes) if args.primes else ())
    return {"file": args.file, "rank": pres.rank, **rep.to_dict()}


def _fitting_over(pres, char):
    fit = krull.fitting_ideal0(pres)
    if pres.coeffs.is_field:
        return fit, pres.coeffs
    coeffs = Coefficients.rationals() if char == 0 else Coefficients.prime_field(char)
    return [g.change_coefficients(coeffs) for g in fit], coeffs


def cmd_find_transcendental(args) -> dict:
    pres = load_pres(args.file)
    ideal, coeffs = _fitting_over(pres, args.char)
    fam = krull.find_transcendental_monomials(ideal, coeffs, args.target, rank=pres.rank,
                                              max_radius=args.max_radius)
    cert = krull.monomials_independent(fam.monomials, ideal, coeffs, pres.rank)
    return {"file": args.file, "target": args.target, **fam.to_dict(), "certified": cert}


def cmd_witness(args) -> dict:
    pres = load_pres(args.file)
    rep = krull.krull_report(pres, int_list(args.primes) if args.primes else ())
    wit = krull.special_subgroup_witness(rep, pres)
    out = {"file": args.file, "report": rep.to_dict(), **wit.to_dict(), "certified": None}
    if wit.monomials is not None:
        ideal, coeffs = _fitting_over(pres, wit.monomials.characteristic)
        ok = krull.monomials_independent(wit.monomials.monomials, ideal, coeffs, pres.rank)
        out["certified"] = ok
        if not ok:
            raise VerificationFailed("witness monomials failed the elimination re-check", out)
    return out


def cmd_exact_return(args) -> dict:
    spec = group_spec(args.group)
    if args.nmax < 0 or args.epsilon < 0:
        raise InputError("--nmax and --epsilon must be nonnegative")
    method = args.method
    if method == "auto":
        method = "transfer" if walk.transfer_supported(spec) and args.epsilon > 0 else "convolution"
    if method == "transfer":
        run = walk.transfer_return_probabilities(spec, args.nmax)
    else:
        run = walk.exact_return_probabilities(spec, args.nmax, args.epsilon, args.budget_elements)
    rows = [{"n": e.n, "p_lower": _num(e.p_lower), "p_upper": _num(e.p_upper)} for e in run.estimates if e.n > 0]
    return {"group": args.group, "method": method, "rows": rows, "truncated": run.truncated,
            "truncation_reason": run.reason, "max_support": run.max_support}


def cmd_simulate(args) -> dict:
    spec = group_spec(args.group)
    if args.samples < 1:
        raise InputError("--samples must be at least 1")
    ests = walk.monte_carlo_return(spec, int_list(args.ns), args.samples, args.seed, args.threads)
    rows = [{"n": e.n, "p": e.p, "stderr": e.stderr, "wilson_lower": e.p_lower, "wilson_upper": e.p_upper,
             "hits": e.hits, "samples": e.samples} for e in ests]
    return {"group": args.group, "rows": rows}


def read_walk_csv(path: str) -> list[tuple[float, float]]:
    try:
        with open(path, newline="") as fh:
            # skip the "# krullwalk ..." provenance line our own CSV output starts with
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    except OSError as exc:
        raise InputError(str(exc)) from exc
    data = []
    for r in rows:
        try:
            n = float(r["n"])
            if r.get("p") not in (None, ""):
                p = float(Fraction(r["p"]))
            else:
                lo, hi = float(Fraction(r["p_lower"])), float(Fraction(r["p_upper"]))
                p = lo if lo == hi else math.sqrt(lo * hi)
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad row in {path}: {r}") from exc
        if p > 0:
            data.append((n, p))
    return data


def cmd_fit(args) -> dict:
    data = read_walk_csv(args.input)
    try:
        fit = walk.fit_exponent(data, args.model, min_n=args.min_n, gamma=args.gamma, d=args.d,
                                bootstrap=args.bootstrap, seed=args.seed)
    except walk.FitFailure as exc:
        raise InputError(f"fit failure: {exc}") from exc
    return fit.to_dict()


def cmd_folner_build(args) -> dict:
    text = data_path(args.ring).read_text()
    try:
        couple = folner.build_ring_couple(text, args.m, args.budget_elements)
    except folner.BudgetExceeded as exc:
        raise InputError(f"budget exhausted: {exc} (partial count {exc.partial})") from exc
    return {"couple": folner.couple_to_json(couple), "c0": str(couple.c0)}


def _load_couple(path: str):
    try:
        obj = json.loads(data_path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed couple file {path}: {exc}") from exc
    if "couple" in obj and "m" not in obj:
        obj = obj["couple"]
    if "result" in obj and "couple" in obj["result"]:
        obj = obj["result"]["couple"]
    try:
        return folner.couple_from_json(obj)
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed couple file {path}: {exc}") from exc


def _params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"expected NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = float(v)
    return out


def cmd_folner_verify(args) -> dict:
    couple = _load_couple(args.couple)
    V = None
    if args.V:
        try:
            V = folner.parse_size_function(args.V, **_params(args.param))
        except (ValueError, SyntaxError) as exc:
            raise InputError(f"bad size function: {exc}") from exc
    try:
        c0 = Fraction(args.c0)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"--c0 must be a number or a fraction like 7/13, got {args.c0!r}") from exc
    rep = folner.verify_couple(couple, c0, V, args.method, args.budget_elements, args.threads)
    out = {"couple": args.couple, "m": couple.m, **rep.to_dict(couple.group)}
    if rep.indeterminate:
        raise InputError("budget exhausted: containment check is indeterminate")
    if not rep.passed:
        raise VerificationFailed("couple axioms fail", out)
    return out


def cmd_folner_descend(args) -> dict:
    couple = _load_couple(args.couple)
    try:
        res = folner.quotient_descent(couple, args.projection, args.n, args.budget_elements)
    except folner.BudgetExceeded as exc:
        raise InputError(f"budget exhausted: {exc}") from exc
    rep = folner.verify_couple(res.couple, Fraction(1) / (1 + res.ratio))
    out = {"descent": res.to_dict(), "couple": folner.couple_to_json(res.couple),
           "verification": rep.to_dict(res.couple.group)}
    if not rep.passed:
        raise VerificationFailed("descended couple fails verification", out)
    return out


def cmd_noether_count(args) -> dict:
    text = data_path(args.ring).read_text()
    ms = int_list(args.ms)
    try:
        sizes = [folner.noether_size_count(text, m, args.budget_elements) for m in ms]
    except folner.BudgetExceeded as exc:
        raise InputError(f"budget exhausted: {exc}") from exc
    out = {"ring": args.ring, "rows": [{"m": m, "count": str(s)} for m, s in zip(ms, sizes)]}
    if len(ms) >= 4:
        out["growth"] = folner.fit_growth(sizes, ms).to_dict()
    return out


DEFAULT_LAWS = {"metabelian": "[[w1,w2],[w3,w4]]"}


def cmd_verify_relations(args) -> dict:
    spec = group_spec(args.group)
    laws = [s.strip() for s in args.relations.split(";") if s.strip()] if args.relations else None
    if laws is None:
        laws = [DEFAULT_LAWS["metabelian"]]
        if isinstance(spec, Magnus) and spec.modulus:
            laws.append(f"[w1,w2]^{spec.modulus}")
    try:
        rep = verify_relations(spec, laws, args.trials, args.seed, args.max_len)
    except ValueError as exc:
        raise InputError(f"bad law: {exc}") from exc
    out = {"group": args.group, "laws": laws, **rep.to_dict()}
    if not rep.passed:
        raise VerificationFailed("relations violated", out)
    return out


# -- Krull dimension vs return exponent pipeline ---------------------------------------

def presentation_for(spec) -> tuple[krull.ModulePresentation, float, str]:
    """Derived-module presentation, predicted exponent and model of a family."""
    d = spec.rank
    if isinstance(spec, Wreath) and spec.modulus >= 2 and spec.colors == 1:
        pres = krull.ModulePresentation(Coefficients.prime_field(spec.modulus), d, 1, [])
        return pres, d / (d + 2), "stretched_exp"
    if isinstance(spec, Wreath) and spec.modulus == 0:
        pres = krull.ModulePresentation(Coefficients.integers(), d, 1, [])
        return pres, d / (d + 2), "stretched_exp_log"
    if isinstance(spec, Magnus):
        if spec.modulus:
            pres = krull.koszul_presentation(d, Coefficients.integers(), spec.modulus)
            return pres, d / (d + 2), "stretched_exp"
        pres = krull.koszul_presentation(d, Coefficients.integers())
        return pres, d / (d + 2), "stretched_exp_log"
    if isinstance(spec, FreeAbelian):
        pres = krull.ModulePresentation(Coefficients.integers(), d, 1, [[LaurentPolynomial.one(
            Coefficients.integers(), d)]])
        return pres, 0.0, "power_law"
    if isinstance(spec, RingSemidirect):
        ring = spec.ring
        pres = krull.ModulePresentation(ring.coeffs, d, 1, [[g] for g in ring.generators])
        k = ring.dimension()
        k = 0 if k == "empty" else k
        return pres, k / (k + 2) if k else 0.0, "stretched_exp"
    raise InputError(f"no built-in presentation for {spec}")


def cmd_pipeline(args) -> dict:
    spec = group_spec(args.group)
    pres, predicted, model = presentation_for(spec)
    rep = krull.krull_report(pres)
    k = rep.krull_group
    prof = walk.return_profile(spec, args.nexact, int_list(args.mc_ns) if args.mc_ns else [], args.samples,
                               args.seed, args.threads, args.epsilon, args.budget_elements, model,
                               args.min_n)
    out = {"group": args.group, "krull": rep.to_dict(), "k": k, "predicted_alpha": predicted,
           "model": model, "profile": prof.to_dict()}
    if prof.fit is None:
        out["verdict"] = "fit_failed"
        raise VerificationFailed(f"fit failure: {prof.error}", out)
    a = prof.fit.alpha
    if model == "power_law":
        consistent = k <= 1
    elif k <= 1:
        consistent = a <= 1 / 3 + args.tol
    else:
        consistent = a >= 1 / 3 + args.margin
    out["alpha_hat"] = a
    out["verdict"] = "consistent" if consistent else "inconsistent"
    if not consistent:
        raise VerificationFailed("fitted exponent contradicts the Krull dimension", out)
    return out


# -- plumbing ------------------------------------------------------------------------

COMMANDS = {
    "krull-dim": cmd_krull_dim,
    "find-transcendental": cmd_find_transcendental,
    "witness": cmd_witness,
    "exact-return": cmd_exact_return,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "folner-build": cmd_folner_build,
    "folner-verify": cmd_folner_verify,
    "folner-descend": cmd_folner_descend,
    "noether-count": cmd_noether_count,
    "verify-relations": cmd_verify_relations,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--budget-elements", type=int, default=2_000_000)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="write the artifact here instead of stdout")

    p = _Parser(prog="krullwalk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"krullwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("krull-dim", parents=[common], help="Krull dimensions of a module presentation")
    s.add_argument("file")
    s.add_argument("--primes", default="")

    s = sub.add_parser("find-transcendental", parents=[common], help="certified independent monomials")
    s.add_argument("file")
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--char", type=int, default=0, help="field for integer presentations (0 means Q)")
    s.add_argument("--max-radius", type=int, default=2)

    s = sub.add_parser("witness", parents=[common], help="special subgroup witness")
    s.add_argument("file")
    s.add_argument("--primes", default="")

    s = sub.add_parser("exact-return", parents=[common], help="exact return probabilities")
    s.add_argument("--group", required=True)
    s.add_argument("--nmax", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--method", choices=("auto", "convolution", "transfer"), default="auto")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo return probabilities")
    s.add_argument("--group", required=True)
    s.add_argument("--ns", required=True)
    s.add_argument("--samples", type=int, required=True)

    s = sub.add_parser("fit", parents=[common], help="fit a decay model to return data")
    s.add_argument("--model", choices=walk.MODELS, default="stretched_exp")
    s.add_argument("--input", required=True)
    s.add_argument("--min-n", type=float, default=64)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--d", type=int, default=None)
    s.add_argument("--bootstrap", type=int, default=200)

    s = sub.add_parser("folner-build", parents=[common], help="ring Folner couple")
    s.add_argument("--ring", required=True)
    s.add_argument("--m", type=int, required=True)

    s = sub.add_parser("folner-verify", parents=[common], help="verify the couple axioms")
    s.add_argument("--couple", required=True)
    s.add_argument("--c0", default="1/2", help="required ratio, decimal or fraction")
    s.add_argument("--V", default=None, help='size function of m, e.g. "2^(4*m+1)*(4*m+1)"')
    s.add_argument("--param", action="append", help="NAME=VALUE for names in --V")
    s.add_argument("--method", choices=("auto", "exhaustive", "structured"), default="auto")

    s = sub.add_parser("folner-descend", parents=[common], help="push a couple to a quotient")
    s.add_argument("--couple", required=True)
    s.add_argument("--projection", choices=("cursor", "identity", "trivial"), default="cursor")
    s.add_argument("--n", type=int, default=None)

    s = sub.add_parser("noether-count", parents=[common], help="normal-form counts and growth fit")
    s.add_argument("--ring", required=True)
    s.add_argument("--ms", required=True)

    s = sub.add_parser("verify-relations", parents=[common], help="check laws on random words")
    s.add_argument("--group", required=True)
    s.add_argument("--relations", default=None, help="semicolon-separated laws")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--max-len", type=int, default=8)

    s = sub.add_parser("pipeline", parents=[common], help="Krull dimension against return exponent")
    s.add_argument("--group", required=True)
    s.add_argument("--nexact", type=int, default=512)
    s.add_argument("--mc-ns", default="1024,2048,4096")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--epsilon", type=float, default=1e-12)
    s.add_argument("--min-n", type=float, default=64)
    s.add_argument("--tol", type=float, default=0.08)
    s.add_argument("--margin", type=float, default=0.08)
    return p


def _csv_rows(result: dict) -> list[dict]:
    if isinstance(result.get("rows"), list):
        return result["rows"]
    flat = {}

    def walk_(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk_(f"{prefix}.{k}" if prefix else str(k), x)
        else:
            flat[prefix] = json.dumps(v) if isinstance(v, list) else v
    walk_("", result)
    return [{"key": k, "value": v} for k, v in flat.items()]


def render(artifact: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(artifact, indent=2, sort_keys=True, default=_num) + "\n"
    rows = _csv_rows(artifact["result"])
    buf = io.StringIO()
    header = [f"# krullwalk {artifact['version']} command={artifact['command']} seed={artifact['seed']} "
              f"wall_time={artifact['wall_time']:.3f} config={json.dumps(artifact['config'], sort_keys=True)}"]
    buf.write(header[0] + "\n")
    if rows:
        fields = list(rows[0].keys())
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _num(v) for k, v in r.items()})
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    if args.threads < 1 or args.budget_elements < 1:
        print("krullwalk: input error: --threads and --budget-elements must be positive", file=sys.stderr)
        return EXIT_INPUT
    start = time.perf_counter()
    status = EXIT_OK
    try:
        result = COMMANDS[args.command](args)
    except VerificationFailed as exc:
        print(f"krullwalk: verification failed: {exc}", file=sys.stderr)
        result, status = exc.artifact, EXIT_VERIFY
    except (InputError, DimensionDeficit, ExactnessError, ValueError, folner.DegenerateInput,
            folner.ProjectionMismatch) as exc:
        print(f"krullwalk: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except folner.BudgetExceeded as exc:
        print(f"krullwalk: budget exceeded: {exc} (raise --budget-elements)", file=sys.stderr)
        return EXIT_INPUT
    except MemoryError:
        print("krullwalk: input error: out of memory (reduce the budget)", file=sys.stderr)
        return EXIT_INPUT
    artifact = {"tool": "krullwalk", "version": __version__, "command": args.command, "config": config,
                "seed": args.seed, "wall_time": time.perf_counter() - start, "exit_status": status,
                "result": result}
    text = render(artifact, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
