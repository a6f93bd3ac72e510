"""Command-line drivers.  Every subcommand prints a plain ``key: value``
report (byte-stable for a fixed configuration) and can also write it to
``--out`` and a JSON document to ``--json``.

Exit codes: 0 pass, 1 verdict failure, 2 usage, 3 precision exhaustion.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import click

from . import __version__
from .errors import (InvalidLabel, NoConvergence, OutOfTableRange, PadicError, PrecisionExhausted,
                     UnsupportedInput, WeightMismatch)
from .padic import FieldDesc, PadicScalar, parse_scalar

EXIT_FAIL, EXIT_USAGE, EXIT_PRECISION = 1, 2, 3


@dataclass
class RunConfig:
    command: str
    p: int = 5
    N: int = 12
    K: int = 60
    L: int = 0
    ext: str = "qp"
    k: int | None = None
    ap: str | None = None
    alpha: str | None = None
    beta: str | None = None
    m: int = 1
    depth: int = 2
    max_iter: int = 60
    extra: dict = field(default_factory=dict)

    def field(self, N: int | None = None) -> FieldDesc:
        return parse_ext(self.ext, self.p, self.N if N is None else N)


class Report:
    def __init__(self, cfg: RunConfig, anchor: str):
        self.cfg = cfg
        self.anchor = anchor
        self.rows: list[tuple[str, object]] = []
        self.verdicts: list[tuple[str, bool]] = []

    def add(self, key: str, value) -> None:
        self.rows.append((key, value))

    def verdict(self, key: str, ok: bool) -> None:
        self.verdicts.append((key, bool(ok)))
        self.add(key, "true" if ok else "false")

    @property
    def ok(self) -> bool:
        return all(v for _, v in self.verdicts)

    def text(self) -> str:
        cfg = {k: v for k, v in asdict(self.cfg).items() if v is not None and k not in ("command", "extra")}
        cfg.update(self.cfg.extra)
        lines = [f"# padicwach {__version__}", f"command: {self.cfg.command}", f"anchor: {self.anchor}"]
        lines += [f"config.{k}: {cfg[k]}" for k in sorted(cfg)]
        lines += [f"{k}: {v}" for k, v in self.rows]
        lines.append(f"verdict: {'pass' if self.ok else 'fail'}")
        return "\n".join(lines) + "\n"

    def as_json(self) -> dict:
        return {"command": self.cfg.command, "anchor": self.anchor, "config": asdict(self.cfg),
                "results": {k: str(v) for k, v in self.rows}, "pass": self.ok}


def parse_ext(ext: str, p: int, N: int) -> FieldDesc:
    """``qp``, ``unramified``, ``eisenstein`` or ``cyclotomic[:m]``; a
    ``:c0,c1,...,1`` suffix on the first two gives the defining polynomial."""
    name, _, arg = ext.partition(":")
    if name == "qp":
        return FieldDesc.qp(p, N)
    if name == "cyclotomic":
        return FieldDesc.cyclotomic(p, N, int(arg or 1))
    g = tuple(int(x) for x in arg.split(",")) if arg else None
    if name == "unramified":
        return FieldDesc.unramified(p, N, g)
    if name == "eisenstein":
        return FieldDesc.eisenstein(p, N, g)
    raise click.BadParameter(f"unknown extension {ext!r}", param_hint="--ext")


def parse_value(text: str, F: FieldDesc, name: str) -> PadicScalar:
    try:
        if " mod " in text:
            return parse_scalar(text, F)
        return PadicScalar.from_rational(F, Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(f"cannot read {text!r}: {exc}", param_hint=f"--{name}")


def parse_rational(text: str, name: str) -> Fraction:
    """Exact input, so that callers can work above the report precision."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(f"cannot read {text!r}: {exc}", param_hint=f"--{name}")


def emit(rep: Report, out: str | None, json_path: str | None) -> None:
    text = rep.text()
    click.echo(text, nl=False)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(rep.as_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    sys.exit(0 if rep.ok else EXIT_FAIL)


def run(build):
    """Call ``build`` and map module errors to exit codes."""
    try:
        return build()
    except (PrecisionExhausted, NoConvergence) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_PRECISION)
    except (OutOfTableRange, InvalidLabel, WeightMismatch, UnsupportedInput) as exc:
        raise click.UsageError(f"{type(exc).__name__}: {exc}")
    except PadicError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_FAIL)


def common(defaults: dict | None = None):
    d = {"p": 5, "N": 12, "K": 60, **(defaults or {})}

    def wrap(f):
        opts = [
            click.option("--p", "p", type=int, default=d["p"], show_default=True, help="the prime"),
            click.option("--N", "N", type=int, default=d["N"], show_default=True, help="p-adic precision"),
            click.option("--K", "K", type=int, default=d["K"], show_default=True, help="X-adic truncation"),
            click.option("--L", "L", type=int, default=0, help="pole order allowance"),
            click.option("--ext", default=d.get("ext", "qp"), show_default=True, help="coefficient field"),
            click.option("--max-iter", "max_iter", type=int, default=60, show_default=True),
            click.option("--out", type=click.Path(dir_okay=False), default=None, help="write the report here"),
            click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None,
                         help="write a JSON document here"),
        ]
        for o in reversed(opts):
            f = o(f)
        return f
    return wrap


@click.group()
@click.version_option(__version__)
def main():
    """Crystalline representations, Wach modules and p-adic distributions."""


@main.command()
@common()
@click.option("--alpha", required=True, help="eigenvalue alpha (rational or 'c mod p^N' form)")
@click.option("--beta", required=True, help="eigenvalue beta")
@click.option("--k", type=int, required=True)
@click.option("--split", is_flag=True, help="put the filtration line on the unit-root eigenline")
def classify(p, N, K, L, ext, max_iter, out, json_path, alpha, beta, k, split):
    """Classify the filtered phi-module D(alpha, beta)."""
    from .filtmod import ABS_IRRED, SPLIT, classify as _classify, is_admissible, make_Dab
    cfg = RunConfig("classify", p, N, K, L, ext, k, None, alpha, beta, max_iter=max_iter,
                    extra={"split": split})
    F = cfg.field()
    a, b = parse_value(alpha, F, "alpha"), parse_value(beta, F, "beta")
    rep = Report(cfg, "filtered phi-modules of dimension 2: classification")

    def go():
        D = make_Dab(a, b, k, SPLIT if split else ABS_IRRED, F)
        ok, wit = is_admissible(D)
        rep.add("module", D.to_text())
        rep.verdict("admissible", ok)
        if ok:
            rep.add("class", _classify(D))
        else:
            rep.add("witness", wit)
    run(go)
    emit(rep, out, json_path)


@main.command()
@common({"K": 40})
@click.option("--kind", type=click.Choice(["Qp", "supersingular-k2", "ap0", "split"]), default="ap0",
              show_default=True)
@click.option("--r", type=int, default=0, help="twist for the Qp(r) example")
@click.option("--k", type=int, default=2, show_default=True)
def wach(p, N, K, L, ext, max_iter, out, json_path, kind, r, k):
    """Build an example Wach module and check its structure."""
    from .wach import psi_on_quotient_check, reduce_mod_X, verify_commutation, wach_example
    from .filtmod import charpoly, is_admissible
    cfg = RunConfig("wach", p, N, K, L, ext, k, max_iter=max_iter, extra={"kind": kind, "r": r})
    rep = Report(cfg, "Wach modules: examples, reduction mod X")

    def go():
        F = cfg.field()
        W = wach_example(kind, F, K, r, k)
        _, v = verify_commutation(W)
        rep.add("weights", list(W.weights))
        rep.add("commutation_residual_val", v)
        rep.verdict("commutation", v >= N)
        if W.d == 2:
            D = reduce_mod_X(W)
            c0, c1, _ = charpoly(D)
            rep.add("charpoly", f"X^2 + ({c1})X + ({c0})")
            rep.add("jumps", list(D.jumps))
            rep.verdict("admissible", is_admissible(D)[0])
            rep.verdict("psi_on_quotient", psi_on_quotient_check(W))
    run(go)
    emit(rep, out, json_path)


@main.command()
@common()
@click.option("--k", type=int, required=True)
@click.option("--ap", required=True, help="a_p with val(a_p) large enough")
def lift(p, N, K, L, ext, max_iter, out, json_path, k, ap):
    """Construct N_{k,a_p} by deformation of N_{k,0} and compare mod p."""
    from .wach import ap0_module
    from .wachlift import compare_mod_p, construct_Nkap
    cfg = RunConfig("lift", p, N, K, L, ext, k, ap, max_iter=max_iter)
    rep = Report(cfg, "Wach lift N_{k,a_p} and reduction mod p")

    def go():
        F = cfg.field()
        a = parse_value(ap, F, "ap") if " mod " in ap else parse_rational(ap, "ap")
        res = construct_Nkap(k, a, F, K, max_iter=max_iter)
        rep.add("alpha_bound", res.alpha)
        rep.add("H_division_loss", res.H.total_loss)
        rep.add("gamma_iterations", res.gamma.iterations)
        rep.add("gamma_residual_trace", [list(t) for t in res.gamma.trace])
        rep.verdict("gamma_strictly_improving", res.gamma.strictly_improving)
        rep.add("commutation_residual_val", res.residual)
        rep.verdict("commutation", res.residual >= N - res.alpha)
        rep.verdict("charpoly", res.charpoly_ok)
        rep.add("jumps", list(res.jumps))
        rep.verdict("compare_mod_p", compare_mod_p(res.module, ap0_module(F, K, k)))
    run(go)
    emit(rep, out, json_path)


@main.command()
@click.option("--p", "p", type=int, default=5, show_default=True)
@click.option("--k", type=int, required=True)
@click.option("--valap", required=True, help="val(a_p), e.g. 1/2, 1, 2")
@click.option("--apmodp", type=int, default=None, help="residue of a_p/p (needed when val(a_p) = 1)")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None)
def predict(p, k, valap, apmodp, out, json_path):
    """Predicted mod-p reductions on both sides of the correspondence."""
    from .wachlift import corr_modp, predict_Pibar, predict_Vbar
    cfg = RunConfig("predict", p, k=k, extra={"valap": valap, "apmodp": apmodp})
    v = parse_rational(valap, "valap")
    pi = run(lambda: predict_Pibar(p, k, v, apmodp))
    try:
        rho = predict_Vbar(p, k, v)
    except OutOfTableRange:
        rho = None
    rep = Report(cfg, f"reduction tables {pi.anchor}" + (f", {rho.anchor}" if rho else ""))
    rep.add("row", f"{pi.formula} / {rho.formula if rho else 'n/a'}")
    rep.add("Pibar", pi)
    if rho is not None:
        rep.add("Vbar", rho)
        rep.verdict("corr_modp", corr_modp(pi.labels) == rho.labels[0])
    emit(rep, out, json_path)


def _pair(p: int, N: int, K: int, depth: int):
    from .gl2 import ap0_k2_pair
    return ap0_k2_pair(p=p, N=N, K=K, depth=depth)


@main.command()
@common({"K": 120})
@click.option("--depth", type=int, default=2, show_default=True)
@click.option("--m", type=int, default=2, show_default=True, help="highest cyclotomic level for Fil^0")
def dist(p, N, K, L, ext, max_iter, out, json_path, depth, m):
    """The distribution pair of the a_p = 0, k = 2 module and its three conditions."""
    from .gl2 import seq_conditions_check
    cfg = RunConfig("dist", p, N, K, L, ext, 2, m=m, depth=depth, max_iter=max_iter)
    rep = Report(cfg, "distribution pair conditions 1)-3) for a_p = 0, k = 2")

    def go():
        pair = _pair(p, N, K, depth)
        r = seq_conditions_check(pair, ms=tuple(range(1, m + 1)))
        rep.add("alpha", pair.alpha)
        rep.add("order_exponents", {s: [round(x, 6) for x in e] for s, e in r.order})
        rep.verdict("order", r.order_ok)
        rep.add("fil0_residuals", {f"n={n},m={mm}": v for (n, mm), v in r.fil0})
        if r.fil0_skipped:
            rep.add("fil0_skipped_levels", r.fil0_skipped)
        rep.verdict("fil0", r.fil0_ok)
        rep.add("psi_residuals", {f"{s},n={n}": v for (s, n), v in r.psi})
        rep.verdict("psi", r.psi_ok)
    run(go)
    emit(rep, out, json_path)


@main.command(name="bridge")
@common({"K": 120})
@click.option("--depth", type=int, default=2, show_default=True)
@click.option("--guard", type=int, default=2, show_default=True)
def bridge(p, N, K, L, ext, max_iter, out, json_path, depth, guard):
    """Check the bridge identity between the two sides on a compact family."""
    from .gl2 import bridge_family, check_bridge
    cfg = RunConfig("bridge", p, N, K, L, ext, 2, depth=depth, max_iter=max_iter, extra={"guard": guard})
    rep = Report(cfg, "bridge identity int f mu_alpha = c int I(f) mu_beta")

    def go():
        pair = _pair(p, N, K, depth)
        P = pair.params()
        fam = bridge_family(P, 0, shifts=tuple(range(p)))
        for i, f in enumerate(fam):
            r = check_bridge(pair, f, guard)
            rep.add(f"f{i}.lhs_val", r.lhs.val())
            rep.verdict(f"f{i}.residual_ok", r.ok)
        # swapping alpha and beta is invisible when beta = -alpha; dropping p is not
        wrong = (1 - P.beta / P.alpha) / (1 - P.alpha / P.beta)
        neg = check_bridge(pair, fam[1], guard, constant=wrong)
        rep.add("negative_control.residual_val", neg.residual)
        rep.verdict("negative_control_detected", not neg.ok)
    run(go)
    emit(rep, out, json_path)


main.add_command(bridge, name="bridge-check")


if __name__ == "__main__":
    main()
