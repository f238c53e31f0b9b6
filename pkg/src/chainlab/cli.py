"""``chainlab`` command line.

Every subcommand writes one ``#`` header line with its parameters followed
by TSV rows (``generate`` and ``ct-sample`` write a chain file instead, which
is itself readable with ``--input``). Exit status: 0 success, 2 negative
analysis verdict, 1 error.
"""

from __future__ import annotations

import argparse
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .absolute_probability import aps_backward, class_pstar_verdict, uniform
from .bounds import EtaParams, log_eta_n
from .chain_core import ChainWindow, deviation_from_stochasticity, strong_aperiodicity_gamma
from .chain_io import (
    MalformedSpec,
    UnreadableInput,
    fmt,
    format_chain,
    parse_grid,
    read_chain,
    read_ct,
)
from .continuous_time import ct_reciprocity_beta, sample_discrete, transition
from .dynamics import FLOW_MODES, contraction_check, epoch_times, simulate
from .errors import ChainError, ChainIndexError, DimensionMismatch, DomainError
from .flow_graph import DEFAULT_THRESHOLD, build_flow_graph, connected_components, ergodic_classes
from .random_chains import FAMILIES, GeneratorSpec, generate, parse_params
from .reciprocity import approximate_reciprocity_beta, beta_trend, looks_unbounded

NEGATIVE = 2
DEFAULT_HORIZON = 100


class CliError(ChainError):
    pass


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for negative verdicts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: usage error: {message}\n")


def example_path(name: str) -> Path:
    """Path of a shipped example file (``mixing.chain``, ``two_state.ct``, ...)."""
    return Path(str(resources.files("chainlab") / "data" / name))


def _resolve(path: str) -> str:
    # "@name" picks a shipped example
    if path.startswith("@"):
        name = path[1:]
        for suffix in ("", ".chain", ".ct"):
            p = example_path(name + suffix)
            if p.is_file():
                return str(p)
        raise UnreadableInput(f"no shipped example named {name!r}")
    return path


def _load_chain(args) -> ChainWindow:
    has_input = args.input is not None
    has_family = args.family is not None
    if has_input == has_family:
        raise CliError("give exactly one input source: --input or --family")
    if has_input:
        return read_chain(_resolve(args.input))
    return generate(_spec(args), args.count)


def _spec(args) -> GeneratorSpec:
    if args.n is None:
        raise CliError("--family needs --n")
    kv = {}
    if args.params:
        for tok in args.params.split(","):
            if "=" not in tok:
                raise CliError(f"--params expects key=value pairs, got {tok!r}")
            k, v = tok.split("=", 1)
            kv[k.strip()] = v.strip()
    try:
        params = parse_params(kv)
    except ValueError as exc:
        raise CliError(f"bad --params: {exc}") from None
    return GeneratorSpec(args.family, args.n, params, args.seed)


def _horizon(args, chain: ChainWindow) -> int:
    if args.horizon is not None:
        if args.horizon < 1:
            raise CliError("--horizon must be >= 1")
        return chain.t0 + args.horizon
    return chain.stop if chain.extension is None else chain.t0 + max(chain.count, DEFAULT_HORIZON)


def _vector(text: str, n: int, what: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.replace(",", " ").split()])
    except ValueError:
        raise CliError(f"{what} must be a list of reals") from None
    if v.shape != (n,):
        raise DimensionMismatch(f"{what} has {v.size} entries, chain has n={n}")
    return v


def _terminal(text: str, n: int) -> np.ndarray:
    if text == "uniform":
        return uniform(n)
    if text.startswith("basis:"):
        i = int(text.split(":", 1)[1])
        if not 0 <= i < n:
            raise CliError(f"basis index {i} out of range for n={n}")
        return np.eye(n)[i]
    return _vector(text, n, "--terminal")


def _header(cmd: str, source: str = "", **kw) -> str:
    parts = ([source] if source else []) + [f"{k}={v}" for k, v in kw.items() if v is not None]
    return f"# chainlab {cmd} " + " ".join(parts)


def _source(args) -> str:
    if getattr(args, "input", None):
        return f"input={Path(args.input).name if not args.input.startswith('@') else args.input}"
    if getattr(args, "family", None):
        return f"family={args.family} params={args.params or ''} seed={args.seed}"
    return ""


def _table(cols, rows) -> str:
    out = ["\t".join(cols)]
    for r in rows:
        out.append("\t".join(fmt(v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(out) + "\n"


# subcommands: each returns (text, status)

def cmd_validate(args):
    chain = _load_chain(args)
    kind = chain.classification(args.tol)
    rows = [("n", chain.n), ("t0", chain.t0), ("count", chain.count),
            ("extension", chain.extension or "none"), ("classification", kind)]
    if kind != "invalid":
        rows.append(("gamma", strong_aperiodicity_gamma(chain)))
        rows.append(("deviation", deviation_from_stochasticity(chain)))
    text = _header("validate", source=_source(args), tol=args.tol) + "\n" + _table(("field", "value"), rows)
    return text, 0 if kind != "invalid" else NEGATIVE


def cmd_reciprocity(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    cert = approximate_reciprocity_beta(chain, args.p0, h, seed=args.seed)
    trend = beta_trend(chain, args.p0, h) if h - chain.t0 >= 4 else [(h, cert.beta_required)]
    grows = len(trend) >= 2 and looks_unbounded(trend)
    cut = f"{cert.witness_mask:#x}" if cert.witness else "none"
    window = f"[{cert.witness[1]},{cert.witness[2]})" if cert.witness else "none"
    head = _header("reciprocity", source=_source(args), p0=args.p0, horizon=h,
                   exhaustive=str(cert.exhaustive).lower(), witness_cut=cut, witness_window=window,
                   verdict="unbounded" if grows else "bounded")
    return head + "\n" + _table(("horizon", "beta_required"), trend), NEGATIVE if grows else 0


def cmd_aps(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    trace = aps_backward(chain, chain.t0, h, _terminal(args.terminal, chain.n))
    head = _header("aps", source=_source(args), terminal=args.terminal, horizon=h, p_star=fmt(trace.p_star))
    return head + "\n" + trace.to_tsv(), 0


def cmd_pstar(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    v = class_pstar_verdict(chain, args.p0, h)
    head = _header("pstar", source=_source(args), p0=args.p0, horizon=h,
                   verdict="in-pstar" if v.in_pstar else "not-evidenced")
    rows = [("gamma", v.gamma), ("beta", v.beta),
            ("log_eta", v.log_eta_theoretical if v.log_eta_theoretical is not None else "nan"),
            ("eta", v.eta_theoretical if v.eta_theoretical is not None else "nan"),
            ("p_star_empirical", v.p_star_empirical)]
    rows += [(f"p_star@{T}", p) for T, p in v.p_star_trend]
    return head + "\n" + _table(("quantity", "value"), rows), 0 if v.in_pstar else NEGATIVE


def cmd_flowgraph(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    g = build_flow_graph(chain, h, args.threshold)
    comps = ";".join(",".join(map(str, c)) for c in connected_components(g))
    head = _header("flowgraph", source=_source(args), horizon=h, threshold=args.threshold, components=comps)
    return head + "\n" + g.to_tsv(), 0


def cmd_classes(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    ec = ergodic_classes(chain, h, args.tol, args.threshold)
    label = {i: k for k, c in enumerate(ec.classes) for i in c}
    comp = {i: k for k, c in enumerate(ec.flow_components) for i in c}
    ok = ec.class_ergodic and ec.agrees
    head = _header("classes", source=_source(args), horizon=h, tol=args.tol, threshold=args.threshold,
                   class_ergodic=str(ec.class_ergodic).lower(), agrees=str(ec.agrees).lower(),
                   cauchy_gap=fmt(ec.cauchy_gap))
    rows = [(i, label[i], comp[i]) for i in range(chain.n)]
    return head + "\n" + _table(("node", "ergodic_class", "flow_component"), rows), 0 if ok else NEGATIVE


def cmd_simulate(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    x0 = _vector(args.x0, chain.n, "--x0") if args.x0 else np.linspace(0.0, 1.0, chain.n)
    traj = simulate(chain, chain.t0, x0, h)
    aps = aps_backward(chain, chain.t0, h, _terminal(args.terminal, chain.n))
    head = _header("simulate", source=_source(args), horizon=h, terminal=args.terminal,
                   x0=",".join(fmt(v) for v in x0))
    return head + "\n" + traj.to_tsv(aps), 0


def cmd_rate(args):
    chain = _load_chain(args)
    h = _horizon(args, chain)
    aps = aps_backward(chain, chain.t0, h, _terminal(args.terminal, chain.n))
    gamma = strong_aperiodicity_gamma(chain.materialize(h))
    ep = epoch_times(chain, args.delta, h, args.flow_mode)
    chk = contraction_check(chain, aps, ep.times, gamma, aps.p_star, args.delta, seed=args.seed)
    head = _header("rate", source=_source(args), horizon=h, delta=args.delta, flow_mode=args.flow_mode,
                   gamma=fmt(gamma), p_star=fmt(aps.p_star), bound=fmt(chk.bound),
                   verdict="holds" if chk.holds else "violated", note=ep.diagnostic or chk.diagnostic or None)
    rows = [(q + 1, t, r, chk.bound) for q, (t, r) in enumerate(zip(ep.times, chk.per_epoch_ratio))]
    return head + "\n" + _table(("epoch", "time", "worst_ratio", "bound"), rows), 0 if chk.holds else NEGATIVE


def cmd_bound(args):
    p = EtaParams(args.n, args.gamma, args.p0, args.beta, args.deviation)
    log_eta = log_eta_n(p)
    head = _header("bound", n=p.n, gamma=p.gamma, p0=p.p0, beta=p.beta, deviation=p.delta)
    rows = [(p.n, p.gamma, p.p0, p.beta, p.delta, math.exp(log_eta), log_eta)]
    return head + "\n" + _table(("n", "gamma", "p0", "beta", "deviation", "eta", "log_eta"), rows), 0


def _load_ct(args):
    if args.input is None:
        raise CliError("continuous-time subcommands need --input")
    chain = read_ct(_resolve(args.input))
    grid = parse_grid(args.grid) if args.grid else chain.breaks
    return chain.with_grid(grid)


def cmd_ct_phi(args):
    chain = _load_ct(args)
    tau = args.tau if args.tau is not None else 0.0
    t = args.t if args.t is not None else chain.end
    op = transition(chain, tau, t)
    head = _header("ct-phi", source=_source(args), tau=fmt(tau), t=fmt(t), segments=op.step_count,
                   max_local_error=fmt(op.max_local_error), clamped=op.clamped)
    rows = [tuple(float(v) for v in r) for r in op.matrix]
    return head + "\n" + _table(tuple(f"col_{j}" for j in range(chain.n)), rows), 0


def cmd_ct_sample(args):
    chain = _load_ct(args)
    b = sample_discrete(chain)
    head = _header("ct-sample", source=_source(args), grid=",".join(fmt(v) for v in chain.grid))
    return head + "\n" + format_chain(b), 0


def cmd_ct_reciprocity(args):
    chain = _load_ct(args)
    k = len(chain.grid) - 1
    levels = [max(1, k >> j) for j in (2, 1, 0)] if k >= 4 else [k]
    trend = [(chain.grid[m], ct_reciprocity_beta(chain, args.p0, upto=m)) for m in levels]
    grows = len(trend) >= 2 and looks_unbounded(trend)
    head = _header("ct-reciprocity", source=_source(args), p0=args.p0, intervals=k,
                   verdict="unbounded" if grows else "bounded")
    return head + "\n" + _table(("grid_time", "beta_required"), trend), NEGATIVE if grows else 0


def cmd_generate(args):
    if args.family is None:
        raise CliError("generate needs --family")
    chain = generate(_spec(args), args.count)
    head = _header("generate", source=_source(args), n=args.n, count=args.count)
    return head + "\n" + format_chain(chain), 0


COMMANDS = {
    "validate": (cmd_validate, "classify the chain and report gamma and deviation"),
    "reciprocity": (cmd_reciprocity, "smallest beta for approximate reciprocity at --p0"),
    "aps": (cmd_aps, "absolute probability sequence from a terminal vector"),
    "pstar": (cmd_pstar, "horizon-bounded evidence for membership in class P*"),
    "flowgraph": (cmd_flowgraph, "truncated infinite flow graph"),
    "classes": (cmd_classes, "ergodic classes against flow-graph components"),
    "simulate": (cmd_simulate, "trajectory of x(t+1) = A(t) x(t) with weighted variance"),
    "rate": (cmd_rate, "epoch contraction of the weighted variance against the rate factor"),
    "bound": (cmd_bound, "closed-form product lower bound eta_n"),
    "ct-phi": (cmd_ct_phi, "continuous-time state-transition matrix"),
    "ct-sample": (cmd_ct_sample, "sample a continuous-time chain on a grid"),
    "ct-reciprocity": (cmd_ct_reciprocity, "continuous-time approximate reciprocity on a grid"),
    "generate": (cmd_generate, "write a seeded random chain file"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chainlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", help="chain file, or @name for a shipped example")
        p.add_argument("--output", help="write here instead of stdout")
        p.add_argument("--seed", type=int, default=0)
        if name in ("bound",):
            p.add_argument("--n", type=int, required=True)
            p.add_argument("--gamma", type=float, required=True)
            p.add_argument("--p0", type=float, required=True)
            p.add_argument("--beta", type=float, default=0.0)
            p.add_argument("--deviation", type=float, default=0.0)
            continue
        if name.startswith("ct-"):
            p.add_argument("--grid", help="sample times, comma separated (default: segment breakpoints)")
            if name == "ct-phi":
                p.add_argument("--tau", type=float)
                p.add_argument("--t", type=float)
            if name == "ct-reciprocity":
                p.add_argument("--p0", type=float, required=True)
            continue
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--params", help="family parameters, e.g. pair_prob=0.5,mixing=0.5")
        p.add_argument("--n", type=int)
        p.add_argument("--count", type=int, default=DEFAULT_HORIZON)
        if name == "generate":
            continue
        p.add_argument("--horizon", type=int, help="steps past t0")
        if name in ("reciprocity", "pstar"):
            p.add_argument("--p0", type=float, required=True)
        if name in ("aps", "simulate", "rate"):
            p.add_argument("--terminal", default="uniform", help="uniform, basis:i or a stochastic vector")
        if name in ("flowgraph", "classes"):
            p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        if name in ("validate", "classes"):
            p.add_argument("--tol", type=float, default=1e-9 if name == "validate" else 1e-6)
        if name == "simulate":
            p.add_argument("--x0", help="initial state, comma separated")
        if name == "rate":
            p.add_argument("--delta", type=float, default=0.1)
            p.add_argument("--flow-mode", choices=FLOW_MODES, default="cross")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        text, status = fn(args)
    except UnreadableInput as exc:
        print(f"unreadable input: {exc}", file=sys.stderr)
        return 1
    except MalformedSpec as exc:
        print(f"malformed spec: {exc}", file=sys.stderr)
        return 1
    except DimensionMismatch as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return 1
    except (ChainError, ChainIndexError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
