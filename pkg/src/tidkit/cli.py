"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 inference or estimation
error, 3 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .cases import dumps_cases, read_cases, simulate, write_cases
from .exceptions import ConfigError, InvalidNetworkError, TidkitError
from .harness import ExperimentConfig, RiskSettings, emit_report, parse_report, run_pilot
from .inference import evaluate_decision, posterior
from .kb import KnowledgeBase, summarize, tailor
from .netio import read_network, write_network
from .network import Network, validate
from .selection.criteria import Criterion, rank
from .selection.estimate import CandidateSpec, estimate
from .selection.logscore import sequential_log_score
from .temporal import (
    SliceSequence,
    TemporalArcPolicy,
    TemporalSpec,
    count_elements,
    flatten_structure,
    generate_arcs,
    persistence_transitions,
    unroll,
)

EXIT_OK, EXIT_INVALID, EXIT_INFERENCE, EXIT_CONFIG = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_assignments(items: Sequence[str] | None) -> dict[str, str]:
    """``["A=present", "B=absent"]`` -> ``{"A": "present", "B": "absent"}``."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"expected VAR=STATE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_policy(text: str) -> TemporalArcPolicy:
    """Policy from ``kind[:order[:scope]]``.

    ``markov:2``, ``driving:1:App,NSAP``, ``observable:1`` (findings) or
    ``custom:SRC>TGT@LAG,...``.
    """
    kind, _, rest = text.partition(":")
    if kind == "custom":
        arcs = []
        for part in filter(None, rest.split(",")):
            try:
                src, tail = part.split(">")
                tgt, lag = tail.split("@")
                arcs.append((src, tgt, int(lag)))
            except ValueError:
                raise ConfigError(f"bad custom arc {part!r}; expected SRC>TGT@LAG") from None
        return TemporalArcPolicy.custom(arcs)
    order_s, _, scope_s = rest.partition(":")
    try:
        order = int(order_s) if order_s else 1
    except ValueError:
        raise ConfigError(f"bad policy order in {text!r}") from None
    scope = tuple(filter(None, scope_s.split(","))) or None
    try:
        return TemporalArcPolicy(kind, order, scope)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _temporal_net(args, doc):
    """Unroll ``doc`` over ``args.slices`` copies using its temporal section or persistence tables."""
    slices = SliceSequence.copies(doc.network.bn_portion() if args.bn else doc.network, args.slices)
    if args.policy:
        policy = parse_policy(args.policy)
    elif doc.temporal is not None:
        policy = doc.temporal.policy
    else:
        raise ConfigError("no temporal policy: pass --policy or use a file with a temporal section")
    if args.persistence is not None:
        transitions = persistence_transitions(slices[0], generate_arcs(policy, slices), args.persistence)
    elif doc.temporal is not None:
        transitions = doc.temporal.transitions
    else:
        transitions = ()
    return unroll(slices, policy, transitions)


def _add_unroll_flags(p):
    p.add_argument("--slices", type=int, default=1, help="number of slices (default 1: no unrolling)")
    p.add_argument("--policy", help="temporal policy, e.g. markov:1, driving:1:App,NSAP, observable:1")
    p.add_argument("--persistence", type=float, help="generate persistence transition tables with this weight")
    p.add_argument("--bn", action="store_true", help="drop decision and value nodes first")


def _network_for(args):
    doc = read_network(args.network)
    if args.slices > 1 or args.policy:
        return _temporal_net(args, doc).flattened
    return doc.network.bn_portion() if args.bn else doc.network


# -- subcommands -------------------------------------------------------------------


def cmd_validate(args) -> int:
    doc = read_network(args.network)
    problems = validate(doc.network)
    if not problems and args.kb:
        try:
            KnowledgeBase(doc.network, doc.temporal)
        except InvalidNetworkError as exc:
            problems = exc.violations
    for v in problems:
        print(v)
    if problems:
        print(f"{len(problems)} problem(s)")
        return EXIT_INVALID
    print(f"ok: {len(doc.network)} nodes, {len(doc.network.arcs)} arcs")
    return EXIT_OK


def cmd_infer(args) -> int:
    net = _network_for(args).check()
    evidence = parse_assignments(args.evidence)
    if args.decide:
        res = evaluate_decision(net, evidence)
        print(json.dumps({"decision": res.decision, "action": res.action, "expected_loss": res.as_dict()}, indent=2))
        return EXIT_OK
    if not args.query:
        raise ConfigError("infer needs --query (or --decide)")
    out = {}
    for q in args.query:
        d = posterior(net, evidence, q)
        out[q] = {s: float(p) for s, p in zip(d.states[0], d.probs)}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_tailor(args) -> int:
    kb = KnowledgeBase.load(args.kb)
    obs = parse_assignments(args.obs)
    if args.obs_file:
        obs.update(json.loads(Path(args.obs_file).read_text(encoding="utf-8")))
    net = tailor(kb, obs)
    if args.bn:
        net = net.bn_portion()
    temporal = None
    if kb.temporal is not None:
        kept = set(net.nodes)
        temporal = TemporalSpec(kb.temporal.policy, tuple(t for t in kb.temporal.transitions if t.variable in kept))
    if args.out:
        write_network(args.out, net, temporal)
    print(json.dumps(summarize(net)))
    return EXIT_OK


def cmd_unroll(args) -> int:
    doc = read_network(args.network)
    tn = _temporal_net(args, doc)
    if args.out:
        write_network(args.out, tn.flattened)
    c = count_elements(tn)
    print(json.dumps({"nodes": c.n_nodes, "arcs": c.n_arcs, "temporal_arcs": list(c.temporal_arcs)}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    net = _network_for(args)
    cases = simulate(net, args.count, args.seed)
    if args.out:
        write_cases(args.out, cases)
        print(f"wrote {len(cases)} cases to {args.out}")
    else:
        sys.stdout.write(dumps_cases(cases))
    return EXIT_OK


def _slices(args) -> SliceSequence:
    doc = read_network(args.network)
    return SliceSequence.copies(doc.network.bn_portion() if args.bn else doc.network, args.slices)


def _case_shape(slices: SliceSequence) -> Network:
    """Structure-only network naming every flattened node (for reading case files)."""
    return Network(flatten_structure(slices, []), {}, {})


def cmd_estimate(args) -> int:
    slices = _slices(args)
    policy = parse_policy(args.policy or "markov:1")
    cases = read_cases(args.cases, _case_shape(slices))
    gamma = tuple(int(b) for b in args.gamma) if args.gamma else None
    model = estimate(policy, gamma, cases, slices, args.alpha, args.label)
    if args.out:
        write_network(args.out, model.network)
    print(json.dumps({"label": model.label, "gamma": str(model.gamma), "free_params": model.free_param_count}))
    return EXIT_OK


def cmd_score(args) -> int:
    net = read_network(args.network).network
    cases = read_cases(args.cases, net)
    s = sequential_log_score(net, cases, args.target, args.evidence)
    print(json.dumps({"total": s.total, "cases": len(s), "impossible": int(s.impossible.sum())}))
    if args.trace:
        for cid, v, tot in zip(cases.case_ids, s.per_case, s.trace):
            print(f"{cid}\t{v!r}\t{tot!r}")
    return EXIT_OK


def cmd_select(args) -> int:
    slices = _slices(args)
    specs = []
    for item in args.candidate:
        label, _, pol = item.partition("=")
        if not pol:
            raise ConfigError(f"candidate must be LABEL=POLICY, got {item!r}")
        specs.append(CandidateSpec(label, parse_policy(pol)))
    cases = read_cases(args.cases, _case_shape(slices))
    models = [estimate(s.policy, None, cases, slices, args.alpha, s.label) for s in specs]
    crit = Criterion.from_dict(args.criterion) if args.penalty is None else Criterion.generic(args.penalty)
    ranked = rank(models, cases, crit, args.sigma2)
    for v, m in ranked:
        print(f"{m.label}\t{m.free_param_count}\t{v!r}")
    print(f"selected\t{ranked[0][1].label}")
    return EXIT_OK


def _pilot_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    flags = {}
    for name in ("seed", "cases", "n_slices", "eval_cases"):
        if getattr(args, name) is not None:
            flags[name] = getattr(args, name)
    if args.kb is not None:
        flags["kb"] = args.kb
    if args.criteria:
        flags["criteria"] = tuple(Criterion.from_dict(c) for c in args.criteria.split(","))
    cfg = replace(cfg, **flags)
    if args.ri_thetas or args.ri_datasets or args.ri_cases:
        r = cfg.risk
        cfg = replace(
            cfg,
            risk=RiskSettings(args.ri_thetas or r.thetas, args.ri_datasets or r.datasets, args.ri_cases or r.cases, r.concentration),
        )
    if args.config:
        cfg = ExperimentConfig.load(args.config, base=cfg)
    return cfg


def cmd_pilot(args) -> int:
    cfg = _pilot_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return EXIT_OK
    report = run_pilot(cfg)
    _out(emit_report(report, args.format), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    report = parse_report(Path(args.report).read_text(encoding="utf-8"))
    _out(emit_report(report, args.format), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tidkit", description="Temporal influence diagrams: inference, unrolling and model selection.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="check a network or knowledge-base file")
    s.add_argument("network")
    s.add_argument("--kb", action="store_true", help="also apply knowledge-base rules")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("infer", help="posterior marginals or the best decision")
    s.add_argument("network")
    s.add_argument("--evidence", "-e", nargs="*", metavar="VAR=STATE")
    s.add_argument("--query", "-q", nargs="*", metavar="VAR")
    s.add_argument("--decide", action="store_true", help="evaluate the decision node instead")
    _add_unroll_flags(s)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("tailor", help="cut a slice network around observed findings")
    s.add_argument("kb")
    s.add_argument("--obs", nargs="*", metavar="FINDING=STATE")
    s.add_argument("--obs-file", help="JSON object of observations")
    s.add_argument("--bn", action="store_true", help="drop decision and value nodes")
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_tailor)

    s = sub.add_parser("unroll", help="join slice copies with temporal arcs")
    s.add_argument("network")
    _add_unroll_flags(s)
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_unroll)

    s = sub.add_parser("simulate", help="forward-sample complete cases")
    s.add_argument("network")
    s.add_argument("--count", "-n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    _add_unroll_flags(s)
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate a candidate from a case file")
    s.add_argument("network", help="slice network")
    s.add_argument("--cases", required=True)
    s.add_argument("--slices", type=int, required=True)
    s.add_argument("--policy", default="markov:1")
    s.add_argument("--gamma", help="indicator bits, e.g. 1101")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--label")
    s.add_argument("--bn", action="store_true")
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("score", help="sequential log score of a case file")
    s.add_argument("network")
    s.add_argument("--cases", required=True)
    s.add_argument("--target", nargs="*")
    s.add_argument("--evidence", nargs="*")
    s.add_argument("--trace", action="store_true", help="print per-case scores and running totals")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("select", help="estimate candidates and rank them by a criterion")
    s.add_argument("network", help="slice network")
    s.add_argument("--cases", required=True)
    s.add_argument("--slices", type=int, required=True)
    s.add_argument("--candidate", "-c", action="append", required=True, metavar="LABEL=POLICY")
    s.add_argument("--criterion", default="AIC", help="AIC, BIC or LOGSCORE0")
    s.add_argument("--penalty", type=float, help="generic penalty coefficient (overrides --criterion)")
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--bn", action="store_true")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("pilot", help="run the pilot experiment")
    s.add_argument("--config", help="JSON config (overrides flags)")
    s.add_argument("--kb")
    s.add_argument("--seed", type=int)
    s.add_argument("--cases", type=int)
    s.add_argument("--n-slices", dest="n_slices", type=int)
    s.add_argument("--eval-cases", dest="eval_cases", type=int)
    s.add_argument("--criteria", help="comma-separated preset names")
    s.add_argument("--ri-thetas", type=int)
    s.add_argument("--ri-datasets", type=int)
    s.add_argument("--ri-cases", type=int)
    s.add_argument("--format", choices=("table", "machine"), default="table")
    s.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_pilot)

    s = sub.add_parser("report", help="re-render a machine-readable report")
    s.add_argument("report")
    s.add_argument("--format", choices=("table", "machine"), default="table")
    s.add_argument("--out", "-o")
    s.set_defaults(func=cmd_report)
    return p


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InvalidNetworkError):
        return EXIT_INVALID
    if isinstance(exc, ConfigError) or (isinstance(exc, (OSError, ValueError)) and not isinstance(exc, TidkitError)):
        return EXIT_CONFIG
    return EXIT_INFERENCE


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TidkitError, OSError, ValueError) as exc:
        print(f"tidkit {args.command}: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
