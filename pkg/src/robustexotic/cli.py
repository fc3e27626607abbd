"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 no-arbitrage failure (the report
is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from typing import Optional

from ._numeric import DEFAULT_TOL, MODES, RATIONAL, format_ext
from .actions import DEFAULT_PLAN_BUDGET, DEFAULT_POLICY_BUDGET, ActionError, BudgetExceeded, load_actions
from .market import EmptyPolytope, MarketError, load_market, node_key

EXIT_OK, EXIT_INPUT, EXIT_NA = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    market: Optional[str]
    actions: Optional[str]
    example: Optional[str]
    mode: str = RATIONAL
    tol: float = DEFAULT_TOL
    budget_paths: int = DEFAULT_PLAN_BUDGET
    budget_policies: int = DEFAULT_POLICY_BUDGET
    out: Optional[str] = None
    dump_values: Optional[str] = None

    def validate(self):
        if self.example is None and (self.market is None or self.actions is None):
            raise InputError("cli: give --market and --actions, or --example")
        if self.budget_paths <= 0 or self.budget_policies <= 0:
            raise InputError("cli: budgets must be positive")


class InputError(Exception):
    pass


def _load(cfg: RunConfig):
    if cfg.example is not None:
        from .examples import example_paths, NAMES

        if cfg.example not in NAMES:
            raise InputError(f"cli: unknown example {cfg.example!r}; choose from {', '.join(NAMES)}")
        mpath, apath = (str(p) for p in example_paths(cfg.example))
    else:
        mpath, apath = cfg.market, cfg.actions
    try:
        m = load_market(mpath)
    except FileNotFoundError:
        raise InputError(f"market_model: file not found: {mpath}") from None
    except (MarketError, json.JSONDecodeError) as exc:
        raise InputError(f"market_model: {mpath}: {exc}") from None
    try:
        payoff = load_actions(apath, m, plan_budget=cfg.budget_paths)
    except FileNotFoundError:
        raise InputError(f"action_model: file not found: {apath}") from None
    except (ActionError, json.JSONDecodeError) as exc:
        raise InputError(f"action_model: {apath}: {exc}") from None
    size = len(m.tree.leaves()) * len(payoff.space) ** (m.horizon + 1)
    if size > cfg.budget_paths:
        raise InputError(f"enlarged_space: {size} enlarged paths exceed budget {cfg.budget_paths}")
    return m, payoff


def _emit(cfg: RunConfig, text: str, path: Optional[str] = None):
    path = path or cfg.out
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _first_bad_node(m, mode):
    from .arbitrage import local_na

    for k in range(m.horizon):
        for node in m.support.reachable_at(k):
            if not local_na(m, node, mode):
                return node
    return None


def cmd_price(cfg: RunConfig) -> int:
    from .duality import price_report

    m, payoff = _load(cfg)
    rep = price_report(m, payoff, cfg.mode, cfg.tol, cfg.budget_policies)
    _emit(cfg, rep.to_json() + "\n")
    if cfg.dump_values and rep.na["holds"] and not m.static_options:
        _dump(cfg, m, payoff, cfg.dump_values)
    return EXIT_OK if rep.na["holds"] else EXIT_NA


def cmd_hedge(cfg: RunConfig) -> int:
    from .arbitrage import check_na
    from .dp import backward_induction, extract_hedge

    m, payoff = _load(cfg)
    if m.static_options:
        raise InputError("dp_engine: one-step hedges need a market without static options; "
                         "use 'price' for the static-plus-dynamic portfolio")
    if not check_na(m, mode=cfg.mode).holds:
        node = _first_bad_node(m, cfg.mode)
        where = f" at node {node_key(node)!r}" if node is not None else ""
        print(f"arbitrage: no-arbitrage fails{where}", file=sys.stderr)
        return EXIT_NA
    _, table = backward_induction(m, payoff, cfg.mode)
    hedge = extract_hedge(table)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["kind", "level", "atom_key", "values"])
    out.writerow(["capital", 0, "", format_ext(hedge.initial)])
    for (node, prefix), y in sorted(hedge.positions.items()):
        out.writerow(["position", len(node), f"{node_key(node)}|{'/'.join(prefix)}",
                      ";".join(format_ext(v) for v in y)])
    _emit(cfg, buf.getvalue())
    return EXIT_OK


def cmd_gap(cfg: RunConfig) -> int:
    from .arbitrage import check_na
    from .duality import dual_enlarged, naive_model_price, superhedge_primal_original
    from ._numeric import close, leq

    m, payoff = _load(cfg)
    na = check_na(m, mode=cfg.mode)
    naive = naive_model_price(m, payoff, cfg.mode, cfg.budget_policies).value
    dual = dual_enlarged(m, payoff, True, cfg.mode).value
    primal = superhedge_primal_original(m, payoff, cfg.mode).value
    doc = {
        "naive_model_price": format_ext(naive),
        "dual_enlarged": format_ext(dual),
        "primal_original": format_ext(primal),
        "gap": format_ext(primal - naive) if naive != float("-inf") and primal not in (float("inf"), float("-inf"))
        else None,
        "flags": {
            "naive_lt_dual": leq(naive, dual, cfg.mode, cfg.tol) and not close(naive, dual, cfg.mode, cfg.tol),
            "primal_eq_dual": close(primal, dual, cfg.mode, cfg.tol),
            "na_holds": na.holds,
        },
    }
    _emit(cfg, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if na.holds else EXIT_NA


def cmd_check_na(cfg: RunConfig) -> int:
    from .arbitrage import ENLARGED, ORIGINAL, check_na, measure_polar_leaves, polar_leaves

    m, payoff = _load(cfg)
    orig = check_na(m, ORIGINAL, None, cfg.mode)
    enl = check_na(m, ENLARGED, payoff.space, cfg.mode)
    doc = {"original": orig.to_document(), "enlarged": enl.to_document(), "agree": orig.holds == enl.holds}
    if orig.holds:
        doc["polar_sets_equal"] = polar_leaves(m) == measure_polar_leaves(m, cfg.mode)
    _emit(cfg, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if orig.holds and enl.holds else EXIT_NA


def _dump(cfg, m, payoff, path):
    from .dp import backward_induction

    _, table = backward_induction(m, payoff, cfg.mode)
    _emit(cfg, table.to_csv(), path)


def cmd_dump_values(cfg: RunConfig) -> int:
    m, payoff = _load(cfg)
    _dump(cfg, m, payoff, cfg.dump_values or cfg.out)
    return EXIT_OK


COMMANDS = {
    "price": cmd_price,
    "hedge": cmd_hedge,
    "gap": cmd_gap,
    "check-na": cmd_check_na,
    "dump-values": cmd_dump_values,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustexotic", description="Robust superhedging of multi-action options.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--market", help="market JSON file")
        p.add_argument("--actions", help="action/payoff JSON file")
        p.add_argument("--example", help="shipped example name (replaces --market/--actions)")
        p.add_argument("--mode", choices=MODES, default=RATIONAL)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--budget-paths", type=int, default=DEFAULT_PLAN_BUDGET)
        p.add_argument("--budget-policies", type=int, default=DEFAULT_POLICY_BUDGET)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--dump-values", help="also write the value table as CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.command, args.market, args.actions, args.example, args.mode, args.tol,
                    args.budget_paths, args.budget_policies, args.out, args.dump_values)
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptyPolytope as exc:
        print(f"arbitrage: {exc}", file=sys.stderr)
        return EXIT_NA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
