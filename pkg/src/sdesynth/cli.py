"""Command line entry point.

Exit codes: 0 success, 1 invalid input, 2 non-convergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

import numpy as np

from .automata import AutomatonError, format_automaton, format_safety_automaton
from .evaluate import Ind2Scorer, monte_carlo_sat, qualitative_winning
from .experiment import ground_truth, load_problem, run_session, write_csv
from .ltl import LtlSyntaxError
from .params import Params, ParamsError, load_params
from .product import format_pattern, format_supervisor, parse_supervisor
from .sdes import ModelError
from .synth import NonConvergenceError, build_supervisor, max_reach_prob, sat_prob_under, value_iterate, winning_region

EXIT_OK, EXIT_INVALID, EXIT_NONCONV, EXIT_IO = 0, 1, 2, 3


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _params(args) -> Params | None:
    p = load_params(args.params) if args.params else None
    if getattr(args, "seed", None) is not None and p is not None:
        p = p.updated(seed=args.seed)
    return p


def _problem(args):
    params = _params(args)
    problem = load_problem(args.model, args.spec, params)
    if getattr(args, "seed", None) is not None:
        problem.params = problem.params.updated(seed=args.seed)
    return problem


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_translate(args) -> int:
    from .experiment import make_cba
    from .automata import determinize

    spec = Path(args.spec).read_text(encoding="utf-8") if Path(args.spec).is_file() else args.spec
    params = _params(args) or Params()
    K = args.K if args.K is not None else params.K
    ap = [a for a in (args.ap or "").split(",") if a]
    cba = make_cba(spec, ap)
    safety = determinize(cba, K)
    out = _out(args)
    (out / "cba.txt").write_text(format_automaton(cba), encoding="utf-8")
    (out / "safety.txt").write_text(format_safety_automaton(safety), encoding="utf-8")
    print(f"cba states: {len(cba.states)}")
    print(f"safety states: {safety.n_states} (K={K})")
    return EXIT_OK


def cmd_synth(args) -> int:
    problem = _problem(args)
    prod = problem.prod
    q = value_iterate(prod, problem.params)
    W = winning_region(q)
    sv = build_supervisor(q)
    out = _out(args)
    (out / "qtable.csv").write_text(q.to_csv(), encoding="utf-8")
    (out / "winning.txt").write_text("".join(prod.name(i) + "\n" for i in sorted(W)), encoding="utf-8")
    (out / "supervisor.txt").write_text(format_supervisor(sv), encoding="utf-8")
    sat = sat_prob_under(prod, sv)
    lines = [
        f"product_states,{prod.n}",
        f"winning_states,{len(W)}",
        f"initial,{prod.name(prod.initial)}",
        f"initial_value,{_g(q.state_values()[prod.initial])}",
        f"sat_prob,{_g(sat)}",
        f"initial_winning,{prod.initial in W}",
        f"sweeps,{q.sweeps}",
        f"residual,{_g(q.residual)}",
    ]
    (out / "summary.csv").write_text("key,value\n" + "\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


def cmd_learn(args) -> int:
    problem = _problem(args)
    prod, params = problem.prod, problem.params
    out = _out(args)
    truth = ground_truth(problem) if args.ground_truth else None
    base = params.seed
    results = []
    for k in range(args.sessions):
        res = run_session(problem, base + k, truth, log_every=args.log_every)
        d = out / f"session_{k:02d}"
        d.mkdir(exist_ok=True)
        write_csv(d / "stage1.csv", ["episode", "avg_reward", "steps_in_Wk", "|Wk|", "|Wkp|"], res.stage1.curve)
        write_csv(d / "stage2.csv", ["episode", "return", "Ind2"], res.stage2.curve)
        if truth is not None:
            write_csv(d / "ind1.csv", ["episode", "ind1"], res.stage1.ind1)
            write_csv(d / "ind2.csv", ["episode", "ind2"], [(e, v) for e, _, v in res.stage2.curve if v == v])
        (d / "qtable.csv").write_text(res.stage2.q.to_csv(), encoding="utf-8")
        (d / "supervisor.txt").write_text(format_supervisor(res.supervisor), encoding="utf-8")
        results.append(res)
        msg = f"session {k}: stage1 episodes {res.stage1.episodes}, |W_inf| {len(res.stage1.winning)}"
        if truth is not None:
            msg += f", W exact {res.stage1.winning == truth.winning}, Ind1 {res.ind1:.4f}"
            msg += f", Ind2 {res.ind2:.4f}" if res.ind2 is not None else ", Ind2 n/a"
        print(msg, flush=True)
    rows = []
    for k, r in enumerate(results):
        row = [k, base + k, r.stage1.episodes, len(r.stage1.winning), r.stage2.episodes, r.stage2.steps,
               sat_prob_under(prod, r.supervisor)]
        if truth is not None:
            row += [r.stage1.winning == truth.winning, r.ind1, "" if r.ind2 is None else r.ind2]
        rows.append(row)
    header = ["session", "seed", "stage1_episodes", "|W_inf|", "stage2_episodes", "stage2_steps", "sat_prob"]
    if truth is not None:
        header += ["W_exact", "ind1", "ind2"]
    write_csv(out / "summary.csv", header, rows)
    if not args.no_plots:
        from . import plotting

        plotting.plot_stage1([np.array(r.stage1.curve) for r in results], out / "stage1.png")
        if not all(r.stage2.skipped for r in results):
            plotting.plot_returns([np.array(r.stage2.curve) for r in results if not r.stage2.skipped], out / "stage2_returns.png")
        if truth is not None:
            plotting.plot_ind1([np.array(r.stage1.ind1) for r in results], out / "ind1.png")
            plotting.plot_ind2([r.ind2 for r in results], out / "ind2_hist.png")
    return EXIT_OK


def cmd_simulate(args) -> int:
    problem = _problem(args)
    prod = problem.prod
    sv = parse_supervisor(prod, Path(args.supervisor).read_text(encoding="utf-8"))
    rng = random.Random(problem.params.seed)
    s = prod.initial
    model = prod.model
    lines = ["step,state,pattern,event,next_state,label"]
    hit = False
    for t in range(args.steps):
        if s == prod.sink:
            hit = True
            break
        pattern = sv[s]
        e, s_next = model.sample_step(prod.sdes_state(s), pattern, rng)
        q2 = problem.safety.step(prod.keys[s][1], model.label(s_next))
        nxt = prod.sink if q2 == problem.safety.sink else prod.index[(s_next, q2)]
        label = ",".join(sorted(model.label(s_next)))
        lines.append(f'{t},"{prod.name(s)}","{format_pattern(pattern)}",{e},"{prod.name(nxt)}","{label}"')
        s = nxt
    hit = hit or s == prod.sink
    lines.append(f"# unsafe sink entered: {hit}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _closed_part(sv, region) -> frozenset[int]:
    # largest subset of ``region`` that ``sv`` never leaves; runs entering it are safe
    keep = set(region)
    changed = True
    while changed:
        changed = False
        for i in list(keep):
            if any(j not in keep for j, p in sv.distribution(i).items() if p > 0):
                keep.discard(i)
                changed = True
    return frozenset(keep)


def cmd_eval(args) -> int:
    problem = _problem(args)
    prod = problem.prod
    q = value_iterate(prod, problem.params)
    W = winning_region(q)
    Wq, _ = qualitative_winning(prod)
    out = _out(args)
    report = []
    report.append(f"product states: {prod.n}")
    report.append(f"winning region (value iteration): {len(W)} states")
    report.append(f"winning region (fixpoint oracle): {len(Wq)} states")
    only_dp = sorted(prod.name(i) for i in W - Wq)
    only_fp = sorted(prod.name(i) for i in Wq - W)
    report += [f"- {n} (value iteration only)" for n in only_dp]
    report += [f"+ {n} (fixpoint only)" for n in only_fp]
    report.append("winning regions agree" if not only_dp and not only_fp else "winning regions DIFFER")
    if args.supervisor:
        sv = parse_supervisor(prod, Path(args.supervisor).read_text(encoding="utf-8"))
        label = args.supervisor
    else:
        sv = build_supervisor(q)
        label = "synthesized"
    exact = sat_prob_under(prod, sv)
    best = max_reach_prob(prod, W)[prod.initial]
    mc = monte_carlo_sat(prod, sv, args.trials, seed=problem.params.seed, resolved_safe=_closed_part(sv, W))
    report.append(f"supervisor: {label}")
    report.append(f"exact satisfaction probability: {_g(exact)}")
    report.append(f"optimal satisfaction probability: {_g(best)}")
    report.append(f"monte carlo ({args.trials} runs): {_g(mc.estimate)} +/- {_g(mc.half_width)} (unresolved {_g(mc.unresolved)})")
    ok = abs(mc.estimate - exact) <= mc.half_width + 1e-12 or mc.half_width == 0 and mc.estimate == exact
    report.append("monte carlo agrees with exact value" if ok else "monte carlo OUTSIDE its interval")
    if args.qtable:
        from .evaluate import ind1 as ind1_metric
        import csv

        vals = np.array(q.values)
        with open(args.qtable, encoding="utf-8") as fh:
            rd = csv.DictReader(fh)
            learned = {(r["state"], r["pattern"]): float(r["value"]) for r in rd}
        for i in range(prod.n):
            for p in prod.pair_range(i):
                vals[p] = learned[(prod.name(i), prod.pattern_name(prod.pattern_of(p)))]
        from .synth import QTable

        ql = QTable(prod, vals)
        svl = build_supervisor(ql)
        w_inf = winning_region(ql)
        i1 = ind1_metric(prod, build_supervisor(q), svl, W)
        i2 = Ind2Scorer(q, w_inf)(ql.values)
        report.append(f"ind1: {_g(i1)}")
        report.append(f"ind2: {_g(i2)}")
        write_csv(out / "ind1.csv", ["episode", "ind1"], [("final", i1)])
        write_csv(out / "ind2.csv", ["episode", "ind2"], [("final", i2)])
    text = "\n".join(report) + "\n"
    (out / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdesynth", description="Bounded LTL supervisor synthesis and learning for SDES")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON file or bundled fixture (three-state, two-robot)")
        p.add_argument("--spec", help="LTL formula, or a file holding a formula or an automaton")
        p.add_argument("--params", help="parameters JSON file")
        p.add_argument("--seed", type=int, help="override the seed parameter")

    p = sub.add_parser("translate", help="LTL to cBA and K-bounded safety automaton")
    common(p, model=False)
    p.add_argument("-K", type=int, help="counter bound (overrides params)")
    p.add_argument("--ap", help="comma-separated propositions for the alphabet")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("synth", help="value iteration, winning region and supervisor")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("learn", help="two-stage learning sessions")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--ground-truth", action="store_true", help="also compute Ind1/Ind2 against value iteration")
    p.add_argument("--log-every", type=int, default=100, help="Ind2 logging period in Stage 2 episodes")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("simulate", help="run a supervisor on the model")
    common(p)
    p.add_argument("--supervisor", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="cross-check against the independent oracles")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--supervisor")
    p.add_argument("--qtable", help="learned Q-table CSV to score with Ind1/Ind2")
    p.add_argument("--trials", type=int, default=10_000)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (ModelError, ParamsError, LtlSyntaxError, AutomatonError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
